from .cliutils import (
    ESS,
    ETA,
    EXPENSIVE_COST,
    EXPENSIVE_DELAY,
    NO_HEADER_META,
    OUT,
    PARTITION,
    REG_EPS,
    RESAMPLE,
    SCHEME,
    SEED,
    SELECT,
    CLIUtils,
    ResultRow,
)
from models import MODELS, generate_synthetic, get_model
from models.linear import LinearGaussianModel, kalman_log_evidence
from smc.filters import AdaptiveM, Algorithm, FilterTrace, run_filter
from utils.command import Extension, Option, subcommand
from utils.errors import ConfigError

import numpy as np


TRACE_SCHEMA = 'cmcpf.trace/1'


def trace_rows(trace: FilterTrace) -> list:
    rows = list()
    for step in range(len(trace.estimates)):
        rows.append(
            [
                step + 1,
                *trace.estimates[step],
                trace.ess[step],
                int(trace.resampled[step]),
                trace.log_evidence[step],
                int(trace.evaluations[step]),
                int(trace.m_used[step]),
                int(trace.wiped[step]),
            ]
        )

    return rows


def trace_header(trace: FilterTrace) -> list:
    estimates = [f'x{i}' for i in range(trace.estimates.shape[1])]
    return ['t', *estimates, 'ess', 'resampled', 'log_z', 'evaluations', 'm', 'wiped']


class FilterCommands(Extension, name='Filter'):
    def __init__(self, cli):
        super().__init__(cli)

        self.utils: CLIUtils = self.cli.get_extension('Utilities')

    def _build_model(self, args):
        kwargs = dict()
        if args.model == 'kepler':
            kwargs['objects'] = args.objects
        elif args.objects:
            raise ConfigError('--objects only applies to the kepler model.')

        return get_model(
            args.model, cost=args.expensive_cost, delay=args.expensive_delay, **kwargs
        )

    def _run(self, args, run: int) -> tuple:
        model = self._build_model(args)
        horizon = args.horizon or getattr(model, 'horizon', 50)
        states, observations = generate_synthetic(
            model, horizon, self.utils.data_stream(args.seed, run)
        )

        adaptive = AdaptiveM(args.adaptive, args.gamma, args.m_min)
        cfg = self.utils.filter_config(
            args, Algorithm(args.algorithm), args.n, args.m, run, adaptive
        )
        trace = run_filter(model, observations, cfg)

        exact = None
        inner = getattr(model, 'inner', model)
        if isinstance(inner, LinearGaussianModel):
            exact, _ = kalman_log_evidence(inner, observations)

        return states, observations, trace, exact

    @subcommand(
        'filter',
        description='Run one filter on synthetic data from a state-space model.',
        options=(
            Option('--model', choices=sorted(MODELS), default='growth'),
            Option('--algorithm', choices=[a.value for a in Algorithm], default=Algorithm.CBPF.value),
            Option('--objects', type=int, default=0, help='Kepler object count S.'),
            Option('--horizon', type=int, default=None, help='Steps T (default per model).'),
            Option('--n', type=int, default=1000),
            Option('--m', type=int, default=None, help='Summary particles M (default N).'),
            Option('--runs', type=int, default=1),
            Option('--adaptive', action='store_true', help='Adapt M to the ESS (CBPF).'),
            Option('--gamma', type=float, default=1.0),
            Option('--m-min', type=int, default=1),
            Option('--trace', action='store_true', help='Write the per-step trace of run 0.'),
            Option('--save-data', action='store_true', help='Write the synthetic data of run 0.'),
            PARTITION,
            SELECT,
            ETA,
            ESS,
            RESAMPLE,
            SCHEME,
            REG_EPS,
            SEED,
            OUT,
            EXPENSIVE_COST,
            EXPENSIVE_DELAY,
            NO_HEADER_META,
        ),
    )
    async def filter_cmd(self, args) -> None:
        if args.runs < 1:
            raise ConfigError('--runs must be positive.')

        if args.horizon is not None and args.horizon < 1:
            raise ConfigError('--horizon must be positive.')

        results = await self.utils.map_runs(
            self._run, ((args, run) for run in range(args.runs))
        )

        rows = list()
        for run, (states, _, trace, exact) in enumerate(results):
            cfg = trace.config
            common = ('filter', args.seed, run, cfg.n, cfg.m, cfg.algorithm.value, args.model)
            rows.append(ResultRow(*common, 'rmse', trace.rmse(states)))
            rows.append(ResultRow(*common, 'logZ', trace.log_z))
            rows.append(ResultRow(*common, 'eval_count', trace.total_evaluations))
            if exact is not None:
                rows.append(ResultRow(*common, 'logZ_exact', exact))

        out = await self.utils.output_dir(args)
        meta = not args.no_header_meta
        await self.utils.write_results(out / f'filter-{args.model}.csv', rows, meta)

        states, observations, trace, _ = results[0]
        if args.trace:
            await self.utils.write_csv(
                out / f'filter-{args.model}-trace.csv',
                trace_header(trace),
                trace_rows(trace),
                TRACE_SCHEMA,
                meta,
            )

        if args.save_data:
            await self.utils.write_dataset(out, f'data-{args.model}', states, observations, meta)

        rmse = np.mean([trace.rmse(s) for s, _, trace, _ in results])
        evaluations = np.mean([trace.total_evaluations for _, _, trace, _ in results])
        self.cli.logger.info(
            f'{args.algorithm.upper()} on {args.model}: mean RMSE {rmse:.4f}, '
            f'{evaluations:.0f} likelihood evaluations per run over {args.runs} run(s).'
        )


def setup(cli):
    cli.add_extension(FilterCommands(cli))
