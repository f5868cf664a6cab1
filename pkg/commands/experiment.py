from .cliutils import (
    ESS,
    ETA,
    EXPENSIVE_COST,
    M,
    N,
    NO_HEADER_META,
    OUT,
    PAPER_SCALE,
    PARTITION,
    RATIOS,
    RUNS,
    SEED,
    SELECT,
    CLIUtils,
    ResultRow,
)
from collections import defaultdict
from models import generate_synthetic, get_model
from models.targets import TARGETS, get_target
from smc.cmc import SelectionMode, cmc_estimate, compress
from smc.core import RngStream, WeightedCloud
from smc.filters import DATA, Algorithm, run_filter
from smc.partition import PartitionKind
from utils.command import Extension, Option, subcommand
from utils.errors import ConfigError

import numpy as np


MOMENTS = np.arange(1, 6)
EX1_SCHEMA = 'cmcpf.ex1/1'
SWEEP_SCHEMA = 'cmcpf.sweep/1'

# (method, partition, selection); SR resamples uniformly, full is the whole cloud
EX1_METHODS = (
    ('sr', '', ''),
    ('cmc', PartitionKind.RANDOM_GRID.value, SelectionMode.STOCHASTIC.value),
    ('cmc', PartitionKind.RANDOM_GRID.value, SelectionMode.WEIGHTED_MEAN.value),
    ('cmc', PartitionKind.UNIFORM_GRID.value, SelectionMode.STOCHASTIC.value),
    ('cmc', PartitionKind.UNIFORM_GRID.value, SelectionMode.WEIGHTED_MEAN.value),
)

EX1_SCALE = (
    {'runs': 200, 'n': 10_000, 'm': [10, 50, 100, 500]},
    {'runs': 1000, 'n': 100_000, 'm': [10, 50, 100, 500, 1000]},
)
SWEEP_SCALES = {
    'ex2': (
        {'runs': 200, 'n': 1000, 'm': None, 'ratios': [0.05, 0.1, 0.15, 0.2, 0.3, 0.5, 1.0]},
        {'runs': 5000, 'n': 1000, 'm': None, 'ratios': [0.05, 0.1, 0.15, 0.2, 0.3, 0.5, 1.0]},
    ),
    'ex3': (
        {'runs': 100, 'n': 1000, 'm': None, 'ratios': [0.02, 0.05, 0.1, 0.2, 0.5, 1.0]},
        {'runs': 1000, 'n': 1000, 'm': None, 'ratios': [0.02, 0.05, 0.1, 0.2, 0.5, 1.0]},
    ),
    'bench-budget': (
        {'runs': 100, 'n': 1000, 'm': [20, 50, 100, 500], 'ratios': None},
        {'runs': 300, 'n': 1000, 'm': [20, 50, 100, 500], 'ratios': None},
    ),
}
SWEEP_MODELS = {'ex2': 'abslog', 'ex3': 'growth', 'bench-budget': 'growth'}

COMPRESSED = Option(
    '--algorithm',
    choices=[Algorithm.CBPF.value, Algorithm.GENERIC_CPF.value],
    default=Algorithm.CBPF.value,
    help='Compressed filter to sweep.',
)
SWEEP_OPTIONS = (SEED, RUNS, N, M, RATIOS, PARTITION, SELECT, ETA, ESS, OUT, PAPER_SCALE, EXPENSIVE_COST, NO_HEADER_META, COMPRESSED)


def moment_errors(target, n: int, ms: list, rng: RngStream) -> np.ndarray:
    """Squared moment errors of every ex1 method, shape ``(len(ms), methods, 5)``."""
    samples = target.sample(n, rng.child(DATA))
    truth = np.array([target.moment(k) for k in MOMENTS])
    cloud = WeightedCloud(samples)
    powers = samples[:, None] ** MOMENTS

    errors = np.zeros((len(ms), len(EX1_METHODS) + 1, len(MOMENTS)))
    for i, m in enumerate(ms):
        for j, (method, kind, mode) in enumerate(EX1_METHODS):
            stream = rng.child(1, i, j)
            if method == 'sr':
                picks = stream.integers(0, n, size=m)
                estimate = powers[picks].mean(axis=0)
            else:
                sc = compress(cloud, m, kind, mode, stream)
                estimate = cmc_estimate(sc, lambda x: x[:, :1] ** MOMENTS)

            errors[i, j] = (estimate - truth) ** 2

        errors[i, -1] = (powers.mean(axis=0) - truth) ** 2

    return errors


class ExperimentCommands(Extension, name='Experiments'):
    def __init__(self, cli):
        super().__init__(cli)

        self.utils: CLIUtils = self.cli.get_extension('Utilities')

    @subcommand(
        'ex1',
        description='Compression of static targets: SR against CMC partitions and selections.',
        options=(
            SEED,
            RUNS,
            N,
            M,
            OUT,
            PAPER_SCALE,
            NO_HEADER_META,
            Option('--targets', nargs='+', default=sorted(TARGETS), help='gamma and/or mixture.'),
        ),
    )
    async def ex1(self, args) -> None:
        scale = self.utils.scale(args, *EX1_SCALE)
        n, ms = scale['n'], [m for m in scale['m'] if m <= scale['n']]
        if not ms:
            raise ConfigError(f'No M in the sweep is at most N = {n}.')

        targets = [get_target(name) for name in args.targets]
        self.cli.logger.info(
            f"ex1: {scale['runs']} runs, N = {n}, M in {ms}, targets {', '.join(args.targets)}."
        )

        rows = list()
        for target in targets:
            errors = await self.utils.map_runs(
                moment_errors,
                ((target, n, ms, RngStream(args.seed, run)) for run in range(scale['runs'])),
            )
            rmse = np.sqrt(np.mean(errors, axis=0))
            for i, m in enumerate(ms):
                for j, (method, kind, mode) in enumerate(EX1_METHODS):
                    for k in MOMENTS:
                        rows.append([target.name, method, kind, mode, m, k, rmse[i, j, k - 1]])

            for k in MOMENTS:
                rows.append([target.name, 'full', '', '', n, k, rmse[0, -1, k - 1]])

        out = await self.utils.output_dir(args)
        await self.utils.write_csv(
            out / 'ex1-compression.csv',
            ['target', 'method', 'partition', 'selection', 'M', 'k', 'rmse'],
            rows,
            EX1_SCHEMA,
            meta=not args.no_header_meta,
        )

    def _sweep_plan(self, experiment: str, scale: dict, compressed: Algorithm) -> list:
        n = scale['n']
        if scale['m'] is not None:
            ms = scale['m']
        else:
            ms = [max(1, int(round(r * n))) for r in scale['ratios']]

        ms = sorted({m for m in ms if m <= n})
        plan = [('bpf', Algorithm.BPF, n, None)]
        plan += [(compressed.value, compressed, n, m) for m in ms]
        if experiment == 'bench-budget':
            plan += [('bpf-budget', Algorithm.BPF, m, None) for m in ms]

        return plan

    def _sweep_run(self, args, model_name: str, horizon: int, plan: list, run: int) -> list:
        model = get_model(model_name, cost=args.expensive_cost)
        states, observations = generate_synthetic(
            model, horizon, self.utils.data_stream(args.seed, run)
        )

        results = list()
        for label, algorithm, n, m in plan:
            cfg = self.utils.filter_config(args, algorithm, n, m, run)
            trace = run_filter(model, observations, cfg)
            results.append((label, cfg, trace.rmse(states), trace.total_evaluations))

        return results

    async def _sweep(self, args, experiment: str) -> None:
        scale = self.utils.scale(args, *SWEEP_SCALES[experiment])
        if args.ratios is not None and args.m is None:
            scale['m'] = None

        model_name = SWEEP_MODELS[experiment]
        horizon = get_model(model_name).horizon
        plan = self._sweep_plan(experiment, scale, Algorithm(args.algorithm))
        for _, algorithm, n, m in plan:  # Surface configuration errors before any run
            self.utils.filter_config(args, algorithm, n, m)

        self.cli.logger.info(
            f"{experiment}: {scale['runs']} runs of {model_name}, {len(plan)} filter configurations."
        )
        results = await self.utils.map_runs(
            self._sweep_run,
            ((args, model_name, horizon, plan, run) for run in range(scale['runs'])),
        )

        rows, grouped = list(), defaultdict(list)
        for run, run_results in enumerate(results):
            for label, cfg, rmse, evaluations in run_results:
                common = (experiment, args.seed, run, cfg.n, cfg.m, label, model_name)
                rows.append(ResultRow(*common, 'rmse', rmse))
                rows.append(ResultRow(*common, 'eval_count', evaluations))
                grouped[(label, cfg.n, cfg.m)].append((rmse, evaluations))

        summary = list()
        for (label, n, m), values in grouped.items():
            rmse = np.array([v[0] for v in values])
            se = rmse.std(ddof=1) / np.sqrt(len(rmse)) if len(rmse) > 1 else 0.0
            evaluations = np.mean([v[1] for v in values])
            summary.append([label, n, m, m / n, rmse.mean(), se, evaluations])

        out = await self.utils.output_dir(args)
        meta = not args.no_header_meta
        await self.utils.write_results(out / f'{experiment}-runs.csv', rows, meta)
        await self.utils.write_csv(
            out / f'{experiment}.csv',
            ['algorithm', 'N', 'M', 'ratio', 'rmse', 'rmse_se', 'evaluations'],
            summary,
            SWEEP_SCHEMA,
            meta,
        )

        for label, n, m, ratio, rmse, _, evaluations in summary:
            self.cli.logger.info(
                f'{label:>10} N = {n:>6} M = {m:>6}: RMSE {rmse:.4f}, {evaluations:.0f} evaluations'
            )

    @subcommand(
        'ex2',
        description='BPF against the compressed filter on the abs/log model over M/N.',
        options=SWEEP_OPTIONS,
    )
    async def ex2(self, args) -> None:
        await self._sweep(args, 'ex2')

    @subcommand(
        'ex3',
        description='BPF against the compressed filter on the growth model over M/N.',
        options=SWEEP_OPTIONS,
    )
    async def ex3(self, args) -> None:
        await self._sweep(args, 'ex3')

    @subcommand(
        'bench-budget',
        description='Equal likelihood budget: BPF with N = M particles against CBPF(N, M).',
        options=SWEEP_OPTIONS,
    )
    async def bench_budget(self, args) -> None:
        await self._sweep(args, 'bench-budget')


def setup(cli):
    cli.add_extension(ExperimentCommands(cli))
