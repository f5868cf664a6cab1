from .cliutils import (
    ESS,
    ETA,
    EXPENSIVE_COST,
    EXPENSIVE_DELAY,
    NO_HEADER_META,
    OUT,
    PAPER_SCALE,
    PARTITION,
    RUNS,
    SEED,
    SELECT,
    CLIUtils,
    ResultRow,
)
from models import generate_synthetic, get_model
from models.kepler import SCENARIOS, KeplerModel
from smc.filters import Algorithm, run_filter
from utils.command import Extension, Option, subcommand
from utils.errors import ConfigError

import numpy as np


DECISIONS = ('zero', 'one', 'two')
METHODS = {'pf': Algorithm.BPF, 'cpf': Algorithm.GENERIC_CPF}
KEPLER_SCALE = (
    {'runs': 50, 'n': 10_000},
    {'runs': 500, 'n': 100_000},
)


def decide(log_z) -> tuple:
    """Object count with the largest evidence, and all counts best first."""
    ranking = [int(j) for j in np.argsort(-np.asarray(log_z), kind='stable')]
    return ranking[0], ranking


def decision_table(scenario: str, method: str, runs: list, reference_ms: float) -> dict:
    total = len(runs)
    decisions = {name: 0 for name in DECISIONS}
    rankings = {name: [0, 0, 0] for name in DECISIONS}
    for run in runs:
        decisions[DECISIONS[run['decision']]] += 1
        for place, j in enumerate(run['ranking']):
            rankings[DECISIONS[j]][place] += 1

    wall_ms = float(np.mean([run['wall_ms'] for run in runs]))
    return {
        'scenario': scenario,
        'method': method,
        'runs': total,
        'decisions': {k: 100.0 * v / total for k, v in decisions.items()},
        'rankings': {k: [100.0 * c / total for c in v] for k, v in rankings.items()},
        'wall_ms': wall_ms,
        'normalized_time': wall_ms / reference_ms if reference_ms > 0 else 1.0,
        'evaluations': float(np.mean([sum(run['evaluations']) for run in runs])),
    }


class KeplerCommands(Extension, name='Kepler'):
    def __init__(self, cli):
        super().__init__(cli)

        self.utils: CLIUtils = self.cli.get_extension('Utilities')

    def _run(self, args, scenario: str, n: int, methods: list, run: int) -> dict:
        truth = KeplerModel(SCENARIOS[scenario], observations=args.observations)
        states, observations = generate_synthetic(
            truth, args.horizon, self.utils.data_stream(args.seed, run)
        )

        result = dict()
        for method in methods:
            log_z, evaluations, wall = list(), list(), 0.0
            for objects in range(len(DECISIONS)):
                model = get_model(
                    'kepler',
                    cost=args.expensive_cost,
                    delay=args.expensive_delay,
                    objects=objects,
                    observations=args.observations,
                )
                m = args.m if METHODS[method] is Algorithm.GENERIC_CPF else None
                cfg = self.utils.filter_config(args, METHODS[method], n, m, run)
                trace = run_filter(model, observations, cfg)
                log_z.append(trace.log_z)
                evaluations.append(trace.total_evaluations)
                wall += trace.wall_time

            decision, ranking = decide(log_z)
            result[method] = {
                'log_z': log_z,
                'decision': decision,
                'ranking': ranking,
                'evaluations': evaluations,
                'wall_ms': 1000 * wall,
            }

        return result

    @subcommand(
        'kepler',
        description='Select the number of orbiting objects from synthetic radial velocities.',
        options=(
            Option('--scenario', choices=sorted(SCENARIOS), default='E1'),
            Option('--methods', nargs='+', choices=sorted(METHODS), default=['pf', 'cpf']),
            Option('--n', type=int, default=None),
            Option('--m', type=int, default=100, help='Summary particles of the compressed filter.'),
            Option('--horizon', type=int, default=50),
            Option('--observations', type=int, default=5, help='Observations R per step.'),
            RUNS,
            PARTITION,
            SELECT,
            ETA,
            ESS,
            SEED,
            OUT,
            PAPER_SCALE,
            EXPENSIVE_COST,
            EXPENSIVE_DELAY,
            NO_HEADER_META,
        ),
    )
    async def kepler(self, args) -> None:
        scale = self.utils.scale(args, *KEPLER_SCALE)
        n, runs = scale['n'], scale['runs']
        if args.horizon < 1 or args.observations < 1:
            raise ConfigError('--horizon and --observations must be positive.')

        methods = list(dict.fromkeys(args.methods))
        for method in methods:
            m = args.m if METHODS[method] is Algorithm.GENERIC_CPF else None
            self.utils.filter_config(args, METHODS[method], n, m)

        self.cli.logger.info(
            f'kepler {args.scenario}: {runs} runs, N = {n}, M = {args.m}, T = {args.horizon}, R = {args.observations}.'
        )
        results = await self.utils.map_runs(
            self._run, ((args, args.scenario, n, methods, run) for run in range(runs))
        )

        rows, timing = list(), list()
        for run, result in enumerate(results):
            for method, values in result.items():
                m = args.m if METHODS[method] is Algorithm.GENERIC_CPF else n
                common = ('kepler', args.seed, run, n, m, method)
                for objects, log_z in enumerate(values['log_z']):
                    rows.append(ResultRow(*common, f'S={objects}', 'logZ', log_z))
                    rows.append(
                        ResultRow(*common, f'S={objects}', 'eval_count', values['evaluations'][objects])
                    )

                rows.append(ResultRow(*common, args.scenario, 'decision', DECISIONS[values['decision']]))
                timing.append(ResultRow(*common, args.scenario, 'wall_ms', values['wall_ms']))

        reference = 'pf' if 'pf' in methods else methods[0]
        reference_ms = float(np.mean([result[reference]['wall_ms'] for result in results]))
        tables = [
            decision_table(args.scenario, method, [result[method] for result in results], reference_ms)
            for method in methods
        ]

        out = await self.utils.output_dir(args)
        stem = f'kepler-{args.scenario}'
        meta = not args.no_header_meta
        await self.utils.write_results(out / f'{stem}.csv', rows, meta)
        await self.utils.write_results(out / f'{stem}-timing.csv', timing, meta)
        await self.utils.write_json(out / f'{stem}.json', tables)

        for table in tables:
            decisions = ', '.join(f'{k} {v:.0f}%' for k, v in table['decisions'].items())
            self.cli.logger.info(
                f"{table['method']:>4} {args.scenario}: {decisions}; normalized time {table['normalized_time']:.3f}"
            )


def setup(cli):
    cli.add_extension(KeplerCommands(cli))
