from dataclasses import astuple, dataclass, fields
from datetime import datetime, timezone
from smc.cmc import SelectionMode
from smc.core import EssVariant, RngStream
from smc.filters import DATA, AdaptiveM, Algorithm, FilterConfig
from smc.partition import PartitionKind
from smc.resample import ResampleMode, ResamplePlan, ResampleScheme
from typing import Callable, Iterable, Optional
from utils.command import Extension, Option
from utils.errors import ConfigError

import aiofiles
import aiopath
import argparse
import asyncio
import csv
import io
import numpy as np
import ujson


RESULT_SCHEMA = 'cmcpf.result/1'
DATASET_SCHEMA = 'cmcpf.dataset/1'
U64_MAX = 2**64 - 1


def u64(value: str) -> int:
    seed = int(value, 0)
    if not 0 <= seed <= U64_MAX:
        raise argparse.ArgumentTypeError(f'Seed must be a 64-bit unsigned integer, got {value}.')

    return seed


def int_list(value: str) -> list:
    try:
        items = [int(v) for v in value.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f'Expected a comma separated list of integers, got {value!r}.')

    if not items or any(i < 1 for i in items):
        raise argparse.ArgumentTypeError(f'List entries must be positive integers, got {value!r}.')

    return items


def float_list(value: str) -> list:
    try:
        items = [float(v) for v in value.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f'Expected a comma separated list of numbers, got {value!r}.')

    if not items or any(not 0 < i <= 1 for i in items):
        raise argparse.ArgumentTypeError(f'Ratios must lie in (0, 1], got {value!r}.')

    return items


# Options shared between subcommands
SEED = Option('--seed', type=u64, default=0, help='Root seed (64-bit unsigned).')
RUNS = Option('--runs', type=int, default=None, help='Independent runs.')
N = Option('--n', type=int, default=None, help='Number of particles N.')
M = Option('--m', type=int_list, default=None, help='Summary count M, or a comma separated sweep.')
RATIOS = Option('--ratios', type=float_list, default=None, help='Sweep of compression rates M/N.')
PARTITION = Option(
    '--partition',
    choices=[p.value for p in PartitionKind],
    default=PartitionKind.UNIFORM_GRID.value,
    help='p1 random grid, p2 uniform grid, p3 Voronoi.',
)
SELECT = Option(
    '--select',
    choices=[SelectionMode.STOCHASTIC.value, SelectionMode.WEIGHTED_MEAN.value],
    default=SelectionMode.WEIGHTED_MEAN.value,
    help='Summary particle selection.',
)
ETA = Option('--eta', type=float, default=0.5, help='Resampling threshold.')
ESS = Option('--ess', choices=[e.value for e in EssVariant], default=EssVariant.SUMSQ.value)
OUT = Option('--out', default=None, help='Output directory (default $CMCPF_OUT or results).')
PAPER_SCALE = Option('--paper-scale', action='store_true', help='Use the full-scale defaults.')
EXPENSIVE_COST = Option(
    '--expensive-cost',
    type=int,
    default=0,
    help='Busy iterations added to every likelihood evaluation.',
)
EXPENSIVE_DELAY = Option(
    '--expensive-delay',
    type=float,
    default=0.0,
    help='Seconds slept per likelihood evaluation.',
)
NO_HEADER_META = Option(
    '--no-header-meta', action='store_true', help='Omit the timestamp comment line.'
)
RESAMPLE = Option(
    '--resample',
    choices=[m.value for m in ResampleMode],
    default=ResampleMode.MULTINOMIAL.value,
)
SCHEME = Option('--scheme', choices=[s.value for s in ResampleScheme], default=ResampleScheme.MULTINOMIAL.value)
REG_EPS = Option('--reg-eps', type=float, default=1e-6, help='Kernel jitter for regularized resampling.')

COMMON = (SEED, RUNS, N, M, PARTITION, SELECT, ETA, ESS, OUT, PAPER_SCALE, EXPENSIVE_COST, NO_HEADER_META)


@dataclass
class ResultRow:
    experiment: str
    seed: int
    run: int
    n: int
    m: int
    algorithm: str
    variant: str
    metric: str
    value: object

    @classmethod
    def header(cls) -> list:
        return [f.name for f in fields(cls)]


class CLIUtils(Extension, name='Utilities'):
    def __init__(self, cli):
        super().__init__(cli)
        self.sem: Optional[asyncio.Semaphore] = None

    # Concurrency
    async def sem_call(self, func: Callable, *args):
        async with self.sem:
            return await asyncio.to_thread(func, *args)

    async def map_runs(self, func: Callable, jobs: Iterable[tuple]) -> list:
        tasks = [self.sem_call(func, *job) for job in jobs]
        return await asyncio.gather(*tasks)  # Results stay in submission order

    # Configuration helpers
    def scale(self, args, desk: dict, paper: dict) -> dict:
        """Desk-scale defaults, or paper-scale ones, overridden by explicit flags."""
        values = dict(paper if args.paper_scale else desk)
        for key in values:
            given = getattr(args, key, None)
            if given is not None:
                values[key] = given

        if values.get('runs', 1) < 1 or values.get('n', 1) < 1:
            raise ConfigError('--runs and --n must be positive.')

        return values

    def resample_plan(self, args) -> ResamplePlan:
        return ResamplePlan(
            ResampleMode(getattr(args, 'resample', ResampleMode.MULTINOMIAL.value)),
            getattr(args, 'reg_eps', 1e-6),
            ResampleScheme(getattr(args, 'scheme', ResampleScheme.MULTINOMIAL.value)),
        )

    def filter_config(
        self,
        args,
        algorithm: Algorithm,
        n: int,
        m: Optional[int] = None,
        run: int = 0,
        adaptive: Optional[AdaptiveM] = None,
    ) -> FilterConfig:
        return FilterConfig(
            algorithm=algorithm,
            n=n,
            m=m,
            eta=args.eta,
            ess=EssVariant(args.ess),
            partition=PartitionKind(args.partition),
            selection=SelectionMode(args.select),
            resample=self.resample_plan(args),
            adaptive=adaptive or AdaptiveM(),
            seed=args.seed,
            stream=run,
        )

    def data_stream(self, seed: int, run: int) -> RngStream:
        return RngStream(seed, run).child(DATA)

    # Output
    async def output_dir(self, args) -> aiopath.AsyncPath:
        out = aiopath.AsyncPath(args.out)
        await out.mkdir(parents=True, exist_ok=True)
        return out

    def _format(self, value) -> str:
        if isinstance(value, (float, np.floating)):
            return repr(float(value))
        if isinstance(value, np.integer):
            return str(int(value))

        return str(value)

    async def write_csv(
        self,
        path: aiopath.AsyncPath,
        header: list,
        rows: Iterable,
        schema: str = RESULT_SCHEMA,
        meta: bool = True,
    ) -> None:
        buffer = io.StringIO()
        buffer.write(f'# schema={schema}\n')
        if meta:
            now = await asyncio.to_thread(datetime.now, timezone.utc)
            buffer.write(f'# generated={now.isoformat(timespec="seconds")}\n')

        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            if isinstance(row, ResultRow):
                row = astuple(row)
            writer.writerow([self._format(v) for v in row])

        async with aiofiles.open(path, 'w') as f:
            await f.write(buffer.getvalue())

        self.cli.logger.info(f'Wrote {path}.')

    async def write_results(self, path: aiopath.AsyncPath, rows: list, meta: bool = True) -> None:
        await self.write_csv(path, ResultRow.header(), rows, RESULT_SCHEMA, meta)

    async def write_json(self, path: aiopath.AsyncPath, data) -> None:
        async with aiofiles.open(path, 'w') as f:
            await f.write(ujson.dumps(data, indent=2))

        self.cli.logger.info(f'Wrote {path}.')

    async def write_dataset(
        self,
        out: aiopath.AsyncPath,
        stem: str,
        states: np.ndarray,
        observations: np.ndarray,
        meta: bool = True,
    ) -> None:
        obs_rows = (
            (t, r, y)
            for t, values in enumerate(observations, start=1)
            for r, y in enumerate(values, start=1)
        )
        await self.write_csv(
            out / f'{stem}-observations.csv', ['t', 'r', 'y'], obs_rows, DATASET_SCHEMA, meta
        )

        header = ['t'] + [f'x{i}' for i in range(states.shape[1])]
        state_rows = ([t, *state] for t, state in enumerate(states))
        await self.write_csv(
            out / f'{stem}-states.csv', header, state_rows, DATASET_SCHEMA, meta
        )


def setup(cli):
    cli.add_extension(CLIUtils(cli))
