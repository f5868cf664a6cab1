from .cliutils import CLIUtils, NO_HEADER_META, OUT, PARTITION, SEED, SELECT
from smc.cmc import SelectionMode, SummaryCloud, compress
from smc.core import RngStream, WeightedCloud, evidence_estimate
from smc.partition import PartitionKind
from typing import Optional
from utils.command import Extension, Option, subcommand
from utils.errors import ConfigError, DimensionMismatch, ParseError

import aiofiles
import aiopath
import numpy as np
import ujson


SUMMARY_SCHEMA = 'cmcpf.summary/1'


def parse_cloud(text: str) -> WeightedCloud:
    """Parse the cloud CSV format.

    A ``# dim,<d>`` comment line comes first, then one ``x_1,...,x_d,log_w``
    row per sample. Blank lines and other ``#`` comments are ignored.
    """
    dim: Optional[int] = None
    samples, log_weights = list(), list()
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue

        if line.startswith(('#', 'dim,')):
            fields = [f.strip() for f in line.lstrip('#').split(',')]
            if fields[0] != 'dim':
                continue

            if dim is not None:
                raise ParseError(number, 'dimension declared twice.')

            try:
                dim = int(fields[1])
            except (IndexError, ValueError):
                raise ParseError(number, f'invalid dimension header {line!r}.')

            if dim < 1:
                raise ParseError(number, f'dimension must be positive, got {dim}.')

            continue

        if dim is None:
            raise ParseError(number, "missing '# dim,<d>' header before the first row.")

        fields = line.split(',')
        try:
            values = [float(f) for f in fields]
        except ValueError:
            raise ParseError(number, f'non-numeric field in {line!r}.')

        if len(values) != dim + 1:
            raise DimensionMismatch(dim + 1, len(values))

        if np.isnan(values).any() or np.isinf(values[:-1]).any():
            raise ParseError(number, 'samples must be finite and weights not NaN.')

        if values[-1] == np.inf:
            raise ParseError(number, 'log-weight +inf is not a weight.')

        samples.append(values[:-1])
        log_weights.append(values[-1])

    if not samples:
        raise ParseError(max(1, len(text.splitlines())), 'cloud has no samples.')

    return WeightedCloud(np.asarray(samples), np.asarray(log_weights))


def parse_cloud_json(text: str) -> WeightedCloud:
    try:
        data = ujson.loads(text)
    except ValueError as exc:
        raise ParseError(1, f'invalid JSON ({exc}).')

    if not isinstance(data, dict) or 'samples' not in data:
        raise ParseError(1, "expected an object with a 'samples' key.")

    try:
        samples = np.asarray(data['samples'], dtype=float)
        log_weights = data.get('log_weights')
        if log_weights is not None:
            log_weights = np.asarray(log_weights, dtype=float)
    except (TypeError, ValueError):
        raise ParseError(1, 'samples and log_weights must be numeric arrays.')

    if 'dim' in data and samples.ndim == 2 and samples.shape[1] != data['dim']:
        raise DimensionMismatch(data['dim'], samples.shape[1])

    return WeightedCloud(samples, log_weights)


def format_cloud(cloud: WeightedCloud) -> str:
    lines = [f'# dim,{cloud.dim}']
    for sample, log_w in zip(cloud.samples, cloud.log_weights):
        lines.append(','.join(repr(float(v)) for v in (*sample, log_w)))

    return '\n'.join(lines) + '\n'


def summary_header(sc: SummaryCloud) -> list:
    header = [f's{i}' for i in range(sc.dim)] + ['a_hat', 'log_a', 'count']
    if sc.covariances is not None:
        header += [f'cov_{i}_{j}' for i in range(sc.dim) for j in range(sc.dim)]

    return header


def summary_rows(sc: SummaryCloud) -> list:
    particles = sc.particles.reshape(len(sc), -1)
    rows = list()
    for m in range(len(sc)):
        row = [*particles[m], sc.weights[m], sc.log_masses[m], int(sc.counts[m])]
        if sc.covariances is not None:
            row += list(sc.covariances[m].ravel())

        rows.append(row)

    return rows


class CompressCommands(Extension, name='Compress'):
    def __init__(self, cli):
        super().__init__(cli)

        self.utils: CLIUtils = self.cli.get_extension('Utilities')

    def _compress(self, cloud: WeightedCloud, args) -> SummaryCloud:
        m = len(cloud) if args.m is None else args.m
        if not 1 <= m <= len(cloud):
            raise ConfigError(f'--m must lie in [1, N = {len(cloud)}], got {m}.')

        return compress(
            cloud,
            m,
            PartitionKind(args.partition),
            SelectionMode(args.select),
            RngStream(args.seed),
            eps=args.cov_eps,
        )

    @subcommand(
        'compress',
        description='Compress a weighted cloud file into a summary cloud file.',
        options=(
            Option('input', help='Cloud file (.csv, or .json with samples/log_weights).'),
            Option('--output', default=None, help='Summary file (default <out>/summary.csv).'),
            Option('--m', type=int, default=None, help='Number of summary particles (default N).'),
            Option('--cov-eps', type=float, default=None, help='Attach region covariances plus eps*I.'),
            PARTITION,
            SELECT,
            SEED,
            OUT,
            NO_HEADER_META,
        ),
    )
    async def compress_cmd(self, args) -> None:
        path = aiopath.AsyncPath(args.input)
        if not await path.is_file():
            raise FileNotFoundError(f'Cloud file {args.input} does not exist.')

        async with aiofiles.open(path, 'r') as f:
            text = await f.read()

        parse = parse_cloud_json if path.suffix.lower() == '.json' else parse_cloud
        cloud = parse(text)

        sc = await self.utils.sem_call(self._compress, cloud, args)

        if args.output is not None:
            output = aiopath.AsyncPath(args.output)
            await output.parent.mkdir(parents=True, exist_ok=True)
        else:
            output = await self.utils.output_dir(args) / 'summary.csv'

        await self.utils.write_csv(
            output,
            summary_header(sc),
            summary_rows(sc),
            SUMMARY_SCHEMA,
            meta=not args.no_header_meta,
        )

        before = evidence_estimate(cloud).log_z
        after = sc.evidence.log_z
        self.cli.logger.info(
            f'Compressed N = {len(cloud)} samples into M = {len(sc)} summaries.'
        )
        self.cli.logger.info(
            f'log Z = {before:.12g} (cloud), {after:.12g} (summaries); sum of a_hat = {sc.weights.sum():.12g}'
        )
        if np.isfinite(before) and not np.isclose(before, after, rtol=0, atol=1e-9):
            self.cli.logger.warning('Summary evidence differs from the cloud evidence.')


def setup(cli):
    cli.add_extension(CompressCommands(cli))
