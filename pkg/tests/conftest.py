from cmcpf import startup
from smc.core import RngStream, WeightedCloud

import asyncio
import numpy as np
import pytest


@pytest.fixture
def rng():
    return RngStream(20240917)


@pytest.fixture
def weighted_cloud():
    generator = np.random.default_rng(7)
    samples = generator.normal(size=(200, 2))
    log_weights = generator.normal(scale=2.0, size=200)
    return WeightedCloud(samples, log_weights)


@pytest.fixture
def run_cli(tmp_path, monkeypatch):
    """Run the CLI in-process; returns ``(exit_code, out_dir)``."""
    for name in ('CMCPF_WORKERS', 'CMCPF_LOG_FILE', 'CMCPF_OUT'):
        monkeypatch.delenv(name, raising=False)

    monkeypatch.setenv('CMCPF_LOG_LEVEL', 'WARNING')
    monkeypatch.chdir(tmp_path)  # Keep load_dotenv away from any real .env
    out = tmp_path / 'out'

    def run(*argv, meta: bool = False):
        args = [*argv, '--out', str(out)]
        if not meta:
            args.append('--no-header-meta')

        return asyncio.run(startup(args)), out

    return run


@pytest.fixture
def read_rows():
    def read(path) -> list:
        lines = [line for line in path.read_text().splitlines() if not line.startswith('#')]
        header = lines[0].split(',')
        return [dict(zip(header, line.split(','))) for line in lines[1:]]

    return read
