#!/usr/bin/env python3

from dotenv.main import load_dotenv
from typing import Optional
from utils.command import Extension, Subcommand
from utils.logger import Logger

import aiopath
import argparse
import asyncio
import importlib
import os
import sys


LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR')


def config_error(reason: str) -> None:
    print(f'[ERROR] {reason} Exiting.', file=sys.stderr)
    sys.exit(2)


class CLI:
    def __init__(self, logger, workers: int, out: str):
        self.logger = logger
        self.workers = workers
        self.out = out
        self.extensions: dict[str, Extension] = dict()
        self.commands: dict[str, Subcommand] = dict()

    def load_extension(self, name: str) -> None:
        importlib.import_module(name).setup(self)

    def add_extension(self, extension: Extension) -> None:
        self.extensions[extension.qualified_name] = extension
        for command in extension.get_commands():
            self.commands[command.name] = command

    def get_extension(self, name: str) -> Optional[Extension]:
        return self.extensions.get(name)

    def build_parser(self) -> argparse.ArgumentParser:
        parser = argparse.ArgumentParser(
            prog='cmcpf',
            description='Compressed Monte Carlo and compressed particle filters.',
        )
        subparsers = parser.add_subparsers(dest='command', metavar='<subcommand>')
        subparsers.required = True

        for name in sorted(self.commands):
            command = self.commands[name]
            sub = subparsers.add_parser(
                name, help=command.description, description=command.description
            )
            for option in command.options:
                if option.dest in command.defaults:
                    option.add_to(sub, default=command.defaults[option.dest])
                else:
                    option.add_to(sub)

        return parser

    async def invoke(self, argv: list) -> int:
        parser = self.build_parser()
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:  # argparse reports usage errors with code 2
            return int(exc.code or 0)

        if getattr(args, 'out', None) is None:
            args.out = self.out

        command = self.commands[args.command]
        try:
            await command.invoke(args)
        except Exception as exc:
            return self.get_extension('ErrorHandler').on_command_error(command, exc)

        return 0


async def startup(argv: Optional[list] = None) -> int:
    if sys.version_info[:2] < (3, 9):
        sys.exit('[ERROR] cmcpf requires Python 3.9 or higher. Exiting.')

    load_dotenv()
    if 'CMCPF_WORKERS' in os.environ.keys():
        try:
            workers = int(os.environ['CMCPF_WORKERS'])
        except ValueError:
            config_error(
                "Invalid worker count set in 'CMCPF_WORKERS' environment variable."
            )

        if workers <= 0:
            config_error(
                "Invalid worker count set in 'CMCPF_WORKERS' environment variable."
            )
    else:
        workers = min(32, (await asyncio.to_thread(os.cpu_count) or 1) + 4)

    level = os.environ.get('CMCPF_LOG_LEVEL', 'INFO').upper()
    if level not in LOG_LEVELS:
        config_error(
            f"Invalid log level set in 'CMCPF_LOG_LEVEL' environment variable, expected one of {', '.join(LOG_LEVELS)}."
        )

    logger = Logger(level, os.environ.get('CMCPF_LOG_FILE') or None).logger
    cli = CLI(logger, workers, os.environ.get('CMCPF_OUT', 'results'))

    cli.load_extension('commands.cliutils')  # Load utils extension first
    extensions = aiopath.AsyncPath(__file__).parent / 'commands'
    names = sorted([ext.stem async for ext in extensions.glob('*.py')])
    for name in names:
        if name in ('cliutils', '__init__'):
            continue

        cli.load_extension(f'commands.{name}')

    cli.get_extension('Utilities').sem = asyncio.Semaphore(workers)

    return await cli.invoke(sys.argv[1:] if argv is None else argv)


if __name__ == '__main__':
    try:
        sys.exit(asyncio.run(startup()))
    except KeyboardInterrupt:
        sys.exit(130)
