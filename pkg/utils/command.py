from dataclasses import dataclass, field
from typing import Callable, Optional

import argparse


class Option:
    """An argparse argument, declared once and shared between subcommands."""

    def __init__(self, *flags: str, **kwargs):
        self.flags = flags
        self.kwargs = kwargs

    @property
    def dest(self) -> str:
        return self.kwargs.get('dest', self.flags[-1].lstrip('-').replace('-', '_'))

    def add_to(self, parser: argparse.ArgumentParser, **overrides) -> None:
        parser.add_argument(*self.flags, **{**self.kwargs, **overrides})


@dataclass
class Subcommand:
    name: str
    description: str
    options: tuple
    defaults: dict = field(default_factory=dict)
    callback: Optional[Callable] = None
    extension: Optional['Extension'] = None

    async def invoke(self, args: argparse.Namespace):
        return await self.callback(self.extension, args)


def subcommand(name: str, description: str, options: tuple = (), **defaults):
    """Mark an ``async def cmd(self, args)`` method of an extension as a subcommand.

    ``defaults`` override the default of any of the listed options.
    """

    def decorator(func):
        func.__subcommand__ = Subcommand(name, description, tuple(options), defaults)
        return func

    return decorator


class Extension:
    qualified_name: str = 'Extension'

    def __init_subclass__(cls, name: Optional[str] = None, **kwargs):
        super().__init_subclass__(**kwargs)
        cls.qualified_name = name or cls.__name__

    def __init__(self, cli):
        self.cli = cli

    def get_commands(self) -> list:
        commands = list()
        for attr in dir(type(self)):
            info = getattr(getattr(type(self), attr), '__subcommand__', None)
            if info is None:
                continue

            bound = Subcommand(
                info.name,
                info.description,
                info.options,
                dict(info.defaults),
                getattr(type(self), attr),
                self,
            )
            commands.append(bound)

        return commands
