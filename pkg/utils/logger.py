from typing import Optional

import logging
import sys


LOGGER_NAME = 'cmcpf'


class Logger:
    def __init__(self, level: str = 'INFO', path: Optional[str] = None):
        formatter = logging.Formatter(
            fmt='[{asctime}] [{levelname}] {message}',
            datefmt='%m/%d/%y %H:%M:%S',
            style='{',
        )

        stdout_log = logging.StreamHandler(sys.stdout)
        stdout_log.setFormatter(formatter)

        self.logger = logging.getLogger(LOGGER_NAME)
        self.logger.setLevel(level)
        self.logger.propagate = False

        for handler in list(self.logger.handlers):  # Reconfiguring replaces, never stacks
            self.logger.removeHandler(handler)

        self.logger.addHandler(stdout_log)

        if path:
            file_log = logging.FileHandler(path)
            file_log.setFormatter(formatter)
            self.logger.addHandler(file_log)
