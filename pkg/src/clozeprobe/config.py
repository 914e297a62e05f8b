"""INI configuration with sections mirroring the module names.

Example::

    [probe]
    scorer = builtin:fixture
    k = 1,10,100

    [corpus-freq]
    edges = 0,1,10,100,1000

Command-line flags always win over file values.
"""

from __future__ import annotations

import configparser
from pathlib import Path


class Config:
    def __init__(self, parser: configparser.ConfigParser):
        self._parser = parser

    @classmethod
    def load(cls, path: str | Path | None) -> "Config":
        parser = configparser.ConfigParser()
        if path is not None:
            read = parser.read(path)
            if not read:
                raise FileNotFoundError(f"config file not found: {path}")
        return cls(parser)

    def get(self, section: str, option: str, fallback=None):
        return self._parser.get(section, option, fallback=fallback)

    def get_int(self, section: str, option: str, fallback=None):
        value = self.get(section, option)
        return int(value) if value is not None else fallback

    def get_ints(self, section: str, option: str, fallback=None):
        value = self.get(section, option)
        if value is None:
            return fallback
        return [int(part) for part in value.split(",") if part.strip()]

    def get_floats(self, section: str, option: str, fallback=None):
        value = self.get(section, option)
        if value is None:
            return fallback
        return [float(part) for part in value.split(",") if part.strip()]

    def snapshot(self) -> dict:
        return {
            section: dict(self._parser.items(section))
            for section in self._parser.sections()
        }
