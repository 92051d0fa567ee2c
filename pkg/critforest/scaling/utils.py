import logging
from copy import deepcopy
from typing import Any, Iterable, Optional

import numpy as np

from critforest.scaling import settings
from critforest.scaling.errors import ConfigError


class Utils:
    settings_whitelist = settings.RUNTIME_WHITELIST

    def __init__(self):
        self.logger = logging.getLogger(self.__class__.__name__)

    def change_setting(self, setting: str, value: str, action: Optional[str] = None) -> Any:
        """Change a whitelisted setting at run time, coercing `value` to the type of the current value.

        List-like settings take an action, '+' appends and '-' removes. Tuples of numbers can also be replaced
        as a whole with a comma separated value.
        """
        if not hasattr(settings, setting) or setting not in self.settings_whitelist:
            raise ConfigError(f'Setting {setting} not found')
        if action and action not in ['+', '-']:
            raise ConfigError(f'Action {action} not defined')

        old_value = getattr(settings, setting, None)
        old_value_type = type(old_value)
        if old_value_type in (list, set) or (old_value_type is tuple and action):
            new_value = list(deepcopy(old_value))
            if action == '+':
                new_value.append(value)
            elif action == '-' and value in new_value:
                new_value.remove(value)
            else:
                raise ConfigError(f'Setting {setting} is a list, use {setting}=VALUE:+ or {setting}=VALUE:-')

            if isinstance(old_value, tuple):
                new_value = tuple(new_value)
            elif isinstance(old_value, set):
                new_value = set(new_value)
        elif old_value_type is tuple:
            parts = value.split(',')
            if len(parts) != len(old_value):
                raise ConfigError(f'Value of {setting} must have {len(old_value)} items')
            try:
                new_value = tuple(type(item)(part) for item, part in zip(old_value, parts))
            except ValueError:
                raise ConfigError(f'Value of {setting} must look like {old_value}')
        elif old_value_type in (int, float):
            try:
                new_value = old_value_type(value)
            except ValueError:
                raise ConfigError(f'Value of {setting} must be {old_value_type.__name__}')
        else:
            new_value = value

        setattr(settings, setting, new_value)
        self.logger.info(f'Setting {setting} was changed from {old_value} to {new_value}')
        return new_value

    def apply_overrides(self, overrides: Iterable[str]):
        """Apply `NAME=VALUE` or `NAME=VALUE:+` strings as given on the command line"""
        for override in overrides:
            if '=' not in override:
                raise ConfigError(f'Override {override} must look like NAME=VALUE')
            setting, value = override.split('=', 1)
            action = None
            if value[-2:] in (':+', ':-'):
                value, action = value[:-2], value[-1]
            self.change_setting(setting.strip(), value.strip(), action)


def child_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for replica `index`, a function of (seed, index) only"""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


def make_rng(rng_or_seed=None) -> np.random.Generator:
    if isinstance(rng_or_seed, np.random.Generator):
        return rng_or_seed
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(rng_or_seed)))


def code_version() -> str:
    try:
        from importlib.metadata import version, PackageNotFoundError
    except ImportError:  # pragma: no cover
        return 'unknown'
    try:
        return version('critforest.scaling')
    except PackageNotFoundError:
        return 'unknown'


utils = Utils()
