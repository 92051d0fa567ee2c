from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Mapping, Optional

from critforest.scaling.errors import ConfigError

FOREST_COMMANDS = ('sample-forest',)
# Fields that only say where output goes or how fast it is produced; they are left out of the config hash
_PLUMBING = ('out', 'paths_out', 'table_out', 'threads', 'quiet', 'overrides', 'config')


@dataclass
class ExperimentConfig:
    command: str
    N: Optional[List[int]] = None
    m: Optional[int] = None
    p: Optional[float] = None
    lam: Optional[float] = None
    q: Optional[float] = None
    K: Optional[int] = None
    T: Optional[float] = None
    dt: Optional[float] = None
    horizon_t: Optional[float] = None
    replicas: Optional[int] = None
    count: Optional[int] = None
    seed: int = 0
    strategy: str = 'auto'
    format: str = 'text'
    kind: str = 'Z'
    acyclic: bool = False
    x_from: Optional[float] = None
    x_to: Optional[float] = None
    step: Optional[float] = None
    b_grid: Optional[str] = None
    lambda_grid: Optional[str] = None
    time_bins: Optional[List[float]] = None
    height_bins: Optional[List[float]] = None
    input: Optional[str] = None
    left: Optional[str] = None
    right: Optional[str] = None
    stat: str = 'ks'
    rank: Optional[List[int]] = None
    gate: Optional[float] = None
    tier: str = 'small'
    out: Optional[str] = None
    paths_out: Optional[str] = None
    table_out: Optional[str] = None
    threads: Optional[int] = None
    quiet: bool = False
    overrides: List[str] = field(default_factory=list)

    @classmethod
    def from_sources(cls, file_values: Mapping[str, Any], flags: Mapping[str, Any]) -> 'ExperimentConfig':
        """Values from a config file, overridden by every flag that was actually given"""
        known = {item.name for item in fields(cls)}
        unknown = sorted(set(file_values) - known)
        if unknown:
            raise ConfigError(f'Unknown config keys: {", ".join(unknown)}')
        values = dict(file_values)
        for key, value in flags.items():
            if key not in known:
                continue
            if key == 'overrides':
                values['overrides'] = list(file_values.get('overrides', [])) + list(value or [])
            elif key == 'quiet':
                values['quiet'] = bool(value) or bool(file_values.get('quiet', False))
            elif value is not None:
                values[key] = value
        if not values.get('command'):
            raise ConfigError('No command given')
        if values.get('N') is not None and not isinstance(values['N'], list):
            values['N'] = [values['N']]
        config = cls(**values)
        config.validate()
        return config

    def validate(self):
        if self.command in FOREST_COMMANDS and (self.m is None) == (self.p is None):
            raise ConfigError(f'{self.command} needs exactly one of --m and --p')
        if self.seed is None or int(self.seed) < 0:
            raise ConfigError('seed must be a non-negative integer')
        for name in ('replicas', 'count', 'K'):
            value = getattr(self, name)
            if value is not None and value < 1:
                raise ConfigError(f'{name} must be positive, got {value}')
        for name in ('T', 'dt', 'horizon_t', 'step'):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ConfigError(f'{name} must be positive, got {value}')
        if self.N is not None and any(n < 1 for n in self.N):
            raise ConfigError(f'N must be positive, got {self.N}')

    def require(self, *names: str):
        missing = [name for name in names if getattr(self, name) is None]
        if missing:
            raise ConfigError(f'{self.command} needs {", ".join("--" + name.replace("_", "-") for name in missing)}')

    @property
    def single_N(self) -> int:
        self.require('N')
        if len(self.N) != 1:
            raise ConfigError(f'{self.command} takes a single --n')
        return self.N[0]

    def to_dict(self) -> Dict[str, Any]:
        return {key: value for key, value in asdict(self).items() if key not in _PLUMBING}
