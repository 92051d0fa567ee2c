import hashlib
import json
from dataclasses import asdict, dataclass
from typing import Any, Mapping, Optional

from critforest.scaling import settings
from critforest.scaling.utils import code_version


def canonical_json(value: Any) -> str:
    return json.dumps(value, sort_keys=True, separators=(',', ':'), ensure_ascii=False, default=str)


def config_hash(config: Mapping[str, Any]) -> str:
    return hashlib.sha256(canonical_json(config).encode('utf-8')).hexdigest()


@dataclass(frozen=True)
class Manifest:
    """Everything needed to regenerate an output file: the config it was made from and the seed"""
    config_hash: str
    seed: Optional[int]
    code_version: str
    schema_version: int
    command: str = ''

    @classmethod
    def for_config(cls, config: Mapping[str, Any], seed: Optional[int] = None, command: str = '') -> 'Manifest':
        return cls(config_hash(config), seed, code_version(), settings.SCHEMA_VERSION, command)

    def to_dict(self) -> dict:
        return asdict(self)
