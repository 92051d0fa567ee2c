import hashlib
import json
import struct
from pathlib import Path
from typing import Any, Optional, Tuple

from critforest.scaling.errors import ChecksumError, ValidationError

_PREFIX = struct.Struct('<4sHI')


class BaseFormat:
    """Binary record: magic, version, JSON header, payload, then the SHA-256 of everything before it."""
    magic = b'CFXX'
    version = 1
    name = 'base'

    def encode(self, *args) -> Tuple[dict, bytes]:
        raise NotImplementedError

    def decode(self, header: dict, payload: bytes) -> Any:
        raise NotImplementedError

    def dumps(self, *args, manifest: Optional[dict] = None) -> bytes:
        header, payload = self.encode(*args)
        header = dict(header, manifest=manifest or {}, payload_size=len(payload))
        header_bytes = json.dumps(header, sort_keys=True).encode('utf-8')
        body = _PREFIX.pack(self.magic, self.version, len(header_bytes)) + header_bytes + payload
        return body + hashlib.sha256(body).digest()

    def loads(self, data: bytes) -> Tuple[Any, dict]:
        if len(data) < _PREFIX.size + 32:
            raise ValidationError(f'{self.name} record is truncated')
        body, digest = data[:-32], data[-32:]
        magic, version, header_size = _PREFIX.unpack_from(body)
        if magic != self.magic:
            raise ValidationError(f'expected a {self.magic!r} record, got {magic!r}')
        if version != self.version:
            raise ValidationError(f'{self.name} version {version} is not supported')
        if hashlib.sha256(body).digest() != digest:
            raise ChecksumError(f'{self.name} record checksum mismatch')
        header = json.loads(body[_PREFIX.size:_PREFIX.size + header_size].decode('utf-8'))
        payload = body[_PREFIX.size + header_size:]
        if len(payload) != header['payload_size']:
            raise ValidationError(f'{self.name} payload has {len(payload)} bytes, header says {header["payload_size"]}')
        return self.decode(header, payload), header

    def write(self, path: Path, *args, manifest: Optional[dict] = None):
        Path(path).write_bytes(self.dumps(*args, manifest=manifest))

    def read_with_header(self, path: Path) -> Tuple[Any, dict]:
        return self.loads(Path(path).read_bytes())

    def read(self, path: Path) -> Any:
        return self.read_with_header(path)[0]
