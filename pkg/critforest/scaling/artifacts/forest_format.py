"""Forests on disk, as a compact binary record or as an edge-list text file.

Binary: per forest its vertex count, edge count and the sorted edge-slot codes as deltas. Text: a block per forest
headed `# forest N=<N> edges=<E>` followed by one `u v` line per edge.
"""
import re
from pathlib import Path
from typing import Iterable, List, Optional

import numpy as np

from critforest.scaling.artifacts.base_format import BaseFormat
from critforest.scaling.artifacts.tabular import manifest_lines, split_manifest
from critforest.scaling.errors import ValidationError
from critforest.scaling.graphs import Forest, encode_slots

_HEADER = re.compile(r'^# forest N=(\d+) edges=(\d+)$')


class ForestFormat(BaseFormat):
    magic = b'CFFR'
    name = 'forest'

    def encode(self, forests: Iterable[Forest]):
        shapes, chunks = [], []
        for forest in forests:
            codes = np.sort(encode_slots(forest.n_vertices, forest.edges)) if forest.n_edges else np.empty(0, np.int64)
            shapes.append([forest.n_vertices, forest.n_edges])
            chunks.append(np.diff(codes, prepend=0).astype('<u8').tobytes())
        return {'forests': shapes}, b''.join(chunks)

    def decode(self, header, payload) -> List[Forest]:
        deltas = np.frombuffer(payload, dtype='<u8').astype(np.int64)
        forests, offset = [], 0
        for N, E in header['forests']:
            codes = np.cumsum(deltas[offset:offset + E])
            offset += E
            forests.append(Forest.from_codes(N, codes))
        return forests


def write_forests_text(path: Optional[Path], forests: Iterable[Forest], manifest: Optional[dict] = None) -> str:
    """Returns the text; nothing is written when path is None"""
    lines = manifest_lines(manifest)
    for forest in forests:
        lines.append(f'# forest N={forest.n_vertices} edges={forest.n_edges}')
        lines.extend(f'{u} {v}' for u, v in forest.edges.tolist())
    text = '\n'.join(lines) + '\n'
    if path is not None:
        Path(path).write_text(text, encoding='utf-8')
    return text


def read_forests_text(path: Path) -> List[Forest]:
    _, lines = split_manifest(Path(path).read_text(encoding='utf-8').splitlines())
    forests, current, expected = [], None, 0

    def close():
        if current is not None:
            N, edges = current
            if len(edges) != expected:
                raise ValidationError(f'forest block announces {expected} edges, has {len(edges)}')
            forests.append(Forest(N, np.array(edges, dtype=np.int64).reshape(-1, 2)))

    for line in lines:
        line = line.strip()
        if not line:
            continue
        match = _HEADER.match(line)
        if match:
            close()
            current, expected = (int(match.group(1)), []), int(match.group(2))
        elif current is None:
            raise ValidationError(f'edge line before any forest header: {line!r}')
        else:
            current[1].append(tuple(int(part) for part in line.split()))
    close()
    return forests


def read_forests(path: Path) -> List[Forest]:
    """Binary or text, told apart by the magic bytes"""
    path = Path(path)
    with path.open('rb') as handle:
        head = handle.read(4)
    if head == ForestFormat.magic:
        return ForestFormat().read(path)
    return read_forests_text(path)
