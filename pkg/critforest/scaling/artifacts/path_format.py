from typing import List

import numpy as np

from critforest.scaling.artifacts.base_format import BaseFormat
from critforest.scaling.diffusion import DiffusionPath


class PathFormat(BaseFormat):
    """Diffusion paths sharing one grid, stored as a (paths, points) float array"""
    magic = b'CFDP'
    name = 'diffusion path'

    def encode(self, paths: List[DiffusionPath]):
        first = paths[0]
        values = np.ascontiguousarray(np.stack([path.values for path in paths]), dtype='<f8')
        header = {'lambda': first.lam, 'dt': first.dt, 'kind': first.kind, 'shape': list(values.shape)}
        return header, values.tobytes()

    def decode(self, header, payload) -> List[DiffusionPath]:
        values = np.frombuffer(payload, dtype='<f8').reshape(header['shape'])
        return [DiffusionPath(header['lambda'], header['dt'], row.copy(), np.zeros(len(row) - 1), header['kind'])
                for row in values]
