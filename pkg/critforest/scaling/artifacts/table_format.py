from typing import Tuple

import numpy as np

from critforest.scaling.artifacts.base_format import BaseFormat


class GridFormat(BaseFormat):
    """Values of a function on a one-dimensional grid"""
    magic = b'CFGG'
    name = 'grid'

    def encode(self, xs, values):
        xs, values = np.ascontiguousarray(xs, dtype='<f8'), np.ascontiguousarray(values, dtype='<f8')
        return {'points': len(xs)}, xs.tobytes() + values.tobytes()

    def decode(self, header, payload) -> Tuple[np.ndarray, np.ndarray]:
        data = np.frombuffer(payload, dtype='<f8')
        points = header['points']
        return data[:points].copy(), data[points:].copy()


class AlphaTableFormat(BaseFormat):
    """alpha on a (b, lambda) grid, stored row-major in b"""
    magic = b'CFAT'
    name = 'alpha table'

    def encode(self, bs, lambdas, values):
        bs = np.ascontiguousarray(bs, dtype='<f8')
        lambdas = np.ascontiguousarray(lambdas, dtype='<f8')
        values = np.ascontiguousarray(values, dtype='<f8')
        header = {'b': [float(bs[0]), float(bs[-1]), len(bs)],
                  'lambda': [float(lambdas[0]), float(lambdas[-1]), len(lambdas)]}
        return header, bs.tobytes() + lambdas.tobytes() + values.tobytes()

    def decode(self, header, payload) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        data = np.frombuffer(payload, dtype='<f8')
        nb, nl = header['b'][2], header['lambda'][2]
        bs, lambdas = data[:nb].copy(), data[nb:nb + nl].copy()
        return bs, lambdas, data[nb + nl:].reshape(nb, nl).copy()
