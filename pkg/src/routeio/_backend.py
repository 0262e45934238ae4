"""Kernel backend selection.

The compiled extension is used when it imports; ``ROUTEIO_PURE_PYTHON=1``
forces the pure-Python fallback.  Both expose the same functions and take
plain ``(n, n)`` float arrays plus integer node lists.
"""

import os

import numpy as np

from . import _pykernels

try:
    if os.environ.get("ROUTEIO_PURE_PYTHON"):
        raise ImportError("pure-Python backend requested")
    from . import _kernels as _compiled
except ImportError:
    _compiled = None


class Backend:
    def __init__(self, name):
        if name == "compiled" and _compiled is None:
            raise ImportError("compiled kernels are not built")
        self.name = name
        self._mod = _compiled if name == "compiled" else _pykernels

    def _w(self, w):
        w = np.ascontiguousarray(w, dtype=np.float64)
        return w if self.name == "compiled" else w.tolist()

    def held_karp(self, w, nodes, tol):
        return self._mod.held_karp(self._w(w), [int(v) for v in nodes], float(tol))

    def nearest_neighbor(self, w, nodes, start):
        return self._mod.nearest_neighbor(self._w(w), [int(v) for v in nodes], int(start))

    def local_search(self, w, tour, tol, max_passes=0):
        return self._mod.local_search(self._w(w), [int(v) for v in tour], float(tol), int(max_passes))

    def tour_cost(self, w, tour):
        return self._mod.tour_cost(self._w(w), [int(v) for v in tour])

    def erp(self, match, same, gap_a, gap_b, tol):
        if self.name == "compiled":
            return self._mod.erp(
                np.ascontiguousarray(match, dtype=np.float64),
                np.ascontiguousarray(same, dtype=np.uint8),
                np.ascontiguousarray(gap_a, dtype=np.float64),
                np.ascontiguousarray(gap_b, dtype=np.float64),
                float(tol),
            )
        return self._mod.erp(np.asarray(match, dtype=float).tolist(),
                             np.asarray(same, dtype=bool).tolist(),
                             [float(v) for v in gap_a], [float(v) for v in gap_b], float(tol))

    def __repr__(self):
        return f"Backend({self.name!r})"


AVAILABLE = ("compiled", "python") if _compiled is not None else ("python",)
_active = Backend(AVAILABLE[0])


def get_backend() -> Backend:
    return _active


def set_backend(name: str) -> Backend:
    """Switch kernels globally; returns the previous backend."""
    global _active
    prev = _active
    _active = Backend(name)
    return prev
