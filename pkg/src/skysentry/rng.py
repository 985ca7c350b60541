"""Keyed, counter-style random streams.

Every random draw in the simulator comes from a stream derived from
(scenario seed, purpose tag, entity ids, frame index). Stream outputs are a
pure function of the key and the draw position, so any frame or sample can
be regenerated independently, in any order, on any number of workers.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def _mix_int(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * _M1) & _MASK
    z = ((z ^ (z >> 27)) * _M2) & _MASK
    return (z ^ (z >> 31)) & _MASK


def _fnv1a(s: str) -> int:
    h = _FNV_OFFSET
    for b in s.encode("utf-8"):
        h = ((h ^ b) * _FNV_PRIME) & _MASK
    return h


def derive(*parts: int | str) -> int:
    """Fold integers and strings into a 64-bit stream key."""
    h = _FNV_OFFSET
    for p in parts:
        if isinstance(p, str):
            h = _mix_int(h ^ _fnv1a(p))
        else:
            h = _mix_int(h ^ (int(p) & _MASK))
    return h


_counter_cache: dict[int, np.ndarray] = {}


def _counters(n: int) -> np.ndarray:
    base = _counter_cache.get(n)
    if base is None:
        base = np.arange(1, n + 1, dtype=np.uint64)
        if n <= 1 << 22:  # keep hot frame-sized counters around
            _counter_cache[n] = base
    return base


def _raw(key: int, n: int, offset: int) -> np.ndarray:
    """n raw 64-bit outputs of the stream at positions offset..offset+n-1."""
    with np.errstate(over="ignore"):
        ctr = _counters(n) + np.uint64(offset)
        z = ctr * np.uint64(_GAMMA) + np.uint64(key & _MASK)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
        return z ^ (z >> np.uint64(31))


class Stream:
    """Sequential view of one keyed stream; draws advance an internal cursor."""

    def __init__(self, key: int):
        self.key = key & _MASK
        self._pos = 0

    def uniforms(self, n: int, dtype=np.float64) -> np.ndarray:
        """n uniforms in [0, 1)."""
        u = _raw(self.key, n, self._pos)
        self._pos += n
        return ((u >> np.uint64(11)) * (2.0**-53)).astype(dtype, copy=False)

    def uniform(self) -> float:
        return float(self.uniforms(1)[0])

    def normals(self, n: int, dtype=np.float64) -> np.ndarray:
        """n standard normals via Box-Muller."""
        m = (n + 1) // 2
        u = _raw(self.key, 2 * m, self._pos)
        self._pos += 2 * m
        # u1 in (0, 1] so log never sees zero
        u1 = (((u[:m] >> np.uint64(11)) + np.uint64(1)).astype(dtype)) * dtype(2.0**-53)
        u2 = ((u[m:] >> np.uint64(11)).astype(dtype)) * dtype(2.0**-53)
        r = np.sqrt(np.log(u1, out=u1) * dtype(-2.0))
        th = u2
        th *= dtype(2.0 * np.pi)
        out = np.empty(2 * m, dtype=dtype)
        out[0::2] = r * np.cos(th)
        np.sin(th, out=th)
        th *= r
        out[1::2] = th
        return out[:n]

    def normal(self) -> float:
        return float(self.normals(1)[0])


def stream(*parts: int | str) -> Stream:
    return Stream(derive(*parts))
