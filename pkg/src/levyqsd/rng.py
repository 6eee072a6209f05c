"""Philox4x64-10 counter-based generator for numba kernels.

Each Monte Carlo path owns the stream keyed by ``(seed, path_index)``; the
counter walks through blocks of four 64-bit words.  Streams therefore do not
depend on how paths are distributed over threads.  The block function is
bit-compatible with :class:`numpy.random.Philox`.
"""
from __future__ import annotations

import numpy as np
from numba import njit, uint64

_M32 = uint64(0xFFFFFFFF)
_S32 = uint64(32)
_MUL0 = uint64(0xD2E7470EE14C6C93)
_MUL1 = uint64(0xCA5A826395121157)
_WEYL0 = uint64(0x9E3779B97F4A7C15)
_WEYL1 = uint64(0xBB67AE8584CAA73B)
_SHIFT = uint64(11)
_TWO_M53 = 1.0 / 9007199254740992.0


@njit(inline="always")
def _mulhilo(a, b):
    a_lo = a & _M32
    a_hi = a >> _S32
    b_lo = b & _M32
    b_hi = b >> _S32
    ll = a_lo * b_lo
    lh = a_lo * b_hi
    hl = a_hi * b_lo
    hh = a_hi * b_hi
    mid = (ll >> _S32) + (lh & _M32) + (hl & _M32)
    hi = hh + (lh >> _S32) + (hl >> _S32) + (mid >> _S32)
    lo = (mid << _S32) | (ll & _M32)
    return hi, lo


@njit
def philox_block(c0, c1, c2, c3, k0, k1, out):
    """Write Philox4x64-10 of counter ``(c0..c3)`` under key ``(k0, k1)`` into ``out[:4]``."""
    for i in range(10):
        if i > 0:
            k0 = k0 + _WEYL0
            k1 = k1 + _WEYL1
        hi0, lo0 = _mulhilo(_MUL0, c0)
        hi1, lo1 = _mulhilo(_MUL1, c2)
        c0 = hi1 ^ c1 ^ k0
        c1 = lo1
        c2 = hi0 ^ c3 ^ k1
        c3 = lo0
    out[0] = c0
    out[1] = c1
    out[2] = c2
    out[3] = c3


@njit
def stream_init(seed, path):
    """State array ``[k0, k1, counter, pos, w0..w3]`` for one path."""
    st = np.zeros(8, dtype=np.uint64)
    st[0] = uint64(seed)
    st[1] = uint64(path)
    st[3] = uint64(4)  # buffer empty
    return st


@njit
def next_u64(st):
    pos = st[3]
    if pos >= uint64(4):
        philox_block(st[2], uint64(0), uint64(0), uint64(0), st[0], st[1], st[4:8])
        st[2] = st[2] + uint64(1)
        pos = uint64(0)
    st[3] = pos + uint64(1)
    return st[4 + pos]


@njit
def next_uniform(st):
    """Uniform on the open interval (0, 1), 53-bit resolution."""
    return ((next_u64(st) >> _SHIFT) + 0.5) * _TWO_M53


@njit
def next_exponential(st):
    return -np.log(next_uniform(st))


@njit
def next_normal(st):
    """One standard normal (first Box-Muller variate)."""
    u1 = next_uniform(st)
    u2 = next_uniform(st)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


@njit
def next_normal_pair(st):
    """Two independent standard normals from one Box-Muller draw."""
    r = np.sqrt(-2.0 * np.log(next_uniform(st)))
    a = 2.0 * np.pi * next_uniform(st)
    return r * np.cos(a), r * np.sin(a)


@njit
def _fill_raw(seed, path, n, out):
    st = stream_init(seed, path)
    for i in range(n):
        out[i] = next_u64(st)


def raw_stream(seed: int, path: int, n: int) -> np.ndarray:
    """First ``n`` raw 64-bit words of the stream for ``(seed, path)``."""
    out = np.empty(n, dtype=np.uint64)
    _fill_raw(np.uint64(seed), np.uint64(path), n, out)
    return out
