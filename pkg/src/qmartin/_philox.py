"""Philox4x64-10 for use inside numba kernels.

Bit-compatible with ``np.random.Philox``: for key = [k0, k1] and
counter = [0, 0, a, b], numpy's ``Generator.random()`` returns
``(word >> 11) * 2**-53`` over the block sequence generated at
pre-incremented counters c0 = 1, 2, ....  ``PhiloxState`` reproduces
exactly that sequence, which is what lets Python-side and kernel-side
code share one stream definition (verified in tests/test_rng.py).
"""

from __future__ import annotations

import numba as nb
import numpy as np

_M0 = nb.uint64(0xD2E7470EE14C6C93)
_M1 = nb.uint64(0xCA5A826395121157)
_W0 = nb.uint64(0x9E3779B97F4A7C15)
_W1 = nb.uint64(0xBB67AE8584CAA73B)

_INV53 = 1.0 / 9007199254740992.0  # 2**-53


@nb.njit(nb.types.UniTuple(nb.uint64, 2)(nb.uint64, nb.uint64),
         inline="always", nogil=True, cache=True)
def _mulhilo(a, b):
    lo = a * b
    a_lo = a & nb.uint64(0xFFFFFFFF)
    a_hi = a >> nb.uint64(32)
    b_lo = b & nb.uint64(0xFFFFFFFF)
    b_hi = b >> nb.uint64(32)
    t = a_hi * b_lo + ((a_lo * b_lo) >> nb.uint64(32))
    hi = a_hi * b_hi + (t >> nb.uint64(32)) + ((a_lo * b_hi + (t & nb.uint64(0xFFFFFFFF))) >> nb.uint64(32))
    return hi, lo


@nb.njit(nb.types.UniTuple(nb.uint64, 4)(nb.uint64, nb.uint64, nb.uint64, nb.uint64,
                                         nb.uint64, nb.uint64),
         inline="always", nogil=True, cache=True)
def _block(c0, c1, c2, c3, k0, k1):
    for _ in range(10):
        hi0, lo0 = _mulhilo(_M0, c0)
        hi1, lo1 = _mulhilo(_M1, c2)
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
        k0 += _W0
        k1 += _W1
    return c0, c1, c2, c3


# Stream state: [c0, a, b, k0, k1, buffered word count, w0, w1, w2, w3]
# held in a uint64 array so kernels can carry several streams at once.
_NST = 10

state_type = nb.uint64[:]


@nb.njit(nb.uint64[:](nb.uint64, nb.uint64, nb.uint64, nb.uint64), nogil=True, cache=True)
def make_stream(seed, purpose, a, b):
    st = np.zeros(_NST, dtype=np.uint64)
    st[0] = 0       # c0, pre-incremented before each block
    st[1] = a       # counter word 2
    st[2] = b       # counter word 3
    st[3] = seed    # key word 0
    st[4] = purpose # key word 1
    st[5] = 0       # words left in buffer
    return st


@nb.njit(nb.float64(nb.uint64[:]), inline="always", nogil=True, cache=True)
def next_double(st):
    n = st[5]
    if n == nb.uint64(0):
        st[0] += nb.uint64(1)
        w0, w1, w2, w3 = _block(st[0], nb.uint64(0), st[1], st[2], st[3], st[4])
        st[6] = w0
        st[7] = w1
        st[8] = w2
        st[9] = w3
        n = nb.uint64(4)
    w = st[nb.uint64(10) - n]
    st[5] = n - nb.uint64(1)
    return (w >> nb.uint64(11)) * _INV53
