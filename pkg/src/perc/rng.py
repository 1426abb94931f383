"""Counter-based random bits: Philox4x64-10 in numba.

Every element of every replicate owns a fixed 64-bit draw
``element_u64(key, stream, element)`` so any bit can be computed on demand,
in any order, on any thread.  The key is ``(master_seed, domain)``; the domain
separates Bernoulli occupation draws from permutation keys.  The counter is
``(element // 4, stream, 0, 0)`` and the draw is output word ``element % 4``.
"""
from __future__ import annotations

from fractions import Fraction

import numba as nb
import numpy as np

BERNOULLI_DOMAIN = 0
PERMUTATION_DOMAIN = 1

_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_LO32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)

U64_MAX = (1 << 64) - 1


@nb.njit(inline="always", cache=True)
def _mulhilo(a, b):
    a_lo = a & _LO32
    a_hi = a >> _S32
    b_lo = b & _LO32
    b_hi = b >> _S32
    p0 = a_lo * b_lo
    p1 = a_lo * b_hi
    p2 = a_hi * b_lo
    p3 = a_hi * b_hi
    mid = (p0 >> _S32) + (p1 & _LO32) + (p2 & _LO32)
    hi = p3 + (p1 >> _S32) + (p2 >> _S32) + (mid >> _S32)
    return hi, a * b


@nb.njit(cache=True)
def philox4x64(c0, c1, c2, c3, k0, k1):
    """Ten Philox rounds on a 4x64 counter with a 2x64 key."""
    for r in range(10):
        if r > 0:
            k0 = k0 + _W0
            k1 = k1 + _W1
        hi0, lo0 = _mulhilo(_M0, c0)
        hi1, lo1 = _mulhilo(_M1, c2)
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return c0, c1, c2, c3


@nb.njit(cache=True)
def element_u64(k0, k1, stream, element):
    e = np.uint64(element)
    c0, c1, c2, c3 = philox4x64(e >> np.uint64(2), np.uint64(stream), np.uint64(0), np.uint64(0),
                                np.uint64(k0), np.uint64(k1))
    w = element & 3
    if w == 0:
        return c0
    if w == 1:
        return c1
    if w == 2:
        return c2
    return c3


@nb.njit(inline="always", cache=True)
def occupied_draw(k0, stream, element, threshold, always):
    """Bernoulli draw: occupied iff the element's 64-bit word is below ``threshold``."""
    if always:
        return np.uint8(1)
    u = element_u64(k0, np.uint64(BERNOULLI_DOMAIN), stream, element)
    return np.uint8(1) if u < threshold else np.uint8(0)


@nb.njit(cache=True, nogil=True)
def fill_bits(out, k0, stream, threshold, always):
    """Fill ``out`` with the occupation bits of one replicate, four elements per Philox call."""
    count = out.size
    kk0 = np.uint64(k0)
    kk1 = np.uint64(BERNOULLI_DOMAIN)
    s = np.uint64(stream)
    if always:
        out[:] = 1
        return
    blocks = (count + 3) // 4
    for b in range(blocks):
        c0, c1, c2, c3 = philox4x64(np.uint64(b), s, np.uint64(0), np.uint64(0), kk0, kk1)
        base = 4 * b
        out[base] = 1 if c0 < threshold else 0
        if base + 1 < count:
            out[base + 1] = 1 if c1 < threshold else 0
        if base + 2 < count:
            out[base + 2] = 1 if c2 < threshold else 0
        if base + 3 < count:
            out[base + 3] = 1 if c3 < threshold else 0


@nb.njit(cache=True, nogil=True)
def fill_u64(out, k0, k1, stream):
    count = out.size
    kk0 = np.uint64(k0)
    kk1 = np.uint64(k1)
    s = np.uint64(stream)
    blocks = (count + 3) // 4
    for b in range(blocks):
        c0, c1, c2, c3 = philox4x64(np.uint64(b), s, np.uint64(0), np.uint64(0), kk0, kk1)
        base = 4 * b
        out[base] = c0
        if base + 1 < count:
            out[base + 1] = c1
        if base + 2 < count:
            out[base + 2] = c2
        if base + 3 < count:
            out[base + 3] = c3


@nb.njit(cache=True, nogil=True)
def permutation(count, k0, stream):
    """Uniform random permutation by a Fisher-Yates shuffle.

    Step ``i`` picks ``j = floor(u * (i + 1) / 2**64)`` from the ``i``-th
    permutation-domain word ``u``; the multiply-high map is biased by at most
    ``(i + 1) / 2**64`` per step.
    """
    words = np.empty(count, dtype=np.uint64)
    fill_u64(words, k0, PERMUTATION_DOMAIN, stream)
    out = np.arange(count)
    for i in range(count - 1, 0, -1):
        hi, _ = _mulhilo(words[i], np.uint64(i + 1))
        j = np.int64(hi)
        out[i], out[j] = out[j], out[i]
    return out


def threshold_for(p) -> tuple[np.uint64, bool]:
    """``(floor(p * 2**64), p == 1)``; p is quantised exactly from its binary value."""
    if not 0 <= p <= 1:
        raise ValueError(f"probability must lie in [0, 1], got {p!r}")
    if p == 1:
        return np.uint64(U64_MAX), True
    t = int(Fraction(p) * (1 << 64))
    return np.uint64(min(t, U64_MAX)), False
