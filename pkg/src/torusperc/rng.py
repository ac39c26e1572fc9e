"""Counter-based random numbers for reproducible, schedule-independent Monte Carlo.

Every random quantity in the package is a pure function of
``(seed, replicate, counter)``: the state of site ``i`` in replicate ``r`` of a
run seeded with ``s`` never depends on how trials are distributed over
workers, or in which order sites are filled in.  The generator is Philox-2x64
(10 rounds), evaluated vectorially under numba.
"""

import numba
import numpy as np

PHILOX_M = np.uint64(0xD2B74407B1CE6E93)
PHILOX_BUMP = np.uint64(0x9E3779B97F4A7C15)  # golden-ratio Weyl increment
_MASK32 = np.uint64(0xFFFFFFFF)
_INV53 = 1.0 / 9007199254740992.0  # 2**-53


@numba.njit(numba.types.UniTuple(numba.uint64, 2)(numba.uint64, numba.uint64),
            cache=True, inline="always")
def _mulhilo(a, b):
    """Full 64x64 -> 128 bit product as (hi, lo), via 32-bit limbs."""
    a_lo = a & _MASK32
    a_hi = a >> np.uint64(32)
    b_lo = b & _MASK32
    b_hi = b >> np.uint64(32)
    lo_lo = a_lo * b_lo
    hi_lo = a_hi * b_lo
    lo_hi = a_lo * b_hi
    hi_hi = a_hi * b_hi
    cross = (lo_lo >> np.uint64(32)) + (hi_lo & _MASK32) + lo_hi
    hi = hi_hi + (hi_lo >> np.uint64(32)) + (cross >> np.uint64(32))
    lo = (cross << np.uint64(32)) | (lo_lo & _MASK32)
    return hi, lo


@numba.njit(numba.types.UniTuple(numba.uint64, 2)(numba.uint64, numba.uint64, numba.uint64),
            cache=True, inline="always")
def philox2x64(c0, c1, key):
    """One Philox-2x64-10 block: two 64-bit words from counter (c0, c1) and key."""
    x0 = np.uint64(c0)
    x1 = np.uint64(c1)
    k = np.uint64(key)
    for _ in range(10):
        hi, lo = _mulhilo(PHILOX_M, x0)
        x0 = hi ^ k ^ x1
        x1 = lo
        k = k + PHILOX_BUMP
    return x0, x1


@numba.njit(numba.uint64(numba.uint64), cache=True, inline="always")
def splitmix64(x):
    x = x + np.uint64(0x9E3779B97F4A7C15)
    z = x
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@numba.njit(numba.uint64(numba.uint64, numba.uint64), cache=True, inline="always")
def stream_key(seed, replicate):
    """64-bit Philox key for one (seed, replicate) stream."""
    return splitmix64(splitmix64(seed) ^ replicate)


@numba.njit(numba.float64(numba.uint64, numba.uint64, numba.uint64),
            cache=True, inline="always")
def uniform_at(seed, replicate, counter):
    """Uniform in [0, 1) at an explicit counter value."""
    x0, _ = philox2x64(counter, np.uint64(0), stream_key(seed, replicate))
    return np.float64(x0 >> np.uint64(11)) * _INV53


@numba.njit(cache=True)
def fill_uniforms(seed, replicate, codes, out):
    """Fill ``out[i]`` with the uniform keyed by (seed, replicate, codes[i])."""
    key = stream_key(seed, replicate)
    for i in range(codes.shape[0]):
        x0, _ = philox2x64(codes[i], np.uint64(0), key)
        out[i] = np.float64(x0 >> np.uint64(11)) * _INV53


def uniforms(seed, replicate, codes):
    """Uniforms in [0,1) for an array of counter codes (pure function)."""
    codes = np.ascontiguousarray(codes, dtype=np.uint64)
    out = np.empty(codes.shape[0], dtype=np.float64)
    fill_uniforms(np.uint64(seed), np.uint64(replicate), codes, out)
    return out


def site_codes(count):
    """Default counter codes for a domain: the site indices themselves."""
    return np.arange(count, dtype=np.uint64)


def lift_code(m, n, base):
    """Counter code for a lattice lift (m, n, base vertex).

    Injective for |m|, |n| < 2**20 and base < 2**21; used when two runs must
    share randomness on geometrically identical sites (shifted-domain
    couplings).
    """
    m = int(m) + (1 << 20)
    n = int(n) + (1 << 20)
    if not (0 <= m < 1 << 21 and 0 <= n < 1 << 21 and 0 <= base < 1 << 21):
        raise ValueError("lift coordinates out of the encodable range")
    return np.uint64((m << 42) | (n << 21) | int(base))


def chunk_ranges(trials, chunk=1024):
    """Fixed-size replicate chunks, independent of worker count.

    Statistics are merged in chunk order, so a run is bit-identical no matter
    how many workers process the chunks.
    """
    return [(lo, min(lo + chunk, trials)) for lo in range(0, trials, chunk)]
