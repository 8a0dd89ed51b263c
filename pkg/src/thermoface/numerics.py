"""Deterministic dense linear-algebra kernels and seeded random numbers.

Matrices are plain ``numpy.ndarray`` objects with ``dtype=float64``,
row-major (C order).  All training and evaluation paths run in 64-bit
floats.

Reduction order
---------------
``gemv`` accumulates each output entry strictly left to right over the
row (``((a0*x0 + a1*x1) + a2*x2) + ...``).  With IEEE-754 doubles this
makes the result bit-identical to a naive scalar loop in the same order,
which is what the golden-file tests rely on.

Random numbers
--------------
``Rng`` is SplitMix64 (Steele, Lea & Flood 2014): the 64-bit state
advances by the odd constant 0x9E3779B97F4A7C15 per draw and the output
is a fixed xor-multiply finalizer of the state.  Uniform doubles are
``(draw >> 11) * 2**-53`` in [0, 1).  Integer-only state updates make
the stream identical on every platform for a given seed.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractViolation

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _mix(z: int) -> int:
    """SplitMix64 output finalizer for a single 64-bit state value."""
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


def derive_seed(master: int, stream: int) -> int:
    """Seed for child stream ``stream``: output ``stream+1`` of SplitMix64
    seeded with ``master``.  Used to split one seed across parallel work
    (per-image generation) without sharing generator state."""
    return _mix((master + (stream + 1) * _GAMMA) & _MASK)


class Rng:
    """SplitMix64 generator.  Single-owner: not safe to share; split
    seeds with :func:`derive_seed` for parallel work."""

    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK
        return _mix(self._state)

    def _bulk_u64(self, n: int) -> np.ndarray:
        """n raw draws, vectorized.  Advances the stream by n."""
        if n == 0:
            return np.empty(0, dtype=np.uint64)
        steps = np.arange(1, n + 1, dtype=np.uint64)
        z = np.uint64(self._state) + steps * np.uint64(_GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        z = z ^ (z >> np.uint64(31))
        self._state = (self._state + n * _GAMMA) & _MASK
        return z

    def uniform(self, lo: float, hi: float, n: int) -> np.ndarray:
        """n doubles in [lo, hi).  Advances the stream by n draws."""
        if not lo < hi:
            raise ContractViolation(f"uniform bounds must satisfy lo < hi, got [{lo}, {hi})")
        u = (self._bulk_u64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        out = lo + u * (hi - lo)
        # rounding of lo + u*(hi-lo) can land on hi for extreme ranges
        return np.minimum(out, np.nextafter(hi, lo))

    def normal(self, sigma: float, n: int) -> np.ndarray:
        """n zero-mean Gaussian draws via Box-Muller.  Consumes
        2*ceil(n/2) uniform draws regardless of n's parity."""
        m = (n + 1) // 2
        u1 = ((self._bulk_u64(m) >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
        u2 = (self._bulk_u64(m) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
        return sigma * z

    def shuffle(self, items) -> None:
        """In-place Fisher-Yates, high index down, j = draw mod (i+1)."""
        n = len(items)
        if n < 2:
            return
        draws = self._bulk_u64(n - 1)
        for k, i in enumerate(range(n - 1, 0, -1)):
            j = int(draws[k] % np.uint64(i + 1))
            items[i], items[j] = items[j], items[i]

    def sample_indices(self, n: int, k: int) -> np.ndarray:
        """k distinct indices from range(n), by partial Fisher-Yates.
        Order of the returned indices is the selection order."""
        if k > n:
            raise ContractViolation(f"cannot sample {k} of {n}")
        idx = np.arange(n, dtype=np.int64)
        draws = self._bulk_u64(k)
        for i in range(k):
            j = i + int(draws[i] % np.uint64(n - i))
            idx[i], idx[j] = idx[j], idx[i]
        return idx[:k].copy()


def uniform_fill(rng: Rng, lo: float, hi: float, rows: int, cols: int) -> np.ndarray:
    """rows x cols matrix of uniforms in [lo, hi), filled row-major in
    stream order.  Advances rng by rows*cols draws."""
    return rng.uniform(lo, hi, rows * cols).reshape(rows, cols)


def gemv(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    """y[i] = sum_j a[i, j] * x[j], accumulated left to right per row."""
    a = np.asarray(a, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if a.ndim != 2 or x.ndim != 1 or a.shape[1] != x.shape[0]:
        raise ContractViolation(f"gemv shape mismatch: {a.shape} x {x.shape}")
    if a.shape[1] == 0:
        return np.zeros(a.shape[0])
    # cumsum accumulates sequentially, matching the documented order
    return np.cumsum(a * x, axis=1)[:, -1]


def l2_normalize(x: np.ndarray) -> np.ndarray:
    """x / ||x||_2; inputs with norm below 1e-12 are returned unchanged."""
    x = np.asarray(x, dtype=np.float64)
    if x.size < 1:
        raise ContractViolation("l2_normalize needs at least one element")
    norm = float(np.sqrt(np.sum(x * x)))
    if norm < 1e-12:
        return x.copy()
    return x / norm
