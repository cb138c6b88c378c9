"""Complex transform and statistics kernel shared by the whole library.

Conventions, fixed once here so power bookkeeping is consistent everywhere:
the forward DFT is unnormalized and the inverse carries the 1/size factor
(numpy's convention). Transform lengths are arbitrary, not just powers of
two, since allocation sizes like 2400 are first class.
"""

from __future__ import annotations

import numpy as np

__all__ = ["dft", "idft", "papr_db", "ccdf", "evm_db", "SeededRng"]


def _as_complex_vec(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim != 1:
        raise ValueError(f"expected a 1-D sample vector, got shape {x.shape}")
    return x


def dft(x, inverse: bool = False) -> np.ndarray:
    """Forward (unnormalized) or inverse (1/size) DFT of a complex vector."""
    x = _as_complex_vec(x)
    if x.size == 0:
        raise ValueError("dft: zero-length input")
    return np.fft.ifft(x) if inverse else np.fft.fft(x)


def idft(x) -> np.ndarray:
    """Inverse DFT with the 1/size factor."""
    return dft(x, inverse=True)


def papr_db(x) -> float:
    """Peak-to-average power ratio 10*log10(max|x|^2 / mean|x|^2) in dB."""
    x = _as_complex_vec(x)
    if x.size == 0:
        raise ValueError("papr_db: empty input")
    p = np.abs(x) ** 2
    mean = p.mean()
    if mean == 0.0:
        raise ValueError("papr_db: all-zero input")
    return float(10.0 * np.log10(p.max() / mean))


def ccdf(values, grid) -> list[tuple[float, float]]:
    """Complementary CDF of `values` over ascending thresholds `grid`.

    Returns (threshold, Pr[value > threshold]) pairs; the probabilities are
    monotone non-increasing along the grid.
    """
    values = np.asarray(values, dtype=float)
    grid = np.asarray(grid, dtype=float)
    if values.size == 0 or grid.size == 0:
        raise ValueError("ccdf: values and grid must be non-empty")
    if np.any(np.diff(grid) < 0):
        raise ValueError("ccdf: grid must be sorted ascending")
    return [(float(t), float(np.mean(values > t))) for t in grid]


def evm_db(estimate, reference) -> float:
    """Error vector magnitude in dB: residual power over reference power."""
    est = np.asarray(estimate, dtype=np.complex128)
    ref = np.asarray(reference, dtype=np.complex128)
    if est.shape != ref.shape:
        raise ValueError("evm_db: shape mismatch")
    num = np.sum(np.abs(est - ref) ** 2)
    den = np.sum(np.abs(ref) ** 2)
    if den == 0.0:
        raise ValueError("evm_db: all-zero reference")
    if num == 0.0:
        return float("-inf")
    return float(10.0 * np.log10(num / den))


class SeededRng:
    """Reproducible random stream keyed by (seed, stream_id).

    Two instances built from the same key emit identical draws regardless of
    process or thread schedule. Instances hold state and must not be shared
    across workers; give each worker its own stream via `derive`.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        self._gen = np.random.default_rng(ss)

    def derive(self, stream_id: int) -> "SeededRng":
        """Sibling stream with the same seed and a different stream_id."""
        return SeededRng(self.seed, stream_id)

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def bits(self, count: int) -> np.ndarray:
        return self._gen.integers(0, 2, size=count, dtype=np.int64)

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None):
        return self._gen.uniform(low, high, size=size)

    def standard_normal(self, size=None):
        return self._gen.standard_normal(size=size)

    def complex_normal(self, size, variance: float = 1.0) -> np.ndarray:
        """Circularly symmetric complex Gaussian samples of given variance."""
        scale = np.sqrt(variance / 2.0)
        return scale * (
            self._gen.standard_normal(size) + 1j * self._gen.standard_normal(size)
        )

    def __repr__(self) -> str:
        return f"SeededRng(seed={self.seed}, stream_id={self.stream_id})"
