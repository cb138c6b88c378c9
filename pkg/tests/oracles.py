"""Independent reference implementations used as test oracles.

Everything here is deliberately written from definitions (direct summation,
decision-region integration, quadrature) rather than reusing library code, so
the tests check the fast paths against slow but obviously-correct math.
"""

import math

import numpy as np


def dft_direct(x, inverse=False):
    """O(n^2) summation DFT; forward unnormalized, inverse with 1/n."""
    x = np.asarray(x, dtype=np.complex128)
    n = x.size
    sign = 1j if inverse else -1j
    out = np.empty(n, dtype=np.complex128)
    for k in range(n):
        acc = 0.0 + 0.0j
        for m in range(n):
            acc += x[m] * np.exp(sign * 2.0 * np.pi * k * m / n)
        out[k] = acc
    return out / n if inverse else out


def extend_and_shape_direct(x_t, weights, excess):
    """Direct recomputation of precode + cyclic extension + shaping."""
    x_t = np.asarray(x_t, dtype=np.complex128)
    m = x_t.size
    spectrum = dft_direct(x_t)
    out = np.empty(m + 2 * excess, dtype=np.complex128)
    for j in range(m + 2 * excess):
        k_ext = j - excess
        out[j] = weights[j] * spectrum[k_ext % m]
    return out


def fold_direct(demapped, weights, alloc_size, excess):
    """Direct triple-sum spectrum fold over the aliases of each output bin."""
    y = np.asarray(demapped, dtype=np.complex128)
    out = np.zeros(alloc_size, dtype=np.complex128)
    for k in range(alloc_size):
        for p in (-1, 0, 1):
            j = k + p * alloc_size + excess
            if 0 <= j < y.size:
                out[k] += np.conj(weights[j]) * y[j]
    return out


def fold_composite_direct(weights, alloc_size, excess, channel_bins):
    """True folded composite response: sum of |w|^2 H over each bin's aliases."""
    out = np.zeros(alloc_size, dtype=np.complex128)
    for k in range(alloc_size):
        for p in (-1, 0, 1):
            j = k + p * alloc_size + excess
            if 0 <= j < weights.size:
                out[k] += abs(weights[j]) ** 2 * channel_bins[j]
    return out


def qfunc(z):
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def _gray_pam_levels(bits_per_axis):
    """(levels, bit patterns) for the Gray PAM axis used by square QAM."""
    count = 2**bits_per_axis
    patterns = [
        [(i >> (bits_per_axis - 1 - c)) & 1 for c in range(bits_per_axis)]
        for i in range(count)
    ]
    levels = []
    for bits in patterns:
        acc = 0
        idx = 0
        for b in bits:
            acc ^= b
            idx = 2 * idx + acc
        levels.append(2 * idx - (count - 1))
    return np.array(levels, dtype=float), np.array(patterns, dtype=int)


def qam_ber_exact(bits_per_symbol, noise_var):
    """Exact Gray square-QAM bit error rate in complex noise of the given
    variance, for a unit-average-power constellation, via decision-region
    integration on each PAM axis."""
    per_axis = bits_per_symbol // 2
    levels, patterns = _gray_pam_levels(per_axis)
    scale = math.sqrt(2.0 * (4**per_axis - 1) / 3.0)
    pts = np.sort(levels) / scale
    order = np.argsort(levels)
    pat_sorted = patterns[order]
    bounds = (pts[:-1] + pts[1:]) / 2.0
    sigma = math.sqrt(noise_var / 2.0)

    total = 0.0
    count = len(pts)
    for i, x in enumerate(pts):
        # probability of deciding each region given x was sent
        upper = np.concatenate([bounds, [np.inf]])
        lower = np.concatenate([[-np.inf], bounds])
        for j in range(count):
            lo = 1.0 if lower[j] == -np.inf else qfunc((lower[j] - x) / sigma)
            hi = 0.0 if upper[j] == np.inf else qfunc((upper[j] - x) / sigma)
            p_region = lo - hi
            nbit_err = int(np.sum(pat_sorted[i] != pat_sorted[j]))
            total += p_region * nbit_err
    # average over equiprobable levels and per-axis bits; both axes identical
    return total / (count * per_axis)


def bessel_j0(x):
    """J0 via midpoint quadrature of its integral representation."""
    phi = (np.arange(4000) + 0.5) * (np.pi / 4000)
    return float(np.mean(np.cos(x * np.sin(phi))))
