"""Receive chain for one symbol: front end, matched filter with spectrum
folding, self-contained channel estimation from the embedded RS, MMSE
equalization, tail-pilot phase correction, demodulation.

The estimator divides the received RS spectrum by the known part of the
composite response (reference sequence times the folded squared shaping
gain). For fold-flat filters the folded gain is identically one and the
chain reduces to a plain least-squares division by the RS spectrum; tap
filters null subcarriers outright, which is why the division must be
regularized (`ridge`) to stay solvable.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .sequences import ONE_SIDED_CP, FrameLayout, ModScheme, ShapingFilter, modulate
from .transmitter import WaveformGrid

__all__ = [
    "SingularReference",
    "DegenerateEqualizer",
    "FoldedSymbol",
    "EstimatorConfig",
    "ChannelEstimate",
    "EqualizedSymbol",
    "front_end",
    "fold_spectrum",
    "estimate_channel",
    "genie_estimate",
    "mmse_equalize",
    "ars_phase_correct",
    "demodulate",
    "dump_diagnostics",
]


class SingularReference(ValueError):
    """Unregularized LS with a reference spectrum that has a null."""


class DegenerateEqualizer(ValueError):
    """Zero noise variance with a zero channel estimate on some subcarrier."""


@dataclass(frozen=True)
class FoldedSymbol:
    """Symbol-rate spectrum after matched filtering and folding.

    folded has the allocation length; the demapped extended block and the
    filter that produced the fold are kept for diagnostics and estimation.
    """

    folded: np.ndarray
    demapped: np.ndarray
    filt: ShapingFilter

    @property
    def alloc_size(self) -> int:
        return self.folded.size


@dataclass(frozen=True)
class EstimatorConfig:
    """Channel-estimator knobs.

    window_len samples of the impulse response are retained (rectangular
    window), plus pre_margin cyclic pre-cursor samples for fractional-delay
    leakage. ridge is the LS regularization added to the squared reference
    magnitude. rs_offset picks the extraction point inside the prefix for
    one-sided layouts (None -> middle of the prefix).
    """

    window_len: int
    ridge: float = 0.0
    pre_margin: int = 2
    rs_offset: int | None = None

    def __post_init__(self):
        if self.window_len < 1:
            raise ValueError("EstimatorConfig: window_len must be >= 1")
        if self.ridge < 0:
            raise ValueError("EstimatorConfig: ridge must be >= 0")
        if self.pre_margin < 0:
            raise ValueError("EstimatorConfig: pre_margin must be >= 0")


@dataclass(frozen=True)
class ChannelEstimate:
    """Alloc-length frequency response estimate plus the intermediates."""

    response: np.ndarray
    rs_ls: np.ndarray
    rs_impulse: np.ndarray
    rs_windowed: np.ndarray
    layout: FrameLayout
    config: EstimatorConfig | None = None


@dataclass(frozen=True)
class EqualizedSymbol:
    """Equalized spectrum and time symbol, split into layout segments."""

    spectrum: np.ndarray
    time: np.ndarray
    layout: FrameLayout
    phase_step: float = 0.0

    @property
    def rs_prefix(self) -> np.ndarray:
        return self.time[: self.layout.rs_core_start]

    @property
    def rs_core(self) -> np.ndarray:
        lo = self.layout.rs_core_start
        return self.time[lo : lo + self.layout.rs_len]

    @property
    def rs_suffix(self) -> np.ndarray:
        lo = self.layout.rs_core_start + self.layout.rs_len
        return self.time[lo : self.layout.rs_block_len]

    @property
    def data(self) -> np.ndarray:
        return self.time[self.layout.data_start : self.layout.ars_start]

    @property
    def ars(self) -> np.ndarray:
        return self.time[self.layout.ars_start :]


def front_end(rx, grid: WaveformGrid) -> np.ndarray:
    """Strip the symbol CP, transform, and demap the extended block.

    The fixed alloc/fft scale undoes the transmit normalization, so a clean
    loopback returns exactly the shaped block that was mapped.
    """
    rx = np.asarray(rx, dtype=np.complex128)
    need = grid.fft_size + grid.cp_len
    if rx.size < need:
        raise ValueError(f"front_end: need at least {need} samples, got {rx.size}")
    body = rx[grid.cp_len : grid.cp_len + grid.fft_size]
    spectrum = np.fft.fft(body)
    return spectrum[grid.mapped_bins()] * (grid.alloc_size / grid.fft_size)


def fold_spectrum(demapped, filt: ShapingFilter) -> FoldedSymbol:
    """Matched-filter the extended block and alias it to the allocation size.

    Each output bin k accumulates w*y over the extended positions congruent
    to k modulo the allocation; out-of-range aliases contribute nothing.
    """
    y = np.asarray(demapped, dtype=np.complex128)
    m, g = filt.alloc_size, filt.excess
    if y.size != m + 2 * g:
        raise ValueError(
            f"fold_spectrum: block length {y.size} != extended size {m + 2 * g}"
        )
    prod = filt.weights * y
    folded = prod[g : g + m].copy()
    if g:
        folded[: g] += prod[m + g :]
        folded[m - g :] += prod[: g]
    return FoldedSymbol(folded=folded, demapped=y, filt=filt)


def _alias_to(x: np.ndarray, length: int) -> np.ndarray:
    """Fold a sequence onto a shorter cyclic grid by summing congruent taps."""
    out = np.zeros(length, dtype=x.dtype)
    np.add.at(out, np.arange(x.size) % length, x)
    return out


def _reference_gain(filt: ShapingFilter, rs_len: int) -> np.ndarray:
    """Known composite gain resampled onto the RS-length grid.

    This is the folded squared filter response seen through an rs_len-point
    cyclic lens; identically one for fold-flat filters.
    """
    composite = filt.folded_square()
    impulse = np.fft.ifft(composite)
    return np.fft.fft(_alias_to(impulse, rs_len))


def estimate_channel(
    folded: FoldedSymbol,
    layout: FrameLayout,
    rs_core,
    est: EstimatorConfig,
) -> ChannelEstimate:
    """Estimate the composite folded channel from the embedded RS.

    Reconstruct the time symbol, extract the protected RS core, divide its
    spectrum by the known reference (regularized by `ridge`), window the
    resulting impulse response, and re-expand to the allocation grid.
    """
    rs_core = np.asarray(rs_core, dtype=np.complex128)
    m = folded.alloc_size
    l_r = layout.rs_len
    if layout.total_len != m:
        raise ValueError("estimate_channel: layout does not match the folded symbol")
    if rs_core.size != l_r or l_r < 1:
        raise ValueError(f"estimate_channel: rs core length {rs_core.size} != {l_r}")
    if est.window_len > l_r:
        raise ValueError("estimate_channel: window_len exceeds the RS core length")

    time_symbol = np.fft.ifft(folded.folded)
    if layout.variant == ONE_SIDED_CP:
        offset = layout.rs_cp // 2 if est.rs_offset is None else est.rs_offset
        if not 0 <= offset <= layout.rs_cp:
            raise ValueError("estimate_channel: rs_offset outside the RS prefix")
        received = time_symbol[offset : offset + l_r]
        reference = np.roll(rs_core, -offset)
    else:
        start = layout.rs_core_start
        received = time_symbol[start : start + l_r]
        reference = rs_core

    rs_spectrum = np.fft.fft(received)
    ref_spectrum = np.fft.fft(reference) * _reference_gain(folded.filt, l_r)

    denom = np.abs(ref_spectrum) ** 2
    if est.ridge == 0.0:
        floor = 1e-12 * max(float(denom.max()), 1.0)
        if np.any(denom <= floor):
            raise SingularReference(
                "estimate_channel: reference spectrum has a null; "
                "set ridge > 0 to regularize"
            )
    ls = rs_spectrum * np.conj(ref_spectrum) / (denom + est.ridge)

    impulse = np.fft.ifft(ls)
    margin = min(est.pre_margin, l_r - est.window_len)
    mask = np.zeros(l_r)
    mask[: est.window_len] = 1.0
    if margin > 0:
        mask[l_r - margin :] = 1.0
    windowed = impulse * mask

    # cyclic embedding: causal taps at the front, pre-cursor taps at the tail
    padded = np.zeros(m, dtype=np.complex128)
    padded[: est.window_len] = windowed[: est.window_len]
    if margin > 0:
        padded[m - margin :] = windowed[l_r - margin :]
    response = np.fft.fft(padded) * folded.filt.folded_square()

    return ChannelEstimate(
        response=response,
        rs_ls=ls,
        rs_impulse=impulse,
        rs_windowed=windowed,
        layout=layout,
        config=est,
    )


def genie_estimate(response, layout: FrameLayout) -> ChannelEstimate:
    """Wrap a known frequency response as an estimate (oracle receivers)."""
    response = np.asarray(response, dtype=np.complex128)
    if response.size != layout.total_len:
        raise ValueError("genie_estimate: response length != layout size")
    empty = np.zeros(layout.rs_len, dtype=np.complex128)
    return ChannelEstimate(
        response=response,
        rs_ls=empty,
        rs_impulse=empty,
        rs_windowed=empty,
        layout=layout,
    )


def mmse_equalize(
    folded: FoldedSymbol, est: ChannelEstimate, noise_var: float
) -> EqualizedSymbol:
    """Per-subcarrier MMSE equalization and return to the time domain.

    noise_var is the noise-to-signal power ratio per folded subcarrier
    (inverse linear SNR); zero gives the zero-forcing limit and requires a
    null-free estimate.
    """
    if noise_var < 0:
        raise ValueError("mmse_equalize: noise_var must be >= 0")
    h = est.response
    if h.size != folded.alloc_size:
        raise ValueError("mmse_equalize: estimate length != folded symbol length")
    power = np.abs(h) ** 2
    if noise_var == 0.0:
        floor = 1e-24 * max(float(power.max()), 1.0)
        if np.any(power <= floor):
            raise DegenerateEqualizer(
                "mmse_equalize: zero estimate with zero noise variance"
            )
    weights = np.conj(h) / (power + noise_var)
    spectrum = weights * folded.folded
    time = np.fft.ifft(spectrum)
    return EqualizedSymbol(spectrum=spectrum, time=time, layout=est.layout)


def ars_phase_correct(
    eq: EqualizedSymbol, ars_ref, layout: FrameLayout
) -> EqualizedSymbol:
    """Estimate the per-sample phase increment from the tail pilots and
    derotate the data segment.

    The phase reference sits at the end of the RS core, so pilot sample n
    carries phase (n + rs_cs + data_len) * step and data sample n carries
    (n + rs_cs) * step. Unambiguous while |step| * alloc stays below pi.
    """
    ars_ref = np.asarray(ars_ref, dtype=np.complex128)
    if layout.ars_len < 1:
        raise ValueError("ars_phase_correct: layout has no ARS allocation")
    if ars_ref.size != layout.ars_len:
        raise ValueError("ars_phase_correct: reference length != layout ars_len")
    if eq.layout != layout:
        raise ValueError("ars_phase_correct: layout mismatch with equalized symbol")

    n = np.arange(layout.ars_len)
    positions = n + layout.rs_cs + layout.data_len
    angles = np.angle(eq.ars * np.conj(ars_ref))
    step = float(np.mean(angles / positions))

    time = eq.time.copy()
    lo, hi = layout.data_start, layout.ars_start
    rot = np.exp(-1j * (np.arange(layout.data_len) + layout.rs_cs) * step)
    time[lo:hi] = time[lo:hi] * rot
    return replace(eq, time=time, phase_step=step)


@dataclass(frozen=True)
class _Constellation:
    points: np.ndarray
    bits: np.ndarray  # shape (num_points, bits_per_symbol)


def _constellation(scheme: ModScheme) -> _Constellation:
    bps = scheme.bits_per_symbol
    count = 2**bps
    patterns = ((np.arange(count)[:, None] >> np.arange(bps - 1, -1, -1)) & 1).astype(
        np.int64
    )
    points = modulate(patterns.ravel(), scheme)
    return _Constellation(points=points, bits=patterns)


def demodulate(symbols, scheme: ModScheme, noise_var: float):
    """Minimum-distance hard bits plus max-log soft metrics.

    Returns (bits, metrics); metrics are log-likelihood ratios scaled by the
    noise variance, positive where the hard decision is a one.
    """
    rx = np.asarray(symbols, dtype=np.complex128)
    if rx.size == 0:
        raise ValueError("demodulate: empty input")
    scale = max(float(noise_var), 1e-12)

    if scheme.name == "PI2_BPSK":
        rot = np.where(np.arange(rx.size) % 2 == 1, 1j, 1.0 + 0j)
        rx = rx * np.conj(rot)
        ref = np.array([(1 + 1j) / np.sqrt(2.0), -(1 + 1j) / np.sqrt(2.0)])
        d = np.abs(rx[:, None] - ref[None, :]) ** 2
        bits = (d[:, 1] < d[:, 0]).astype(np.int64)
        llr = (d[:, 0] - d[:, 1]) / scale
        return bits, llr

    table = _constellation(scheme)
    d = np.abs(rx[:, None] - table.points[None, :]) ** 2
    best = np.argmin(d, axis=1)
    bits = table.bits[best].ravel()

    bps = scheme.bits_per_symbol
    llr = np.empty((rx.size, bps))
    for b in range(bps):
        ones = table.bits[:, b] == 1
        llr[:, b] = (d[:, ~ones].min(axis=1) - d[:, ones].min(axis=1)) / scale
    return bits, llr.ravel()


def dump_diagnostics(
    folded: FoldedSymbol,
    est: ChannelEstimate | None = None,
    eq: EqualizedSymbol | None = None,
    max_items: int = 8,
) -> str:
    """Structured text snapshot of the receive chain for one symbol."""

    def fmt(name, vec):
        vec = np.asarray(vec)
        head = ", ".join(
            f"{z.real:+.5f}{z.imag:+.5f}j" for z in vec.ravel()[:max_items]
        )
        return f"{name}[{vec.size}]: {head}{', ...' if vec.size > max_items else ''}"

    lines = [fmt("demapped", folded.demapped), fmt("folded", folded.folded)]
    if est is not None:
        lines.append(fmt("channel_estimate", est.response))
    if eq is not None:
        lines.append(fmt("eq_rs_core", eq.rs_core))
        lines.append(fmt("eq_data", eq.data))
        if eq.layout.ars_len:
            lines.append(fmt("eq_ars", eq.ars))
        lines.append(f"phase_step: {eq.phase_step:+.3e} rad/sample")
    return "\n".join(lines)
