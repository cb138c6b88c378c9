"""Propagation impairments: TDL-C multipath fading, high-speed-train Doppler,
AWGN. Realizations are immutable; applying one to a signal is a pure function
so trials can run concurrently, each with its own rng stream.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import SeededRng

__all__ = [
    "SPEED_OF_LIGHT",
    "ChannelRealization",
    "HstConfig",
    "tdlc_realization",
    "hst_realization",
    "flat_realization",
    "custom_realization",
    "apply_channel",
]

SPEED_OF_LIGHT = 299_792_458.0

# TDL-C (NLOS) normalized power-delay profile from the standard channel-model
# tables: (delay normalized to the span, tap power in dB).
_TDLC_PROFILE = np.array(
    [
        (0.0000, -4.4),
        (0.2099, -1.2),
        (0.2219, -3.5),
        (0.2329, -5.2),
        (0.2176, -2.5),
        (0.6366, 0.0),
        (0.6448, -2.2),
        (0.6560, -3.9),
        (0.6584, -7.4),
        (0.7935, -7.1),
        (0.8213, -10.7),
        (0.9336, -11.1),
        (1.2285, -5.1),
        (1.3083, -6.8),
        (2.1704, -8.7),
        (2.7105, -13.2),
        (4.2589, -13.9),
        (4.6003, -13.9),
        (5.4902, -15.8),
        (5.6077, -17.1),
        (6.3065, -16.0),
        (6.6374, -15.7),
        (7.0427, -21.6),
        (8.6523, -22.8),
    ]
)

# Half-width of the windowed-sinc kernel realizing fractional tap delays.
_INTERP_HALFWIDTH = 16


def _delay_kernel(delay: float, length: int) -> np.ndarray:
    """Unit-energy kernel placing a tap at a (possibly fractional) delay.

    Integer delays resolve to an exact one-sample kernel; fractional delays
    use a Hann-windowed sinc, clipped to [0, length) to stay causal and
    renormalized so the tap keeps its assigned power.
    """
    kernel = np.zeros(length)
    nearest = int(round(delay))
    if abs(delay - nearest) < 1e-9:
        kernel[nearest] = 1.0
        return kernel
    n = np.arange(length, dtype=np.float64)
    arg = n - delay
    window = np.zeros(length)
    span = np.abs(arg) <= _INTERP_HALFWIDTH
    window[span] = 0.5 * (1.0 + np.cos(np.pi * arg[span] / _INTERP_HALFWIDTH))
    kernel = np.sinc(arg) * window
    return kernel / np.sqrt(np.sum(kernel**2))


@dataclass(frozen=True)
class ChannelRealization:
    """One channel draw: per-tap delayed kernels and gain trajectories.

    kernels has shape (num_taps, ir_len); gains has shape (num_taps,
    num_samples) for time-varying channels or (num_taps, 1) for static ones.
    noise_variance is the complex AWGN power added per output sample.
    """

    kernels: np.ndarray
    gains: np.ndarray
    noise_variance: float
    model_tag: str
    sample_rate_hz: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def ir_len(self) -> int:
        return self.kernels.shape[1]

    @property
    def is_static(self) -> bool:
        return self.gains.shape[1] == 1

    def impulse_response(self, sample_index: int = 0) -> np.ndarray:
        """Realized discrete impulse response at one output instant."""
        col = 0 if self.is_static else min(sample_index, self.gains.shape[1] - 1)
        return self.gains[:, col] @ self.kernels

    def frequency_response(self, fft_size: int, sample_index: int = 0) -> np.ndarray:
        """fft_size-point response of the realized impulse response."""
        return np.fft.fft(self.impulse_response(sample_index), fft_size)

    def describe(self) -> str:
        """Structured text dump of taps and trajectory for debugging."""
        lines = [
            f"model={self.model_tag}",
            f"noise_variance={self.noise_variance!r}",
            f"sample_rate_hz={self.sample_rate_hz!r}",
            f"num_taps={self.kernels.shape[0]}",
            f"ir_len={self.ir_len}",
            f"time_varying={not self.is_static}",
        ]
        for key, val in self.meta.items():
            lines.append(f"{key}={val}")
        for t in range(self.kernels.shape[0]):
            peak = int(np.argmax(np.abs(self.kernels[t])))
            g0 = self.gains[t, 0]
            lines.append(
                f"tap{t}: delay~{peak} gain0={g0.real:+.6f}{g0.imag:+.6f}j "
                f"mean_power={np.mean(np.abs(self.gains[t]) ** 2):.6f}"
            )
        return "\n".join(lines)


def _jakes_gains(
    num_samples: int,
    doppler_hz: float,
    sample_rate_hz: float,
    rng: SeededRng,
    num_sinusoids: int = 32,
) -> np.ndarray:
    """Unit-mean-power Rayleigh gain trajectory, classical Doppler spectrum.

    Sum of sinusoids with random arrival angles and phases; a zero Doppler
    collapses to a single constant complex gain.
    """
    phases = rng.uniform(0.0, 2.0 * np.pi, size=num_sinusoids)
    if doppler_hz == 0.0:
        g = np.sum(np.exp(1j * phases)) / np.sqrt(num_sinusoids)
        return np.full(num_samples, g, dtype=np.complex128)
    angles = rng.uniform(0.0, 2.0 * np.pi, size=num_sinusoids)
    t = np.arange(num_samples) / sample_rate_hz
    arg = 2.0 * np.pi * doppler_hz * np.outer(np.cos(angles), t) + phases[:, None]
    return np.sum(np.exp(1j * arg), axis=0) / np.sqrt(num_sinusoids)


def tdlc_realization(
    delay_spread_ns: float,
    speed_kmh: float,
    fc_ghz: float,
    sample_rate_hz: float,
    rng: SeededRng,
    num_samples: int = 1,
    noise_variance: float = 0.0,
) -> ChannelRealization:
    """TDL-C fading draw with the profile span scaled to delay_spread_ns.

    Per-tap Rayleigh processes follow the classical Doppler spectrum with
    maximum shift (speed/c) * fc. Average total tap power is one.
    """
    if delay_spread_ns <= 0:
        raise ValueError("tdlc_realization: delay_spread_ns must be > 0")
    delays_s = _TDLC_PROFILE[:, 0] / _TDLC_PROFILE[:, 0].max() * delay_spread_ns * 1e-9
    delays = delays_s * sample_rate_hz
    powers = 10.0 ** (_TDLC_PROFILE[:, 1] / 10.0)
    powers /= powers.sum()

    ir_len = int(np.ceil(delays.max())) + _INTERP_HALFWIDTH + 1
    kernels = np.stack([_delay_kernel(d, ir_len) for d in delays])

    doppler = (speed_kmh / 3.6) / SPEED_OF_LIGHT * fc_ghz * 1e9
    span = num_samples if (speed_kmh > 0 and num_samples > 1) else 1
    gains = np.stack(
        [
            np.sqrt(p) * _jakes_gains(span, doppler if span > 1 else 0.0,
                                      sample_rate_hz, rng)
            for p in powers
        ]
    )
    return ChannelRealization(
        kernels=kernels,
        gains=gains,
        noise_variance=float(noise_variance),
        model_tag="TDLC",
        sample_rate_hz=sample_rate_hz,
        meta={
            "delay_spread_ns": delay_spread_ns,
            "speed_kmh": speed_kmh,
            "fc_ghz": fc_ghz,
            "doppler_hz": doppler,
        },
    )


@dataclass(frozen=True)
class HstConfig:
    """Straight-track geometry: the terminal passes a site at perpendicular
    distance dmin_m, with ds_m the along-track span between direction flips."""

    ds_m: float = 300.0
    dmin_m: float = 2.0
    speed_kmh: float = 500.0
    fc_ghz: float = 7.0

    def __post_init__(self):
        if min(self.ds_m, self.dmin_m, self.speed_kmh, self.fc_ghz) <= 0:
            raise ValueError("HstConfig: all parameters must be positive")

    @property
    def speed_ms(self) -> float:
        return self.speed_kmh / 3.6

    @property
    def max_doppler_hz(self) -> float:
        return self.speed_ms / SPEED_OF_LIGHT * self.fc_ghz * 1e9

    def cos_theta(self, t: float) -> float:
        """Direction cosine toward the site at absolute time t (t=0 puts the
        terminal ds/2 before the closest-approach point)."""
        x = self.ds_m / 2.0 - self.speed_ms * t
        return x / np.hypot(self.dmin_m, x)

    def doppler_hz(self, t: float) -> float:
        return self.max_doppler_hz * self.cos_theta(t)

    def phase_rad(self, t: float) -> float:
        """Accumulated carrier phase 2*pi * integral of the Doppler shift,
        evaluated in closed form."""
        def dist(u: float) -> float:
            return float(np.hypot(self.dmin_m, self.ds_m / 2.0 - self.speed_ms * u))

        scale = 2.0 * np.pi * self.max_doppler_hz / self.speed_ms
        return scale * (dist(0.0) - dist(t))


def hst_realization(
    cfg: HstConfig,
    t0: float,
    duration: float,
    num_samples: int,
    sample_rate_hz: float,
    noise_variance: float = 0.0,
) -> ChannelRealization:
    """Single unit-gain path whose phase tracks the geometry-driven Doppler
    over [t0, t0 + duration]."""
    if num_samples < 1:
        raise ValueError("hst_realization: num_samples must be >= 1")
    t = t0 + np.arange(num_samples) * (duration / max(num_samples, 1))
    phases = np.array([cfg.phase_rad(u) for u in t]) - cfg.phase_rad(t0)
    gains = np.exp(1j * phases)[None, :]
    kernels = np.ones((1, 1))
    return ChannelRealization(
        kernels=kernels,
        gains=gains,
        noise_variance=float(noise_variance),
        model_tag="HST",
        sample_rate_hz=sample_rate_hz,
        meta={
            "ds_m": cfg.ds_m,
            "dmin_m": cfg.dmin_m,
            "speed_kmh": cfg.speed_kmh,
            "fc_ghz": cfg.fc_ghz,
            "t0": t0,
            "max_doppler_hz": cfg.max_doppler_hz,
        },
    )


def flat_realization(gain: complex = 1.0, noise_variance: float = 0.0) -> ChannelRealization:
    """Single-tap static channel."""
    return ChannelRealization(
        kernels=np.ones((1, 1)),
        gains=np.array([[gain]], dtype=np.complex128),
        noise_variance=float(noise_variance),
        model_tag="FLAT",
    )


def custom_realization(
    taps: list[tuple[float, complex]],
    noise_variance: float = 0.0,
    sample_rate_hz: float = 0.0,
) -> ChannelRealization:
    """Static channel from explicit (delay_samples, gain) pairs."""
    if not taps:
        raise ValueError("custom_realization: need at least one tap")
    delays = np.array([d for d, _ in taps], dtype=float)
    if np.any(delays < 0):
        raise ValueError("custom_realization: delays must be >= 0")
    gains = np.array([[g] for _, g in taps], dtype=np.complex128)
    frac = np.any(np.abs(delays - np.round(delays)) > 1e-9)
    ir_len = int(np.ceil(delays.max())) + (_INTERP_HALFWIDTH + 1 if frac else 1)
    kernels = np.stack([_delay_kernel(d, ir_len) for d in delays])
    return ChannelRealization(
        kernels=kernels,
        gains=gains,
        noise_variance=float(noise_variance),
        model_tag="CUSTOM",
        sample_rate_hz=sample_rate_hz,
    )


def apply_channel(signal, ch: ChannelRealization, rng: SeededRng) -> np.ndarray:
    """Time-varying linear convolution with the realized taps, plus AWGN.

    Output length is the signal length plus the impulse-response span so the
    full convolution tail is kept.
    """
    x = np.asarray(signal, dtype=np.complex128)
    if x.size == 0:
        raise ValueError("apply_channel: empty signal")
    out_len = x.size + ch.ir_len - 1
    y = np.zeros(out_len, dtype=np.complex128)
    for t in range(ch.kernels.shape[0]):
        delayed = np.convolve(x, ch.kernels[t])
        if ch.is_static:
            y += ch.gains[t, 0] * delayed
        else:
            traj = ch.gains[t]
            if traj.size < out_len:
                traj = np.concatenate([traj, np.full(out_len - traj.size, traj[-1])])
            y += traj[:out_len] * delayed
    if ch.noise_variance > 0.0:
        y += rng.complex_normal(out_len, ch.noise_variance)
    return y
