"""Doubly-selective multipath channel, TDL-C path drops and AWGN.

The channel acts on time-domain samples as a sum of paths, each with a
complex gain, an integer sample delay (within the cyclic prefix) and an
arbitrary real Doppler shift. Time zero is the first body sample, i.e. the
sample right after the cyclic prefix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import FrameConfig, SPEED_OF_LIGHT
from .waveform import TxFrame, Waveform

# 3GPP TR 38.901 Table 7.7.2-3 (TDL-C): normalized delay, power in dB.
TDL_C_DELAYS = np.array([
    0.0000, 0.2099, 0.2219, 0.2329, 0.2176, 0.6366, 0.6448, 0.6560,
    0.6584, 0.7935, 0.8213, 0.9336, 1.2285, 1.3083, 2.1704, 2.7105,
    4.2589, 4.6003, 5.4902, 5.6077, 6.3065, 6.6374, 7.0427, 8.6523,
])
TDL_C_POWERS_DB = np.array([
    -4.4, -1.2, -3.5, -5.2, -2.5, 0.0, -2.2, -3.9,
    -7.4, -7.1, -10.7, -11.1, -5.1, -6.8, -8.7, -13.2,
    -13.9, -13.9, -15.8, -17.1, -16.0, -15.7, -21.6, -22.8,
])


def kmh(speed_kmh: float) -> float:
    return speed_kmh / 3.6


@dataclass(frozen=True)
class PathSet:
    """P physical paths: gains ``h``, integer sample delays, Doppler in Hz."""

    h: np.ndarray
    delay: np.ndarray
    nu: np.ndarray
    seed: object = None

    def __post_init__(self):
        h = np.atleast_1d(np.asarray(self.h, dtype=np.complex128))
        delay = np.atleast_1d(np.asarray(self.delay))
        nu = np.atleast_1d(np.asarray(self.nu, dtype=np.float64))
        if not (h.shape == delay.shape == nu.shape) or h.ndim != 1:
            raise ValueError("h, delay and nu must be 1-D arrays of equal length")
        if delay.size and (np.any(delay < 0) or np.any(delay != np.round(delay))):
            raise ValueError("path delays must be non-negative integers (samples)")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "delay", delay.astype(np.int64))
        object.__setattr__(self, "nu", nu)

    @classmethod
    def single(cls, h=1.0, delay=0, nu=0.0) -> "PathSet":
        return cls(np.array([h]), np.array([delay]), np.array([nu]))

    @classmethod
    def empty(cls) -> "PathSet":
        return cls(np.zeros(0, complex), np.zeros(0, int), np.zeros(0))

    def __len__(self) -> int:
        return self.h.size

    def tau(self, cfg: FrameConfig) -> np.ndarray:
        return self.delay * cfg.t_s

    @property
    def power(self) -> float:
        return float(np.sum(np.abs(self.h) ** 2))

    @property
    def max_delay(self) -> int:
        return int(self.delay.max()) if len(self) else 0

    @property
    def max_abs_nu(self) -> float:
        return float(np.abs(self.nu).max()) if len(self) else 0.0

    def to_text(self) -> str:
        lines = ["# re(h) im(h) tau_samples nu_hz"]
        for h, d, nu in zip(self.h, self.delay, self.nu):
            lines.append(f"{float(h.real)!r} {float(h.imag)!r} {int(d)} {float(nu)!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "PathSet":
        rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        if not rows:
            return cls.empty()
        arr = np.array(rows, dtype=np.float64)
        return cls(arr[:, 0] + 1j * arr[:, 1], arr[:, 2].astype(np.int64), arr[:, 3])


def build_tdlc_paths(rms_ds: float, max_speed: float, cfg: FrameConfig, seed=None,
                     symmetric_doppler: bool = False, strict: bool = False) -> PathSet:
    """Draw one TDL-C channel realization.

    Parameters
    ----------
    rms_ds : float
        RMS delay spread in seconds; scales the normalized TDL-C delays.
    max_speed : float
        Maximum speed in m/s. Each path gets ``v ~ U[0, max_speed]`` (or
        ``U[-max_speed, max_speed]`` with ``symmetric_doppler``) and
        ``nu = f_c * v / c``.
    seed
        Anything accepted by ``numpy.random.SeedSequence``. Gains and speeds
        come from separate child streams, so the same seed at a different
        ``max_speed`` gives the same gains and the same speed quantiles.
    strict : bool
        Reject profiles whose rounded delays reach the cyclic prefix instead
        of clipping them to ``n_cp - 1``.
    """
    if rms_ds <= 0:
        raise ValueError("rms_ds must be positive")
    if max_speed < 0:
        raise ValueError("max_speed must be non-negative")
    delay = np.rint(TDL_C_DELAYS * rms_ds / cfg.t_s).astype(np.int64)
    if np.any(delay >= cfg.n_cp):
        if strict or cfg.n_cp == 0:
            raise ValueError(
                f"TDL-C delays up to {delay.max()} samples do not fit in n_cp={cfg.n_cp}")
        delay = np.minimum(delay, cfg.n_cp - 1)

    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    # children keyed explicitly so a reused SeedSequence object gives the same draw
    gain_ss, speed_ss = (np.random.SeedSequence(ss.entropy, spawn_key=ss.spawn_key + (i,))
                         for i in range(2))
    gain_rng = np.random.default_rng(gain_ss)
    speed_rng = np.random.default_rng(speed_ss)

    amp = 10 ** (TDL_C_POWERS_DB / 20)
    g = (gain_rng.standard_normal(amp.size) + 1j * gain_rng.standard_normal(amp.size)) / np.sqrt(2)
    h = amp * g
    h /= np.sqrt(np.sum(np.abs(h) ** 2))

    u = speed_rng.random(amp.size)
    if symmetric_doppler:
        u = 2 * u - 1
    nu = cfg.f_c * u * max_speed / SPEED_OF_LIGHT
    return PathSet(h, delay, nu, seed=seed)


def _check_delays(ps: PathSet, n_cp: int) -> None:
    if len(ps) and ps.max_delay >= max(n_cp, 1) and ps.max_delay > 0:
        raise ValueError(
            f"path delay {ps.max_delay} samples is not covered by a CP of {n_cp} samples")


def _body_of(frame) -> np.ndarray:
    if isinstance(frame, TxFrame):
        return frame.body
    return np.asarray(frame, dtype=np.complex128)


def apply_channel(frame, ps: PathSet, cfg: FrameConfig) -> np.ndarray:
    """Received body (CP removed) through ``ps``, written in modulo-MN form.

    ``y[l] = sum_i h_i s[(l - d_i) mod MN] exp(2j*pi*(l - d_i)*nu_i*T_s)``.
    """
    if isinstance(frame, TxFrame) and frame.kind is Waveform.OFDM_SHORT:
        raise ValueError("use apply_channel_short for short-symbol OFDM")
    s = _body_of(frame)
    _check_delays(ps, cfg.n_cp)
    L = s.size
    t = np.arange(L)
    y = np.zeros(L, dtype=np.complex128)
    for h, d, nu in zip(ps.h, ps.delay, ps.nu):
        y += h * np.roll(s, d) * np.exp(2j * np.pi * (t - d) * nu * cfg.t_s)
    return y


def _linear_channel(samples: np.ndarray, ps: PathSet, t_s: float, origin: int) -> np.ndarray:
    """Time-varying linear convolution of a whole CP-extended stream."""
    L = samples.size
    t = np.arange(L) - origin
    y = np.zeros(L, dtype=np.complex128)
    for h, d, nu in zip(ps.h, ps.delay, ps.nu):
        shifted = np.zeros(L, dtype=np.complex128)
        shifted[d:] = samples[:L - d]
        y += h * shifted * np.exp(2j * np.pi * (t - d) * nu * t_s)
    return y


def apply_channel_linear(frame: TxFrame, ps: PathSet, cfg: FrameConfig) -> np.ndarray:
    """Same channel as :func:`apply_channel`, via linear convolution over the CP."""
    _check_delays(ps, frame.n_cp)
    y = _linear_channel(np.asarray(frame.samples), ps, cfg.t_s, origin=frame.n_cp)
    return y[frame.n_cp:]


def apply_channel_short(frame: TxFrame, ps: PathSet, cfg: FrameConfig) -> np.ndarray:
    """Pass a short-symbol OFDM frame through ``ps``.

    Returns the ``(M, N)`` grid of CP-stripped sub-symbol bodies. Doppler
    phase runs on absolute time across the frame, with time zero at the
    first body sample of sub-symbol 0.
    """
    if frame.kind is not Waveform.OFDM_SHORT:
        raise ValueError("apply_channel_short expects a short-symbol OFDM frame")
    ncp = frame.n_cp
    _check_delays(ps, ncp)
    y = _linear_channel(np.asarray(frame.samples), ps, cfg.t_s, origin=ncp)
    per_symbol = y.reshape(cfg.N, cfg.M + ncp)[:, ncp:]
    return per_symbol.T.copy()


@dataclass(frozen=True)
class NoiseSpec:
    sigma2: float
    seed: object = field(default=None)

    def __post_init__(self):
        if self.sigma2 < 0:
            raise ValueError("sigma2 must be non-negative")


def snr_to_sigma2(snr_db: float, signal_power: float = 1.0) -> float:
    return signal_power * 10 ** (-snr_db / 10)


def awgn(shape, sigma2: float, rng) -> np.ndarray:
    """Circular complex Gaussian samples with variance ``sigma2``."""
    scale = np.sqrt(sigma2 / 2)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def add_awgn(y, spec: NoiseSpec) -> np.ndarray:
    y = np.asarray(y, dtype=np.complex128)
    if spec.sigma2 == 0:
        return y.copy()
    rng = np.random.default_rng(spec.seed)
    return y + awgn(y.shape, spec.sigma2, rng)
