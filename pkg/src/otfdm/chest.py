"""Pilot layout, pilot insertion and pilot-based estimation of the 2-D
dot-product channel, plus the pilot-overhead calculator.

OTFDM pilots sit on every ``lam``-th sub-carrier. At each of them, ``w``
consecutive sub-symbol slots are reserved: one carries a boosted pilot and
the rest are zero guards that absorb the Doppler spread. Because sub-symbol
``n`` of sub-carrier ``m`` is the large tone ``m*N + n``, the reserved slots
form a small Doppler-domain window around each pilot tone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import FrameConfig, unitary_dft
from .rx import DotProductChannel, ExpandedRxTensor, Stage, large_tones_from_tensor

_QPSK = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / np.sqrt(2)


def pilot_sequence(count: int, seed) -> np.ndarray:
    """Unit-modulus QPSK pilot values drawn from ``seed``."""
    rng = np.random.default_rng(seed)
    return _QPSK[rng.integers(0, 4, count)]


@dataclass(frozen=True)
class PilotLayout:
    """OTFDM pilot pattern over an ``M x N`` grid.

    Parameters
    ----------
    lam : int
        Pilot repetition period in sub-carriers (density ``1/lam``).
    w : int
        Width of the reserved Doppler window in sub-symbol slots.
    boost_db : float
        Extra pilot power boost on top of the ``w``-fold power concentration.
    """

    M: int
    N: int
    lam: int
    w: int
    boost_db: float = 0.0
    pilot_seed: int = 0
    pilot_slot: int = 0
    values: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.lam < 1 or self.M % self.lam:
            raise ValueError(f"lam={self.lam} must divide M={self.M}")
        if not 1 <= self.w <= self.N:
            raise ValueError(f"w={self.w} must lie in [1, N={self.N}]")
        if not 0 <= self.pilot_slot < self.w:
            raise ValueError(f"pilot_slot={self.pilot_slot} must lie in [0, w)")
        if self.values is None:
            amp = np.sqrt(self.w * 10 ** (self.boost_db / 10))
            object.__setattr__(self, "values", amp * pilot_sequence(self.n_pilots, self.pilot_seed))

    @property
    def boost(self) -> float:
        return 10 ** (self.boost_db / 10)

    @property
    def n_pilots(self) -> int:
        return self.M // self.lam

    @property
    def pilot_subcarriers(self) -> np.ndarray:
        return np.arange(0, self.M, self.lam)

    @property
    def reserved(self) -> np.ndarray:
        """Boolean ``(M, N)`` mask of pilot and guard resource elements."""
        mask = np.zeros((self.M, self.N), dtype=bool)
        mask[self.pilot_subcarriers, : self.w] = True
        return mask

    @property
    def data_mask(self) -> np.ndarray:
        return ~self.reserved

    @property
    def capacity(self) -> int:
        return self.M * self.N - self.n_pilots * self.w

    @property
    def pilot_energy(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2))


def build_pilot_layout(lam: int, w: int, boost_db: float, cfg: FrameConfig, seed=0,
                       pilot_slot: int = 0) -> PilotLayout:
    return PilotLayout(cfg.M, cfg.N, lam, w, boost_db, seed, pilot_slot)


def insert_pilots(X, layout: PilotLayout) -> np.ndarray:
    """Write pilots and zero guards into the reserved elements of ``X``."""
    X = np.array(X, dtype=np.complex128)
    if X.shape != (layout.M, layout.N):
        raise ValueError(f"grid shape {X.shape} does not match layout {(layout.M, layout.N)}")
    X[layout.reserved] = 0
    X[layout.pilot_subcarriers, layout.pilot_slot] = layout.values
    return X


def fft_interpolate(samples, factor: int) -> np.ndarray:
    """Oversample a frequency response by zero-padding its delay profile.

    ``samples`` are responses ``sum_d g[d] exp(-2j*pi*j*d/L)`` on ``L``
    equispaced points; the output has ``L*factor`` points on the finer grid,
    with input sample ``j`` reproduced at output index ``j*factor``. Exact
    whenever the delay support lies in ``[0, L)``.
    """
    samples = np.asarray(samples, dtype=np.complex128)
    if int(factor) != factor or factor < 1:
        raise ValueError("factor must be a positive integer")
    factor = int(factor)
    L = samples.shape[0]
    profile = unitary_dft(samples, inverse=True, axis=0)
    padded = np.zeros((L * factor,) + samples.shape[1:], dtype=np.complex128)
    padded[:L] = profile
    return np.sqrt(factor) * unitary_dft(padded, axis=0)


def pilot_observations(Ypp: ExpandedRxTensor, layout: PilotLayout) -> np.ndarray:
    """Raw per-replica channel at each pilot tone, ``(M/lam, N)`` over ``[j, k]``.

    The reserved window of each pilot sub-carrier is pulled out of the
    large-tone spectrum and brought to the replica (time) domain with an
    N-point IFFT, then divided by the known pilot.
    """
    if Ypp.stage is not Stage.Y_DPRIME:
        raise ValueError("expected a sub-carrier domain tensor")
    M, N, _ = Ypp.shape
    if (M, N) != (layout.M, layout.N):
        raise ValueError(f"tensor {Ypp.shape} does not match layout {(layout.M, layout.N)}")
    Z = large_tones_from_tensor(Ypp)
    window = np.zeros((layout.n_pilots, N), dtype=np.complex128)
    window[:, : layout.w] = Z[layout.pilot_subcarriers, : layout.w]
    k = np.arange(N)
    per_replica = np.sqrt(N) * unitary_dft(window, inverse=True, axis=1)
    per_replica *= np.exp(-2j * np.pi * layout.pilot_slot * k / N)[None, :]
    return per_replica / layout.values[:, None]


def estimate_channel(Ypp: ExpandedRxTensor, layout: PilotLayout, cfg: FrameConfig) -> DotProductChannel:
    """Pilot-based estimate of ``eta[m, n, k]``.

    Per replica ``k`` the pilot estimates are interpolated across sub-carriers
    (factor ``lam``) and then across the sub-symbol offsets inside each
    sub-carrier (factor ``N``), both by FFT oversampling.
    """
    if (cfg.M, cfg.N) != (layout.M, layout.N):
        raise ValueError("layout does not match frame configuration")
    obs = pilot_observations(Ypp, layout)  # [j, k] at tone j*lam*N + slot
    per_subcarrier = fft_interpolate(obs, layout.lam)  # [m, k] at tone m*N + slot
    per_tone = fft_interpolate(per_subcarrier, cfg.N)  # [f - slot, k]
    per_tone = np.roll(per_tone, layout.pilot_slot, axis=0)
    return DotProductChannel(per_tone.reshape(cfg.M, cfg.N, cfg.N))


@dataclass(frozen=True)
class OfdmCombLayout:
    """Comb pilots for the large-OFDM baseline: one pilot every ``spacing`` tones."""

    size: int
    spacing: int
    boost_db: float = 0.0
    pilot_seed: int = 0
    values: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.spacing < 1 or self.size % self.spacing:
            raise ValueError(f"spacing={self.spacing} must divide {self.size}")
        if self.values is None:
            amp = np.sqrt(10 ** (self.boost_db / 10))
            object.__setattr__(self, "values", amp * pilot_sequence(self.size // self.spacing, self.pilot_seed))

    @classmethod
    def matching(cls, layout: PilotLayout) -> "OfdmCombLayout":
        """Same overhead and total pilot power as an OTFDM layout."""
        spacing, rem = divmod(layout.lam * layout.N, layout.w)
        if rem:
            raise ValueError("lam*N must be a multiple of w for a matching OFDM comb")
        return cls(layout.M * layout.N, spacing, layout.boost_db, layout.pilot_seed)

    @property
    def pilot_tones(self) -> np.ndarray:
        return np.arange(0, self.size, self.spacing)

    @property
    def data_mask(self) -> np.ndarray:
        mask = np.ones(self.size, dtype=bool)
        mask[self.pilot_tones] = False
        return mask

    @property
    def capacity(self) -> int:
        return self.size - self.pilot_tones.size

    @property
    def pilot_energy(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2))

    def insert(self, tones) -> np.ndarray:
        tones = np.array(tones, dtype=np.complex128)
        tones[self.pilot_tones] = self.values
        return tones

    def estimate(self, Z) -> np.ndarray:
        """LS at the pilot tones, FFT-interpolated to every tone."""
        ls = np.asarray(Z)[self.pilot_tones] / self.values
        return fft_interpolate(ls, self.spacing)


@dataclass(frozen=True)
class OverheadReport:
    delay_budget_samples: float
    doppler_budget_slots: int
    required_delay: float
    required_doppler: float
    rho: int
    mu: float
    feasible: bool


def overhead_report(layout: PilotLayout, max_tau: float, max_abs_nu: float,
                    cfg: FrameConfig) -> OverheadReport:
    """Check a pilot layout against the channel's delay and Doppler extent.

    The delay budget of the comb is ``M/lam`` samples and must cover
    ``max_tau/T_s``; the Doppler window ``w`` must cover
    ``2*max|nu|/delta_f``. ``rho`` (smallest delay-pulse guard) and ``mu``
    (largest time-sampling period, ``M/mu >= 2*max|nu|/delta_f``) describe
    the pulse/periodic alternatives and are informational.
    """
    if max_tau < 0 or max_abs_nu < 0:
        raise ValueError("channel bounds must be non-negative")
    delay_budget = layout.M / layout.lam
    required_delay = max_tau / cfg.t_s
    required_doppler = 2 * max_abs_nu / cfg.delta_f
    rho = int(np.ceil(required_delay - 1e-9))
    mu = layout.M / required_doppler if required_doppler > 0 else float(layout.M)
    feasible = delay_budget >= required_delay and layout.w >= required_doppler
    return OverheadReport(delay_budget, layout.w, required_delay, required_doppler,
                          rho, mu, bool(feasible))
