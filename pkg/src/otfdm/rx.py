"""OTFDM receiver: Doppler dot division, sub-carrier FFT, dot-product channel,
time-domain equalization and LMMSE despreading, plus the OFDM one-tap baseline.

Tensors produced after the dot division are indexed ``[l or m, n, k]``:
``l``/``m`` is the delay sample or sub-carrier inside a sub-symbol, ``n`` the
sub-symbol whose Doppler dot product was undone, ``k`` the Doppler replica.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .channel import PathSet
from .grid import FrameConfig, as_grid, devectorize, unitary_dft
from .waveform import doppler_phase

ERASURE_THRESHOLD = 1e-12


class Stage(enum.Enum):
    Y_PRIME = "delay"
    Y_DPRIME = "subcarrier"


@dataclass(frozen=True)
class ExpandedRxTensor:
    data: np.ndarray
    stage: Stage

    @property
    def shape(self):
        return self.data.shape


@dataclass(frozen=True)
class DotProductChannel:
    """Per-replica fading coefficients ``eta[m, n, k]``.

    ``eta[m, n, k]`` is the channel seen in Doppler replica ``k`` by the
    tone of sub-carrier ``m`` in sub-symbol ``n`` (large tone ``m*N + n``).
    """

    eta: np.ndarray

    @property
    def N(self) -> int:
        return self.eta.shape[1]

    def coefficients(self) -> np.ndarray:
        """Spreading coefficients ``c[m, n, k] = eta[m, n, k] exp(2j*pi*k*n/N) / sqrt(N)``.

        For a fixed ``n`` the ``(M, N)`` slice ``c[:, n, :]`` is the 2-D
        dot-product channel ``H_n[m, k]`` of that sub-symbol.
        """
        N = self.N
        n = np.arange(N)[:, None]
        k = np.arange(N)[None, :]
        return self.eta * np.exp(2j * np.pi * k * n / N)[None] / np.sqrt(N)

    @property
    def h_2d(self) -> np.ndarray:
        return self.coefficients()

    def merged(self) -> np.ndarray:
        """``|eta|`` over (large tone ``m*N + n``, replica ``k``) as an ``(MN, N)`` matrix."""
        M, N, _ = self.eta.shape
        return np.abs(self.eta).reshape(M * N, N)


@dataclass(frozen=True)
class EqualizedGrid:
    """Symbol estimates with the per-symbol noise variance used for LLRs.

    ``x_hat ~= gain * X + noise`` with ``noise`` of variance ``noise_var``
    relative to the unbiased estimate ``x_hat / gain``.
    """

    x_hat: np.ndarray
    noise_var: np.ndarray
    gain: np.ndarray | float = 1.0

    def unbiased(self) -> np.ndarray:
        gain = np.asarray(self.gain)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(np.abs(gain) > 0, self.x_hat / np.where(gain == 0, 1, gain), 0)
        return out


def rx_grid(y, cfg: FrameConfig) -> np.ndarray:
    """CP-stripped body as ``Y[l, k] = y[k*M + l]``."""
    y = np.asarray(y, dtype=np.complex128)
    if y.ndim == 2:
        return as_grid(y, (cfg.M, cfg.N), "Y")
    return devectorize(y, cfg.M, cfg.N)


def doppler_dot_divide(Y, cfg: FrameConfig) -> ExpandedRxTensor:
    """``Y'[l, n, k] = Y[l, k] / exp(2j*pi*n*l/(MN))``.

    The divider inverts the transmitter's Doppler dot product.
    """
    Y = rx_grid(Y, cfg)
    divider = np.conj(doppler_phase(cfg))  # [l, n]
    data = Y[:, None, :] * divider[:, :, None]
    return ExpandedRxTensor(data, Stage.Y_PRIME)


def subcarrier_transform(Yp: ExpandedRxTensor) -> ExpandedRxTensor:
    if Yp.stage is not Stage.Y_PRIME:
        raise ValueError(f"expected a delay-domain tensor, got stage {Yp.stage}")
    return ExpandedRxTensor(unitary_dft(Yp.data, axis=0), Stage.Y_DPRIME)


def otfdm_front_end(y, cfg: FrameConfig) -> ExpandedRxTensor:
    """Dot division followed by the M-point FFT."""
    return subcarrier_transform(doppler_dot_divide(y, cfg))


def large_tones_from_tensor(Ypp: ExpandedRxTensor) -> np.ndarray:
    """Doppler-despread ``Y''`` back to the MN-point spectrum, as an ``(M, N)`` grid.

    ``Z[m, n]`` equals the unitary MN-point DFT of the received body at
    tone ``m*N + n``.
    """
    if Ypp.stage is not Stage.Y_DPRIME:
        raise ValueError("expected a sub-carrier domain tensor")
    M, N, _ = Ypp.shape
    k = np.arange(N)
    n = np.arange(N)
    kernel = np.exp(-2j * np.pi * np.outer(n, k) / N) / np.sqrt(N)  # [n, k]
    return np.einsum("mnk,nk->mn", Ypp.data, kernel)


def analytic_dot_channel(ps: PathSet, cfg: FrameConfig) -> DotProductChannel:
    """Genie ``eta[m, n, k]`` from the physical paths.

    ``eta = sum_i h_i exp(-2j*pi*((mN+n)*delta_f + nu_i)*tau_i) exp(2j*pi*nu_i*k*M*T_s)``
    """
    M, N = cfg.M, cfg.N
    if len(ps) == 0:
        return DotProductChannel(np.zeros((M, N, N), dtype=np.complex128))
    tau = ps.tau(cfg)
    f = (np.arange(M)[:, None] * N + np.arange(N)[None, :]) * cfg.delta_f  # (M, N)
    k = np.arange(N)
    delay_term = np.exp(-2j * np.pi * (f[..., None] + ps.nu) * tau)  # (M, N, P)
    doppler_term = np.exp(2j * np.pi * np.outer(k, ps.nu) * M * cfg.t_s)  # (N_k, P)
    eta = np.einsum("mnp,kp,p->mnk", delay_term, doppler_term, ps.h)
    return DotProductChannel(eta)


@dataclass(frozen=True)
class GammaTerms:
    """Per-symbol received contributions.

    ``exact[m, n]`` and ``approx[m, n]`` are length-MN time-domain vectors;
    ``post_fft[m, n]`` is the length-N vector over Doppler replicas.
    """

    exact: np.ndarray
    approx: np.ndarray
    post_fft: np.ndarray

    @property
    def approx_error(self) -> float:
        """Relative energy of the small-Doppler approximation error."""
        num = np.sum(np.abs(self.exact - self.approx) ** 2)
        den = np.sum(np.abs(self.exact) ** 2)
        return float(num / den) if den > 0 else 0.0


def analytic_gamma(X, ps: PathSet, cfg: FrameConfig) -> GammaTerms:
    """Contribution of every ``X[m, n]`` to the received signal.

    Memory is ``O(M N * MN)``; meant for small frames and oracle checks.
    """
    M, N = cfg.M, cfg.N
    X = as_grid(X, (M, N), "X")
    MN = cfg.size
    Ts = cfg.t_s
    tau = ps.tau(cfg)
    lp = np.arange(MN)
    tone = (np.arange(M)[:, None] * N + np.arange(N)[None, :])  # (M, N)
    f = tone * cfg.delta_f
    exact = np.zeros((M, N, MN), dtype=np.complex128)
    approx = np.zeros_like(exact)
    for h, t, nu in zip(ps.h, tau, ps.nu):
        dt = lp * Ts - t  # (MN,)
        exact += h * np.exp(2j * np.pi * (f[..., None] + nu) * dt)
        phase = tone[..., None] * dt / (MN * Ts) + (lp // M) * nu * M * Ts - nu * t
        approx += h * np.exp(2j * np.pi * phase)
    scale = X[..., None] / np.sqrt(MN)
    post_fft = analytic_dot_channel(ps, cfg).coefficients() * X[..., None]
    return GammaTerms(exact * scale, approx * scale, post_fft)


def td_equalize_despread(Ypp: ExpandedRxTensor, ch: DotProductChannel, cfg: FrameConfig,
                         sigma2: float = 0.0) -> EqualizedGrid:
    """Divide every replica by its fading coefficient, then despread over ``k``.

    ``X_hat[m, n] = (1/sqrt(N)) sum_k exp(-2j*pi*k*n/N) Y''[m, n, k] / eta[m, n, k]``.
    Replicas with ``|eta| < 1e-12`` are erased and the remaining ones
    rescaled; a symbol with every replica erased gets infinite noise.
    """
    if Ypp.stage is not Stage.Y_DPRIME:
        raise ValueError("expected a sub-carrier domain tensor")
    N = cfg.N
    eta = ch.eta
    ok = np.abs(eta) >= ERASURE_THRESHOLD
    safe = np.where(ok, eta, 1.0)
    k = np.arange(N)
    n = np.arange(N)
    despread = np.exp(-2j * np.pi * np.outer(n, k) / N)[None]  # [1, n, k]
    terms = np.where(ok, despread * Ypp.data / safe, 0.0)
    used = ok.sum(axis=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(used > 0, np.sqrt(N) / used, 0.0)
        x_hat = scale * terms.sum(axis=2)
        inv_pow = np.where(ok, 1.0 / np.abs(safe) ** 2, 0.0).sum(axis=2)
        noise_var = np.where(used > 0, sigma2 * N * inv_pow / used ** 2, np.inf)
    return EqualizedGrid(x_hat, noise_var, np.where(used > 0, 1.0, 0.0))


def lmmse_despread(Ypp: ExpandedRxTensor, ch: DotProductChannel, sigma2: float,
                   cfg: FrameConfig) -> EqualizedGrid:
    """Per sub-carrier LMMSE over the N sub-symbols.

    ``H_m[k, n] = c[m, n, k]``; the combiner ``(H^H H + sigma2 I)^-1 H^H``
    is applied row ``n`` against the slice ``Y''[m, n, :]``. The returned
    ``x_hat`` is the plain (biased) LMMSE output; ``gain`` holds its bias.
    """
    if Ypp.stage is not Stage.Y_DPRIME:
        raise ValueError("expected a sub-carrier domain tensor")
    if sigma2 < 0:
        raise ValueError("sigma2 must be non-negative")
    N = cfg.N
    H = np.swapaxes(ch.coefficients(), 1, 2)  # [m, k, n]
    Hh = np.conj(np.swapaxes(H, 1, 2))  # [m, n, k]
    gram = Hh @ H + sigma2 * np.eye(N)[None]
    if sigma2 == 0:
        cond = np.linalg.cond(gram)
        if not np.all(np.isfinite(cond)) or np.any(cond > 1e14):
            raise ValueError("H_m^H H_m is ill-conditioned; use sigma2 > 0")
    try:
        W = np.linalg.solve(gram, Hh)  # [m, n, k]
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"LMMSE solve failed: {exc}") from exc
    x_hat = np.einsum("mnk,mnk->mn", W, Ypp.data)
    WH = W @ H  # [m, n, n']
    gain = np.real(np.diagonal(WH, axis1=1, axis2=2))
    leak = np.sum(np.abs(WH) ** 2, axis=2) - np.abs(np.diagonal(WH, axis1=1, axis2=2)) ** 2
    noise = sigma2 * np.sum(np.abs(W) ** 2, axis=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        noise_var = np.where(gain > 0, (noise + leak) / gain ** 2, np.inf)
    return EqualizedGrid(x_hat, noise_var, np.diagonal(WH, axis1=1, axis2=2).copy())


def ofdm_demodulate(y) -> np.ndarray:
    """Unitary DFT of a CP-stripped large OFDM body."""
    return unitary_dft(y)


def ofdm_genie_response(ps: PathSet, cfg: FrameConfig) -> np.ndarray:
    """Time-averaged response of each large-OFDM tone (the ICI matrix diagonal)."""
    MN = cfg.size
    out = np.zeros(MN, dtype=np.complex128)
    f = np.arange(MN)
    l = np.arange(MN)
    for h, d, nu in zip(ps.h, ps.delay, ps.nu):
        mean_rot = np.mean(np.exp(2j * np.pi * nu * cfg.t_s * l))
        out += h * np.exp(-2j * np.pi * f * d / MN) * np.exp(-2j * np.pi * nu * d * cfg.t_s) * mean_rot
    return out


def ofdm_short_genie_response(ps: PathSet, cfg: FrameConfig, n_cp_short: int | None = None) -> np.ndarray:
    """Per sub-symbol time-averaged response ``(M, N)`` for short-symbol OFDM."""
    M, N = cfg.M, cfg.N
    ncp = cfg.n_cp if n_cp_short is None else n_cp_short
    out = np.zeros((M, N), dtype=np.complex128)
    m = np.arange(M)[:, None]
    start = (np.arange(N) * (M + ncp))[None, :]
    l = np.arange(M)
    for h, d, nu in zip(ps.h, ps.delay, ps.nu):
        mean_rot = np.mean(np.exp(2j * np.pi * nu * cfg.t_s * l))
        out += (h * np.exp(-2j * np.pi * m * d / M) * mean_rot
                * np.exp(2j * np.pi * nu * cfg.t_s * (start - d)))
    return out


def ofdm_one_tap_equalize(Y, H, sigma2: float = 0.0, mmse: bool = False) -> EqualizedGrid:
    """Dot-division (or scalar MMSE) equalization of received tones.

    Tones with ``|H| < 1e-12`` are erased: zero estimate, infinite noise.
    """
    Y = np.asarray(Y, dtype=np.complex128)
    H = np.asarray(H, dtype=np.complex128)
    if Y.shape != H.shape:
        raise ValueError(f"shape mismatch: Y {Y.shape} vs H {H.shape}")
    ok = np.abs(H) >= ERASURE_THRESHOLD
    safe = np.where(ok, H, 1.0)
    p = np.abs(safe) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        if mmse:
            x_hat = np.where(ok, np.conj(safe) * Y / (p + sigma2), 0.0)
            gain = np.where(ok, p / (p + sigma2), 0.0)
        else:
            x_hat = np.where(ok, Y / safe, 0.0)
            gain = np.where(ok, 1.0, 0.0)
        noise_var = np.where(ok, sigma2 / p, np.inf)
    return EqualizedGrid(x_hat, noise_var, gain)
