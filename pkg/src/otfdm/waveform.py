"""Transmit chains: large/short CP-OFDM, DZT-OTFS and OTFDM."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .grid import FrameConfig, as_grid, comb_interleave, unitary_dft, vectorize


class Waveform(str, enum.Enum):
    OFDM_LARGE = "ofdm"
    OFDM_SHORT = "ofdm_short"
    OTFS_DZT = "otfs"
    OTFDM = "otfdm"


@dataclass(frozen=True)
class TxFrame:
    """Time-domain samples of one frame, cyclic prefix(es) included."""

    samples: np.ndarray
    kind: Waveform
    n_cp: int
    dft_spread: bool = False

    @property
    def body(self) -> np.ndarray:
        """CP-stripped body of a single-CP frame."""
        if self.kind is Waveform.OFDM_SHORT:
            raise ValueError("short-symbol OFDM frames carry one CP per sub-symbol")
        return self.samples[self.n_cp:]


def add_cp(body, n_cp: int) -> np.ndarray:
    body = np.asarray(body)
    if not 0 <= n_cp <= body.shape[-1]:
        raise ValueError(f"n_cp={n_cp} exceeds body length {body.shape[-1]}")
    if n_cp == 0:
        return body.copy()
    return np.concatenate([body[..., -n_cp:], body], axis=-1)


def remove_cp(frame, n_cp: int) -> np.ndarray:
    frame = np.asarray(frame)
    if not 0 <= n_cp <= frame.shape[-1]:
        raise ValueError(f"n_cp={n_cp} exceeds frame length {frame.shape[-1]}")
    return frame[..., n_cp:].copy()


def ofdm_modulate_large(X, cfg: FrameConfig) -> TxFrame:
    """One MN-point CP-OFDM symbol carrying ``vec(X)``."""
    X = as_grid(X, (cfg.M, cfg.N), "X")
    body = unitary_dft(vectorize(X), inverse=True)
    return TxFrame(add_cp(body, cfg.n_cp), Waveform.OFDM_LARGE, cfg.n_cp)


def ofdm_modulate_tones(tones, cfg: FrameConfig) -> TxFrame:
    """Large CP-OFDM from an MN-length tone vector (tone ``f`` at ``f * delta_f``)."""
    tones = np.asarray(tones, dtype=np.complex128)
    if tones.shape != (cfg.size,):
        raise ValueError(f"expected {cfg.size} tones, got shape {tones.shape}")
    body = unitary_dft(tones, inverse=True)
    return TxFrame(add_cp(body, cfg.n_cp), Waveform.OFDM_LARGE, cfg.n_cp)


def ofdm_modulate_short(X, cfg: FrameConfig, n_cp_short: int | None = None) -> TxFrame:
    """N consecutive M-point CP-OFDM symbols, column ``n`` in symbol ``n``."""
    X = as_grid(X, (cfg.M, cfg.N), "X")
    n_cp_short = cfg.n_cp if n_cp_short is None else n_cp_short
    if not 0 <= n_cp_short <= cfg.M:
        raise ValueError(f"n_cp_short must lie in [0, M], got {n_cp_short}")
    bodies = unitary_dft(X, inverse=True, axis=0).T  # (N, M)
    samples = add_cp(bodies, n_cp_short).reshape(-1)
    return TxFrame(samples, Waveform.OFDM_SHORT, n_cp_short)


def otfs_modulate_dzt(X, cfg: FrameConfig) -> TxFrame:
    """Zak-transform OTFS: N-point inverse DFT along each row, one CP."""
    X = as_grid(X, (cfg.M, cfg.N), "X")
    S_c = unitary_dft(X, inverse=True, axis=1)
    return TxFrame(add_cp(vectorize(S_c), cfg.n_cp), Waveform.OTFS_DZT, cfg.n_cp)


def dft_spread_columns(D) -> np.ndarray:
    """M-point unitary forward DFT of every column (DFT-s- precoding)."""
    D = as_grid(D, name="D")
    return unitary_dft(D, axis=0)


def dft_despread_columns(X) -> np.ndarray:
    return unitary_dft(np.asarray(X, dtype=np.complex128), inverse=True, axis=0)


def doppler_phase(cfg: FrameConfig) -> np.ndarray:
    """``exp(2j*pi*n*l/(MN))`` as an ``(M, N)`` array indexed ``[l, n]``."""
    l = np.arange(cfg.M)[:, None]
    n = np.arange(cfg.N)[None, :]
    return np.exp(2j * np.pi * n * l / cfg.size)


def otfdm_stages(X, cfg: FrameConfig, doppler_dot: bool = True):
    """Return the intermediate grids ``(S1, S2, S3)`` of the OTFDM modulator.

    ``S1`` is the per-sub-symbol M-point IDFT, ``S2`` applies the Doppler
    dot product and ``S3`` is the N-point Doppler spreading along rows.
    """
    X = as_grid(X, (cfg.M, cfg.N), "X")
    S1 = unitary_dft(X, inverse=True, axis=0)
    S2 = S1 * doppler_phase(cfg) if doppler_dot else S1
    S3 = unitary_dft(S2, inverse=True, axis=1)
    return S1, S2, S3


def otfdm_modulate(X, cfg: FrameConfig, dft_spread: bool = False,
                   doppler_dot: bool = True) -> TxFrame:
    """OTFDM transmitter.

    With ``dft_spread`` the grid is first DFT-precoded per column
    (DFT-s-OTFDM). ``doppler_dot=False`` drops the Doppler dot product and
    exists only to compare against Zak-OTFS. The body is ``vec(S3)``, so
    sample ``k*M + l`` holds ``S3[l, k]``.
    """
    if dft_spread:
        X = dft_spread_columns(X)
    _, _, S3 = otfdm_stages(X, cfg, doppler_dot=doppler_dot)
    return TxFrame(add_cp(vectorize(S3), cfg.n_cp), Waveform.OTFDM, cfg.n_cp, dft_spread)


def modulate(kind: Waveform, X, cfg: FrameConfig, **kwargs) -> TxFrame:
    kind = Waveform(kind)
    if kind is Waveform.OFDM_LARGE:
        return ofdm_modulate_large(X, cfg)
    if kind is Waveform.OFDM_SHORT:
        return ofdm_modulate_short(X, cfg, **kwargs)
    if kind is Waveform.OTFS_DZT:
        return otfs_modulate_dzt(X, cfg)
    return otfdm_modulate(X, cfg, **kwargs)


def check_ofdm_equivalence(X, cfg: FrameConfig) -> float:
    """Max abs difference between the OTFDM body and comb-interleaved large OFDM."""
    X = as_grid(X, (cfg.M, cfg.N), "X")
    otfdm_body = otfdm_modulate(X, cfg).body
    ofdm_body = unitary_dft(comb_interleave(X), inverse=True)
    return float(np.max(np.abs(otfdm_body - ofdm_body)))


def write_iq(path, samples) -> None:
    """Dump samples as little-endian float64 interleaved (re, im)."""
    samples = np.asarray(samples, dtype=np.complex128)
    interleaved = np.empty(2 * samples.size, dtype="<f8")
    interleaved[0::2] = samples.real
    interleaved[1::2] = samples.imag
    interleaved.tofile(path)


def read_iq(path) -> np.ndarray:
    raw = np.fromfile(path, dtype="<f8")
    if raw.size % 2:
        raise ValueError(f"{path}: odd number of float64 values")
    return raw[0::2] + 1j * raw[1::2]
