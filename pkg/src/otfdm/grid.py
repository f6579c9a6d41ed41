"""Frame dimensioning, index conventions and unitary transforms.

Grids are plain ``numpy`` complex arrays indexed ``A[row, col]`` from zero.
Every transform here carries the ``1/sqrt(size)`` normalization on both
directions, so forward and inverse are exact adjoints of each other.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class FrameConfig:
    """Dimensioning of one OTFDM / OFDM frame.

    Parameters
    ----------
    M : int
        Subcarriers per sub-symbol.
    N : int
        Number of sub-symbols (Doppler replicas). ``N == 1`` is plain OFDM.
    n_cp : int
        Cyclic prefix length in samples.
    delta_f : float
        Large-symbol subcarrier spacing in Hz.
    f_c : float
        Carrier frequency in Hz.
    """

    M: int
    N: int
    n_cp: int
    delta_f: float = 15e3
    f_c: float = 24e9

    def __post_init__(self):
        if self.M < 1 or self.N < 1:
            raise ValueError(f"M and N must be positive, got M={self.M}, N={self.N}")
        if not 0 <= self.n_cp < self.M * self.N:
            raise ValueError(f"n_cp must lie in [0, M*N), got {self.n_cp}")
        if self.delta_f <= 0:
            raise ValueError("delta_f must be positive")

    @classmethod
    def table1(cls) -> "FrameConfig":
        """The 24 GHz, 15 kHz, M=512, N=8 setup used for the BLER study."""
        return cls(M=512, N=8, n_cp=288, delta_f=15e3, f_c=24e9)

    @property
    def size(self) -> int:
        return self.M * self.N

    @property
    def delta_f_prime(self) -> float:
        """Sub-symbol subcarrier spacing, ``N * delta_f``."""
        return self.N * self.delta_f

    @property
    def t_s(self) -> float:
        """Sample period ``1 / (M N delta_f)``."""
        return 1.0 / (self.size * self.delta_f)

    @property
    def bandwidth(self) -> float:
        return self.size * self.delta_f

    def doppler_hz(self, speed_mps: float) -> float:
        return self.f_c * speed_mps / SPEED_OF_LIGHT


def as_grid(A, shape: tuple[int, int] | None = None, name: str = "grid") -> np.ndarray:
    """Validate and return ``A`` as a finite complex 2-D array."""
    A = np.asarray(A, dtype=np.complex128)
    if A.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {A.shape}")
    if shape is not None and A.shape != tuple(shape):
        raise ValueError(f"{name} must have shape {tuple(shape)}, got {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} contains non-finite entries")
    return A


def vectorize(A) -> np.ndarray:
    """Column-major stacking: ``vec(A)[i + j*rows] == A[i, j]``."""
    A = np.asarray(A)
    return A.reshape(-1, order="F")


def devectorize(v, rows: int, cols: int) -> np.ndarray:
    v = np.asarray(v)
    if v.size != rows * cols:
        raise ValueError(f"cannot reshape length {v.size} into {rows}x{cols}")
    return v.reshape(rows, cols, order="F")


def unitary_dft(v, inverse: bool = False, axis: int = -1) -> np.ndarray:
    """Unitary DFT along ``axis``.

    The forward kernel is ``exp(-2j*pi*n*k/L)/sqrt(L)``, the inverse uses
    ``exp(+2j*pi*n*k/L)/sqrt(L)``.
    """
    v = np.asarray(v, dtype=np.complex128)
    if v.ndim == 0 or v.shape[axis] == 0:
        raise ValueError("transform length must be at least 1")
    if inverse:
        return np.fft.ifft(v, axis=axis, norm="ortho")
    return np.fft.fft(v, axis=axis, norm="ortho")


def dft_matrix(L: int, inverse: bool = False) -> np.ndarray:
    """Dense unitary DFT matrix, used as a direct-summation reference."""
    if L < 1:
        raise ValueError("transform length must be at least 1")
    n = np.arange(L)
    sign = 1.0 if inverse else -1.0
    return np.exp(sign * 2j * np.pi * np.outer(n, n) / L) / np.sqrt(L)


def comb_interleave(X) -> np.ndarray:
    """Map an ``M x N`` grid onto MN tones with ``out[m*N + n] = X[m, n]``.

    Sub-symbol ``n`` lands on every N-th tone starting at offset ``n``.
    This is ``vec(X.T)``.
    """
    X = np.asarray(X)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D grid, got shape {X.shape}")
    return X.reshape(-1)


def comb_deinterleave(v, M: int, N: int) -> np.ndarray:
    v = np.asarray(v)
    if v.size != M * N:
        raise ValueError(f"cannot deinterleave length {v.size} into {M}x{N}")
    return v.reshape(M, N)
