"""QPSK mapping with exact LLRs and a seeded rate-1/2 regular-(3,6) LDPC code.

The parity-check matrix is grown with progressive edge growth (PEG); encoding
uses a GF(2) reduced row-echelon form of H, and decoding is flooding
normalized min-sum.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

log = logging.getLogger(__name__)

LLR_CLIP = 30.0


def qpsk_map(bits) -> np.ndarray:
    """Gray QPSK: ``(b0, b1) -> ((1 - 2 b0) + 1j (1 - 2 b1)) / sqrt(2)``."""
    bits = np.asarray(bits, dtype=np.int8).reshape(-1)
    if bits.size % 2:
        raise ValueError("QPSK needs an even number of bits")
    b = 1 - 2 * bits.reshape(-1, 2).astype(np.float64)
    return (b[:, 0] + 1j * b[:, 1]) / np.sqrt(2)


def qpsk_llr(symbols, noise_var) -> np.ndarray:
    """Per-bit LLRs ``log P(b=0)/P(b=1)``, interleaved ``[b0, b1, b0, b1, ...]``.

    ``noise_var`` is the complex noise variance of each (unbiased) symbol
    estimate; an infinite variance yields zero LLRs.
    """
    y = np.asarray(symbols, dtype=np.complex128).reshape(-1)
    nv = np.broadcast_to(np.asarray(noise_var, dtype=np.float64), y.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(np.isfinite(nv) & (nv > 0), 2 * np.sqrt(2) / nv, 0.0)
        scale = np.where(nv == 0, np.inf, scale)
        out = np.empty(2 * y.size)
        out[0::2] = np.nan_to_num(scale * y.real, nan=0.0)
        out[1::2] = np.nan_to_num(scale * y.imag, nan=0.0)
    return np.clip(out, -LLR_CLIP, LLR_CLIP)


@dataclass(frozen=True, eq=False)
class LdpcCode:
    """Regular LDPC code with a precomputed systematic encoder.

    ``check_vars[c]`` lists the variable nodes of check ``c`` and
    ``var_checks[v]`` the checks of variable ``v``. Message bits occupy
    ``info_cols`` of the codeword, parity bits ``parity_cols``.
    """

    n: int
    k: int
    check_vars: np.ndarray
    var_checks: np.ndarray
    info_cols: np.ndarray
    parity_cols: np.ndarray
    parity_map: np.ndarray  # (n-k, k) uint8: parity = parity_map @ msg mod 2
    seed: int

    @property
    def m(self) -> int:
        return self.check_vars.shape[0]

    @property
    def n_edges(self) -> int:
        return int(self.check_vars.size)

    @property
    def rate(self) -> float:
        return self.k / self.n

    def H(self) -> np.ndarray:
        H = np.zeros((self.m, self.n), dtype=np.uint8)
        H[np.repeat(np.arange(self.m), self.check_vars.shape[1]), self.check_vars.ravel()] = 1
        return H

    def syndrome(self, codewords) -> np.ndarray:
        cw = np.atleast_2d(np.asarray(codewords, dtype=np.uint8))
        return (cw[:, self.check_vars].sum(axis=-1) % 2).astype(np.uint8)

    def extract(self, codewords) -> np.ndarray:
        return np.asarray(codewords)[..., self.info_cols]

    def to_alist(self) -> str:
        dv = self.var_checks.shape[1]
        dc = self.check_vars.shape[1]
        lines = [f"{self.n} {self.m}", f"{dv} {dc}",
                 " ".join([str(dv)] * self.n), " ".join([str(dc)] * self.m)]
        lines += [" ".join(str(c + 1) for c in row) for row in self.var_checks]
        lines += [" ".join(str(v + 1) for v in row) for row in self.check_vars]
        return "\n".join(lines) + "\n"


def _peg(n: int, m: int, dv: int, dc: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Progressive edge growth with a hard check-degree cap (exactly regular)."""
    var_checks = np.full((n, dv), -1, dtype=np.int64)
    check_vars = np.full((m, dc), -1, dtype=np.int64)
    check_deg = np.zeros(m, dtype=np.int64)

    def pick(candidates: np.ndarray) -> int:
        open_ = candidates & (check_deg < dc)
        if not open_.any():
            open_ = check_deg < dc
        idx = np.flatnonzero(open_)
        deg = check_deg[idx]
        best = idx[deg == deg.min()]
        return int(best[rng.integers(best.size)])

    for v in range(n):
        for e in range(dv):
            if e == 0:
                c = pick(np.ones(m, dtype=bool))
            else:
                reached = np.zeros(m, dtype=bool)
                frontier = var_checks[v, :e]
                reached[frontier] = True
                seen_vars = np.zeros(n, dtype=bool)
                seen_vars[v] = True
                while True:
                    nb = check_vars[frontier].ravel()
                    nb = np.unique(nb[nb >= 0])
                    nb = nb[~seen_vars[nb]]
                    seen_vars[nb] = True
                    nc = var_checks[nb].ravel()
                    nc = np.unique(nc[nc >= 0])
                    nc = nc[~reached[nc]]
                    if nc.size == 0 or reached.sum() + nc.size == m:
                        break
                    reached[nc] = True
                    frontier = nc
                c = pick(~reached)
            var_checks[v, e] = c
            check_vars[c, check_deg[c]] = v
            check_deg[c] += 1
    return check_vars, np.sort(var_checks, axis=1)


def _gf2_rref(H: np.ndarray):
    """Reduced row-echelon form over GF(2). Returns (R, pivot_cols)."""
    R = H.astype(bool).copy()
    m, n = R.shape
    pivots = []
    row = 0
    for col in range(n):
        if row == m:
            break
        hits = np.flatnonzero(R[row:, col])
        if hits.size == 0:
            continue
        p = row + hits[0]
        if p != row:
            R[[row, p]] = R[[p, row]]
        others = np.flatnonzero(R[:, col])
        others = others[others != row]
        R[others] ^= R[row]
        pivots.append(col)
        row += 1
    return R[:row], np.array(pivots, dtype=np.int64)


def ldpc_build(k_info: int = 1024, rate: float = 0.5, seed: int = 0,
               max_attempts: int = 16) -> LdpcCode:
    """Build a regular-(3,6) rate-1/2 PEG code.

    A rank-deficient draw is rebuilt with ``seed + 1`` (logged); the seed
    finally used is stored on the code.
    """
    if rate != 0.5:
        raise ValueError("only rate 1/2 is supported")
    if k_info < 64:
        raise ValueError("k_info must be at least 64")
    n = 2 * k_info
    m = n - k_info
    dv, dc = 3, 6
    for attempt in range(max_attempts):
        s = seed + attempt
        check_vars, var_checks = _peg(n, m, dv, dc, np.random.default_rng(s))
        H = np.zeros((m, n), dtype=np.uint8)
        H[np.repeat(np.arange(m), dc), check_vars.ravel()] = 1
        R, pivots = _gf2_rref(H)
        if pivots.size == m:
            info_cols = np.setdiff1d(np.arange(n), pivots)
            parity_map = R[:, info_cols].astype(np.uint8)
            return LdpcCode(n, k_info, check_vars, var_checks, info_cols, pivots,
                            parity_map, s)
        log.warning("LDPC seed %d is rank deficient (rank %d < %d), retrying", s, pivots.size, m)
    raise RuntimeError(f"no full-rank code found in {max_attempts} attempts from seed {seed}")


@lru_cache(maxsize=8)
def cached_code(k_info: int = 1024, seed: int = 0) -> LdpcCode:
    return ldpc_build(k_info, 0.5, seed)


def ldpc_encode(msg, code: LdpcCode) -> np.ndarray:
    """Encode one message (``k``) or a batch (``B x k``)."""
    msg = np.asarray(msg, dtype=np.uint8)
    single = msg.ndim == 1
    msg = np.atleast_2d(msg)
    if msg.shape[1] != code.k:
        raise ValueError(f"message length {msg.shape[1]} != k={code.k}")
    parity = (msg.astype(np.float32) @ code.parity_map.T.astype(np.float32)) % 2
    cw = np.zeros((msg.shape[0], code.n), dtype=np.uint8)
    cw[:, code.info_cols] = msg
    cw[:, code.parity_cols] = parity.astype(np.uint8)
    return cw[0] if single else cw


def ldpc_decode(llrs, code: LdpcCode, max_iter: int = 50, alpha: float = 0.75):
    """Normalized min-sum decoding with early stopping on a zero syndrome.

    Returns ``(hard_bits, converged, iterations)``; each has a leading batch
    axis when ``llrs`` is 2-D.
    """
    llr = np.asarray(llrs, dtype=np.float64)
    single = llr.ndim == 1
    llr = np.clip(np.atleast_2d(llr), -LLR_CLIP, LLR_CLIP)
    if llr.shape[1] != code.n:
        raise ValueError(f"LLR length {llr.shape[1]} != n={code.n}")
    B = llr.shape[0]
    cvT = code.check_vars.T  # (dc, m); messages are stored edge-slot major
    dc, m = cvT.shape
    # edge e = j*m + c; var_edges[v] lists the edges touching v
    var_edges = np.argsort(cvT.ravel(), kind="stable").reshape(code.n, -1).T

    c2v = np.zeros((B, dc, m))
    total = llr.copy()
    hard = (total < 0).astype(np.uint8)
    done = np.all((hard[:, cvT].sum(1) % 2) == 0, axis=1)
    iters = np.zeros(B, dtype=np.int64)
    active = np.flatnonzero(~done)
    for it in range(1, max_iter + 1):
        if active.size == 0:
            break
        full = active.size == B
        ca = c2v if full else c2v[active]
        v2c = (total if full else total[active])[:, cvT] - ca
        mag = np.abs(v2c)
        neg = v2c < 0
        # check degree is small, so explicit passes beat ufunc reductions
        parity = neg[:, 0].copy()
        min1 = mag[:, 0].copy()
        min2 = np.full_like(min1, np.inf)
        for j in range(1, dc):
            parity ^= neg[:, j]
            np.minimum(min2, np.maximum(min1, mag[:, j]), out=min2)
            np.minimum(min1, mag[:, j], out=min1)
        out = np.where(mag == min1[:, None], min2[:, None], min1[:, None])
        ca = np.where(neg ^ parity[:, None], -alpha, alpha) * out
        flat = ca.reshape(active.size, -1)
        upd = flat[:, var_edges[0]]
        for row in var_edges[1:]:
            upd += flat[:, row]
        if full:
            c2v = ca
            total = llr + upd
            hard = (total < 0).astype(np.uint8)
            h_act = hard
        else:
            c2v[active] = ca
            total[active] = llr[active] + upd
            h_act = (total[active] < 0).astype(np.uint8)
            hard[active] = h_act
        iters[active] = it
        ok = np.all((h_act[:, cvT].sum(1) % 2) == 0, axis=1)
        done[active[ok]] = True
        active = active[~ok]
    if single:
        return hard[0], bool(done[0]), int(iters[0])
    return hard, done, iters
