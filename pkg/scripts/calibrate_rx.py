"""Sweep of the small-Doppler approximation.

For a grid of normalized Doppler values ``nu_max*M*T_s`` this reports the
worst and median relative approximation energy of the per-symbol
contributions (small frame) and the noiseless genie-CSI EVM of
time-domain equalization (default-size frame, TDL-C 300 ns).

    python3 scripts/calibrate_rx.py
"""

import numpy as np

from otfdm.channel import PathSet, apply_channel, build_tdlc_paths
from otfdm.grid import FrameConfig
from otfdm.rx import analytic_dot_channel, analytic_gamma, otfdm_front_end, td_equalize_despread
from otfdm.waveform import otfdm_modulate

FRACTIONS = [0.001, 0.0025, 0.005, 0.01, 0.02, 0.05, 0.1]


def approx_errors(frac, draws=50, seed=0):
    cfg = FrameConfig(16, 4, 8)
    rng = np.random.default_rng(seed)
    nu_max = frac / (cfg.M * cfg.t_s)
    out = []
    for _ in range(draws):
        P = 4
        h = rng.standard_normal(P) + 1j * rng.standard_normal(P)
        ps = PathSet(h / np.linalg.norm(h), rng.integers(0, 8, P), rng.uniform(-nu_max, nu_max, P))
        X = (rng.standard_normal((16, 4)) + 1j * rng.standard_normal((16, 4))) / np.sqrt(2)
        out.append(analytic_gamma(X, ps, cfg).approx_error)
    return np.array(out)


def td_evm(frac, draws=20, seed=0):
    cfg = FrameConfig.table1()
    rng = np.random.default_rng(seed)
    speed = frac / (cfg.M * cfg.t_s) * 299_792_458.0 / cfg.f_c
    evm = []
    for d in range(draws):
        ps = build_tdlc_paths(300e-9, speed, cfg, seed=(seed, d), symmetric_doppler=True)
        X = ((1 - 2 * rng.integers(0, 2, (cfg.M, cfg.N))) + 1j * (1 - 2 * rng.integers(0, 2, (cfg.M, cfg.N)))) / np.sqrt(2)
        y = apply_channel(otfdm_modulate(X, cfg), ps, cfg)
        eq = td_equalize_despread(otfdm_front_end(y, cfg), analytic_dot_channel(ps, cfg), cfg)
        evm.append(np.mean(np.abs(eq.x_hat - X) ** 2))
    return 10 * np.log10(np.array(evm))


if __name__ == "__main__":
    print("nuMTs   approx_err(max)  approx_err(median)  TD-EVM dB (worst / median)")
    for frac in FRACTIONS:
        a = approx_errors(frac)
        e = td_evm(frac)
        print(f"{frac:6.4f}  {a.max():14.3e}  {np.median(a):14.3e}      {e.max():7.1f} / {np.median(e):7.1f}")
