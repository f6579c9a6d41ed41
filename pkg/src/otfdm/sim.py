"""Seeded Monte-Carlo BLER campaigns comparing OFDM and OTFDM.

One drop is one channel draw. Inside a drop every waveform, speed and SNR
sees the same information bits, the same path gains and speed quantiles
(speeds scale with the configured maximum) and the same unit noise vector
scaled to the SNR, so the comparison is paired.
"""

from __future__ import annotations

import csv
import dataclasses
import enum
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import channel as chan
from .chest import (OfdmCombLayout, PilotLayout, build_pilot_layout, estimate_channel,
                    insert_pilots, overhead_report)
from .coding import LdpcCode, cached_code, ldpc_decode, ldpc_encode, qpsk_llr, qpsk_map
from .grid import FrameConfig, comb_interleave, unitary_dft
from .rx import (analytic_dot_channel, lmmse_despread, ofdm_genie_response,
                 ofdm_one_tap_equalize, ofdm_short_genie_response, otfdm_front_end,
                 td_equalize_despread)
from .waveform import (Waveform, ofdm_modulate_short, ofdm_modulate_tones, otfdm_modulate)

log = logging.getLogger(__name__)

CSV_HEADER = ["waveform", "max_speed_kmh", "snr_db", "drops", "block_errors", "bler",
              "evm_db", "nmse_db", "wall_ms"]


class Stream(enum.IntEnum):
    """Independent random streams inside one drop."""

    CHANNEL = 0
    NOISE = 1
    BITS = 2
    FILLER = 3


class InfeasibleConfig(ValueError):
    pass


def derive_seed(master_seed: int, drop_index: int, stream: Stream) -> np.random.SeedSequence:
    """Counter-based seed for ``(master_seed, drop_index, stream)``."""
    return np.random.SeedSequence(master_seed, spawn_key=(int(drop_index), int(stream)))


@dataclass
class CampaignConfig:
    M: int = 512
    N: int = 8
    n_cp: int = 288
    delta_f: float = 15e3
    f_c: float = 24e9
    waveforms: list = field(default_factory=lambda: ["ofdm", "otfdm"])
    equalizer: str = "td"  # "td" or "lmmse"
    csi: str = "estimated"  # "genie" or "estimated"
    lam: int = 4
    w: int = 8
    boost_db: float = 6.0
    pilot_seed: int = 1
    pilot_slot: int = 0
    rms_ds: float = 1000e-9
    speeds_kmh: list = field(default_factory=lambda: [0, 100, 200, 300, 400, 500])
    snrs_db: list = field(default_factory=lambda: [6.0])
    symmetric_doppler: bool = False
    drops: int = 2000
    master_seed: int = 2024
    k_info: int = 1024
    ldpc_seed: int = 0
    max_iter: int = 50
    workers: int = 1
    record_timing: bool = False
    out: str | None = None

    def __post_init__(self):
        self.waveforms = [Waveform(w).value for w in self.waveforms]
        self.speeds_kmh = [float(v) for v in self.speeds_kmh]
        self.snrs_db = [float(s) for s in self.snrs_db]
        if not self.waveforms or not self.speeds_kmh or not self.snrs_db:
            raise ValueError("waveform, speed and SNR lists must be non-empty")
        if self.drops < 1:
            raise ValueError("drops must be at least 1")
        if self.equalizer not in ("td", "lmmse"):
            raise ValueError(f"unknown equalizer {self.equalizer!r}")
        if self.csi not in ("genie", "estimated"):
            raise ValueError(f"unknown csi mode {self.csi!r}")
        if Waveform.OTFS_DZT.value in self.waveforms:
            raise ValueError("OTFS is a transmit-only baseline; it has no receiver here")
        if self.csi == "estimated" and Waveform.OFDM_SHORT.value in self.waveforms:
            raise ValueError("short-symbol OFDM is only simulated with genie CSI")

    @property
    def frame(self) -> FrameConfig:
        return FrameConfig(self.M, self.N, self.n_cp, self.delta_f, self.f_c)

    @property
    def layout(self) -> PilotLayout:
        return build_pilot_layout(self.lam, self.w, self.boost_db, self.frame,
                                  self.pilot_seed, self.pilot_slot)

    @property
    def comb(self) -> OfdmCombLayout:
        return OfdmCombLayout.matching(self.layout)

    @classmethod
    def from_file(cls, path) -> "CampaignConfig":
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
        unknown = set(data) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ValueError(f"{path}: unknown config keys {sorted(unknown)}")
        return cls(**data)

    def replace(self, **changes) -> "CampaignConfig":
        return dataclasses.replace(self, **changes)

    def check_overhead(self):
        """Pilot budgets against the RMS delay spread and the top speed."""
        max_nu = self.frame.doppler_hz(chan.kmh(max(abs(v) for v in self.speeds_kmh)))
        report = overhead_report(self.layout, self.rms_ds, max_nu, self.frame)
        if not report.feasible:
            raise InfeasibleConfig(
                f"pilot layout infeasible: delay budget {report.delay_budget_samples:g} samples "
                f"vs required {report.required_delay:.1f}, Doppler window {report.doppler_budget_slots} "
                f"vs required {report.required_doppler:.2f}")
        return report


@dataclass
class PointResult:
    """Sums for one (waveform, speed, snr) point over one or more drops."""

    blocks: int = 0
    block_errors: int = 0
    err_energy: float = 0.0
    sym_energy: float = 0.0
    ch_err: float = 0.0
    ch_energy: float = 0.0
    wall_s: float = 0.0

    def add(self, other: "PointResult") -> None:
        self.blocks += other.blocks
        self.block_errors += other.block_errors
        self.err_energy += other.err_energy
        self.sym_energy += other.sym_energy
        self.ch_err += other.ch_err
        self.ch_energy += other.ch_energy
        self.wall_s += other.wall_s

    @property
    def evm_db(self) -> float:
        return _db(self.err_energy, self.sym_energy)

    @property
    def nmse_db(self) -> float:
        return _db(self.ch_err, self.ch_energy)


def _db(num, den) -> float:
    if den <= 0:
        return float("nan")
    if num <= 0:
        return float("-inf")
    return float(10 * np.log10(num / den))


@dataclass
class DropResult:
    drop_index: int
    seed: tuple
    points: dict  # (waveform, speed_kmh, snr_db) -> PointResult


@dataclass
class _Payload:
    """Information bits and coded symbols shared by all waveforms of a drop."""

    msgs: np.ndarray
    symbols: np.ndarray  # coded QPSK symbols, block after block
    filler: np.ndarray


def _payload(config: CampaignConfig, code: LdpcCode, drop_index: int, capacity: int) -> _Payload:
    n_sym = code.n // 2
    n_blocks = capacity // n_sym
    if n_blocks < 1:
        raise InfeasibleConfig(f"frame data capacity {capacity} is below one codeword ({n_sym} symbols)")
    bits_rng = np.random.default_rng(derive_seed(config.master_seed, drop_index, Stream.BITS))
    msgs = bits_rng.integers(0, 2, (n_blocks, code.k), dtype=np.uint8)
    symbols = qpsk_map(ldpc_encode(msgs, code).reshape(-1))
    filler_rng = np.random.default_rng(derive_seed(config.master_seed, drop_index, Stream.FILLER))
    filler = qpsk_map(filler_rng.integers(0, 2, 2 * (capacity - symbols.size)))
    return _Payload(msgs, symbols, filler)


def _noise_var(body) -> float:
    return float(np.mean(np.abs(body) ** 2))


@dataclass
class _Observation:
    """What one waveform hands to the decoder for one sweep point."""

    x_hat: np.ndarray  # unbiased estimates at data REs, in mapping order
    noise_var: np.ndarray
    x_ref: np.ndarray
    ch_err: float = 0.0
    ch_energy: float = 0.0


class _Link:
    """Transmit side and receiver of one waveform inside a drop."""

    def __init__(self, kind: Waveform, config: CampaignConfig, payload: _Payload):
        self.kind = kind
        self.config = config
        cfg = config.frame
        data = np.concatenate([payload.symbols, payload.filler])
        if kind is Waveform.OFDM_LARGE:
            comb = config.comb
            tones = np.zeros(cfg.size, dtype=np.complex128)
            tones[comb.data_mask] = data[: comb.capacity]
            self.frame = ofdm_modulate_tones(comb.insert(tones), cfg)
            self.data_mask = comb.data_mask
        else:
            layout = config.layout
            X = np.zeros((cfg.M, cfg.N), dtype=np.complex128)
            X[layout.data_mask] = data[: layout.capacity]  # row-major: large-tone order
            X = insert_pilots(X, layout)
            if kind is Waveform.OTFDM:
                self.frame = otfdm_modulate(X, cfg)
            else:
                self.frame = ofdm_modulate_short(X, cfg)
            self.data_mask = layout.data_mask
        self.tx_data = data[: int(self.data_mask.sum())]
        if kind is Waveform.OFDM_SHORT:
            self.signal_power = _noise_var(self.frame.samples.reshape(cfg.N, -1)[:, self.frame.n_cp:])
        else:
            self.signal_power = _noise_var(self.frame.body)

    def propagate(self, ps: chan.PathSet) -> np.ndarray:
        if self.kind is Waveform.OFDM_SHORT:
            return chan.apply_channel_short(self.frame, ps, self.config.frame)
        return chan.apply_channel(self.frame, ps, self.config.frame)

    def receive(self, y, ps: chan.PathSet, sigma2: float) -> _Observation:
        config = self.config
        cfg = config.frame
        genie = config.csi == "genie"
        if self.kind is Waveform.OFDM_LARGE:
            Z = unitary_dft(y)
            H_true = ofdm_genie_response(ps, cfg)
            H = H_true if genie else config.comb.estimate(Z)
            eq = ofdm_one_tap_equalize(Z, H, sigma2)
            obs = _Observation(eq.unbiased()[self.data_mask], eq.noise_var[self.data_mask], self.tx_data)
            if not genie:
                obs.ch_err = float(np.sum(np.abs(H - H_true) ** 2))
                obs.ch_energy = float(np.sum(np.abs(H_true) ** 2))
            return obs
        if self.kind is Waveform.OFDM_SHORT:
            R = unitary_dft(y, axis=0)
            eq = ofdm_one_tap_equalize(R, ofdm_short_genie_response(ps, cfg), sigma2)
            return _Observation(eq.unbiased()[self.data_mask], eq.noise_var[self.data_mask], self.tx_data)
        Ypp = otfdm_front_end(y, cfg)
        ch_true = analytic_dot_channel(ps, cfg)
        ch = ch_true if genie else estimate_channel(Ypp, config.layout, cfg)
        if config.equalizer == "lmmse":
            eq = lmmse_despread(Ypp, ch, sigma2, cfg)
        else:
            eq = td_equalize_despread(Ypp, ch, cfg, sigma2)
        obs = _Observation(eq.unbiased()[self.data_mask], np.asarray(eq.noise_var)[self.data_mask],
                           self.tx_data)
        if not genie:
            obs.ch_err = float(np.sum(np.abs(ch.eta - ch_true.eta) ** 2))
            obs.ch_energy = float(np.sum(np.abs(ch_true.eta) ** 2))
        return obs


def drop_pathset(config: CampaignConfig, drop_index: int, speed_kmh: float) -> chan.PathSet:
    return chan.build_tdlc_paths(config.rms_ds, chan.kmh(speed_kmh), config.frame,
                                 seed=derive_seed(config.master_seed, drop_index, Stream.CHANNEL),
                                 symmetric_doppler=config.symmetric_doppler)


def transmit_frame(config: CampaignConfig, drop_index: int, waveform=None):
    """The transmitted frame of one drop (first configured waveform by default)."""
    code = cached_code(config.k_info, config.ldpc_seed)
    capacity = min(config.layout.capacity, config.comb.capacity)
    kind = Waveform(waveform or config.waveforms[0])
    return _Link(kind, config, _payload(config, code, drop_index, capacity)).frame


def _unit_noise(config: CampaignConfig, drop_index: int, shape) -> np.ndarray:
    rng = np.random.default_rng(derive_seed(config.master_seed, drop_index, Stream.NOISE))
    return chan.awgn(shape, 1.0, rng)


def run_drop(config: CampaignConfig, drop_index: int, code: LdpcCode | None = None) -> DropResult:
    """Simulate every (waveform, speed, snr) point for one channel draw."""
    config.check_overhead()
    code = code or cached_code(config.k_info, config.ldpc_seed)
    kinds = [Waveform(w) for w in config.waveforms]
    capacity = min(config.layout.capacity, config.comb.capacity)
    payload = _payload(config, code, drop_index, capacity)
    n_blocks = payload.msgs.shape[0]
    n_sym = code.n // 2

    links = [_Link(kind, config, payload) for kind in kinds]
    noise = {}
    llrs, keys, points = [], [], {}
    for link in links:
        for speed in config.speeds_kmh:
            ps = drop_pathset(config, drop_index, speed)
            t0 = time.perf_counter()
            clean = link.propagate(ps)
            for snr in config.snrs_db:
                if clean.shape not in noise:
                    noise[clean.shape] = _unit_noise(config, drop_index, clean.shape)
                sigma2 = chan.snr_to_sigma2(snr, link.signal_power)
                y = clean + np.sqrt(sigma2) * noise[clean.shape]
                obs = link.receive(y, ps, sigma2)
                coded = n_blocks * n_sym
                llrs.append(qpsk_llr(obs.x_hat[:coded], obs.noise_var[:coded]).reshape(n_blocks, -1))
                ok = np.isfinite(obs.noise_var)
                err = obs.x_hat[ok] - obs.x_ref[ok]
                key = (link.kind.value, speed, snr)
                points[key] = PointResult(
                    blocks=n_blocks,
                    err_energy=float(np.sum(np.abs(err) ** 2)),
                    sym_energy=float(np.sum(np.abs(obs.x_ref) ** 2)),
                    ch_err=obs.ch_err, ch_energy=obs.ch_energy,
                    wall_s=time.perf_counter() - t0)
                keys.append(key)
    hard, _, _ = ldpc_decode(np.concatenate(llrs), code, max_iter=config.max_iter)
    decoded = code.extract(hard).reshape(len(keys), n_blocks, code.k)
    for key, bits in zip(keys, decoded):
        points[key].block_errors = int(np.any(bits != payload.msgs, axis=1).sum())
    return DropResult(drop_index, (config.master_seed, drop_index), points)


def _run_chunk(args):
    config, indices = args
    code = cached_code(config.k_info, config.ldpc_seed)
    return [run_drop(config, i, code) for i in indices]


def run_campaign(config: CampaignConfig, workers: int | None = None, progress=None) -> list[dict]:
    """Run all drops and aggregate per (waveform, speed, snr).

    Drops are summed in index order whatever the number of workers, so the
    table is reproducible bit for bit.
    """
    config.check_overhead()
    workers = config.workers if workers is None else workers
    indices = list(range(config.drops))
    if workers <= 1:
        code = cached_code(config.k_info, config.ldpc_seed)
        results = []
        for i in indices:
            results.append(run_drop(config, i, code))
            if progress:
                progress(i + 1, config.drops)
    else:
        chunks = [indices[j::workers * 4] for j in range(workers * 4)]
        results = []
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(_run_chunk, [(config, c) for c in chunks if c]):
                results.extend(part)
        results.sort(key=lambda r: r.drop_index)

    totals = {}
    for res in results:
        for key, point in res.points.items():
            totals.setdefault(key, PointResult()).add(point)
    rows = []
    for wf in config.waveforms:
        for speed in config.speeds_kmh:
            for snr in config.snrs_db:
                p = totals[(wf, speed, snr)]
                rows.append({
                    "waveform": wf, "max_speed_kmh": speed, "snr_db": snr,
                    "drops": config.drops, "block_errors": p.block_errors,
                    "blocks": p.blocks, "bler": p.block_errors / p.blocks,
                    "evm_db": p.evm_db,
                    "nmse_db": p.nmse_db if config.csi == "estimated" else float("nan"),
                    "wall_ms": 1e3 * p.wall_s / config.drops,
                })
    if config.out:
        write_csv(rows, config.out, config.record_timing)
        write_metadata(rows, config, Path(str(config.out) + ".meta.json"))
    return rows


def _fmt(x) -> str:
    if isinstance(x, float):
        return "nan" if np.isnan(x) else f"{x:.6g}"
    return str(x)


def write_csv(rows, path, record_timing: bool = False) -> None:
    """Write the result table. ``wall_ms`` stays empty unless timing is requested,
    which keeps the file byte-reproducible."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for r in rows:
                vals = [r[c] for c in CSV_HEADER]
                if not record_timing:
                    vals[-1] = ""
                writer.writerow([_fmt(v) for v in vals])
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc


def write_metadata(rows, config: CampaignConfig, path) -> None:
    meta = {
        "config": dataclasses.asdict(config),
        "wall_ms_per_drop": {f"{r['waveform']}@{r['max_speed_kmh']:g}kmh/{r['snr_db']:g}dB": r["wall_ms"]
                             for r in rows},
    }
    try:
        Path(path).write_text(json.dumps(meta, indent=2, default=str) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write metadata to {path}: {exc}") from exc


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def emit_channel_snapshot(config: CampaignConfig, drop_index: int, out_dir,
                          speed_kmh: float | None = None, snr_db: float | None = None) -> float:
    """Dump true and estimated ``eta`` of one OTFDM drop as text grids.

    Writes ``eta_true_abs.txt``, ``eta_true_phase.txt``, ``eta_est_abs.txt``
    and ``eta_est_phase.txt``. Each is an ``(M*N) x N`` matrix: row
    ``m*N + n`` is sub-carrier ``m`` of sub-symbol ``n`` (the large tone),
    column ``k`` the Doppler replica. Returns the NMSE in dB.
    """
    if config.csi != "estimated":
        raise ValueError("channel snapshots need csi='estimated'")
    speed = max(config.speeds_kmh) if speed_kmh is None else speed_kmh
    snr = config.snrs_db[0] if snr_db is None else snr_db
    code = cached_code(config.k_info, config.ldpc_seed)
    capacity = min(config.layout.capacity, config.comb.capacity)
    payload = _payload(config, code, drop_index, capacity)
    link = _Link(Waveform.OTFDM, config, payload)
    ps = drop_pathset(config, drop_index, speed)
    clean = link.propagate(ps)
    sigma2 = chan.snr_to_sigma2(snr, link.signal_power)
    y = clean + np.sqrt(sigma2) * _unit_noise(config, drop_index, clean.shape)
    cfg = config.frame
    truth = analytic_dot_channel(ps, cfg).eta
    est = estimate_channel(otfdm_front_end(y, cfg), config.layout, cfg).eta
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        for name, eta in (("true", truth), ("est", est)):
            merged = eta.reshape(cfg.size, cfg.N)
            np.savetxt(out / f"eta_{name}_abs.txt", np.abs(merged), fmt="%.17g")
            np.savetxt(out / f"eta_{name}_phase.txt", np.angle(merged), fmt="%.17g")
    except OSError as exc:
        raise OSError(f"cannot write channel snapshot to {out}: {exc}") from exc
    return _db(np.sum(np.abs(est - truth) ** 2), np.sum(np.abs(truth) ** 2))


def load_snapshot(out_dir, name: str) -> np.ndarray:
    out = Path(out_dir)
    mag = np.loadtxt(out / f"eta_{name}_abs.txt", ndmin=2)
    phase = np.loadtxt(out / f"eta_{name}_phase.txt", ndmin=2)
    return mag * np.exp(1j * phase)
