import dataclasses

import numpy as np
import pytest

from otfdm.chest import OfdmCombLayout
from otfdm.grid import comb_deinterleave, unitary_dft
from otfdm.sim import (CSV_HEADER, CampaignConfig, InfeasibleConfig, Stream, derive_seed, drop_pathset,
                       emit_channel_snapshot, load_snapshot, read_csv, run_campaign, run_drop,
                       transmit_frame)


def small(**kw):
    base = dict(M=64, N=8, n_cp=32, rms_ds=100e-9, k_info=64, drops=3, master_seed=11,
                speeds_kmh=[0, 500], snrs_db=[6.0])
    base.update(kw)
    return CampaignConfig(**base)


def test_seed_derivation_streams_are_distinct():
    draws = {(d, s): np.random.default_rng(derive_seed(5, d, s)).random()
             for d in range(3) for s in Stream}
    assert len(set(draws.values())) == len(draws)
    a = np.random.default_rng(derive_seed(5, 1, Stream.NOISE)).random(4)
    b = np.random.default_rng(derive_seed(5, 1, Stream.NOISE)).random(4)
    assert np.array_equal(a, b)


def test_distinct_drops_have_distinct_paths():
    cfg = small()
    paths = [drop_pathset(cfg, d, 300) for d in range(20)]
    assert len({p.h.tobytes() for p in paths}) == 20
    # common random numbers: one drop, two speeds, same gains, scaled Doppler
    slow, fast = drop_pathset(cfg, 4, 100), drop_pathset(cfg, 4, 400)
    assert np.array_equal(slow.h, fast.h) and np.allclose(fast.nu, 4 * slow.nu)


def test_run_drop_is_reproducible():
    cfg = small()
    a, b = run_drop(cfg, 2), run_drop(cfg, 2)
    assert a.seed == b.seed == (11, 2)
    for key in a.points:
        pa, pb = dataclasses.asdict(a.points[key]), dataclasses.asdict(b.points[key])
        pa.pop("wall_s"), pb.pop("wall_s")
        assert pa == pb


def test_paired_payload_across_waveforms():
    cfg = small()
    ofdm = transmit_frame(cfg, 0, "ofdm")
    otfdm = transmit_frame(cfg, 0, "otfdm")
    tones = unitary_dft(ofdm.body)
    X = comb_deinterleave(unitary_dft(otfdm.body), cfg.M, cfg.N)
    comb = OfdmCombLayout.matching(cfg.layout)
    assert comb.capacity == cfg.layout.capacity
    # same coded symbols, in row-major order over OTFDM data REs and in tone order for OFDM
    assert np.allclose(tones[comb.data_mask], X[cfg.layout.data_mask], atol=1e-12)
    assert not np.allclose(transmit_frame(cfg, 1, "otfdm").body, otfdm.body)


@pytest.mark.parametrize("equalizer", ["td", "lmmse"])
def test_benign_channel_decodes(equalizer):
    cfg = small(csi="genie", equalizer=equalizer, speeds_kmh=[0], snrs_db=[40.0],
                waveforms=["ofdm", "otfdm", "ofdm_short"])
    rows = run_campaign(cfg)
    assert all(r["block_errors"] == 0 for r in rows)
    assert all(r["evm_db"] < -25 for r in rows)


def test_estimated_csi_reports_nmse():
    rows = run_campaign(small(csi="estimated", snrs_db=[30.0]))
    for r in rows:
        assert np.isfinite(r["nmse_db"])
    static = [r for r in rows if r["max_speed_kmh"] == 0]
    assert all(r["nmse_db"] < -25 for r in static)


def test_bler_non_increasing_in_snr():
    cfg = small(csi="genie", drops=10, speeds_kmh=[200], snrs_db=[0.0, 4.0, 8.0, 12.0])
    rows = run_campaign(cfg)
    for wf in cfg.waveforms:
        bler = [r["bler"] for r in rows if r["waveform"] == wf]
        n = rows[0]["blocks"]
        slack = 2 * np.sqrt(0.25 / n)
        assert all(b2 <= b1 + slack for b1, b2 in zip(bler, bler[1:]))


def test_csv_smoke_and_schema(tmp_path):
    out = tmp_path / "res.csv"
    rows = run_campaign(small(drops=1, out=str(out)))
    text = out.read_text()
    assert text.splitlines()[0] == ",".join(CSV_HEADER)
    table = read_csv(out)
    assert len(table) == len(rows) == 4
    assert all(r["wall_ms"] == "" for r in table)
    assert int(table[0]["drops"]) == 1
    assert 0.0 <= float(table[0]["bler"]) <= 1.0
    assert (tmp_path / "res.csv.meta.json").exists()


def test_csv_timing_column(tmp_path):
    out = tmp_path / "t.csv"
    run_campaign(small(drops=1, out=str(out), record_timing=True))
    assert all(float(r["wall_ms"]) > 0 for r in read_csv(out))


def test_campaign_csv_is_deterministic(tmp_path):
    paths = []
    for i, workers in enumerate([1, 1, 2]):
        out = tmp_path / f"run{i}.csv"
        run_campaign(small(drops=4, out=str(out)), workers=workers)
        paths.append(out.read_bytes())
    assert paths[0] == paths[1] == paths[2]


def test_io_error_has_path_context(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError, match="file"):
        run_campaign(small(drops=1, speeds_kmh=[0], out=str(blocker / "res.csv")))


def test_infeasible_config_aborts():
    cfg = small(speeds_kmh=[3000])
    with pytest.raises(InfeasibleConfig, match="Doppler"):
        run_drop(cfg, 0)
    with pytest.raises(InfeasibleConfig, match="delay"):
        run_campaign(small(rms_ds=3e-6, n_cp=63))


@pytest.mark.parametrize("kw", [dict(equalizer="zf"), dict(csi="perfect"), dict(waveforms=["otfs"]),
                                dict(waveforms=["ofdm_short"]), dict(drops=0), dict(speeds_kmh=[])])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        small(**kw)


def test_config_from_yaml(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("M: 64\nN: 8\nn_cp: 32\nspeeds_kmh: [0, 120]\ncsi: genie\n")
    cfg = CampaignConfig.from_file(p)
    assert cfg.speeds_kmh == [0.0, 120.0] and cfg.csi == "genie" and cfg.M == 64
    p.write_text("M: 64\nbogus: 1\n")
    with pytest.raises(ValueError, match="bogus"):
        CampaignConfig.from_file(p)


def test_snapshot_files(tmp_path):
    cfg = small(speeds_kmh=[500], drops=1)
    nmse = emit_channel_snapshot(cfg, 0, tmp_path)
    truth, est = load_snapshot(tmp_path, "true"), load_snapshot(tmp_path, "est")
    assert truth.shape == est.shape == (cfg.M * cfg.N, cfg.N)
    from_files = 10 * np.log10(np.sum(np.abs(est - truth) ** 2) / np.sum(np.abs(truth) ** 2))
    assert abs(from_files - nmse) < 1e-9
    rows = run_campaign(cfg.replace(waveforms=["otfdm"]))
    assert abs(rows[0]["nmse_db"] - from_files) < 1e-9


def test_snapshot_static_is_constant_in_time(tmp_path):
    cfg = small(speeds_kmh=[0], snrs_db=[300.0])
    emit_channel_snapshot(cfg, 0, tmp_path)
    for name in ("true", "est"):
        mag = np.loadtxt(tmp_path / f"eta_{name}_abs.txt")
        assert np.allclose(mag, mag[:, :1], rtol=1e-6, atol=1e-9)


def test_snapshot_requires_estimated_csi(tmp_path):
    with pytest.raises(ValueError):
        emit_channel_snapshot(small(csi="genie"), 0, tmp_path)
