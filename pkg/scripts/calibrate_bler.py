"""BLER of OFDM vs OTFDM under each CSI / equalizer combination.

Used to pick the headline configuration and to document where the
acceptance band is reachable. Prints one table per mode.

    python3 scripts/calibrate_bler.py --drops 200
"""

import argparse
import time

from otfdm.sim import CampaignConfig, run_campaign


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--drops", type=int, default=200)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--speeds", default="0,200,300,400,500")
    ap.add_argument("--snr", type=float, default=6.0)
    args = ap.parse_args()
    speeds = [float(s) for s in args.speeds.split(",")]
    for csi in ("genie", "estimated"):
        for eq in ("td", "lmmse"):
            cfg = CampaignConfig(drops=args.drops, master_seed=args.seed, csi=csi, equalizer=eq,
                                 speeds_kmh=speeds, snrs_db=[args.snr])
            t0 = time.perf_counter()
            rows = run_campaign(cfg)
            print(f"# csi={csi} equalizer={eq} drops={args.drops} ({time.perf_counter() - t0:.0f} s)")
            for r in rows:
                print(f"{r['waveform']:>6} {r['max_speed_kmh']:5g} km/h  BLER {r['bler']:.4f}  "
                      f"EVM {r['evm_db']:6.2f} dB  NMSE {r['nmse_db']:6.2f} dB", flush=True)


if __name__ == "__main__":
    main()
