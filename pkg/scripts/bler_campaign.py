"""BLER against maximum speed for OFDM and OTFDM.

Runs the campaign described by a YAML config (defaults when omitted), prints
a speed-by-waveform BLER table and writes the CSV plus its metadata.

    python3 scripts/bler_campaign.py --config configs/table1.yaml --out runs/bler.csv
"""

import argparse
import sys
import time

from otfdm.sim import CampaignConfig, run_campaign


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config")
    ap.add_argument("--drops", type=int)
    ap.add_argument("--workers", type=int)
    ap.add_argument("--out", default="bler.csv")
    args = ap.parse_args()
    config = CampaignConfig.from_file(args.config) if args.config else CampaignConfig()
    config = config.replace(out=args.out, record_timing=True,
                            **({"drops": args.drops} if args.drops else {}))
    t0 = time.perf_counter()

    def progress(done, total):
        if done % 50 == 0 or done == total:
            print(f"  {done}/{total} drops, {time.perf_counter() - t0:.0f} s", file=sys.stderr, flush=True)

    rows = run_campaign(config, workers=args.workers, progress=progress)
    for snr in config.snrs_db:
        print(f"SNR {snr:g} dB, {config.drops} drops, csi={config.csi}, equalizer={config.equalizer}")
        print("km/h  " + "  ".join(f"{w:>10}" for w in config.waveforms))
        for speed in config.speeds_kmh:
            vals = [next(r["bler"] for r in rows if r["waveform"] == w and r["max_speed_kmh"] == speed
                         and r["snr_db"] == snr) for w in config.waveforms]
            print(f"{speed:4g}  " + "  ".join(f"{v:10.4f}" for v in vals))


if __name__ == "__main__":
    main()
