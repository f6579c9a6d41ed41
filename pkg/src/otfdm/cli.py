"""Command line entry point: ``otfdm-sim``."""

from __future__ import annotations

import argparse
import logging
import sys

from .sim import CampaignConfig, InfeasibleConfig, emit_channel_snapshot, run_campaign, transmit_frame
from .waveform import write_iq


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="otfdm-sim", description=__doc__)
    p.add_argument("--config", help="YAML file with CampaignConfig keys")
    p.add_argument("--drops", type=int)
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--speeds", type=_floats, help="max speeds in km/h, comma separated")
    p.add_argument("--snrs", type=_floats, help="SNRs in dB, comma separated")
    p.add_argument("--csi", choices=["genie", "estimated"])
    p.add_argument("--equalizer", choices=["td", "lmmse"])
    p.add_argument("--workers", type=int)
    p.add_argument("--timing", action="store_true", help="fill the wall_ms column")
    p.add_argument("--out", help="CSV output path")
    p.add_argument("--snapshot", metavar="DIR",
                   help="write true/estimated channel grids of drop 0 to DIR")
    p.add_argument("--dump-iq", metavar="PATH",
                   help="write the transmit frame of drop 0 (first waveform) as float64 re/im")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from_args(args) -> CampaignConfig:
    config = CampaignConfig.from_file(args.config) if args.config else CampaignConfig()
    changes = {
        "drops": args.drops, "master_seed": args.seed, "speeds_kmh": args.speeds,
        "snrs_db": args.snrs, "csi": args.csi, "equalizer": args.equalizer,
        "workers": args.workers, "out": args.out,
    }
    if args.timing:
        changes["record_timing"] = True
    return config.replace(**{k: v for k, v in changes.items() if v is not None})


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = config_from_args(args)
        config.check_overhead()
        if args.dump_iq:
            write_iq(args.dump_iq, transmit_frame(config, 0).samples)
        if args.snapshot:
            nmse = emit_channel_snapshot(config, 0, args.snapshot)
            print(f"snapshot written to {args.snapshot} (NMSE {nmse:.2f} dB)")
        if args.snapshot and not args.out:
            return 0
        rows = run_campaign(config)
    except InfeasibleConfig as exc:
        print(f"otfdm-sim: infeasible configuration: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"otfdm-sim: {exc}", file=sys.stderr)
        return 1
    if not config.out:
        for r in rows:
            print(f"{r['waveform']:>10} {r['max_speed_kmh']:6g} km/h {r['snr_db']:5g} dB  "
                  f"BLER {r['bler']:.4f}  EVM {r['evm_db']:6.2f} dB  NMSE {r['nmse_db']:6.2f} dB")
    return 0


if __name__ == "__main__":
    sys.exit(main())
