#!/usr/bin/env python3
"""Record run-derived regression values from completed pipeline outputs.

    python tools/freeze_regression.py SMOKE_OUT DESK_OUT

Writes tests/data/regression.json with the frozen ordering means, onset
times, exit seeds, and ionization potentials of both shipped configs.
"""

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def summary(outdir: Path) -> dict:
    data = {}
    for line in (outdir / "run_summary.txt").read_text().splitlines():
        key, val = (s.strip() for s in line.split("=", 1))
        data[key] = val
    return data


def freeze(outdir: Path) -> dict:
    s = summary(outdir)
    return {
        "ip": float(s["groundstate.ip"]),
        "keldysh_gamma": float(s["pulse.keldysh_gamma"]),
        "z_exit": float(s["geometry.z_exit"]),
        "seed_p_z0": float(s["seed.p_z0"]),
        "onset_time": float(s["onset.time"]),
        "qmf_mean_delta_p": float(s["compare.qmf.mean_delta_p"]),
        "qmf_coulomb_mean_delta_p": float(s["compare.qmf_coulomb.mean_delta_p"]),
        "simple_man_mean_delta_p": float(s["compare.simple_man.mean_delta_p"]),
        "final_norm": float(s["propagation.final_norm"]),
    }


def main():
    smoke, desk = sys.argv[1], sys.argv[2]
    out = {"smoke": freeze(Path(smoke)), "desk": freeze(Path(desk))}
    dest = ROOT / "tests" / "data" / "regression.json"
    dest.parent.mkdir(parents=True, exist_ok=True)
    dest.write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")
    print(f"wrote {dest}")


if __name__ == "__main__":
    main()
