#!/usr/bin/env python3
"""Energy curves for the 1D benchmark under each sampling policy.

Writes one comparison directory per plot, each holding
curves.csv, comparison.csv, summaries.json and a gnuplot pair:

    energy_event_vs_continuous/  continuous, event-triggered, frozen control
    energy_periodic_slow/        event-triggered vs periodic tau in {0.30, 0.36}
    energy_periodic_fast/        event-triggered vs periodic tau in {0.05, 0.10, 0.25}
    energy_periodic_long/        tau = 3, with the energy rises listed
"""
import argparse
import json
import os
from pathlib import Path

import numpy as np

from etwave import experiments as ex, triggers as tr

PANELS = {
    "energy_event_vs_continuous": ["continuous", "event", "frozen"],
    "energy_periodic_slow": ["event", "periodic:0.3", "periodic:0.36"],
    "energy_periodic_fast": ["event", "periodic:0.05", "periodic:0.1", "periodic:0.25"],
    "energy_periodic_long": ["event", "periodic:3"],
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default="results")
    ap.add_argument("--n-cells", type=int, default=400)
    ap.add_argument("--horizon", type=float, default=10.0)
    ap.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    args = ap.parse_args(argv)

    base = ex.benchmark_1d().replace(n_cells=args.n_cells, horizon=args.horizon)
    out = Path(args.out)
    for name, pols in PANELS.items():
        policies = [tr.parse_policy(p, base.problem.gamma, base.problem.nu0) for p in pols]
        cmp = ex.compare([base.with_policy(p) for p in policies], workers=args.workers)
        ex.write_comparison(cmp, out / name)
        print(f"{name}:")
        for label, rec in cmp.records.items():
            s = rec.summary
            print(f"  {label:16s} events={s['event_count']:5d}  E(T)={s['E_final']:.6f}  "
                  f"monotone={s['energy_monotone']}")
        if name == "energy_periodic_long":
            rec = cmp.records["periodic:3"]
            dE = np.diff(rec.series["E"])
            rising = rec.t[1:][dE > 0]
            (out / name / "energy_rises.json").write_text(json.dumps(
                {"rising_samples": int(rising.size),
                 "first": float(rising[0]) if rising.size else None}, indent=2) + "\n")
    print(f"written under {out}/")


if __name__ == "__main__":
    main()
