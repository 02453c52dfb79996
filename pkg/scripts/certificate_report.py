#!/usr/bin/env python3
"""Certificates for the 1D benchmark: the hand-checked point, the published
multipliers, and the synthesized optimum for both objectives."""
import argparse
import json

from etwave import certcore as cc, experiments as ex
from etwave.certcore import Multipliers


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--gamma", type=float, help="override the trigger gain")
    ap.add_argument("--radius-delta", type=float, default=0.004,
                    help="decay rate at which the radius is minimized")
    args = ap.parse_args(argv)

    pd = ex.benchmark_1d().problem
    if args.gamma is not None:
        pd = pd.replace(gamma=args.gamma)

    report = {
        "problem": pd.__dict__,
        "eps_window_hi": cc.eps_window(pd)[1],
        "hand_point": cc.certify(pd, Multipliers(0.05, 0.25, 0.005)).to_json_dict(),
        "reference_point": ex.reference_point_audit(pd),
    }
    for objective, delta in (("delta", None), ("radius", args.radius_delta)):
        res = cc.synthesize(pd, objective, delta=delta)
        report[f"best_{objective}"] = {
            "multipliers": res.multipliers.__dict__ if res.multipliers else None,
            "certificate": res.certificate.to_json_dict() if res.certificate else None,
            "evaluated": res.evaluated,
        }
    print(json.dumps(ex._jsonable(report), indent=2))


if __name__ == "__main__":
    main()
