"""Command line front end: ``etwave {preset,certify,synthesize,simulate,compare}``."""
from __future__ import annotations

import argparse
import json
import os
from pathlib import Path
import sys

from . import certcore, config, experiments, triggers
from .certcore import Multipliers

EXIT_OK, EXIT_INFEASIBLE, EXIT_CONFIG = 0, 1, 2

PRESETS = {"benchmark-1d": experiments.benchmark_1d}


def _dump(obj) -> str:
    return json.dumps(experiments._jsonable(obj), indent=2, allow_nan=False)


def split_policies(text: str) -> list[str]:
    """Split ``P1,P2,...`` where policy literals may themselves hold commas."""
    out: list[str] = []
    for tok in (t.strip() for t in text.split(",")):
        if not tok:
            continue
        try:
            float(tok)
            numeric = True
        except ValueError:
            numeric = False
        if numeric and out:
            out[-1] += "," + tok
        else:
            out.append(tok)
    return out


def _multipliers(args, scenario):
    given = [args.eps, args.l1, args.l2]
    if any(v is not None for v in given):
        base = scenario.multipliers
        fill = [v if v is not None else (getattr(base, k) if base else None)
                for v, k in zip(given, ("eps", "lambda1", "lambda2"))]
        if None in fill:
            raise config.ConfigError("need eps, l1 and l2 (flags or config)")
        return Multipliers(*fill)
    if scenario.multipliers is None:
        raise config.ConfigError("config has no eps/lambda1/lambda2 and none given by flag")
    return scenario.multipliers


def cmd_preset(args) -> int:
    text = config.dumps(PRESETS[args.name]())
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_certify(args) -> int:
    sc = config.load(args.config)
    m = _multipliers(args, sc)
    cert = certcore.certify(sc.problem, m, delta=args.delta, theta=args.theta)
    print(_dump(cert.to_json_dict()))
    return EXIT_INFEASIBLE if args.require_feasible and not cert.feasible else EXIT_OK


def cmd_synthesize(args) -> int:
    sc = config.load(args.config)
    if args.objective == "radius" and args.delta is None:
        raise config.ConfigError("--objective radius needs --delta")
    res = certcore.synthesize(sc.problem, args.objective, delta=args.delta)
    feasible = res.certificate is not None and res.certificate.feasible
    print(_dump({
        "objective": res.objective,
        "multipliers": res.multipliers.__dict__ if res.multipliers else None,
        "certificate": res.certificate.to_json_dict() if res.certificate else None,
        "evaluated": res.evaluated,
        "near_miss": res.near_miss,
    }))
    return EXIT_INFEASIBLE if args.require_feasible and not feasible else EXIT_OK


def cmd_simulate(args) -> int:
    sc = config.load(args.config)
    if args.policy:
        sc = sc.with_policy(triggers.parse_policy(args.policy, sc.problem.gamma, sc.problem.nu0))
    rec = experiments.run(sc)
    out = experiments.write_run(rec, sc, args.out)
    print(_dump({"out": str(out), "summary": rec.summary}))
    infeasible = rec.certificate is None or not rec.certificate.feasible
    return EXIT_INFEASIBLE if args.require_feasible and infeasible else EXIT_OK


def cmd_compare(args) -> int:
    sc = config.load(args.config)
    pols = [triggers.parse_policy(p, sc.problem.gamma, sc.problem.nu0)
            for p in split_policies(args.policies)]
    if len(pols) < 2:
        raise config.ConfigError("compare needs at least two policies")
    cmp = experiments.compare([sc.with_policy(p) for p in pols], workers=args.workers)
    out = experiments.write_comparison(cmp, args.out)
    rows = [{"a": a, "b": b, "sup_distance": d, "fraction_a_leq_b": f}
            for a, b, d, f in cmp.table()]
    print(_dump({"out": str(out), "table": rows}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="etwave", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("preset", help="print a built-in scenario config")
    s.add_argument("name", choices=sorted(PRESETS))
    s.add_argument("--out")
    s.set_defaults(func=cmd_preset)

    s = sub.add_parser("certify", help="check multipliers, print certificate JSON")
    s.add_argument("--config", required=True)
    s.add_argument("--eps", type=float)
    s.add_argument("--l1", type=float)
    s.add_argument("--l2", type=float)
    s.add_argument("--delta", type=float)
    s.add_argument("--theta", type=float, help="exponential-threshold variant")
    s.add_argument("--require-feasible", action="store_true")
    s.set_defaults(func=cmd_certify)

    s = sub.add_parser("synthesize", help="search multipliers")
    s.add_argument("--config", required=True)
    s.add_argument("--objective", choices=("delta", "radius"), default="delta")
    s.add_argument("--delta", type=float)
    s.add_argument("--require-feasible", action="store_true")
    s.set_defaults(func=cmd_synthesize)

    s = sub.add_parser("simulate", help="run one policy and write CSV/JSON/gnuplot files")
    s.add_argument("--config", required=True)
    s.add_argument("--policy")
    s.add_argument("--out", required=True)
    s.add_argument("--require-feasible", action="store_true")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("compare", help="run several policies and compare E curves")
    s.add_argument("--config", required=True)
    s.add_argument("--policies", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    s.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except config.ConfigError as exc:
        print(f"etwave: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"etwave: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
