"""Closed-loop runs, decay-rate fits and policy comparisons."""
from __future__ import annotations

import ast
from concurrent.futures import ProcessPoolExecutor
import csv
from dataclasses import dataclass, field, asdict
import json
import math
from pathlib import Path

import numpy as np

from . import certcore, triggers, wavesim
from .certcore import Certificate, Multipliers, ProblemData
from .triggers import EventLog

PROFILE_PRESETS = {
    "zero": "0",
    "bench-position": "sin(x/2)",
    "bench-velocity": "sin(3*x/2)",
}

_PROFILE_NAMES = {
    "x": None, "pi": np.pi, "e": np.e,
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp, "log": np.log,
    "sqrt": np.sqrt, "sinh": np.sinh, "cosh": np.cosh, "tanh": np.tanh,
    "abs": np.abs, "minimum": np.minimum, "maximum": np.maximum, "where": np.where,
}
_PROFILE_NODES = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load,
                  ast.Constant, ast.operator, ast.unaryop, ast.Compare, ast.cmpop)


def make_profile(expr: str):
    """Compile a profile expression in ``x`` (or a preset name) to a callable."""
    src = PROFILE_PRESETS.get(expr, expr)
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"bad profile expression {expr!r}: {exc.msg}") from None
    for node in ast.walk(tree):
        if not isinstance(node, _PROFILE_NODES):
            raise ValueError(f"disallowed syntax in profile {expr!r}")
        if isinstance(node, ast.Name) and node.id not in _PROFILE_NAMES:
            raise ValueError(f"unknown name {node.id!r} in profile {expr!r}")
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
            raise ValueError(f"non-numeric constant in profile {expr!r}")
    code = compile(tree, "<profile>", "eval")

    def profile(x):
        ns = dict(_PROFILE_NAMES, x=np.asarray(x, dtype=float))
        return np.broadcast_to(eval(code, {"__builtins__": {}}, ns), np.shape(x))

    return profile


@dataclass(frozen=True)
class Scenario:
    problem: ProblemData = field(default_factory=ProblemData)
    policy: object = field(default_factory=triggers.Continuous)
    x0: float = -1.0
    length: float = math.pi
    n_cells: int = 400
    cfl: float = 0.9
    z0: str = "bench-position"
    z1: str = "bench-velocity"
    horizon: float = 10.0
    record_stride: int = 1
    multipliers: Multipliers | None = None
    name: str = "custom"

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise ValueError("record_stride must be a positive integer")
        if not 0 < self.cfl <= 1:
            raise ValueError("cfl must be in (0, 1]")
        if int(self.n_cells) != self.n_cells or self.n_cells < 2:
            raise ValueError("n_cells must be an integer >= 2")
        if not self.x0 < self.length:
            raise ValueError("x0 must lie left of the controlled end")
        make_profile(self.z0)
        make_profile(self.z1)

    def grid(self) -> wavesim.Grid1D:
        return wavesim.Grid1D.uniform(self.n_cells, self.cfl, self.length, self.horizon)

    def with_policy(self, policy) -> "Scenario":
        return Scenario(**{**self.__dict__, "policy": policy})

    def replace(self, **kw) -> "Scenario":
        return Scenario(**{**self.__dict__, **kw})

    def to_flat(self) -> dict:
        d = {"name": self.name, **asdict(self.problem),
             "x0": self.x0, "length": self.length, "n_cells": self.n_cells, "cfl": self.cfl,
             "horizon": self.horizon, "record_stride": self.record_stride,
             "z0": self.z0, "z1": self.z1, "policy": triggers.format_policy(self.policy)}
        if self.multipliers is not None:
            d.update(eps=self.multipliers.eps, lambda1=self.multipliers.lambda1,
                     lambda2=self.multipliers.lambda2)
        return d

    @classmethod
    def from_flat(cls, d: dict) -> "Scenario":
        d = dict(d)
        pkeys = ("n", "R", "c_omega", "alpha1", "gamma", "nu0")
        problem = ProblemData(**{k: d.pop(k) for k in pkeys if k in d})
        mkeys = [k for k in ("eps", "lambda1", "lambda2") if k in d]
        mult = None
        if mkeys:
            if len(mkeys) != 3:
                raise ValueError("eps, lambda1, lambda2 must be given together")
            mult = Multipliers(*(d.pop(k) for k in ("eps", "lambda1", "lambda2")))
        policy = triggers.parse_policy(d.pop("policy", "continuous"), problem.gamma, problem.nu0)
        return cls(problem=problem, policy=policy, multipliers=mult, **d)


def benchmark_1d(policy=None) -> Scenario:
    """The published 1D set-up; every acceptance run starts from here."""
    pd = ProblemData(n=1, R=math.pi + 1.0, c_omega=certcore.poincare_constant_1d(0.0, math.pi),
                     alpha1=0.1, gamma=0.2, nu0=0.1)
    return Scenario(problem=pd, policy=policy or triggers.EventStatic(0.2, 0.1), x0=-1.0,
                    n_cells=400, cfl=0.9, horizon=10.0, record_stride=1,
                    multipliers=Multipliers(0.05, 0.25, 0.005), name="benchmark-1d")


# multipliers reported feasible in the published example
REFERENCE_POINT = Multipliers(eps=0.08, lambda1=0.1, lambda2=0.01)


def reference_point_audit(pd: ProblemData) -> dict:
    cert = certcore.certify(pd, REFERENCE_POINT)
    M = certcore.build_M(pd, REFERENCE_POINT)
    minor34 = M[2, 2] * M[3, 3] - M[2, 3] ** 2
    return {
        "point": asdict(REFERENCE_POINT),
        "claimed_feasible": True,
        "minor_verdict": cert.lmi_minor_verdict,
        "eigen_verdict": cert.lmi_eigen_verdict,
        "feasible": cert.feasible,
        "failed_checks": cert.failed_checks,
        "rows34_minor": minor34,
        "m3_feasible": certcore.m3_feasible(pd, REFERENCE_POINT.eps),
        "agrees_with_claim": cert.feasible,
    }


SERIES_COLUMNS = ("t", "E", "V", "u", "v_boundary", "trigger_value", "event_flag")


@dataclass
class RunRecord:
    series: dict
    events: EventLog
    summary: dict
    certificate: Certificate | None = None
    dt: float = 0.0

    @property
    def t(self) -> np.ndarray:
        return self.series["t"]


def run(scenario: Scenario, cert: Certificate | None = None) -> RunRecord:
    """Step the closed loop to the horizon under the scenario's policy.

    E and V in the series are midpoint values on ``[t - dt, t]``. The
    trigger is evaluated once per step with the pre-update state; at most one
    update per step; no update at the final sample.
    """
    pd = scenario.problem
    grid = scenario.grid()
    if cert is None and scenario.multipliers is not None:
        cert = certcore.certify(pd, scenario.multipliers)
    eps = cert.eps if cert is not None else 0.0
    nsteps = round(scenario.horizon / grid.dt)

    z1 = make_profile(scenario.z1)
    ctx = wavesim.BoundaryControlContext.for_problem(pd.alpha1, scenario.x0, scenario.length)
    v0 = float(np.asarray(z1(np.array([scenario.length])))[0])
    state = wavesim.init(grid, make_profile(scenario.z0), z1, u0=-ctx.alpha_at_gamma1 * v0)
    log = EventLog()
    policy = scenario.policy

    rows = {c: [] for c in SERIES_COLUMNS}
    for n in range(nsteps + 1):
        t = n * grid.dt
        E = wavesim.energy(state, grid)
        V = E + eps * wavesim.rho(state, grid, ctx) if eps else E
        f = triggers.policy_trigger_value(policy, t, state, ctx, E, pd.gamma, pd.nu0)
        fired = False
        if n < nsteps and triggers.should_update(policy, t, state, ctx, E, log):
            ctx, log = triggers.apply_update(state, grid, ctx, log, t)
            state = wavesim.with_control(state, grid, ctx)
            fired = True
        if n % scenario.record_stride == 0 or n == nsteps:
            for c, v in zip(SERIES_COLUMNS, (t, E, V, ctx.u, state.v[-1], f, int(fired))):
                rows[c].append(v)
        if n < nsteps:
            state = wavesim.step(state, grid, ctx)

    series = {c: np.asarray(v, dtype=float if c != "event_flag" else int) for c, v in rows.items()}
    rec = RunRecord(series, log, {}, cert, grid.dt)
    rec.summary = summarize(rec)
    return rec


def summarize(rec: RunRecord) -> dict:
    t, E, V = rec.series["t"], rec.series["E"], rec.series["V"]
    r = rec.certificate.radius if rec.certificate is not None and rec.certificate.feasible else None
    dE = np.diff(E)
    incr = dE > 1e-12 * E[0]
    entry = None
    if r is not None:
        below = np.nonzero(V < r)[0]
        entry = float(t[below[0]]) if below.size else None
    try:
        fitted = fit_decay_rate(rec)
    except ValueError:
        fitted = None
    return {
        "E_initial": float(E[0]),
        "E_final": float(E[-1]),
        "V_final": float(V[-1]),
        "event_count": len(rec.events),
        "min_gap": rec.events.min_gap if len(rec.events) > 1 else None,
        "min_gap_steps": rec.events.min_gap / rec.dt if len(rec.events) > 1 else None,
        "fitted_delta": fitted,
        "radius": r,
        "attractor_entry_time": entry,
        "energy_monotone": not bool(incr.any()),
        "energy_increase_samples": int(incr.sum()),
    }


def fit_decay_rate(rec: RunRecord, window: tuple[float, float] | None = None) -> float:
    """Least-squares slope of ``-log(V)/2`` over ``window``.

    Default window: ``[0, first t with V <= 1.05 r]`` for a feasible
    certificate, falling back to the full horizon when that leaves fewer than
    10 samples (e.g. the run starts inside the attractor).
    """
    t, V = rec.series["t"], rec.series["V"]
    if window is None:
        window = (t[0], t[-1])
        cert = rec.certificate
        if cert is not None and cert.feasible and cert.radius:
            hit = np.nonzero(V <= 1.05 * cert.radius)[0]
            if hit.size and hit[0] >= 9:
                window = (t[0], t[hit[0]])
    sel = (t >= window[0]) & (t <= window[1])
    if sel.sum() < 10:
        raise ValueError("window holds fewer than 10 samples")
    if np.any(V[sel] <= 0):
        raise ValueError("V must be positive on the window")
    slope = np.polyfit(t[sel], -0.5 * np.log(V[sel]), 1)[0]
    return float(slope)


def lyapunov_contract(rec: RunRecord, slack: float | None = None) -> dict:
    """Check ``dV/dt <= -2 delta V + slack`` on samples with ``V >= r``.

    ``slack`` defaults to ``1e-2 * V(0)``.
    """
    cert = rec.certificate
    if cert is None or not cert.feasible:
        raise ValueError("need a feasible certificate")
    t, V = rec.series["t"], rec.series["V"]
    slack = 1e-2 * V[0] if slack is None else slack
    dq = np.diff(V) / np.diff(t)
    outside = V[:-1] >= cert.radius
    ok = dq <= -2 * cert.delta_used * V[:-1] + slack
    n_out = int(outside.sum())
    n_ok = int((ok & outside).sum())
    return {"samples_outside": n_out, "satisfied": n_ok,
            "fraction": n_ok / n_out if n_out else 1.0}


def sandwich_violation(rec: RunRecord, c_tilde: float) -> float:
    """Largest relative violation of ``(1 - eps C) E <= V <= (1 + eps C) E``."""
    E, V = rec.series["E"], rec.series["V"]
    eps = rec.certificate.eps if rec.certificate is not None else 0.0
    lo = (1 - eps * c_tilde) * E
    hi = (1 + eps * c_tilde) * E
    scale = np.maximum(E, np.finfo(float).tiny)
    return float(max(np.max((lo - V) / scale), np.max((V - hi) / scale), 0.0))


@dataclass
class Comparison:
    labels: list[str]
    t: np.ndarray
    curves: dict
    sup_distance: dict
    fraction_leq: dict
    records: dict = field(default_factory=dict, repr=False)

    def frac_geq(self, a: str, b: str) -> float:
        return self.fraction_leq[(b, a)]

    def table(self):
        for a in self.labels:
            for b in self.labels:
                if a != b:
                    yield a, b, self.sup_distance[(a, b)], self.fraction_leq[(a, b)]


def _run_one(s):
    return run(s)


def compare(scenarios, labels=None, workers: int | None = 1) -> Comparison:
    """Run scenarios that share grid and initial data and compare E curves."""
    scenarios = list(scenarios)
    labels = list(labels) if labels else [s.policy.label() for s in scenarios]
    if len(set(labels)) != len(labels):
        raise ValueError("labels must be distinct")
    ref = scenarios[0]
    keys = ("n_cells", "cfl", "length", "horizon", "record_stride", "z0", "z1", "x0")
    for s in scenarios[1:]:
        bad = [k for k in keys if getattr(s, k) != getattr(ref, k)]
        if bad:
            raise ValueError(f"scenarios differ in {', '.join(bad)}")
    if workers is not None and workers > 1 and len(scenarios) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            recs = list(ex.map(_run_one, scenarios))
    else:
        recs = [run(s) for s in scenarios]
    return compare_records(dict(zip(labels, recs)))


def compare_records(records: dict) -> Comparison:
    labels = list(records)
    t = records[labels[0]].t
    for k in labels[1:]:
        if records[k].t.shape != t.shape or not np.array_equal(records[k].t, t):
            raise ValueError(f"record {k!r} is on a different time grid")
    curves = {k: records[k].series["E"] for k in labels}
    sup, frac = {}, {}
    for a in labels:
        for b in labels:
            sup[(a, b)] = float(np.max(np.abs(curves[a] - curves[b])))
            frac[(a, b)] = float(np.mean(curves[a] <= curves[b]))
    return Comparison(labels, t, curves, sup, frac, records)


def has_energy_increase(rec: RunRecord, min_rise: float = 0.0) -> bool:
    """True when some interval between samples shows strictly rising E."""
    return bool(np.any(np.diff(rec.series["E"]) > min_rise))


# -- file emission -------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_series_csv(rec: RunRecord, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SERIES_COLUMNS)
        cols = [rec.series[c] for c in SERIES_COLUMNS]
        for row in zip(*cols):
            w.writerow([_fmt(v) for v in row])


def write_events_csv(log: EventLog, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("k", "t_k", "v_hold", "gap"))
        for k, t, v, gap in log.rows():
            w.writerow((k, _fmt(t), _fmt(v), "" if gap is None else _fmt(gap)))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return None if not math.isfinite(float(obj)) else float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def manifest(rec: RunRecord, scenario: Scenario) -> dict:
    m = {
        "scenario": scenario.to_flat(),
        "dt": rec.dt,
        "summary": rec.summary,
        "certificate": rec.certificate.to_json_dict() if rec.certificate else None,
        "events": {"times": rec.events.times, "values": rec.events.values},
    }
    if scenario.name == "benchmark-1d":
        m["reference_point_audit"] = reference_point_audit(scenario.problem)
    return _jsonable(m)


def write_manifest(rec: RunRecord, scenario: Scenario, path) -> None:
    Path(path).write_text(json.dumps(manifest(rec, scenario), indent=2, allow_nan=False) + "\n")


def write_gnuplot(path_stem, t, columns: dict, title: str, ylabel: str = "E(t)") -> None:
    """Write ``<stem>.dat`` and a ``<stem>.gp`` script that plots it."""
    stem = Path(path_stem)
    names = list(columns)
    with open(stem.with_suffix(".dat"), "w") as fh:
        fh.write("# t " + " ".join(n.replace(" ", "_") for n in names) + "\n")
        for i in range(len(t)):
            fh.write(" ".join(_fmt(v) for v in [t[i]] + [columns[n][i] for n in names]) + "\n")
    plots = ", ".join(f"'{stem.name}.dat' using 1:{j + 2} with lines title '{n}'"
                      for j, n in enumerate(names))
    stem.with_suffix(".gp").write_text(
        f"set title '{title}'\nset xlabel 't'\nset ylabel '{ylabel}'\n"
        f"set terminal pngcairo size 900,600\nset output '{stem.name}.png'\nplot {plots}\n")


def write_run(rec: RunRecord, scenario: Scenario, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_series_csv(rec, out / "series.csv")
    write_events_csv(rec.events, out / "events.csv")
    write_manifest(rec, scenario, out / "manifest.json")
    write_gnuplot(out / "energy", rec.t, {"E": rec.series["E"], "V": rec.series["V"]},
                  f"energy under {scenario.policy.label()}")
    return out


def write_comparison(cmp: Comparison, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "curves.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + cmp.labels)
        for i in range(len(cmp.t)):
            w.writerow([_fmt(cmp.t[i])] + [_fmt(cmp.curves[k][i]) for k in cmp.labels])
    with open(out / "comparison.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("a", "b", "sup_distance", "fraction_a_leq_b"))
        for a, b, d, f in cmp.table():
            w.writerow((a, b, _fmt(d), _fmt(f)))
    summ = {k: r.summary for k, r in cmp.records.items()}
    (out / "summaries.json").write_text(json.dumps(_jsonable(summ), indent=2) + "\n")
    write_gnuplot(out / "energy_compare", cmp.t, cmp.curves, "energy by sampling policy")
    return out
