import csv
import json
import math

import numpy as np
import pytest

from etwave import certcore, experiments as ex, triggers as tr
from etwave.certcore import Multipliers


def synthetic_record(V, t=None, cert=None):
    t = np.arange(len(V), dtype=float) * 0.1 if t is None else t
    series = {c: np.zeros(len(V)) for c in ex.SERIES_COLUMNS}
    series.update(t=t, V=np.asarray(V, float), E=np.asarray(V, float))
    return ex.RunRecord(series, tr.EventLog(), {}, cert, 0.1)


@pytest.fixture(scope="module")
def et_run():
    return ex.run(ex.benchmark_1d())


def test_make_profile():
    x = np.linspace(0, math.pi, 5)
    assert np.allclose(ex.make_profile("bench-position")(x), np.sin(x / 2))
    assert np.allclose(ex.make_profile("sin(3*x/2)")(x), np.sin(1.5 * x))
    assert ex.make_profile("zero")(x).shape == x.shape


@pytest.mark.parametrize("expr", ["__import__('os')", "x.__class__", "open('f')", "'a'", "lambda: 1", "[x]"])
def test_make_profile_rejects(expr):
    with pytest.raises(ValueError):
        ex.make_profile(expr)


def test_scenario_validation():
    base = ex.benchmark_1d()
    for kw in ({"horizon": 0.0}, {"record_stride": 0}, {"cfl": 1.2}, {"x0": 5.0}, {"z0": "bogus(x)"}):
        with pytest.raises(ValueError):
            base.replace(**kw)


def test_flat_round_trip():
    sc = ex.benchmark_1d()
    assert ex.Scenario.from_flat(sc.to_flat()) == sc
    sc2 = sc.with_policy(tr.Periodic(0.36)).replace(multipliers=None)
    assert ex.Scenario.from_flat(sc2.to_flat()) == sc2


def test_benchmark_preset_constants():
    sc = ex.benchmark_1d()
    pd = sc.problem
    assert (pd.gamma, pd.nu0, pd.alpha1, sc.x0, pd.n) == (0.2, 0.1, 0.1, -1.0, 1)
    assert pd.R == pytest.approx(math.pi + 1) and pd.c_omega == 0.5
    assert sc.policy == tr.EventStatic(0.2, 0.1)


def test_run_deterministic():
    sc = ex.benchmark_1d().replace(horizon=2.0, n_cells=100)
    a, b = ex.run(sc), ex.run(sc)
    for c in ex.SERIES_COLUMNS:
        assert np.array_equal(a.series[c], b.series[c])
    assert a.events == b.events and a.summary == b.summary


def test_run_record_invariants(et_run):
    t = et_run.t
    assert np.all(np.diff(t) > 0)
    assert t[-1] == pytest.approx(10.0, abs=1e-9)
    assert et_run.summary["event_count"] == len(et_run.events) == int(et_run.series["event_flag"].sum())
    assert et_run.summary["E_final"] < et_run.summary["E_initial"]


def test_record_stride():
    sc = ex.benchmark_1d().replace(horizon=1.0, n_cells=100, record_stride=7)
    rec = ex.run(sc)
    full = ex.run(sc.replace(record_stride=1))
    assert np.array_equal(rec.t[:-1], full.t[::7][: len(rec.t) - 1])
    assert rec.t[-1] == full.t[-1]


def test_continuous_energy_monotone():
    rec = ex.run(ex.benchmark_1d(tr.Continuous()))
    assert rec.summary["energy_monotone"]
    E = rec.series["E"]
    assert np.all(np.diff(E) <= 1e-8 * E[0])


def test_frozen_control_is_the_initial_datum():
    rec = ex.run(ex.benchmark_1d(tr.Frozen()).replace(horizon=3.0))
    assert len(rec.events) == 1
    assert np.allclose(rec.series["u"], 0.1 * (math.pi + 1))


def test_fit_decay_rate_exact():
    t = np.linspace(0, 5, 200)
    delta = 0.137
    rec = synthetic_record(3.0 * np.exp(-2 * delta * t), t)
    assert ex.fit_decay_rate(rec) == pytest.approx(delta, abs=1e-10)
    assert ex.fit_decay_rate(synthetic_record(np.full(50, 2.0))) == pytest.approx(0.0, abs=1e-12)


def test_fit_decay_rate_errors():
    rec = synthetic_record(np.ones(30))
    with pytest.raises(ValueError):
        ex.fit_decay_rate(rec, (0.0, 0.5))
    with pytest.raises(ValueError):
        ex.fit_decay_rate(synthetic_record(np.r_[np.ones(20), 0.0]))


def test_fit_decay_rate_default_window_uses_radius():
    t = np.linspace(0, 10, 101)
    V = np.where(t < 5, 100 * np.exp(-t), 100 * np.exp(-5.0))
    cert = certcore.certify(ex.benchmark_1d().problem, Multipliers(0.05, 0.25, 0.005))
    rec = synthetic_record(V, t, cert)
    # the plateau sits below 1.05 r only after t = 5 when r << 100 e^-5
    lim = np.log(100 / (1.05 * cert.radius))
    assert lim < 5
    assert ex.fit_decay_rate(rec) == pytest.approx(0.5, abs=1e-9)


def test_fitted_rate_beats_certificate(et_run):
    assert et_run.summary["fitted_delta"] >= et_run.certificate.delta_used


def test_attractor_absorption(et_run):
    r = et_run.certificate.radius
    V = et_run.series["V"]
    inside = np.nonzero(V < r)[0]
    assert inside.size
    assert np.all(V[inside[0]:] < 1.2 * r)
    assert et_run.summary["attractor_entry_time"] == et_run.t[inside[0]]


def test_lyapunov_contract_large_amplitude():
    # start far outside the attractor so the contract is actually exercised
    sc = ex.benchmark_1d().replace(z0="10*sin(x/2)", z1="10*sin(3*x/2)", horizon=40.0, n_cells=200)
    rec = ex.run(sc)
    res = ex.lyapunov_contract(rec)
    assert res["samples_outside"] > 1000
    assert res["fraction"] >= 0.99


def test_lyapunov_contract_requires_certificate():
    with pytest.raises(ValueError):
        ex.lyapunov_contract(synthetic_record(np.ones(20)))


def test_sandwich_on_runs(et_run):
    c = 2 * (math.pi + 1)
    assert ex.sandwich_violation(et_run, c) <= 1e-9


def test_compare_identical():
    sc = ex.benchmark_1d().replace(horizon=1.0, n_cells=100)
    cmp = ex.compare([sc, sc], labels=["a", "b"])
    assert cmp.sup_distance[("a", "b")] == 0.0
    assert cmp.fraction_leq[("a", "b")] == 1.0


def test_compare_mismatched_grid():
    sc = ex.benchmark_1d().replace(horizon=1.0, n_cells=100)
    with pytest.raises(ValueError):
        ex.compare([sc, sc.replace(n_cells=120)], labels=["a", "b"])
    with pytest.raises(ValueError):
        ex.compare([sc, sc], labels=["a", "a"])


def test_compare_parallel_matches_serial():
    sc = ex.benchmark_1d().replace(horizon=1.0, n_cells=100)
    scs = [sc.with_policy(p) for p in (tr.Continuous(), tr.Periodic(0.3))]
    a, b = ex.compare(scs, workers=1), ex.compare(scs, workers=2)
    for k in a.labels:
        assert np.array_equal(a.curves[k], b.curves[k])
    assert a.sup_distance == b.sup_distance


def test_energy_increase_detection():
    rec = ex.run(ex.benchmark_1d(tr.Periodic(3.0)))
    assert ex.has_energy_increase(rec)
    assert not rec.summary["energy_monotone"]
    assert not ex.has_energy_increase(ex.run(ex.benchmark_1d(tr.Continuous()).replace(horizon=2.0)))


def test_reference_point_audit():
    audit = ex.reference_point_audit(ex.benchmark_1d().problem)
    assert audit["minor_verdict"] == audit["eigen_verdict"] is False
    assert audit["rows34_minor"] == pytest.approx(-0.002017, abs=1e-6)
    assert audit["m3_feasible"] and not audit["agrees_with_claim"]


def test_write_run(tmp_path):
    sc = ex.benchmark_1d().replace(horizon=1.0, n_cells=100)
    rec = ex.run(sc)
    out = ex.write_run(rec, sc, tmp_path / "run")
    for name in ("series.csv", "events.csv", "manifest.json", "energy.dat", "energy.gp"):
        assert (out / name).exists()
    with open(out / "series.csv") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == ex.SERIES_COLUMNS and len(rows) == len(rec.t) + 1
    # full-precision floats round-trip
    assert float(rows[5][1]) == rec.series["E"][4]
    man = json.loads((out / "manifest.json").read_text())
    assert man["summary"]["event_count"] == len(rec.events)
    assert "reference_point_audit" in man
    assert ex.Scenario.from_flat(man["scenario"]) == sc
    with open(out / "events.csv") as fh:
        ev = list(csv.reader(fh))
    assert ev[0] == ["k", "t_k", "v_hold", "gap"] and len(ev) == len(rec.events) + 1


def test_write_comparison(tmp_path):
    sc = ex.benchmark_1d().replace(horizon=1.0, n_cells=100)
    cmp = ex.compare([sc.with_policy(tr.Continuous()), sc.with_policy(tr.Frozen())])
    out = ex.write_comparison(cmp, tmp_path / "cmp")
    for name in ("curves.csv", "comparison.csv", "summaries.json", "energy_compare.dat", "energy_compare.gp"):
        assert (out / name).exists()
    with open(out / "comparison.csv") as fh:
        assert len(list(csv.reader(fh))) == 1 + 2
