import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from etwave import experiments as ex, triggers as tr, wavesim as ws

E0 = 5 * math.pi / 16


@pytest.fixture(scope="module")
def bench_grid():
    return ws.Grid1D.uniform(400, 0.9, horizon=10.0)


@pytest.fixture(scope="module")
def et_run():
    return ex.run(ex.benchmark_1d())


def state_with_boundary_velocity(grid, v):
    """A static field whose boundary node carries velocity ``v``."""
    z = np.zeros(grid.num_nodes)
    vel = np.zeros(grid.num_nodes)
    vel[-1] = v
    return ws.WaveState(0.0, z, z.copy(), vel)


def test_policy_validation():
    for bad in (lambda: tr.Periodic(0.0), lambda: tr.EventStatic(0.0, 0.1),
                lambda: tr.EventStatic(0.2, -1.0), lambda: tr.EventExpo(0.1, 0.0)):
        with pytest.raises(ValueError):
            bad()


def test_trigger_value_zero_deviation(bench_grid):
    s = state_with_boundary_velocity(bench_grid, 0.3)
    ctx = ws.BoundaryControlContext(0.41, v_hold=0.3)
    assert tr.trigger_value(s, ctx, 0.2, 0.1, 0.7) == pytest.approx(-0.2 * 0.7 - 0.1)


def test_trigger_value_zero_energy_threshold(bench_grid):
    ctx = ws.BoundaryControlContext(0.41)
    nu0 = 0.1
    for d in (0.3, 0.33, 0.32):
        s = state_with_boundary_velocity(bench_grid, d)
        f = tr.trigger_value(s, ctx, 0.2, nu0, 0.0)
        assert f == pytest.approx(d * d - nu0)
        assert (f >= 0) == (abs(d) >= math.sqrt(nu0))


def test_trigger_value_benchmark_numbers(bench_grid):
    s = state_with_boundary_velocity(bench_grid, 0.5)
    f = tr.trigger_value(s, ws.BoundaryControlContext(0.41), 0.2, 0.1, E0)
    assert f == pytest.approx(0.25 - 0.2 * E0 - 0.1, rel=1e-14)
    assert f == pytest.approx(-0.0463, abs=5e-5)
    assert f < 0


def test_trigger_weight(bench_grid):
    s = state_with_boundary_velocity(bench_grid, 0.5)
    ctx = ws.BoundaryControlContext(0.41)
    assert tr.trigger_value(s, ctx, 0.2, 0.1, 0.0, weight=4.0) == pytest.approx(0.9)


def test_should_update_dispatch(bench_grid):
    s = state_with_boundary_velocity(bench_grid, 0.0)
    ctx = ws.BoundaryControlContext(0.41)
    empty = tr.EventLog()
    started = tr.EventLog([0.0], [-1.0])
    assert tr.should_update(tr.Frozen(), 0.0, s, ctx, 1.0, empty)
    assert not tr.should_update(tr.Frozen(), 0.5, s, ctx, 1.0, started)
    assert tr.should_update(tr.Continuous(), 0.01, s, ctx, 1.0, started)
    assert tr.should_update(tr.Periodic(0.36), 0.36, s, ctx, 1.0, started)
    assert not tr.should_update(tr.Periodic(0.36), 0.35, s, ctx, 1.0, started)
    assert not tr.should_update(tr.Periodic(0.36), 0.71, s, ctx, 1.0, tr.EventLog([0.0, 0.36], [0, 0]))
    assert not tr.should_update(tr.Continuous(), 0.0, s, ctx, 1.0, started)


def test_eventexpo_matches_static_at_zero(bench_grid):
    ctx = ws.BoundaryControlContext(0.41)
    log = tr.EventLog([-1.0], [0.0])  # log already open
    expo, static = tr.EventExpo(0.1, 0.5, gamma=0.2), tr.EventStatic(0.2, 0.1)
    for d in np.linspace(0.0, 1.0, 41):
        s = state_with_boundary_velocity(bench_grid, d)
        assert (tr.policy_trigger_value(expo, 0.0, s, ctx, 0.3)
                == tr.policy_trigger_value(static, 0.0, s, ctx, 0.3))
        assert (tr.should_update(expo, 0.0, s, ctx, 0.3, log)
                == tr.should_update(static, 0.0, s, ctx, 0.3, log))
    assert expo.threshold_offset(2.0) == pytest.approx(0.1 * math.exp(-2.0))


def test_apply_update_initial_latch(bench_grid):
    sc = ex.benchmark_1d()
    z1 = ex.make_profile(sc.z1)
    ctx = ws.BoundaryControlContext.for_problem(0.1, -1.0)
    s = ws.init(bench_grid, ex.make_profile(sc.z0), z1, u0=ctx.alpha_at_gamma1)
    ctx2, log = tr.apply_update(s, bench_grid, ctx, tr.EventLog(), 0.0)
    assert ctx2.v_hold == pytest.approx(-1.0, abs=1e-12)
    assert ctx2.u == pytest.approx(0.1 * (math.pi + 1), rel=1e-12)
    assert ctx2.u == pytest.approx(0.4142, abs=5e-5)
    assert log.times == [0.0] and log.values == [ctx2.v_hold]


def test_apply_update_rejects_same_instant(bench_grid):
    s = state_with_boundary_velocity(bench_grid, 0.2)
    ctx = ws.BoundaryControlContext(0.41)
    ctx, log = tr.apply_update(s, bench_grid, ctx, tr.EventLog(), 0.0)
    with pytest.raises(RuntimeError):
        tr.apply_update(s, bench_grid, ctx, log, 0.0)
    with pytest.raises(RuntimeError):
        tr.apply_update(s, bench_grid, ctx, tr.EventLog([1.0], [0.0]), 0.5)


def test_apply_update_zero_velocity_gives_zero_control(bench_grid):
    s = state_with_boundary_velocity(bench_grid, 0.0)
    ctx = ws.BoundaryControlContext(0.41, v_hold=0.7)
    ctx2, _ = tr.apply_update(s, bench_grid, ctx, tr.EventLog([0.0], [0.7]), 0.5)
    assert ctx2.u == 0.0


def test_event_log():
    log = tr.EventLog([0.0, 0.5, 0.6, 1.6], [1, 2, 3, 4])
    assert log.gaps == pytest.approx([0.5, 0.1, 1.0])
    assert log.min_gap == pytest.approx(0.1)
    assert tr.EventLog([0.0], [1.0]).min_gap == math.inf
    rows = list(log.rows())
    assert rows[0] == (0, 0.0, 1, None) and rows[2][3] == pytest.approx(0.1)


@pytest.mark.parametrize("text,expected", [
    ("continuous", tr.Continuous()),
    ("frozen", tr.Frozen()),
    ("periodic:0.36", tr.Periodic(0.36)),
    ("event", tr.EventStatic(0.2, 0.1)),
    ("event:0.3,0.05", tr.EventStatic(0.3, 0.05)),
    ("eventexp:0.1,0.01", tr.EventExpo(0.1, 0.01, 0.2)),
])
def test_parse_policy(text, expected):
    p = tr.parse_policy(text)
    assert p == expected
    assert tr.parse_policy(tr.format_policy(p)) == p


@pytest.mark.parametrize("text", ["periodic", "bogus", "event:0.2", "periodic:-1", "frozen:1"])
def test_parse_policy_rejects(text):
    with pytest.raises(ValueError):
        tr.parse_policy(text)


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-3, 100.0), st.floats(1e-3, 1.0), st.floats(1e-3, 10.0))
def test_format_round_trip(tau, g, nu):
    for p in (tr.Periodic(tau), tr.EventStatic(g, nu), tr.EventExpo(nu, tau, 0.2)):
        assert tr.parse_policy(tr.format_policy(p)) == p


def test_trigger_sign_pattern_between_events(et_run):
    f, flag = et_run.series["trigger_value"], et_run.series["event_flag"]
    fired = np.nonzero(flag)[0]
    assert fired[0] == 0
    assert np.all(f[fired[1:]] >= 0)
    quiet = np.ones_like(flag, dtype=bool)
    quiet[fired] = False
    quiet[-1] = False  # no update is made at the last sample
    assert np.all(f[quiet] < 0)


def test_event_times_match_log(et_run):
    t = et_run.series["t"]
    assert np.allclose(t[et_run.series["event_flag"] == 1], et_run.events.times)
    assert np.all(np.diff(et_run.events.times) > 0)


def test_zeno_free_gap(et_run):
    assert et_run.events.min_gap >= et_run.dt
    assert et_run.events.min_gap >= 10 * et_run.dt


def test_larger_nu0_fires_later():
    sc = ex.benchmark_1d().replace(horizon=4.0)
    first = []
    for nu in (0.05, 0.1, 0.2):
        rec = ex.run(sc.with_policy(tr.EventStatic(0.2, nu)))
        first.append(rec.events.times[1] if len(rec.events) > 1 else math.inf)
    assert first[0] <= first[1] <= first[2]


def test_continuous_zero_deviation(bench_grid):
    sc = ex.benchmark_1d(tr.Continuous()).replace(horizon=1.0)
    grid = sc.grid()
    ctx = ws.BoundaryControlContext.for_problem(0.1)
    s = ws.init(grid, ex.make_profile(sc.z0), ex.make_profile(sc.z1), u0=ctx.alpha_at_gamma1)
    log = tr.EventLog()
    for n in range(round(1.0 / grid.dt)):
        t = n * grid.dt
        assert tr.should_update(tr.Continuous(), t, s, ctx, 0.0, log)
        ctx, log = tr.apply_update(s, grid, ctx, log, t)
        s = ws.with_control(s, grid, ctx)
        assert tr.deviation(s, ctx) == pytest.approx(0.0, abs=1e-12)
        s = ws.step(s, grid, ctx)
