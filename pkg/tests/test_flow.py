import math
import warnings

import numpy as np
import pytest

from dhymflow import (BackgroundMetric, CflViolation, FlowConfig, FlowState, GeometryParams,
                      InputError, NotConverged, PhaseOutOfRange, branch_profile, build_psi0,
                      diagnostics, find_xi, make_grid, phase, rhs, run, step, xi_branch)
from dhymflow.flow import face_slopes, node_derivative, stable_dt

FLAGSHIP = GeometryParams(3, 3, 18, 3)
BG = BackgroundMetric(3)


@pytest.fixture(scope="module")
def cp():
    return find_xi(FLAGSHIP)


def test_background_metric():
    x = np.linspace(1, 3, 101)
    Q = BG(x)
    assert Q[0] == 0 and Q[-1] == 0
    assert np.all(Q[1:-1] > 0)
    assert BG(2.0) == pytest.approx(0.5)


def test_background_metric_from_potential():
    # Q = u'' o (u')^{-1} for u'(rho) = (b e^rho + 1)/(e^rho + 1)
    b = 3.0
    rho = np.linspace(-5, 5, 41)
    up = (b * np.exp(rho) + 1) / (np.exp(rho) + 1)
    upp = (b - 1) * np.exp(rho) / (np.exp(rho) + 1) ** 2
    assert np.allclose(BG(up), upp, rtol=1e-12, atol=1e-14)


def test_make_grid():
    x = make_grid(3, 400)
    assert x.size == 402 and x[0] == 1 and x[-1] == 3
    assert np.all(np.diff(x) > 0)
    assert np.allclose(make_grid(3, 8, grading=1.0), np.linspace(1, 3, 10))
    with pytest.raises(InputError):
        make_grid(3, 10, grading=0.5)


def test_node_derivative_exact_for_quadratics():
    x = make_grid(3, 30)
    d = node_derivative(x, x ** 2)
    assert np.allclose(d[1:-1], 2 * x[1:-1], rtol=1e-12)


def test_phase_of_linear_profile():
    x = np.linspace(1, 3, 51)
    th = phase(FlowState(x, x.copy()))
    assert np.allclose(th, 3 * math.pi / 4, atol=1e-14)


def test_phase_of_branch_is_constant(cp):
    x = np.linspace(1, 3, 4001)
    pr = branch_profile(FLAGSHIP, cp.xi + 0.2, x)
    th = phase(FlowState(x, pr.values))
    sel = (x > 1.05) & (x < 3)
    assert np.max(np.abs(th[sel] - (math.pi / 2 - math.atan(pr.slope_at)))) < 1e-6


def test_phase_of_psi0_below_pi():
    x = make_grid(3, 400)
    ip = build_psi0(FLAGSHIP, x)
    assert phase(FlowState(x, ip.values)).max() < math.pi


def test_phase_out_of_range_raises():
    x = np.linspace(1, 3, 21)
    with pytest.raises(PhaseOutOfRange):
        phase(FlowState(x, np.linspace(18, 3, 21)))


def test_rhs_stationary_on_branch_second_order(cp):
    errs = []
    for N in (100, 200, 400):
        x = make_grid(3, N)
        pr = branch_profile(FLAGSHIP, cp.xi + 0.2, x)
        r = rhs(FlowState(x, pr.values), BG)
        errs.append(np.max(np.abs(r[x >= 1.05])))
    assert errs[-1] < 1e-6
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5


def test_rhs_on_psi0_nonnegative():
    x = make_grid(3, 400)
    r = rhs(FlowState(x, build_psi0(FLAGSHIP, x).values), BG)
    assert r[0] == 0 and r[-1] == 0
    assert r.min() >= -1e-10


def test_step_zero_is_identity():
    x = make_grid(3, 50)
    st = FlowState(x, build_psi0(FLAGSHIP, x).values)
    new = step(st, BG, 0.0)
    assert np.array_equal(new.psi, st.psi) and new.t == 0


def test_step_monotone_start():
    x = make_grid(3, 100)
    st = FlowState(x, build_psi0(FLAGSHIP, x).values)
    new = step(st, BG, stable_dt(st, BG, 0.4))
    assert np.all(new.psi >= st.psi - 1e-12)
    assert new.psi[0] == 3 and new.psi[-1] == 18


def test_step_cfl_violation():
    x = make_grid(3, 100)
    st = FlowState(x, build_psi0(FLAGSHIP, x).values)
    with pytest.raises(CflViolation):
        step(st, BG, 2 * stable_dt(st, BG, 0.5))


def test_two_half_steps_vs_full_step():
    x = make_grid(3, 60)
    st = FlowState(x, build_psi0(FLAGSHIP, x).values)
    diffs = []
    for frac in (0.4, 0.2):
        dt = stable_dt(st, BG, frac)
        full = step(st, BG, dt)
        half = step(step(st, BG, dt / 2), BG, dt / 2)
        diffs.append(np.max(np.abs(full.psi - half.psi)))
    # local splitting error is O(dt^2)
    assert diffs[0] / diffs[1] == pytest.approx(4.0, rel=0.05)


def test_diagnostics_needs_two_states():
    x = make_grid(3, 20)
    with pytest.raises(InputError):
        diagnostics([FlowState(x, build_psi0(FLAGSHIP, x).values)], BG)


def test_diagnostics_on_short_sequence(cp):
    x = make_grid(3, 60)
    st = FlowState(x, build_psi0(FLAGSHIP, x).values)
    states = [st]
    for _ in range(3):
        for _ in range(50):
            st = step(st, BG, stable_dt(st, BG, 0.4))
        states.append(st)
    d = diagnostics(states, BG, limit=xi_branch(FLAGSHIP, cp, x))
    assert d.monotonicity_violation == 0
    assert d.max_comparison_violation <= 0
    assert d.theta_excursion == 0
    assert d.min_psidot >= -1e-12


def test_diagnostics_detects_decrease():
    x = make_grid(3, 30)
    a = build_psi0(FLAGSHIP, x).values
    b = a.copy()
    b[5] -= 1e-3
    d = diagnostics([FlowState(x, a), FlowState(x, b, 1.0)], BG)
    assert d.monotonicity_violation == pytest.approx(1e-3)


def test_run_not_converged_warns():
    with pytest.warns(NotConverged):
        res = run(FLAGSHIP, cfg=FlowConfig(n_interior=32, t_max=0.5, sample_every=50))
    assert not res.converged and res.state.t == pytest.approx(0.5)


def test_run_config_validation():
    with pytest.raises(InputError):
        run(FLAGSHIP, cfg=FlowConfig(delta=0.6))
    with pytest.raises(InputError):
        run(FLAGSHIP, cfg=FlowConfig(n_interior=8))
    with pytest.raises(InputError):
        run(FLAGSHIP, cfg=FlowConfig(dt_safety=0.6))


def test_run_rejects_supercritical_start():
    x = np.linspace(1, 3, 21)

    class Bad:
        def __call__(self, y):
            return 18 - 7.5 * (np.asarray(y) - 1)
    with pytest.raises(PhaseOutOfRange), warnings.catch_warnings():
        warnings.simplefilter("ignore")
        run(FLAGSHIP, ip=Bad(), cfg=FlowConfig(n_interior=19))


def test_run_deterministic():
    cfg = FlowConfig(n_interior=24, t_max=5.0, sample_every=100)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        a = run(FLAGSHIP, cfg=cfg)
        b = run(FLAGSHIP, cfg=cfg)
    assert np.array_equal(a.state.psi, b.state.psi)
    assert a.series == b.series


def test_flagship_series_and_limit(flagship_run, cp):
    res = flagship_run
    assert res.converged and res.limit_kind == "xi-branch"
    assert res.max_rhs < 1e-8
    row = res.series[-1]
    assert set(row) == {"t", "sup_dist", "c_spread", "theta_min", "theta_max", "min_psidot"}
    ts = [r["t"] for r in res.series]
    assert ts == sorted(ts)
    # pinned endpoint stays q while the interior climbs to xi
    x, psi = res.state.grid, res.state.psi
    assert psi[0] == 3.0
    assert psi[1] > 3.9 and abs(psi[1] - cp.xi) < 1e-2
    assert res.diagnostics.c_spread_monotone in (True, False)


def test_flagship_refinement(flagship_run):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        coarse = run(FLAGSHIP, cfg=FlowConfig(n_interior=100))
    assert coarse.converged
    assert flagship_run.diagnostics.sup_dist_to_limit < coarse.diagnostics.sup_dist_to_limit


def test_stable_run(stable_run):
    res = stable_run
    assert res.converged and res.limit_kind == "smooth" and res.certificate is None
    assert res.state.psi[0] == 5.0
    # smooth limit: psi continuous at x = 1
    assert abs(res.state.psi[1] - 5.0) < 1e-3
    assert res.diagnostics.sup_dist_to_limit < 1e-5


def test_face_slopes_flat_at_steady_state(flagship_run):
    xm, cf = face_slopes(flagship_run.state, BackgroundMetric(3))
    win = (xm >= 1.05) & (xm <= 2.95)
    assert np.ptp(cf[win]) < 1e-6
