"""Explicit integrator for the rotationally symmetric cotangent flow on [1, b].

In flux form the flow reads psi_t = Q(x) d/dx cot(theta), where theta is the
phase of (psi' + i)(psi/x + i)^(n-1).  The discretization keeps that
structure: cot(theta) lives on cell faces, the update is a difference of face
values, and a steady state therefore has exactly constant face slope.

Face values use psi' from the two neighbours and a weighted average for
psi/x.  The weight is 1/2 (centred) where the cell Peclet number is small and
moves toward the right neighbour where the first-order term dominates, which
keeps the scheme monotone near the steep layer at x = 1.  The grid is graded
as x = 1 + (b - 1) r^2 with r uniform, concentrating nodes at the
exceptional end.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .aux_family import CriticalParams, branch_solve, find_xi, xi_branch
from .cohomology import GeometryParams, Verdict, classify, slope
from .errors import CflViolation, InputError, NotConverged, PhaseOutOfRange
from .initial_data import Certificate, InitialProfile, build_psi0, certify

PHASE_TOL = 1e-12


def default_Q(b: float) -> Callable:
    """Q for u'(rho) = (b e^rho + 1)/(e^rho + 1): Q(x) = (x-1)(b-x)/(b-1)."""
    b = float(b)
    return lambda x: (np.asarray(x, dtype=float) - 1.0) * (b - np.asarray(x, dtype=float)) / (b - 1.0)


@dataclass(frozen=True)
class BackgroundMetric:
    b: float
    Q: Optional[Callable] = None

    def __post_init__(self):
        object.__setattr__(self, "b", float(self.b))
        if self.Q is None:
            object.__setattr__(self, "Q", default_Q(self.b))

    def __call__(self, x):
        return self.Q(x)


def make_grid(b, n_interior: int, grading: float = 2.0) -> np.ndarray:
    """n_interior + 2 nodes on [1, b], x = 1 + (b-1) r^grading with r uniform."""
    if n_interior < 1:
        raise InputError("need at least one interior node")
    if grading < 1:
        raise InputError("grading exponent must be >= 1")
    r = np.linspace(0.0, 1.0, n_interior + 2)
    x = 1.0 + (float(b) - 1.0) * r ** grading
    x[-1] = float(b)
    return x


def node_derivative(x: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """Three-point derivative on a nonuniform grid; two-point at the ends."""
    d = np.empty_like(psi)
    h0 = x[1:-1] - x[:-2]
    h1 = x[2:] - x[1:-1]
    d[1:-1] = (h0 * h0 * psi[2:] + (h1 * h1 - h0 * h0) * psi[1:-1] - h1 * h1 * psi[:-2]) / (h0 * h1 * (h0 + h1))
    d[0] = (psi[1] - psi[0]) / (x[1] - x[0])
    d[-1] = (psi[-1] - psi[-2]) / (x[-1] - x[-2])
    return d


def _arccot(v):
    return np.pi / 2 - np.arctan(v)


def phase_of(x: np.ndarray, psi: np.ndarray, n: int = 3) -> np.ndarray:
    return _arccot(node_derivative(x, psi)) + (n - 1) * _arccot(psi / x)


@dataclass
class FlowState:
    grid: np.ndarray
    psi: np.ndarray
    t: float = 0.0
    n: int = 3

    @property
    def theta(self) -> np.ndarray:
        return phase(self)

    def copy(self) -> "FlowState":
        return FlowState(self.grid, self.psi.copy(), self.t, self.n)


def phase(state: FlowState) -> np.ndarray:
    """Node phases arccot(psi') + (n-1) arccot(psi/x); raises outside (0, pi)."""
    th = phase_of(state.grid, state.psi, state.n)
    if not (np.all(th > -PHASE_TOL) and np.all(th < np.pi + PHASE_TOL)):
        raise PhaseOutOfRange(f"phase left (0, pi) at t={state.t}: range [{th.min()}, {th.max()}]")
    return th


class _Kernel:
    """Precomputed geometry for one grid; all methods take raw psi arrays."""

    def __init__(self, x: np.ndarray, bg: BackgroundMetric, n: int):
        self.x = x
        self.n = n
        self.hf = np.diff(x)
        self.hc = 0.5 * (x[2:] - x[:-2])
        self.xl, self.xr = x[:-1], x[1:]
        self.xm = 0.5 * (self.xl + self.xr)
        self.Q = np.asarray(bg(x), dtype=float)
        self.Qi = self.Q[1:-1]
        self.hh = self.hf[1:] * self.hf[:-1]

    def faces(self, psi: np.ndarray):
        """(cot, re, im, d) of (d + i)(psibar/xbar + i)^(n-1) on each face."""
        d = (psi[1:] - psi[:-1]) / self.hf
        pm = 0.5 * (psi[1:] + psi[:-1])
        pe = self.hf * (1.0 + d * d) * (self.n - 1) * self.xm / (self.xm * self.xm + pm * pm)
        w = np.maximum(0.5, 1.0 - 1.0 / np.maximum(pe, 1e-300))
        u = ((1.0 - w) * psi[:-1] + w * psi[1:]) / ((1.0 - w) * self.xl + w * self.xr)
        a, bi = u, np.ones_like(u)
        for _ in range(self.n - 2):
            a, bi = a * u - bi, a + bi * u
        re = d * a - bi
        im = a + d * bi
        return re / im, re, im, d

    def rhs(self, psi: np.ndarray):
        cf, re, im, d = self.faces(psi)
        out = np.zeros_like(psi)
        out[1:-1] = self.Qi * (cf[1:] - cf[:-1]) / self.hc
        return out, cf, re, im, d

    def dt_unit(self, re, im, d) -> float:
        """min h_l h_r / D_i with D = Q csc^2(theta) / (1 + psi'^2) over adjacent faces."""
        inv = (re * re + im * im) / (im * im * (1.0 + d * d))
        D = self.Qi * np.maximum(inv[1:], inv[:-1])
        return float(np.min(self.hh / D))


_KERNELS: dict = {}


def _kernel(state: FlowState, bg: BackgroundMetric) -> _Kernel:
    key = (id(state.grid), id(bg), state.n)
    k = _KERNELS.get(key)
    if k is None or k.x is not state.grid:
        _KERNELS.clear()
        k = _KERNELS[key] = _Kernel(state.grid, bg, state.n)
    return k


def rhs(state: FlowState, bg: BackgroundMetric) -> np.ndarray:
    """psi_t at every node; the endpoint entries are exactly 0."""
    return _kernel(state, bg).rhs(state.psi)[0]


def face_slopes(state: FlowState, bg: BackgroundMetric):
    """(face midpoints, cot theta on faces)."""
    k = _kernel(state, bg)
    return k.xm, k.faces(state.psi)[0]


def stable_dt(state: FlowState, bg: BackgroundMetric, safety: float = 0.5) -> float:
    k = _kernel(state, bg)
    _, re, im, d = k.faces(state.psi)
    return safety * k.dt_unit(re, im, d)


def step(state: FlowState, bg: BackgroundMetric, dt: float, cfl_safety: float = 0.5) -> FlowState:
    """One explicit Euler step; endpoints stay pinned."""
    if dt < 0:
        raise InputError("dt must be nonnegative")
    k = _kernel(state, bg)
    r, _, re, im, d = k.rhs(state.psi)
    bound = cfl_safety * k.dt_unit(re, im, d)
    if dt > bound * (1 + 1e-12):
        raise CflViolation(f"dt={dt:.6g} exceeds the stability bound {bound:.6g}")
    new = FlowState(state.grid, state.psi + dt * r, state.t + dt, state.n)
    new.psi[0], new.psi[-1] = state.psi[0], state.psi[-1]
    phase(new)
    return new


@dataclass(frozen=True)
class FlowConfig:
    n_interior: int = 400
    delta: float = 0.05
    dt_safety: float = 0.4
    cfl_safety: float = 0.5
    stop_tol: float = 1e-8
    stop_samples: int = 10
    t_max: float = 1e6
    sample_every: int = 2000
    grading: float = 2.0

    def validate(self, b: float) -> None:
        if self.n_interior < 16:
            raise InputError("grid_n must be >= 16")
        if not 0 < self.delta < (b - 1) / 4:
            raise InputError(f"delta must lie in (0, (b-1)/4) = (0, {(b - 1) / 4}), got {self.delta}")
        if not self.stop_tol > 0:
            raise InputError("stop_tol must be positive")
        if not 0 < self.dt_safety <= self.cfl_safety:
            raise InputError("need 0 < dt_safety <= cfl_safety")
        if self.sample_every < 1 or self.stop_samples < 1:
            raise InputError("sample_every and stop_samples must be positive")
        if not self.t_max > 0:
            raise InputError("t_max must be positive")


@dataclass
class FlowDiagnostics:
    min_psidot: float
    monotonicity_violation: float  # max over consecutive samples of psi_prev - psi
    max_comparison_violation: float
    theta_range: tuple
    theta_initial_range: tuple
    theta_excursion: float  # how far theta left the initial range
    c_derivative_min: float  # min of the discrete (cot theta)'
    c_profile_x: np.ndarray = field(repr=False)
    c_profile: np.ndarray = field(repr=False)
    c_spread: float = math.nan
    c_level: float = math.nan
    sup_dist_to_limit: float = math.nan
    collar_error: float = math.nan
    c_spread_monotone: bool = True


class FlowMonitor:
    """Folds sampled states into :class:`FlowDiagnostics`."""

    def __init__(self, bg: BackgroundMetric, limit: Optional[np.ndarray], delta: float, b: float):
        self.bg, self.limit, self.delta, self.b = bg, limit, delta, float(b)
        self.prev: Optional[np.ndarray] = None
        self.min_psidot = math.inf
        self.mono = 0.0
        self.comparison = -math.inf
        self.th_lo, self.th_hi = math.inf, -math.inf
        self.th0 = None
        self.cder = math.inf
        self.spreads: list = []
        self.last = None

    def observe(self, state: FlowState) -> dict:
        k = _kernel(state, self.bg)
        r, cf, _, _, _ = k.rhs(state.psi)
        th = phase(state)
        if self.th0 is None:
            self.th0 = (float(th.min()), float(th.max()))
        self.th_lo = min(self.th_lo, float(th.min()))
        self.th_hi = max(self.th_hi, float(th.max()))
        self.min_psidot = min(self.min_psidot, float(r[1:-1].min()))
        if self.prev is not None:
            self.mono = max(self.mono, float(np.max(self.prev - state.psi)))
        self.prev = state.psi.copy()
        self.cder = min(self.cder, float(np.min((cf[1:] - cf[:-1]) / k.hc)))

        win = (k.xm >= 1 + self.delta) & (k.xm <= self.b - self.delta)
        spread = float(np.ptp(cf[win]))
        self.spreads.append(spread)
        sup = math.nan
        if self.limit is not None:
            self.comparison = max(self.comparison, float(np.max(state.psi - self.limit)))
            sel = state.grid >= 1 + self.delta - 1e-12
            sup = float(np.max(np.abs(state.psi - self.limit)[sel]))
        self.last = (state, cf, k.xm, win, sup)
        return {"t": state.t, "sup_dist": sup, "c_spread": spread,
                "theta_min": float(th.min()), "theta_max": float(th.max()),
                "min_psidot": float(r[1:-1].min())}

    def finish(self) -> FlowDiagnostics:
        state, cf, xm, win, sup = self.last
        excursion = max(0.0, self.th0[0] - self.th_lo, self.th_hi - self.th0[1])
        collar = math.nan
        if self.limit is not None:
            i = int(np.argmin(np.abs(state.grid - (1 + self.delta))))
            collar = float(abs(state.psi[i] - self.limit[i]))
        sp = np.asarray(self.spreads)
        return FlowDiagnostics(
            min_psidot=self.min_psidot, monotonicity_violation=self.mono,
            max_comparison_violation=self.comparison if self.limit is not None else math.nan,
            theta_range=(self.th_lo, self.th_hi), theta_initial_range=self.th0,
            theta_excursion=excursion, c_derivative_min=self.cder,
            c_profile_x=xm.copy(), c_profile=cf.copy(),
            c_spread=float(np.ptp(cf[win])), c_level=float(np.mean(cf[win])),
            sup_dist_to_limit=sup, collar_error=collar,
            c_spread_monotone=bool(np.all(np.diff(sp) <= 1e-14)) if sp.size > 1 else True)


def diagnostics(states, bg: BackgroundMetric, limit=None, delta: float = 0.05) -> FlowDiagnostics:
    """Diagnostics for an explicit sequence of sampled states (at least two)."""
    states = list(states)
    if len(states) < 2:
        raise InputError("diagnostics needs at least two states")
    mon = FlowMonitor(bg, limit, delta, states[0].grid[-1])
    for s in states:
        mon.observe(s)
    return mon.finish()


@dataclass
class RunResult:
    state: FlowState
    diagnostics: FlowDiagnostics
    series: list  # of dicts with keys t, sup_dist, c_spread, theta_min, theta_max, min_psidot
    limit: Optional[np.ndarray] = field(repr=False)
    limit_kind: str  # "xi-branch" or "smooth"
    critical: Optional[CriticalParams]
    certificate: Optional[Certificate]
    verdict: Verdict
    converged: bool
    steps: int
    max_rhs: float
    limit_slope: float = math.nan
    limit_calib: float = math.nan


def limit_profile(g: GeometryParams, x: np.ndarray):
    """Expected long-time limit: the xi-branch if unstable, the smooth solution if stable."""
    report = classify(g)
    if report.verdict is Verdict.STABLE:
        sd = slope(g.as_floats())
        return branch_solve(g, sd, x), "smooth", None, report.verdict, float(sd.c_s), float(sd.A_s)
    cp = find_xi(g)
    return xi_branch(g, cp, x), "xi-branch", cp, report.verdict, cp.c_xi, cp.A_xi


def run(g: GeometryParams, bg: Optional[BackgroundMetric] = None, ip: Optional[InitialProfile] = None,
        cfg: FlowConfig = FlowConfig(), progress: Optional[Callable[[dict], None]] = None) -> RunResult:
    """Integrate from psi_0 until max|psi_t| < stop_tol for stop_samples samples, or t_max."""
    b = float(g.b)
    cfg.validate(b)
    bg = bg or BackgroundMetric(b)
    x = make_grid(b, cfg.n_interior, cfg.grading)
    if ip is None:
        ip = build_psi0(g, x)
        psi = ip.values.copy()
    else:
        psi = ip(x)
        psi[0], psi[-1] = float(g.q), float(g.p)
    limit, kind, cp, verdict, c_lim, A_lim = limit_profile(g, x)

    cert = None
    if cp is not None:
        cert = certify(g, cp)
        if not cert.holds:
            warnings.warn("resultant certificate does not hold; convergence to the xi-branch is not guaranteed",
                          RuntimeWarning, stacklevel=2)

    state = FlowState(x, psi, 0.0, g.n)
    phase(state)
    k = _kernel(state, bg)
    mon = FlowMonitor(bg, limit, cfg.delta, b)
    series = [mon.observe(state)]
    if progress:
        progress(series[-1])

    quiet, steps, t = 0, 0, 0.0
    converged = False
    max_rhs = math.inf
    q_val, p_val = psi[0], psi[-1]
    while True:
        r, _, re, im, d = k.rhs(psi)
        if np.any(im <= 0):
            raise PhaseOutOfRange(f"face phase reached pi at t={t}")
        dt = cfg.dt_safety * k.dt_unit(re, im, d)
        if t + dt > cfg.t_max:
            dt = cfg.t_max - t
        psi = psi + dt * r
        psi[0], psi[-1] = q_val, p_val
        t += dt
        steps += 1
        if steps % cfg.sample_every == 0 or t >= cfg.t_max:
            state = FlowState(x, psi, t, g.n)
            max_rhs = float(np.max(np.abs(r)))
            series.append(mon.observe(state))
            if progress:
                progress(series[-1])
            quiet = quiet + 1 if max_rhs < cfg.stop_tol else 0
            if quiet >= cfg.stop_samples:
                converged = True
                break
            if t >= cfg.t_max:
                break

    if not converged:
        warnings.warn(f"flow stopped at t_max={cfg.t_max} with max|psi_t|={max_rhs:.3g}", NotConverged,
                      stacklevel=2)
    return RunResult(state=state, diagnostics=mon.finish(), series=series, limit=limit,
                     limit_kind=kind, critical=cp, certificate=cert, verdict=verdict,
                     converged=converged, steps=steps, max_rhs=max_rhs,
                     limit_slope=c_lim, limit_calib=A_lim)
