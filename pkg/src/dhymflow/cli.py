"""Command-line front end: ``dhymflow classify | xi | flow | sweep | verify``."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from ._numeric import as_number, format_number
from .aux_family import (F_at_p_over_b, build_F, find_xi, level_set_residual_values, xi_branch,
                         xi_closed_form_n2)
from .cohomology import GeometryParams, classify, check_identities, slope, slope_derivative, unstability_thresholds
from .errors import DHYMError, InputError, NoRootInBracket, NotConverged
from .flow import FlowConfig, phase, run
from .initial_data import build_psi0, certify, phase_monotonicity_check

OUTPUT_ENV = "DHYM_OUTPUT_DIR"


@dataclass(frozen=True)
class RunConfig:
    n: int = 3
    b: str = "3"
    p: str = "18"
    q: str = "3"
    grid_n: int = 400
    delta: float = 0.05
    dt_safety: float = 0.4
    stop_tol: float = 1e-8
    t_max: float = 1e6
    sample_every: int = 2000
    grading: float = 2.0
    output_dir: str = "dhym_out"
    seed: int = 0

    def geometry(self) -> GeometryParams:
        return GeometryParams(self.n, self.b, self.p, self.q)

    def flow_config(self) -> FlowConfig:
        return FlowConfig(n_interior=self.grid_n, delta=self.delta, dt_safety=self.dt_safety,
                          stop_tol=self.stop_tol, t_max=self.t_max, sample_every=self.sample_every,
                          grading=self.grading)

    def validate(self) -> None:
        g = self.geometry()
        b = float(g.b)
        if self.grid_n < 16:
            raise InputError(f"grid_n must be >= 16, got {self.grid_n}")
        if not 0 < self.delta < (b - 1) / 4:
            raise InputError(f"delta must lie in (0, (b-1)/4) = (0, {(b - 1) / 4:g}), got {self.delta}")
        if not self.stop_tol > 0:
            raise InputError("stop_tol must be positive")
        self.flow_config().validate(b)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _coerce(name: str, value):
    if name not in _FIELDS:
        raise InputError(f"unknown config key {name!r}")
    default = _FIELDS[name].default
    try:
        if isinstance(default, bool):
            raise TypeError
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float):
            return float(value)
    except (TypeError, ValueError) as exc:
        raise InputError(f"bad value for {name}: {value!r}") from exc
    if name in ("b", "p", "q"):
        try:
            as_number(str(value))
        except ValueError as exc:
            raise InputError(f"bad number for {name}: {value!r}") from exc
    return str(value)


def read_config_file(path: str) -> dict:
    """``key = value`` lines (``#`` comments), or a report.json with an embedded config."""
    text = Path(path).read_text()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        data = json.loads(text)
        data = data.get("config", data)
        return {k: _coerce(k, v) for k, v in data.items()}
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = _coerce(key.replace("-", "_"), value)
    return out


def build_config(args: argparse.Namespace) -> RunConfig:
    """Defaults < config file < environment (output dir only) < explicit flags."""
    values = {}
    if getattr(args, "config", None):
        values.update(read_config_file(args.config))
    if os.environ.get(OUTPUT_ENV):
        values["output_dir"] = os.environ[OUTPUT_ENV]
    for name in _FIELDS:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = _coerce(name, v)
    return RunConfig(**values)


def _fmt(value) -> str:
    if isinstance(value, (Fraction, float, int)) and not isinstance(value, bool):
        return format_number(value)
    return str(value)


def _jsonable(value):
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else str(v)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    return value


def _record(lines: list, out) -> None:
    for key, value in lines:
        print(f"{key}: {_fmt(value)}", file=out)


# classify ------------------------------------------------------------------

def cmd_classify(cfg: RunConfig, out=None) -> int:
    g = cfg.geometry()
    rep = classify(g)
    lines = [("n", g.n), ("b", g.b), ("p", g.p), ("q", g.q), ("verdict", rep.verdict.value),
             ("c_q", rep.c_q)]
    if isinstance(rep.c_q, Fraction):
        lines.append(("c_q_float", float(rep.c_q)))
    lines.append(("threshold", rep.threshold))
    for k, wp, wq in rep.witnesses:
        lines.append((f"witness_k{k}_p_side", wp))
        lines.append((f"witness_k{k}_q_side", wq))
    if rep.threshold_agrees is not None:
        lines.append(("threshold_form_agrees", rep.threshold_agrees))
    _record(lines, out)
    return 0


# xi ------------------------------------------------------------------------

def cmd_xi(cfg: RunConfig, out=None) -> int:
    g = cfg.geometry()
    try:
        cp = find_xi(g)
    except NoRootInBracket as exc:
        print(f"error: triple appears dHYM stable ({exc})", file=sys.stderr)
        return exc.exit_code
    c_q = slope(g).c_s
    lines = [("xi", cp.xi), ("xi_prime", cp.xi_prime), ("p_star", cp.p_star), ("c_xi", cp.c_xi),
             ("A_xi", cp.A_xi), ("zeta", cp.zeta), ("c_q", c_q), ("zeta_gt_c_q", cp.zeta > float(c_q))]
    lines += [(f"residual_{k}", v) for k, v in cp.residuals.items()]
    if g.n == 2:
        closed = xi_closed_form_n2(g.b, g.p)
        lines.append(("xi_closed_form", closed))
        lines.append(("closed_form_match", abs(closed - cp.xi) < 1e-10))
    _record(lines, out)
    return 0


# flow ----------------------------------------------------------------------

def _flow_invariants(res, cfg: RunConfig) -> dict:
    d = res.diagnostics
    inv = {
        "time_monotonicity": d.monotonicity_violation < 1e-10,
        "theta_confined": d.theta_excursion <= 1e-6,
        "c_profile_monotone": d.c_derivative_min >= -1e-8,
        "min_psidot": d.min_psidot >= -1e-8,
    }
    if res.limit_kind == "xi-branch":
        inv.update({
            "comparison": d.max_comparison_violation < 1e-8,
            "sup_dist_to_limit": d.sup_dist_to_limit < 1e-3,
            "collar_value": d.collar_error < 5e-3,
            "c_profile_flat": d.c_spread < 2e-3,
            "c_level_matches_c_xi": abs(d.c_level - res.limit_slope) < 2e-3,
        })
    else:
        x, psi = res.state.grid, res.state.psi
        rel = level_set_residual_values(psi, x, res.limit_slope, res.limit_calib, res.state.n, relative=True)
        inv.update({
            "level_set_residual": float(np.max(np.abs(rel))) < 1e-6,
            "boundary_value_retained": float(psi[0]) == float(cfg.geometry().q),
        })
    return inv


def flow_report(res, cfg: RunConfig) -> dict:
    g = cfg.geometry()
    d = res.diagnostics
    rep = {
        "config": cfg.to_dict(),
        "geometry": {"n": g.n, "b": g.b, "p": g.p, "q": g.q},
        "verdict": res.verdict.value,
        "c_q": slope(g).c_s,
        "limit_kind": res.limit_kind,
        "limit_slope": res.limit_slope,
        "limit_calib": res.limit_calib,
        "converged": res.converged,
        "not_converged": not res.converged,
        "steps": res.steps,
        "t_final": res.state.t,
        "max_rhs": res.max_rhs,
        "diagnostics": {
            "min_psidot": d.min_psidot,
            "monotonicity_violation": d.monotonicity_violation,
            "max_comparison_violation": d.max_comparison_violation,
            "theta_range": list(d.theta_range),
            "theta_initial_range": list(d.theta_initial_range),
            "theta_excursion": d.theta_excursion,
            "c_derivative_min": d.c_derivative_min,
            "c_spread": d.c_spread,
            "c_level": d.c_level,
            "c_spread_monotone": d.c_spread_monotone,
            "sup_dist_to_limit": d.sup_dist_to_limit,
            "collar_error": d.collar_error,
        },
    }
    if res.critical is not None:
        cp = res.critical
        rep["xi"] = cp.xi
        rep["xi_prime"] = cp.xi_prime
        rep["zeta"] = cp.zeta
        rep["c_xi"] = cp.c_xi
        rep["A_xi"] = cp.A_xi
    if res.certificate is not None:
        c = res.certificate
        rep["certificate"] = {"holds": c.holds, "third_root_closed": c.third_root_closed,
                              "third_root_deflated": c.third_root_deflated, "dense_gap": c.dense_gap,
                              "root_residuals": list(c.cubic.root_residuals)}
    else:
        x, psi = res.state.grid, res.state.psi
        rep["level_set_residual_relative"] = float(np.max(np.abs(level_set_residual_values(
            psi, x, res.limit_slope, res.limit_calib, res.state.n, relative=True))))
    inv = _flow_invariants(res, cfg)
    rep["invariants"] = inv
    rep["all_invariants_pass"] = all(inv.values())
    return _jsonable(rep)


def _write_csv(path: Path, header: list, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    path.write_text(buf.getvalue())


def cmd_flow(cfg: RunConfig, out=None) -> int:
    cfg.validate()
    g = cfg.geometry()
    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NotConverged)
        res = run(g, cfg=cfg.flow_config())
    wall = time.perf_counter() - start

    x, psi = res.state.grid, res.state.psi
    theta = phase(res.state)
    _write_csv(outdir / "profile_final.csv", ["x", "psi", "theta", "psi_limit"],
               zip(x, psi, theta, res.limit))
    keys = ["t", "sup_dist", "c_spread", "theta_min", "theta_max", "min_psidot"]
    _write_csv(outdir / "series.csv", keys, ([row[k] for k in keys] for row in res.series))
    rep = flow_report(res, cfg)
    (outdir / "report.json").write_text(json.dumps(rep, indent=2, sort_keys=True) + "\n")
    (outdir / "timing.json").write_text(json.dumps({"wall_time_s": wall}, indent=2) + "\n")
    _record([("output_dir", str(outdir)), ("converged", res.converged),
             ("sup_dist_to_limit", res.diagnostics.sup_dist_to_limit),
             ("all_invariants_pass", rep["all_invariants_pass"]), ("wall_time_s", wall)], out)
    return 0


# sweep ---------------------------------------------------------------------

def parse_range(text: str) -> np.ndarray:
    """``a:b:n`` gives n evenly spaced values from a to b; a single number is a one-point range."""
    parts = text.split(":")
    try:
        if len(parts) == 1:
            return np.array([float(as_number(parts[0]))])
        if len(parts) != 3:
            raise ValueError
        a, b, n = float(as_number(parts[0])), float(as_number(parts[1])), int(parts[2])
    except ValueError as exc:
        raise InputError(f"bad range {text!r}; expected a:b:n") from exc
    if n < 1:
        raise InputError("range needs at least one point")
    return np.linspace(a, b, n)


SWEEP_HEADER = ["n", "b", "p", "q", "verdict", "c_q", "threshold", "xi"]


def sweep_row(point: tuple) -> list:
    n, b, p, q = point
    try:
        g = GeometryParams(n, b, p, q)
        rep = classify(g)
    except DHYMError as exc:
        return [n, b, p, q, type(exc).__name__, math.nan, math.nan, math.nan]
    xi = math.nan
    if n in (2, 3) and q > 0 and not rep.stable:
        try:
            xi = find_xi(g).xi
        except DHYMError:
            pass
    return [n, b, p, q, rep.verdict.value, float(rep.c_q), rep.threshold, xi]


def sweep_points(cfg: RunConfig, args) -> list:
    b_vals = parse_range(args.b_range) if args.b_range else np.array([float(cfg.geometry().b)])
    q_vals = parse_range(args.q_range) if args.q_range else np.array([float(cfg.geometry().q)])
    pts = []
    if args.random:
        rng = np.random.default_rng(cfg.seed)
        lo_b, hi_b = b_vals.min(), b_vals.max()
        lo_q, hi_q = q_vals.min(), q_vals.max()
        p_vals = parse_range(args.p_range) if args.p_range else np.array([float(cfg.geometry().p)])
        for _ in range(args.random):
            b = float(rng.uniform(lo_b, hi_b)) if hi_b > lo_b else float(lo_b)
            q = float(rng.uniform(lo_q, hi_q)) if hi_q > lo_q else float(lo_q)
            if args.p_over_bq is not None:
                p = args.p_over_bq * b * q
            else:
                p = float(rng.uniform(p_vals.min(), p_vals.max())) if np.ptp(p_vals) else float(p_vals[0])
            pts.append((cfg.n, b, p, q))
        return pts
    for b in b_vals:
        for q in q_vals:
            if args.p_over_bq is not None:
                pts.append((cfg.n, float(b), float(args.p_over_bq * b * q), float(q)))
            else:
                p_vals = parse_range(args.p_range) if args.p_range else np.array([float(cfg.geometry().p)])
                pts.extend((cfg.n, float(b), float(p), float(q)) for p in p_vals)
    return pts


def cmd_sweep(cfg: RunConfig, args, out=None) -> int:
    pts = sweep_points(cfg, args)
    if args.jobs and args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            rows = list(ex.map(sweep_row, pts, chunksize=16))
    else:
        rows = [sweep_row(pt) for pt in pts]
    w = csv.writer(out or sys.stdout, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return 0


# verify --------------------------------------------------------------------

def verification_checks(cfg: RunConfig) -> list:
    """(name, passed, detail) for the identity and invariant suite on the configured geometry."""
    g = cfg.geometry()
    checks = []

    def add(name, ok, detail=""):
        checks.append((name, bool(ok), detail))

    sd = slope(g)
    add("A_s_two_sides_agree", abs(float(sd.A_s - sd.A_s_alt)) <= 1e-12 * max(1.0, abs(float(sd.A_s))))
    for k in range(1, g.n + 1):
        r1, r2 = check_identities(g, g.q, k)
        add(f"identities_k{k}", max(r1, r2) < 1e-9, f"{max(r1, r2):.3g}")
    s0 = float(g.q)
    h = 1e-5
    fd = (float(slope(g.as_floats(), s0 + h).c_s) - float(slope(g.as_floats(), s0 - h).c_s)) / (2 * h)
    an = slope_derivative(g, s0)
    add("slope_derivative_fd", abs(an - fd) <= 1e-6 * max(1.0, abs(an)), f"{an:.6g} vs {fd:.6g}")
    rep = classify(g)
    add("classifier_witnesses", rep.stable == all(w > 0 for _, a, b in rep.witnesses for w in (a, b)))
    if rep.threshold_agrees is not None:
        add("threshold_form", rep.threshold_agrees)
    lo, hi = unstability_thresholds(g.b)
    b3 = float(g.b) ** 3
    add("threshold_chain", math.sqrt((b3 - 1) / (3 * (4 * b3 - 1))) < lo < hi < 1)
    if g.n in (2, 3):
        F = build_F(g)
        pb = g.p / g.b
        vF, vC = F(pb), F_at_p_over_b(g)
        add("F_at_p_over_b", abs(float(vF - vC)) <= 1e-12 * abs(float(vC)), f"{_fmt(vF)} vs {_fmt(vC)}")
        if not rep.stable and g.q > 0:
            cp = find_xi(g)
            add("F_xi_zero", cp.residuals["F_xi"] < 1e-9 * cp.residuals["F_scale"])
            add("zeta_equals_c_xi", cp.residuals["zeta_minus_c_xi"] < 1e-9)
            if g.n == 3:
                add("xi_from_c_xi", cp.residuals["xi_vs_c_xi"] < 1e-9)
                x = np.linspace(1.0, float(g.b), 201)
                lim = xi_branch(g, cp, x)
                add("branch_boundary", abs(lim[0] - cp.xi) < 1e-10 and abs(lim[-1] - float(g.p)) < 1e-9)
                res = np.max(np.abs(level_set_residual_values(lim, x, cp.c_xi, cp.A_xi)))
                add("branch_level_set", res < 1e-9 * max(1.0, abs(cp.A_xi)), f"{res:.3g}")
                try:
                    ip = build_psi0(g, x)
                    add("initial_phase_monotone", phase_monotonicity_check(ip) > 0)
                    cert = certify(g, cp)
                    add("resultant_roots", max(cert.cubic.root_residuals) < 1e-8)
                    add("third_root_negative", cert.holds, f"{cert.cubic.roots[2]:.10g}")
                    add("dense_no_crossing", cert.dense_gap < 1e-9, f"{cert.dense_gap:.3g}")
                except DHYMError as exc:
                    add("initial_data", False, str(exc))
            else:
                add("n2_closed_form", cp.residuals["xi_vs_closed_form"] < 1e-10)
    return checks


def cmd_verify(cfg: RunConfig, out=None) -> int:
    checks = verification_checks(cfg)
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'} {name}" + (f" ({detail})" if detail else ""), file=out)
    failed = sum(not ok for _, ok, _ in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed", file=out)
    return 0 if failed == 0 else 2


# argument parsing ----------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value file or a report.json to re-run")
    p.add_argument("--n", type=int)
    p.add_argument("--b")
    p.add_argument("--p")
    p.add_argument("--q")
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--seed", type=int)


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dhymflow", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="stability verdict and witnesses")
    _add_common(p)
    p = sub.add_parser("xi", help="critical parameters xi, xi', c_xi, A_xi, zeta")
    _add_common(p)
    p = sub.add_parser("flow", help="integrate the flow and write profile, series and report")
    _add_common(p)
    p.add_argument("--grid-n", dest="grid_n", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--dt-safety", dest="dt_safety", type=float)
    p.add_argument("--stop-tol", dest="stop_tol", type=float)
    p.add_argument("--t-max", dest="t_max", type=float)
    p.add_argument("--sample-every", dest="sample_every", type=int)
    p.add_argument("--grading", type=float)
    p = sub.add_parser("sweep", help="verdict table over a parameter grid")
    _add_common(p)
    p.add_argument("--p-range", dest="p_range")
    p.add_argument("--q-range", dest="q_range")
    p.add_argument("--b-range", dest="b_range")
    p.add_argument("--p-over-bq", dest="p_over_bq", type=float, help="tie p = K b q")
    p.add_argument("--random", type=int, default=0, help="sample this many random points instead of a grid")
    p.add_argument("--jobs", type=int, default=1)
    p = sub.add_parser("verify", help="run the identity and invariant suite")
    _add_common(p)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg = build_config(args)
        if args.command == "classify":
            return cmd_classify(cfg)
        if args.command == "xi":
            return cmd_xi(cfg)
        if args.command == "flow":
            return cmd_flow(cfg)
        if args.command == "sweep":
            return cmd_sweep(cfg, args)
        return cmd_verify(cfg)
    except DHYMError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
