"""The one-parameter family alpha_s = p[H] - s[E] and its level-set branches.

For each s the reduced equation Re(psi + ix)^n - c_s Im(psi + ix)^n = A_s is
algebraic in psi, so its largest root gives an explicit profile on [1, b].
The family slope c_s peaks at s = xi, the smallest root of

    F(s) = Im((s - i)^(n-1) ((p + ib)^n - (s + i)^n))

above q.  Branch solving and xi' are implemented for n = 3 only; F and xi
are also available for n = 2, where xi has a closed form used as a check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from ._numeric import Gaussian, Number
from .cohomology import GeometryParams, SlopeData, slope
from .errors import (InputError, NegativeDiscriminant, NoRootInBracket,
                     UnsupportedDimension)

XI_SCAN_POINTS = 4096
BISECTION_ITERS = 200


def _require_dim(g: GeometryParams, allowed=(2, 3)) -> None:
    if g.n not in allowed:
        raise UnsupportedDimension(
            f"n={g.n} is not supported here (allowed: {', '.join(map(str, allowed))})")


@dataclass(frozen=True)
class FPolynomial:
    """Real polynomial, coefficients highest degree first."""

    coeffs: tuple

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, s):
        acc = 0 * s if isinstance(s, np.ndarray) else 0
        for a in self.coeffs:
            acc = acc * s + (float(a) if isinstance(s, (float, np.ndarray)) else a)
        return acc

    def derivative(self) -> "FPolynomial":
        d = self.degree
        return FPolynomial(tuple(a * (d - k) for k, a in enumerate(self.coeffs[:-1])))

    def scale(self, s) -> float:
        """Sum of |a_k| |s|^k, the natural size against which |F(s)| is judged."""
        s = abs(float(s))
        return sum(abs(float(a)) * s ** (self.degree - k) for k, a in enumerate(self.coeffs))

    def as_floats(self) -> "FPolynomial":
        return FPolynomial(tuple(float(a) for a in self.coeffs))


def _poly_mul(a: list, b: list) -> list:
    """Product of Gaussian-coefficient polynomials, lowest degree first."""
    zero = a[0] - a[0]
    out = [zero] * (len(a) + len(b) - 1)
    for i, u in enumerate(a):
        for j, v in enumerate(b):
            out[i + j] = out[i + j] + u * v
    return out


def build_F(g: GeometryParams) -> FPolynomial:
    """Expand F(s) = Im((s-i)^(n-1) ((p+ib)^n - (s+i)^n)) coefficient by coefficient."""
    _require_dim(g)
    one = Fraction(1) if g.exact else 1.0
    zero = one * 0
    s_plus_i = [Gaussian(zero, one), Gaussian(one, zero)]
    s_minus_i = [Gaussian(zero, -one), Gaussian(one, zero)]

    S = [Gaussian(one, zero)]
    for _ in range(g.n):
        S = _poly_mul(S, s_plus_i)
    conj = [Gaussian(one, zero)]
    for _ in range(g.n - 1):
        conj = _poly_mul(conj, s_minus_i)

    P = Gaussian(g.p, g.b) ** g.n
    diff = [-c for c in S]
    diff[0] = diff[0] + P
    prod = _poly_mul(conj, diff)
    # the s^(2n-1) coefficient is -1, which is real
    return FPolynomial(tuple(c.im for c in reversed(prod[:-1])))


def F_at_p_over_b(g: GeometryParams) -> Number:
    """(b^n - 1)(p^2 + b^2)^(n-1) / b^(2n-2), the value of F at s = p/b."""
    n, b, p = g.n, g.b, g.p
    return (b ** n - 1) * (p * p + b * b) ** (n - 1) / b ** (2 * n - 2)


def p_star(g: GeometryParams) -> float:
    """Upper end of the admissible s-range.

    n = 3: min(p/b, sqrt((3p^2 b - b^3 + 1)/3)).  n = 2: bp, the midpoint of
    the two roots of the quadratic F.
    """
    _require_dim(g)
    b, p = float(g.b), float(g.p)
    if g.n == 2:
        return b * p
    rad = 3 * p * p * b - b ** 3 + 1
    if rad <= 0:
        raise InputError(f"3p^2 b - b^3 + 1 = {rad:g} <= 0: no admissible s-range")
    return min(p / b, math.sqrt(rad / 3))


def xi_closed_form_n2(b, p) -> float:
    b, p = float(b), float(p)
    return b * p - math.sqrt((b * b - 1) * (p * p + 1))


def zeta_value(g: GeometryParams, xi: float) -> float:
    """Slope of alpha_xi from the defining quotient; equals c_xi at a root of F."""
    return float(slope(g.as_floats(), xi).c_s)


@dataclass(frozen=True)
class CriticalParams:
    xi: float
    xi_prime: float
    c_xi: float
    A_xi: float
    p_star: float
    zeta: float
    residuals: dict = field(default_factory=dict, compare=False)


def _bisect(f, lo: float, hi: float, flo: float) -> float:
    for _ in range(BISECTION_ITERS):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = f(mid)
        if fm == 0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _newton_polish(F: FPolynomial, x: float, lo: float, hi: float, iters: int = 3) -> float:
    dF = F.derivative()
    for _ in range(iters):
        d = dF(x)
        if d == 0:
            break
        nxt = x - F(x) / d
        if not lo <= nxt <= hi or abs(F(nxt)) > abs(F(x)):
            break
        x = nxt
    return x


def find_xi(g: GeometryParams) -> CriticalParams:
    """Locate xi: the first root of F at or above q, with its slope data."""
    _require_dim(g)
    if not g.q > 0:
        raise InputError(f"q must be positive to locate xi, got q={g.q}")
    F = build_F(g).as_floats()
    q, top = float(g.q), p_star(g)
    if not q < top:
        raise InputError(f"q={q} is not below p_star={top}")

    fq = F(q)
    if abs(fq) <= 1e-12 * F.scale(q):
        xi = q
    elif fq > 0:
        raise NoRootInBracket(f"F(q) = {fq:.6g} > 0: no sign change above q, triple appears dHYM stable")
    else:
        grid = np.linspace(q, top, XI_SCAN_POINTS + 1)
        vals = F(grid)
        hits = np.nonzero(vals >= 0)[0]
        if hits.size == 0:
            raise NoRootInBracket(f"F has no sign change on ({q}, {top})")
        k = int(hits[0])
        lo, hi = float(grid[k - 1]), float(grid[k])
        xi = hi if vals[k] == 0 else _bisect(F, lo, hi, float(vals[k - 1]))
        xi = _newton_polish(F, xi, lo, hi)

    gf = g.as_floats()
    zeta = zeta_value(g, xi)
    if g.n == 3:
        c_xi = (xi * xi - 1) / (2 * xi)
        A_xi = -(xi * xi + 1) ** 2 / (2 * xi)
    else:
        sd = slope(gf, xi)
        c_xi, A_xi = float(sd.c_s), float(sd.A_s)

    scale = F.scale(xi)
    residuals = {
        "F_xi": abs(F(xi)),
        "F_scale": scale,
        "zeta_minus_c_xi": abs(zeta - c_xi),
    }
    if g.n == 3:
        residuals["xi_vs_c_xi"] = abs(xi - (c_xi + math.sqrt(1 + c_xi * c_xi)))
        residuals["A_xi_vs_slope"] = abs(A_xi - float(slope(gf, xi).A_s))
    else:
        residuals["xi_vs_closed_form"] = abs(xi - xi_closed_form_n2(g.b, g.p))

    cp = CriticalParams(xi=xi, xi_prime=top, c_xi=c_xi, A_xi=A_xi, p_star=top,
                        zeta=zeta, residuals=residuals)
    if g.n == 3:
        cp = replace(cp, xi_prime=find_xi_prime(g, cp))
    return cp


def find_xi_prime(g: GeometryParams, cp: CriticalParams) -> float:
    """Largest s <= p_star with F > 0 on (xi, s); p_star if F stays positive."""
    _require_dim(g, (3,))
    F = build_F(g).as_floats()
    xi, top = cp.xi, cp.p_star
    grid = np.linspace(xi, top, XI_SCAN_POINTS + 1)[1:]
    vals = F(grid)
    bad = np.nonzero(vals <= 0)[0]
    if bad.size == 0:
        return top
    k = int(bad[0])
    if k == 0:
        # F does not turn positive within the first scan cell
        lo = xi + (grid[0] - xi) * 1e-6
        if F(lo) <= 0:
            return xi
        return _bisect(F, lo, float(grid[0]), F(lo))
    lo, hi = float(grid[k - 1]), float(grid[k])
    return _bisect(F, lo, hi, float(vals[k - 1]))


def family_witnesses(g: GeometryParams, s) -> list:
    """Re(s+i)^k - c_s Im(s+i)^k for k = 1..n-1; positive for all k iff s lies past xi."""
    sd = slope(g, s)
    out = []
    for k in range(1, g.n):
        S = Gaussian(sd.s, sd.s * 0 + 1) ** k
        out.append(S.re - sd.c_s * S.im)
    return out


def depressed_coefficients(c: float, A: float, x):
    x = np.asarray(x, dtype=float)
    R1 = -3.0 * (c * c + 1.0) * x * x
    R2 = -2.0 * c * (c * c + 1.0) * x ** 3 - A
    return R1, R2


def discriminant_from_coefficients(c: float, A: float, x):
    """-(4 R1^3 + 27 R2^2) of the depressed cubic in Psi = psi - c x."""
    R1, R2 = depressed_coefficients(c, A, x)
    return -(4.0 * R1 ** 3 + 27.0 * R2 ** 2)


def discriminant(g: GeometryParams, cp: CriticalParams, x):
    """Closed form 108 (c_xi^2 + 1)^2 (x^6 + 2 xi c_xi x^3 - xi^2) for the xi-branch."""
    _require_dim(g, (3,))
    x = np.asarray(x, dtype=float)
    c, xi = cp.c_xi, cp.xi
    out = 108.0 * (c * c + 1.0) ** 2 * (x ** 6 + 2.0 * xi * c * x ** 3 - xi * xi)
    return float(out) if out.ndim == 0 else out


def _cubic(psi, x, c, A):
    return psi ** 3 - 3 * c * x * psi ** 2 - 3 * x * x * psi + c * x ** 3 - A


def _cubic_prime(psi, x, c):
    return 3 * psi ** 2 - 6 * c * x * psi - 3 * x * x


def branch_solve(g: GeometryParams, sd: SlopeData, x, *, strict: bool = False):
    """Largest real root psi of psi^3 - 3c x psi^2 - 3x^2 psi + c x^3 = A at each x.

    ``x`` may be a scalar or an array.  The depressed cubic is solved by the
    trigonometric formula where the discriminant is nonnegative (up to
    rounding) and by Cardano's formula otherwise; ``strict`` turns a clearly
    negative discriminant into :class:`NegativeDiscriminant`.
    """
    _require_dim(g, (3,))
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    c, A, s = float(sd.c_s), float(sd.A_s), float(sd.s)
    R1, R2 = depressed_coefficients(c, A, x)
    disc = -(4.0 * R1 ** 3 + 27.0 * R2 ** 2)
    scale = 4.0 * np.abs(R1) ** 3 + 27.0 * R2 ** 2
    three_real = disc >= -1e-12 * scale

    if strict and np.any(~three_real & (x > 1.0)):
        bad = x[~three_real & (x > 1.0)][0]
        raise NegativeDiscriminant(f"discriminant < 0 at x={bad:.17g} for s={s}")

    Psi = np.empty_like(x)
    m = np.sqrt(-R1[three_real] / 3.0)
    arg = np.clip(3.0 * R2[three_real] / (2.0 * R1[three_real]) * np.sqrt(-3.0 / R1[three_real]), -1.0, 1.0)
    Psi[three_real] = 2.0 * m * np.cos(np.arccos(arg) / 3.0)
    one = ~three_real
    if np.any(one):
        root = np.sqrt(-disc[one] / 108.0)
        Psi[one] = np.cbrt(-R2[one] / 2.0 + root) + np.cbrt(-R2[one] / 2.0 - root)
    psi = Psi + c * x

    for _ in range(2):
        d = _cubic_prime(psi, x, c)
        f = _cubic(psi, x, c, A)
        ok = np.abs(d) > 1e-6 * (np.abs(psi) ** 2 + x * x)
        trial = np.where(ok, psi - f / np.where(ok, d, 1.0), psi)
        better = np.abs(_cubic(trial, x, c, A)) <= np.abs(f)
        psi = np.where(better, trial, psi)

    # the s-branch passes through the double root at x = 1 when s = xi
    at_one = (x == 1.0) & (np.abs(psi - s) < 1e-6 * max(1.0, abs(s)))
    psi = np.where(at_one, s, psi)
    return float(psi[0]) if scalar else psi


def level_set_residual_values(psi, x, c: float, A: float, n: int = 3, *, relative: bool = False):
    """Pointwise Re(psi+ix)^n - c Im(psi+ix)^n - A, optionally per unit magnitude."""
    z = (np.asarray(psi, dtype=float) + 1j * np.asarray(x, dtype=float)) ** n
    res = z.real - c * z.imag - A
    if relative:
        res = res / (np.abs(z.real) + abs(c) * np.abs(z.imag) + abs(A))
    return res


@dataclass(frozen=True)
class BranchProfile:
    s: float
    grid: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    slope_at: float
    calib: float
    n: int = 3

    def level_set_residual(self) -> float:
        return float(np.max(np.abs(level_set_residual_values(
            self.values, self.grid, self.slope_at, self.calib, self.n))))


def branch_profile(g: GeometryParams, s, grid, *, strict: bool = False) -> BranchProfile:
    gf = g.as_floats()
    sd = slope(gf, float(s))
    grid = np.asarray(grid, dtype=float)
    values = branch_solve(gf, sd, grid, strict=strict)
    return BranchProfile(s=float(s), grid=grid, values=values,
                         slope_at=float(sd.c_s), calib=float(sd.A_s), n=g.n)


def xi_branch(g: GeometryParams, cp: CriticalParams, grid) -> np.ndarray:
    """The limit profile at s = xi, built from the closed-form c_xi and A_xi."""
    sd = SlopeData(s=cp.xi, c_s=cp.c_xi, A_s=cp.A_xi, vol_im=float("nan"))
    return branch_solve(g.as_floats(), sd, np.asarray(grid, dtype=float))


def branch_family_monotone(g: GeometryParams, s1, s2, grid) -> bool:
    if s1 == s2:
        return True
    lo, hi = sorted((float(s1), float(s2)))
    grid = np.asarray(grid, dtype=float)
    inner = grid[1:-1]
    a = branch_profile(g, lo, inner).values
    b = branch_profile(g, hi, inner).values
    return bool(np.all(a < b))


def ode_residual(profile: BranchProfile, delta: float = 0.05) -> float:
    """Max |(x^2+psi^2) psi'' + (n-1)(1+psi'^2)(x psi' - psi)| over x > 1 + delta.

    Uses centered differences; ``profile.grid`` must be uniform.
    """
    x, psi = profile.grid, profile.values
    h = np.diff(x)
    if not np.allclose(h, h[0], rtol=1e-9, atol=0):
        raise InputError("ode_residual needs a uniform grid")
    h = h[0]
    d1 = (psi[2:] - psi[:-2]) / (2 * h)
    d2 = (psi[2:] - 2 * psi[1:-1] + psi[:-2]) / (h * h)
    xm, pm = x[1:-1], psi[1:-1]
    res = (xm ** 2 + pm ** 2) * d2 + (profile.n - 1) * (1 + d1 ** 2) * (xm * d1 - pm)
    sel = xm > 1 + delta
    return float(np.max(np.abs(res[sel]))) if np.any(sel) else 0.0
