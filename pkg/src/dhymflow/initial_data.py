"""Initial potential, the comparison family psi^(s) and the no-crossing certificate.

The initial profile is psi_0(x) = sqrt((mu x^2 + lam/x) / 3) with mu, lam fixed
by psi_0(1) = q and psi_0(b) = p.  Replacing q by s gives psi^(s).  Whether
psi^(xi) stays below the limit branch is decided by a cubic in tau = x^3 whose
roots are the possible crossing points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._numeric import Number
from .aux_family import CriticalParams, p_star, xi_branch
from .cohomology import GeometryParams
from .errors import DegenerateDenominator, IllPosed, UnsupportedDimension

DENSE_POINTS = 10_000


def cot_phase(psi, dpsi, x, n: int = 3):
    """cot(arccot(psi') + (n-1) arccot(psi/x))."""
    z = (np.asarray(dpsi) + 1j) * (np.asarray(psi) / np.asarray(x) + 1j) ** (n - 1)
    return z.real / z.imag


def phase_angle(psi, dpsi, x, n: int = 3):
    """arccot(psi') + (n-1) arccot(psi/x), each arccot in (0, pi)."""
    def arccot(v):
        return np.pi / 2 - np.arctan(v)
    return arccot(np.asarray(dpsi)) + (n - 1) * arccot(np.asarray(psi) / np.asarray(x))


def family_coefficients(g: GeometryParams, s) -> tuple[Number, Number]:
    """(mu^(s), lam^(s)) with mu = 3(p^2 b - s^2)/(b^3 - 1) and lam = 3 s^2 - mu."""
    b, p = g.b, g.p
    if not isinstance(s, Fraction) or not g.exact:
        b, p, s = float(b), float(p), float(s)
    mu = 3 * (p * p * b - s * s) / (b ** 3 - 1)
    return mu, 3 * s * s - mu


def _check_well_posed(g: GeometryParams, s) -> None:
    if g.n != 3:
        raise UnsupportedDimension("initial data is defined for n = 3 only")
    if not 3 * s * s < 3 * g.p ** 2 * g.b - g.b ** 3 + 1:
        raise IllPosed(f"3s^2 >= 3p^2 b - b^3 + 1 at s={s}: mu <= 1")
    if not s > 0:
        raise IllPosed(f"boundary value must be positive, got {s}")


@dataclass(frozen=True)
class InitialProfile:
    mu: Number
    lam: Number
    b: Number
    grid: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    def __call__(self, x):
        return psi_from_coefficients(float(self.mu), float(self.lam), x)

    def derivative(self, x):
        return dpsi_from_coefficients(float(self.mu), float(self.lam), x)


def psi_from_coefficients(mu: float, lam: float, x):
    x = np.asarray(x, dtype=float)
    return np.sqrt((mu * x * x + lam / x) / 3.0)


def dpsi_from_coefficients(mu: float, lam: float, x):
    x = np.asarray(x, dtype=float)
    g = mu * x * x + lam / x
    return (2 * mu * x - lam / (x * x)) / (2 * math.sqrt(3.0) * np.sqrt(g))


def build_psi0(g: GeometryParams, grid) -> InitialProfile:
    _check_well_posed(g, g.q)
    mu, lam = family_coefficients(g, g.q)
    grid = np.asarray(grid, dtype=float)
    values = psi_from_coefficients(float(mu), float(lam), grid)
    values[0], values[-1] = float(g.q), float(g.p)
    return InitialProfile(mu=mu, lam=lam, b=g.b, grid=grid, values=values)


def phase_derivative(ip: InitialProfile, x):
    """Closed form of (cot theta_psi0)'.

    sqrt(3) lam^2 ((mu+3) x^3 + lam) / (4 (mu-1) x^(11/2) (mu x^3 + lam)^(3/2)),
    checked against finite differences in the tests.
    """
    mu, lam = float(ip.mu), float(ip.lam)
    x = np.asarray(x, dtype=float)
    num = math.sqrt(3.0) * lam * lam * ((mu + 3) * x ** 3 + lam)
    return num / (4 * (mu - 1) * x ** 5.5 * (mu * x ** 3 + lam) ** 1.5)


def phase_derivative_fd(ip: InitialProfile, x, h: float = 1e-5):
    x = np.asarray(x, dtype=float)

    def cot_at(y):
        return cot_phase(ip(y), ip.derivative(y), y)
    return (cot_at(x + h) - cot_at(x - h)) / (2 * h)


def phase_monotonicity_check(ip: InitialProfile) -> float:
    """Minimum over the grid of (cot theta_psi0)'; positive when the phase increases."""
    return float(np.min(phase_derivative(ip, ip.grid)))


def psi_family(g: GeometryParams, s, x):
    """psi^(s)(x) = sqrt((mu^(s) x^2 + lam^(s)/x)/3)."""
    _check_well_posed(g, s)
    top = p_star(g)
    if not float(g.q) <= float(s) < top:
        raise IllPosed(f"s={s} outside [q, p_star) = [{g.q}, {top})")
    mu, lam = family_coefficients(g, s)
    return psi_from_coefficients(float(mu), float(lam), x)


@dataclass(frozen=True)
class ResultantCubic:
    """Coefficients of R(tau), highest degree first, and its three roots."""

    coeffs: tuple
    roots: tuple
    root_residuals: tuple  # |R(1)|, |R(b^3)| divided by sum |a_k|


def resultant_coefficients(mu: float, lam: float, c: float, A: float) -> tuple:
    """Cubic in tau = x^3 whose zeros are the x where 3x psi^2 = mu x^3 + lam meets the level set."""
    K = 27 * c * c + 18 - mu
    M = 2 * c * c + 3
    a3 = mu * mu * K + 27 * c * c - 27 * mu * M
    a2 = 2 * mu * lam * K - mu * mu * lam - 54 * c * A - 27 * (lam * M - 2 * c * A * mu)
    a1 = lam * lam * K - 2 * mu * lam * lam + 27 * A * A + 54 * c * A * lam
    a0 = -lam ** 3
    return a3, a2, a1, a0


def sylvester_resultant(mu: float, lam: float, c: float, A: float, x: float) -> float:
    """Resultant in psi of the level-set cubic and 3x psi^2 - (mu x^3 + lam), by determinant."""
    f = [1.0, -3 * c * x, -3 * x * x, c * x ** 3 - A]
    g = [3 * x, 0.0, -(mu * x ** 3 + lam)]
    m = np.zeros((5, 5))
    for r in range(2):
        m[r, r:r + 4] = f
    for r in range(3):
        m[2 + r, r:r + 3] = g
    return float(np.linalg.det(m))


def third_root_closed_form(b: float, mu: float, lam: float, c: float, A: float) -> float:
    den = 27 * c * c * (mu - 1) ** 2 - mu * (mu - 9) ** 2
    if den == 0:
        raise DegenerateDenominator("27c^2(mu-1)^2 - mu(mu-9)^2 vanishes")
    num = 54 * c * (mu - 1) * (lam * c + A) - 3 * lam * (mu - 3) * (mu - 9)
    return -b ** 3 - 1 - num / den


def third_root_deflation(coeffs: tuple, b: float) -> float:
    quotient, _ = np.polydiv(np.asarray(coeffs, dtype=float), np.poly([1.0, b ** 3]))
    return float(-quotient[1] / quotient[0])


@dataclass(frozen=True)
class Certificate:
    cubic: ResultantCubic
    third_root_closed: float | None
    third_root_deflated: float
    dense_gap: float  # max of psi^(xi) - limit branch on a dense grid
    holds: bool


def resultant_certificate(g: GeometryParams, cp: CriticalParams) -> tuple[ResultantCubic, bool]:
    cert = certify(g, cp)
    return cert.cubic, cert.holds


def certify(g: GeometryParams, cp: CriticalParams, dense_points: int = DENSE_POINTS) -> Certificate:
    """Full no-crossing certificate for psi^(xi) against the xi-branch."""
    _check_well_posed(g, cp.xi)
    b = float(g.b)
    mu, lam = (float(v) for v in family_coefficients(g.as_floats(), cp.xi))
    coeffs = resultant_coefficients(mu, lam, cp.c_xi, cp.A_xi)
    size = sum(abs(a) for a in coeffs)
    res1 = abs(np.polyval(coeffs, 1.0)) / size
    resb = abs(np.polyval(coeffs, b ** 3)) / size

    deflated = third_root_deflation(coeffs, b)
    try:
        closed = third_root_closed_form(b, mu, lam, cp.c_xi, cp.A_xi)
    except DegenerateDenominator:
        closed = None
    third = deflated if closed is None else closed
    cubic = ResultantCubic(coeffs=coeffs, roots=(1.0, b ** 3, third), root_residuals=(res1, resb))

    x = np.linspace(1.0, b, dense_points)
    gap = float(np.max(psi_from_coefficients(mu, lam, x) - xi_branch(g, cp, x)))
    return Certificate(cubic=cubic, third_root_closed=closed, third_root_deflated=deflated,
                       dense_gap=gap, holds=bool(third < 0))
