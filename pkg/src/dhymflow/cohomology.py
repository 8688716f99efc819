"""Intersection numbers, slopes and the stability classifier.

Everything lives on the two-generator lattice spanned by [H] and [E] of the
one-point blow-up of P^n.  With beta = b[H] - [E] and alpha_s = p[H] - s[E],

    (alpha_s + i beta)^k . H^(n-k)                = (p + ib)^k
    (alpha_s + i beta)^k . (-1)^(n-k-1) E^(n-k)   = (s + i)^k

so every quantity below is built from those two Gaussian powers.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction

from ._numeric import Gaussian, Number, as_number, is_exact
from .errors import DegenerateVolume, InputError, SupercriticalViolation

SEMISTABLE_ATOL = 1e-12


@dataclass(frozen=True)
class GeometryParams:
    """Dimension ``n`` and the classes beta = b[H]-[E], alpha = p[H]-q[E]."""

    n: int
    b: Number
    p: Number
    q: Number

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n:
            raise InputError(f"n must be an integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        for name in ("b", "p", "q"):
            object.__setattr__(self, name, as_number(getattr(self, name)))
        if self.n < 2:
            raise InputError(f"n must be >= 2, got {self.n}")
        if not self.b > 1:
            raise InputError(f"beta = b[H]-[E] is Kaehler only for b > 1, got b={self.b}")

    @property
    def exact(self) -> bool:
        return is_exact(self.b, self.p, self.q)

    def with_q(self, q) -> "GeometryParams":
        return GeometryParams(self.n, self.b, self.p, q)

    def as_floats(self) -> "GeometryParams":
        return GeometryParams(self.n, float(self.b), float(self.p), float(self.q))


@dataclass(frozen=True)
class SlopeData:
    s: Number
    c_s: Number
    A_s: Number
    vol_im: Number
    # A_s evaluated from the (s+i) side; equal to A_s up to rounding
    A_s_alt: Number = field(repr=False, default=None)

    @property
    def positive(self) -> bool:
        return self.vol_im > 0


class Verdict(str, enum.Enum):
    STABLE = "Stable"
    SEMISTABLE = "Semistable"
    UNSTABLE_FIRST_KIND = "UnstableFirstKind"
    UNSTABLE_SECOND_KIND = "UnstableSecondKind"
    UNSTABLE_NONPOSITIVE_Q = "UnstableNonpositiveQ"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class StabilityReport:
    verdict: Verdict
    c_q: Number
    threshold: float
    witnesses: tuple  # of (k, p-side value, q-side value)
    # n = 3 only: whether "q > c_q + sqrt(1 + c_q^2)" reproduces the verdict
    threshold_agrees: bool | None = None

    @property
    def stable(self) -> bool:
        return self.verdict is Verdict.STABLE


def _s_number(g: GeometryParams, s) -> Number:
    s = as_number(s)
    if not (g.exact and is_exact(s)):
        s = float(s)
    return s


def _p_side(g: GeometryParams) -> Gaussian:
    return Gaussian(g.p, g.b) if g.exact else Gaussian(float(g.p), float(g.b))


def _s_side(s: Number) -> Gaussian:
    return Gaussian(s, Fraction(1) if isinstance(s, Fraction) else 1.0)


def complex_power_pair(g: GeometryParams, s, k: int) -> tuple[Gaussian, Gaussian]:
    """Return ``((p + ib)^k, (s + i)^k)``, exact when all inputs are rational."""
    if not 1 <= k <= g.n:
        raise InputError(f"k must be in [1, {g.n}], got {k}")
    s = _s_number(g, s)
    return _p_side(g) ** k, _s_side(s) ** k


def volume(g: GeometryParams, s=None) -> Gaussian:
    """(alpha_s + i beta)^n; ``s`` defaults to q."""
    P, S = complex_power_pair(g, g.q if s is None else s, g.n)
    return P - S


def slope(g: GeometryParams, s=None, *, require_positive: bool = False) -> SlopeData:
    """Slope c_s = cot(theta_hat) and calibration constant A_s of alpha_s."""
    s = _s_number(g, g.q if s is None else s)
    P, S = complex_power_pair(g, s, g.n)
    vol_im = P.im - S.im
    if vol_im == 0:
        raise DegenerateVolume(f"Im(alpha_s + i beta)^{g.n} vanishes at s={s}")
    if require_positive and vol_im < 0:
        raise DegenerateVolume(f"Im(alpha_s + i beta)^{g.n} < 0 at s={s}")
    c = (P.re - S.re) / vol_im
    return SlopeData(s=s, c_s=c, A_s=P.re - c * P.im, vol_im=vol_im,
                     A_s_alt=S.re - c * S.im)


def slope_derivative(g: GeometryParams, s) -> float:
    """Closed-form dc_s/ds."""
    sd = slope(g, s)
    S1 = _s_side(sd.s) ** (g.n - 1)
    return float(-g.n * (S1.re - sd.c_s * S1.im) / sd.vol_im)


def check_identities(g: GeometryParams, s, k: int) -> tuple[float, float]:
    """Relative residuals of the two Im(z)Re(w) - Re(z)Im(w) = Im(z conj(w)) identities.

    Both sides are evaluated independently: the left through the slope,
    the right by direct complex multiplication.
    """
    sd = slope(g, s)
    Pk, Sk = complex_power_pair(g, sd.s, k)
    Pn, Sn = complex_power_pair(g, sd.s, g.n)
    diff = Pn - Sn
    out = []
    for zk in (Pk, Sk):
        lhs = (zk.re - sd.c_s * zk.im) * sd.vol_im
        rhs = (zk.conjugate() * diff).im
        scale = max(1.0, abs(float(zk.re * sd.vol_im)), abs(float(zk.im * (Pn.re - Sn.re))))
        out.append(abs(float(lhs - rhs)) / scale)
    return out[0], out[1]


def _sign(value, exact: bool) -> int:
    if exact:
        return (value > 0) - (value < 0)
    if abs(value) <= SEMISTABLE_ATOL:
        return 0
    return 1 if value > 0 else -1


def stability_threshold(c_q) -> float:
    c = float(c_q)
    return c + math.sqrt(1.0 + c * c)


def classify(g: GeometryParams) -> StabilityReport:
    """Classify (Bl P^n, alpha, beta) via the k = 1..n-1 witness inequalities."""
    vol = volume(g)
    if not vol.im > 0:
        raise SupercriticalViolation(
            f"Im(alpha + i beta)^{g.n} = {vol.im} <= 0; the phase is not supercritical")
    sd = slope(g)
    c = sd.c_s
    witnesses = []
    signs = []
    for k in range(1, g.n):
        Pk, Qk = complex_power_pair(g, g.q, k)
        wp = Pk.re - c * Pk.im
        wq = Qk.re - c * Qk.im
        witnesses.append((k, wp, wq))
        signs.extend((_sign(wp, g.exact), _sign(wq, g.exact)))

    threshold = stability_threshold(c)
    if all(sg > 0 for sg in signs):
        verdict = Verdict.STABLE
    elif all(sg >= 0 for sg in signs):
        verdict = Verdict.SEMISTABLE
    elif g.q <= 0:
        verdict = Verdict.UNSTABLE_NONPOSITIVE_Q
    elif g.q <= c:
        verdict = Verdict.UNSTABLE_SECOND_KIND
    else:
        verdict = Verdict.UNSTABLE_FIRST_KIND

    agrees = None
    if g.n == 3 and g.q > 0:
        agrees = verdict is Verdict.SEMISTABLE or (verdict is Verdict.STABLE) == (float(g.q) > threshold)
    return StabilityReport(verdict=verdict, c_q=c, threshold=threshold,
                           witnesses=tuple(witnesses), threshold_agrees=agrees)


def unstability_thresholds(b) -> tuple[float, float]:
    """Lower bounds on q along p = 2bq: first-kind unstability and sign change of c_q.

    Returns ``(b_star, b_upper_star)``: for q > b_star the triple with p = 2bq
    is unstable of the first kind, and c_q changes sign at q = b_upper_star.
    """
    b = float(b)
    if not b > 1:
        raise InputError(f"b must exceed 1, got {b}")
    b3 = b ** 3
    lower = math.sqrt((math.sqrt(b3 * (17 * b3 - 1)) - b3 - 2) / (2 * (4 * b3 + 1)))
    upper = math.sqrt(3 * (2 * b3 - 1) / (8 * b3 - 1))
    return lower, upper


def g_polynomial(p, q, b) -> Number:
    """bp^4 + p^2(2b^3-3q^2+1) + 2pbq(q^2-3) + b^2(b^3+3q^2-1)."""
    return (b * p ** 4 + p ** 2 * (2 * b ** 3 - 3 * q ** 2 + 1)
            + 2 * p * b * q * (q ** 2 - 3) + b ** 2 * (b ** 3 + 3 * q ** 2 - 1))
