"""Failure of the inequality outside 0 < r <= 2.

For r > 2 the two-point law (A w.p. p, -1 w.p. q) with A = 2^(2r/(r-2)) and
p = r / (2^r A) gives Delta < 2^r (1 - r^2) < 0; its smoothed version keeps
Delta < 0 for small eps. For r < 0, independent uniforms on [1, 2] already
violate the inequality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import EpsilonOutOfRange, RegimeError
from .models import TwoPointLaw, as_exponent, build_counterexample, build_smoothed, build_uniform_remark
from .moments import MomentEstimate, QUADRATURE, moment_density_quadrature
from .quadrature import integrate


@dataclass
class DeltaBreakdown:
    r: float
    e_plus: float
    e_minus: float
    delta: float
    jensen_lhs: Optional[float] = None
    jensen_rhs: Optional[float] = None
    jensen_bound: Optional[float] = None
    chain_bound: Optional[float] = None
    exact: bool = False
    rational: dict = field(default_factory=dict)
    verdict: str = "fails"
    notes: list = field(default_factory=list)

    def to_dict(self):
        out = {
            "r": self.r, "e_plus": self.e_plus, "e_minus": self.e_minus, "delta": self.delta,
            "jensen_lhs": self.jensen_lhs, "jensen_rhs": self.jensen_rhs,
            "jensen_bound": self.jensen_bound, "chain_bound": self.chain_bound,
            "exact": self.exact, "verdict": self.verdict,
        }
        if self.rational:
            out["rational"] = {k: f"{v.numerator}/{v.denominator}"
                               for k, v in self.rational.items()}
        if self.notes:
            out["notes"] = list(self.notes)
        return out


def _jensen_excess_ratio(x, r):
    """((1+x)^r - (1-x)^r - 2 r x) / (2 r x) for 0 < x < 1.

    Summed as the odd binomial series when x is small, so the ratio is
    accurate even when it is far below machine epsilon.
    """
    if x > 0.1:
        return (math.exp(r * math.log1p(x)) - math.exp(r * math.log1p(-x)) - 2 * r * x) / (2 * r * x)
    total = 0.0
    coeff = r  # C(r, 1)
    k = 1
    while True:
        coeff *= (r - k) * (r - k - 1) / ((k + 1) * (k + 2))
        k += 2
        term = coeff * x ** (k - 1) / r
        total += term
        if abs(term) <= 1e-18 * abs(total) or k > 200:
            return total


def _double_breakdown(r, a, p, q):
    """All breakdown quantities in double precision, computed in logarithms."""
    log2 = math.log(2.0)
    log_a = math.log(a)
    log_p = math.log(p)
    x = 1.0 / a
    # p^2 (2A)^r, q^2 2^r, 2pq (A-1)^r, 2pq (A+1)^r
    t_high = math.exp(2 * log_p + r * (log2 + log_a))
    t_low = q * q * 2.0**r
    jensen_rhs = 2 * r * math.exp((r - 1) * log_a)
    excess = jensen_rhs * _jensen_excess_ratio(x, r)
    jensen_lhs = jensen_rhs + excess
    two_pq = 2 * q * p
    t_mid = two_pq * math.exp(r * (log_a + math.log1p(-x)))
    e_minus = two_pq * math.exp(r * (log_a + math.log1p(x)))
    e_plus = math.fsum([t_high, t_low, t_mid])
    # the two big 2pq terms cancel; use their difference 2pq * jensen_lhs directly
    delta = math.fsum([t_high, t_low, -two_pq * jensen_lhs])
    jensen_bound = math.fsum([t_high, t_low, -two_pq * jensen_rhs])
    return e_plus, e_minus, delta, jensen_lhs, jensen_rhs, jensen_bound


def _rational_breakdown(r: int, a: Fraction, p: Fraction):
    q = 1 - p
    two_r = Fraction(2) ** r
    e_plus = p * p * (2 * a) ** r + q * q * two_r + 2 * p * q * (a - 1) ** r
    e_minus = 2 * p * q * (a + 1) ** r
    jensen_lhs = (a + 1) ** r - (a - 1) ** r
    jensen_rhs = 2 * r * a ** (r - 1)
    jensen_bound = two_r * p * p * a**r + two_r * q * q - 4 * r * p * q * a ** (r - 1)
    return {
        "e_plus": e_plus, "e_minus": e_minus, "delta": e_plus - e_minus,
        "jensen_lhs": jensen_lhs, "jensen_rhs": jensen_rhs, "jensen_bound": jensen_bound,
        "chain_bound": two_r * (1 - r * r),
    }


def delta_exact(law: TwoPointLaw, exact: Optional[bool] = None) -> DeltaBreakdown:
    """Delta = p^2 (2A)^r + q^2 2^r + 2pq (A-1)^r - 2pq (A+1)^r and its bounding chain.

    Rational arithmetic is used when A and p are rational (r in {3, 4, 6});
    ``exact=False`` forces the double-precision path.
    """
    r = law.r
    if r <= 2:
        raise RegimeError("delta_exact needs a law built for r > 2")
    use_exact = law.exact if exact is None else exact
    if use_exact and not law.exact:
        raise ValueError("this law has no exact rational form")
    if use_exact:
        rat = _rational_breakdown(int(r), law.high_atom_exact, law.p_exact)
        vals = {k: float(v) for k, v in rat.items()}
        out = DeltaBreakdown(r, vals["e_plus"], vals["e_minus"], vals["delta"],
                             vals["jensen_lhs"], vals["jensen_rhs"], vals["jensen_bound"],
                             vals["chain_bound"], exact=True, rational=rat)
        chain_ok = (rat["delta"] <= rat["jensen_bound"] < rat["chain_bound"] < 0
                    and rat["jensen_lhs"] >= rat["jensen_rhs"])
    else:
        e_plus, e_minus, dlt, lhs, rhs, bound = _double_breakdown(r, law.high_atom, law.p, law.q)
        chain = 2.0**r * (1 - r * r)
        out = DeltaBreakdown(r, e_plus, e_minus, dlt, lhs, rhs, bound, chain)
        slack = 1e-9 * max(abs(dlt), 1.0)
        chain_ok = (dlt <= bound + slack and bound < chain < 0 and lhs >= rhs)
    if not chain_ok:
        raise ArithmeticError(f"bounding chain violated at r={r}: {out.to_dict()}")
    return out


def smoothed_delta(r, epsilon: float, rel_tol: float = 1e-8) -> MomentEstimate:
    """Delta for independent copies of Z + eps*U, by cellwise quadrature."""
    r = as_exponent(r)
    if r.value <= 2:
        raise RegimeError("smoothed_delta needs r > 2")
    if not 0 < epsilon < 0.5:
        raise EpsilonOutOfRange(f"epsilon must lie in (0, 1/2), got {epsilon!r}")
    model = build_smoothed(build_counterexample(r), epsilon)
    plus = moment_density_quadrature(model, r, "plus", rel_tol)
    minus = moment_density_quadrature(model, r, "minus", rel_tol)
    return MomentEstimate(plus.value - minus.value, plus.abs_error_bound + minus.abs_error_bound,
                          QUADRATURE, n=plus.n + minus.n,
                          diagnostics={"e_plus": plus.value, "e_minus": minus.value,
                                       "epsilon": epsilon})


def remark_negative_r(r, rel_tol: float = 1e-10) -> DeltaBreakdown:
    """The inequality for X, Y independent uniform on [1, 2] and r < 0.

    E|X-Y|^r = 2/((r+1)(r+2)) for -1 < r < 0 and +inf for r <= -1; E|X+Y|^r is
    integrated against the triangular density of X+Y on [2, 4].
    """
    r = as_exponent(r)
    if r.value >= 0:
        raise RegimeError("remark_negative_r needs r < 0")
    rv = r.value

    def tri(w):
        return w**rv * np.where(w <= 3, w - 2, 4 - w)

    plus = integrate(tri, 2.0, 4.0, breakpoints=(3.0,), rel_tol=rel_tol)
    e_plus = plus.value
    notes = []
    if rv > -1:
        e_minus = 2 / ((rv + 1) * (rv + 2))
        quad = moment_density_quadrature(build_uniform_remark(), r, "minus", 1e-9)
        notes.append(f"quadrature E|X-Y|^r = {quad.value!r} (+- {quad.abs_error_bound:.2g})")
        e_minus_quadrature = quad.value
    else:
        e_minus = math.inf
        e_minus_quadrature = math.inf
        notes.append("E|X-Y|^r = +inf: the density 2(1-u) of |X-Y| is not integrable against u^r")
    if not (e_plus <= 2.0**rv < 1 < e_minus):
        raise ArithmeticError(f"negative-r ordering violated at r={rv}")
    out = DeltaBreakdown(rv, e_plus, e_minus, e_plus - e_minus, chain_bound=2.0**rv,
                         verdict="fails", notes=notes)
    out.e_minus_quadrature = e_minus_quadrature
    return out


def two_point_delta(a: float, p: float, r: float) -> float:
    """Delta for i.i.d. X in {a, -1} with P(X = a) = p, by exactly rounded summation."""
    q = 1.0 - p
    return math.fsum([
        p * p * abs(2 * a) ** r,
        q * q * 2.0**r,
        2 * p * q * abs(a - 1) ** r,
        -2 * p * q * abs(a + 1) ** r,
    ])


def search_two_point(r, a_grid, p_grid) -> list[tuple[float, float, float]]:
    """Grid points (a, p) whose two-point law has Delta < 0, most negative first.

    Every such law is a product law and hence positive semi-definite. The
    threshold is -1e-12 relative to the scale of E|X+Y|^r.
    """
    r = as_exponent(r).value
    a_grid = [float(a) for a in a_grid]
    p_grid = [float(p) for p in p_grid]
    if not a_grid or not p_grid:
        raise ValueError("grids must be non-empty")
    hits = []
    for a in a_grid:
        if a == -1.0:
            continue
        for p in p_grid:
            if not 0 < p < 1:
                raise ValueError(f"probabilities must lie in (0, 1), got {p}")
            d = two_point_delta(a, p, r)
            q = 1 - p
            scale = max(1.0, p * p * abs(2 * a) ** r + q * q * 2.0**r + 2 * p * q * abs(a + 1) ** r)
            if d < -1e-12 * scale:
                hits.append((a, p, d))
    hits.sort(key=lambda h: (h[2], h[0], h[1]))
    return hits
