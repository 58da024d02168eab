"""Integral representation |z|^r = C_r * integral of (1 - cos tz) / |t|^(r+1) dt, 0 < r < 2.

Restricting the t-integral to the window 1/n < |t| < n gives Phi_n(z), which
increases to |z|^r. For a discrete law the difference
E Phi_n(X+Y) - E Phi_n(X-Y) can be computed two ways: as the expectation of
Phi_n differences, or as the t-integral of 4 C_r Q(t) / t^(r+1) where
Q(t) = sum p_ij sin(t a_i) sin(t a_j). Agreement of the two is checked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ChannelMismatch, RegimeError, ToleranceNotMet
from .models import DiscreteJoint, TwoPointLaw, as_exponent
from .positivity import sin_quadratic_form
from .quadrature import integrate, integrate_graded

MIN_R = 0.05
MAX_OSCILLATIONS = 1e6


@dataclass(frozen=True)
class TruncationWindow:
    """The t-range t_low < |t| < t_high; ``TruncationWindow(n)`` is (1/n, n)."""

    n: Optional[int] = None
    t_low: float = 0.0
    t_high: float = 0.0

    def __post_init__(self):
        if self.n is not None:
            if int(self.n) != self.n or self.n < 2:
                raise ValueError("window index n must be an integer >= 2 (n = 1 is empty)")
            object.__setattr__(self, "t_low", 1.0 / self.n)
            object.__setattr__(self, "t_high", float(self.n))
        if not 0 < self.t_low < self.t_high:
            raise ValueError("window needs 0 < t_low < t_high")

    @classmethod
    def between(cls, t_low, t_high):
        return cls(None, float(t_low), float(t_high))


def _window(window):
    return window if isinstance(window, TruncationWindow) else TruncationWindow(int(window))


def _check_r(r):
    r = as_exponent(r)
    if not 0 < r.value < 2:
        raise RegimeError(f"the representation needs 0 < r < 2, got {r.value}")
    return r


def cr_constant(r) -> float:
    """Gamma(r+1) sin(pi r / 2) / pi, through the log-gamma function."""
    r = _check_r(r)
    return math.exp(math.lgamma(r.value + 1)) * math.sin(math.pi * r.value / 2) / math.pi


def _oscillatory_tail(s, big_u, terms=12):
    """Re of the integral of e^{iu} u^{-s} over [U, inf), by its asymptotic series."""
    total = 0j
    coeff = 1.0 + 0j
    for k in range(terms):
        total += coeff * big_u ** (-s - k)
        coeff *= -1j * (s + k)
    remainder = abs(coeff) * big_u ** (-s - terms)
    return (1j * complex(math.cos(big_u), math.sin(big_u)) * total).real, remainder


def cr_reciprocal_check(r, rel_tol: Optional[float] = None) -> float:
    """C_r times the integral of (1 - cos u)/|u|^(r+1) over the real line (should be 1).

    The integral is 2 * (part on (0, 1] + part on [1, inf)). Near 0 the
    integrand behaves like u^(1-r)/2 and is integrated after a graded
    substitution. On [1, inf) it is 1/r minus the integral of cos(u) u^-(r+1),
    which is computed numerically up to U = 320 pi and by its asymptotic
    series beyond.
    """
    r = _check_r(r)
    rv = r.value
    if rv < MIN_R:
        raise RegimeError(f"representation checks are supported for r >= {MIN_R}")
    if rel_tol is None:
        rel_tol = 1e-6 if rv > 1.8 else 1e-8
    quad_tol = rel_tol * 1e-3

    def near_zero(u):
        # (1 - cos u) / u^(r+1) = u^(1-r) * sinc(u/2)^2 / 2
        return 0.5 * np.sinc(u / (2 * math.pi)) ** 2

    head = integrate_graded(near_zero, 1.0, 1 - rv, factored=True, rel_tol=quad_tol)
    big_u = 320 * math.pi
    body = integrate(lambda u: np.cos(u) * u ** (-rv - 1), 1.0, big_u,
                     max_width=math.pi / 4, rel_tol=quad_tol, abs_tol=quad_tol * 1e-3)
    tail, remainder = _oscillatory_tail(rv + 1, big_u)
    cos_part = body.value + tail
    total = 2 * (head.value + 1 / rv - cos_part)
    error = 2 * (head.error + body.error + remainder)
    if error > rel_tol * total:
        raise ToleranceNotMet("C_r reciprocal integral missed its tolerance", error / total)
    return cr_constant(r) * total


def _breakpoints(t_low, t_high):
    # geometric edges resolve the t^-(r+1) growth at the small end
    pts = [t_low]
    while pts[-1] * 2 < t_high:
        pts.append(pts[-1] * 2)
    return pts


def phi_n_estimate(z, r, window, rel_tol: float = 1e-10):
    """(value, error estimate) of Phi_n(z)."""
    r = _check_r(r)
    w = _window(window)
    z = abs(float(z))
    if z == 0:
        return 0.0, 0.0
    if w.t_high * z > MAX_OSCILLATIONS:
        raise ToleranceNotMet(
            f"window upper limit {w.t_high:g} times |z| = {z:g} exceeds {MAX_OSCILLATIONS:g}")
    rv = r.value
    zr = z**rv

    def f(t):
        return 2 * np.sin(t * z / 2) ** 2 / t ** (rv + 1)

    res = integrate(f, w.t_low, w.t_high, breakpoints=_breakpoints(w.t_low, w.t_high),
                    max_width=math.pi / (4 * z), rel_tol=rel_tol,
                    abs_tol=rel_tol * 1e-3 * zr, max_panels=200000)
    c = cr_constant(r)
    value = 2 * c * res.value
    error = 2 * c * res.error
    if value < -error - 1e-300 or value > zr + error + 4 * np.finfo(float).eps * zr:
        raise ToleranceNotMet(f"Phi_n({z}) = {value!r} left [0, |z|^r = {zr!r}]", error)
    return value, error


def phi_n(z, r, window, rel_tol: float = 1e-10) -> float:
    """Phi_n(z) = C_r * integral over the window of (1 - cos tz)/|t|^(r+1), both signs of t."""
    return phi_n_estimate(z, r, window, rel_tol)[0]


@dataclass
class TruncatedDelta:
    n: Optional[int]
    integral_channel: float
    expectation_channel: float
    integral_error: float
    expectation_error: float
    tolerance: float

    @property
    def mismatch(self) -> float:
        return abs(self.integral_channel - self.expectation_channel)

    def to_dict(self):
        return {"n": self.n, "integral_channel": self.integral_channel,
                "expectation_channel": self.expectation_channel,
                "mismatch": self.mismatch, "tolerance": self.tolerance}


def truncated_delta_channels(model, r, window, rel_tol: float = 1e-8) -> TruncatedDelta:
    if isinstance(model, TwoPointLaw):
        model = model.joint()
    if not isinstance(model, DiscreteJoint) or not model.is_finite:
        raise RegimeError("truncated_delta needs a finite discrete model")
    r = _check_r(r)
    w = _window(window)
    a = model.atoms
    z_max = 2 * float(np.max(np.abs(a)))
    if z_max == 0:
        return TruncatedDelta(w.n, 0.0, 0.0, 0.0, 0.0, 0.0)
    if w.t_high * z_max > MAX_OSCILLATIONS:
        raise ToleranceNotMet(f"window {w.t_high:g} too wide for atoms up to {z_max / 2:g}")
    c = cr_constant(r)
    rv = r.value
    scale_guess = float(np.sum(model.weights * np.abs(a[:, None] + a[None, :]) ** rv))

    def integrand(t):
        return sin_quadratic_form(model, t) / t ** (rv + 1)

    res = integrate(integrand, w.t_low, w.t_high,
                    breakpoints=_breakpoints(w.t_low, w.t_high),
                    max_width=math.pi / (4 * z_max), rel_tol=rel_tol * 1e-2,
                    abs_tol=rel_tol * 1e-3 * max(scale_guess, 1e-300) / (4 * c),
                    max_panels=400000)
    channel_a = 4 * c * res.value
    err_a = 4 * c * res.error

    cache = {}

    def phi(z):
        key = abs(float(z))
        if key not in cache:
            cache[key] = phi_n_estimate(key, r, w, rel_tol * 1e-2)
        return cache[key]

    terms, errs, scale_terms = [], [], []
    for i in range(model.n):
        for j in range(model.n):
            p = model.weights[i, j]
            if p == 0:
                continue
            vp, ep = phi(a[i] + a[j])
            vm, em = phi(a[i] - a[j])
            terms.append(p * (vp - vm))
            errs.append(p * (ep + em))
            scale_terms.append(p * (vp + vm))
    channel_b = math.fsum(terms)
    err_b = math.fsum(errs)
    tolerance = err_a + err_b + rel_tol * max(math.fsum(scale_terms), 1e-300)
    out = TruncatedDelta(w.n, channel_a, channel_b, err_a, err_b, tolerance)
    if out.mismatch > tolerance:
        raise ChannelMismatch(
            f"integral channel {channel_a!r} and expectation channel {channel_b!r} "
            f"differ by {out.mismatch:.3g} > {tolerance:.3g}")
    return out


def truncated_delta(model, r, window, rel_tol: float = 1e-8) -> float:
    """E{Phi_n(X+Y) - Phi_n(X-Y)} via the t-integral of the sin quadratic form."""
    return truncated_delta_channels(model, r, window, rel_tol).integral_channel
