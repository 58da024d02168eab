"""E|X+Y|^r, E|X-Y|^r and their difference by summation, quadrature and Monte Carlo."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Optional

import numpy as np

from . import expr as ex
from .errors import RegimeError, RejectionInefficiency, ToleranceNotMet
from .models import (
    CauchyKernel,
    DensityModel,
    DiscreteJoint,
    MixtureUniform,
    ProductKernel,
    SmoothedDiscrete,
    TwoPointLaw,
    as_exponent,
    sample_grid,
)
from .quadrature import integrate, integrate_graded

EXACT = "exact"
QUADRATURE = "quadrature"
MONTE_CARLO = "monte-carlo"

SIGNS = {"plus": 1.0, "minus": -1.0}
CI_LEVEL = 0.99
Z_99 = NormalDist().inv_cdf(0.5 + CI_LEVEL / 2)
MIN_MC_SAMPLES = 1000
MC_BATCH = 1 << 16
_EPS = np.finfo(float).eps


@dataclass
class MomentEstimate:
    value: float
    abs_error_bound: float
    method: str
    n: int = 0
    seed: Optional[int] = None
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        out = {"value": self.value, "abs_error_bound": self.abs_error_bound,
               "method": self.method, "n": self.n}
        if self.seed is not None:
            out["seed"] = self.seed
        if self.diagnostics:
            out["diagnostics"] = dict(self.diagnostics)
        return out


def _sign(sign) -> float:
    try:
        return SIGNS[sign]
    except KeyError:
        raise ValueError(f"sign must be 'plus' or 'minus', got {sign!r}") from None


def _as_model(model):
    return model.joint() if isinstance(model, TwoPointLaw) else model


def abs_power(z, r: float):
    """|z|^r with 0^r = 0 for r > 0 and 0^r = +inf for r < 0."""
    z = np.abs(np.asarray(z, dtype=float))
    with np.errstate(divide="ignore"):
        out = np.power(z, r)
    if r > 0:
        out = np.where(z == 0, 0.0, out)
    return out


# -- exact summation ------------------------------------------------------------

def moment_discrete(model: DiscreteJoint, r, sign="plus",
                    negative_convention: bool = False) -> MomentEstimate:
    """sum_ij p_ij |a_i +- a_j|^r with exactly rounded summation.

    Negative r needs ``negative_convention``: a positive-mass zero of
    |a_i +- a_j| then makes the moment +inf.
    """
    model = _as_model(model)
    r = as_exponent(r)
    s = _sign(sign)
    if r.value < 0 and not negative_convention:
        raise RegimeError("negative r needs negative_convention=True (0^r = +inf)")
    a = model.atoms
    base = np.abs(a[:, None] + s * a[None, :])
    p = model.weights
    mask = p > 0
    powers = abs_power(base[mask], r.value)
    terms = p[mask] * powers
    if np.any(np.isinf(terms)):
        return MomentEstimate(math.inf, 0.0, EXACT, n=int(mask.sum()),
                              diagnostics={"infinite": True})
    terms = terms[np.argsort(-np.abs(terms), kind="stable")]
    value = math.fsum(terms)
    # pow and the +- each cost a few ulps; r amplifies the relative error of |a_i +- a_j|
    bound = (abs(r.value) / 2 + 3) * _EPS * math.fsum(np.abs(terms))
    diag = {}
    if not model.is_finite:
        bound += model.tail_mass_bound * float(np.max(powers, initial=0.0))
        diag["heuristic_tail"] = True
    return MomentEstimate(value, bound, EXACT, n=int(mask.sum()), diagnostics=diag)


def expectation_xy(model) -> MomentEstimate:
    """E[XY], by exact summation (discrete) or cellwise quadrature (density)."""
    model = _as_model(model)
    if isinstance(model, DiscreteJoint):
        a = model.atoms
        terms = (np.outer(a, a) * model.weights).ravel()
        value = math.fsum(terms)
        return MomentEstimate(value, 3 * _EPS * math.fsum(np.abs(terms)), EXACT, n=terms.size)
    parts, errs = [], []
    for cell in model.cells():
        if cell.constant:
            parts.append(cell.weight * (cell.x1**2 - cell.x0**2) / 2 * (cell.y1**2 - cell.y0**2) / 2)
            errs.append(4 * _EPS * abs(parts[-1]))
        else:
            res = _rectangle(lambda x, y, c=cell: x * y * c.weight(x, y),
                             cell.x0, cell.x1, cell.y0, cell.y1, 1e-11)
            parts.append(res[0])
            errs.append(res[1])
    return MomentEstimate(math.fsum(parts), math.fsum(errs), QUADRATURE, n=len(parts))


def _rectangle(func, x0, x1, y0, y1, rel_tol):
    inner_err = [0.0]

    def inner(xs):
        out = np.empty(len(xs))
        for k, x in enumerate(xs):
            res = integrate(lambda y: func(np.full_like(y, x), y), y0, y1, rel_tol=rel_tol)
            out[k] = res.value
            inner_err[0] = max(inner_err[0], res.error)
        return out

    res = integrate(inner, x0, x1, rel_tol=rel_tol)
    return res.value, res.error + (x1 - x0) * inner_err[0]


# -- quadrature -------------------------------------------------------------------

def _cell_crosses_kink(cell, s):
    corners = [x + s * y for x in (cell.x0, cell.x1) for y in (cell.y0, cell.y1)]
    return min(corners) <= 0 <= max(corners)


def _inner_integral(cell, x, s, r, rel_tol):
    """Integral over y in [y0, y1] of |x + s y|^r w(x, y), split at the kink."""
    y0, y1 = cell.y0, cell.y1
    kink = -s * x

    def piece(start, direction, length, gap):
        # y = start + direction * u, distance to the kink = gap + u
        def weight(u):
            return cell.value(np.full_like(u, x), start + direction * u)
        if gap == 0:
            return integrate_graded(weight, length, r, factored=True,
                                    rel_tol=rel_tol, abs_tol=1e-300)
        return integrate_graded(lambda u: abs_power(gap + u, r) * weight(u), length,
                                max(r, 0.0), rel_tol=rel_tol, abs_tol=1e-300)

    if y0 < kink < y1:
        parts = [piece(kink, -1.0, kink - y0, 0.0), piece(kink, 1.0, y1 - kink, 0.0)]
    elif kink <= y0:
        parts = [piece(y0, 1.0, y1 - y0, y0 - kink)]
    else:
        parts = [piece(y1, -1.0, y1 - y0, kink - y1)]
    return sum(p.value for p in parts), sum(p.error for p in parts)


def _cell_moment(cell, s, r, rel_tol):
    inner_tol = rel_tol / 10
    worst_inner = [0.0]

    def outer(xs):
        out = np.empty(len(xs))
        for k, x in enumerate(xs):
            val, err = _inner_integral(cell, float(x), s, r, inner_tol)
            out[k] = val
            worst_inner[0] = max(worst_inner[0], err)
        return out

    # the inner integral is non-smooth where the kink meets a y-edge of the cell
    kinks = sorted({-s * cell.y0, -s * cell.y1})
    edges = sorted({cell.x0, cell.x1, *[k for k in kinks if cell.x0 < k < cell.x1]})
    value, error, panels = 0.0, 0.0, 0
    for lo, hi in zip(edges[:-1], edges[1:]):
        sing_lo, sing_hi = lo in kinks, hi in kinks
        segments = []
        if sing_lo and sing_hi:
            mid = 0.5 * (lo + hi)
            segments = [(lo, mid, "lo"), (mid, hi, "hi")]
        elif sing_lo:
            segments = [(lo, hi, "lo")]
        elif sing_hi:
            segments = [(lo, hi, "hi")]
        else:
            segments = [(lo, hi, None)]
        for a, b, where in segments:
            if where is None:
                res = integrate(outer, a, b, rel_tol=rel_tol, abs_tol=1e-300)
            elif where == "lo":
                res = integrate_graded(lambda u, a=a: outer(a + u), b - a, r + 1,
                                       rel_tol=rel_tol, abs_tol=1e-300)
            else:
                res = integrate_graded(lambda u, b=b: outer(b - u), b - a, r + 1,
                                       rel_tol=rel_tol, abs_tol=1e-300)
            value += res.value
            error += res.error
            panels += res.n_panels
    error += (cell.x1 - cell.x0) * worst_inner[0]
    return value, error, panels


def moment_density_quadrature(model: DensityModel, r, sign="plus",
                              rel_tol: float = 1e-8) -> MomentEstimate:
    """Nested adaptive quadrature of |x +- y|^r f(x, y) over D x D.

    Each cell of the density is integrated with the inner panels split on the
    line x +- y = 0 and graded towards it, so the kink (r > 0) or the weak
    singularity (-1 < r < 0) sits on a panel edge.
    """
    r = as_exponent(r)
    s = _sign(sign)
    if rel_tol < 1e-12:
        raise ValueError("rel_tol must be at least 1e-12")
    cells = model.cells()
    if r.value <= -1 and any(_cell_crosses_kink(c, s) for c in cells):
        return MomentEstimate(math.inf, 0.0, QUADRATURE, diagnostics={"infinite": True})
    values, errors, panels = [], [], 0
    try:
        for cell in cells:
            v, e, n = _cell_moment(cell, s, r.value, rel_tol)
            values.append(v)
            errors.append(e)
            panels += n
    except ToleranceNotMet as err:
        raise ToleranceNotMet(f"density quadrature for r={r.value}, sign={sign}: {err}",
                              err.achieved) from None
    value = math.fsum(values)
    error = math.fsum(errors)
    if error > max(rel_tol * abs(value), 1e-300) * 10:
        raise ToleranceNotMet("density quadrature missed its tolerance", error)
    return MomentEstimate(value, error, QUADRATURE, n=panels,
                          diagnostics={"rel_tol": rel_tol})


# -- Monte Carlo -------------------------------------------------------------------

class AliasTable:
    """Walker/Vose alias table for O(1) sampling from a finite distribution."""

    def __init__(self, probs):
        probs = np.asarray(probs, dtype=float).ravel()
        k = probs.size
        scaled = probs * k / probs.sum()
        self.prob = np.zeros(k)
        self.alias = np.zeros(k, dtype=np.int64)
        small = [i for i in range(k) if scaled[i] < 1.0]
        large = [i for i in range(k) if scaled[i] >= 1.0]
        while small and large:
            s = small.pop()
            g = large.pop()
            self.prob[s] = scaled[s]
            self.alias[s] = g
            scaled[g] = scaled[g] + scaled[s] - 1.0
            if scaled[g] < 1.0:
                small.append(g)
            else:
                large.append(g)
        for i in large + small:
            self.prob[i] = 1.0
            self.alias[i] = i

    def sample(self, rng, size):
        k = rng.integers(0, self.prob.size, size=size)
        u = rng.random(size)
        return np.where(u < self.prob[k], k, self.alias[k])


def _uniform_on_pieces(rng, size, pieces, table):
    """Sample from a density constant on each (lo, hi) piece, piece chosen by ``table``."""
    idx = table.sample(rng, size)
    lo = np.array([p[0] for p in pieces])[idx]
    hi = np.array([p[1] for p in pieces])[idx]
    return lo + (hi - lo) * rng.random(size)


def _make_sampler(model):
    if isinstance(model, DiscreteJoint):
        n = model.n
        table = AliasTable(model.weights)
        atoms = model.atoms

        def draw(rng, size):
            k = table.sample(rng, size)
            return atoms[k // n], atoms[k % n]
        return draw

    kernel = model.kernel
    if isinstance(kernel, ProductKernel):
        pieces = kernel.pieces
        table = AliasTable([h * (hi - lo) for lo, hi, h in pieces])

        def draw(rng, size):
            return (_uniform_on_pieces(rng, size, pieces, table),
                    _uniform_on_pieces(rng, size, pieces, table))
        return draw

    if isinstance(kernel, MixtureUniform):
        comps = kernel.components
        table = AliasTable([m for _, _, m in comps])
        centre = np.array([c for c, _, _ in comps])
        half = np.array([h for _, h, _ in comps])

        def draw(rng, size):
            k = table.sample(rng, size)
            x = centre[k] + half[k] * (2 * rng.random(size) - 1)
            y = centre[k] + half[k] * (2 * rng.random(size) - 1)
            return x, y
        return draw

    if isinstance(kernel, SmoothedDiscrete):
        atoms = np.array(kernel.atoms)
        n = atoms.size
        table = AliasTable(np.array(kernel.weights))
        e = kernel.epsilon

        def draw(rng, size):
            k = table.sample(rng, size)
            x = atoms[k // n] + e * (2 * rng.random(size) - 1)
            y = atoms[k % n] + e * (2 * rng.random(size) - 1)
            return x, y
        return draw

    if isinstance(kernel, CauchyKernel):
        return _cauchy_rejection_sampler(model)
    raise TypeError(f"no sampler for kernel {type(kernel).__name__}")


def _cauchy_rejection_sampler(model):
    """Rejection from the envelope N d_max^2 / (2 c_min), both taken on a dense grid."""
    kernel = model.kernel
    grid = sample_grid(model.domain, 4096)
    d_max = float(np.max(ex.eval_array(kernel.d, grid)))
    c_min = float(np.min(ex.eval_array(kernel.c, grid)))
    bound = 1.01 * model.normalization_constant * d_max**2 / (2 * c_min)
    intervals = [(lo, hi, 1.0) for lo, hi in model.domain]
    table = AliasTable([hi - lo for lo, hi in model.domain])
    rate = 1.0 / (bound * model.total_length**2)
    if rate < 0.01:
        raise RejectionInefficiency(f"expected acceptance rate {rate:.2%} is below 1%")

    def draw(rng, size):
        xs, ys = [], []
        got = 0
        proposed = 0
        accepted = 0
        while got < size:
            m = max(256, int(1.2 * (size - got) / rate))
            x = _uniform_on_pieces(rng, m, intervals, table)
            y = _uniform_on_pieces(rng, m, intervals, table)
            ratio = model.pdf(x, y) / bound
            if np.any(ratio > 1):
                raise RejectionInefficiency("density exceeded the rejection envelope")
            keep = rng.random(m) < ratio
            proposed += m
            accepted += int(keep.sum())
            if accepted < 0.01 * proposed and proposed >= 10000:
                raise RejectionInefficiency(
                    f"acceptance rate {accepted / proposed:.2%} is below 1%")
            xs.append(x[keep])
            ys.append(y[keep])
            got += int(keep.sum())
        return np.concatenate(xs)[:size], np.concatenate(ys)[:size]
    return draw


def _statistic(x, y, kind, r):
    if kind == "delta":
        return abs_power(x + y, r) - abs_power(x - y, r)
    return abs_power(x + SIGNS[kind] * y, r)


def _batch_stats(draw, seed, index, size, kind, r):
    rng = np.random.default_rng([seed, index])
    x, y = draw(rng, size)
    with np.errstate(invalid="ignore"):
        v = _statistic(x, y, kind, r)
    if not np.all(np.isfinite(v)):
        return size, math.inf, 0.0
    shift = v[0]
    mean = shift + float(np.mean(v - shift))
    m2 = float(np.sum((v - mean) ** 2))
    return size, mean, m2


def _run_batches(model, kind, r, n, seed, workers, batch_size):
    """Mean and 99% half-width of a statistic of (X, Y) over seeded batches.

    Batch ``b`` draws from its own generator seeded by ``(seed, b)`` and the
    batch statistics are merged in batch order, so the output is identical
    for every ``workers`` value. Returns None if any draw is non-finite.
    """
    if n < MIN_MC_SAMPLES:
        raise ValueError(f"Monte Carlo needs n >= {MIN_MC_SAMPLES}")
    if seed < 0:
        raise ValueError("seed must be non-negative")
    draw = _make_sampler(model)
    sizes = [batch_size] * (n // batch_size)
    if n % batch_size:
        sizes.append(n % batch_size)
    jobs = [(draw, seed, b, size, kind, r) for b, size in enumerate(sizes)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            stats = list(pool.map(lambda job: _batch_stats(*job), jobs))
    else:
        stats = [_batch_stats(*job) for job in jobs]

    count, mean, m2 = 0, 0.0, 0.0
    for nb, mb, m2b in stats:
        if math.isinf(mb):
            return None
        total = count + nb
        d = mb - mean
        mean = mean + d * nb / total
        m2 = m2 + m2b + d * d * count * nb / total
        count = total
    var = m2 / (count - 1)
    return mean, Z_99 * math.sqrt(var / count), len(sizes)


def moment_monte_carlo(model, r, sign="plus", n: int = 10**6, seed: int = 0,
                       workers: int = 1, batch_size: int = MC_BATCH) -> MomentEstimate:
    """Sample mean of |X +- Y|^r with a 99% normal confidence half-width."""
    model = _as_model(model)
    r = as_exponent(r)
    _sign(sign)
    res = _run_batches(model, sign, r.value, n, seed, workers, batch_size)
    if res is None:
        return MomentEstimate(math.inf, 0.0, MONTE_CARLO, n=n, seed=seed,
                              diagnostics={"infinite": True})
    mean, half, batches = res
    return MomentEstimate(mean, half, MONTE_CARLO, n=n, seed=seed,
                          diagnostics={"ci_level": CI_LEVEL, "batches": batches})


def delta_monte_carlo(model, r, n: int = 10**6, seed: int = 0, workers: int = 1,
                      batch_size: int = MC_BATCH) -> MomentEstimate:
    """Paired estimate of Delta: the mean of |X+Y|^r - |X-Y|^r on common draws.

    Pairing cancels most of the variance the two moments share. The moments
    themselves come from the same draws and are reported as diagnostics.
    """
    model = _as_model(model)
    plus = moment_monte_carlo(model, r, "plus", n, seed, workers, batch_size)
    minus = moment_monte_carlo(model, r, "minus", n, seed, workers, batch_size)
    if math.isinf(plus.value) or math.isinf(minus.value):
        return combine_delta(plus, minus)
    mean, half, batches = _run_batches(model, "delta", as_exponent(r).value, n, seed, workers,
                                       batch_size)
    return MomentEstimate(mean, half, MONTE_CARLO, n=n, seed=seed,
                          diagnostics={"ci_level": CI_LEVEL, "batches": batches, "paired": True,
                                       "e_plus": plus.value, "e_minus": minus.value})


# -- difference ---------------------------------------------------------------------

def _default_method(model):
    return EXACT if isinstance(model, DiscreteJoint) else QUADRATURE


def moment(model, r, sign, method=None, **params) -> MomentEstimate:
    model = _as_model(model)
    method = method or _default_method(model)
    if method == EXACT:
        if not isinstance(model, DiscreteJoint):
            raise ValueError("exact summation needs a discrete model")
        return moment_discrete(model, r, sign,
                               negative_convention=params.get("negative_convention", False))
    if method == QUADRATURE:
        if not isinstance(model, DensityModel):
            raise ValueError("quadrature needs a density model")
        return moment_density_quadrature(model, r, sign, params.get("rel_tol", 1e-8))
    if method in (MONTE_CARLO, "mc"):
        return moment_monte_carlo(model, r, sign, n=params.get("n", 10**6),
                                  seed=params.get("seed", 0), workers=params.get("workers", 1))
    raise ValueError(f"unknown method {method!r}")


def combine_delta(plus: MomentEstimate, minus: MomentEstimate) -> MomentEstimate:
    """plus - minus with added error bounds; inf - inf gives nan."""
    if math.isinf(plus.value) and math.isinf(minus.value):
        value = math.nan
    else:
        value = plus.value - minus.value
    return MomentEstimate(value, plus.abs_error_bound + minus.abs_error_bound, plus.method,
                          n=plus.n, seed=plus.seed,
                          diagnostics={"e_plus": plus.value, "e_minus": minus.value})


def delta(model, r, method=None, **params) -> MomentEstimate:
    """E|X+Y|^r - E|X-Y|^r.

    Monte Carlo uses the paired estimator; otherwise the two moments are
    computed separately and their error bounds added.
    """
    if method in (MONTE_CARLO, "mc"):
        return delta_monte_carlo(model, r, n=params.get("n", 10**6), seed=params.get("seed", 0),
                                 workers=params.get("workers", 1))
    plus = moment(model, r, "plus", method, **params)
    minus = moment(model, r, "minus", method, **params)
    return combine_delta(plus, minus)
