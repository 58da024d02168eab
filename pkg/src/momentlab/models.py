"""Symmetric bivariate laws: discrete joints, densities and the two-point family."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Union

import numpy as np

from . import expr as ex
from .errors import (
    AsymmetricInput,
    DuplicateAtom,
    EpsilonOutOfRange,
    InvalidDomain,
    NegativeWeight,
    NonPositiveParameter,
    NotNormalized,
    RegimeError,
    TailTooHeavy,
)
from .quadrature import integrate

NORMALIZATION_TOL = 1e-9
DENSITY_NORMALIZATION_TOL = 1e-8
TAIL_WARNING = 0.01
TAIL_LIMIT = 0.1

REGIMES = ("negative", "subadditive", "convex", "quadratic", "failure")


@dataclass(frozen=True)
class RExponent:
    """An exponent r together with the regime of the inequality it falls in."""

    value: float

    def __post_init__(self):
        v = float(self.value)
        if not math.isfinite(v):
            raise RegimeError(f"exponent must be finite, got {self.value!r}")
        if v == 0:
            raise RegimeError("r = 0 is degenerate (both moments equal 1) and is not supported")
        object.__setattr__(self, "value", v)

    @property
    def regime(self) -> str:
        v = self.value
        if v < 0:
            return "negative"
        if v <= 1:
            return "subadditive"
        if v < 2:
            return "convex"
        if v == 2:
            return "quadratic"
        return "failure"

    @property
    def a_r(self) -> float:
        """Constant in |x +- y|^r <= A_r (|x|^r + |y|^r), valid for r > 0."""
        if self.value <= 0:
            raise RegimeError("A_r is only defined for r > 0")
        return 1.0 if self.value <= 1 else 2.0 ** (self.value - 1)

    def __float__(self):
        return self.value


def as_exponent(r) -> RExponent:
    return r if isinstance(r, RExponent) else RExponent(r)


# -- discrete joints -------------------------------------------------------------

def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DiscreteJoint:
    """P(X = atoms[i], Y = atoms[j]) = weights[i, j].

    ``tail_mass_bound`` is the probability left outside a truncated countable
    model; it is 0 for genuinely finite models.
    """

    atoms: np.ndarray
    weights: np.ndarray
    tail_mass_bound: float = 0.0
    tail_warning: bool = False

    def __post_init__(self):
        atoms = _frozen(self.atoms).ravel()
        weights = _frozen(self.weights)
        n = atoms.size
        if n == 0:
            raise ValueError("a discrete joint needs at least one atom")
        if weights.shape != (n, n):
            raise ValueError(f"weights must be {n}x{n}, got {weights.shape}")
        if not np.all(np.isfinite(atoms)):
            raise ValueError("atoms must be finite")
        if np.unique(atoms).size != n:
            raise DuplicateAtom("atoms must be pairwise distinct")
        if not np.array_equal(weights, weights.T):
            raise AsymmetricInput("weights must be exactly symmetric")
        if np.any(~(weights >= 0)):
            raise NegativeWeight("weights must be non-negative")
        if not self.tail_mass_bound >= 0:
            raise ValueError("tail_mass_bound must be non-negative")
        total = math.fsum(weights.ravel()) + self.tail_mass_bound
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise NotNormalized(f"weights plus tail mass sum to {total!r}, not 1")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @property
    def n(self) -> int:
        return self.atoms.size

    @property
    def is_finite(self) -> bool:
        return self.tail_mass_bound == 0.0

    def marginal(self) -> np.ndarray:
        """Marginal law of X (equal to that of Y by symmetry)."""
        return np.array([math.fsum(row) for row in self.weights])

    def to_dict(self):
        return {
            "atoms": self.atoms.tolist(),
            "weights": self.weights.tolist(),
            "tail_mass_bound": self.tail_mass_bound,
        }


def _check_atoms(atoms):
    atoms = np.asarray(atoms, dtype=float).ravel()
    if len(set(atoms.tolist())) != atoms.size:
        raise DuplicateAtom("atoms must be pairwise distinct")
    return atoms


def cauchy_kernel_matrix(c, d) -> np.ndarray:
    """Entries d_i d_j / (c_i + c_j); exactly symmetric in floating point."""
    c = np.asarray(c, dtype=float)
    d = np.asarray(d, dtype=float)
    return np.outer(d, d) / (c[:, None] + c[None, :])


def build_cauchy_discrete(atoms, c, d, normalize=False) -> DiscreteJoint:
    """Discrete law with Cauchy-kernel weights d_i d_j / (c_i + c_j).

    With ``normalize`` the d's are rescaled by 1/sqrt(S), S the kernel's total
    mass; scaling d by lam scales the mass by lam**2, so the result sums to 1.
    """
    atoms = np.asarray(atoms, dtype=float).ravel()
    c = np.asarray(c, dtype=float).ravel()
    d = np.asarray(d, dtype=float).ravel()
    if not (atoms.size == c.size == d.size) or atoms.size == 0:
        raise ValueError("atoms, c and d must be non-empty and of equal length")
    if np.any(~(c > 0)) or np.any(~(d > 0)):
        raise NonPositiveParameter("all c_i and d_i must be strictly positive")
    atoms = _check_atoms(atoms)
    kernel = cauchy_kernel_matrix(c, d)
    total = math.fsum(kernel.ravel())
    if normalize:
        kernel = cauchy_kernel_matrix(c, d / math.sqrt(total))
        # the sqrt rescaling leaves a few ulps; the exact division removes them
        kernel = kernel / math.fsum(kernel.ravel())
    elif abs(total - 1.0) > NORMALIZATION_TOL:
        raise NotNormalized(f"Cauchy weights sum to {total!r}; pass normalize=True to rescale d")
    return DiscreteJoint(atoms, kernel)


def build_general_discrete(atoms, weights) -> DiscreteJoint:
    m = np.asarray(weights, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("weights must be a square matrix")
    if np.any(~np.isfinite(m)):
        raise NegativeWeight("weights must be finite")
    if np.max(np.abs(m - m.T), initial=0.0) > 1e-12:
        raise AsymmetricInput("weight matrix is not symmetric within 1e-12")
    if np.any(m < 0):
        raise NegativeWeight("weights must be non-negative")
    total = math.fsum(m.ravel())
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise NotNormalized(f"weights sum to {total!r}, not 1")
    atoms = _check_atoms(atoms)
    if atoms.size != m.shape[0]:
        raise ValueError("number of atoms must match the matrix size")
    return DiscreteJoint(atoms, (m + m.T) / 2.0)


def truncate_countable(rule_a, rule_c, rule_d, m: int) -> DiscreteJoint:
    """Truncate a countable Cauchy-kernel model to indices 1..m.

    Rules are expressions in the index variable ``i`` (strings are parsed).
    The probability outside the truncation is reported as ``tail_mass_bound``.
    """
    if int(m) != m or m < 1:
        raise ValueError("truncation size m must be a positive integer")
    rules = [ex.parse_expr(r, "i") if isinstance(r, str) else r
             for r in (rule_a, rule_c, rule_d)]
    idx = range(1, int(m) + 1)
    a, c, d = ([ex.eval_expr(rule, i) for i in idx] for rule in rules)
    c = np.array(c)
    d = np.array(d)
    if np.any(~(c > 0)) or np.any(~(d > 0)):
        raise NonPositiveParameter("c_i and d_i must be positive on the truncation")
    atoms = _check_atoms(a)
    kernel = cauchy_kernel_matrix(c, d)
    partial = math.fsum(kernel.ravel())
    if partial > 1.0 + NORMALIZATION_TOL:
        raise NotNormalized(f"partial mass {partial!r} already exceeds 1")
    tail = max(0.0, 1.0 - partial)
    if tail >= TAIL_LIMIT:
        raise TailTooHeavy(f"tail mass {tail:.3g} outside the truncation is >= {TAIL_LIMIT}")
    return DiscreteJoint(atoms, kernel, tail_mass_bound=tail,
                         tail_warning=tail >= TAIL_WARNING)


# -- two-point counterexample family ----------------------------------------------

@dataclass(frozen=True)
class TwoPointLaw:
    """X = A with probability p and X = -1 with probability q = 1 - p."""

    high_atom: float
    p: float
    q: float
    r: float
    low_atom: float = -1.0
    # exact values when A and p are rational (r integer and 2r/(r-2) integer)
    high_atom_exact: Optional[Fraction] = None
    p_exact: Optional[Fraction] = None

    def __post_init__(self):
        # q = 1 - p rounds to exactly 1 when p is tiny (r close to 2)
        if not (0 < self.p < 0.5 < self.q <= 1) or abs(self.p + self.q - 1) > 1e-15:
            raise ValueError(f"need 0 < p < 1/2 < q = 1 - p, got p={self.p!r}, q={self.q!r}")
        if not self.high_atom > 1:
            raise ValueError("high atom must exceed 1")

    @property
    def exact(self) -> bool:
        return self.p_exact is not None

    def joint(self) -> DiscreteJoint:
        p, q = self.p, self.q
        return build_general_discrete([self.high_atom, self.low_atom],
                                      [[p * p, p * q], [p * q, q * q]])


def counterexample_exponent(r) -> tuple[float, Optional[int]]:
    """Return 2r/(r-2) and, when it is an integer and r is too, that integer."""
    r = as_exponent(r).value
    k = 2 * r / (r - 2)
    if r.is_integer():
        kf = Fraction(2 * int(r), int(r) - 2)
        if kf.denominator == 1:
            return k, int(kf)
    return k, None


def build_counterexample(r) -> TwoPointLaw:
    """Two-point law with A = 2^(2r/(r-2)), p = r / (2^r A)."""
    r = as_exponent(r)
    if r.value <= 2:
        raise RegimeError(f"the two-point counterexample needs r > 2, got {r.value}")
    k, k_int = counterexample_exponent(r)
    if k >= 1024:
        raise RegimeError(f"A = 2^{k:.4g} overflows double precision; r is too close to 2")
    if k_int is not None:
        ri = int(r.value)
        a_exact = Fraction(2) ** k_int
        p_exact = Fraction(ri) / (2**ri * a_exact)
        return TwoPointLaw(float(a_exact), float(p_exact), float(1 - p_exact), r.value,
                           high_atom_exact=a_exact, p_exact=p_exact)
    log_a = k * math.log(2.0)
    p = math.exp(math.log(r.value) - r.value * math.log(2.0) - log_a)
    return TwoPointLaw(2.0**k, p, 1.0 - p, r.value)


# -- densities -------------------------------------------------------------------

@dataclass(frozen=True)
class CauchyKernel:
    c: ex.Expr
    d: ex.Expr


@dataclass(frozen=True)
class ProductKernel:
    """f(x, y) = h(x) h(y) with h piecewise constant: pieces are (lo, hi, height)."""

    pieces: tuple


@dataclass(frozen=True)
class MixtureUniform:
    """f = sum_k mass_k U_k(x) U_k(y), U_k uniform on [center-halfwidth, center+halfwidth]."""

    components: tuple


@dataclass(frozen=True)
class SmoothedDiscrete:
    """f = sum_ij p_ij U_i(x) U_j(y), U_i uniform on [a_i - eps, a_i + eps]."""

    atoms: tuple
    weights: tuple
    epsilon: float


Kernel = Union[CauchyKernel, ProductKernel, MixtureUniform, SmoothedDiscrete]


@dataclass(frozen=True)
class Cell:
    """Rectangle of D x D on which the density is a constant or a smooth function."""

    x0: float
    x1: float
    y0: float
    y1: float
    weight: Union[float, Callable]

    @property
    def constant(self) -> bool:
        return not callable(self.weight)

    def value(self, x, y):
        if callable(self.weight):
            return self.weight(x, y)
        return np.full(np.broadcast(x, y).shape, self.weight)


def merge_intervals(intervals):
    """Sorted union of closed intervals (touching intervals are merged)."""
    out = []
    for lo, hi in sorted(intervals):
        if out and lo <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], hi))
        else:
            out.append((lo, hi))
    return tuple(out)


def _check_domain(domain):
    domain = tuple((float(lo), float(hi)) for lo, hi in domain)
    if not domain:
        raise InvalidDomain("domain must contain at least one interval")
    for lo, hi in domain:
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise InvalidDomain(f"interval [{lo}, {hi}] must be bounded with lo < hi")
    ordered = sorted(domain)
    for (_, hi), (lo, _) in zip(ordered[:-1], ordered[1:]):
        if lo <= hi:
            raise InvalidDomain("domain intervals must be disjoint")
    return tuple(ordered)


@dataclass(frozen=True)
class DensityModel:
    """Symmetric joint density f(x, y) on D x D, D a finite union of intervals."""

    domain: tuple
    kernel: Kernel
    normalization_constant: float = 1.0
    _cells: tuple = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        if not self.normalization_constant > 0:
            raise ValueError("normalization constant must be positive")
        if not self._cells:
            object.__setattr__(self, "_cells", tuple(_kernel_cells(self)))

    def cells(self) -> tuple:
        return self._cells

    def pdf(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.zeros(np.broadcast(x, y).shape)
        for cell in self._cells:
            inside = (x >= cell.x0) & (x <= cell.x1) & (y >= cell.y0) & (y <= cell.y1)
            if np.any(inside):
                xb, yb = np.broadcast_arrays(x, y)
                out[inside] += cell.value(xb[inside], yb[inside])
        return out

    def marginal_masses(self) -> list[tuple[float, float, float]]:
        """(lo, hi, mass) of the X-marginal on each x-range used by the cells."""
        masses = {}
        for cell in self._cells:
            if cell.constant:
                m = cell.weight * (cell.x1 - cell.x0) * (cell.y1 - cell.y0)
            else:
                m = integrate_rectangle(cell.weight, cell.x0, cell.x1, cell.y0, cell.y1)
            key = (cell.x0, cell.x1)
            masses[key] = masses.get(key, 0.0) + m
        return [(lo, hi, m) for (lo, hi), m in sorted(masses.items())]

    def total_mass(self) -> float:
        return math.fsum(m for _, _, m in self.marginal_masses())

    @property
    def total_length(self) -> float:
        return sum(hi - lo for lo, hi in self.domain)


def integrate_rectangle(func, x0, x1, y0, y1, rel_tol=1e-11):
    """Nested adaptive integral of a smooth func(x, y) over a rectangle."""

    def inner(xs):
        return np.array([
            integrate(lambda y, x=x: func(np.full_like(y, x), y), y0, y1,
                      rel_tol=rel_tol).value
            for x in xs
        ])

    return integrate(inner, x0, x1, rel_tol=rel_tol).value


def _kernel_cells(model):
    k = model.kernel
    norm = model.normalization_constant
    if isinstance(k, ProductKernel):
        return [Cell(a0, a1, b0, b1, norm * ha * hb)
                for a0, a1, ha in k.pieces for b0, b1, hb in k.pieces]
    if isinstance(k, MixtureUniform):
        return [Cell(cen - hw, cen + hw, cen - hw, cen + hw, norm * mass / (4 * hw * hw))
                for cen, hw, mass in k.components]
    if isinstance(k, SmoothedDiscrete):
        e = k.epsilon
        cells = []
        for i, ai in enumerate(k.atoms):
            for j, aj in enumerate(k.atoms):
                w = k.weights[i][j]
                if w > 0:
                    cells.append(Cell(ai - e, ai + e, aj - e, aj + e, norm * w / (4 * e * e)))
        return cells
    if isinstance(k, CauchyKernel):
        def weight(x, y, c=k.c, d=k.d):
            return norm * ex.eval_array(d, x) * ex.eval_array(d, y) / (
                ex.eval_array(c, x) + ex.eval_array(c, y))
        return [Cell(a0, a1, b0, b1, weight)
                for a0, a1 in model.domain for b0, b1 in model.domain]
    raise TypeError(f"unknown kernel {type(k).__name__}")


def sample_grid(domain, per_interval=1024):
    return np.concatenate([np.linspace(lo, hi, per_interval) for lo, hi in domain])


def build_cauchy_density(c, d, domain, normalize=True) -> DensityModel:
    """Density proportional to d(x) d(y) / (c(x) + c(y)) on D x D."""
    c = ex.parse_expr(c) if isinstance(c, str) else c
    d = ex.parse_expr(d) if isinstance(d, str) else d
    domain = _check_domain(domain)
    grid = sample_grid(domain)
    cv = ex.eval_array(c, grid)
    dv = ex.eval_array(d, grid)
    if np.any(~(cv > 0)) or np.any(~(dv > 0)):
        raise NonPositiveParameter("c(x) and d(x) must be positive on the domain")
    if not (np.all(np.isfinite(cv)) and np.all(np.isfinite(dv))):
        raise NonPositiveParameter("c(x) and d(x) must be finite on the domain")
    raw = DensityModel(domain, CauchyKernel(c, d), 1.0)
    total = raw.total_mass()
    if normalize:
        model = DensityModel(domain, raw.kernel, 1.0 / total)
        check = model.total_mass()
        if abs(check - 1.0) > DENSITY_NORMALIZATION_TOL:
            raise NotNormalized(f"normalized density integrates to {check!r}")
        return model
    if abs(total - 1.0) > DENSITY_NORMALIZATION_TOL:
        raise NotNormalized(f"density integrates to {total!r}, not 1")
    return raw


def build_product_density(pieces) -> DensityModel:
    """f(x, y) = h(x) h(y) with piecewise-constant marginal h given as (lo, hi, height)."""
    pieces = tuple(sorted((float(lo), float(hi), float(h)) for lo, hi, h in pieces))
    if not pieces:
        raise InvalidDomain("product density needs at least one piece")
    for lo, hi, h in pieces:
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise InvalidDomain(f"piece [{lo}, {hi}] must be bounded with lo < hi")
        if not (h > 0 and math.isfinite(h)):
            raise NonPositiveParameter("piece heights must be positive")
    for (_, hi, _), (lo, _, _) in zip(pieces[:-1], pieces[1:]):
        if lo < hi:
            raise InvalidDomain("marginal pieces must not overlap")
    mass = math.fsum(h * (hi - lo) for lo, hi, h in pieces)
    if abs(mass - 1.0) > DENSITY_NORMALIZATION_TOL:
        raise NotNormalized(f"marginal integrates to {mass!r}, not 1")
    domain = merge_intervals([(lo, hi) for lo, hi, _ in pieces])
    return DensityModel(domain, ProductKernel(pieces))


def build_mixture_density(components) -> DensityModel:
    comps = tuple((float(c), float(hw), float(m)) for c, hw, m in components)
    if not comps:
        raise InvalidDomain("mixture needs at least one component")
    for cen, hw, m in comps:
        if not (math.isfinite(cen) and hw > 0 and math.isfinite(hw)):
            raise NonPositiveParameter("component halfwidths must be positive and finite")
        if not (m > 0):
            raise NonPositiveParameter("component masses must be positive")
    total = math.fsum(m for _, _, m in comps)
    if abs(total - 1.0) > DENSITY_NORMALIZATION_TOL:
        raise NotNormalized(f"component masses sum to {total!r}, not 1")
    domain = merge_intervals([(c - hw, c + hw) for c, hw, _ in comps])
    return DensityModel(domain, MixtureUniform(comps))


def build_smoothed(law: TwoPointLaw, epsilon: float) -> DensityModel:
    """Independent copies of Z + eps*U, U uniform on [-1, 1], Z from ``law``."""
    if not (0 < epsilon < 0.5):
        raise EpsilonOutOfRange(f"epsilon must lie in (0, 1/2), got {epsilon!r}")
    e = float(epsilon)
    lo_atom, hi_atom = law.low_atom, law.high_atom
    pieces = ((lo_atom - e, lo_atom + e, law.q / (2 * e)),
              (hi_atom - e, hi_atom + e, law.p / (2 * e)))
    return DensityModel(merge_intervals([(a, b) for a, b, _ in pieces]), ProductKernel(pieces))


def build_uniform_remark() -> DensityModel:
    """X, Y independent and uniform on [1, 2]."""
    return DensityModel(((1.0, 2.0),), ProductKernel(((1.0, 2.0, 1.0),)))


def smooth_discrete(model: DiscreteJoint, epsilon: float) -> DensityModel:
    """Replace every atom by a uniform bump of half-width ``epsilon``."""
    if not epsilon > 0:
        raise EpsilonOutOfRange("epsilon must be positive")
    if not model.is_finite:
        raise ValueError("only finite discrete models can be smoothed")
    e = float(epsilon)
    domain = merge_intervals([(a - e, a + e) for a in model.atoms.tolist()])
    kernel = SmoothedDiscrete(tuple(model.atoms.tolist()),
                              tuple(tuple(row) for row in model.weights.tolist()), e)
    return DensityModel(domain, kernel)
