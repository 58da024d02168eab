"""Quadratic-form positivity of joint mass matrices and joint densities."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import expr as ex
from .errors import NonPositiveParameter, UnboundedProbe
from .models import DensityModel, DiscreteJoint, MixtureUniform, ProductKernel, SmoothedDiscrete
from .quadrature import gauss_legendre_cells

CERTIFIED = "certified"
NOT_FALSIFIED = "not_falsified"
FALSIFIED = "falsified"

PROBE_BOUND = 1e8
DEFAULT_PROBE_SEED = 20240601


@dataclass
class PositivityReport:
    verdict: str
    min_value: float
    method: str
    witness: Optional[object] = None
    seed: Optional[int] = None
    notes: list = field(default_factory=list)

    def to_dict(self):
        witness = self.witness
        if isinstance(witness, np.ndarray):
            witness = witness.tolist()
        out = {"verdict": self.verdict, "min_value": self.min_value,
               "method": self.method, "witness": witness}
        if self.seed is not None:
            out["seed"] = self.seed
        if self.notes:
            out["notes"] = list(self.notes)
        return out


def _canonical_sign(v):
    nz = np.flatnonzero(np.abs(v) > 1e-14)
    if nz.size and v[nz[0]] < 0:
        return -v
    return v


def check_psd_matrix(matrix, tol=1e-10):
    """Eigenvalue test of a symmetric matrix with tolerance relative to its inf-norm.

    Returns (is_psd, lambda_min, unit eigenvector for lambda_min).
    """
    m = np.asarray(matrix, dtype=float)
    vals, vecs = np.linalg.eigh(m)
    scale = np.max(np.sum(np.abs(m), axis=1))
    lam = float(vals[0])
    return lam >= -tol * scale, lam, _canonical_sign(vecs[:, 0])


def check_psd_discrete(model: DiscreteJoint, tol: float = 1e-10) -> PositivityReport:
    ok, lam, vec = check_psd_matrix(model.weights, tol)
    if not ok:
        return PositivityReport(FALSIFIED, lam, "eigh", witness=vec)
    if model.is_finite:
        return PositivityReport(CERTIFIED, lam, "eigh")
    return PositivityReport(NOT_FALSIFIED, lam, "eigh", notes=[
        f"verdict covers the truncation only (tail mass {model.tail_mass_bound:.3g})"])


def sin_quadratic_form(model: DiscreteJoint, t):
    """Q(t) = sum_ij sin(t a_i) sin(t a_j) p_ij, for scalar or array t."""
    t_arr = np.asarray(t, dtype=float)
    if t_arr.ndim == 0:
        s = np.sin(float(t) * model.atoms)
        return math.fsum((np.outer(s, s) * model.weights).ravel())
    s = np.sin(t_arr.ravel()[:, None] * model.atoms[None, :])
    q = np.einsum("ki,ij,kj->k", s, model.weights, s)
    return q.reshape(t_arr.shape)


def cauchy_positivity_witness(c, eta) -> float:
    """sum_ij eta_i eta_j / (c_i + c_j) by exactly rounded summation."""
    c = np.asarray(c, dtype=float).ravel()
    eta = np.asarray(eta, dtype=float).ravel()
    if c.size != eta.size:
        raise ValueError("c and eta must have equal length")
    if np.any(~(c > 0)):
        raise NonPositiveParameter("all c_i must be positive")
    terms = np.outer(eta, eta) / (c[:, None] + c[None, :])
    return math.fsum(terms.ravel())


# -- densities ---------------------------------------------------------------------

def _probe_values(probe, x):
    if callable(probe) and not isinstance(probe, (ex.Constant, ex.Variable, ex.Unary, ex.Binary)):
        return np.asarray(probe(x), dtype=float) * np.ones_like(x)
    if isinstance(probe, str):
        probe = ex.parse_expr(probe)
    return ex.eval_array(probe, x)


def _cell_discretization(model: DensityModel, grid: int, order: int):
    """Composite Gauss-Legendre nodes on D and the kernel matrix on node pairs.

    Cell edges include every breakpoint of the density, so piecewise-constant
    kernels are integrated exactly.
    """
    edges_per_interval = []
    breaks = set()
    for cell in model.cells():
        breaks.update((cell.x0, cell.x1))
    for lo, hi in model.domain:
        e = set(np.linspace(lo, hi, grid + 1).tolist())
        e.update(b for b in breaks if lo <= b <= hi)
        edges_per_interval.append(sorted(e))
    nodes, weights, cell_ids = [], [], []
    offset = 0
    for edges in edges_per_interval:
        xn, wn = gauss_legendre_cells(edges, order)
        nodes.append(xn.ravel())
        weights.append(wn.ravel())
        cell_ids.append(offset + np.repeat(np.arange(len(edges) - 1), order))
        offset += len(edges) - 1
    x = np.concatenate(nodes)
    w = np.concatenate(weights)
    ids = np.concatenate(cell_ids)
    kernel = model.pdf(x[:, None], x[None, :])
    return x, w, ids, kernel


def _closed_form_square(model: DensityModel) -> bool:
    k = model.kernel
    if isinstance(k, (ProductKernel, MixtureUniform)):
        return True
    if isinstance(k, SmoothedDiscrete):
        ok, _, _ = check_psd_matrix(np.array(k.weights))
        return ok
    return False


def probe_density_positivity(model: DensityModel, probes=(), grid: int = 64,
                             tol: float = 1e-10, seed: int = DEFAULT_PROBE_SEED,
                             order: int = 8) -> PositivityReport:
    """Evaluate the double integral of delta(x) delta(y) f(x, y) for each probe.

    Probes are expressions (or strings) in ``x`` or vectorized callables. On
    top of them ``grid`` random piecewise-constant sign probes are tried, and
    the smallest eigenvalue of the cell-averaged kernel is reported. Product
    and uniform-mixture kernels are certified by their square structure.
    """
    if grid < 64:
        raise ValueError("grid must be at least 64 cells per interval")
    x, w, ids, kernel = _cell_discretization(model, grid, order)
    wk = w[:, None] * kernel * w[None, :]
    abs_total = float(np.sum(wk))

    values = []
    for probe in probes:
        dv = _probe_values(probe, x)
        if not np.all(np.isfinite(dv)) or np.max(np.abs(dv), initial=0.0) > PROBE_BOUND:
            raise UnboundedProbe(f"probe exceeds {PROBE_BOUND:g} in magnitude on the grid")
        values.append((probe, float(dv @ wk @ dv), float(np.abs(dv) @ wk @ np.abs(dv))))

    # random sign probes constant on each grid cell
    rng = np.random.default_rng(seed)
    n_cells = int(ids.max()) + 1
    cell_matrix = np.zeros((n_cells, n_cells))
    np.add.at(cell_matrix, (ids[:, None], ids[None, :]), wk)
    signs = rng.choice([-1.0, 1.0], size=(grid, n_cells))
    sign_values = np.einsum("ki,ij,kj->k", signs, cell_matrix, signs)
    eig_min = float(np.linalg.eigvalsh((cell_matrix + cell_matrix.T) / 2)[0])

    worst_value = math.inf
    worst = None
    for probe, val, scale in values:
        if val < -tol * max(scale, 1e-300) and val < worst_value:
            worst_value, worst = val, probe
    k = int(np.argmin(sign_values))
    if sign_values[k] < -tol * abs_total and sign_values[k] < worst_value:
        worst_value = float(sign_values[k])
        worst = f"random sign probe #{k} (seed {seed})"

    min_value = min([v for _, v, _ in values] + [float(sign_values.min()), eig_min])
    notes = [f"cell-kernel min eigenvalue {eig_min:.3e}"]
    if worst is not None:
        witness = worst if isinstance(worst, str) else (
            ex.to_text(worst) if not callable(worst) or isinstance(
                worst, (ex.Constant, ex.Variable, ex.Unary, ex.Binary)) else repr(worst))
        return PositivityReport(FALSIFIED, worst_value, "tensor-quadrature probes",
                                witness=witness, seed=seed, notes=notes)
    if _closed_form_square(model):
        return PositivityReport(CERTIFIED, min_value, "closed-form square", seed=seed,
                                notes=notes + ["form is a non-negative sum of squares of "
                                               "integrals of the probe"])
    return PositivityReport(NOT_FALSIFIED, min_value, "tensor-quadrature probes",
                            seed=seed, notes=notes)


def probe_value(model: DensityModel, probe, grid: int = 64, order: int = 8) -> float:
    """Double integral of probe(x) probe(y) f(x, y) over D x D."""
    x, w, _, kernel = _cell_discretization(model, grid, order)
    dv = _probe_values(probe, x) * w
    return float(dv @ kernel @ dv)
