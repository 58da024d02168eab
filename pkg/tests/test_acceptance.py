"""The nine acceptance criteria, at their stated tolerances.

Each criterion is one test function; a summary line per criterion is printed
at the end of the pytest run.
"""

import math
import time

import numpy as np
import pytest

import oracles
from generators import R_GRID, acceptance_models
from momentlab import expr as ex
from momentlab.counterexample import delta_exact, remark_negative_r, smoothed_delta
from momentlab.errors import ExprSyntaxError, SchemaError
from momentlab.modelfile import parse_model_file
from momentlab.models import build_cauchy_discrete, build_counterexample, build_uniform_remark
from momentlab.moments import delta, expectation_xy, moment, moment_density_quadrature
from momentlab.moments import moment_monte_carlo
from momentlab.positivity import check_psd_discrete
from momentlab.representation import (
    TruncationWindow,
    cr_reciprocal_check,
    phi_n,
    truncated_delta_channels,
)
from test_expr import random_tree


@pytest.fixture(scope="module")
def models():
    return acceptance_models()


def _scale(model, r):
    return max(1.0, moment(model, r, "plus", "exact").value)


def test_criterion_1_forward_theorem_cauchy(models):
    cauchy, _ = models
    assert len(cauchy) == 200
    assert max(m.n for m in cauchy) <= 8
    t0 = time.perf_counter()
    for model in cauchy:
        assert check_psd_discrete(model).verdict == "certified"
        for r in R_GRID:
            d = delta(model, r, "exact").value
            assert d >= -1e-10 * _scale(model, r), (model.atoms, r, d)
    assert time.perf_counter() - t0 <= 30.0


def test_criterion_2_forward_theorem_general_psd(models):
    _, cp = models
    assert len(cp) == 200
    for model in cp:
        assert model.n <= 6
        assert np.all(np.abs(model.atoms) <= 5)
        assert check_psd_discrete(model).verdict == "certified"
        for r in R_GRID:
            d = delta(model, r, "exact").value
            assert d >= -1e-10 * _scale(model, r), (model.atoms, r, d)


def test_criterion_3_r2_identity(models):
    cauchy, cp = models
    for model in cauchy + cp:
        exy = expectation_xy(model).value
        d = delta(model, 2.0, "exact").value
        assert abs(d - 4 * exy) <= 1e-10 * _scale(model, 2.0)
        assert exy >= -1e-12


@pytest.mark.parametrize("r", [2.1, 2.5, 3, 4, 6])
def test_criterion_4_counterexample_chain(r):
    law = build_counterexample(r)
    bd = delta_exact(law)
    assert bd.delta < 0
    assert bd.jensen_lhs >= bd.jensen_rhs
    assert bd.delta < 2.0**r * (1 - r * r)
    if r in (3, 4, 6):
        dbl = delta_exact(law, exact=False)
        assert bd.exact
        assert abs(dbl.delta - bd.delta) <= 1e-9 * abs(bd.delta)
    if r == 3:
        oracle = float(oracles.brute_force_delta(3, oracles.R3_A, oracles.R3_P))
        assert oracle == float(oracles.R3_DELTA)
        assert abs(bd.delta - oracle) <= 1e-12 * abs(oracle)


def test_criterion_5_representation():
    for r in (0.25, 0.5, 1.0, 1.5):
        assert abs(cr_reciprocal_check(r) - 1) <= 1e-8
    assert abs(cr_reciprocal_check(1.9) - 1) <= 1e-6

    for z in (0.5, 1.0, 3.0):
        values = [phi_n(z, 1.0, n) for n in (10, 100, 1000)]
        assert all(0 <= v <= abs(z) for v in values)
        assert values[0] <= values[1] <= values[2]
        for r in (0.5, 1.5):
            vr = [phi_n(z, r, n) for n in (10, 100, 1000)]
            assert all(0 <= v <= abs(z) ** r * (1 + 1e-12) for v in vr)
            assert vr[0] <= vr[1] <= vr[2]

    model = build_cauchy_discrete(oracles.CAUCHY4["atoms"], oracles.CAUCHY4["c"],
                                  oracles.CAUCHY4["d"], normalize=True)
    exact = delta(model, 1.0, "exact").value
    assert exact == pytest.approx(oracles.CAUCHY4_DELTA_R1, rel=1e-14)
    for n in (10, 100, 1000):
        ch = truncated_delta_channels(model, 1.0, TruncationWindow(n))
        assert ch.mismatch <= ch.tolerance
    assert abs(ch.integral_channel - exact) <= 0.01 * abs(exact)


def test_criterion_6_smoothing():
    t0 = time.perf_counter()
    exact = float(oracles.R3_DELTA)
    gaps = []
    for eps in (0.2, 0.1, 0.05):
        d = smoothed_delta(3, eps).value
        assert d < 0
        gaps.append(abs(d - exact))
    assert gaps[0] > gaps[1] > gaps[2]
    assert time.perf_counter() - t0 <= 60.0


def test_criterion_7_negative_r_remark():
    uniform = build_uniform_remark()
    for r in (-0.5, -0.9):
        closed = 2 / ((r + 1) * (r + 2))
        quad = moment_density_quadrature(uniform, r, "minus", 1e-9).value
        assert abs(quad - closed) <= 1e-6 * closed
        bd = remark_negative_r(r)
        assert bd.e_minus == pytest.approx(closed, rel=1e-15)
        assert bd.e_plus <= 2.0**r
        assert bd.verdict == "fails"
    flagged = remark_negative_r(-1.0)
    assert flagged.e_minus == math.inf
    assert flagged.verdict == "fails"
    assert math.isinf(moment_density_quadrature(uniform, -1.0, "minus").value)


def test_criterion_8_monte_carlo_agreement():
    law = build_counterexample(3)
    exact = float(oracles.R3_DELTA)
    runs = {}
    for workers in (1, 4, 1):
        plus = moment_monte_carlo(law, 3, "plus", n=10**6, seed=2024, workers=workers)
        minus = moment_monte_carlo(law, 3, "minus", n=10**6, seed=2024, workers=workers)
        runs.setdefault(workers, []).append((plus.value, plus.abs_error_bound,
                                             minus.value, minus.abs_error_bound))
    first = runs[1][0]
    assert runs[1][1] == first
    assert runs[4][0] == first
    d = first[0] - first[2]
    assert abs(d - exact) <= first[1] + first[3]
    assert abs(first[0] - oracles.R3_E_PLUS) <= first[1]
    assert abs(first[2] - oracles.R3_E_MINUS) <= first[3]

    # the paired estimator reported by the CLI
    paired = [delta(law, 3, "mc", n=10**6, seed=2024, workers=w) for w in (1, 4, 1)]
    assert len({(p.value, p.abs_error_bound) for p in paired}) == 1
    assert abs(paired[0].value - exact) <= paired[0].abs_error_bound


def test_criterion_9_parser_robustness():
    for text, x, want in oracles.GOLDEN:
        got = ex.eval_expr(ex.parse_expr(text), x)
        assert abs(got - want) <= 1e-15 * abs(want), text

    rng = np.random.default_rng(99)
    for _ in range(1000):
        tree = random_tree(rng, 6)
        assert ex.parse_expr(ex.to_text(tree)) == tree

    rng = np.random.default_rng(7)
    alphabet = np.frombuffer(b"0123456789.+-*/^()xeE ,{}[]\":abcdefghijklmnopqrstuvwxyz", np.uint8)
    for k in range(10_000):
        n = int(rng.integers(0, 40))
        if k % 2:
            raw = rng.integers(0, 256, n, dtype=np.uint8).tobytes()
        else:
            raw = rng.choice(alphabet, n).tobytes()
        try:
            ex.parse_expr(raw.decode("latin-1"))
        except ExprSyntaxError:
            pass
        try:
            parse_model_file(raw)
        except SchemaError:
            pass
