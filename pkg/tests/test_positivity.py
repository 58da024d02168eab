import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from momentlab.errors import UnboundedProbe
from momentlab.models import (
    DensityModel,
    ProductKernel,
    build_cauchy_density,
    build_cauchy_discrete,
    build_counterexample,
    build_general_discrete,
    build_mixture_density,
    build_product_density,
    build_smoothed,
    truncate_countable,
)
from momentlab.positivity import (
    cauchy_positivity_witness,
    check_psd_discrete,
    check_psd_matrix,
    probe_density_positivity,
    probe_value,
    sin_quadratic_form,
)


def test_witness_oracle():
    assert cauchy_positivity_witness([1, 2], [1, -1]) == pytest.approx(
        float(oracles.CAUCHY_WITNESS_12), rel=1e-15)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=8),
       st.lists(st.floats(-10, 10), min_size=8, max_size=8))
def test_witness_nonnegative(c, eta):
    value = cauchy_positivity_witness(c, eta[:len(c)])
    scale = sum(abs(e) for e in eta[:len(c)]) ** 2 / (2 * min(c))
    assert value >= -1e-12 * max(scale, 1e-300)


def test_psd_certified_and_falsified():
    cauchy = build_cauchy_discrete(**oracles.CAUCHY4, normalize=True)
    assert check_psd_discrete(cauchy).verdict == "certified"
    bad = build_general_discrete([0, 1], [[0.1, 0.4], [0.4, 0.1]])
    rep = check_psd_discrete(bad)
    assert rep.verdict == "falsified"
    assert rep.min_value == pytest.approx(-0.3)
    w = np.asarray(rep.witness)
    assert w @ bad.weights @ w == pytest.approx(-0.3)
    assert w[0] > 0   # sign convention


def test_truncated_model_not_falsified():
    model = truncate_countable("i", "1", "sqrt(2)*2^(-i)", 12)
    rep = check_psd_discrete(model)
    assert rep.verdict == "not_falsified"
    assert rep.notes


def test_psd_tolerance_is_relative():
    ok, lam, _ = check_psd_matrix(np.diag([1e6, -1e-6]), tol=1e-10)
    assert ok and lam < 0
    ok, _, _ = check_psd_matrix(np.diag([1.0, -1e-6]), tol=1e-10)
    assert not ok


def test_sin_quadratic_form_nonnegative():
    model = build_cauchy_discrete(**oracles.CAUCHY4, normalize=True)
    t = np.linspace(-20, 20, 4001)
    q = sin_quadratic_form(model, t)
    assert np.all(q >= -1e-15)
    assert sin_quadratic_form(model, 0.7) == pytest.approx(float(q[np.argmin(abs(t - 0.7))]),
                                                           abs=1e-12)


def test_sin_form_negative_for_non_psd():
    bad = build_general_discrete([1.0, 2.0], [[0.0, 0.5], [0.5, 0.0]])
    # 2 sin(t) sin(2t) * 0.5 < 0 for t slightly below pi
    assert sin_quadratic_form(bad, 3.0) < 0


def test_density_certified_square():
    mix = build_mixture_density([(-1, 0.5, 0.3), (2, 1, 0.7)])
    rep = probe_density_positivity(mix, probes=["x", "abs(x)-1"])
    assert rep.verdict == "certified"
    smoothed = build_smoothed(build_counterexample(3), 0.1)
    assert probe_density_positivity(smoothed).verdict == "certified"


def test_cauchy_density_not_falsified():
    model = build_cauchy_density("x", "1", [[1, 2]])
    rep = probe_density_positivity(model, probes=["x-1.5", lambda x: np.sign(x - 1.3)], seed=5)
    assert rep.verdict == "not_falsified"
    assert rep.min_value >= -1e-12
    assert rep.seed == 5


def test_density_falsified():
    model = DensityModel(((0.0, 2.0),), ProductKernel(((0.0, 1.0, 0.5), (1.0, 2.0, 0.5))))
    assert probe_value(model, "x-1") >= 0

    # mass only off the diagonal blocks [0,1]x[1,2] and [1,2]x[0,1]
    def pdf(x, y):
        return np.where((x < 1) != (y < 1), 0.5, 0.0)

    fake = _PdfOnly(((0.0, 2.0),), pdf)
    rep = probe_density_positivity(fake, probes=["x-1"])
    assert rep.verdict == "falsified"
    assert rep.witness == "x-1"
    assert rep.min_value == pytest.approx(-0.25, rel=1e-12)


class _PdfOnly:
    """Minimal density stand-in for a kernel that is not positive-type."""

    def __init__(self, domain, pdf):
        self.domain = domain
        self._pdf = pdf
        self.kernel = None

    def cells(self):
        from momentlab.models import Cell
        return (Cell(0.0, 1.0, 1.0, 2.0, 0.5), Cell(1.0, 2.0, 0.0, 1.0, 0.5))

    def pdf(self, x, y):
        return self._pdf(x, y)


def test_unbounded_probe():
    model = build_product_density([(0, 1, 1.0)])
    with pytest.raises(UnboundedProbe):
        probe_density_positivity(model, probes=["exp(100*x)"])


def test_grid_minimum():
    model = build_product_density([(0, 1, 1.0)])
    with pytest.raises(ValueError):
        probe_density_positivity(model, grid=8)


def test_report_serializes():
    rep = check_psd_discrete(build_general_discrete([0, 1], [[0.1, 0.4], [0.4, 0.1]]))
    d = rep.to_dict()
    assert isinstance(d["witness"], list)
    assert math.isfinite(d["min_value"])
