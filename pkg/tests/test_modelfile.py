import json
from importlib import resources

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from momentlab import expr as ex
from momentlab.errors import SchemaError
from momentlab.modelfile import KINDS, build_model, parse_model_file
from momentlab.models import DensityModel, DiscreteJoint, TwoPointLaw

DATA = resources.files("momentlab") / "data"


def doc(kind, params, **extra):
    return json.dumps(dict(kind=kind, params=params, **extra))


def test_bundled_counterexample():
    mf = parse_model_file((DATA / "counterexample_r3.json").read_bytes())
    assert mf.kind == "two-point"
    assert mf.params["r"] == 3
    assert isinstance(build_model(mf), TwoPointLaw)


@pytest.mark.parametrize("name", ["counterexample_r3", "cauchy_n4", "cauchy_density",
                                  "uniform_remark", "smoothed_r3", "mixture"])
def test_bundled_files_build(name):
    mf = parse_model_file((DATA / f"{name}.json").read_text())
    assert isinstance(build_model(mf), (TwoPointLaw, DiscreteJoint, DensityModel))


def test_missing_c_path():
    with pytest.raises(SchemaError) as info:
        parse_model_file(doc("cauchy-discrete", {"atoms": [1], "d": [1]}))
    assert info.value.path == ".params.c"
    assert info.value.path.endswith(".c")


def test_cauchy_density_expressions():
    mf = parse_model_file(doc("cauchy-density", {"c": "x", "d": "1", "domain": [[1, 2]]}))
    assert ex.eval_expr(mf.params["c"], 1.5) == 1.5
    assert ex.eval_expr(mf.params["d"], 1.5) == 1.0


@pytest.mark.parametrize("document, path", [
    (doc("cauchy-discrete", {"atoms": [1], "c": [1], "d": [1], "extra": 1}), ".params.extra"),
    (doc("cauchy-discrete", {"atoms": "1", "c": [1], "d": [1]}), ".params.atoms"),
    (doc("cauchy-discrete", {"atoms": [True], "c": [1], "d": [1]}), ".params.atoms[0]"),
    (doc("cauchy-density", {"c": "x+", "d": "1", "domain": [[1, 2]]}), ".params.c"),
    (doc("cauchy-density", {"c": "x", "d": "1", "domain": [[2, 1]]}), ".params.domain[0]"),
    (doc("general-discrete", {"atoms": [0, 1], "weights": [[1, 0]]}), ".params.weights"),
    (doc("mixture-density", {"components": [{"center": 0, "halfwidth": 1}]}),
     ".params.components[0].mass"),
    (doc("two-point", {"r": "3"}), ".params.r"),
    (doc("uniform-remark", {}, r=[0]), ".r[0]"),
    (doc("uniform-remark", {}, options={"method": "magic"}), ".options.method"),
    (doc("uniform-remark", {}, options={"colour": 1}), ".options.colour"),
    (doc("uniform-remark", {}, comment="hi"), ".comment"),
    (json.dumps({"params": {}}), ".kind"),
    (doc("nonsense", {}), ".kind"),
    ("[]", "."),
    ("{", "."),
    (b"\xff\xfe", "."),
    ('{"kind": "two-point", "params": {"r": Infinity}}', "."),
])
def test_schema_errors(document, path):
    with pytest.raises(SchemaError) as info:
        parse_model_file(document)
    assert info.value.path == path


def test_canonical_roundtrip():
    mf = parse_model_file(doc("cauchy-density", {"c": "x^2+1", "d": "1", "domain": [[1, 2]]},
                              r=[0.5, 1], options={"seed": 3}))
    again = parse_model_file(json.dumps(mf.canonical()))
    assert again == mf


def test_all_kinds_have_schemas():
    minimal = {
        "cauchy-discrete": {"atoms": [0, 1], "c": [1, 2], "d": [1, 1], "normalize": True},
        "general-discrete": {"atoms": [0, 1], "weights": [[0.25, 0.25], [0.25, 0.25]]},
        "cauchy-density": {"c": "x", "d": "1", "domain": [[1, 2]]},
        "product-density": {"pieces": [{"lo": 0, "hi": 1, "height": 1}]},
        "mixture-density": {"components": [{"center": 0, "halfwidth": 1, "mass": 1}]},
        "two-point": {"r": 3},
        "smoothed": {"r": 3, "epsilon": 0.1},
        "uniform-remark": {},
    }
    assert set(minimal) == set(KINDS)
    for kind, params in minimal.items():
        build_model(parse_model_file(doc(kind, params)))


@settings(max_examples=400, deadline=None)
@given(st.binary(max_size=200))
def test_fuzz_bytes(raw):
    try:
        parse_model_file(raw)
    except SchemaError:
        pass


json_values = st.recursive(
    st.none() | st.booleans() | st.integers() | st.floats(allow_nan=False) | st.text(max_size=5),
    lambda inner: st.lists(inner, max_size=4) | st.dictionaries(st.text(max_size=8), inner,
                                                                max_size=4),
    max_leaves=20,
)


@settings(max_examples=400, deadline=None)
@given(st.sampled_from(KINDS), st.dictionaries(
    st.sampled_from(["atoms", "c", "d", "weights", "domain", "r", "epsilon", "components",
                     "pieces", "normalize"]), json_values, max_size=4))
def test_fuzz_structured(kind, params):
    try:
        parse_model_file(json.dumps({"kind": kind, "params": params}))
    except SchemaError:
        pass


def test_model_values():
    mf = parse_model_file(doc("cauchy-discrete", {"atoms": [0, 1], "c": [1, 2], "d": [1, 1],
                                                  "normalize": True}))
    model = build_model(mf)
    assert np.isclose(model.weights.sum(), 1.0)
