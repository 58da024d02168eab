"""JSON model files.

A model file is one JSON object::

    {"kind": "cauchy-discrete", "params": {...}, "r": [0.5, 1], "options": {...}}

Only ``kind`` and ``params`` are required. Unknown fields are rejected so that a
typo cannot silently change what gets verified. Expressions are parsed here,
so a ModelFile is ready to hand to the model builders.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

from . import expr as ex
from . import models
from .errors import ExprSyntaxError, SchemaError

KINDS = (
    "cauchy-discrete",
    "general-discrete",
    "cauchy-density",
    "product-density",
    "mixture-density",
    "two-point",
    "smoothed",
    "uniform-remark",
)
DISCRETE_KINDS = ("cauchy-discrete", "general-discrete", "two-point")

METHODS = ("exact", "quadrature", "mc")
OPTION_TYPES = {
    "method": "method",
    "rel_tol": "positive",
    "mc_n": "count",
    "seed": "seed",
    "workers": "count",
    "psd_tol": "positive",
}


@dataclass(frozen=True)
class ModelFile:
    kind: str
    params: dict
    r: Optional[tuple] = None
    options: dict = field(default_factory=dict)

    def canonical(self) -> dict:
        """JSON-ready form with expressions printed back to text."""
        params = {}
        for key, value in self.params.items():
            if isinstance(value, (ex.Constant, ex.Variable, ex.Unary, ex.Binary)):
                value = ex.to_text(value)
            params[key] = value
        out = {"kind": self.kind, "params": params, "options": dict(self.options)}
        if self.r is not None:
            out["r"] = list(self.r)
        return out


# -- field checkers --------------------------------------------------------------------

def _number(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"expected a number, got {type(value).__name__}", path)
    value = float(value)
    if not math.isfinite(value):
        raise SchemaError("number must be finite", path)
    return value


def _numbers(value, path, min_len=1):
    if not isinstance(value, list):
        raise SchemaError(f"expected a list of numbers, got {type(value).__name__}", path)
    if len(value) < min_len:
        raise SchemaError(f"expected at least {min_len} entries", path)
    return [_number(v, f"{path}[{k}]") for k, v in enumerate(value)]


def _matrix(value, path):
    if not isinstance(value, list) or not value:
        raise SchemaError("expected a non-empty list of rows", path)
    rows = [_numbers(row, f"{path}[{k}]") for k, row in enumerate(value)]
    if any(len(row) != len(rows) for row in rows):
        raise SchemaError("matrix must be square", path)
    return rows


def _bool(value, path):
    if not isinstance(value, bool):
        raise SchemaError(f"expected true or false, got {type(value).__name__}", path)
    return value


def _expression(value, path):
    if not isinstance(value, str):
        raise SchemaError(f"expected an expression string, got {type(value).__name__}", path)
    try:
        return ex.parse_expr(value)
    except ExprSyntaxError as err:
        raise SchemaError(f"bad expression: {err}", path) from None


def _intervals(value, path):
    if not isinstance(value, list) or not value:
        raise SchemaError("expected a non-empty list of [lo, hi] pairs", path)
    out = []
    for k, pair in enumerate(value):
        nums = _numbers(pair, f"{path}[{k}]", 2)
        if len(nums) != 2:
            raise SchemaError("interval must have exactly two endpoints", f"{path}[{k}]")
        if not nums[0] < nums[1]:
            raise SchemaError("interval needs lo < hi", f"{path}[{k}]")
        out.append(tuple(nums))
    return out


def _records(value, path, names):
    if not isinstance(value, list) or not value:
        raise SchemaError("expected a non-empty list of objects", path)
    out = []
    for k, item in enumerate(value):
        sub = f"{path}[{k}]"
        if not isinstance(item, dict):
            raise SchemaError("expected an object", sub)
        _exact_keys(item, names, (), sub)
        out.append(tuple(_number(item[name], f"{sub}.{name}") for name in names))
    return out


def _exact_keys(obj, required, optional, path):
    for key in obj:
        if key not in required and key not in optional:
            raise SchemaError(f"unknown field {key!r}", f"{path}.{key}")
    for key in required:
        if key not in obj:
            raise SchemaError("missing required field", f"{path}.{key}")


# per kind: required fields, optional fields, checker per field
_PARAMS = {
    "cauchy-discrete": (("atoms", "c", "d"), ("normalize",),
                        {"atoms": _numbers, "c": _numbers, "d": _numbers, "normalize": _bool}),
    "general-discrete": (("atoms", "weights"), (),
                         {"atoms": _numbers, "weights": _matrix}),
    "cauchy-density": (("c", "d", "domain"), ("normalize",),
                       {"c": _expression, "d": _expression, "domain": _intervals,
                        "normalize": _bool}),
    "product-density": (("pieces",), (),
                        {"pieces": lambda v, p: _records(v, p, ("lo", "hi", "height"))}),
    "mixture-density": (("components",), (),
                        {"components": lambda v, p: _records(v, p, ("center", "halfwidth", "mass"))}),
    "two-point": (("r",), (), {"r": _number}),
    "smoothed": (("r", "epsilon"), (), {"r": _number, "epsilon": _number}),
    "uniform-remark": ((), (), {}),
}


def _option(name, value, path):
    kind = OPTION_TYPES[name]
    if kind == "method":
        if value not in METHODS:
            raise SchemaError(f"method must be one of {', '.join(METHODS)}", path)
        return value
    if kind in ("count", "seed"):
        if isinstance(value, bool) or not isinstance(value, int):
            raise SchemaError("expected an integer", path)
        if value < (0 if kind == "seed" else 1):
            raise SchemaError("integer out of range", path)
        return value
    value = _number(value, path)
    if not value > 0:
        raise SchemaError("expected a positive number", path)
    return value


def _decode(document):
    if isinstance(document, (bytes, bytearray)):
        try:
            document = bytes(document).decode("utf-8")
        except UnicodeDecodeError as err:
            raise SchemaError(f"document is not valid UTF-8 ({err.reason} at byte {err.start})",
                              ".") from None
    if not isinstance(document, str):
        raise SchemaError("document must be text", ".")
    try:
        return json.loads(document, parse_constant=_reject_constant)
    except json.JSONDecodeError as err:
        raise SchemaError(f"invalid JSON: {err.msg} at line {err.lineno} column {err.colno}",
                          ".") from None
    except RecursionError:
        raise SchemaError("JSON nesting is too deep", ".") from None


def _reject_constant(name):
    raise SchemaError(f"non-finite number {name} is not allowed", ".")


def parse_model_file(document) -> ModelFile:
    """Validate a JSON model document (str or UTF-8 bytes) into a ModelFile."""
    data = _decode(document)
    if not isinstance(data, dict):
        raise SchemaError("model file must be a JSON object", ".")
    _exact_keys(data, ("kind", "params"), ("r", "options"), "")
    kind = data["kind"]
    if not isinstance(kind, str) or kind not in KINDS:
        raise SchemaError(f"kind must be one of {', '.join(KINDS)}", ".kind")
    raw = data["params"]
    if not isinstance(raw, dict):
        raise SchemaError("params must be an object", ".params")
    required, optional, checkers = _PARAMS[kind]
    _exact_keys(raw, required, optional, ".params")
    params = {key: checkers[key](value, f".params.{key}") for key, value in raw.items()}

    r_list = None
    if "r" in data:
        r_list = tuple(_numbers(data["r"], ".r"))
        for k, rv in enumerate(r_list):
            if rv == 0:
                raise SchemaError("r = 0 is not a valid exponent", f".r[{k}]")

    options = {}
    raw_opts = data.get("options", {})
    if not isinstance(raw_opts, dict):
        raise SchemaError("options must be an object", ".options")
    for key, value in raw_opts.items():
        if key not in OPTION_TYPES:
            raise SchemaError(f"unknown option {key!r}", f".options.{key}")
        options[key] = _option(key, value, f".options.{key}")
    return ModelFile(kind, params, r_list, options)


def load_model_file(path) -> ModelFile:
    with open(path, "rb") as fh:
        return parse_model_file(fh.read())


def build_model(mf: ModelFile):
    """Construct the model_core object a ModelFile describes."""
    p = mf.params
    kind = mf.kind
    if kind == "cauchy-discrete":
        return models.build_cauchy_discrete(p["atoms"], p["c"], p["d"],
                                            normalize=p.get("normalize", False))
    if kind == "general-discrete":
        return models.build_general_discrete(p["atoms"], p["weights"])
    if kind == "cauchy-density":
        return models.build_cauchy_density(p["c"], p["d"], p["domain"],
                                           normalize=p.get("normalize", True))
    if kind == "product-density":
        return models.build_product_density(p["pieces"])
    if kind == "mixture-density":
        return models.build_mixture_density(p["components"])
    if kind == "two-point":
        return models.build_counterexample(p["r"])
    if kind == "smoothed":
        return models.build_smoothed(models.build_counterexample(p["r"]), p["epsilon"])
    return models.build_uniform_remark()
