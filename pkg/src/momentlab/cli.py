"""momentlab command line: verify, representation and sweep."""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time

import numpy as np

from . import __version__
from .counterexample import delta_exact, search_two_point
from .errors import MomentLabError, RegimeError, ToleranceNotMet
from .modelfile import DISCRETE_KINDS, build_model, load_model_file
from .models import DensityModel, DiscreteJoint, TwoPointLaw, as_exponent
from .moments import EXACT, MONTE_CARLO, QUADRATURE, MomentEstimate, combine_delta, delta, moment
from .positivity import check_psd_discrete, probe_density_positivity
from .representation import TruncationWindow, truncated_delta_channels

DEFAULT_R_GRID = (0.25, 0.5, 1.0, 1.5, 1.9, 2.0)
CHANNEL_N = 100
EXACT_REL_SLACK = 1e-10

HOLDS = "holds"
FAILS = "fails"
INCONCLUSIVE = "inconclusive"

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_ERROR = 2


class UsageError(Exception):
    pass


# -- helpers ------------------------------------------------------------------------

def _parse_r_list(text):
    try:
        values = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise UsageError(f"--r expects a comma-separated list of numbers, got {text!r}") from None
    if not values or any(not math.isfinite(v) or v == 0 for v in values):
        raise UsageError("--r values must be finite and non-zero")
    return values


def _parse_n_list(text):
    try:
        values = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise UsageError(f"--n expects a comma-separated list of integers, got {text!r}") from None
    if not values or any(v < 1 for v in values):
        raise UsageError("--n values must be positive integers")
    return values


def _parse_range(text, name):
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"--{name} expects lo:hi:steps, got {text!r}")
    try:
        lo, hi = float(parts[0]), float(parts[1])
        steps = int(parts[2])
    except ValueError:
        raise UsageError(f"--{name} expects lo:hi:steps, got {text!r}") from None
    if steps < 1:
        raise UsageError(f"--{name} needs at least one step")
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi < lo:
        raise UsageError(f"--{name} needs finite lo <= hi")
    return np.linspace(lo, hi, steps)


def _finite_json(obj):
    """Replace non-finite floats by strings so the report is strict JSON."""
    if isinstance(obj, dict):
        return {k: _finite_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite_json(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_finite_json(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def model_digest(mf) -> str:
    canonical = json.dumps(_finite_json(mf.canonical()), sort_keys=True, separators=(",", ":"))
    return "sha256:" + hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _emit(text, out):
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v
                         for v in row])
    return buf.getvalue()


# -- verify -------------------------------------------------------------------------

def expected_verdict(kind, r, law_r=None):
    """Verdict the theory predicts for a model kind at exponent r (None: no claim)."""
    if kind in ("two-point", "smoothed"):
        if law_r is not None and r == law_r:
            return FAILS
        return HOLDS if 0 < r <= 2 else None
    if kind == "uniform-remark":
        return FAILS if r < 0 else HOLDS if r <= 2 else None
    return HOLDS if 0 < r <= 2 else None


def classify(est: MomentEstimate, slack=0.0) -> str:
    if math.isnan(est.value):
        return INCONCLUSIVE
    return HOLDS if est.value >= -(est.abs_error_bound + slack) else FAILS


def _positivity(model):
    if isinstance(model, TwoPointLaw):
        model = model.joint()
    if isinstance(model, DiscreteJoint):
        return check_psd_discrete(model)
    return probe_density_positivity(model)


def _method_for(model, requested):
    if requested == "mc":
        return MONTE_CARLO
    if requested is not None:
        return requested
    return QUADRATURE if isinstance(model, DensityModel) else EXACT


def _verify_one(mf, model, r, method, opts):
    rv = as_exponent(r).value
    record = {"r": rv, "regime": as_exponent(r).regime, "method": method}
    law_r = mf.params.get("r") if mf.kind in ("two-point", "smoothed") else None
    params = {}
    if method == MONTE_CARLO:
        params = {"n": opts["mc_n"], "seed": opts["seed"], "workers": opts["workers"]}
    elif method == QUADRATURE:
        params = {"rel_tol": opts["rel_tol"]}
    elif rv < 0:
        params = {"negative_convention": True}

    slack = 0.0
    if isinstance(model, TwoPointLaw) and method == EXACT and rv == model.r:
        # the dedicated evaluation avoids the cancellation of the two big 2pq terms
        bd = delta_exact(model)
        plus = MomentEstimate(bd.e_plus, 0.0 if bd.exact else 4e-16 * bd.e_plus, EXACT)
        minus = MomentEstimate(bd.e_minus, 0.0 if bd.exact else 4e-16 * bd.e_minus, EXACT)
        d = MomentEstimate(bd.delta, plus.abs_error_bound + minus.abs_error_bound, EXACT,
                           diagnostics={"e_plus": bd.e_plus, "e_minus": bd.e_minus})
        record["counterexample"] = bd.to_dict()
    else:
        plus = moment(model, r, "plus", method, **params)
        minus = moment(model, r, "minus", method, **params)
        if method == MONTE_CARLO:
            d = delta(model, r, method, **params)
        else:
            d = combine_delta(plus, minus)
    if method == EXACT and math.isfinite(plus.value):
        slack = EXACT_REL_SLACK * max(1.0, abs(plus.value))
    verdict = classify(d, slack)
    expected = expected_verdict(mf.kind, rv, law_r)
    record.update({
        "e_plus": plus.to_dict(),
        "e_minus": minus.to_dict(),
        "delta": d.to_dict(),
        "verdict": verdict,
        "expected": expected,
        "as_expected": verdict == expected or (expected is None and verdict != INCONCLUSIVE),
    })
    discrete = model.joint() if isinstance(model, TwoPointLaw) else model
    if (isinstance(discrete, DiscreteJoint) and discrete.is_finite and 0 < rv < 2
            and mf.kind in DISCRETE_KINDS):
        try:
            ch = truncated_delta_channels(discrete, rv, TruncationWindow(CHANNEL_N))
            record["channels"] = dict(ch.to_dict(), method="representation")
        except (ToleranceNotMet, MomentLabError) as err:
            record["channels"] = {"n": CHANNEL_N, "error": str(err), "method": "representation"}
    return record


def cmd_verify(args) -> int:
    r_arg = _parse_r_list(args.r) if args.r is not None else None
    mf = load_model_file(args.file)
    model = build_model(mf)
    opts = {
        "mc_n": args.mc_n if args.mc_n is not None else mf.options.get("mc_n", 10**6),
        "seed": args.seed if args.seed is not None else mf.options.get("seed", 0),
        "workers": args.workers if args.workers is not None else mf.options.get("workers", 1),
        "rel_tol": mf.options.get("rel_tol", 1e-8),
    }
    if r_arg is not None:
        r_list = r_arg
    elif mf.r is not None:
        r_list = list(mf.r)
    else:
        r_list = list(DEFAULT_R_GRID)
    requested = args.method or mf.options.get("method")
    method = _method_for(model, requested)
    if method == EXACT and isinstance(model, DensityModel):
        raise UsageError("method exact needs a discrete model")
    if method == QUADRATURE and not isinstance(model, DensityModel):
        raise UsageError("method quadrature needs a density model")

    t0 = time.perf_counter()
    pos = _positivity(model)
    timings = {"positivity": time.perf_counter() - t0}
    records = []
    for r in r_list:
        t1 = time.perf_counter()
        records.append(_verify_one(mf, model, r, method, opts))
        timings[repr(float(r))] = time.perf_counter() - t1

    report = {
        "tool_version": __version__,
        "model_digest": model_digest(mf),
        "model": mf.canonical(),
        "positivity": pos.to_dict(),
        "records": records,
        "all_as_expected": all(rec["as_expected"] for rec in records),
    }
    _emit(dumps(report), args.out)
    if args.out:
        with open(args.out + ".meta.json", "w", encoding="utf-8") as fh:
            fh.write(dumps({"wall_time_s": timings, "model_digest": report["model_digest"]}))
    for rec in records:
        print(f"r={rec['r']:g}: {rec['verdict']}"
              + ("" if rec["as_expected"] else f" (expected {rec['expected']})"),
              file=sys.stderr)
    return EXIT_OK if report["all_as_expected"] else EXIT_UNEXPECTED


# -- representation -----------------------------------------------------------------

def cmd_representation(args) -> int:
    mf = load_model_file(args.file)
    model = build_model(mf)
    if isinstance(model, TwoPointLaw):
        model = model.joint()
    if not isinstance(model, DiscreteJoint):
        raise UsageError("representation needs a discrete model")
    r = float(args.r)
    n_list = _parse_n_list(args.n)
    if not 0 < r < 2:
        raise RegimeError(f"the representation needs 0 < r < 2, got {r}")
    exact = delta(model, r, EXACT).value
    rows = []
    for n in n_list:
        ch = truncated_delta_channels(model, r, TruncationWindow(n))
        rows.append((n, ch.integral_channel, ch.expectation_channel, exact,
                     abs(exact - ch.integral_channel)))
    _emit(_csv_text(["n", "channel_a", "channel_b", "exact_delta", "gap"], rows), args.out)
    return EXIT_OK


# -- sweep --------------------------------------------------------------------------

def cmd_sweep(args) -> int:
    try:
        r = float(args.r)
    except ValueError:
        raise UsageError(f"--r expects a number, got {args.r!r}") from None
    if not (r > 0 and math.isfinite(r)):
        raise UsageError("sweep needs a finite r > 0")
    a_grid = _parse_range(args.a, "a")
    p_grid = _parse_range(args.p, "p")
    if p_grid[0] <= 0 or p_grid[-1] >= 1:
        raise UsageError("--p must lie inside (0, 1)")
    hits = search_two_point(r, a_grid, p_grid)
    _emit(_csv_text(["a", "p", "delta"], hits), args.out)
    return EXIT_OK


# -- entry point --------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_ERROR)


def build_parser():
    parser = _Parser(prog="momentlab",
                     description="Check E|X+Y|^r >= E|X-Y|^r on model files.")
    parser.add_argument("--version", action="version", version=f"momentlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    v = sub.add_parser("verify", help="positivity, moments and verdict per r")
    v.add_argument("file")
    v.add_argument("--r", help="comma-separated exponents")
    v.add_argument("--method", choices=("exact", "quadrature", "mc"))
    v.add_argument("--mc-n", type=int, dest="mc_n")
    v.add_argument("--seed", type=int)
    v.add_argument("--workers", type=int)
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)

    rep = sub.add_parser("representation", help="truncated-delta convergence table (CSV)")
    rep.add_argument("file")
    rep.add_argument("--r", required=True, type=float)
    rep.add_argument("--n", required=True, help="comma-separated window indices")
    rep.add_argument("--out")
    rep.set_defaults(func=cmd_representation)

    sw = sub.add_parser("sweep", help="two-point laws with negative delta (CSV)")
    sw.add_argument("--r", required=True)
    sw.add_argument("--a", required=True, help="lo:hi:steps")
    sw.add_argument("--p", required=True, help="lo:hi:steps")
    sw.add_argument("--out")
    sw.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for name in ("mc_n", "workers"):
        value = getattr(args, name, None)
        if value is not None and value < 1:
            parser.error(f"--{name.replace('_', '-')} must be positive")
    if getattr(args, "seed", None) is not None and args.seed < 0:
        parser.error("--seed must be non-negative")
    try:
        return args.func(args)
    except UsageError as err:
        parser.error(str(err))
    except (MomentLabError, OSError, ValueError, ArithmeticError) as err:
        print(f"momentlab: error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
