"""stein-chisq: bounds, distances, rate studies and the self-test from the shell.

Every command prints one report (JSON by default) with the layout
``{"schema", "command", "inputs", "outputs", "seed", "version", "wall_time"}``.
Numbers in ``outputs`` are tagged ``computed``, ``estimated`` (with ``se``)
or ``paper-constant``.  Exit codes: 0 success, 1 a checked inequality failed,
2 invalid input.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .bounds import (
    CONSTANTS,
    PEARSON_VARIANTS,
    NormBundle,
    bound_kolmogorov_pearson,
    bound_literature,
    bound_pearson_smooth,
    bound_squared_clt,
    kolmogorov_optimized,
    stated_alpha,
)
from .distances import (
    SquaredCLTConfig,
    kolmogorov_distance,
    rademacher_atom_check,
    rate_slope,
    smooth_distance,
)
from .gamma_stein import (
    BudgetExhausted,
    GammaParams,
    bound_catalog,
    derivative_table,
    stein_residual,
)
from .normal_stein import GDerivatives, PolynomialSource, TableSource, operator_comparison, sigma_from_p, surface_points
from .numerics import QuadratureError
from .selftest import SCALES, computed, estimated, paper_constant, run_suite
from .statistics import (
    DISTRIBUTIONS,
    EnumerationBudgetExceeded,
    MultinomialModel,
    distribution_moments,
    leave_one_out_moments,
    loo_caps,
    multinomial_support,
    oracle_leave_one_out_moments,
    parse_p,
    pearson_statistic,
    total_probability,
)
from .test_functions import parse_descriptor

SCHEMA = 1
EXIT_OK, EXIT_VIOLATION, EXIT_INPUT = 0, 1, 2
SEED_ENV = "STEIN_CHISQ_SEED"


class InputError(ValueError):
    pass


class Outcome:
    """What a command hands back: inputs echo, tagged outputs, and whether its checks held."""

    def __init__(self, inputs: dict, outputs: dict, ok: bool = True, rows: Optional[List[dict]] = None):
        self.inputs, self.outputs, self.ok, self.rows = inputs, outputs, ok, rows


# -- argument helpers ---------------------------------------------------------------------

def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        raise InputError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {text!r}")


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}")


def _probabilities(args) -> Optional[tuple]:
    if args.p is not None:
        return parse_p(args.p)
    if getattr(args, "m", None) is not None:
        return parse_p(f"uniform:{args.m}")
    return None


def _pearson_model(args) -> MultinomialModel:
    p = _probabilities(args)
    if p is None:
        raise InputError("give the cell probabilities with --p (or --m for uniform cells)")
    if args.n is None:
        raise InputError("--n is required")
    return MultinomialModel(args.n, p)


def _model(args):
    """Pearson model when probabilities are given, otherwise the squared-CLT statistic."""
    if _probabilities(args) is not None:
        return _pearson_model(args)
    if args.n is None:
        raise InputError("--n is required")
    return SquaredCLTConfig(args.n, args.d, args.dist)


def _test_function(args):
    return parse_descriptor(args.h)


# -- commands -------------------------------------------------------------------------------

def cmd_bound_clt(args) -> Outcome:
    h = _test_function(args)
    moments = distribution_moments(args.dist)
    rep = bound_squared_clt(NormBundle.of(h), moments, args.n, args.d)
    return Outcome(
        {"n": args.n, "d": args.d, "dist": args.dist, "h": h.descriptor},
        {"bound": computed(rep.value), "alphas": [computed(a) for a in rep.extra["alphas"]],
         "prefactor": computed(rep.extra["prefactor"]), "hypotheses": rep.hypotheses})


def cmd_bound_pearson(args) -> Outcome:
    model = _pearson_model(args)
    h = _test_function(args)
    norms = NormBundle.of(h)
    variants = PEARSON_VARIANTS if args.variant == "all" else (args.variant,)
    out: Dict[str, object] = {}
    for v in variants:
        try:
            rep = bound_pearson_smooth(norms, model, v)
        except KeyError as exc:
            out[v] = {"applicable": False, "reason": exc.args[0]}
            continue
        out[v] = {"applicable": True, "bound": computed(rep.value), "hypotheses": rep.hypotheses}
    return Outcome({"n": model.n, "p": list(model.p), "h": h.descriptor, "variant": args.variant}, out)


def cmd_bound_kolmogorov(args) -> Outcome:
    model = _pearson_model(args)
    rep = bound_kolmogorov_pearson(model.n, model.p)
    out = {"bound": computed(rep.value), "n_pstar": computed(rep.extra["n_pstar"]),
           "alpha": computed(stated_alpha(model.n, model.p)), "hypotheses": rep.hypotheses}
    if args.optimize:
        alpha, value = kolmogorov_optimized(model.n, model.p)
        out["optimized"] = {"alpha": computed(alpha), "bound": computed(value)}
    return Outcome({"n": model.n, "p": list(model.p), "optimize": args.optimize}, out)


def cmd_bound_literature(args) -> Outcome:
    model = _pearson_model(args)
    first, second = bound_literature(model.n, model.p)
    return Outcome({"n": model.n, "p": list(model.p)},
                   {"linear_in_m": computed(first), "quarter_power_in_m": computed(second),
                    "constants": {k: paper_constant(CONSTANTS[k].value) for k in ("lit.gotze", "lit.bentkus")}})


def cmd_bound_gamma(args) -> Outcome:
    params = GammaParams(args.r, args.lam)
    h = _test_function(args)
    table = derivative_table(h, params, 1)
    norms = table.norm_bundle()
    cat = bound_catalog(params, args.k, norms)
    return Outcome({"r": args.r, "lambda": args.lam, "k": args.k, "h": h.descriptor},
                   {name: computed(v) for name, v in cat.items()})


def _distance_inputs(cfg, h, args) -> dict:
    base = {"mode": args.mode, "budget": args.budget}
    if isinstance(cfg, MultinomialModel):
        base.update({"statistic": "pearson", "n": cfg.n, "p": list(cfg.p)})
    else:
        base.update({"statistic": "squared-clt", "n": cfg.n, "d": cfg.d, "dist": cfg.dist})
    if h is not None:
        base["h"] = h.descriptor
    return base


def _tag_estimate(est) -> dict:
    if est.mode == "exact":
        return {"distance": computed(est.value), "signed": computed(est.signed)}
    return {"distance": estimated(est.value, est.se), "signed": estimated(est.signed, est.se)}


def _exceeds(est, bound: float) -> bool:
    slack = 3 * est.se if est.mode == "mc" else 0.0
    return est.value - slack > bound


def cmd_distance_smooth(args) -> Outcome:
    cfg = _model(args)
    h = _test_function(args)
    est = smooth_distance(cfg, h, args.mode, args.budget, seed=args.seed)
    out = {**_tag_estimate(est), "mode": est.mode}
    ok = True
    if args.check:
        checks = {}
        norms = NormBundle.of(h)
        if isinstance(cfg, MultinomialModel):
            for v in PEARSON_VARIANTS:
                try:
                    b = bound_pearson_smooth(norms, cfg, v).value
                except KeyError:
                    continue
                checks[v] = {"bound": computed(b), "pass": not _exceeds(est, b)}
        else:
            b = bound_squared_clt(norms, distribution_moments(cfg.dist), cfg.n, cfg.d).value
            checks["squared-clt"] = {"bound": computed(b), "pass": not _exceeds(est, b)}
        out["checks"] = checks
        ok = all(c["pass"] for c in checks.values())
    return Outcome(_distance_inputs(cfg, h, args), out, ok)


def cmd_distance_kolmogorov(args) -> Outcome:
    cfg = _model(args)
    est = kolmogorov_distance(cfg, args.mode, args.budget, seed=args.seed)
    out = {**_tag_estimate(est), "mode": est.mode}
    ok = True
    if args.check:
        if not isinstance(cfg, MultinomialModel):
            raise InputError("--check for the Kolmogorov distance needs a Pearson model (--p or --m)")
        b = bound_kolmogorov_pearson(cfg.n, cfg.p).value
        ok = not _exceeds(est, b)
        out["checks"] = {"kolmogorov": {"bound": computed(b), "pass": ok}}
    return Outcome(_distance_inputs(cfg, None, args), out, ok)


def _rate_outcome(inputs, rows, key="distance") -> Outcome:
    pts = [(r["n"], r[key]["value"]) for r in rows]
    out: Dict[str, object] = {"rows": rows}
    if len(pts) >= 3 and all(v > 0 for _, v in pts):
        slope, se = rate_slope(pts)
        out["slope"] = estimated(slope, se)
    return Outcome(inputs, out, rows=rows)


def cmd_rate_pearson(args) -> Outcome:
    h = _test_function(args)
    p = _probabilities(args)
    if p is None:
        raise InputError("give the cell probabilities with --p (or --m for uniform cells)")
    rows = []
    for n in args.ns:
        model = MultinomialModel(n, p)
        est = smooth_distance(model, h, args.mode, args.budget, seed=args.seed)
        row = {"n": n, **_tag_estimate(est)}
        try:
            row["bound_sqrt"] = computed(bound_pearson_smooth(NormBundle.of(h), model, "sqrt").value)
        except KeyError:
            pass
        rows.append(row)
    return _rate_outcome({"statistic": "pearson", "p": list(p), "h": h.descriptor, "ns": args.ns,
                          "mode": args.mode}, rows)


def cmd_rate_clt(args) -> Outcome:
    h = _test_function(args)
    mode = args.mode if args.dist == "rademacher" else "mc"
    rows = []
    for n in args.ns:
        cfg = SquaredCLTConfig(n, args.d, args.dist)
        est = smooth_distance(cfg, h, mode, args.budget, seed=args.seed)
        b = bound_squared_clt(NormBundle.of(h), distribution_moments(args.dist), n, args.d).value
        rows.append({"n": n, **_tag_estimate(est), "bound": computed(b)})
    return _rate_outcome({"statistic": "squared-clt", "d": args.d, "dist": args.dist, "h": h.descriptor,
                          "ns": args.ns, "mode": mode}, rows)


def cmd_rate_atom(args) -> Outcome:
    rows = []
    for n in args.ns:
        exact, approx, ratio = rademacher_atom_check(n)
        rows.append({"n": n, "atom": computed(exact), "approximation": computed(approx), "ratio": computed(ratio)})
    return _rate_outcome({"statistic": "rademacher-atom", "ns": args.ns}, rows, key="atom")


def cmd_gamma_solve(args) -> Outcome:
    params = GammaParams(args.r, args.lam)
    h = _test_function(args)
    table = derivative_table(h, params, args.k)
    if args.grid is not None:
        if args.grid < 2:
            raise InputError("--grid needs at least two points")
        xs = np.linspace(params.sup_domain.lo, params.sup_domain.hi, args.grid)
    else:
        xs = np.asarray(args.x, dtype=float)
    vals = table.values(xs)
    return Outcome(
        {"r": args.r, "lambda": args.lam, "h": h.descriptor, "K": args.k, "x": xs.tolist()},
        {"gamma_mean_h": computed(table.gamma_mean_h),
         "derivatives": {str(k): [computed(v) for v in vals[k]] for k in table.orders}})


def cmd_gamma_verify(args) -> Outcome:
    params = GammaParams(args.r, args.lam)
    h = _test_function(args)
    K = min(args.k, h.max_order + 1)
    table = derivative_table(h, params, K)
    dom = params.sup_domain
    xs = np.linspace(dom.lo, dom.hi, args.points)
    residual = float(np.max(np.abs(stein_residual(table, xs)))) if K >= 2 else 0.0
    norms = table.norm_bundle()
    sups = table.sup_norms(range(1, K + 1))
    checks: Dict[str, object] = {"residual": {"value": computed(residual), "pass": residual <= 1e-6}}
    for k in range(1, K + 1):
        try:
            cat = bound_catalog(params, k, norms)
        except KeyError:
            continue
        for name, b in cat.items():
            measured = sups["xf" if name.startswith("xf") else "f"][k]
            checks[f"k={k}.{name}"] = {"measured": computed(measured), "bound": computed(b),
                                       "pass": measured <= b + 1e-8}
    ok = all(c["pass"] for c in checks.values())
    return Outcome({"r": args.r, "lambda": args.lam, "h": h.descriptor, "K": K, "points": args.points},
                   {"gamma_mean_h": computed(table.gamma_mean_h), "checks": checks}, ok)


def cmd_mvn_compare(args) -> Outcome:
    p = _probabilities(args)
    if p is None:
        raise InputError("give the cell probabilities with --p (or --m for uniform cells)")
    model = sigma_from_p(p)
    if args.f == "w":
        src = PolynomialSource([0.0, 1.0])
    elif args.f == "w2":
        src = PolynomialSource([0.0, 0.0, 1.0])
    else:
        h = _test_function(args)
        src = TableSource(derivative_table(h, GammaParams.chi_square(model.m - 1), 2))
    rng = np.random.default_rng(args.seed)
    s = surface_points(model, rng, args.points, scale=2.0)
    lhs, rhs = operator_comparison(GDerivatives(src), model, s)
    diff = float(np.max(np.abs(lhs - rhs)))
    ok = diff <= args.tol
    return Outcome({"p": list(model.p), "f": args.f, "h": args.h if args.f == "table" else None,
                    "points": args.points, "tol": args.tol},
                   {"max_abs_diff": computed(diff), "pass": ok}, ok)


def cmd_stats_enumerate(args) -> Outcome:
    model = _pearson_model(args)
    U, logp = multinomial_support(model, args.budget or 10**7)
    w = pearson_statistic(model, U)
    prob = np.exp(logp)
    out = {"support_size": computed(len(U)), "total_probability": computed(total_probability(logp)),
           "mean_statistic": computed(math.fsum(prob * w))}
    if args.h:
        h = _test_function(args)
        out["mean_h"] = computed(math.fsum(prob * h(w)))
    return Outcome({"n": model.n, "p": list(model.p), "h": args.h}, out)


def cmd_stats_moments(args) -> Outcome:
    if args.n is None or args.p is None:
        raise InputError("stats moments needs --n and --p (a single cell probability)")
    try:
        p = float(args.p)
    except ValueError:
        raise InputError("--p must be a single cell probability for stats moments") from None
    corrected = leave_one_out_moments(args.n, p, "corrected")
    published = leave_one_out_moments(args.n, p, "published")
    exact = oracle_leave_one_out_moments(args.n, p)
    keep = ("m2", "m4", "m6") if args.order is None else (f"m{args.order}",)
    tag = lambda t: {k: computed(v) for k, v in t._asdict().items() if k in keep}
    out = {"closed_form": tag(corrected), "published_form": tag(published), "enumeration": tag(exact)}
    if args.n * p >= 1:
        out["caps"] = {k: paper_constant(v) if k in ("m2", "m4", "m6") else computed(v)
                       for k, v in loo_caps().items() if args.order is None or k in keep}
    return Outcome({"n": args.n, "p": p, "order": args.order}, out)


# -- report emission ------------------------------------------------------------------------

def make_report(command: str, outcome: Outcome, seed: int, wall_time: float) -> dict:
    return {"schema": SCHEMA, "command": command, "inputs": outcome.inputs, "outputs": outcome.outputs,
            "seed": int(seed), "version": __version__, "wall_time": round(wall_time, 6)}


def _flatten(obj, prefix=""):
    """Yield ``(key, value, provenance, se)`` for every leaf of a report's outputs."""
    if isinstance(obj, dict) and "provenance" in obj and "value" in obj:
        yield prefix, obj["value"], obj["provenance"], obj.get("se", "")
    elif isinstance(obj, dict):
        for k, v in obj.items():
            yield from _flatten(v, f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}[{i}]")
    else:
        yield prefix, obj, "", ""


def render(report: dict, fmt: str, rows: Optional[List[dict]] = None) -> str:
    if fmt == "json":
        return json.dumps(report, sort_keys=True)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if rows:
        cols = list(rows[0])
        header = []
        for c in cols:
            header += [c, f"{c}_se"] if isinstance(rows[0][c], dict) else [c]
        writer.writerow(["schema", "command"] + header)
        for r in rows:
            line = []
            for c in cols:
                v = r.get(c)
                line += [v["value"], v.get("se", "")] if isinstance(v, dict) else [v]
            writer.writerow([report["schema"], report["command"]] + line)
    else:
        writer.writerow(["schema", "command", "key", "value", "provenance", "se"])
        for key, value, prov, se in _flatten(report["outputs"]):
            writer.writerow([report["schema"], report["command"], key, value, prov, se])
    return buf.getvalue().rstrip("\n")


def _emit(text: str, args) -> None:
    if args.out:
        with open(args.out, "a" if getattr(args, "_append", False) else "w") as fh:
            fh.write(text + "\n")
        args._append = True
    else:
        print(text)


def cmd_selftest(args) -> int:
    results = run_suite(args.scale, args.seed, args.only, args.jobs)
    failing = [r.cid for r in results if not r.passed]
    rows = []
    for r in results:
        outcome = Outcome({"scale": args.scale, "criterion": r.cid}, r.to_dict())
        report = make_report(f"selftest criterion {r.cid}", outcome, args.seed, r.wall_time)
        if args.format == "json":
            _emit(render(report, "json"), args)
        rows.append({"criterion": r.cid, "passed": r.passed, "title": r.title,
                     "failing_checks": ";".join(r.failed_checks)})
        print(r.line(), file=sys.stderr)
    summary = make_report("selftest", Outcome({"scale": args.scale, "only": args.only},
                                              {"passed": not failing, "failing_criteria": failing}),
                          args.seed, sum(r.wall_time for r in results))
    _emit(render(summary, args.format, rows if args.format == "csv" else None), args)
    if failing:
        print("failing criteria: " + ", ".join(str(c) for c in failing), file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


# -- parser ---------------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help=f"random seed (default ${SEED_ENV} or 0)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--out", metavar="PATH", help="write the report here instead of stdout")

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--n", type=int, help="number of trials / summands")
    model.add_argument("--p", help='cell probabilities "0.2,0.3,0.5" or "uniform:m"')
    model.add_argument("--m", type=int, help="number of equiprobable cells (instead of --p)")
    model.add_argument("--d", type=int, default=1, help="number of columns of the squared-CLT statistic")
    model.add_argument("--dist", choices=DISTRIBUTIONS, default="rademacher", help="summand distribution")

    hfun = argparse.ArgumentParser(add_help=False)
    hfun.add_argument("--h", default="cos:1", help="test function: cos:w, exp[:c], logistic[:s], halpha:z,alpha")

    sampling = argparse.ArgumentParser(add_help=False)
    sampling.add_argument("--mode", choices=("exact", "mc"), default="exact")
    sampling.add_argument("--budget", type=int, default=None, help="Monte Carlo draws or enumeration size cap")

    gamma = argparse.ArgumentParser(add_help=False)
    gamma.add_argument("--r", type=float, required=True, help="gamma shape")
    gamma.add_argument("--lambda", dest="lam", type=float, required=True, help="gamma rate")

    parser = argparse.ArgumentParser(prog="stein-chisq", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def group(name, help_text):
        p = sub.add_parser(name, help=help_text)
        return p.add_subparsers(dest="action", required=True)

    b = group("bound", "evaluate an explicit bound")
    p = b.add_parser("clt", aliases=["squared-clt"], parents=[common, model, hfun], help="squared-CLT smooth bound")
    p.set_defaults(func=cmd_bound_clt)
    p = b.add_parser("pearson", parents=[common, model, hfun], help="Pearson smooth bounds")
    p.add_argument("--variant", choices=PEARSON_VARIANTS + ("all",), default="all")
    p.set_defaults(func=cmd_bound_pearson)
    p = b.add_parser("kolmogorov", parents=[common, model], help="Pearson Kolmogorov bound")
    p.add_argument("--optimize", action="store_true", help="also minimize over the smoothing width")
    p.set_defaults(func=cmd_bound_kolmogorov)
    p = b.add_parser("literature", parents=[common, model], help="earlier Kolmogorov bounds for comparison")
    p.set_defaults(func=cmd_bound_literature)
    p = b.add_parser("gamma", parents=[common, gamma, hfun], help="gamma Stein solution derivative bounds")
    p.add_argument("--k", type=int, required=True, help="derivative order")
    p.set_defaults(func=cmd_bound_gamma)

    d = group("distance", "measure a distance to the chi-square limit")
    p = d.add_parser("smooth", parents=[common, model, hfun, sampling], help="|E h(W) - E h(Y)|")
    p.add_argument("--check", action="store_true", help="compare with the applicable bounds")
    p.set_defaults(func=cmd_distance_smooth)
    p = d.add_parser("kolmogorov", parents=[common, model, sampling], help="Kolmogorov distance")
    p.add_argument("--check", action="store_true", help="compare with the Pearson Kolmogorov bound")
    p.set_defaults(func=cmd_distance_kolmogorov)

    r = group("rate", "distance against n, with a log-log slope")
    p = r.add_parser("pearson", parents=[common, model, hfun, sampling])
    p.add_argument("--ns", type=_int_list, default=[16, 32, 64, 128, 256, 512])
    p.set_defaults(func=cmd_rate_pearson)
    p = r.add_parser("clt", parents=[common, model, hfun, sampling])
    p.add_argument("--ns", type=_int_list, default=[64, 256, 1024])
    p.set_defaults(func=cmd_rate_clt)
    p = r.add_parser("atom", parents=[common])
    p.add_argument("--ns", type=_int_list, default=[16, 32, 64, 128, 256, 512, 1024])
    p.set_defaults(func=cmd_rate_atom)

    g = group("gamma", "gamma Stein solution")
    p = g.add_parser("solve", parents=[common, gamma, hfun], help="f^(1..K) at given points")
    p.add_argument("--k", type=int, default=2, help="highest derivative order K")
    p.add_argument("--x", type=_float_list, default=[0.0, 1.0, 2.0])
    p.add_argument("--grid", type=int, default=None, help="use N equispaced points of the sup-norm domain instead")
    p.set_defaults(func=cmd_gamma_solve)
    p = g.add_parser("verify", parents=[common, gamma, hfun], help="residual and bound domination")
    p.add_argument("--k", type=int, default=4, help="highest derivative order checked")
    p.add_argument("--points", type=int, default=400)
    p.set_defaults(func=cmd_gamma_verify)

    mv = group("mvn", "multivariate normal Stein operator")
    p = mv.add_parser("compare", parents=[common, model, hfun],
                      help="MVN operator against the chi-square operator on the constraint surface")
    p.add_argument("--f", choices=("w", "w2", "table"), default="w2")
    p.add_argument("--points", "--trials", dest="points", type=int, default=1000)
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_mvn_compare)

    st = group("stats", "exact multinomial computations")
    p = st.add_parser("enumerate", parents=[common, model], help="enumerate the Pearson statistic")
    p.add_argument("--h", default=None, help="also report E h(W)")
    p.add_argument("--budget", type=int, default=None, help="enumeration size cap")
    p.set_defaults(func=cmd_stats_enumerate)
    p = st.add_parser("moments", parents=[common], help="leave-one-out moments for one cell")
    p.add_argument("--n", type=int)
    p.add_argument("--p", help="single cell probability")
    p.add_argument("--order", type=int, choices=(2, 4, 6), default=None, help="report only this moment")
    p.set_defaults(func=cmd_stats_moments)

    p = sub.add_parser("selftest", parents=[common], help="run the verification suite")
    p.add_argument("--scale", choices=SCALES, default="quick")
    p.add_argument("--only", type=_int_list, default=None, help="criterion ids, e.g. 2,6")
    p.add_argument("--jobs", type=int, default=1, help="criteria run in parallel processes")
    p.set_defaults(func=None)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # argparse exits 2 with usage on bad flags
    try:
        if args.seed is None:
            args.seed = _default_seed()
        if args.command == "selftest":
            return cmd_selftest(args)
        start = time.perf_counter()
        outcome = args.func(args)
        command = f"{args.command} {args.func.__name__[len('cmd_' + args.command) + 1:].replace('_', '-')}"
        report = make_report(command, outcome, args.seed, time.perf_counter() - start)
        _emit(render(report, args.format, outcome.rows), args)
    except (InputError, ValueError, KeyError, IndexError, EnumerationBudgetExceeded, BudgetExhausted,
            QuadratureError) as exc:
        msg = exc.args[0] if exc.args else str(exc)
        print(f"stein-chisq: error: {msg}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK if outcome.ok else EXIT_VIOLATION


if __name__ == "__main__":
    sys.exit(main())
