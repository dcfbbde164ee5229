"""Command-line interface: ``egse <verb> [options]``.

Results go to stdout (or ``--out``) as JSON or CSV; failures go to stderr as
a JSON object ``{"schema_version": ..., "error": {"type": ..., "message": ...}}``.
Exit status is 0 on success, 1 on runtime errors and 2 on usage errors.
Verbs that draw random numbers require ``--seed``.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .data_io import bundled_path, format_float, load_csv, summarize, write_csv
from .density import Theta, egse_logpdf
from .elliptical import parse_generator
from .fit import FitOptions, fit_mle, profile_nu
from .gof import qq_points, residual_report
from .links import parse_links
from .marginals import marginal_quantile, selection_conditional_logpdf
from .mcstudy import StudyScenario, default_workers, reference_truth, run_study
from .moments import (
    CLOSED_FORM,
    MONTE_CARLO,
    MomentRequest,
    estimate_moment,
    kl_divergence_mc,
    kl_gaussian_closed_form,
)
from .sampler import sample_egse

__all__ = ["main", "dispatch", "build_parser", "dumps", "SCHEMA_VERSION"]

SCHEMA_VERSION = "1.0"


class UsageError(Exception):
    """Bad or missing command-line options (exit status 2)."""


# --- JSON with fixed float formatting ----------------------------------------------

def dumps(obj, indent: int = 2) -> str:
    """JSON text in which every float carries 17 significant digits (non-finite -> null)."""
    return _dump(obj, indent, 0)


def _dump(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, (bool, np.bool_)) or obj is None:
        return json.dumps(bool(obj) if obj is not None else None)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_dump(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(_dump(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _dump(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _emit(payload: dict, out: str | None):
    text = dumps({"schema_version": SCHEMA_VERSION, **payload}) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# --- argument helpers ----------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _theta_from_file(path: str, kind_override: str | None) -> Theta:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if "theta" in raw and isinstance(raw["theta"], dict):
        raw = raw["theta"]
    kind = parse_generator(kind_override) if kind_override else None
    return Theta.from_dict(raw, kind)


def _require_seed(args):
    if args.seed is None:
        raise UsageError(f"'{args.verb}' draws random numbers and requires --seed")


def _cols(text: str | None):
    return [c.strip() for c in text.split(",")] if text else None


def _add_model(p):
    p.add_argument("--theta", required=True, help="JSON file with mu, sigma1/sigma2/rho (or sigma), "
                   "lambda, tau and optionally nu; a fit.json is accepted")
    p.add_argument("--link", required=True, help="comma-separated link tokens, e.g. logit,logit")
    p.add_argument("--generator", default=None,
                   help="'normal' or 'student:<nu>' (default: nu from the theta file, else normal)")


def _add_data(p):
    p.add_argument("--data", required=True, help="CSV file with a header row")
    p.add_argument("--cols", default=None, help="comma-separated column names (default: all numeric)")
    p.add_argument("--percent", action="store_true",
                   help="divide (0,1)-domain columns by 100 before use")


def _add_fit_options(p):
    p.add_argument("--tau", type=float, default=None,
                   help="fix tau at this value (default: estimate tau)")
    p.add_argument("--max-iter", type=int, default=500, help="optimizer iteration cap")
    p.add_argument("--gtol", type=float, default=1e-6, help="gradient max-norm tolerance")
    p.add_argument("--single-start", action="store_true",
                   help="only use the elliptical start (lambda = 0)")
    p.add_argument("--out", default=None, help="write fit JSON here (default: stdout)")
    p.add_argument("--seed", type=int, default=None, help="accepted for reproducibility records")


def _links_for(args, n: int | None = None):
    return parse_links(args.link, n)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="egse", description="Extended G-skew-elliptical distributions.")
    parser.add_argument("--version", action="version", version=f"egse {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="verb", metavar="VERB", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("pdf", help="log-density at a point or at each row of a CSV file")
    _add_model(p)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--point", default=None, help="comma-separated coordinates of one point")
    src.add_argument("--data", default=None, help="CSV file with a header row")
    p.add_argument("--cols", default=None, help="comma-separated column names (default: all numeric)")
    p.add_argument("--percent", action="store_true",
                   help="divide (0,1)-domain columns by 100 before use")

    p = sub.add_parser("sample", help="draw from the model")
    _add_model(p)
    p.add_argument("-m", "--size", type=int, required=True, help="number of draws")
    p.add_argument("--seed", type=int, default=None, help="random seed (required)")
    p.add_argument("-o", "--out", default=None, help="output CSV (default: stdout)")

    p = sub.add_parser("fit", help="maximum-likelihood fit")
    _add_data(p)
    p.add_argument("--link", required=True, help="comma-separated link tokens")
    p.add_argument("--generator", default="normal", help="'normal' or 'student:<nu>'")
    _add_fit_options(p)

    p = sub.add_parser("profile", help="Student fits over a grid of nu; keeps the best")
    _add_data(p)
    p.add_argument("--link", required=True, help="comma-separated link tokens")
    p.add_argument("--nu-grid", default="1:50",
                   help="'a:b' for the integers a..b, or a comma-separated list")
    p.add_argument("--workers", type=int, default=None,
                   help="parallel processes (default: EGSE_THREADS or CPU count)")
    _add_fit_options(p)

    p = sub.add_parser("quantile", help="marginal quantile of Y_i")
    _add_model(p)
    p.add_argument("-i", type=int, required=True, help="component (1-based)")
    p.add_argument("-p", type=float, required=True, help="probability in (0, 1)")

    p = sub.add_parser("conditional", help="density of Y_i given Y_j > kappa on a grid (CSV)")
    _add_model(p)
    p.add_argument("--kappa", type=float, required=True, help="threshold inside the domain of Y_j")
    p.add_argument("-i", type=int, required=True, help="component whose density is shown (1-based)")
    p.add_argument("-j", type=int, required=True, help="conditioning component (1-based)")
    p.add_argument("--points", type=int, default=101, help="grid size")
    p.add_argument("-o", "--out", default=None, help="output CSV (default: stdout)")

    p = sub.add_parser("moment", help="mixed moment E[prod Y_i^m_i]")
    _add_model(p)
    p.add_argument("--m", required=True, help="comma-separated nonnegative integer exponents")
    p.add_argument("--method", choices=("auto", "closed", "mc"), default="auto",
                   help="closed form (log links, normal), Monte Carlo, or auto")
    p.add_argument("--mc-size", type=int, default=100_000, help="Monte Carlo sample size")
    p.add_argument("--seed", type=int, default=None, help="random seed (required for Monte Carlo)")

    p = sub.add_parser("kl", help="Kullback-Leibler divergence KL(theta1 || theta2)")
    p.add_argument("--theta1", required=True, help="JSON parameters of the first law")
    p.add_argument("--theta2", required=True, help="JSON parameters of the second law")
    p.add_argument("--link", default=None,
                   help="comma-separated link tokens (shared; validated but the divergence does not depend on them)")
    p.add_argument("--generator", default=None, help="'normal' or 'student:<nu>'")
    p.add_argument("--mc-size", type=int, default=100_000, help="Monte Carlo sample size")
    p.add_argument("--seed", type=int, default=None, help="random seed (required)")

    p = sub.add_parser("gof", help="quantile residuals with KS and AD tests")
    p.add_argument("--fit", required=True, help="fit JSON written by 'egse fit'")
    _add_data(p)
    p.add_argument("--link", required=True, help="comma-separated link tokens")
    p.add_argument("--marginal-only", action="store_true",
                   help="use the marginal of Y_2 instead of its conditional given Y_1")
    p.add_argument("--qq", default=None, help="write QQ pairs to this CSV")
    p.add_argument("--seed", type=int, default=None, help="reserved; continuous data need no randomization")
    p.add_argument("--out", default=None, help="write JSON here (default: stdout)")

    p = sub.add_parser("study", help="Monte Carlo recovery study (CSV report)")
    p.add_argument("--config", default=None, help="JSON study configuration")
    p.add_argument("--seed", type=int, default=None, help="base seed (required)")
    p.add_argument("--workers", type=int, default=None,
                   help="parallel processes (default: EGSE_THREADS or CPU count)")
    p.add_argument("--out", default=None, help="output CSV (default: stdout)")

    p = sub.add_parser("summarize", help="descriptive statistics of data columns")
    _add_data(p)
    return parser


# --- verbs ---------------------------------------------------------------------------

def _data_path(args):
    path = args.data
    if not Path(path).exists() and Path(path).name == "swiss.csv":
        return bundled_path("swiss.csv")
    return path


def _load(args):
    return load_csv(_data_path(args), _cols(args.cols), percent=args.percent)


def _load_linked(args, cols=None):
    """Resolve the columns first, then reload with one link per column so domains are checked."""
    probe = load_csv(_data_path(args), cols or _cols(args.cols))
    links = parse_links(args.link, probe.n)
    return load_csv(_data_path(args), list(probe.column_names), links, percent=args.percent), links


def cmd_pdf(args):
    theta = _theta_from_file(args.theta, args.generator)
    links = _links_for(args, theta.n)
    if args.point is not None:
        rows = np.array([[float(v) for v in args.point.split(",")]])
        if rows.shape[1] != theta.n:
            raise ValueError(f"--point has {rows.shape[1]} coordinates, the model has {theta.n}")
    else:
        rows = _load(args).values
    vals = egse_logpdf(rows, theta, links)
    sys.stdout.write("".join(format_float(v) + "\n" for v in np.atleast_1d(vals)))


def cmd_sample(args):
    _require_seed(args)
    theta = _theta_from_file(args.theta, args.generator)
    links = _links_for(args, theta.n)
    batch = sample_egse(theta, links, args.size, seed=args.seed)
    if args.out:
        write_csv(args.out, batch.values)
    else:
        _csv_stdout(batch.values)
    logging.getLogger("egse").info("accepted %d of %d proposals", batch.accepted, batch.proposed)


def _csv_stdout(values, names=None):
    values = np.atleast_2d(values)
    names = names or [f"y{i + 1}" for i in range(values.shape[1])]
    sys.stdout.write(",".join(names) + "\n")
    for row in values:
        sys.stdout.write(",".join(format_float(v) for v in row) + "\n")


def _fit_opts(args, **extra):
    return FitOptions(tau_fixed=args.tau, max_iter=args.max_iter, gradient_tolerance=args.gtol,
                      multistart=not args.single_start, **extra)


def cmd_fit(args):
    data, links = _load_linked(args)
    res = fit_mle(data, links, parse_generator(args.generator), _fit_opts(args))
    _emit({"columns": list(data.column_names), "links": [l.token for l in links],
           "generator": res.theta_hat.kind.token, **res.to_dict()}, args.out)


def _parse_grid(text: str):
    if ":" in text:
        a, b = text.split(":")
        return tuple(range(int(a), int(b) + 1))
    return tuple(float(v) for v in text.split(","))


def cmd_profile(args):
    data, links = _load_linked(args)
    workers = args.workers or default_workers()
    res = profile_nu(data, links, _fit_opts(args, nu_grid=_parse_grid(args.nu_grid), workers=workers))
    _emit({"columns": list(data.column_names), "links": [l.token for l in links],
           "generator": res.theta_hat.kind.token, **res.to_dict()}, args.out)


def cmd_quantile(args):
    theta = _theta_from_file(args.theta, args.generator)
    links = _links_for(args, theta.n)
    q = marginal_quantile(args.p, args.i - 1, theta, links)
    _emit({"i": args.i, "p": args.p, "quantile": q}, None)


def cmd_conditional(args):
    theta = _theta_from_file(args.theta, args.generator)
    links = _links_for(args, theta.n)
    i, j = args.i - 1, args.j - 1
    lo = marginal_quantile(0.001, i, theta, links)
    hi = marginal_quantile(0.999, i, theta, links)
    grid = np.linspace(lo, hi, args.points)
    pdf = np.exp(selection_conditional_logpdf(grid, i, j, args.kappa, theta, links))
    table = np.column_stack([grid, pdf])
    if args.out:
        write_csv(args.out, table, ["y", "pdf"])
    else:
        _csv_stdout(table, ["y", "pdf"])


def cmd_moment(args):
    theta = _theta_from_file(args.theta, args.generator)
    links = _links_for(args, theta.n)
    m = tuple(int(v) for v in args.m.split(","))
    method = args.method
    if method == "auto":
        closed = theta.kind.is_gaussian and all(l.kind == "log" for l in links)
        method = "closed" if closed else "mc"
    if method == "mc":
        _require_seed(args)
    req = MomentRequest(m, CLOSED_FORM if method == "closed" else MONTE_CARLO, args.mc_size, args.seed)
    _emit(estimate_moment(req, theta, links), None)


def cmd_kl(args):
    _require_seed(args)
    t1 = _theta_from_file(args.theta1, args.generator)
    t2 = _theta_from_file(args.theta2, args.generator)
    links = _links_for(args, t1.n) if args.link else None
    est, se = kl_divergence_mc(t1, t2, links, args.mc_size, args.seed)
    out = {"estimate": est, "stderr": se, "method": MONTE_CARLO}
    try:
        out["closed_form"] = kl_gaussian_closed_form(t1, t2)
    except ValueError:
        pass
    _emit(out, None)


def cmd_gof(args):
    fit_raw = json.loads(Path(args.fit).read_text(encoding="utf-8"))
    theta = Theta.from_dict(fit_raw["theta"])
    data, links = _load_linked(args, fit_raw.get("columns") if not args.cols else None)
    rep = residual_report(data, theta, links, args.seed, conditional=not args.marginal_only)
    if args.qq:
        write_csv(args.qq, qq_points(rep.residuals), ["theoretical", "empirical"])
    _emit({"residual_construction": "marginal" if args.marginal_only else "rosenblatt",
           **rep.to_dict()}, args.out)


def cmd_study(args):
    _require_seed(args)
    cfg = json.loads(Path(args.config).read_text(encoding="utf-8")) if args.config else {}
    kind = parse_generator(cfg.get("generator", "normal"))
    truth = Theta.from_dict(cfg["true"], kind) if "true" in cfg else reference_truth(kind=kind)
    links = parse_links(cfg.get("links", "tanprobit,tanprobit"), 2)
    kwargs = {}
    if "sizes" in cfg:
        kwargs["sample_sizes"] = tuple(cfg["sizes"])
    if "rhos" in cfg:
        kwargs["rho_values"] = tuple(cfg["rhos"])
    if "replications" in cfg:
        kwargs["replications"] = int(cfg["replications"])
    tau_fixed = cfg.get("tau_fixed")
    scenario = StudyScenario(truth, tuple(links), base_seed=args.seed,
                             fit_options=FitOptions(tau_fixed=tau_fixed, compute_se=False),
                             workers=args.workers or default_workers(), **kwargs)
    report = run_study(scenario)
    if args.out:
        report.to_csv(args.out)
    else:
        rows = report.rows()
        sys.stdout.write("size,rho,param,rb,rmse,failures\n")
        for r in rows:
            sys.stdout.write(f"{r['size']},{format_float(r['rho'])},{r['param']},"
                             f"{format_float(r['rb'])},{format_float(r['rmse'])},{r['failures']}\n")


def cmd_summarize(args):
    data = _load(args)
    _emit({"m": data.m, "columns": summarize(data)}, None)


COMMANDS = {
    "pdf": cmd_pdf,
    "sample": cmd_sample,
    "fit": cmd_fit,
    "profile": cmd_profile,
    "quantile": cmd_quantile,
    "conditional": cmd_conditional,
    "moment": cmd_moment,
    "kl": cmd_kl,
    "gof": cmd_gof,
    "study": cmd_study,
    "summarize": cmd_summarize,
}


def _error(kind: str, message: str, code: int) -> int:
    sys.stderr.write(dumps({"schema_version": SCHEMA_VERSION,
                            "error": {"type": kind, "message": message}}) + "\n")
    return code


def dispatch(argv: Sequence[str] | None = None) -> int:
    """Parse ``argv`` and run the verb; returns the exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        return _error("UsageError", str(exc), 2)
    if args.verb is None:
        return _error("UsageError", "a verb is required; see 'egse --help'", 2)
    if args.verbose:
        logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                            format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.verb](args)
    except UsageError as exc:
        return _error("UsageError", str(exc), 2)
    except (ValueError, ArithmeticError, OSError, KeyError, np.linalg.LinAlgError,
            RuntimeError) as exc:
        return _error(type(exc).__name__, str(exc), 1)
    return 0


def main(argv: Sequence[str] | None = None):
    sys.exit(dispatch(argv))


if __name__ == "__main__":
    main()
