"""Command line interface.

Every subcommand reads one JSON configuration document::

    {
      "model":    {"drift": {"family": "constant", "mu": 0.0}
                            | {"family": "affine", "alpha": 0.0, "beta": 1.0},
                   "vol": {"family": "constant", "sigma0": 1.0},
                   "domain": {"lo": -50.0, "hi": 50.0}},
      "boundary": {"family": "constant", "a": 0.0}
                  | {"family": "linear" | "sqrt", "c0": 0.0, "c1": 1.0}
                  | {"family": "power", "c0": 0.0, "c1": 1.0, "p": 0.5},
      "query":    {"lam": ..., "ell": ..., "eps": ..., "delta": ..., "theta": ...},
      "scheme":   {"eps": 0.05, "T": 1.0, "h": null, "bridge_correction": true,
                   "path_index": 0, "jump_cap": 10000000, "window": 0.1},
      "mc":       {"n_paths": 1000, "seed": 0, "ucp_paths": null},
      "output":   {"format": "csv" | "json", "path": "out.csv"}
    }

Fields can be overridden with ``--set a.b.c=value`` (the value is parsed as
JSON when possible).  Exit codes: 0 success, 1 invalid configuration or
input, 2 numerical failure, 3 I/O failure.
"""
from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .errors import ElasticReflectError, NumericalError, ValidationError
from .laplace import ROUTES, LaplaceQuery, evaluate
from .liquidation import ImpactFunction, LiquidationProblem, proceeds_report
from .model import BoundarySpec, DiffusionModel, validate_model
from .montecarlo import convergence_study, pathwise_comparison
from .phi_solver import log_derivative
from .simulator import DEFAULT_JUMP_CAP, SchemeConfig, simulate_reflected_path

COMMANDS = ("phi", "laplace", "simulate", "converge", "compare", "liquidate")
THREADS_ENV = "ELASTIC_REFLECT_THREADS"

# fixed CSV columns per subcommand
COLUMNS = {
    "phi": ["lam", "x", "u"],
    "laplace": ["lam", "ell", "eps", "route", "value", "quadrature_error"],
    "simulate": ["t", "X", "L"],
    "converge": ["eps", "mc_mean", "mc_se", "analytic_discrete", "analytic_limit", "gap",
                 "ks_to_next", "ucp_sup_median", "max_jumps_per_window"],
    "compare": ["upper_violations", "lower_violations", "violation_count", "n_paths", "n_steps"],
    "liquidate": ["eps", "continuous", "discrete", "gap", "gap_over_eps"],
}


class ConfigError(ValidationError):
    """Invalid configuration; the message starts with the field path."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


# -- config access ---------------------------------------------------------

_MISSING = object()


def _get(cfg, path, default=_MISSING):
    node = cfg
    for key in path.split("."):
        if not isinstance(node, dict) or key not in node:
            if default is _MISSING:
                raise ConfigError(path, "required field is missing")
            return default
        node = node[key]
    return node


def _number(cfg, path, default=_MISSING, *, positive=False, nonnegative=False,
            allow_none=False):
    value = _get(cfg, path, default)
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(path, f"must be finite, got {value}")
    if positive and not value > 0:
        raise ConfigError(path, f"must be positive, got {value}")
    if nonnegative and not value >= 0:
        raise ConfigError(path, f"must be non-negative, got {value}")
    return value


def _integer(cfg, path, default=_MISSING, *, minimum=None):
    value = _get(cfg, path, default)
    if isinstance(value, float) and value.is_integer():
        value = int(value)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(path, f"must be >= {minimum}, got {value}")
    return value


def _numbers(cfg, path, default=_MISSING, **kw):
    """A scalar or a list of numbers, returned as a list."""
    value = _get(cfg, path, default)
    items = value if isinstance(value, list) else [value]
    if not items:
        raise ConfigError(path, "empty list")
    out = []
    for i, v in enumerate(items):
        item_path = f"{path}[{i}]" if isinstance(value, list) else path
        try:
            out.append(_number({"v": v}, "v", **kw))
        except ConfigError as exc:
            raise ConfigError(item_path, str(exc).split(": ", 1)[1]) from None
    return out


def _choice(cfg, path, options, default=_MISSING):
    value = _get(cfg, path, default)
    if value not in options:
        raise ConfigError(path, f"expected one of {list(options)}, got {value!r}")
    return value


def parse_model(cfg):
    family = _choice(cfg, "model.drift.family", ("constant", "affine"))
    _choice(cfg, "model.vol.family", ("constant",), "constant")
    sigma0 = _number(cfg, "model.vol.sigma0", positive=True)
    lo = _number(cfg, "model.domain.lo", -50.0)
    hi = _number(cfg, "model.domain.hi", 50.0)
    if not lo < hi:
        raise ConfigError("model.domain", f"lo={lo} must be below hi={hi}")
    if family == "constant":
        raw = DiffusionModel.brownian(sigma=sigma0, mu=_number(cfg, "model.drift.mu", 0.0),
                                      domain=(lo, hi))
    else:
        raw = DiffusionModel.ornstein_uhlenbeck(_number(cfg, "model.drift.beta"), sigma=sigma0,
                                                alpha=_number(cfg, "model.drift.alpha", 0.0),
                                                domain=(lo, hi))
    try:
        return validate_model(raw)
    except ValidationError as exc:
        raise ConfigError("model", str(exc)) from exc


def parse_boundary(cfg):
    family = _choice(cfg, "boundary.family", ("constant", "linear", "sqrt", "power"))
    try:
        if family == "constant":
            return BoundarySpec.constant(_number(cfg, "boundary.a"))
        c0 = _number(cfg, "boundary.c0")
        c1 = _number(cfg, "boundary.c1", nonnegative=True)
        if family == "linear":
            return BoundarySpec.linear(c0, c1)
        if family == "sqrt":
            return BoundarySpec.sqrt(c0, c1)
        return BoundarySpec.power(c0, c1, _number(cfg, "boundary.p", positive=True))
    except ConfigError:
        raise
    except ValidationError as exc:
        raise ConfigError("boundary", str(exc)) from exc


def parse_impact(cfg):
    family = _choice(cfg, "query.impact.family", ("constant", "exponential", "linear"),
                     "constant")
    if family == "constant":
        return ImpactFunction("constant", c=_number(cfg, "query.impact.c", 1.0))
    if family == "exponential":
        return ImpactFunction("exponential", eta=_number(cfg, "query.impact.eta"))
    return ImpactFunction("linear", p=_number(cfg, "query.impact.p"),
                          q=_number(cfg, "query.impact.q"))


def _x_grid(cfg):
    value = _get(cfg, "query.x")
    if isinstance(value, dict):
        lo = _number(cfg, "query.x.lo")
        hi = _number(cfg, "query.x.hi")
        n = _integer(cfg, "query.x.n", minimum=1)
        return list(np.linspace(lo, hi, n))
    return _numbers(cfg, "query.x")


def apply_override(cfg, assignment):
    """Apply one ``a.b.c=value`` override in place."""
    if "=" not in assignment:
        raise ConfigError(assignment, "override must look like a.b.c=value")
    path, raw = assignment.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    keys = path.strip().split(".")
    node = cfg
    for key in keys[:-1]:
        child = node.get(key)
        if not isinstance(child, dict):
            child = node[key] = {}
        node = child
    node[keys[-1]] = value
    return cfg


# -- formatting ------------------------------------------------------------

def fmt(value):
    """CSV cell: floats with 17 significant digits, ``None`` as empty."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def to_csv(columns, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    return obj


def to_json(obj):
    return json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n"


# -- commands --------------------------------------------------------------
# Each returns (rows, document); rows feed the CSV and document the JSON.

def cmd_phi(cfg, threads):
    model = parse_model(cfg)
    lams = _numbers(cfg, "query.lam", positive=True)
    xs = _x_grid(cfg)
    rows = []
    for lam in lams:
        u = np.atleast_1d(log_derivative(model, lam, np.asarray(xs, dtype=float)))
        rows.extend({"lam": lam, "x": float(x), "u": float(v)} for x, v in zip(xs, u))
    return rows, {"command": "phi", "rows": rows}


def cmd_laplace(cfg, threads):
    model = parse_model(cfg)
    g = parse_boundary(cfg)
    lams = _numbers(cfg, "query.lam", positive=True)
    ells = _numbers(cfg, "query.ell", nonnegative=True)
    eps_values = _numbers(cfg, "query.eps", None, positive=True, allow_none=True)
    routes = _get(cfg, "query.route", "integral")
    routes = routes if isinstance(routes, list) else [routes]
    for r in routes:
        if r not in ROUTES:
            raise ConfigError("query.route", f"expected one of {list(ROUTES)}, got {r!r}")
    rows = []
    for lam in lams:
        for ell in ells:
            for eps in eps_values:
                for route in routes:
                    res = evaluate(LaplaceQuery(model, g, lam, ell, eps), route)
                    rows.append({"lam": lam, "ell": ell, "eps": eps, "route": route,
                                 "value": res.value, "quadrature_error": res.quadrature_error})
    return rows, {"command": "laplace", "rows": rows}


def _scheme(cfg, model, eps_path="scheme.eps"):
    return SchemeConfig(
        eps=_number(cfg, eps_path, positive=True),
        T=_number(cfg, "scheme.T", positive=True),
        h=_number(cfg, "scheme.h", None, positive=True, allow_none=True),
        bridge_correction=bool(_get(cfg, "scheme.bridge_correction", True)),
        seed=_integer(cfg, "mc.seed", 0, minimum=0),
        path_index=_integer(cfg, "scheme.path_index", 0, minimum=0),
        jump_cap=_integer(cfg, "scheme.jump_cap", DEFAULT_JUMP_CAP, minimum=1),
    )


def cmd_simulate(cfg, threads):
    model = parse_model(cfg)
    g = parse_boundary(cfg)
    sc = _scheme(cfg, model)
    path = simulate_reflected_path(model, g, sc)
    rows = [{"t": float(t), "X": float(x), "L": float(l)}
            for t, x, l in zip(path.times, path.x_values, path.l_values)]
    ledger = {"eps": sc.eps, "seed": sc.seed, "path_index": sc.path_index,
              "aborted": path.aborted, "abort_reason": path.abort_reason,
              "jumps": path.jump_ledger()}
    return rows, {"command": "simulate", "path": rows, "ledger": ledger}


def cmd_converge(cfg, threads):
    model = parse_model(cfg)
    g = parse_boundary(cfg)
    report = convergence_study(
        model, g,
        _number(cfg, "query.lam", positive=True),
        _number(cfg, "query.ell", positive=True),
        _numbers(cfg, "query.eps", positive=True),
        _integer(cfg, "mc.n_paths", minimum=1000),
        _integer(cfg, "mc.seed", 0, minimum=0),
        ucp_paths=_get(cfg, "mc.ucp_paths", None) and _integer(cfg, "mc.ucp_paths", minimum=1),
        T=_number(cfg, "scheme.T", 1.0, positive=True),
        h=_number(cfg, "scheme.h", None, positive=True, allow_none=True),
        window=_number(cfg, "scheme.window", 0.1, positive=True),
        threads=threads,
    )
    doc = report.to_dict()
    doc["command"] = "converge"
    return doc["rungs"], doc


def cmd_compare(cfg, threads):
    model = parse_model(cfg)
    g = parse_boundary(cfg)
    res = pathwise_comparison(
        model, g,
        _number(cfg, "scheme.eps", positive=True),
        _number(cfg, "scheme.h", positive=True),
        _number(cfg, "scheme.T", positive=True),
        _integer(cfg, "mc.n_paths", minimum=1),
        _integer(cfg, "mc.seed", 0, minimum=0),
        threads=threads,
    )
    row = {"upper_violations": res.upper_violations, "lower_violations": res.lower_violations,
           "violation_count": res.violation_count, "n_paths": res.n_paths,
           "n_steps": res.n_steps}
    return [row], {"command": "compare", **row}


def cmd_liquidate(cfg, threads):
    model = parse_model(cfg)
    g = parse_boundary(cfg)
    problem = LiquidationProblem(model, parse_impact(cfg),
                                 _number(cfg, "query.delta", positive=True),
                                 _number(cfg, "query.theta", nonnegative=True), g)
    report = proceeds_report(problem, _numbers(cfg, "query.eps", positive=True))
    rows = [{"continuous": report["continuous"], **r} for r in report["discrete"]]
    doc = {"command": "liquidate", "continuous": report["continuous"],
           "discrete": report["discrete"],
           "gaps": [r["gap"] for r in report["discrete"]],
           "gap_over_eps": [r["gap_over_eps"] for r in report["discrete"]]}
    return rows, doc


HANDLERS = {"phi": cmd_phi, "laplace": cmd_laplace, "simulate": cmd_simulate,
            "converge": cmd_converge, "compare": cmd_compare, "liquidate": cmd_liquidate}


def _write(path, text):
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def emit(command, rows, doc, fmt_name, path):
    """Write the primary output; ``simulate`` also writes a jump ledger."""
    if fmt_name == "json":
        _write(path, to_json(doc))
        return
    _write(path, to_csv(COLUMNS[command], rows))
    if command == "simulate":
        ledger = to_json(doc["ledger"])
        if path is None:
            sys.stderr.write(ledger)
        else:
            p = Path(path)
            _write(str(p.with_name(p.stem + ".jumps.json")), ledger)


def run(command, config, threads=1, out=None):
    """Execute ``command`` on a parsed configuration and return the exit code."""
    try:
        if command not in HANDLERS:
            raise ConfigError("command", f"unknown command {command!r}")
        cfg = copy.deepcopy(config)
        if not isinstance(cfg, dict):
            raise ConfigError("<root>", "configuration must be a JSON object")
        fmt_name = _choice(cfg, "output.format", ("csv", "json"), "csv")
        path = out if out is not None else _get(cfg, "output.path", None)
        try:
            rows, doc = HANDLERS[command](cfg, threads)
        except ConfigError:
            raise
        except ElasticReflectError as exc:
            raise type(exc)(f"{command}: {type(exc).__name__}: {exc}") from exc
        emit(command, rows, doc, fmt_name, path)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    return 0


def _threads(arg):
    if arg is not None:
        return arg
    env = os.environ.get(THREADS_ENV)
    if env is None or env == "":
        return 1
    try:
        return int(env)
    except ValueError:
        raise ConfigError(THREADS_ENV, f"expected an integer, got {env!r}") from None


def build_parser():
    parser = argparse.ArgumentParser(prog="elastic-reflect",
                                     description="Diffusions reflected at an elastic boundary.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON configuration file")
    parser.add_argument("--set", action="append", default=[], metavar="a.b.c=value",
                        help="override one configuration field (repeatable)")
    parser.add_argument("--threads", type=int, default=None,
                        help=f"worker threads (default ${THREADS_ENV} or 1)")
    parser.add_argument("--out", default=None, help="output path (overrides output.path)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        with open(args.config, encoding="utf-8") as fh:
            config = json.load(fh)
    except OSError as exc:
        print(f"i/o error: cannot read config: {exc}", file=sys.stderr)
        return 3
    except json.JSONDecodeError as exc:
        print(f"error: config: invalid JSON: {exc}", file=sys.stderr)
        return 1
    try:
        if not isinstance(config, dict):
            raise ConfigError("<root>", "configuration must be a JSON object")
        for assignment in args.set:
            apply_override(config, assignment)
        threads = _threads(args.threads)
        if threads < 1:
            raise ConfigError("--threads", f"must be >= 1, got {threads}")
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return run(args.command, config, threads=threads, out=args.out)


if __name__ == "__main__":
    sys.exit(main())
