"""Command-line front end.

Subcommands
-----------
plan   print the degree / noise / sample budget for a set of constants
run    sample, fit and solve; write a result JSON and a minimizer CSV
bench  run a benchmark suite and print (or write) its capture table

Exit codes: 0 success, 2 infeasible plan, 3 non-isolated critical set,
4 budget or round limit exhausted, 64 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
import warnings
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from . import bench as bench_mod
from . import planner
from .driver import RunResult, capture_stats, minimizers_adaptive, minimizers_regular
from .errors import (BudgetExceeded, ChebminError, ConfigError, FailNonFinite, MaxRoundsExceeded,
                     PlanInfeasible, UnknownBenchmark)
from .oracle import BoxDomain, NoiseModel, Oracle, SubprocessOracle, make_benchmark
from .psolve import FAIL_NON_FINITE

EXIT_OK = 0
EXIT_PLAN = 2
EXIT_NONFINITE = 3
EXIT_BUDGET = 4
EXIT_USAGE = 64

# reference sets and capture thresholds (original coordinates) per benchmark
REFERENCE_THRESHOLDS = {
    "dejong5": 0.5,
    "deuflhard2d": 1e-3,
    "deuflhard4d": 0.1,
    "holder_table2": 0.2,
    "trefethen": 1e-2,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit with 2, which means "infeasible plan" here
        raise UsageError(message)


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def _real(lo: float = -math.inf, hi: float = math.inf, lo_open=True, hi_open=True):
    def check(key, v):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ConfigError(f"{key}: expected a finite number, got {v!r}")
        if (v <= lo if lo_open else v < lo) or (v >= hi if hi_open else v > hi):
            raise ConfigError(f"{key}: {v} outside its allowed range")
        return float(v)
    return check


def _int(lo: int = 0):
    def check(key, v):
        if isinstance(v, bool) or not isinstance(v, int) or v < lo:
            raise ConfigError(f"{key}: expected an integer >= {lo}, got {v!r}")
        return int(v)
    return check


def _choice(*options):
    def check(key, v):
        if v not in options:
            raise ConfigError(f"{key}: expected one of {', '.join(options)}, got {v!r}")
        return v
    return check


def _text(key, v):
    if not isinstance(v, str) or not v:
        raise ConfigError(f"{key}: expected a non-empty string")
    return v


def _command(key, v):
    if isinstance(v, str) and v:
        return v
    if isinstance(v, list) and v and all(isinstance(a, str) for a in v):
        return v
    raise ConfigError(f"{key}: expected a command string or argument list")


def _flag(key, v):
    if not isinstance(v, bool):
        raise ConfigError(f"{key}: expected true or false")
    return v


def _domain(key, v):
    try:
        return BoxDomain.parse(v).as_list()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key}: {exc}") from None


CONFIG_FIELDS = {
    "benchmark": _text,
    "expression": _text,
    "command": _command,
    "dim": _int(1),
    "domain": _domain,
    "mode": _choice("regular", "adaptive"),
    "eps": _real(0.0, 1.0),
    "alpha": _real(0.0, 1.0),
    "delta": _real(0.0, 1.0),
    "lam": _real(0.0),
    "A1": _real(0.0),
    "A2": _real(0.0),
    "kappa": _real(0.0),
    "C_nm": _real(0.0),
    "m": _real(0.0),
    "tol": _real(0.0, 1.0),
    "max_rounds": _int(1),
    "max_degree": _int(1),
    "degree": _int(1),
    "samples": _int(1),
    "sampling": _choice("grid", "iid"),
    "seed": _int(0),
    "split": _int(1),
    "solve_margin": _real(0.0, 1.0, lo_open=False),
    "polish": _flag,
    "noise": _choice("none", "uniform"),
    "noise_seed": _int(0),
    "eta_bar": _real(0.0, lo_open=False),
    "budget": _int(1),
    "threshold": _real(0.0),
    "out": _text,
    "threads": _int(1),
}

DEFAULTS: Dict[str, Any] = {
    "mode": "regular",
    "eps": 1e-3,
    "alpha": 0.05,
    "delta": 0.5,
    "seed": 0,
    "split": 1,
    "solve_margin": 0.0,
    "polish": False,
    "noise": "none",
    "noise_seed": 0,
    "budget": 10 ** 7,
    "max_rounds": 20,
    "max_degree": 30,
    "out": "chebmin-out",
    "threads": 1,
}


def validate_config(raw: Any) -> Dict[str, Any]:
    """Check types and ranges of a configuration mapping; unknown keys are errors."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = sorted(set(raw) - set(CONFIG_FIELDS))
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
    cfg = dict(DEFAULTS)
    for key, value in raw.items():
        if value is None:
            continue
        cfg[key] = CONFIG_FIELDS[key](key, value)
    sources = [k for k in ("benchmark", "expression", "command") if k in cfg]
    if len(sources) > 1:
        raise ConfigError("give only one of benchmark, expression, command")
    if "command" in cfg and "domain" not in cfg:
        raise ConfigError("a subprocess oracle needs a domain")
    return cfg


def load_config(path: Optional[str]) -> Dict[str, Any]:
    if path is None:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: configuration must be a JSON object")
    return data


_FLAG_KEYS = ("mode", "eps", "alpha", "delta", "degree", "samples", "seed", "split", "out",
              "threads", "benchmark", "expression", "dim", "lam", "A1", "A2", "kappa", "C_nm",
              "m", "tol", "sampling", "solve_margin", "threshold", "budget", "noise", "eta_bar")


def merged_config(args: argparse.Namespace) -> Dict[str, Any]:
    raw = load_config(args.config)
    for key in _FLAG_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            raw[key] = v
    if getattr(args, "domain", None) is not None:
        try:
            raw["domain"] = json.loads(args.domain)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--domain: {exc.msg}") from None
    if getattr(args, "command", None) is not None:
        raw["command"] = args.command
    if getattr(args, "polish", None) is not None:
        raw["polish"] = args.polish
    return validate_config(raw)


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def atomic_write(path: Path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def minimizers_csv(result: RunResult) -> str:
    """One row per reported minimizer, in original coordinates."""
    n = result.plan_used.n
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = ["index"] + [f"x{i + 1}" for i in range(n)] + ["boundary"]
    if result.polished is not None:
        header += [f"polished_x{i + 1}" for i in range(n)] + ["polish_grad_inf"]
    w.writerow(header)
    for i, x in enumerate(result.minimizers):
        row = [i] + [f"{v:.17g}" for v in x] + [int(result.eps_ball_on_boundary[i])]
        if result.polished is not None:
            row += [f"{v:.17g}" for v in result.polished[i]] + [f"{result.polish_gradients[i]:.6g}"]
        w.writerow(row)
    return buf.getvalue()


def _warn(msg: str) -> None:
    print(f"chebmin: warning: {msg}", file=sys.stderr)


def _err(msg: str) -> None:
    print(f"chebmin: error: {msg}", file=sys.stderr)


# ---------------------------------------------------------------------------
# oracle and plan construction
# ---------------------------------------------------------------------------

def build_oracle(cfg: Dict[str, Any]) -> Oracle:
    noise = NoiseModel(cfg["noise"], cfg["noise_seed"]) if cfg["noise"] != "none" else None
    if "command" in cfg:
        if noise is not None:
            raise ConfigError("noise injection is not available for subprocess oracles")
        return SubprocessOracle(cfg["command"], BoxDomain.parse(cfg["domain"]))
    if "expression" in cfg:
        return make_benchmark("custom", cfg.get("domain"), cfg["expression"], cfg.get("dim"), noise)
    if "benchmark" in cfg:
        return make_benchmark(cfg["benchmark"], cfg.get("domain"), noise=noise)
    raise ConfigError("no oracle given: set benchmark, expression or command")


def _constants(cfg: Dict[str, Any], n: int) -> tuple:
    m = cfg.get("m", planner.min_smoothness(n))
    if "A1" in cfg or "A2" in cfg:
        if not ("A1" in cfg and "A2" in cfg):
            raise ConfigError("give both A1 and A2")
        A1, A2 = cfg["A1"], cfg["A2"]
    elif "kappa" in cfg and "C_nm" in cfg:
        A1, A2 = planner.default_constants(n, m, cfg["kappa"], cfg["delta"], cfg["C_nm"])
    else:
        raise ConfigError("planning needs A1 and A2, or kappa and C_nm")
    return m, A1, A2, cfg.get("lam", 1.0)


def build_plan(cfg: Dict[str, Any], n: int) -> planner.Plan:
    if "degree" in cfg:
        return planner.forced_plan(n, cfg["degree"], cfg["eps"], cfg.get("eta_bar", 0.0),
                                   cfg.get("samples"), cfg["alpha"], cfg["delta"])
    m, A1, A2, lam = _constants(cfg, n)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        p = planner.plan(n, m, cfg["eps"], cfg["alpha"], cfg["delta"], lam, A1, A2)
    for w in caught:
        _warn(str(w.message))
    return p


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_plan(args: argparse.Namespace) -> int:
    cfg = merged_config(args)
    n = args.n if args.n is not None else cfg.get("dim")
    if n is None:
        raise ConfigError("plan needs the dimension (--n or dim)")
    try:
        p = build_plan({k: v for k, v in cfg.items() if k != "degree"}, n)
    except PlanInfeasible as exc:
        _err(f"infeasible plan ({exc.condition} inequality): {exc}")
        return EXIT_PLAN
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    text = _dumps(p.to_dict())
    if args.out_file:
        atomic_write(Path(args.out_file), text)
    sys.stdout.write(text)
    return EXIT_OK


def _capture_table(cfg: Dict[str, Any], result: RunResult) -> Optional[str]:
    name = cfg.get("benchmark")
    if name not in REFERENCE_THRESHOLDS or "domain" in cfg:
        return None
    refs = bench_mod.load_references()[name]
    tau = cfg.get("threshold", REFERENCE_THRESHOLDS[name])
    ref = np.array(refs["minimizers"])
    degree = result.fit.poly.degree if result.fit else result.plan_used.d
    row = bench_mod.minima_row(result, ref, degree, tau, name)
    if result.polished is not None and len(result.polished):
        ps = capture_stats(result.polished, ref, tau)
        row.polished_max_err = ps.max
        row.polish_grad_max = float(np.max(result.polish_gradients))
    return bench_mod.rows_to_csv([row])


def _write_outputs(cfg: Dict[str, Any], result: RunResult) -> None:
    out = Path(cfg["out"])
    doc = result.to_dict()
    doc["config"] = {k: v for k, v in sorted(cfg.items()) if k not in ("out", "threads")}
    atomic_write(out / "result.json", _dumps(doc))
    atomic_write(out / "minimizers.csv", minimizers_csv(result))
    table = _capture_table(cfg, result)
    if table is not None:
        atomic_write(out / "capture.csv", table)


def cmd_run(args: argparse.Namespace) -> int:
    cfg = merged_config(args)
    o = build_oracle(cfg)
    try:
        return _run(cfg, o)
    finally:
        if isinstance(o, SubprocessOracle):
            o.close()


def _run(cfg: Dict[str, Any], o: Oracle) -> int:
    result: Optional[RunResult] = None
    code = EXIT_OK
    try:
        if cfg["mode"] == "adaptive":
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                result = minimizers_adaptive(
                    o, cfg["eps"], cfg["alpha"], cfg.get("tol"), cfg["max_rounds"], cfg["delta"],
                    sampling=cfg.get("sampling", "iid"), seed=cfg["seed"],
                    max_degree=cfg["max_degree"], samples=cfg.get("samples"),
                    budget=cfg["budget"], polish_points=cfg["polish"])
            for w in caught:
                _warn(str(w.message))
            if result.status == FAIL_NON_FINITE:
                code = EXIT_NONFINITE
        else:
            p = build_plan(cfg, o.dim)
            result = minimizers_regular(
                o, p, cfg.get("sampling", "grid"), cfg["seed"], cfg.get("samples"), cfg["split"],
                cfg["polish"], cfg["budget"], solve_margin=cfg["solve_margin"])
    except PlanInfeasible as exc:
        _err(f"infeasible plan ({exc.condition} inequality): {exc}")
        return EXIT_PLAN
    except FailNonFinite as exc:
        _err(f"FailNonFinite: {exc}")
        result = getattr(exc, "result", None)
        code = EXIT_NONFINITE
    except (BudgetExceeded, MaxRoundsExceeded) as exc:
        _err(f"{type(exc).__name__}: {exc}")
        result = getattr(exc, "result", None)
        code = EXIT_BUDGET
    if result is not None:
        _write_outputs(cfg, result)
    return code


def cmd_bench(args: argparse.Namespace) -> int:
    degrees = None
    if args.degrees:
        try:
            degrees = [int(v) for v in args.degrees.split(",") if v.strip()]
        except ValueError:
            raise ConfigError("--degrees: expected a comma-separated list of integers") from None
    kwargs = {}
    if args.threshold is not None:
        kwargs["threshold"] = args.threshold
    try:
        rows = bench_mod.run_suite(args.suite, degrees, **kwargs)
    except UnknownBenchmark as exc:
        raise ConfigError(str(exc.args[0])) from None
    except TypeError:
        raise ConfigError(f"suite {args.suite!r} does not take these options") from None
    text = bench_mod.rows_to_csv(rows)
    if args.out:
        atomic_write(Path(args.out), text)
    sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON configuration file")
    p.add_argument("--eps", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--lam", type=float)
    p.add_argument("--A1", type=float)
    p.add_argument("--A2", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--C-nm", dest="C_nm", type=float)
    p.add_argument("--m", type=float)
    p.add_argument("--threads", type=int, help="worker cap (computation is single-threaded)")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="chebmin", description="Enumerate local minimizers via Chebyshev fits.")
    sub = ap.add_subparsers(dest="command_name", parser_class=_Parser)

    pp = sub.add_parser("plan", help="print the parameter plan as JSON")
    _common(pp)
    pp.add_argument("--n", type=int, help="dimension")
    pp.add_argument("--out", dest="out_file", help="also write the plan to this file")

    pr = sub.add_parser("run", help="run the regular or adaptive pipeline")
    _common(pr)
    pr.add_argument("--benchmark")
    pr.add_argument("--expression")
    pr.add_argument("--command", help="subprocess oracle command line")
    pr.add_argument("--dim", type=int)
    pr.add_argument("--domain", help='JSON list of [lo, hi] pairs, e.g. "[[-1,1],[-1,1]]"')
    pr.add_argument("--mode", choices=("regular", "adaptive"))
    pr.add_argument("--degree", type=int, help="force the degree, bypassing the planner")
    pr.add_argument("--samples", type=int)
    pr.add_argument("--sampling", choices=("grid", "iid"))
    pr.add_argument("--seed", type=int)
    pr.add_argument("--split", type=int, help="pieces per axis")
    pr.add_argument("--solve-margin", dest="solve_margin", type=float)
    pr.add_argument("--polish", action=argparse.BooleanOptionalAction, default=None)
    pr.add_argument("--tol", type=float)
    pr.add_argument("--noise", choices=("none", "uniform"))
    pr.add_argument("--eta-bar", dest="eta_bar", type=float)
    pr.add_argument("--budget", type=int)
    pr.add_argument("--threshold", type=float, help="capture threshold for the capture table")
    pr.add_argument("--out", help="output directory")

    pb = sub.add_parser("bench", help="run a benchmark suite")
    pb.add_argument("suite")
    pb.add_argument("--degrees", help="comma-separated degrees overriding the suite default")
    pb.add_argument("--threshold", type=float)
    pb.add_argument("--out", help="write the CSV table to this file")
    pb.add_argument("--threads", type=int)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
        if args.command_name is None:
            raise UsageError("a subcommand is required (plan, run, bench)")
        handler = {"plan": cmd_plan, "run": cmd_run, "bench": cmd_bench}[args.command_name]
        return handler(args)
    except UsageError as exc:
        ap.print_usage(sys.stderr)
        _err(str(exc))
        return EXIT_USAGE
    except (ConfigError, UnknownBenchmark) as exc:
        _err(str(exc.args[0]) if exc.args else type(exc).__name__)
        return EXIT_USAGE
    except ChebminError as exc:
        _err(f"{type(exc).__name__}: {exc}")
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
