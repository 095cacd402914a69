"""Command-line front end.

    infospectrum <command> --config problem.json [options]

Exit status: 0 success, 2 configuration error, 3 model or precondition
error, 4 resource budget exceeded. Errors are also reported as one JSON
object on standard error.
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
from dataclasses import dataclass

import jsonschema
import numpy as np

from .errors import InfospectrumError, ResourceError
from .exponents import exponent, sweep
from .ldp import problem_eta
from .models import (
    CountingMeasure,
    GaussianSource,
    IidSource,
    MarkovSource,
    MixedSource,
    StepSpectrumModel,
    TestingProblem,
    UnifilarSource,
    WeightMeasure,
    check_theorem4_assumptions,
)
from .exponents import coding_problem, sigma
from .oracle import best_fixed_length_code, finite_n_exponents, mc_spectrum, np_tradeoff

COMMANDS = ("exponent", "sweep", "oracle-np", "oracle-code", "spectrum", "check-assumptions", "sigma")
EXPONENT_COLUMNS = ("r", "kind", "value", "minimizing_R", "attainment", "method")

_VEC = {"type": "array", "items": {"type": "number"}, "minItems": 1}
_MAT = {"type": "array", "items": _VEC, "minItems": 1}
_INT_MAT = {"type": "array", "items": {"type": "array", "items": {"type": "integer"}}, "minItems": 1}


def _kind(name, props, required=()):
    return {
        "type": "object",
        "properties": {"type": {"const": name}, **props},
        "required": ["type", *required],
        "additionalProperties": False,
    }


_IID = _kind("iid", {"p": _VEC}, ["p"])
_MARKOV = _kind("markov", {"P": _MAT, "initial": _VEC}, ["P"])
_GAUSS = _kind("gaussian", {"mean": {"type": "number"}, "std": {"type": "number", "exclusiveMinimum": 0}},
               ["mean"])

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "version": {"const": 1},
        "null": {
            "oneOf": [
                _IID,
                _MARKOV,
                _kind("unifilar", {"emission": _MAT, "next_state": _INT_MAT,
                                   "initial_state": {"type": "integer", "minimum": 0}},
                      ["emission", "next_state"]),
                _GAUSS,
                _kind("mixed", {"weights": _VEC, "components": {"type": "array",
                                                                 "items": {"oneOf": [_IID, _MARKOV]},
                                                                 "minItems": 2, "maxItems": 2}},
                      ["weights", "components"]),
                _kind("step", {"alpha": {"type": "number"}, "log_base": {"type": "number"}}, ["alpha"]),
            ]
        },
        "alternative": {
            "oneOf": [
                _IID,
                _MARKOV,
                _GAUSS,
                _kind("unifilar", {"emission": _MAT}, ["emission"]),
                _kind("counting", {}),
                _kind("weights", {"w": _VEC}, ["w"]),
            ]
        },
        "log_base": {"enum": ["e", "2"]},
    },
    "required": ["version", "null"],
    "additionalProperties": False,
}

_EXIT = {"ok": 0, "config": 2, "model": 3, "resource": 4}


class ConfigError(Exception):
    """Malformed configuration or command line."""


def _parse_base(text):
    return math.e if text in (None, "e") else 2.0


def _null_model(cfg):
    t = cfg["type"]
    if t == "iid":
        return IidSource(cfg["p"])
    if t == "markov":
        return MarkovSource(cfg["P"], cfg.get("initial"))
    if t == "unifilar":
        return UnifilarSource(cfg["emission"], cfg["next_state"], cfg.get("initial_state", 0))
    if t == "gaussian":
        return GaussianSource(cfg["mean"], cfg.get("std", 1.0))
    if t == "mixed":
        return MixedSource([_null_model(c) for c in cfg["components"]], cfg["weights"])
    return StepSpectrumModel(cfg["alpha"], cfg.get("log_base", 2.0))


def _alternative(cfg, null):
    t = cfg["type"]
    if t == "iid":
        return IidSource(cfg["p"])
    if t == "markov":
        return MarkovSource(cfg["P"])
    if t == "gaussian":
        return GaussianSource(cfg["mean"], cfg.get("std", 1.0))
    if t == "unifilar":
        if not isinstance(null, UnifilarSource):
            raise ConfigError("a unifilar alternative needs a unifilar null")
        return UnifilarSource(cfg["emission"], null.next_state, null.initial_state)
    if t == "counting":
        size = getattr(null, "alphabet_size", None)
        if size is None:
            raise ConfigError("the counting measure needs a finite-alphabet null")
        return CountingMeasure(size)
    return WeightMeasure(cfg["w"])


def load_problem(cfg, log_base=None):
    """Validate a config dict and build the TestingProblem it describes."""
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as err:
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {err.message}") from None
    null = _null_model(cfg["null"])
    if "alternative" in cfg:
        alt = _alternative(cfg["alternative"], null)
    elif isinstance(null, StepSpectrumModel):
        alt = None
    else:
        raise ConfigError("config needs an 'alternative' entry")
    base = _parse_base(log_base if log_base is not None else cfg.get("log_base"))
    return TestingProblem(null, alt, base)


@dataclass(frozen=True)
class RunConfig:
    problem: TestingProblem
    command: str
    kind: str = "error"
    r: float = None
    r_grid: tuple = None
    n: int = None
    samples: int = None
    seed: int = 0
    out: str = None
    format: str = "csv"


# ---------------------------------------------------------------------------
# Commands: each returns (columns, rows, exit status)
# ---------------------------------------------------------------------------


def _require(value, flag):
    if value is None:
        raise ConfigError(f"{flag} is required for this command")
    return value


def _grid(cfg):
    if cfg.r_grid is not None:
        return list(cfg.r_grid)
    return [_require(cfg.r, "--r or --r-min/--r-max/--steps")]


def _exponent_row(r, kind, res):
    return {"r": r, "kind": kind, "value": res.value, "minimizing_R": res.minimizing_R,
            "attainment": res.attainment, "method": res.method}


def _cmd_exponent(cfg):
    r = _require(cfg.r, "--r")
    res = exponent(cfg.problem, cfg.kind, r)
    return EXPONENT_COLUMNS, [_exponent_row(r, cfg.kind, res)], 0


def _cmd_sweep(cfg):
    curve = sweep(cfg.problem, cfg.kind, _require(cfg.r_grid, "--r-min/--r-max/--steps"))
    rows = [_exponent_row(r, cfg.kind, res) for r, res in curve.points]
    return EXPONENT_COLUMNS, rows, 0


def _cmd_sigma(cfg):
    scale = math.log(cfg.problem.log_base)
    eta = problem_eta(coding_problem(cfg.problem.null))
    grid = _grid(cfg)
    vals = sigma(eta, np.array(grid) * scale) / scale
    return ("R", "sigma"), [{"R": R, "sigma": float(v)} for R, v in zip(grid, vals)], 0


def _cmd_oracle_np(cfg):
    n = _require(cfg.n, "--n")
    if cfg.r is None and cfg.r_grid is None:
        t = np_tradeoff(cfg.problem, n)
        rows = [{"mu": float(m), "lambda": float(l)} for m, l in t.frontier]
        return ("mu", "lambda"), rows, 0
    cols = ("n", "r", "lambda_n", "mu_n", "error_exponent", "correct_exponent", "kappa_n")
    rows = []
    for r in _grid(cfg):
        f = finite_n_exponents(cfg.problem, n, r)
        rows.append({"n": n, "r": r, "lambda_n": f.lambda_n, "mu_n": f.mu_n,
                     "error_exponent": f.error_exponent, "correct_exponent": f.correct_exponent,
                     "kappa_n": f.kappa_n})
    return cols, rows, 0


def _cmd_oracle_code(cfg):
    n = _require(cfg.n, "--n")
    base = cfg.problem.log_base
    size = cfg.problem.null.alphabet_size
    rows = []
    for rate in _grid(cfg):
        m = min(math.ceil(base ** (n * rate) - 1e-9), size**n)
        code = best_fixed_length_code(cfg.problem.null, n, m)
        exp_ = math.inf if code.epsilon <= 0 else -math.log(code.epsilon) / (n * math.log(base))
        rows.append({"n": n, "rate": rate, "M": m, "epsilon": code.epsilon, "exponent": exp_})
    return ("n", "rate", "M", "epsilon", "exponent"), rows, 0


def _cmd_spectrum(cfg):
    n = _require(cfg.n, "--n")
    samples = _require(cfg.samples, "--samples")
    est = mc_spectrum(cfg.problem, n, samples, cfg.seed)
    grid = np.array(_grid(cfg))
    lo, hi = est.cdf_band(grid)
    cdf, eta = est.cdf(grid), est.eta_hat(grid)
    rows = [{"R": float(R), "cdf": float(c), "cdf_lower": float(a), "cdf_upper": float(b),
             "eta_hat": float(e)} for R, c, a, b, e in zip(grid, cdf, lo, hi, eta)]
    return ("R", "cdf", "cdf_lower", "cdf_upper", "eta_hat"), rows, 0


def _cmd_check(cfg):
    rep = check_theorem4_assumptions(cfg.problem)
    witness = rep.witness
    if isinstance(witness, tuple):
        witness = " ".join(str(w) for w in witness)
    row = {"passed": rep.passed, "reason": rep.reason, "witness": witness}
    return ("passed", "reason", "witness"), [row], 0 if rep.passed else 3


_COMMANDS = {
    "exponent": _cmd_exponent,
    "sweep": _cmd_sweep,
    "sigma": _cmd_sigma,
    "oracle-np": _cmd_oracle_np,
    "oracle-code": _cmd_oracle_code,
    "spectrum": _cmd_spectrum,
    "check-assumptions": _cmd_check,
}


# ---------------------------------------------------------------------------
# Rendering and output
# ---------------------------------------------------------------------------


def _csv_cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "" if math.isnan(v) else repr(v)
    return str(v)


def _json_cell(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
    if isinstance(v, np.integer):
        return int(v)
    return v


def render(command, problem, columns, rows, fmt):
    if fmt == "json":
        doc = {
            "command": command,
            "fingerprint": problem.fingerprint(),
            "log_base": "e" if problem.log_base == math.e else "2",
            "columns": list(columns),
            "rows": [{c: _json_cell(row.get(c)) for c in columns} for row in rows],
        }
        return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_csv_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def atomic_write(path, text):
    """Write ``text`` to ``path`` through a temporary file in the same directory."""
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".infospectrum-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def run(cfg: RunConfig, stdout=None):
    """Execute one command; returns the exit status."""
    stdout = stdout or sys.stdout
    columns, rows, status = _COMMANDS[cfg.command](cfg)
    text = render(cfg.command, cfg.problem, columns, rows, cfg.format)
    if cfg.out:
        atomic_write(cfg.out, text)
    else:
        stdout.write(text)
    if status:
        rep = rows[0]
        _diagnose(status, "PreconditionError", rep["reason"], {"witness": rep["witness"]})
    return status


def _diagnose(status, name, message, extra=None):
    doc = {"status": "error", "exit_code": status, "error": name, "message": message}
    if extra:
        doc.update(extra)
    sys.stderr.write(json.dumps(doc, sort_keys=True, default=str) + "\n")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser():
    p = _Parser(prog="infospectrum", description="Hypothesis-testing exponents and finite-n oracles.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="JSON problem description")
    p.add_argument("--kind", choices=("error", "correct", "coding"), default="error")
    p.add_argument("--r", type=float)
    p.add_argument("--r-min", type=float)
    p.add_argument("--r-max", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--log-base", choices=("e", "2"))
    return p


def parse_run_config(argv):
    args = build_parser().parse_args(argv)
    try:
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read config: {err}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"config is not valid JSON: {err}") from None
    problem = load_problem(raw, args.log_base)
    grid = None
    bounds = (args.r_min, args.r_max, args.steps)
    if any(b is not None for b in bounds):
        if any(b is None for b in bounds):
            raise ConfigError("--r-min, --r-max and --steps go together")
        if args.steps < 1 or args.r_max < args.r_min:
            raise ConfigError("need --steps >= 1 and --r-max >= --r-min")
        grid = tuple(float(x) for x in np.linspace(args.r_min, args.r_max, args.steps))
    return RunConfig(problem, args.command, args.kind, args.r, grid, args.n, args.samples,
                     args.seed, args.out, args.format)


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_run_config(argv)
        return run(cfg)
    except ConfigError as err:
        _diagnose(2, "ConfigError", str(err))
        return 2
    except ResourceError as err:
        _diagnose(4, type(err).__name__, str(err))
        return 4
    except InfospectrumError as err:
        extra = {}
        for attr in ("witness", "interval"):
            if getattr(err, attr, None) is not None:
                extra[attr] = getattr(err, attr)
        report = getattr(err, "report", None)
        if report is not None and report.witness is not None:
            extra["witness"] = report.witness
        _diagnose(3, type(err).__name__, str(err), extra)
        return 3
    except (ValueError, TypeError) as err:
        _diagnose(3, type(err).__name__, str(err))
        return 3


if __name__ == "__main__":
    sys.exit(main())
