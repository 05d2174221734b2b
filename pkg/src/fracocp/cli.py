"""Command line entry point ``frac-ocp``.

Configuration is a flat ``key = value`` text file (``#`` starts a comment,
``key: value`` is accepted too) with ``--set key=value`` overrides.

Exit codes: 0 success, 2 configuration error, 3 validation check failure,
4 solver non-convergence.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field, fields

import numpy as np

from .assembly import assemble_operator
from .checks import CHECKS, run_checks
from .exceptions import ConfigurationError, FracOCPError
from .experiments import h_sweep
from .mesh import build_uniform_mesh
from .ocp import ProblemConfig, gamma_continuation, recover_multiplier, solve_fixed_gamma

__all__ = ["RunConfig", "parse_config", "main", "EXIT_OK", "EXIT_CONFIG", "EXIT_CHECK", "EXIT_NONCONVERGED"]

log = logging.getLogger("fracocp.cli")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CHECK = 3
EXIT_NONCONVERGED = 4

COMMANDS = ("validate", "solve", "gamma-sweep", "h-sweep")
GAMMA_COLUMNS = ["gamma", "J", "Jgamma", "viol_l2", "viol_sup", "mult_l1", "dz_l2", "kkt", "iters"]
H_COLUMNS = ["h", "err_u_l2", "err_z_l2"]


@dataclass
class RunConfig:
    """Everything a run needs; defaults mirror the reference experiment setup."""

    command: str = "solve"
    # mesh
    a: float = -0.5
    b: float = 0.5
    n: int = 256
    levels: int = 5
    reference_n: int = 0  # 0: eight times the finest level
    # problem
    s: float = 0.5
    alpha: float = 1e-2
    u_d: str = "getoor"
    u_b: float = 0.1
    mu_hat: str = "0"
    z_lo: float | None = None
    z_hi: float | None = None
    opt_tol: float = 1e-9
    max_iter: int = 5000
    method: str = "newton"
    gamma: float | None = None
    # schedule
    gamma0: float = 0.1
    factor: float = 4.0
    count: int = 13
    # output
    out: str | None = None
    dump_matrices: bool = False
    precision: int = 17
    checks: str = "all"
    workers: int = 1
    explicit: set = field(default_factory=set, repr=False)

    def problem(self) -> ProblemConfig:
        bounds = None
        if self.z_lo is not None or self.z_hi is not None:
            bounds = (-math.inf if self.z_lo is None else self.z_lo, math.inf if self.z_hi is None else self.z_hi)
        return ProblemConfig(
            s=self.s, alpha=self.alpha, u_d=_number_or_text(self.u_d), u_b=self.u_b,
            mu_hat=_number_or_text(self.mu_hat), control_bounds=bounds, opt_tol=self.opt_tol,
            max_iter=self.max_iter, method=self.method,
        )

    @property
    def level_sizes(self) -> list:
        return [self.n * 2**k for k in range(self.levels)]

    @property
    def reference_size(self) -> int:
        return self.reference_n or 8 * self.level_sizes[-1]


_FIELDS = {f.name: f for f in fields(RunConfig) if f.name != "explicit"}
_INT_KEYS = {"n", "levels", "reference_n", "max_iter", "count", "precision", "workers"}
_FLOAT_KEYS = {"a", "b", "s", "alpha", "u_b", "opt_tol", "gamma0", "factor"}
_OPT_FLOAT_KEYS = {"z_lo", "z_hi", "gamma"}
_BOOL_KEYS = {"dump_matrices"}


def _number_or_text(value: str):
    try:
        return float(value)
    except ValueError:
        return value


def _convert(key: str, raw: str):
    raw = raw.strip()
    try:
        if key in _INT_KEYS:
            val = float(raw)
            if not val.is_integer():
                raise ValueError
            return int(val)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _OPT_FLOAT_KEYS:
            return None if raw.lower() in ("", "none") else float(raw)
        if key in _BOOL_KEYS:
            low = raw.lower()
            if low not in ("1", "0", "true", "false", "yes", "no"):
                raise ValueError
            return low in ("1", "true", "yes")
    except ValueError:
        raise ConfigurationError(f"{key}: cannot parse {raw!r}") from None
    return raw


def _split_pair(text: str, where: str) -> tuple[str, str]:
    for sep in ("=", ":"):
        if sep in text:
            key, val = text.split(sep, 1)
            return key.strip().replace("-", "_"), val.strip()
    raise ConfigurationError(f"{where}: expected key=value, got {text!r}")


def read_config_file(path: str) -> list:
    if not os.path.isfile(path):
        raise ConfigurationError(f"config file not found: {path}")
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if line:
                pairs.append(_split_pair(line, f"{path}:{lineno}"))
    return pairs


def parse_config(path: str | None = None, overrides=(), command: str | None = None) -> RunConfig:
    """Build and validate a :class:`RunConfig` from a file plus ``key=value`` overrides."""
    pairs = read_config_file(path) if path else []
    pairs += [_split_pair(item, "--set") for item in overrides]
    values = {}
    for key, raw in pairs:
        if key not in _FIELDS:
            raise ConfigurationError(f"unknown configuration key {key!r}")
        values[key] = _convert(key, raw)
    if command is not None:
        if "command" in values and values["command"] != command:
            raise ConfigurationError(f"command {command!r} conflicts with config command {values['command']!r}")
        values["command"] = command
    cfg = RunConfig(**values)
    cfg.explicit = set(values)
    for name, f in _FIELDS.items():
        if name not in cfg.explicit:
            log.info("default %s = %r", name, f.default)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig):
    if cfg.command not in COMMANDS:
        raise ConfigurationError(f"command must be one of {COMMANDS}, got {cfg.command!r}")
    if not cfg.a < cfg.b:
        raise ConfigurationError(f"a < b required, got a={cfg.a}, b={cfg.b}")
    if cfg.n < 2:
        raise ConfigurationError("n must be at least 2")
    if cfg.levels < 1:
        raise ConfigurationError("levels must be at least 1")
    if cfg.reference_n and (cfg.reference_n < cfg.level_sizes[-1] or cfg.reference_n % cfg.level_sizes[-1]):
        raise ConfigurationError("reference_n must be a multiple of the finest level size")
    if cfg.count < 1 or not cfg.factor > 1 or not cfg.gamma0 > 0:
        raise ConfigurationError("schedule needs gamma0 > 0, factor > 1, count >= 1")
    if cfg.gamma is not None and not cfg.gamma > 0:
        raise ConfigurationError("gamma must be positive")
    if not 1 <= cfg.precision <= 17:
        raise ConfigurationError("precision must be between 1 and 17 significant digits")
    if cfg.workers < 1:
        raise ConfigurationError("workers must be at least 1")
    if cfg.checks != "all":
        unknown = set(_check_names(cfg)) - set(CHECKS)
        if unknown:
            raise ConfigurationError(f"unknown checks {sorted(unknown)}; available {sorted(CHECKS)}")
    cfg.problem()  # re-validates every ProblemConfig gate (s > 1/4, alpha > 0, bounds, method)


def _check_names(cfg: RunConfig):
    return None if cfg.checks == "all" else [c.strip() for c in cfg.checks.split(",") if c.strip()]


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------

def _fmt(value, precision: int) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), f".{precision}g")


def _write_csv(path: str | None, header: list, rows: list, precision: int, footer: list = ()):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v, precision) if not isinstance(v, str) else v for v in row])
    for row in footer:
        writer.writerow([_fmt(v, precision) if not isinstance(v, str) else v for v in row])
    text = buf.getvalue()
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _dump_prefix(cfg: RunConfig) -> str:
    return os.path.splitext(cfg.out)[0] if cfg.out else "frac_ocp"


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def run_validate(cfg: RunConfig, inject_fault: bool = False) -> int:
    """Run the verification suite; one JSON object per check on stdout (and in ``out``)."""
    sink = open(cfg.out, "w", encoding="utf-8") if cfg.out else None

    def emit(result):
        line = result.to_json()
        print(line, flush=True)
        if sink:
            sink.write(line + "\n")
        log.info(result.line())

    try:
        results = run_checks(_check_names(cfg), inject_fault=inject_fault, workers=cfg.workers, emit=emit)
    finally:
        if sink:
            sink.close()
    failed = [r.name for r in results if not r.passed]
    if failed:
        log.error("failed checks: %s", ", ".join(failed))
        return EXIT_CHECK
    return EXIT_OK


def run_solve(cfg: RunConfig) -> int:
    """Single solve at ``gamma`` (or along the schedule when gamma is unset); nodal CSV output."""
    prob = cfg.problem()
    mesh = build_uniform_mesh(cfg.a, cfg.b, cfg.n)
    op = assemble_operator(mesh, prob.s)
    if cfg.dump_matrices:
        op.dump(_dump_prefix(cfg))
    if cfg.gamma is not None:
        sol = solve_fixed_gamma(prob, op, cfg.gamma)
        converged = sol.converged
    else:
        report = gamma_continuation(prob, op, cfg.gamma0, cfg.factor, cfg.count)
        sol = report.final
        converged = report.all_converged and sol is not None
        if sol is None:
            log.error("continuation produced no solution: %s", report.aborted)
            return EXIT_NONCONVERGED
    mult = recover_multiplier(prob, sol.u, sol.gamma)
    z_nodes = np.concatenate((sol.z.values, [np.nan]))
    rows = [
        [x, u, xi, z]
        for x, u, xi, z in zip(mesh.nodes, sol.u.nodal, sol.xi.nodal, z_nodes)
    ]
    rows = [r + [m] for r, m in zip(rows, mult.nodal)]
    _write_csv(cfg.out, ["x", "u", "xi", "z_right_cell", "multiplier"], rows, cfg.precision)
    summary = {
        "gamma": sol.gamma, "objective": sol.objective, "plain_objective": sol.plain_objective,
        "kkt": sol.kkt_residual, "iterations": sol.iterations, "converged": bool(converged),
        "multiplier_l1": mult.l1,
    }
    print(json.dumps(summary, sort_keys=True), file=sys.stderr if cfg.out is None else sys.stdout)
    return EXIT_OK if converged else EXIT_NONCONVERGED


def run_gamma_sweep(cfg: RunConfig) -> int:
    """Continuation path; one CSV row per γ, a flagged final row if the path aborted."""
    prob = cfg.problem()
    mesh = build_uniform_mesh(cfg.a, cfg.b, cfg.n)
    op = assemble_operator(mesh, prob.s)
    if cfg.dump_matrices:
        op.dump(_dump_prefix(cfg))
    report = gamma_continuation(prob, op, cfg.gamma0, cfg.factor, cfg.count)
    rows = [
        [r.gamma, r.J, r.Jgamma, r.viol_l2, r.viol_sup, r.mult_l1, r.dz_l2, r.kkt, r.iters]
        for r in report.records
    ]
    footer = []
    if report.aborted:
        footer.append([f"# FAILED: {report.aborted}"])
    for r in report.records:
        if not r.converged:
            log.warning("gamma=%s did not converge (kkt=%.3e)", _fmt(r.gamma, 6), r.kkt)
    _write_csv(cfg.out, GAMMA_COLUMNS, rows, cfg.precision, footer)
    return EXIT_OK if report.all_converged else EXIT_NONCONVERGED


def run_h_sweep(cfg: RunConfig) -> int:
    """Mesh-refinement study at fixed γ against a reference level; fitted orders in a footer row."""
    prob = cfg.problem()
    gamma = cfg.gamma if cfg.gamma is not None else 1e4
    if cfg.dump_matrices:
        assemble_operator(build_uniform_mesh(cfg.a, cfg.b, cfg.n), prob.s).dump(_dump_prefix(cfg))
    rep = h_sweep(prob, cfg.a, cfg.b, cfg.level_sizes, cfg.reference_size, gamma, workers=cfg.workers)
    rows = [[r.h, r.err_u_l2, r.err_z_l2] for r in rep.rows]
    footer = []
    if rep.fit_u is not None:
        footer.append(["order", rep.fit_u.slope, rep.fit_z.slope])
    if rep.failed:
        footer.append([f"# FAILED: {rep.failed}"])
    _write_csv(cfg.out, H_COLUMNS, rows, cfg.precision, footer)
    return EXIT_OK if rep.all_converged else EXIT_NONCONVERGED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="frac-ocp",
        description="Optimal control of the 1D integral fractional Laplacian with a penalized state constraint.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="flat key=value configuration file")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override one configuration key (repeatable)")
    parser.add_argument("--out", help="output path (CSV, or JSON lines for validate)")
    parser.add_argument("--workers", type=int, help="worker threads for independent sweep cells")
    parser.add_argument("--dump-matrices", action="store_true", help="write A, M, B as text next to the output")
    parser.add_argument("--inject-fault", action="store_true",
                        help="validate only: perturb the assembled matrix to exercise the failure path")
    parser.add_argument("-q", "--quiet", action="store_true", help="only log warnings and errors")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    overrides = list(args.overrides)
    if args.out is not None:
        overrides.append(f"out={args.out}")
    if args.workers is not None:
        overrides.append(f"workers={args.workers}")
    if args.dump_matrices:
        overrides.append("dump_matrices=true")
    try:
        cfg = parse_config(args.config, overrides, command=args.command)
    except ConfigurationError as exc:
        print(f"frac-ocp: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    runners = {
        "validate": lambda c: run_validate(c, inject_fault=args.inject_fault),
        "solve": run_solve,
        "gamma-sweep": run_gamma_sweep,
        "h-sweep": run_h_sweep,
    }
    try:
        return runners[cfg.command](cfg)
    except ConfigurationError as exc:
        print(f"frac-ocp: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FracOCPError as exc:
        print(f"frac-ocp: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED


if __name__ == "__main__":
    sys.exit(main())
