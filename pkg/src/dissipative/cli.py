"""Command-line front end.

Config files hold one ``key = value`` pair per line; ``#`` starts a comment.
Commands::

    dissipative run <config-file>
    dissipative sweep <config-file> --param <key> --values <v1,v2,...>
    dissipative check <csv-file>
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import presets, problems
from .core import verify_structure
from .diagnostics import CheckReport, check_dissipation_inequality, read_csv, write_csv
from .errors import AdmissibilityError, ArgumentError, ConfigError, NewtonDivergence
from .timestep import NEWTON_MAXIT, NEWTON_TOL, TimeGrid, run_transient

PROBLEMS = ("heat", "pme", "fokker_planck", "cross_diffusion", "maxwell1d", "gas", "gradient")
POTENTIALS = ("zero", "linear", "quadratic")

# keys accepted for every problem
COMMON_KEYS = {"problem", "nx", "L", "tau", "n_steps", "dg_order", "ic", "out", "seed",
               "tol_newton", "newton_maxit", "slack_tol", "structure_samples"}
PROBLEM_KEYS = {
    "heat": set(),
    "pme": {"m"},
    "fokker_planck": {"potential", "mass"},
    "cross_diffusion": set(),
    "maxwell1d": {"eps0", "mu0", "chi1", "chi3", "sigma0"},
    "gas": {"gamma"},
    "gradient": {"hamiltonian", "dim", "j_matrix", "r_matrix"},
}
REQUIRED_KEYS = {"pme": {"m"}, "gas": {"gamma"}}


@dataclass
class RunConfig:
    problem: str
    nx: int = 16
    L: float = 1.0
    tau: float | None = None
    n_steps: int = 50
    dg_order: int = 0
    ic: str | None = None
    out: str | None = None
    seed: int = 42
    tol_newton: float = NEWTON_TOL
    newton_maxit: int = NEWTON_MAXIT
    slack_tol: float | None = None
    structure_samples: int = 0
    m: float | None = None
    potential: str = "zero"
    mass: float = 1.0
    eps0: float = 1.0
    mu0: float = 1.0
    chi1: float = 1.0
    chi3: float = 0.5
    sigma0: float = 0.5
    gamma: float | None = None
    hamiltonian: str = "quadratic"
    dim: int | None = None
    j_matrix: str | None = None
    r_matrix: str | None = None

    def output_path(self) -> str:
        return self.out or f"{self.problem}.csv"


_FIELD_TYPES = {
    "nx": int, "n_steps": int, "dg_order": int, "seed": int, "newton_maxit": int, "structure_samples": int,
    "dim": int, "L": float, "tau": float, "tol_newton": float, "slack_tol": float, "m": float, "mass": float,
    "eps0": float, "mu0": float, "chi1": float, "chi3": float, "sigma0": float, "gamma": float,
}
NUMERIC_KEYS = frozenset(_FIELD_TYPES)


def _convert(key, raw, lineno):
    tp = _FIELD_TYPES.get(key, str)
    if tp is str:
        return raw
    try:
        if tp is int:
            value = float(raw)
            if not value.is_integer():
                raise ValueError
            return int(value)
        value = float(raw)
    except ValueError:
        raise ConfigError(f"{key} must be {'an integer' if tp is int else 'a number'}, got {raw!r}", lineno) from None
    if not math.isfinite(value):
        raise ConfigError(f"{key} must be finite, got {raw!r}", lineno)
    return value


def parse_matrix(text: str) -> np.ndarray:
    """Parse ``"a,b;c,d"`` into a square matrix."""
    rows = [[float(v) for v in row.split(",")] for row in text.split(";")]
    mat = np.array(rows, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"not a square matrix: {text!r}")
    return mat


def parse_config(text: str) -> RunConfig:
    """Parse and validate the ``key = value`` run configuration format."""
    values: dict[str, object] = {}
    lines: dict[str, int] = {}
    all_keys = COMMON_KEYS.union(*PROBLEM_KEYS.values())
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in all_keys:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        if not raw:
            raise ConfigError(f"missing value for {key!r}", lineno)
        values[key] = _convert(key, raw, lineno)
        lines[key] = lineno

    if "problem" not in values:
        raise ConfigError("problem required")
    problem = values["problem"]
    if problem not in PROBLEMS:
        raise ConfigError(f"unknown problem {problem!r}; choose from {', '.join(PROBLEMS)}", lines["problem"])
    allowed = COMMON_KEYS | PROBLEM_KEYS[problem]
    for key in values:
        if key not in allowed:
            raise ConfigError(f"key {key!r} does not apply to problem {problem}", lines[key])
    for key in sorted(REQUIRED_KEYS.get(problem, ())):
        if key not in values:
            raise ConfigError(f"{key} required")

    cfg = RunConfig(**values)
    _validate(cfg, lines)
    return cfg


def _validate(cfg: RunConfig, lines: dict[str, int]) -> None:
    def fail(key, msg):
        raise ConfigError(msg, lines.get(key))

    if cfg.dg_order not in (0, 1):
        fail("dg_order", f"unsupported dg_order {cfg.dg_order}; supported degrees are 0 and 1")
    if cfg.nx < 1:
        fail("nx", "nx must be a positive integer")
    if cfg.L <= 0:
        fail("L", "L must be positive")
    if cfg.tau is not None and cfg.tau <= 0:
        fail("tau", "tau must be positive")
    if cfg.n_steps < 0:
        fail("n_steps", "n_steps must be non-negative")
    if cfg.tol_newton <= 0:
        fail("tol_newton", "tol_newton must be positive")
    if cfg.newton_maxit < 1:
        fail("newton_maxit", "newton_maxit must be positive")
    if cfg.slack_tol is not None and cfg.slack_tol < 0:
        fail("slack_tol", "slack_tol must be non-negative")
    if cfg.structure_samples < 0:
        fail("structure_samples", "structure_samples must be non-negative")
    if cfg.problem == "pme" and cfg.m <= 1:
        fail("m", "m must satisfy m > 1")
    if cfg.problem == "gas" and cfg.gamma <= 1:
        fail("gamma", "gamma must satisfy gamma > 1")
    if cfg.problem == "fokker_planck":
        if cfg.potential not in POTENTIALS:
            fail("potential", f"unknown potential {cfg.potential!r}; choose from {', '.join(POTENTIALS)}")
        if cfg.mass <= 0:
            fail("mass", "mass must be positive")
    if cfg.problem == "maxwell1d":
        for key in ("eps0", "mu0", "chi1", "chi3"):
            if getattr(cfg, key) <= 0:
                fail(key, f"{key} must be positive")
        if cfg.sigma0 < 0:
            fail("sigma0", "sigma0 must be non-negative")
    if cfg.problem == "gradient":
        try:
            build_model(cfg)
        except (ArgumentError, ValueError) as exc:
            key = next((k for k in ("j_matrix", "r_matrix", "hamiltonian", "dim") if k in lines), None)
            fail(key, str(exc))
    ic_names = presets.preset(cfg.problem, cfg.L).ics
    if cfg.ic is not None and cfg.ic not in ic_names:
        fail("ic", f"unknown ic {cfg.ic!r} for {cfg.problem}; choose from {', '.join(sorted(ic_names))}")


def _potential(name: str, L: float):
    if name == "zero":
        return None
    if name == "linear":
        return lambda x: np.asarray(x, dtype=float) / L
    return lambda x: 4.0 * (np.asarray(x, dtype=float) / L - 0.5) ** 2


def build_model(cfg: RunConfig, mesh=None):
    p = cfg.problem
    if p == "heat":
        return problems.make_heat_log()
    if p == "pme":
        return problems.make_porous_medium(cfg.m)
    if p == "fokker_planck":
        return problems.make_fokker_planck(_potential(cfg.potential, cfg.L), cfg.mass, mesh=mesh, L=cfg.L)
    if p == "cross_diffusion":
        return problems.make_cross_diffusion()
    if p == "maxwell1d":
        return problems.make_maxwell1d(cfg.eps0, cfg.mu0, cfg.chi1, cfg.chi3, cfg.sigma0)
    if p == "gas":
        return problems.make_gas_pipe(cfg.gamma)
    J = parse_matrix(cfg.j_matrix) if cfg.j_matrix else None
    R = parse_matrix(cfg.r_matrix) if cfg.r_matrix else None
    return presets.gradient_model(cfg.hamiltonian, cfg.dim, J, R)


@dataclass
class RunOutcome:
    ledger: object
    report: CheckReport | None
    error: Exception | None = None
    structure_failures: int = 0

    @property
    def ok(self) -> bool:
        return self.error is None and self.report is not None and self.report.passed \
            and self.structure_failures == 0


def execute(cfg: RunConfig) -> RunOutcome:
    """Build, run and check one configuration; writes the ledger CSV."""
    model = build_model(cfg)
    mesh = model.build_mesh(cfg.nx, cfg.L)
    if cfg.problem == "fokker_planck":
        model = build_model(cfg, mesh)
    space = model.build_spaces(mesh)
    pre = presets.preset(cfg.problem, cfg.L)
    u0 = presets.initial_state(cfg.problem, model, space, cfg.ic, cfg.L)
    tau = cfg.tau if cfg.tau is not None else pre.tau

    failures = 0
    rng = np.random.default_rng(cfg.seed)
    for _ in range(cfg.structure_samples):
        u, v = pre.sampler(space, rng), rng.uniform(-1.0, 1.0, space.ndofs)
        if not verify_structure(model, space, u, v).passed:
            failures += 1

    grid = TimeGrid.uniform(tau, cfg.n_steps)
    try:
        _, ledger = run_transient(model, space, grid, u0, cfg.dg_order, cfg.tol_newton, cfg.newton_maxit)
    except (NewtonDivergence, AdmissibilityError) as exc:
        write_csv(exc.ledger, cfg.output_path())
        return RunOutcome(exc.ledger, None, exc, failures)
    write_csv(ledger, cfg.output_path())
    return RunOutcome(ledger, check_dissipation_inequality(ledger, cfg.slack_tol), None, failures)


def _summary(cfg: RunConfig, outcome: RunOutcome) -> str:
    if outcome.error is not None:
        err = outcome.error
        return (f"FAIL {cfg.problem}: {type(err).__name__} at slab {getattr(err, 'slab_index', '?')}: {err}")
    rep = outcome.report
    status = "PASS" if outcome.ok else "FAIL"
    final = outcome.ledger.rows[-1].energy
    extra = f" structure_failures={outcome.structure_failures}" if outcome.structure_failures else ""
    return (f"{status} {cfg.problem}: dissipation check {'passed' if rep.passed else 'failed'}, "
            f"final energy = {final:.10g}, min slack = {rep.details['min_slack']:.3e}{extra}")


def run(cfg: RunConfig) -> int:
    """Execute a run and print a one-line summary; 0 on success."""
    outcome = execute(cfg)
    print(_summary(cfg, outcome))
    if outcome.error is not None:
        return 2
    return 0 if outcome.ok else 1


def _suffixed(path: str, value: str) -> str:
    p = Path(path)
    return str(p.with_name(f"{p.stem}_{value}{p.suffix}"))


def sweep(cfg: RunConfig, param: str, values: list[str]) -> int:
    """Run ``cfg`` once per value of ``param``; one CSV per value."""
    if param not in NUMERIC_KEYS:
        raise ConfigError(f"cannot sweep non-numeric key {param!r}")
    allowed = COMMON_KEYS | PROBLEM_KEYS[cfg.problem]
    if param not in allowed:
        raise ConfigError(f"key {param!r} does not apply to problem {cfg.problem}")
    status = 0
    rows = []
    for raw in values:
        value = _convert(param, raw, None)
        case = dataclasses.replace(cfg, **{param: value}, out=_suffixed(cfg.output_path(), raw))
        try:
            _validate(case, {})
            outcome = execute(case)
        except ArgumentError as exc:
            rows.append((raw, "ERROR", str(exc)))
            status = 1
            continue
        if outcome.error is not None:
            rows.append((raw, "FAIL", f"{type(outcome.error).__name__}: {outcome.error}"))
        else:
            rows.append((raw, "PASS" if outcome.ok else "FAIL",
                         f"final_energy={outcome.ledger.rows[-1].energy:.10g} "
                         f"min_slack={outcome.report.details['min_slack']:.3e} -> {case.out}"))
        if not outcome.ok:
            status = 1
    for raw, st, msg in rows:
        print(f"{param}={raw:<12} {st:<5} {msg}")
    return status


def check(path: str, tol: float | None = None) -> int:
    ledger = read_csv(path)
    rep = check_dissipation_inequality(ledger, tol)
    print(f"{'PASS' if rep.passed else 'FAIL'} {path}: min slack = {rep.details['min_slack']:.3e}, "
          f"tolerance = {rep.tolerance:.3e}, offending steps = {list(rep.offending_steps)}")
    return 0 if rep.passed else 1


def _read_config(path: str) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="dissipative", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run one configuration")
    p_run.add_argument("config")
    p_sweep = sub.add_parser("sweep", help="run a configuration for several values of one key")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--param", required=True)
    p_sweep.add_argument("--values", required=True, help="comma-separated list (may be empty)")
    p_check = sub.add_parser("check", help="re-check the dissipation inequality of a ledger CSV")
    p_check.add_argument("csv")
    p_check.add_argument("--tol", type=float, default=None)
    args = parser.parse_args(argv)

    try:
        if args.command == "run":
            return run(_read_config(args.config))
        if args.command == "sweep":
            values = [v.strip() for v in args.values.split(",") if v.strip()]
            return sweep(_read_config(args.config), args.param, values)
        return check(args.csv, args.tol)
    except (ArgumentError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
