"""Energy ledgers and the checks run on them."""

from __future__ import annotations

import csv
import io
import os
from dataclasses import astuple, dataclass, field, fields
from typing import Callable, Iterable

import numpy as np

from .errors import ArgumentError

CSV_HEADER = ("step", "t", "energy", "dissipation_integral", "slack", "newton_iters", "residual_norm")


@dataclass(frozen=True)
class LedgerRow:
    step: int
    t: float
    energy: float
    dissipation_integral: float
    slack: float
    newton_iters: int
    residual_norm: float


@dataclass
class EnergyLedger:
    """Per-slab record; ``slack = E(n-1) - E(n) - int D dt`` should be >= 0."""

    rows: list[LedgerRow] = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    @property
    def t(self):
        return self.column("t")

    @property
    def energy(self):
        return self.column("energy")

    @property
    def dissipation(self):
        return self.column("dissipation_integral")

    @property
    def slack(self):
        return self.column("slack")


@dataclass(frozen=True)
class CheckReport:
    passed: bool
    worst_violation: float
    tolerance: float
    offending_steps: tuple[int, ...] = ()
    details: dict = field(default_factory=dict)


def default_slack_tolerance(ledger: EnergyLedger) -> float:
    return 1e-8 * (1.0 + abs(ledger.rows[0].energy))


def check_dissipation_inequality(ledger: EnergyLedger, tol: float | None = None) -> CheckReport:
    """Check ``E(n) <= E(n-1) - int D dt`` for every slab.

    Passes iff the smallest slack is ``>= -tol``. The telescoped form for all
    pairs ``m < n`` is reported in ``details["worst_pair"]``.
    """
    if not ledger.rows:
        raise ArgumentError("ledger is empty")
    if tol is None:
        tol = default_slack_tolerance(ledger)
    steps = ledger.column("step")[1:]
    e = ledger.energy
    slack = e[:-1] - e[1:] - ledger.dissipation[1:]
    worst = float(max(0.0, -slack.min())) if slack.size else 0.0
    offending = tuple(int(s) for s in steps[slack < -tol])

    # E(m) - E(n) - sum_{m<j<=n} D_j for all m < n
    cum = np.concatenate([[0.0], np.cumsum(ledger.dissipation[1:])])
    pairs = e[:, None] - e[None, :] - (cum[None, :] - cum[:, None])
    upper = np.triu(np.ones_like(pairs, dtype=bool), k=1)
    worst_pair = float(max(0.0, -pairs[upper].min())) if upper.any() else 0.0
    return CheckReport(
        passed=worst <= tol,
        worst_violation=worst,
        tolerance=tol,
        offending_steps=offending,
        details={"min_slack": float(slack.min()) if slack.size else 0.0, "worst_pair": worst_pair},
    )


def check_conservation(trajectory: Iterable, functional: Callable, tol: float) -> CheckReport:
    """Check ``|F(u_n) - F(u_0)| <= tol (1 + |F(u_0)|)`` along a trajectory."""
    values = np.array([functional(u) for u in trajectory], dtype=float)
    if values.size == 0:
        raise ArgumentError("trajectory is empty")
    drift = np.abs(values - values[0]) / (1.0 + abs(values[0]))
    worst = float(drift.max())
    return CheckReport(
        passed=worst <= tol,
        worst_violation=worst,
        tolerance=tol,
        offending_steps=tuple(int(i) for i in np.flatnonzero(drift > tol)),
        details={"initial": float(values[0]), "final": float(values[-1])},
    )


def fit_exponential_decay(ledger: EnergyLedger, floor: float):
    """Least-squares slope of ``log(E - floor)`` against ``t``.

    Only rows with ``E > floor`` are used. Returns ``(rate, r_squared)``.
    """
    t, e = ledger.t, ledger.energy
    use = e > floor
    if use.sum() < 3:
        raise ArgumentError(f"need at least 3 rows above the floor, have {int(use.sum())}")
    t, y = t[use], np.log(e[use] - floor)
    slope, intercept = np.polyfit(t, y, 1)
    ss_res = float(np.sum((y - (slope * t + intercept)) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), r2


def _format(value) -> str:
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return f"{float(value):.17g}"


def format_csv(ledger: EnergyLedger) -> str:
    lines = [",".join(CSV_HEADER)]
    for row in ledger.rows:
        lines.append(",".join(_format(v) for v in astuple(row)))
    return "\n".join(lines) + "\n"


def write_csv(ledger: EnergyLedger, destination) -> None:
    """Write the ledger as CSV (17 significant digits, LF line endings)."""
    text = format_csv(ledger)
    if hasattr(destination, "write"):
        destination.write(text)
        return
    with open(os.fspath(destination), "w", newline="\n", encoding="ascii") as fh:
        fh.write(text)


def read_csv(source) -> EnergyLedger:
    """Parse a ledger written by :func:`write_csv`."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(os.fspath(source), encoding="ascii") as fh:
            text = fh.read()
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if tuple(header or ()) != CSV_HEADER:
        raise ArgumentError(f"unexpected ledger header {header!r}")
    types = [int if f.type in (int, "int") else float for f in fields(LedgerRow)]
    rows = [LedgerRow(*(tp(v) for tp, v in zip(types, rec))) for rec in reader if rec]
    return EnergyLedger(rows)
