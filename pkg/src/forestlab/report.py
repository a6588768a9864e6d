"""Experiment reports and the append-only CSV ledger."""
from __future__ import annotations

import datetime
import os
from dataclasses import dataclass, field

LEDGER_HEADER = "timestamp,lemma_id,instance_id,bound,measured,status,trials,seed"
LEDGER_ENV_VAR = "FORESTLAB_LEDGER"


@dataclass
class ExperimentReport:
    """Outcome of one verification or experiment run.

    `passed` tracks whether the measured value satisfies the declared bound
    within `tolerance`.  A violated claim precondition is reported through
    `status` instead of an exception so sweeps can tabulate guard rates.
    """

    lemma_id: str
    bound: float
    measured: float
    passed: bool
    status: str = "ok"  # ok | precondition_violation
    mode: str = "exact"
    trials: int | None = None
    seed: int | None = None
    tolerance: float = 1e-9
    details: dict = field(default_factory=dict)

    @property
    def csv_status(self) -> str:
        if self.status != "ok":
            return self.status
        return "pass" if self.passed else "fail"


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


def ledger_row(report: ExperimentReport, instance_id: str) -> str:
    """Deterministic CSV cell block, everything except the timestamp."""
    return ",".join(
        [
            report.lemma_id,
            instance_id,
            _fmt(report.bound),
            _fmt(report.measured),
            report.csv_status,
            _fmt(report.trials),
            _fmt(report.seed),
        ]
    )


def default_ledger_path() -> str | None:
    return os.environ.get(LEDGER_ENV_VAR)


def append_ledger(path: str, rows, fresh: bool = False) -> None:
    """Append fully formed rows, creating the header when needed.

    Each row is written with its own timestamp column so reruns differ only
    there.  `fresh` truncates the file first.
    """
    exists = os.path.exists(path) and not fresh
    stamp = datetime.datetime.now(datetime.timezone.utc).isoformat()
    mode = "a" if exists else "w"
    with open(path, mode) as fh:
        if not exists:
            fh.write(LEDGER_HEADER + "\n")
        for row in rows:
            fh.write(f"{stamp},{row}\n")
