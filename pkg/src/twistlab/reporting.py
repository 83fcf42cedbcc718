"""Verification reports and the flat CSV format shared by all suites.

Exact-mode rows compare closed forms at an absolute or relative tolerance;
Monte Carlo rows compare estimates at a z-score threshold (4 standard
errors by default, deliberately wide so that suites running dozens of
comparisons keep a negligible family-wise false-alarm rate).  Info rows
record a value and a deviation without asserting anything.

The CSV columns are fixed: name, mode, lhs, rhs, se_lhs, se_rhs, z, pass,
seconds.  The ``seconds`` column is written as 0.000 by default so that a
given configuration produces a byte-identical file; pass ``timing=True``
for human-facing output with measured runtimes.
"""

from __future__ import annotations

import csv
import io
import math
import sys
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "CSV_COLUMNS",
    "VerificationReport",
    "count_failures",
    "exact_report",
    "info_report",
    "mc_report",
    "print_reports",
    "score",
    "weighted_ratio",
    "write_reports_csv",
]

CSV_COLUMNS = ["name", "mode", "lhs", "rhs", "se_lhs", "se_rhs", "z", "pass", "seconds"]

Z_MAX = 4.0


@dataclass(frozen=True)
class VerificationReport:
    """One lhs-vs-rhs comparison: exact, Monte Carlo, or informational.

    ``z`` holds the z-score in mc mode and the absolute residual in exact
    and info modes.
    """

    name: str
    mode: str
    lhs: float
    rhs: float
    se_lhs: float
    se_rhs: float
    z: float
    passed: bool
    seconds: float = 0.0

    def with_seconds(self, seconds: float) -> "VerificationReport":
        return replace(self, seconds=seconds)


def exact_report(name, lhs, rhs, tol=1e-10, relative=False, seconds=0.0) -> VerificationReport:
    lhs = float(lhs)
    rhs = float(rhs)
    resid = abs(lhs - rhs)
    bound = tol * max(abs(lhs), abs(rhs)) if relative else tol
    return VerificationReport(
        name=name,
        mode="exact",
        lhs=lhs,
        rhs=rhs,
        se_lhs=0.0,
        se_rhs=0.0,
        z=resid,
        passed=resid <= bound,
        seconds=seconds,
    )


def mc_report(name, lhs, se_lhs, rhs, se_rhs, z_max=Z_MAX, z=None, seconds=0.0) -> VerificationReport:
    """Monte Carlo comparison row.

    When lhs and rhs come from paired samples, pass the paired z to ``z``;
    otherwise it is formed from the two standard errors (conservative under
    common random numbers).  Zero total SE with equal values passes with
    z = 0; with unequal values it fails with z = inf.
    """
    lhs = float(lhs)
    rhs = float(rhs)
    if z is None:
        spread = math.hypot(se_lhs, se_rhs) if (se_lhs or se_rhs) else 0.0
        if spread == 0.0:
            z = 0.0 if lhs == rhs else float("inf")
        else:
            z = abs(lhs - rhs) / spread
    return VerificationReport(
        name=name,
        mode="mc",
        lhs=lhs,
        rhs=rhs,
        se_lhs=float(se_lhs),
        se_rhs=float(se_rhs),
        z=float(z),
        passed=float(z) <= z_max,
        seconds=seconds,
    )


def info_report(name, lhs, rhs, seconds=0.0) -> VerificationReport:
    """Logged-only row: recorded deviation, always passing."""
    return VerificationReport(
        name=name,
        mode="info",
        lhs=float(lhs),
        rhs=float(rhs),
        se_lhs=0.0,
        se_rhs=0.0,
        z=abs(float(lhs) - float(rhs)),
        passed=True,
        seconds=seconds,
    )


def weighted_ratio(num, den):
    """Delta-method mean and standard errors of mean(num)/mean(den).

    Returns (complex ratio, SE of real part, SE of imaginary part); the
    residual linearisation handles complex importance weights directly.
    """
    num = np.asarray(num)
    den = np.asarray(den)
    n = num.shape[0]
    mb = den.mean()
    r = num.mean() / mb
    if n < 2:
        return r, 0.0, 0.0
    resid = (num - r * den) / mb
    se_re = float(np.real(resid).std(ddof=1) / math.sqrt(n))
    se_im = float(np.imag(resid).std(ddof=1) / math.sqrt(n))
    return r, se_re, se_im


def score(value: float, se: float, atol: float = 1e-12) -> float:
    """z-score of a deviation, with a machine-precision floor.

    Deviations below ``atol`` count as zero: estimates that are exact by
    construction (for example a self-normalised constant) otherwise divide
    rounding noise by a vanishing standard error.
    """
    if abs(value) <= atol:
        return 0.0
    if se > 0:
        return abs(value) / se
    return float("inf")


def _fmt(x: float) -> str:
    return f"{float(x):.12g}"


def write_reports_csv(reports, target=None, timing=False) -> str:
    """Write rows in declaration order; returns the CSV text.

    ``target`` may be a path, a file object, or None (text only).
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in reports:
        writer.writerow(
            [
                r.name,
                r.mode,
                _fmt(r.lhs),
                _fmt(r.rhs),
                _fmt(r.se_lhs),
                _fmt(r.se_rhs),
                _fmt(r.z),
                "1" if r.passed else "0",
                f"{r.seconds:.3f}" if timing else "0.000",
            ]
        )
    text = buf.getvalue()
    if target is None:
        return text
    if hasattr(target, "write"):
        target.write(text)
    else:
        with open(target, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text


def count_failures(reports, cap: int = 125) -> int:
    return min(sum(1 for r in reports if not r.passed), cap)


def print_reports(reports, file=None) -> None:
    out = file if file is not None else sys.stdout
    for r in reports:
        flag = "PASS" if r.passed else "FAIL"
        print(
            f"[{flag}] {r.name}: mode={r.mode} lhs={_fmt(r.lhs)} rhs={_fmt(r.rhs)} "
            f"z={_fmt(r.z)} ({r.seconds:.3f}s)",
            file=out,
        )
