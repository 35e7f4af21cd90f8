"""Command-line front end.

Example (the Klein consumption-equation first stage)::

    bootrank tests/data/klein.csv --time yr --lag totinc:1 --lag profits:1 \\
        --endog profits,wagetot \\
        --inst govt,taxnetx,year,wagegovt,capital1,totinc_L1 \\
        --partial profits_L1 --cfa
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from importlib import metadata

from .bootstrap import BootstrapScheme
from .data import assemble, lag, load_csv, set_time
from .engine import DEFAULT_SEED, BranchResult, TestConfig, TestReport, run_test
from .errors import BootrankError

__all__ = ["CliInvocation", "build_parser", "parse", "render_text", "render_json", "main"]

COMMAND_NAME = "bootrank: improved bootstrap test of matrix rank"


class UsageError(BootrankError):
    """Invalid command-line usage."""


@dataclass
class CliInvocation:
    data_path: str
    endogenous: list[str]
    instruments: list[str]
    partial: list[str] = field(default_factory=list)
    lags: list[tuple[str, int]] = field(default_factory=list)
    time: str | None = None
    rank: int | None = None
    allrank: bool = False
    numboot: int = 1000
    alpha: float = 0.05
    beta: float = 0.005
    kappan: float | str = "auto"
    blocksize: int | None = None
    cluster: str | None = None
    noconstant: bool = False
    cfa: bool = False
    seed: int = DEFAULT_SEED
    scale: str = "table"
    output: str = "text"
    out: str | None = None

    def scheme(self, cluster_ids=None) -> BootstrapScheme:
        if self.cluster is not None:
            return BootstrapScheme.cluster(cluster_ids)
        if self.blocksize is not None:
            return BootstrapScheme.block(self.blocksize)
        return BootstrapScheme.wild()


def _names(text: str) -> list[str]:
    names = [s.strip() for s in text.split(",") if s.strip()]
    if not names:
        raise argparse.ArgumentTypeError("expected a comma-separated list of column names")
    return names


def _lag_spec(text: str) -> tuple[str, int]:
    col, sep, order = text.rpartition(":")
    if not sep:
        col, order = text, "1"
    try:
        k = int(order)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad lag {text!r}; use COLUMN:ORDER") from None
    if not col or k < 1:
        raise argparse.ArgumentTypeError(f"bad lag {text!r}; use COLUMN:ORDER with ORDER >= 1")
    return col, k


def _kappan(text: str) -> float | str:
    if text == "auto":
        return text
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("kappan must be 'auto' or a positive number") from None
    if not value > 0:
        raise argparse.ArgumentTypeError("kappan must be positive")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return value


def _nonneg_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {text!r}")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="bootrank",
        description="Bootstrap test of H0: rank(Pi) <= r for the first-stage coefficient "
                    "matrix Pi of a linear IV regression.",
    )
    p.add_argument("data_path", metavar="DATA", help="CSV file with a header row")
    p.add_argument("--endog", dest="endogenous", type=_names, required=True,
                   help="endogenous variables X (comma-separated)")
    p.add_argument("--inst", dest="instruments", type=_names, required=True,
                   help="nonconstant instruments Z (comma-separated)")
    p.add_argument("--partial", type=_names, default=[],
                   help="nonconstant controls W to partial out (comma-separated)")
    p.add_argument("--time", help="integer time variable; required by --lag")
    p.add_argument("--lag", dest="lags", type=_lag_spec, action="append", default=[],
                   metavar="COL:ORDER", help="add column COL_L<ORDER>; repeatable")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--rank", type=_nonneg_int, help="hypothesized rank r (default k-1)")
    g.add_argument("--allrank", action="store_true", help="report r = 0, ..., k-1")
    p.add_argument("--numboot", type=_positive_int, default=1000, help="bootstrap draws B")
    p.add_argument("--alpha", type=float, default=0.05, help="significance level")
    p.add_argument("--beta", type=float, default=0.005,
                   help="level of the sequential KP rank tests in the two-step approach")
    p.add_argument("--kappan", type=_kappan, default="auto",
                   help="threshold for the analytic rank estimate ('auto' = n^(-1/4))")
    d = p.add_mutually_exclusive_group()
    d.add_argument("--blocksize", type=_positive_int, help="moving-block bootstrap block length")
    d.add_argument("--cluster", help="cluster variable; switches to the cluster bootstrap")
    p.add_argument("--noconstant", action="store_true", help="do not add a constant to W")
    p.add_argument("--cfa", action="store_true", help="also report the analytic approach")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED,
                   help=f"bootstrap seed (default {DEFAULT_SEED})")
    p.add_argument("--scale", choices=("table", "sample"), default="table",
                   help="n multiplying the statistic: rows in the file (default) or the "
                        "estimation sample")
    p.add_argument("--output", choices=("text", "json", "both"), default="text")
    p.add_argument("--out", help="write JSON here instead of standard output")
    return p


def parse(argv) -> CliInvocation:
    """Parse ``argv`` into a :class:`CliInvocation`.

    Raises ``SystemExit(2)`` with a diagnostic on bad usage, as argparse does.
    """
    parser = build_parser()
    ns = parser.parse_args(argv)
    if not 0 < ns.beta < ns.alpha < 1:
        parser.error(f"--beta and --alpha need 0 < beta < alpha < 1 (got {ns.beta}, {ns.alpha})")
    if ns.lags and ns.time is None:
        parser.error("--lag needs --time to name the time variable")
    return CliInvocation(**vars(ns))


def _dataset(inv: CliInvocation):
    labels = [inv.cluster] if inv.cluster else []
    derived = {f"{col}_L{order}" for col, order in inv.lags}
    wanted = [inv.time] if inv.time else []
    wanted += [col for col, _ in inv.lags]
    wanted += [c for c in (*inv.endogenous, *inv.instruments, *inv.partial) if c not in derived]
    numeric = [c for c in dict.fromkeys(wanted) if c not in labels]
    table = load_csv(inv.data_path, numeric=numeric, labels=labels)
    if inv.time:
        table = set_time(table, inv.time)
    for col, order in inv.lags:
        table = lag(table, col, order)
    return assemble(table, inv.endogenous, inv.instruments, inv.partial,
                    noconstant=inv.noconstant, cluster=inv.cluster)


def config_for(inv: CliInvocation, d) -> TestConfig:
    if inv.rank is not None and inv.rank >= d.k:
        raise UsageError(
            f"--rank {inv.rank}: the hypothesized rank must be strictly less than k={d.k}"
        )
    return TestConfig(
        r=inv.rank,
        alpha=inv.alpha,
        beta=inv.beta,
        kappa_n=None if inv.kappan == "auto" else inv.kappan,
        B=inv.numboot,
        scheme=inv.scheme(d.cluster_ids),
        seed=inv.seed,
        run_analytic=inv.cfa,
        allrank=inv.allrank,
        scale=inv.scale,
    )


def _fmt_stat(x: float) -> str:
    return f"{x:.8g}"


def _fmt_p(p: float) -> str:
    s = f"{p:.3f}"
    return s[1:] if s.startswith("0.") else s


def _fmt_level(x: float) -> str:
    s = f"{x:g}"
    return s[1:] if s.startswith("0.") else s


def _two_step_lines(b: BranchResult, beta: float) -> list[str]:
    if b.first_step_rejected:
        return [
            f"Rank estimate in the first step of the two-step approach = {b.rank_estimate}",
            "rank estimate exceeds hypothesized rank; H0 rejected in the first step",
        ]
    return [
        f"Test statistic in the second step of the two-step approach = {_fmt_stat(b.statistic)}",
        f"The p-value in the second step of the two-step approach = {_fmt_p(b.p_value)}",
        "(Note: the null hypothesis is rejected at alpha level if the p-value is smaller "
        f"than alpha-{_fmt_level(beta)}).",
    ]


def _analytic_lines(b: BranchResult) -> list[str]:
    return [
        f"Test statistic for the analytical approach = {_fmt_stat(b.statistic)}",
        f"The p-value for the analytical approach = {_fmt_p(b.p_value)}",
    ]


def render_text(report: TestReport, cfg: TestConfig | None = None) -> str:
    """Human-readable summary in the layout of the reference command's log."""
    lines: list[str] = []
    if report.allrank_table is not None:
        for row in report.allrank_table:
            lines.append(f"H0: rank <= {row.r}")
            lines += _two_step_lines(row.two_step, report.beta)
            if row.analytic is not None:
                lines += _analytic_lines(row.analytic)
            lines.append("")
    else:
        lines += _two_step_lines(report.two_step, report.beta)
        if report.analytic is not None:
            lines += _analytic_lines(report.analytic)
    for w in report.warnings:
        lines.append(f"warning: {w}")
    return "\n".join(lines).rstrip("\n") + "\n"


def _rkmatrix(report: TestReport, branch: str) -> list[list]:
    rows = []
    for row in report.allrank_table:
        b = getattr(row, branch)
        rows.append([row.r, b.statistic, b.p_value, b.rank_estimate])
    return rows


def _version() -> str:
    try:
        return metadata.version("bootrank")
    except metadata.PackageNotFoundError:
        return "unknown"


def render_json(report: TestReport, cfg: TestConfig | None = None) -> str:
    """Stored results as a JSON document.

    Keys follow the reference command's returned scalars (``cft_*`` for the
    two-step approach, ``cfa_*`` for the analytic one). ``cft_Teststat`` and
    ``cft_Pvalue`` are omitted when the first step rejects. Under ``allrank``,
    ``*_rkmatrix`` rows are ``[r, statistic, p_value, rank_estimate]``. The full
    report is kept under ``"report"``.
    """
    out: dict = {"command": COMMAND_NAME}
    two = report.two_step
    if not two.first_step_rejected:
        out["cft_Teststat"] = two.statistic
        out["cft_Pvalue"] = two.p_value
    out["cft_Rankestimate"] = two.rank_estimate
    if report.analytic is not None:
        out["cfa_Teststat"] = report.analytic.statistic
        out["cfa_Pvalue"] = report.analytic.p_value
        out["cfa_Rankestimate"] = report.analytic.rank_estimate
    if report.allrank_table is not None:
        out["cft_rkmatrix"] = _rkmatrix(report, "two_step")
        if report.analytic is not None:
            out["cfa_rkmatrix"] = _rkmatrix(report, "analytic")
    out["reproducibility"] = {
        "seed": report.seed,
        "B": report.B,
        "scheme": report.scheme,
        "version": _version(),
    }
    out["report"] = report.to_dict()
    return json.dumps(out, indent=2)


def main(argv=None) -> int:
    inv = parse(sys.argv[1:] if argv is None else argv)
    try:
        d = _dataset(inv)
        cfg = config_for(inv, d)
        report = run_test(d, cfg)
    except BootrankError as exc:
        print(f"bootrank: error: {exc}", file=sys.stderr)
        return 1
    if inv.output in ("text", "both"):
        sys.stdout.write(render_text(report, cfg))
    if inv.output in ("json", "both"):
        doc = render_json(report, cfg)
        if inv.out:
            with open(inv.out, "w", encoding="utf-8") as fh:
                fh.write(doc + "\n")
        else:
            sys.stdout.write(doc + "\n")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
