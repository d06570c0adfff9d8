"""Command line: ``spinlab {predict,chsh,herbert,scan} --config FILE``.

A human-readable table goes to stdout. Machine output (CSV or JSON) goes to
``--out``; with ``--format`` and no ``--out`` it replaces the table on stdout.
Exit status: 0 success, 2 configuration error, 3 degenerate run.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
from pathlib import Path
from typing import Any, Sequence

from . import engine
from .config import ExperimentFile
from .errors import DegenerateRunError, SpinLabError
from .models import model_from_name
from .quantum import coincidence_probability, conditional_correlation, smeared_correlation
from .stats import z_for_level

EXIT_OK, EXIT_CONFIG, EXIT_DEGENERATE = 0, 2, 3


def _num(x: float) -> str:
    return repr(float(x))


def _json_safe(x: Any) -> Any:
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    return x


class Table:
    """Rows with a fixed header, rendered as CSV, JSON or an aligned text table."""

    def __init__(self, columns: Sequence[str]):
        self.columns = list(columns)
        self.rows: list[list[Any]] = []

    def add(self, *values: Any) -> None:
        if len(values) != len(self.columns):
            raise ValueError("row width does not match header")
        self.rows.append(list(values))

    @staticmethod
    def _cell(v: Any) -> str:
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, float):
            return _num(v)
        return str(v)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.columns) + "\n")
        for row in self.rows:
            buf.write(",".join(self._cell(v) for v in row) + "\n")
        return buf.getvalue()

    def records(self) -> list[dict[str, Any]]:
        return [dict(zip(self.columns, row)) for row in self.rows]

    def render(self) -> str:
        def short(v: Any) -> str:
            if isinstance(v, float):
                return f"{v:.6g}" if math.isfinite(v) else "nan"
            return self._cell(v)

        cells = [self.columns] + [[short(v) for v in row] for row in self.rows]
        widths = [max(len(r[i]) for r in cells) for i in range(len(self.columns))]
        lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells]
        lines.insert(1, "  ".join("-" * w for w in widths))
        return "\n".join(lines)


def _resolved(doc: ExperimentFile, command: str) -> dict[str, Any]:
    echo = dict(doc.data)
    echo["command"] = command
    return echo


def cmd_predict(doc: ExperimentFile) -> tuple[Table, list[str], dict[str, Any]]:
    """Closed-form coincidence probability and correlations for each setting."""
    pairs = doc.setting_pairs()
    if not pairs:
        raise doc.error((), "predict needs at least one entry in 'settings'")
    table = Table(
        [
            "setting", "first", "second", "theta", "kappa_first", "kappa_second", "eta_first",
            "eta_second", "coincidence_probability", "correlation", "conditional_correlation",
        ]
    )
    for i, ((na, nb), p) in enumerate(zip(doc.setting_names(), pairs)):
        eta = p.first.efficiency * p.second.efficiency
        # no coincidences at zero efficiency: the conditional correlation is undefined
        cond = conditional_correlation(p) if eta > 0 else math.nan
        table.add(
            i, na, nb, p.macro_angle, p.first.kappa, p.second.kappa, p.first.efficiency,
            p.second.efficiency, coincidence_probability(p), smeared_correlation(p), cond,
        )
    return table, [], {}


def cmd_chsh(doc: ExperimentFile) -> tuple[Table, list[str], dict[str, Any]]:
    """Per-run and pooled CHSH statistic from the engine."""
    cfg = doc.run_config()
    if len(cfg.settings) != 4:
        raise doc.error(("settings",), f"chsh needs exactly four settings (A,B), (A,B'), (A',B'), (A',B); got {len(cfg.settings)}")
    report = engine.reproduce(cfg)
    res = report.chsh
    assert res is not None
    table = Table(["run_index", "E1", "E2", "E3", "E4", "S"])
    for m, (e, s) in enumerate(zip(res.per_run_e, res.per_run_s)):
        table.add(m, *e, s)
    summary = {
        "mode": cfg.mode.value,
        "E_hat": list(res.e_hat),
        "E_stderr": list(res.e_stderr),
        "S": res.s,
        "stderr_S": res.stderr_s,
        "z_vs_2": res.z_score,
        "mean_run_S": res.mean_run_s,
        "runs_above_2": res.runs_above(2.0),
    }
    notes = [
        "E_hat = " + ", ".join(f"{e:.6f}±{se:.6f}" for e, se in zip(res.e_hat, res.e_stderr)),
        f"S = {res.s:.6f} ± {res.stderr_s:.6f}   z(S-2) = {res.z_score:.3f}",
        f"runs with S > 2: {res.runs_above(2.0)}/{len(res.per_run_s)}",
    ]
    return table, notes, summary


def cmd_herbert(doc: ExperimentFile) -> tuple[Table, list[str], dict[str, Any]]:
    """Disagreement rates d(θ), d(2θ) with Wilson intervals."""
    thetas = doc.herbert_thetas()
    level = doc.data["herbert"].get("level", 0.9999)
    results = engine.herbert_scan(
        model_from_name(doc.data["model"]),
        thetas,
        doc.data.get("pairs_per_run", engine.DEFAULT_PAIRS),
        doc.seed(),
        level=level,
        workers=doc.data.get("workers", 1),
        **doc.local_analyzer("herbert"),
    )
    table = Table(
        [
            "theta", "d_theta", "d_2theta", "two_d_theta", "ci_theta_low", "ci_theta_high",
            "ci_2theta_low", "ci_2theta_high", "satisfied", "violated", "consistent_with_equality",
        ]
    )
    for r in results:
        table.add(
            r.theta, r.d_theta, r.d_2theta, 2 * r.d_theta, *r.ci_theta, *r.ci_2theta,
            r.satisfied, r.violated, r.consistent_with_equality,
        )
    notes = [f"Wilson intervals at level {level} (z = {z_for_level(level):.4f})"]
    return table, notes, {"level": level}


def cmd_scan(doc: ExperimentFile) -> tuple[Table, list[str], dict[str, Any]]:
    """Model correlation against the singlet prediction over a θ grid."""
    grid = doc.scan_grid()
    points = engine.correlation_scan(
        model_from_name(doc.data["model"]),
        grid,
        doc.data.get("pairs_per_run", engine.DEFAULT_PAIRS),
        doc.seed(),
        workers=doc.data.get("workers", 1),
        **doc.local_analyzer("scan"),
    )
    table = Table(["theta", "E_qm_closed", "E_model_mc", "stderr", "E_model_closed"])
    for p in points:
        table.add(p.theta, p.e_qm_closed, p.e_model_mc, p.stderr, p.e_model_closed)
    return table, [], {}


COMMANDS = {"predict": cmd_predict, "chsh": cmd_chsh, "herbert": cmd_herbert, "scan": cmd_scan}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spinlab", description="Spin-correlation experiment simulator.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, type=Path, help="experiment file (JSON or YAML)")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--pairs", type=int, help="pairs per run (N)")
    parser.add_argument("--runs", type=int, help="runs (M)")
    parser.add_argument("--model", help='"qm-contextual", "bell-sign" or "factorized(m1,m2)"')
    parser.add_argument("--mode", choices=[m.value for m in engine.SamplingMode])
    parser.add_argument("--workers", type=int)
    parser.add_argument("--out", type=Path, help="write machine-readable output here")
    parser.add_argument("--format", choices=["csv", "json"])
    return parser


def run(argv: Sequence[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK

    try:
        doc = ExperimentFile.load(args.config).with_overrides(
            seed=args.seed,
            pairs_per_run=args.pairs,
            runs=args.runs,
            model=args.model,
            mode=args.mode,
            workers=args.workers,
        )
        table, notes, summary = COMMANDS[args.command](doc)
    except DegenerateRunError as exc:
        print(f"spinlab: degenerate run: {exc} (coincidences={exc.coincidences}, pairs={exc.total_pairs})", file=stderr)
        return EXIT_DEGENERATE
    except (SpinLabError, ValueError) as exc:
        print(f"spinlab: {exc}", file=stderr)
        return EXIT_CONFIG

    config_echo = _resolved(doc, args.command)
    fmt = args.format or "csv"
    if fmt == "csv":
        machine = table.to_csv()
    else:
        machine = json.dumps(
            _json_safe({"config": config_echo, "summary": summary, "rows": table.records()}), indent=2
        ) + "\n"

    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(machine)
    if args.out is None and args.format is not None:
        stdout.write(machine)
    else:
        stdout.write(f"# {args.command}: {json.dumps(config_echo, sort_keys=True)}\n")
        stdout.write(table.render() + "\n")
        for line in notes:
            stdout.write(line + "\n")
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
