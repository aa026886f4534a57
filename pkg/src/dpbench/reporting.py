"""CSV serialization for trial reports and derived summaries.

Floats are written with repr (shortest roundtrip form), so files parse back
losslessly through the readers here and reruns are byte identical.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

from .harness import ErrorSample, TrialReport

TRIAL_COLUMNS = ["algorithm", "shape", "scale", "domain", "epsilon", "trial", "error"]
SUMMARY_COLUMNS = [
    "algorithm",
    "shape",
    "scale",
    "domain",
    "epsilon",
    "mean",
    "p95",
    "stderr",
    "competitive",
]


def format_domain(axis_sizes: tuple[int, ...]) -> str:
    return "x".join(str(s) for s in axis_sizes)


def parse_domain(text: str) -> tuple[int, ...]:
    return tuple(int(part) for part in text.split("x"))


def _write_rows(path: Path, header: list[str], rows: list[list]) -> None:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    path.write_text(buffer.getvalue(), encoding="utf-8")


def write_trials_csv(reports: list[TrialReport], path: "str | Path") -> None:
    rows = []
    for report in reports:
        for i, sample in enumerate(report.samples):
            rows.append(
                [
                    report.algorithm,
                    report.shape_id,
                    report.scale,
                    format_domain(report.domain),
                    repr(report.epsilon),
                    i,
                    repr(sample.error),
                ]
            )
    _write_rows(Path(path), TRIAL_COLUMNS, rows)


def read_trials_csv(path: "str | Path") -> list[TrialReport]:
    grouped: dict[tuple, list[float]] = {}
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        missing = set(TRIAL_COLUMNS) - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            key = (
                row["algorithm"],
                row["shape"],
                int(row["scale"]),
                parse_domain(row["domain"]),
                float(row["epsilon"]),
            )
            grouped.setdefault(key, []).append(float(row["error"]))
    reports = []
    for (alg, shape, scale, domain, eps), errors in sorted(grouped.items()):
        samples = tuple(ErrorSample(e, 0, i) for i, e in enumerate(errors))
        reports.append(TrialReport(alg, shape, scale, domain, eps, samples))
    return reports


def write_summary_csv(
    reports: list[TrialReport],
    competitive: "set[tuple] | None",
    path: "str | Path",
) -> None:
    """One row per report; ``competitive`` holds (algorithm, setting-key)
    pairs flagged as state of the art for their setting."""
    rows = []
    for report in reports:
        key = (
            report.algorithm,
            report.shape_id,
            report.scale,
            report.domain,
            report.epsilon,
        )
        rows.append(
            [
                report.algorithm,
                report.shape_id,
                report.scale,
                format_domain(report.domain),
                repr(report.epsilon),
                repr(report.mean),
                repr(report.p95),
                repr(report.stderr),
                int(competitive is not None and key in competitive),
            ]
        )
    _write_rows(Path(path), SUMMARY_COLUMNS, rows)


def read_summary_csv(path: "str | Path") -> list[dict]:
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        missing = set(SUMMARY_COLUMNS) - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        rows = []
        for row in reader:
            rows.append(
                {
                    "algorithm": row["algorithm"],
                    "shape": row["shape"],
                    "scale": int(row["scale"]),
                    "domain": parse_domain(row["domain"]),
                    "epsilon": float(row["epsilon"]),
                    "mean": float(row["mean"]),
                    "p95": float(row["p95"]),
                    "stderr": float(row["stderr"]),
                    "competitive": bool(int(row["competitive"])),
                }
            )
        return rows


def write_regret_csv(regrets: dict[str, float], path: "str | Path") -> None:
    rows = [[name, repr(value)] for name, value in sorted(regrets.items())]
    _write_rows(Path(path), ["algorithm", "regret"], rows)


def write_error_vs_scale_csv(summary_rows: list[dict], path: "str | Path") -> None:
    """Long-format export: mean error per (algorithm, scale), averaged over
    shapes, one block per algorithm."""
    grouped: dict[tuple[str, int], list[float]] = {}
    for row in summary_rows:
        grouped.setdefault((row["algorithm"], row["scale"]), []).append(row["mean"])
    rows = [
        [alg, scale, repr(sum(vals) / len(vals))]
        for (alg, scale), vals in sorted(grouped.items())
    ]
    _write_rows(Path(path), ["algorithm", "scale", "mean_error"], rows)


def write_shape_spread_csv(summary_rows: list[dict], path: "str | Path") -> None:
    """Per-dataset dots plus the cross-dataset mean for each algorithm and
    scale (the dot-and-diamond layout)."""
    means: dict[tuple[str, int], float] = {}
    grouped: dict[tuple[str, int], list[float]] = {}
    for row in summary_rows:
        grouped.setdefault((row["algorithm"], row["scale"]), []).append(row["mean"])
    for key, vals in grouped.items():
        means[key] = sum(vals) / len(vals)
    rows = [
        [
            row["algorithm"],
            row["scale"],
            row["shape"],
            repr(row["mean"]),
            repr(means[(row["algorithm"], row["scale"])]),
        ]
        for row in sorted(
            summary_rows,
            key=lambda r: (r["algorithm"], r["scale"], r["shape"], r["epsilon"]),
        )
    ]
    _write_rows(
        Path(path),
        ["algorithm", "scale", "shape", "error", "mean_over_shapes"],
        rows,
    )
