"""Experiment sweeps over the three arms, CSV metrics and figure tables.

A sweep varies one axis (unlearning clients, unlearning ratio, alpha or
beta) and, for every value and seed, runs each requested arm on the same
seeded environment. Rows are written in canonical order (arm, axis value,
seed, round) whatever order the runs finish in.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .config import ARMS, ConfigError, ExperimentConfig
from .federation import RUNNERS, RoundRecord, build_environment, eval_accuracy  # noqa: F401

AXES = ("unlearn_clients", "unlearn_ratio", "alpha", "beta")
CSV_HEADER = (
    "arm", "round", "seed", "axis_value", "acc_remain", "acc_test", "acc_unlearn",
    "comp_time_s", "comm_time_s", "total_time_s", "payload_bytes",
)


class ReportError(ValueError):
    """Raised for empty or malformed results files."""


@dataclass(frozen=True)
class MetricsRow:
    arm: str
    round: int
    seed: int
    axis_value: float
    acc_remain: float
    acc_test: float
    acc_unlearn: float
    comp_time_s: float
    comm_time_s: float
    total_time_s: float
    payload_bytes: int

    def sort_key(self) -> tuple:
        return (self.arm, self.axis_value, self.seed, self.round)


def rows_from_history(arm: str, seed: int, axis_value: float, history: Iterable[RoundRecord]) -> list[MetricsRow]:
    """One row per round. Time columns describe the slowest drone, so
    ``comp_time_s + comm_time_s == total_time_s``; bytes are summed over drones."""
    rows = []
    for rec in history:
        k = rec.critical_client
        rows.append(MetricsRow(
            arm, rec.round, seed, float(axis_value), rec.acc_remain, rec.acc_test, rec.acc_unlearn,
            rec.comp_times[k], rec.comm_times[k], rec.total_time, int(sum(rec.payload_bytes)),
        ))
    return rows


def apply_axis(cfg: ExperimentConfig, axis: str, value: float) -> ExperimentConfig:
    if axis not in AXES:
        raise ConfigError(f"axis must be one of {AXES}")
    if axis == "unlearn_clients":
        if float(value) != int(value):
            raise ConfigError("unlearn_clients values must be integers")
        value = int(value)
    else:
        value = float(value)
    return cfg.replace(**{axis: value}).validate()


def _run_point(task: tuple[ExperimentConfig, str, float, int, tuple[str, ...]]) -> list[MetricsRow]:
    cfg, axis, value, seed, arms = task
    env = build_environment(cfg, seed)
    rows: list[MetricsRow] = []
    for arm in arms:
        _, history = RUNNERS[arm](env)
        rows += rows_from_history(arm, seed, value, history)
    return rows


def run_sweep(
    cfg: ExperimentConfig,
    axis: str,
    values: Sequence[float],
    *,
    seeds: int | None = None,
    arms: Sequence[str] | None = None,
    out_dir=None,
    workers: int = 1,
) -> list[MetricsRow]:
    """Run every (value, seed, arm) combination; returns rows in canonical order.

    With ``out_dir`` the directory receives ``results.csv``, the fully
    resolved ``config.json`` and a ``summary.txt`` of per-value medians.
    """
    cfg.validate()
    arms = tuple(arms or cfg.arms)
    if not arms or not set(arms) <= set(ARMS):
        raise ConfigError(f"arms must be a nonempty subset of {ARMS}")
    if not values:
        raise ConfigError("a sweep needs at least one axis value")
    n_seeds = cfg.seeds if seeds is None else seeds
    tasks = []
    for value in values:
        point = apply_axis(cfg, axis, value)
        for i in range(n_seeds):
            tasks.append((point, axis, float(value), cfg.master_seed + i, arms))

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_point, tasks))
    else:
        chunks = [_run_point(t) for t in tasks]
    rows = sorted((r for chunk in chunks for r in chunk), key=MetricsRow.sort_key)

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        cfg.replace(arms=arms, seeds=n_seeds).dump(out / "config.json")
        write_csv(out / "results.csv", rows)
        (out / "summary.txt").write_text(summarize(rows, axis))
    return rows


def write_csv(path, rows: Iterable[MetricsRow]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for row in rows:
            writer.writerow(_format(row))


def _format(row: MetricsRow) -> list[str]:
    out = []
    for value in astuple(row):
        out.append(repr(value) if isinstance(value, float) else str(value))
    return out


def read_csv(path) -> list[MetricsRow]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ReportError(f"cannot read {path}: {exc}") from exc
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None:
        raise ReportError(f"{path}: empty results file")
    if tuple(header) != CSV_HEADER:
        raise ReportError(f"{path}: unexpected header {header}")
    types = [f.type for f in fields(MetricsRow)]
    rows = []
    for lineno, record in enumerate(reader, start=2):
        if not record:
            continue
        if len(record) != len(CSV_HEADER):
            raise ReportError(f"{path}:{lineno}: expected {len(CSV_HEADER)} fields, got {len(record)}")
        try:
            parsed = [_parse(value, kind) for value, kind in zip(record, types)]
        except ValueError as exc:
            raise ReportError(f"{path}:{lineno}: {exc}") from exc
        rows.append(MetricsRow(*parsed))
    if not rows:
        raise ReportError(f"{path}: no data rows")
    return rows


def _parse(value: str, kind) -> object:
    kind = kind if isinstance(kind, str) else kind.__name__
    if kind == "str":
        return value
    if kind == "int":
        return int(value)
    return float(value)


def median_iqr(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    q1, med, q3 = np.percentile(arr, [25, 50, 75])
    return float(med), float(q3 - q1)


def final_rows(rows: Iterable[MetricsRow]) -> list[MetricsRow]:
    """Last round of every (arm, axis_value, seed) run."""
    last: dict[tuple, MetricsRow] = {}
    for r in rows:
        key = (r.arm, r.axis_value, r.seed)
        if key not in last or r.round > last[key].round:
            last[key] = r
    return [last[k] for k in sorted(last)]


def _groups(rows: Iterable[MetricsRow], key) -> dict[tuple, list[MetricsRow]]:
    out: dict[tuple, list[MetricsRow]] = {}
    for r in rows:
        out.setdefault(key(r), []).append(r)
    return dict(sorted(out.items()))


def summarize(rows: Sequence[MetricsRow], axis: str = "axis") -> str:
    lines = [f"{'arm':<11} {axis:>15} {'acc_remain':>10} {'acc_unlearn':>11} {'acc_test':>8} {'total_s':>12}"]
    finals = final_rows(rows)
    totals = _groups(rows, lambda r: (r.arm, r.axis_value))
    for (arm, value), group in _groups(finals, lambda r: (r.arm, r.axis_value)).items():
        t = sum(r.total_time_s for r in totals[(arm, value)]) / len({r.seed for r in group})
        lines.append(
            f"{arm:<11} {value:>15g} {np.median([r.acc_remain for r in group]):>10.4f} "
            f"{_nanmedian([r.acc_unlearn for r in group]):>11.4f} "
            f"{np.median([r.acc_test for r in group]):>8.4f} {t:>12.4f}"
        )
    return "\n".join(lines) + "\n"


def _nanmedian(values: Sequence[float]) -> float:
    vals = [v for v in values if not math.isnan(v)]
    return float(np.median(vals)) if vals else float("nan")


def report(csv_path, out_dir=None) -> tuple[str, dict[str, Path]]:
    """Aggregate a results CSV into plot-ready tables.

    Writes ``fig2.csv`` (final acc_remain per axis value), ``fig3.csv``
    (acc_remain per round) and ``fig4_{comp,comm,total}.csv`` (per-round
    times), each with median and interquartile range across seeds.
    Nothing is written if the input is empty or malformed.
    """
    rows = read_csv(csv_path)
    out = Path(out_dir) if out_dir is not None else Path(csv_path).parent

    tables: dict[str, list[list]] = {}
    fig2 = [["arm", "axis_value", "acc_remain_median", "acc_remain_iqr"]]
    for (arm, value), group in _groups(final_rows(rows), lambda r: (r.arm, r.axis_value)).items():
        fig2.append([arm, value, *median_iqr([r.acc_remain for r in group])])
    tables["fig2.csv"] = fig2

    fig3 = [["arm", "axis_value", "round", "acc_remain_median", "acc_remain_iqr"]]
    for (arm, value, rnd), group in _groups(rows, lambda r: (r.arm, r.axis_value, r.round)).items():
        fig3.append([arm, value, rnd, *median_iqr([r.acc_remain for r in group])])
    tables["fig3.csv"] = fig3

    by_point = _groups(rows, lambda r: (r.arm, r.axis_value))
    for name, column in (("comp", "comp_time_s"), ("comm", "comm_time_s"), ("total", "total_time_s")):
        table = [["arm", "axis_value", f"{column}_median", f"{column}_iqr"]]
        for (arm, value), group in by_point.items():
            table.append([arm, value, *median_iqr([getattr(r, column) for r in group])])
        tables[f"fig4_{name}.csv"] = table

    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    for name, table in tables.items():
        path = out / name
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            for record in table:
                writer.writerow([repr(v) if isinstance(v, float) else v for v in record])
        paths[name] = path
    return summarize(rows), paths
