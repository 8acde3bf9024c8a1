"""Batch harness: sample truth points, trace them with every method, write reports."""

from __future__ import annotations

import csv
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .cr3bp import SystemConfig
from .halo import sample_truth_points, write_catalog
from .inverse import UNSOLVED, Disposition, HaloSolution, SolverSettings, trace
from .lp_series import build_coefficients

log = logging.getLogger(__name__)

CSV_COLUMNS = ("point_id", "true_az_km", "true_t", "x1", "y1", "z1", "rec_az_km", "rec_t",
               "dx", "dy", "dz", "err_norm", "disposition", "wall_ms")
QUANTILES = (0.5, 0.9, 1.0)
METHODS = (1, 2, 3)


@dataclass(frozen=True)
class RunConfig:
    system: SystemConfig = field(default_factory=SystemConfig)
    solver: SolverSettings = field(default_factory=SolverSettings)
    n_points: int = 1000
    seed: int = 0
    method: int = 3
    out_dir: Path | None = None
    workers: int = 1
    timing: bool = False  # wall_ms is left blank otherwise so reruns are byte-identical
    n_samples: int = 1000

    def __post_init__(self):
        if int(self.n_points) != self.n_points or self.n_points <= 0:
            raise ValueError(f"n_points must be a positive integer, got {self.n_points}")
        if self.method not in METHODS:
            raise ValueError(f"method must be 1, 2 or 3, got {self.method}")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if self.n_samples < 2:
            raise ValueError("n_samples must be at least 2")
        if self.out_dir is not None:
            object.__setattr__(self, "out_dir", Path(self.out_dir))


@dataclass(frozen=True)
class TraceReport:
    """One truth point with the outcome of all three methods."""

    point_id: int
    position: tuple
    true_t: float
    true_az_km: float
    solutions: tuple  # HaloSolution for methods 1, 2, 3
    wall_ms: float = math.nan

    def __post_init__(self):
        sol3 = self.solutions[2]
        if sol3.disposition == Disposition.METHOD2_UNIQUE \
                and self.solutions[0].disposition != Disposition.UNSOLVED:
            raise ValueError("Method2Unique is reserved for points Method 1 left unsolved")

    def solution(self, method: int) -> HaloSolution:
        return self.solutions[method - 1]


@dataclass(frozen=True)
class CsvRecord:
    """One CSV row; ``None`` marks an empty cell."""

    point_id: int
    true_az_km: float
    true_t: float
    x1: float
    y1: float
    z1: float
    rec_az_km: float | None
    rec_t: float | None
    dx: float | None
    dy: float | None
    dz: float | None
    err_norm: float | None
    disposition: str
    wall_ms: float | None

    @classmethod
    def from_report(cls, report: TraceReport, method: int, timing: bool = False) -> "CsvRecord":
        sol = report.solution(method)
        x1, y1, z1 = report.position
        err = sol.per_coordinate_errors if sol.recovered else (None, None, None)
        return cls(point_id=report.point_id, true_az_km=report.true_az_km, true_t=report.true_t,
                   x1=x1, y1=y1, z1=z1, rec_az_km=sol.az_km, rec_t=sol.t,
                   dx=err[0], dy=err[1], dz=err[2],
                   err_norm=sol.error_norm if sol.recovered else None,
                   disposition=sol.disposition.value,
                   wall_ms=report.wall_ms if timing and math.isfinite(report.wall_ms) else None)

    def cells(self) -> list:
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                out.append("")
            elif isinstance(v, float):
                out.append(repr(v))
            else:
                out.append(str(v))
        return out


def _parse_cell(name, text):
    if name == "point_id":
        return int(text)
    if name == "disposition":
        return Disposition(text).value
    if text == "":
        if name in ("true_az_km", "true_t", "x1", "y1", "z1"):
            raise ValueError(f"column {name} may not be empty")
        return None
    return float(text)


def _records(rows, method, timing):
    out = []
    for r in rows:
        out.append(r if isinstance(r, CsvRecord) else CsvRecord.from_report(r, method, timing))
    return out


def emit_csv(reports, path, method: int = 3, timing: bool = False) -> Path:
    """Write one row per point (sorted by point_id) for the chosen method."""
    records = sorted(_records(reports, method, timing), key=lambda r: r.point_id)
    if not records:
        raise ValueError("no reports to write")
    path = Path(path)
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for rec in records:
                writer.writerow(rec.cells())
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def read_csv(path) -> list:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected header {header}")
        return [CsvRecord(*(_parse_cell(n, v) for n, v in zip(CSV_COLUMNS, row))) for row in reader]


def emit_plot_data(reports, path_prefix, length_unit_km: float) -> list:
    """Six files, (x|y|z) error against (t|az): one row per method and recovered point."""
    reports = sorted(reports, key=lambda r: r.point_id)
    if not reports:
        raise ValueError("no reports to write")
    prefix = Path(path_prefix)
    written = []
    for c, coord in enumerate("xyz"):
        for axis in ("t", "az"):
            path = prefix.parent / f"{prefix.name}_{coord}_{axis}.csv"
            label = "t" if axis == "t" else "az_km"
            with path.open("w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(("method", "point_id", label, f"d{coord}", f"d{coord}_km",
                                 "disposition"))
                for k in METHODS:
                    for rep in reports:
                        sol = rep.solution(k)
                        if not sol.recovered:
                            continue
                        err = sol.per_coordinate_errors[c]
                        abscissa = sol.t if axis == "t" else sol.az_km
                        writer.writerow((k, rep.point_id, repr(abscissa), repr(err),
                                         repr(err * length_unit_km), sol.disposition.value))
            written.append(path)
    return written


def _trace_job(args):
    point, settings, coeffs = args
    t0 = time.perf_counter()
    try:
        tr = trace(point.position, settings, coeffs)
        sols = (tr.method1, tr.method2, tr.method3)
    except (ArithmeticError, ValueError, RuntimeError) as exc:
        # a numerical failure on one point is recorded, never fatal to the batch
        log.warning("point %d: trace failed (%s)", point.orbit_id, exc)
        sols = (UNSOLVED, UNSOLVED, UNSOLVED)
    wall = 1e3 * (time.perf_counter() - t0)
    return TraceReport(point_id=point.orbit_id, position=tuple(float(v) for v in point.position),
                       true_t=point.true_t, true_az_km=point.true_az_km, solutions=sols,
                       wall_ms=wall)


def trace_points(points, settings: SolverSettings, coeffs, workers: int = 1) -> list:
    jobs = [(p, settings, coeffs) for p in points]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_trace_job, jobs, chunksize=16))
    else:
        reports = [_trace_job(j) for j in jobs]
    return sorted(reports, key=lambda r: r.point_id)


def _quantiles(values):
    values = np.abs(np.asarray(values, dtype=float))
    if values.size == 0:
        return {q: math.nan for q in QUANTILES}
    return {q: float(np.quantile(values, q)) for q in QUANTILES}


def summarize(reports) -> dict:
    """Per-method counts and error quantiles; solved + unsolved + discarded = n."""
    out = {"n_points": len(reports)}
    for k in METHODS:
        sols = [r.solution(k) for r in reports]
        counts = {d: sum(s.disposition == d for s in sols) for d in Disposition}
        solved = [s for s in sols if s.accepted]
        errs = np.array([s.per_coordinate_errors for s in solved]).reshape(-1, 3)
        out[k] = {
            "solved": len(solved),
            "unsolved": counts[Disposition.UNSOLVED],
            "discarded": counts[Disposition.DISCARDED],
            "common": counts[Disposition.METHOD1_ACCEPTED],
            "refined": counts[Disposition.METHOD2_REFINED],
            "unique": counts[Disposition.METHOD2_UNIQUE],
            "dx": _quantiles(errs[:, 0]),
            "dy": _quantiles(errs[:, 1]),
            "dz": _quantiles(errs[:, 2]),
            "norm": _quantiles([s.error_norm for s in solved]),
        }
    return out


def format_summary(summary: dict) -> str:
    lines = [f"n_points={summary['n_points']}"]
    if "resampled" in summary:
        lines.append(f"resampled_orbits={summary['resampled']}")
    for k in METHODS:
        s = summary[k]
        lines.append(f"method{k}.solved={s['solved']}")
        lines.append(f"method{k}.unsolved={s['unsolved']}")
        lines.append(f"method{k}.discarded={s['discarded']}")
        lines.append(f"method{k}.not_solved={s['unsolved'] + s['discarded']}")
        for key in ("common", "refined", "unique"):
            lines.append(f"method{k}.{key}={s[key]}")
        for key in ("dx", "dy", "dz", "norm"):
            for q, v in s[key].items():
                lines.append(f"method{k}.{key}.q{int(round(100 * q))}={v:.6e}")
    return "\n".join(lines) + "\n"


@dataclass
class ExperimentResult:
    reports: list
    summary: dict
    orbits: list
    wall_s: float
    files: list = field(default_factory=list)


def run_experiment(config: RunConfig) -> ExperimentResult:
    """Deterministic given ``config``: truth orbits, all three traces, optional output files."""
    t0 = time.perf_counter()
    coeffs = build_coefficients(config.system)
    s = config.solver
    truth = sample_truth_points(config.n_points, config.seed, (s.az_lo_km, s.az_hi_km),
                                config.system, n_samples=config.n_samples,
                                workers=config.workers)
    reports = trace_points(truth.points, s, coeffs, config.workers)
    summary = summarize(reports)
    summary["resampled"] = truth.resampled
    result = ExperimentResult(reports, summary, truth.orbits, 0.0)
    if config.out_dir is not None:
        out = config.out_dir
        out.mkdir(parents=True, exist_ok=True)
        result.files.append(emit_csv(reports, out / "results.csv", config.method, config.timing))
        result.files.extend(emit_plot_data(reports, out / "plot", coeffs.length_unit_km))
        result.files.append(write_catalog(truth.orbits, out / "orbits.csv"))
        path = out / "summary.txt"
        path.write_text(format_summary(summary), encoding="utf-8")
        result.files.append(path)
    result.wall_s = time.perf_counter() - t0
    return result

