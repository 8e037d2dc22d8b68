"""Batch certification runs and the summary metrics computed from them."""

from __future__ import annotations

import csv
import json
import logging
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .certify import CertParams, certify
from .diagnostics import sample_curve
from .io import REPORT_SCHEMA, SCHEMA, TRACE_SCHEMA, load_dataset, load_model, write_jsonl
from .models import BaseModel, DataPoint
from .qcrs import QcrsParams, qcrs_optimize
from .rng import derive_seed

log = logging.getLogger(__name__)

MODES = ("fixed", "qcrs", "grid")
DEFAULT_THRESHOLDS = (0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0)


# -- metrics ---------------------------------------------------------------


def qualifying_radius(record: dict) -> float:
    """Radius credited to a record: certified with the true label, else 0."""
    if record.get("status") != "certified":
        return 0.0
    if record.get("true_label") is not None and record.get("label") != record.get("true_label"):
        return 0.0
    return float(record.get("radius") or 0.0)


def _radii(records: Iterable) -> np.ndarray:
    vals = [r if isinstance(r, (int, float)) else qualifying_radius(r) for r in records]
    return np.asarray(vals, dtype=float)


def average_certified_radius(records: Iterable) -> float:
    """Mean qualifying radius over all points; abstentions and misses count as 0."""
    radii = _radii(records)
    if radii.size == 0:
        raise ValueError("no records")
    return float(radii.mean())


def radius_accuracy_table(records: Iterable, thresholds: Sequence[float] = DEFAULT_THRESHOLDS) -> dict[float, float]:
    """Certified accuracy at each radius threshold.

    ``records`` may be result dicts or bare qualifying radii. A point counts
    at threshold ``r`` when it is certified correctly with radius ``>= r``.
    """
    radii = _radii(records)
    if radii.size == 0:
        raise ValueError("no records")
    thresholds = [float(t) for t in thresholds]
    if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        raise ValueError("thresholds must be strictly increasing")
    ok = radii > 0
    return {t: float(np.mean(ok & (radii >= t))) for t in thresholds}


def classwise_sigma_summary(records: Iterable[dict], classes: Sequence[int] | None = None) -> dict[int, dict]:
    """Mean and population std of the chosen sigma per true label."""
    groups: dict[int, list[float]] = {}
    for r in records:
        if r.get("sigma") is None or r.get("true_label") is None:
            continue
        groups.setdefault(int(r["true_label"]), []).append(float(r["sigma"]))
    if classes is not None:
        for c in classes:
            if c not in groups:
                warnings.warn(f"class {c} has no records; omitted from sigma summary")
    return {c: {"mean": float(np.mean(v)), "std": float(np.std(v)), "count": len(v)}
            for c, v in sorted(groups.items())}


def write_table_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


# -- runs ------------------------------------------------------------------


@dataclass
class RunConfig:
    dataset: Path
    model: Path
    mode: str = "fixed"
    sigma: float = 0.25
    cert: CertParams = field(default_factory=CertParams)
    qcrs: QcrsParams | None = None
    grid_sigmas: tuple[float, ...] | None = None
    n_eval: int = 500
    out: Path = Path("out")
    workers: int = 1
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS
    save_curves: bool = False

    def __post_init__(self) -> None:
        self.dataset, self.model, self.out = Path(self.dataset), Path(self.model), Path(self.out)
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.qcrs is None:
            self.qcrs = QcrsParams.for_sigma0(self.sigma)
        if self.mode == "grid":
            if not self.grid_sigmas:
                lo, hi = self.qcrs.sigma_min, self.qcrs.sigma_max
                self.grid_sigmas = tuple(np.linspace(lo, hi, 24).tolist())
            if len(self.grid_sigmas) < 2:
                raise ValueError("grid mode needs at least two sigmas")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")


@dataclass
class AcrReport:
    acr: float
    certified_accuracy: dict[float, float]
    total_forward_passes: int
    wall_time: float
    records_path: str
    num_points: int
    num_errors: int = 0
    sigma_summary: dict[int, dict] | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schema"] = REPORT_SCHEMA
        d["certified_accuracy"] = {repr(k): v for k, v in self.certified_accuracy.items()}
        if self.sigma_summary is not None:
            d["sigma_summary"] = {str(k): v for k, v in self.sigma_summary.items()}
        return d


def _record(point: DataPoint, mode: str, sigma: float, outcome, seed: int, extra_passes: int = 0) -> dict:
    rec = {
        "schema": SCHEMA, "id": point.id, "mode": mode, "sigma": float(sigma),
        "status": "certified" if outcome.certified else "abstain",
        "label": outcome.label if outcome.certified else None,
        "true_label": point.label,
        "pa_lower": float(outcome.pa_lower), "radius": float(outcome.radius),
        "forward_passes": int(outcome.forward_passes + extra_passes),
        "certify_forward_passes": int(outcome.forward_passes), "seed": int(seed),
    }
    rec["correct"] = bool(outcome.certified and outcome.label == point.label)
    rec["misclassified"] = bool(outcome.certified and outcome.label != point.label)
    return rec


def process_point(model: BaseModel, point: DataPoint, config: RunConfig) -> tuple[dict, dict | None, str | None]:
    """Certify one point under ``config``; returns (record, trace, curve_csv)."""
    seed = derive_seed(config.cert.seed, "point", point.id)
    cert = replace(config.cert, seed=derive_seed(seed, "certify"))
    trace = curve_csv = None
    try:
        if config.mode == "fixed":
            outcome = certify(model, point.x, config.sigma, cert)
            return _record(point, "fixed", config.sigma, outcome, seed), None, None
        if config.mode == "qcrs":
            params = replace(config.qcrs, seed=derive_seed(seed, "qcrs"))
            sigma, opt = qcrs_optimize(model, point.x, params, alpha=config.cert.alpha)
            outcome = certify(model, point.x, sigma, cert)
            rec = _record(point, "qcrs", sigma, outcome, seed, opt.forward_passes)
            rec["rejected"] = opt.rejected
            trace = {"schema": TRACE_SCHEMA, "id": point.id, **opt.to_dict()}
        else:
            curve = sample_curve(model, point.x, config.grid_sigmas, config.n_eval,
                                 derive_seed(seed, "grid"), config.cert.alpha)
            sigma = float(curve.sigmas[curve.argmax()])
            grid_passes = config.n_eval * len(config.grid_sigmas)
            outcome = certify(model, point.x, sigma, cert)
            rec = _record(point, "grid", sigma, outcome, seed, grid_passes)
            trace = {"schema": TRACE_SCHEMA, "id": point.id, "sigmas": curve.sigmas.tolist(),
                     "radii": curve.radii.tolist(), "pa_lower": curve.pa_lower.tolist(),
                     "chosen_sigma": sigma, "forward_passes": grid_passes}
            if config.save_curves:
                curve_csv = curve.to_csv()
        rec["optimizer_forward_passes"] = rec["forward_passes"] - rec["certify_forward_passes"]
        return rec, trace, curve_csv
    except Exception as exc:  # recorded per point, never dropped
        log.exception("point %s failed", point.id)
        return {"schema": SCHEMA, "id": point.id, "mode": config.mode, "status": "error",
                "error": f"{type(exc).__name__}: {exc}", "true_label": point.label,
                "label": None, "radius": 0.0, "forward_passes": 0, "seed": int(seed)}, None, None


def _work(args):
    model, point, config = args
    return process_point(model, point, config)


def run(config: RunConfig) -> AcrReport:
    """Certify every dataset point and write records, traces and summaries.

    Output files in ``config.out``: ``records.jsonl``, ``traces.jsonl``
    (optimizer modes), ``report.json``, ``radius_accuracy.csv`` and
    ``sigma_summary.csv``. Records are sorted by id and are a pure function
    of the config, whatever the worker count.
    """
    start = time.perf_counter()
    model = load_model(config.model)
    points = load_dataset(config.dataset, model.dimension)
    config.out.mkdir(parents=True, exist_ok=True)

    jobs = [(model, p, config) for p in points]
    if config.workers == 1:
        results = [_work(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_work, jobs, chunksize=max(1, len(jobs) // (4 * config.workers))))

    records = [r for r, _, _ in results]
    records_path = config.out / "records.jsonl"
    write_jsonl(records, records_path)
    traces = [t for _, t, _ in results if t is not None]
    if traces:
        write_jsonl(traces, config.out / "traces.jsonl")
    if config.save_curves:
        curve_dir = config.out / "curves"
        curve_dir.mkdir(exist_ok=True)
        for rec, _, text in results:
            if text is not None:
                (curve_dir / f"{rec['id']}.csv").write_text(text)

    report = summarize(records, config.thresholds, config.mode != "fixed", str(records_path))
    report.wall_time = time.perf_counter() - start
    write_report(report, config.out)
    return report


def summarize(records: list[dict], thresholds=DEFAULT_THRESHOLDS, sigma_summary: bool = True,
              records_path: str = "") -> AcrReport:
    return AcrReport(
        acr=average_certified_radius(records),
        certified_accuracy=radius_accuracy_table(records, thresholds),
        total_forward_passes=int(sum(r.get("forward_passes", 0) for r in records)),
        wall_time=0.0,
        records_path=records_path,
        num_points=len(records),
        num_errors=sum(r.get("status") == "error" for r in records),
        sigma_summary=classwise_sigma_summary(records) if sigma_summary else None,
    )


def write_report(report: AcrReport, out: Path) -> None:
    out = Path(out)
    (out / "report.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    write_table_csv(out / "radius_accuracy.csv", ["radius", "certified_accuracy"],
                    [[repr(k), repr(v)] for k, v in report.certified_accuracy.items()])
    if report.sigma_summary:
        write_table_csv(out / "sigma_summary.csv", ["class", "mean_sigma", "std_sigma", "count"],
                        [[c, repr(s["mean"]), repr(s["std"]), s["count"]]
                         for c, s in report.sigma_summary.items()])
