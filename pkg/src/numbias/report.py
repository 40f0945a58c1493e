"""Audit report assembly and serialization (JSON document plus CSV sidecars)."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

import numpy as np

from . import __version__
from .analysis import FeatureCorrelation, FeatureVector, SweepResult
from .calibration import BetaParams, LabelMarginal
from .metrics import histogram
from .pipeline import Run, score_metrics
from .scoring import FinalScore

FLOAT_DIGITS = 12


def _clean(obj: Any) -> Any:
    # 12 significant digits keeps reports stable across BLAS/platform float noise
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return "NaN" if math.isnan(x) else ("Infinity" if x > 0 else "-Infinity")
        x = float(f"{x:.{FLOAT_DIGITS}g}")
        return 0.0 if x == 0 else x
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def dumps(report: dict) -> str:
    return json.dumps(_clean(report), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def write_report(report: dict, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(report), encoding="utf-8")


def sidecar(path: str | Path, suffix: str) -> Path:
    path = Path(path)
    return path.with_name(f"{path.stem}.{suffix}.csv")


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_clean(v) if not isinstance(v, str) else v for v in row])


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def new_report(command: str, run_config: dict) -> dict:
    return {"toolkit_version": __version__, "command": command, "run_config": run_config}


def _mean_or_none(values: Iterable[Optional[float]]) -> Optional[float]:
    vals = [v for v in values if v is not None]
    return math.fsum(vals) / len(vals) if vals else None


def audit_sections(run: Run, transcripts: bool = False) -> dict:
    """Dataset summary, histograms, metrics, mode and per-example rows for one run."""
    valid = [f.value for f in run.finals if f.value is not None]
    samples = [v for s in run.sample_sets for v in s.clipped]
    mode = run.mode()
    ratios = run.mode_ratios(mode)
    rows = []
    for ex, g, f, s, mr in zip(run.examples, run.gold, run.finals, run.sample_sets, ratios):
        row = {
            "id": ex.id,
            "gold": g,
            "score": f.value,
            "n_valid": s.n_valid,
            "n_raw": s.n_raw,
            "mode_ratio": mr,
        }
        if transcripts:
            row["texts"] = run.raw_texts[ex.id]
        rows.append(row)
    return {
        "dataset_summary": {
            "n": len(run.examples),
            "n_valid": len(valid),
            "n_absent": len(run.examples) - len(valid),
            "n_clamped_gold": run.n_clamped_gold,
            "n_backend_errors": len(run.errors),
        },
        "distribution": {
            "model": histogram(valid, run.score_range).as_dict(),
            "gold": histogram(run.gold, run.score_range).as_dict(),
            "raw_samples": histogram(samples, run.score_range).as_dict(),
        },
        "metrics": score_metrics(run.gold, run.finals),
        "mode": {"value": mode, "mean_mode_ratio": _mean_or_none(ratios)},
        "examples": rows,
        "errors": [{"example_id": k, "error": v} for k, v in sorted(run.errors.items())],
    }


def write_histograms(run: Run, out: Path) -> None:
    valid = [f.value for f in run.finals if f.value is not None]
    samples = [v for s in run.sample_sets for v in s.clipped]
    histogram(valid, run.score_range).to_csv(sidecar(out, "model_hist"))
    histogram(run.gold, run.score_range).to_csv(sidecar(out, "gold_hist"))
    histogram(samples, run.score_range).to_csv(sidecar(out, "samples_hist"))


def calibration_section(
    run: Run,
    calibrated: Sequence[FinalScore],
    p: LabelMarginal,
    q: LabelMarginal,
    beta: Optional[BetaParams],
    prior: str,
    smoothing: float,
    pool_size: int,
) -> dict:
    m = score_metrics(run.gold, calibrated)
    return {
        "prior": prior,
        "alpha": beta.alpha if beta else None,
        "beta": beta.beta if beta else None,
        "beta_domain": [beta.domain_lo, beta.domain_hi] if beta else None,
        "mle_converged": beta.converged if beta else None,
        "smoothing": smoothing,
        "marginal_pool": pool_size,
        "p_table": p.as_dict(),
        "q_table": q.as_dict(),
        "kurtosis_calibrated": m["kurtosis_model"],
        "r_calibrated": m["r"],
        "p_calibrated": m["p"],
        "significant_calibrated": m["significant"],
        "n_valid": m["n_valid"],
        "distribution_calibrated": histogram(
            [f.value for f in calibrated if f.value is not None], run.score_range
        ).as_dict(),
        "scores": [{"id": f.example_id, "score": f.value} for f in calibrated],
    }


def sweep_section(result: SweepResult) -> dict:
    return {
        "axis": result.spec.axis.value,
        "best_setting_by_r": result.best_setting_by_r,
        "settings": [
            {
                "setting": s.setting,
                "range": str(s.score_range),
                "temperature": s.temperature,
                "kurtosis": s.kurtosis,
                "r": s.r,
                "p": s.p,
                "n_valid": s.n_valid,
                "error": s.error,
            }
            for s in result.settings
        ],
    }


def write_sweep_csv(result: SweepResult, out: Path) -> None:
    write_csv(
        sidecar(out, "sweep"),
        ["setting", "range", "temperature", "kurtosis", "r", "p", "n_valid", "error"],
        (
            [s.setting, str(s.score_range), s.temperature, s.kurtosis, s.r, s.p, s.n_valid, s.error or ""]
            for s in result.settings
        ),
    )


def features_section(
    ids: Sequence[str],
    features: Sequence[FeatureVector],
    ratios: Sequence[Optional[float]],
    table: Sequence[FeatureCorrelation],
    mode: Optional[int],
) -> dict:
    return {
        "mode": mode,
        "overlap_measure": "jaccard over lowercased whitespace tokens",
        "correlations": [
            {"feature": c.feature, "r": c.r, "p": c.p, "n": c.n, "significant": c.significant} for c in table
        ],
        "examples": [
            {"id": i, "mode_ratio": mr, **vars(fv)} for i, fv, mr in zip(ids, features, ratios)
        ],
    }


def write_features_csv(section: dict, out: Path) -> None:
    write_csv(
        sidecar(out, "features"),
        ["feature", "r", "p", "n", "significant"],
        ([c["feature"], c["r"], c["p"], c["n"], c["significant"]] for c in section["correlations"]),
    )
