"""From stimuli to surprisal tables to regression reports.

The surprisal table has one row per (stimulus, ROI, convention, focal
spec). Full-ROI rows are always present, for every ROI including the first,
because the spillover predictors need the full-ROI surprisal of the two
preceding regions.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from .data import DatasetBundle, FrequencyTable, Measure, zipf_frequency
from .marginal import CharLM
from .regression import (
    BASELINE_COLUMNS,
    SPILLOVER_COLUMNS,
    CVConfig,
    cross_validate,
    fit_ols,
    fold_assignments,
    mean_ci,
    permutation_test,
    rng_stream,
)
from .text import Convention, FocalSpec

__all__ = [
    "SURPRISAL_COLUMNS",
    "DesignTable",
    "SurprisalRow",
    "build_design",
    "compute_surprisals",
    "evaluate_specs",
    "plot_rows",
    "read_surprisals",
    "regression_report",
    "report_json",
    "report_rows",
    "rows_to_csv",
    "surprisals_to_csv",
]

SURPRISAL_COLUMNS = (
    "stimulus_id",
    "roi_index",
    "convention",
    "focal_spec",
    "focal_yield",
    "surprisal",
    "status",
)
FULL = FocalSpec.full().label


@dataclass(frozen=True)
class SurprisalRow:
    stimulus_id: str
    roi_index: int
    convention: str
    focal_spec: str
    focal_yield: Optional[str]
    surprisal: Optional[float]
    status: str  # ok | missing | error
    error: Optional[str] = None


def compute_surprisals(
    charlm: CharLM, bundle_rois: dict, specs: Sequence[FocalSpec], include_eos=False
) -> list:
    """Surprisal rows for every stimulus under every convention in ``bundle_rois``.

    ``bundle_rois`` maps convention -> {stimulus_id: ROISequence}, as in
    :attr:`DatasetBundle.rois`. Errors are recorded per row.
    """
    specs = list(specs)
    if not specs:
        return []
    rows = []
    for conv, by_stim in bundle_rois.items():
        conv = Convention.parse(conv).value
        for sid, rois in by_stim.items():
            try:
                full = charlm.roi_surprisals(rois)
                full_err = None
            except Exception as exc:  # noqa: BLE001 - recorded in the table
                full, full_err = None, f"{type(exc).__name__}: {exc}"
            cells = charlm.surprisal_batch(rois, specs, include_eos=include_eos)
            if FULL not in {s.label for s in specs}:
                order = [FocalSpec.full()] + specs
            else:
                order = specs
            for spec in order:
                for k in range(1, len(rois) + 1):
                    if spec.label == FULL and (k == 1 or (k, spec) not in cells):
                        rows.append(_full_row(sid, k, conv, rois.yield_of(k), full, full_err))
                        continue
                    if k == 1:
                        continue
                    c = cells[(k, spec)]
                    rows.append(
                        SurprisalRow(sid, k, conv, spec.label, c.focal_yield, c.value, c.status, c.error)
                    )
    return rows


def _full_row(sid, k, conv, text, values, err):
    if values is None:
        return SurprisalRow(sid, k, conv, FULL, text, None, "error", err)
    v = values[k - 1]
    if math.isnan(v):
        return SurprisalRow(sid, k, conv, FULL, text, None, "error", "context has zero prefix probability")
    return SurprisalRow(sid, k, conv, FULL, text, v, "ok")


def surprisals_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SURPRISAL_COLUMNS)
    for r in rows:
        w.writerow(
            [
                r.stimulus_id,
                r.roi_index,
                r.convention,
                r.focal_spec,
                "" if r.focal_yield is None else r.focal_yield,
                "" if r.surprisal is None else repr(float(r.surprisal)),
                r.status,
            ]
        )
    return buf.getvalue()


def read_surprisals(path) -> list:
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != SURPRISAL_COLUMNS:
            raise ValueError(f"{path}: expected columns {', '.join(SURPRISAL_COLUMNS)}")
        for rowno, r in enumerate(reader, start=2):
            try:
                value = float(r["surprisal"]) if r["surprisal"] else None
                rows.append(
                    SurprisalRow(
                        r["stimulus_id"],
                        int(r["roi_index"]),
                        Convention.parse(r["convention"]).value,
                        FocalSpec.parse(r["focal_spec"]).label,
                        r["focal_yield"] if r["status"] != "missing" else None,
                        value,
                        r["status"],
                    )
                )
            except ValueError as exc:
                raise ValueError(f"{path}:{rowno}: {exc}") from exc
    return rows


# -- design matrices ---------------------------------------------------------


@dataclass
class DesignTable:
    """Rows of one (measure, convention) analysis.

    Only rows with two predecessors are kept. ``focal`` holds one column per
    spec with NaN where the focal surprisal is missing or failed.
    """

    measure: str
    convention: str
    keys: list  # (stimulus_id, roi_index)
    y: np.ndarray
    baseline: np.ndarray
    spillover: np.ndarray
    focal: dict
    n_loaded: int
    n_first_roi: int
    n_no_predecessors: int

    def target(self, spec: str) -> np.ndarray:
        return np.column_stack([self.baseline, self.focal[spec], self.spillover])

    def mask(self, spec: str) -> np.ndarray:
        return np.isfinite(self.target(spec)).all(axis=1)


def build_design(
    bundle: DatasetBundle,
    surprisals: Sequence[SurprisalRow],
    measure,
    convention,
    specs: Sequence[str],
    frequencies: Optional[FrequencyTable] = None,
) -> DesignTable:
    measure = Measure(measure)
    conv = Convention.parse(convention)
    freq = frequencies or bundle.frequencies
    if freq is None:
        raise ValueError("a frequency table is needed for the Zipf predictor")
    rois = bundle.rois[conv]
    table = {
        (r.stimulus_id, r.roi_index, r.focal_spec): r.surprisal if r.status == "ok" else None
        for r in surprisals
        if r.convention == conv.value
    }

    def roi_stats(sid, k):
        text = rois[sid].yield_of(k)
        s = table.get((sid, k, FULL))
        return len(text), zipf_frequency(freq, text), math.nan if s is None else s

    records = sorted(
        (m for m in bundle.measurements if m.measure is measure),
        key=lambda m: (m.stimulus_id, m.roi_index),
    )
    n_first = sum(1 for m in records if m.excluded)
    kept = [m for m in records if not m.excluded and m.roi_index >= 3]
    n_short = sum(1 for m in records if not m.excluded and m.roi_index < 3)
    keys, y, base, spill = [], [], [], []
    focal = {s: [] for s in specs}
    for m in kept:
        sid, k = m.stimulus_id, m.roi_index
        length, zipf, _ = roi_stats(sid, k)
        p1, p2 = roi_stats(sid, k - 1), roi_stats(sid, k - 2)
        keys.append((sid, k))
        y.append(m.value)
        base.append((length, zipf))
        spill.append((p1[0], p1[1], p1[2], p2[0], p2[1], p2[2]))
        for s in specs:
            v = table.get((sid, k, s))
            focal[s].append(math.nan if v is None else v)
    n = len(keys)
    return DesignTable(
        measure.value,
        conv.value,
        keys,
        np.asarray(y, dtype=float),
        np.asarray(base, dtype=float).reshape(n, len(BASELINE_COLUMNS)),
        np.asarray(spill, dtype=float).reshape(n, len(SPILLOVER_COLUMNS)),
        {s: np.asarray(v, dtype=float) for s, v in focal.items()},
        len(records),
        n_first,
        n_short,
    )


# -- evaluation --------------------------------------------------------------


def _ci_dict(values, confidence):
    m, lo, hi = mean_ci(values, confidence)
    return {"mean": m, "ci_low": lo, "ci_high": hi}


def evaluate_specs(design: DesignTable, cfg: CVConfig, seed: int) -> dict:
    """Cross-validated predictive power of every focal spec of ``design``.

    All specs share one fold assignment per seed; rows a spec cannot use are
    masked out of its fits without moving other rows between folds.
    """
    specs = list(design.focal)
    tag = (design.measure, design.convention)
    assignments = fold_assignments(len(design.y), cfg, seed)
    target_cols = BASELINE_COLUMNS + ("surprisal",) + SPILLOVER_COLUMNS
    out, scores = {}, {}
    for spec in specs:
        mask = design.mask(spec)
        entry = {
            "n_loaded": design.n_loaded,
            "n_first_roi": design.n_first_roi,
            "n_no_predecessors": design.n_no_predecessors,
            "n_missing_focal": int((~mask).sum()),
            "n_analyzable": int(mask.sum()),
        }
        try:
            X_t = np.where(mask[:, None], design.target(spec), 0.0)
            res = cross_validate(design.baseline, X_t, design.y, assignments, cfg, mask=mask)
            full = fit_ols(X_t[mask], design.y[mask], target_cols)
        except ValueError as exc:
            entry["error"] = f"{type(exc).__name__}: {exc}"
            out[spec] = entry
            continue
        scores[spec] = res.delta_r2.ravel()
        entry.update(
            delta_r2=_ci_dict(res.delta_r2, cfg.confidence),
            delta_llh=_ci_dict(res.delta_llh, cfg.confidence),
            r2_baseline=float(np.mean(res.r2_baseline)),
            r2_target=float(np.mean(res.r2_target)),
            p_value=permutation_test(
                res.delta_r2,
                alternative="greater",
                n_resamples=cfg.permutations,
                rng=rng_stream(seed, "permutations", *tag, spec),
            ),
            p_value_llh=permutation_test(
                res.delta_llh,
                alternative="greater",
                n_resamples=cfg.permutations,
                rng=rng_stream(seed, "permutations-llh", *tag, spec),
            )
            if np.isfinite(res.delta_llh).all()
            else None,
            intercept=full.intercept,
            coefficients=full.coefficients(),
            pairwise_p={},
        )
        out[spec] = entry
    for a, b in itertools.combinations(sorted(scores), 2):
        p = permutation_test(
            scores[a],
            scores[b],
            alternative="two-sided",
            n_resamples=cfg.permutations,
            rng=rng_stream(seed, "permutations", *tag, a, b),
        )
        out[a]["pairwise_p"][b] = p
        out[b]["pairwise_p"][a] = p
    ranked = sorted(scores, key=lambda s: (-out[s]["delta_r2"]["mean"], s))
    for rank, s in enumerate(ranked, start=1):
        out[s]["rank"] = rank
    return out


def regression_report(
    bundle: DatasetBundle,
    surprisals: Sequence[SurprisalRow],
    cfg: CVConfig,
    seed: int,
    frequencies: Optional[FrequencyTable] = None,
    version: str = "",
) -> dict:
    """Nested report: measure -> convention -> focal spec -> metrics."""
    conventions = [c for c in bundle.rois if any(r.convention == c.value for r in surprisals)]
    specs = list(dict.fromkeys(r.focal_spec for r in surprisals))
    measures = sorted({m.measure for m in bundle.measurements}, key=lambda m: list(Measure).index(m))
    results, errors = {}, []
    for measure in measures:
        results[measure.value] = {}
        for conv in conventions:
            design = build_design(bundle, surprisals, measure, conv, specs, frequencies)
            cell = evaluate_specs(design, cfg, seed)
            results[measure.value][conv.value] = cell
            for spec, entry in cell.items():
                if "error" in entry:
                    errors.append(
                        {
                            "measure": measure.value,
                            "convention": conv.value,
                            "focal_spec": spec,
                            "error": entry["error"],
                        }
                    )
    return {
        "version": version,
        "config": dict(asdict(cfg), seed=int(seed), specs=specs),
        "results": results,
        "errors": errors,
        "warnings": list(bundle.warnings),
    }


def report_rows(report: dict) -> list:
    """One flat row per (measure, convention, spec)."""
    rows = []
    for measure, by_conv in report["results"].items():
        for conv, by_spec in by_conv.items():
            for spec, e in by_spec.items():
                row = {"measure": measure, "convention": conv, "focal_spec": spec}
                for key in ("n_loaded", "n_first_roi", "n_no_predecessors", "n_missing_focal", "n_analyzable"):
                    row[key] = e[key]
                for metric in ("delta_r2", "delta_llh"):
                    for part in ("mean", "ci_low", "ci_high"):
                        row[f"{metric}_{part}"] = e.get(metric, {}).get(part)
                row["p_value"] = e.get("p_value")
                row["p_value_llh"] = e.get("p_value_llh")
                row["rank"] = e.get("rank")
                row["error"] = e.get("error", "")
                rows.append(row)
    return rows


def plot_rows(report: dict) -> list:
    """Tidy rows for bar charts: one per (measure, convention, spec, metric)."""
    rows = []
    for measure, by_conv in report["results"].items():
        for conv, by_spec in by_conv.items():
            for spec, e in by_spec.items():
                if "error" in e:
                    continue
                for metric in ("delta_r2", "delta_llh"):
                    rows.append(
                        {
                            "measure": measure,
                            "convention": conv,
                            "focal_spec": spec,
                            "metric": metric,
                            **e[metric],
                            "p_value": e["p_value" if metric == "delta_r2" else "p_value_llh"],
                        }
                    )
    return rows


def rows_to_csv(rows, columns=None) -> str:
    buf = io.StringIO()
    if not rows and columns is None:
        return ""
    columns = columns or list(rows[0])
    w = csv.DictWriter(buf, columns, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _cell(v) for k, v in r.items()})
    return buf.getvalue()


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def report_json(report: dict) -> str:
    return json.dumps(_clean(report), indent=2, ensure_ascii=False) + "\n"


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        obj = float(obj)
        return obj if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj
