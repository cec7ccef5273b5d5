"""
Recommendation quality.

Per-problem ranking metrics, the repeated cross-validation experiment that
compares the ensemble with every single-combination base model, and the
cross-family correlation of meta-features.
"""

import logging
from dataclasses import asdict, dataclass, field
from functools import partial
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .ensemble import (
    FilterMode, FlagMatrix, combine, filter_matrix, half_split,
    rank_algorithms, train_model_matrix, validation_record,
)
from .errors import DegenerateTarget, DomainError, LengthMismatch, TooFewInstances
from .learners import TreeParams
from .metadata import feature_combinations
from .metafeatures import FamilyId, MetaFeatureGroupSet
from .metatarget import MetaTarget
from .parallel import parallel_map
from .storage import write_frame, write_json

TPath = Union[str, Path]

log = logging.getLogger(__name__)

MIN_META_INSTANCES = 20
# box-plot notch half-width factor
NOTCH = 1.57
ENSEMBLE = "En"


def _check(ranks: Sequence[float], truth: Sequence[int]) -> Tuple[np.ndarray, np.ndarray]:
    ranks = np.asarray(ranks, dtype=float)
    truth = np.asarray(truth, dtype=np.int64)
    if ranks.shape != truth.shape:
        raise LengthMismatch(f"{ranks.size} ranks for {truth.size} labels")
    positives = int(truth.sum())
    if positives == 0 or positives == truth.size:
        raise DegenerateTarget("need both appropriate and inappropriate algorithms")
    return ranks, truth


def _ranked_order(ranks: np.ndarray) -> np.ndarray:
    """Best rank first; equal ranks in ascending index order."""
    return np.lexsort((np.arange(ranks.size), ranks))


def ranking_loss(ranks: Sequence[float], truth: Sequence[int]) -> float:
    """Fraction of (appropriate, inappropriate) pairs where the appropriate
    algorithm is ranked strictly worse."""
    ranks, truth = _check(ranks, truth)
    good = ranks[truth == 1]
    bad = ranks[truth == 0]
    return float(np.mean(good[:, None] > bad[None, :]))


def precision_at(ranks: Sequence[float], truth: Sequence[int], m: int) -> float:
    ranks, truth = _check(ranks, truth)
    if not 1 <= m <= ranks.size:
        raise DomainError(f"m must lie in [1, {ranks.size}], got {m}")
    return float(truth[_ranked_order(ranks)[:m]].sum() / m)


def average_precision(ranks: Sequence[float], truth: Sequence[int]) -> float:
    ranks, truth = _check(ranks, truth)
    hits = truth[_ranked_order(ranks)]
    precision = np.cumsum(hits) / np.arange(1, hits.size + 1)
    return float((precision * hits).sum() / hits.sum())


@dataclass(frozen=True)
class MetricRecord:
    problem: str
    ranking_loss: float
    precision: Dict[int, float]
    average_precision: float

    def values(self) -> Dict[str, float]:
        out = {"ranking_loss": self.ranking_loss, "average_precision": self.average_precision}
        out.update({f"precision@{m}": v for m, v in sorted(self.precision.items())})
        return out


def score(
    probs: Sequence[float], truth: Sequence[int], problem: str = "", at: Sequence[int] = (1,)
) -> MetricRecord:
    ranks = rank_algorithms(probs)
    return MetricRecord(
        problem,
        ranking_loss(ranks, truth),
        {m: precision_at(ranks, truth, m) for m in at if m <= len(ranks)},
        average_precision(ranks, truth),
    )


#
# cross-validation
#
@dataclass(frozen=True)
class CvConfig:
    alpha: float = 0.05
    modes: Tuple[FilterMode, ...] = (FilterMode.ACCURATE_AND_DIVERSE,)
    seed: int = 0
    repetitions: int = 5
    folds: int = 10
    params: TreeParams = field(default_factory=TreeParams)
    precision_at: Tuple[int, ...] = (1,)
    jobs: Optional[int] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "modes", tuple(FilterMode(m) for m in self.modes))
        if not self.modes:
            raise DomainError("at least one filter mode is required")
        if self.repetitions < 1 or self.folds < 2:
            raise DomainError("need repetitions >= 1 and folds >= 2")

    def ensemble_name(self, mode: FilterMode) -> str:
        return ENSEMBLE if len(self.modes) == 1 else f"{ENSEMBLE}:{mode.value}"

    def echo(self) -> Dict[str, Any]:
        out = asdict(self)
        out["modes"] = [m.value for m in self.modes]
        out["precision_at"] = list(self.precision_at)
        out.pop("jobs")
        return out


@dataclass(frozen=True, eq=False)
class Cell:
    repetition: int
    fold: int
    rest: np.ndarray
    test: np.ndarray


@dataclass
class CellResult:
    repetition: int
    fold: int
    records: Dict[str, List[MetricRecord]]
    kept: Dict[str, List[int]]
    skipped: int


@dataclass
class CvReport:
    config: Dict[str, Any]
    algorithms: Tuple[str, ...]
    variants: Tuple[str, ...]
    cells: List[CellResult]
    summary: Dict[str, pd.DataFrame]
    kept: Dict[str, float]

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "config": self.config,
            "algorithms": list(self.algorithms),
            "variants": list(self.variants),
            "kept_models": self.kept,
            "cells": [
                {
                    "repetition": c.repetition,
                    "fold": c.fold,
                    "skipped": c.skipped,
                    "kept": c.kept,
                    "metrics": {
                        variant: _means(records) for variant, records in c.records.items()
                    },
                }
                for c in self.cells
            ],
            "summary": {
                metric: frame.set_index("variant").to_dict(orient="index")
                for metric, frame in self.summary.items()
            },
        }


def _means(records: Sequence[MetricRecord]) -> Dict[str, Optional[float]]:
    if not records:
        return {}
    frame = pd.DataFrame([r.values() for r in records])
    return {name: float(frame[name].mean()) for name in frame.columns}


def plan_cells(n: int, config: CvConfig) -> List[Cell]:
    """Disjoint test folds per repetition; the remainder splits in halves."""
    cells = []
    for rep in range(config.repetitions):
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, rep]))
        fold_of = np.empty(n, dtype=np.int64)
        fold_of[rng.permutation(n)] = np.arange(n) % config.folds
        for fold in range(config.folds):
            test = np.flatnonzero(fold_of == fold)
            rest = np.flatnonzero(fold_of != fold)
            cells.append(Cell(rep, fold, rest, test))
    return cells


def _run_cell(
    cell: Cell,
    features: Sequence[MetaFeatureGroupSet],
    Y: np.ndarray,
    targets: Sequence[MetaTarget],
    algorithms: Tuple[str, ...],
    config: CvConfig,
) -> CellResult:
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, cell.repetition, cell.fold]))
    first, second = half_split(Y[cell.rest], rng)
    train, valid = cell.rest[first], cell.rest[second]
    combos = feature_combinations(len(FamilyId))
    matrix = train_model_matrix(
        [features[i] for i in train], [targets[i] for i in train], combos, config.params, algorithms
    )
    record = validation_record(matrix.probabilities([features[i] for i in valid]), Y[valid])
    P = matrix.probabilities([features[i] for i in cell.test])

    variants: Dict[str, np.ndarray] = {}
    kept: Dict[str, List[int]] = {}
    for mode in config.modes:
        if mode is FilterMode.ALL or valid.size == 0:
            flags = FlagMatrix.everything(matrix.t, matrix.k)
        else:
            flags = filter_matrix(record, config.alpha, mode)
        kept[mode.value] = flags.kept.tolist()
        variants[config.ensemble_name(mode)] = combine(P, flags)
    for i, combo in enumerate(matrix.combos):
        variants[str(combo.combo_id)] = P[:, i, :]

    records: Dict[str, List[MetricRecord]] = {name: [] for name in variants}
    skipped = 0
    for row, idx in enumerate(cell.test):
        truth = Y[idx]
        if truth.sum() in (0, truth.size):
            skipped += 1
            continue
        for name, probs in variants.items():
            records[name].append(score(probs[row], truth, features[idx].problem, config.precision_at))
    log.debug(
        "cell %d/%d: train=%d valid=%d test=%d skipped=%d",
        cell.repetition, cell.fold, train.size, valid.size, cell.test.size, skipped,
    )
    return CellResult(cell.repetition, cell.fold, records, kept, skipped)


def summarize(values: Sequence[float]) -> Dict[str, float]:
    """Mean, median and the median notch interval."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        return {"n": 0, "mean": float("nan"), "median": float("nan"),
                "q1": float("nan"), "q3": float("nan"),
                "notch_low": float("nan"), "notch_high": float("nan")}
    q1, median, q3 = np.percentile(x, [25, 50, 75])
    half = NOTCH * (q3 - q1) / np.sqrt(x.size)
    return {
        "n": int(x.size),
        "mean": float(x.mean()),
        "median": float(median),
        "q1": float(q1),
        "q3": float(q3),
        "notch_low": float(median - half),
        "notch_high": float(median + half),
    }


def run_cross_validation(
    features: Sequence[MetaFeatureGroupSet],
    targets: Sequence[MetaTarget],
    config: CvConfig = CvConfig(),
    algorithms: Optional[Sequence[str]] = None,
) -> CvReport:
    n = len(features)
    if n != len(targets):
        raise LengthMismatch(f"{n} meta-feature rows but {len(targets)} meta-targets")
    if n < max(MIN_META_INSTANCES, config.folds):
        raise TooFewInstances(f"cross-validation needs {MIN_META_INSTANCES} meta-instances, got {n}")
    Y = np.array([t.bits for t in targets], dtype=np.int64)
    k = Y.shape[1]
    algorithms = tuple(algorithms) if algorithms is not None else tuple(f"A{j + 1}" for j in range(k))

    cells = plan_cells(n, config)
    run = partial(
        _run_cell, features=features, Y=Y, targets=targets, algorithms=algorithms, config=config
    )
    results = parallel_map(run, cells, config.jobs)
    log.info("evaluated %d cells", len(results))

    variants = tuple(results[0].records) if results else ()
    metric_names = ["ranking_loss", "average_precision"] + [f"precision@{m}" for m in config.precision_at]
    skipped = sum(r.skipped for r in results)
    summary = {}
    for metric in metric_names:
        rows = []
        for variant in variants:
            scored = (rec.values() for r in results for rec in r.records[variant])
            values = [v[metric] for v in scored if metric in v]
            rows.append({"variant": variant, **summarize(values), "skipped": skipped})
        summary[metric] = pd.DataFrame(rows)
    kept = {
        mode.value: float(np.mean([r.kept[mode.value] for r in results]))
        for mode in config.modes
    }
    return CvReport(config.echo(), algorithms, variants, results, summary, kept)


def write_report(report: CvReport, out: TPath) -> None:
    out = Path(out)
    write_json(out / "report.json", report.to_dict())
    for metric, frame in report.summary.items():
        write_frame(out / f"{metric}.csv", frame)


#
# meta-feature correlation
#
def family_correlation(features: Sequence[MetaFeatureGroupSet]) -> np.ndarray:
    """Mean absolute Pearson correlation between the measures of two families.

    Constant measures are left out; a family with no varying measure gets a
    NaN row and column.
    """
    if len(features) < 3:
        raise TooFewInstances(f"correlation needs 3 problems, got {len(features)}")
    blocks = []
    for family in FamilyId:
        values = np.array([g.vector(family).values for g in features], dtype=float)
        values = values[:, values.std(axis=0) > 0]
        blocks.append((values - values.mean(axis=0)) / values.std(axis=0))
    q = len(blocks)
    result = np.full((q, q), np.nan)
    n = len(features)
    for a in range(q):
        for b in range(q):
            if blocks[a].shape[1] == 0 or blocks[b].shape[1] == 0:
                continue
            r = np.clip(blocks[a].T @ blocks[b] / n, -1.0, 1.0)
            result[a, b] = float(np.abs(r).mean())
    return result


def write_correlation(matrix: np.ndarray, path: TPath) -> None:
    labels = [str(int(f)) for f in FamilyId]
    frame = pd.DataFrame(matrix, columns=labels)
    frame.insert(0, "family", labels)
    write_frame(path, frame)
