"""
Meta-targets: which candidate algorithms are appropriate for a problem.

Candidates are compared on repeated stratified cross-validation accuracies;
the best-mean candidate and everything statistically indistinguishable from
it are appropriate.
"""

import logging
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Any, ClassVar, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .errors import ConfigError, DomainError, MalformedInput, OutOfRangeAccuracy
from .learners import LandmarkKind, MajorityClass, TreeParams, train_landmarker, train_tree
from .parallel import parallel_map
from .stats import friedman_test, holm_procedure, reference_index, wilcoxon_test
from .storage import write_frame
from .tabular import TabularDataset, stratified_folds

TPath = Union[str, Path]

log = logging.getLogger(__name__)

REPETITIONS = 5
FOLDS = 10
DEFAULT_CANDIDATES = ("naive-bayes", "1nn", "tree", "tree:min_leaf=10", "decision-node")


@dataclass(frozen=True, eq=False)
class AccuracyMatrix:
    """k candidates x r runs of accuracies in [0, 1]."""

    names: Tuple[str, ...]
    runs: np.ndarray

    def __post_init__(self) -> None:
        runs = np.array(self.runs, dtype=float, copy=True)
        if runs.ndim != 2 or runs.shape[0] != len(self.names):
            raise MalformedInput(
                f"{len(self.names)} algorithm names for a matrix of shape {runs.shape}"
            )
        if runs.shape[0] < 1:
            raise MalformedInput("accuracy matrix has no algorithms")
        if len(set(self.names)) != len(self.names):
            raise MalformedInput("duplicate algorithm names")
        if np.isnan(runs).any():
            raise MalformedInput("accuracy matrix has missing cells")
        if runs.size and (runs.min() < 0.0 or runs.max() > 1.0):
            raise OutOfRangeAccuracy(
                f"accuracies must lie in [0, 1], got [{runs.min()}, {runs.max()}]"
            )
        runs.flags.writeable = False
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "runs", runs)

    @property
    def k(self) -> int:
        return int(self.runs.shape[0])

    @property
    def r(self) -> int:
        return int(self.runs.shape[1])

    def mean_accuracy(self) -> np.ndarray:
        return self.runs.mean(axis=1)


@dataclass(frozen=True, eq=False)
class MetaTarget:
    bits: np.ndarray
    problem: str = ""
    method: str = "friedman-holm"

    def __post_init__(self) -> None:
        bits = np.array(self.bits, dtype=np.int8, copy=True).reshape(-1)
        if bits.size == 0 or not np.isin(bits, (0, 1)).all():
            raise MalformedInput(f"{self.problem}: meta-target bits must be 0/1")
        if not bits.any():
            raise MalformedInput(f"{self.problem}: meta-target has no appropriate algorithm")
        bits.flags.writeable = False
        object.__setattr__(self, "bits", bits)

    @property
    def k(self) -> int:
        return int(self.bits.size)


#
# candidate learners
#
@dataclass(frozen=True)
class CandidateSpec:
    kind: str
    params: TreeParams = field(default_factory=TreeParams)

    KINDS: ClassVar[Tuple[str, ...]] = ("majority", "tree") + tuple(k.value for k in LandmarkKind)

    def __str__(self) -> str:
        if self.kind != "tree":
            return self.kind
        options = []
        if self.params.min_leaf != TreeParams().min_leaf:
            options.append(f"min_leaf={self.params.min_leaf}")
        if self.params.max_depth is not None:
            options.append(f"max_depth={self.params.max_depth}")
        return "tree" + (":" + ",".join(options) if options else "")

    def train(self, d: TabularDataset, seed: int = 0) -> Any:
        if self.kind == "majority":
            return MajorityClass(d)
        if self.kind == "tree":
            return train_tree(d, self.params)
        return train_landmarker(d, self.kind, seed)


def parse_candidate(text: str) -> CandidateSpec:
    """Parse "kind" or "tree:min_leaf=N,max_depth=D"."""
    kind, _, options = text.strip().partition(":")
    if kind not in CandidateSpec.KINDS:
        raise ConfigError(f"unknown candidate {kind!r}; choose from {', '.join(CandidateSpec.KINDS)}")
    if not options:
        return CandidateSpec(kind)
    if kind != "tree":
        raise ConfigError(f"candidate {kind!r} takes no options")
    values: Dict[str, int] = {}
    for item in options.split(","):
        key, sep, value = item.partition("=")
        key = key.strip()
        if not sep or key not in ("min_leaf", "max_depth"):
            raise ConfigError(f"bad tree option {item!r}")
        try:
            values[key] = int(value)
        except ValueError:
            raise ConfigError(f"tree option {key} needs an integer, got {value!r}") from None
    return CandidateSpec(kind, TreeParams(**values))


def _fold_accuracies(
    task: Tuple[np.ndarray, np.ndarray], d: TabularDataset, candidates: Sequence[CandidateSpec], seed: int
) -> np.ndarray:
    train, test = task
    fit = d.take(train)
    result = np.empty(len(candidates))
    for i, spec in enumerate(candidates):
        model = spec.train(fit, seed)
        result[i] = np.mean(model.predict(d.X[test]) == d.y[test])
    return result


def estimate_accuracy_matrix(
    d: TabularDataset,
    candidates: Sequence[Union[CandidateSpec, str]],
    seed: int = 0,
    repetitions: int = REPETITIONS,
    folds: int = FOLDS,
    jobs: Optional[int] = None,
) -> AccuracyMatrix:
    """repetitions x folds stratified CV accuracies, repetition-major."""
    specs = [c if isinstance(c, CandidateSpec) else parse_candidate(c) for c in candidates]
    if not specs:
        raise ConfigError("no candidate algorithms")
    tasks = []
    for rep in range(repetitions):
        rep_seed = int(np.random.SeedSequence([seed, rep]).generate_state(1)[0])
        plan = stratified_folds(d, folds, rep_seed)
        tasks.extend(plan)
    columns = parallel_map(partial(_fold_accuracies, d=d, candidates=specs, seed=seed), tasks, jobs)
    log.debug("%s: estimated %d x %d accuracies", d.name, len(specs), len(columns))
    return AccuracyMatrix(tuple(str(s) for s in specs), np.column_stack(columns))


def load_accuracy_matrix(path: TPath) -> AccuracyMatrix:
    """Header of algorithm names, one row of accuracies per run."""
    path = Path(path)
    try:
        frame = pd.read_csv(path)
    except (OSError, UnicodeDecodeError, pd.errors.EmptyDataError, pd.errors.ParserError) as e:
        raise MalformedInput(f"{path}: {e}") from e
    if not isinstance(frame.index, pd.RangeIndex):
        raise MalformedInput(f"{path}: rows have more fields than the header")
    if frame.shape[0] == 0:
        raise MalformedInput(f"{path}: no runs")
    if frame.isna().any().any():
        raise MalformedInput(f"{path}: ragged or empty cells")
    try:
        runs = frame.to_numpy(dtype=float).T
    except ValueError as e:
        raise MalformedInput(f"{path}: {e}") from e
    try:
        return AccuracyMatrix(tuple(str(c).strip() for c in frame.columns), runs)
    except OutOfRangeAccuracy as e:
        raise OutOfRangeAccuracy(f"{path}: {e}") from e


def write_accuracy_matrix(acc: AccuracyMatrix, path: TPath) -> None:
    write_frame(path, pd.DataFrame(acc.runs.T, columns=list(acc.names)))


def derive_meta_target(acc: AccuracyMatrix, alpha: float = 0.05, problem: str = "") -> MetaTarget:
    if acc.k < 2 or acc.r < 2:
        raise DomainError(f"{problem}: need k >= 2 and r >= 2, got {acc.k}x{acc.r}")
    if acc.k == 2:
        log.warning("%s: two candidates, using the Wilcoxon signed-rank test", problem)
        result = wilcoxon_test(acc, alpha)
        bits = np.ones(2, dtype=np.int8)
        if result.reject:
            bits[1 - reference_index(acc)] = 0
        return MetaTarget(bits, problem, "wilcoxon")
    result = friedman_test(acc, alpha)
    if not result.reject:
        log.debug("%s: Friedman accepts (p=%.4g), all appropriate", problem, result.p_value)
        return MetaTarget(np.ones(acc.k, dtype=np.int8), problem, "friedman")
    return MetaTarget(holm_procedure(acc, alpha), problem, "friedman-holm")


#
# meta-target tables
#
def write_meta_targets(names: Sequence[str], targets: Sequence[MetaTarget], path: TPath) -> None:
    rows = [[t.problem] + t.bits.tolist() for t in targets]
    write_frame(path, pd.DataFrame(rows, columns=["problem"] + list(names)))


def read_meta_targets(path: TPath) -> Tuple[Tuple[str, ...], List[MetaTarget]]:
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype={"problem": str})
    except (OSError, pd.errors.EmptyDataError, pd.errors.ParserError) as e:
        raise MalformedInput(f"{path}: {e}") from e
    if "problem" not in frame.columns or frame.shape[1] < 2:
        raise MalformedInput(f"{path}: expected a 'problem' column and algorithm bits")
    if frame.isna().any().any():
        raise MalformedInput(f"{path}: ragged or empty cells")
    names = tuple(c for c in frame.columns if c != "problem")
    try:
        bits = frame[list(names)].to_numpy(dtype=np.int64)
    except ValueError as e:
        raise MalformedInput(f"{path}: {e}") from e
    targets = [
        MetaTarget(row, str(problem), "file")
        for problem, row in zip(frame["problem"], bits)
    ]
    return names, targets
