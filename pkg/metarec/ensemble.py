"""
The recommendation ensemble.

One binary decision tree per (family combination, algorithm) pair forms the
model matrix.  Models are kept or dropped per algorithm column by their
validation accuracy and by how different their mistakes are from those of
the better models already kept; the kept models of a column average their
probability that the algorithm is appropriate.
"""

import logging
from dataclasses import asdict, dataclass, field
from enum import Enum
from functools import partial
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.stats import rankdata

from .errors import BundleError, LengthMismatch, MalformedInput
from .learners import DecisionTree, TreeParams, train_tree
from .metadata import FamilyCombo, assemble_meta_dataset, br_transform
from .metafeatures import MetaFeatureGroupSet
from .metatarget import MetaTarget
from .parallel import parallel_map
from .stats import build_contingency, diversity_verdict
from .storage import atomic_directory, dumps_json, file_digest, read_json, write_frame, write_text
from .tabular import stratified_assignment

TPath = Union[str, Path]

log = logging.getLogger(__name__)

ACCURACY_FLOOR = 0.5
DEFAULT_THRESHOLD = 0.5
BUNDLE_FORMAT = 1
MANIFEST = "manifest.json"
FLAGS = "flags.csv"


class FilterMode(str, Enum):
    ALL = "all"
    ACCURATE = "accurate"
    DIVERSE = "diverse"
    ACCURATE_AND_DIVERSE = "accurate-and-diverse"

    @property
    def filters_accuracy(self) -> bool:
        return self in (FilterMode.ACCURATE, FilterMode.ACCURATE_AND_DIVERSE)

    @property
    def filters_diversity(self) -> bool:
        return self in (FilterMode.DIVERSE, FilterMode.ACCURATE_AND_DIVERSE)


@dataclass(frozen=True, eq=False)
class ModelOutputs:
    """Predicted and true labels of one model on the validation rows."""

    predicted: np.ndarray
    truth: np.ndarray

    def __post_init__(self) -> None:
        if np.shape(self.predicted) != np.shape(self.truth):
            raise LengthMismatch(
                f"{np.size(self.predicted)} predictions for {np.size(self.truth)} labels"
            )

    @property
    def correct(self) -> np.ndarray:
        return np.asarray(self.predicted) == np.asarray(self.truth)

    @property
    def accuracy(self) -> float:
        return float(self.correct.mean()) if np.size(self.truth) else 0.0


@dataclass(frozen=True, eq=False)
class ModelMatrix:
    """t combinations x k algorithms of binary trees."""

    models: Tuple[Tuple[DecisionTree, ...], ...]
    combos: Tuple[FamilyCombo, ...]
    algorithms: Tuple[str, ...]
    params: TreeParams = field(default_factory=TreeParams)

    @property
    def t(self) -> int:
        return len(self.combos)

    @property
    def k(self) -> int:
        return len(self.algorithms)

    @property
    def size(self) -> int:
        return sum(len(row) for row in self.models)

    def probabilities(self, groups: Sequence[MetaFeatureGroupSet]) -> np.ndarray:
        """n x t x k probabilities of "appropriate"."""
        P = np.empty((len(groups), self.t, self.k))
        for i, combo in enumerate(self.combos):
            X = np.array([combo.features(g) for g in groups], dtype=float).reshape(len(groups), -1)
            for j, tree in enumerate(self.models[i]):
                P[:, i, j] = tree.predict_proba_batch(X)[:, 1]
        return P


@dataclass(frozen=True, eq=False)
class FlagMatrix:
    flags: np.ndarray

    def __post_init__(self) -> None:
        flags = np.array(self.flags, dtype=np.int8, copy=True)
        flags.flags.writeable = False
        object.__setattr__(self, "flags", flags)

    @classmethod
    def everything(cls, t: int, k: int) -> "FlagMatrix":
        return cls(np.ones((t, k), dtype=np.int8))

    @property
    def kept(self) -> np.ndarray:
        """Number of kept models per algorithm column."""
        return self.flags.sum(axis=0)


@dataclass(frozen=True, eq=False)
class ValidationRecord:
    accuracies: np.ndarray
    outputs: Tuple[Tuple[ModelOutputs, ...], ...]

    def column(self, j: int) -> Tuple[np.ndarray, List[ModelOutputs]]:
        return self.accuracies[:, j], [row[j] for row in self.outputs]


@dataclass(frozen=True, eq=False)
class Recommendation:
    algorithms: Tuple[str, ...]
    probabilities: np.ndarray
    picks: np.ndarray
    ranks: np.ndarray

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "algorithm": list(self.algorithms),
            "probability": self.probabilities,
            "pick": self.picks.astype(int),
            "rank": self.ranks,
        })


#
# training
#
def _train_row(
    combo: FamilyCombo,
    features: Sequence[MetaFeatureGroupSet],
    targets: Sequence[MetaTarget],
    algorithms: Sequence[str],
    params: TreeParams,
) -> Tuple[DecisionTree, ...]:
    m = assemble_meta_dataset(features, targets, combo, algorithms)
    return tuple(train_tree(b.as_tabular(), params) for b in br_transform(m))


def train_model_matrix(
    features: Sequence[MetaFeatureGroupSet],
    targets: Sequence[MetaTarget],
    combos: Sequence[FamilyCombo],
    params: TreeParams = TreeParams(),
    algorithms: Optional[Sequence[str]] = None,
    jobs: Optional[int] = None,
) -> ModelMatrix:
    if not combos:
        raise LengthMismatch("no family combinations to train")
    if len(features) != len(targets):
        raise LengthMismatch(f"{len(features)} meta-feature rows but {len(targets)} meta-targets")
    k = targets[0].k if targets else 0
    algorithms = tuple(algorithms) if algorithms is not None else tuple(f"A{j + 1}" for j in range(k))
    train = partial(
        _train_row, features=features, targets=targets, algorithms=algorithms, params=params
    )
    models = parallel_map(train, combos, jobs)
    log.debug("trained %d x %d base models on %d problems", len(combos), len(algorithms), len(features))
    return ModelMatrix(tuple(models), tuple(combos), algorithms, params)


def validate(
    matrix: ModelMatrix,
    features: Sequence[MetaFeatureGroupSet],
    targets: Sequence[MetaTarget],
) -> ValidationRecord:
    """Accuracies and outputs of every base model on validation meta-data."""
    if len(features) != len(targets):
        raise LengthMismatch(f"{len(features)} meta-feature rows but {len(targets)} meta-targets")
    truth = np.array([t.bits for t in targets], dtype=np.int64).reshape(len(targets), matrix.k)
    return validation_record(matrix.probabilities(features), truth)


def validation_record(P: np.ndarray, truth: np.ndarray) -> ValidationRecord:
    # argmax over (not, appropriate) keeps "not" on an exact tie
    predicted = (P > 0.5).astype(np.int64)
    _, t, k = P.shape
    outputs = tuple(
        tuple(ModelOutputs(predicted[:, i, j], truth[:, j]) for j in range(k))
        for i in range(t)
    )
    accuracies = np.array([[o.accuracy for o in row] for row in outputs]).reshape(t, k)
    return ValidationRecord(accuracies, outputs)


#
# filtering
#
def model_filter(
    accs: Sequence[float],
    outs: Sequence[ModelOutputs],
    alpha: float = 0.05,
    mode: Union[FilterMode, str] = FilterMode.ACCURATE_AND_DIVERSE,
) -> np.ndarray:
    """Flags of the models one algorithm column keeps."""
    mode = FilterMode(mode)
    accs = np.asarray(accs, dtype=float)
    if accs.shape[0] != len(outs):
        raise LengthMismatch(f"{accs.shape[0]} accuracies for {len(outs)} output sequences")
    t = accs.shape[0]
    flags = np.ones(t, dtype=np.int8)
    if t == 0:
        return flags
    truth = np.asarray(outs[0].truth)
    for o in outs:
        if np.shape(o.truth) != truth.shape:
            raise LengthMismatch("models were validated on different row counts")

    if mode.filters_accuracy:
        flags[accs < ACCURACY_FLOOR] = 0

    # by accuracy, ties to the lower combination
    order = sorted(range(t), key=lambda i: (-accs[i], i))
    if mode.filters_diversity:
        labels = [truth.max(initial=0)] + [np.max(o.predicted, initial=0) for o in outs]
        K = max(int(max(labels)) + 1, 2)
        for pos, i in enumerate(order):
            if not flags[i]:
                continue
            for j in order[pos + 1:]:
                if not flags[j]:
                    continue
                table = build_contingency(outs[i].predicted, outs[j].predicted, truth, K)
                if not diversity_verdict(table, alpha).diverse:
                    flags[j] = 0

    if not flags.any():
        flags[order[0]] = 1
    return flags


def filter_matrix(
    record: ValidationRecord,
    alpha: float = 0.05,
    mode: Union[FilterMode, str] = FilterMode.ACCURATE_AND_DIVERSE,
) -> FlagMatrix:
    t, k = record.accuracies.shape
    flags = np.empty((t, k), dtype=np.int8)
    for j in range(k):
        accs, outs = record.column(j)
        flags[:, j] = model_filter(accs, outs, alpha, mode)
    return FlagMatrix(flags)


#
# combination and ranking
#
def combine(P: np.ndarray, flags: FlagMatrix) -> np.ndarray:
    """Average of the kept models' probabilities per column; P is (..., t, k)."""
    f = flags.flags.astype(float)
    return (P * f).sum(axis=-2) / f.sum(axis=0)


def ensemble_predict(matrix: ModelMatrix, flags: FlagMatrix, x: MetaFeatureGroupSet) -> np.ndarray:
    return combine(matrix.probabilities([x])[0], flags)


def rank_algorithms(probs: Sequence[float]) -> np.ndarray:
    """1 = most probable; tied probabilities share their average rank."""
    return rankdata(-np.asarray(probs, dtype=float), method="average")


def recommend(
    probs: Sequence[float],
    threshold: float = DEFAULT_THRESHOLD,
    algorithms: Optional[Sequence[str]] = None,
) -> Recommendation:
    probs = np.asarray(probs, dtype=float)
    if algorithms is None:
        algorithms = [f"A{j + 1}" for j in range(probs.size)]
    return Recommendation(
        tuple(algorithms),
        probs,
        (probs > threshold).astype(np.int8),
        rank_algorithms(probs),
    )


def half_split(Y: np.ndarray, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Two equal halves, stratified by label pattern when every pattern
    occurs at least twice."""
    Y = np.asarray(Y)
    n = Y.shape[0]
    _, patterns, counts = np.unique(Y, axis=0, return_inverse=True, return_counts=True)
    patterns = np.asarray(patterns).reshape(-1)
    if n and counts.min() >= 2:
        half = stratified_assignment(patterns, 2, rng)
    else:
        half = np.zeros(n, dtype=np.int64)
        half[rng.permutation(n)[(n + 1) // 2:]] = 1
    return np.flatnonzero(half == 0), np.flatnonzero(half == 1)


@dataclass(frozen=True, eq=False)
class Ensemble:
    matrix: ModelMatrix
    flags: FlagMatrix
    mode: FilterMode = FilterMode.ACCURATE_AND_DIVERSE
    alpha: float = 0.05
    record: Optional[ValidationRecord] = None

    @property
    def algorithms(self) -> Tuple[str, ...]:
        return self.matrix.algorithms

    def predict(self, groups: Sequence[MetaFeatureGroupSet]) -> np.ndarray:
        return combine(self.matrix.probabilities(groups), self.flags)

    def recommend(self, group: MetaFeatureGroupSet, threshold: float = DEFAULT_THRESHOLD) -> Recommendation:
        return recommend(self.predict([group])[0], threshold, self.algorithms)


def fit_ensemble(
    features: Sequence[MetaFeatureGroupSet],
    targets: Sequence[MetaTarget],
    combos: Sequence[FamilyCombo],
    algorithms: Optional[Sequence[str]] = None,
    params: TreeParams = TreeParams(),
    alpha: float = 0.05,
    mode: Union[FilterMode, str] = FilterMode.ACCURATE_AND_DIVERSE,
    seed: int = 0,
    jobs: Optional[int] = None,
) -> Ensemble:
    """Train on one half of the meta-data, filter on the other."""
    mode = FilterMode(mode)
    if len(features) != len(targets):
        raise LengthMismatch(f"{len(features)} meta-feature rows but {len(targets)} meta-targets")
    Y = np.array([t.bits for t in targets])
    train, valid = half_split(Y, np.random.default_rng(seed))
    matrix = train_model_matrix(
        [features[i] for i in train], [targets[i] for i in train], combos, params, algorithms, jobs
    )
    if mode is FilterMode.ALL or valid.size == 0:
        return Ensemble(matrix, FlagMatrix.everything(matrix.t, matrix.k), mode, alpha)
    record = validate(matrix, [features[i] for i in valid], [targets[i] for i in valid])
    flags = filter_matrix(record, alpha, mode)
    log.info(
        "kept %.1f of %d models per algorithm (%s)", float(flags.kept.mean()), matrix.t, mode.value
    )
    return Ensemble(matrix, flags, mode, alpha, record)


#
# persistence
#
def _model_name(i: int, j: int) -> str:
    return f"models/model_{i:02d}_{j:02d}.json"


def save_bundle(ensemble: Ensemble, path: TPath, config: Optional[Dict[str, Any]] = None) -> None:
    """Write the bundle directory; it appears only once complete."""
    matrix = ensemble.matrix
    with atomic_directory(path) as staging:
        (staging / "models").mkdir()
        names = []
        for i in range(matrix.t):
            for j in range(matrix.k):
                name = _model_name(i, j)
                write_text(staging / name, dumps_json(matrix.models[i][j].to_dict()))
                names.append(name)
        flags = pd.DataFrame(ensemble.flags.flags, columns=list(matrix.algorithms))
        flags.insert(0, "combo", [c.combo_id for c in matrix.combos])
        write_frame(staging / FLAGS, flags)
        names.append(FLAGS)
        manifest = {
            "format": BUNDLE_FORMAT,
            "algorithms": list(matrix.algorithms),
            "combos": [{"id": c.combo_id, "members": list(c.members)} for c in matrix.combos],
            "params": asdict(matrix.params),
            "mode": ensemble.mode.value,
            "alpha": ensemble.alpha,
            "config": config or {},
            "digests": {name: file_digest(staging / name) for name in names},
        }
        write_text(staging / MANIFEST, dumps_json(manifest))
    log.info("saved ensemble bundle %s (%d models)", path, matrix.size)


def load_bundle(path: TPath) -> Ensemble:
    path = Path(path)
    try:
        manifest = read_json(path / MANIFEST)
    except (OSError, ValueError) as e:
        raise BundleError(f"{path}: cannot read manifest: {e}") from e
    try:
        if manifest["format"] != BUNDLE_FORMAT:
            raise BundleError(f"{path}: unsupported bundle format {manifest['format']!r}")
        digests = manifest["digests"]
        algorithms = tuple(manifest["algorithms"])
        combos = tuple(FamilyCombo(tuple(c["members"]), int(c["id"])) for c in manifest["combos"])
        params = TreeParams(**manifest["params"])
        mode = FilterMode(manifest["mode"])
        alpha = float(manifest["alpha"])
    except (KeyError, TypeError, ValueError) as e:
        raise BundleError(f"{path}: bad manifest: {e}") from e

    for name, digest in digests.items():
        try:
            actual = file_digest(path / name)
        except OSError as e:
            raise BundleError(f"{path}: missing {name}") from e
        if actual != digest:
            raise BundleError(f"{path}: {name} does not match its digest")

    models = []
    for i in range(len(combos)):
        row = []
        for j in range(len(algorithms)):
            name = _model_name(i, j)
            if name not in digests:
                raise BundleError(f"{path}: manifest does not list {name}")
            try:
                row.append(DecisionTree.from_dict(read_json(path / name)))
            except (ValueError, MalformedInput) as e:
                raise BundleError(f"{path}: {name}: {e}") from e
        models.append(tuple(row))

    if FLAGS not in digests:
        raise BundleError(f"{path}: manifest does not list {FLAGS}")
    frame = pd.read_csv(path / FLAGS)
    try:
        flags = FlagMatrix(frame[list(algorithms)].to_numpy(dtype=np.int8))
    except (KeyError, ValueError) as e:
        raise BundleError(f"{path}: bad flags table: {e}") from e
    if flags.flags.shape != (len(combos), len(algorithms)) or (flags.kept < 1).any():
        raise BundleError(f"{path}: flags table does not fit the model matrix")

    matrix = ModelMatrix(tuple(models), combos, algorithms, params)
    log.debug("loaded bundle %s: %d x %d models", path, matrix.t, matrix.k)
    return Ensemble(matrix, flags, mode, alpha)


def write_recommendation(rec: Recommendation, path: TPath) -> None:
    write_frame(path, rec.to_frame())
