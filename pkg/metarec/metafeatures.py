"""
Dataset characterization.

Five families of measures describe a classification problem:

1. statistical and information-theoretic summaries
2. the shape of an induced decision tree
3. accuracies of cheap landmark learners
4. geometric complexity of the class boundary
5. supports of one- and two-item sets over discretized attributes

Every family has a fixed arity so vectors from different problems line up.
A measure that is undefined for a problem is emitted as 0 and flagged as
imputed.
"""

import logging
import warnings
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import stats
from scipy.sparse.csgraph import minimum_spanning_tree

from .errors import ArityMismatch, MalformedInput, NoAttributes, TooFewInstances
from .learners import (
    LANDMARK_ORDER, Leaf, MixedDistance, NearestNeighbor, TreeParams,
    entropy, train_landmarker, train_tree,
)
from .storage import write_frame
from .tabular import TabularDataset, stratified_folds

TPath = Union[str, Path]

log = logging.getLogger(__name__)

SENTINEL = 0.0
TRIM_FRACTION = 0.05
OUTLIER_IQR = 3.0
LANDMARK_FOLDS = 10
COMPLEXITY_SAMPLE = 1000
STRUCTURE_BINS = 10
QUANTILES = np.linspace(0.0, 1.0, 9)


class FamilyId(IntEnum):
    STATISTICAL = 1
    MODEL_STRUCTURE = 2
    LANDMARKING = 3
    COMPLEXITY = 4
    STRUCTURAL = 5


def _quantile_names(prefix: str) -> Tuple[str, ...]:
    return (f"{prefix}.Min",) + tuple(f"{prefix}.Q{i}" for i in range(1, 8)) + (f"{prefix}.Max",)


FAMILY_MEASURES: Dict[FamilyId, Tuple[str, ...]] = {
    FamilyId.STATISTICAL: (
        "Ins.Num", "Attr.Num", "Target.Num", "Target.Min", "Target.Max",
        "Pro.Bin", "Pro.Nom", "Pro.Num", "Pro.MissIns", "Pro.MissValues",
        "Mean.Geo", "Mean.Harm", "Mean.Trim", "Mad", "Var", "Std", "Prcitile",
        "Int.Range", "Prop.AttrWithOutlier", "Skewness", "Kurtosis",
        "Max.eig", "Min.eig", "Can.corr", "Grav.cent", "MeanAbsCoef",
        "H.C", "H.X", "M.CX", "En.attr", "Ns.ratio",
    ),
    FamilyId.MODEL_STRUCTURE: (
        "Tree.Height", "Tree.Width", "Node.Num", "Leaf.Num",
        "Level.Max", "Level.Mean", "Level.Dev",
        "Branch.Long", "Branch.Short", "Branch.Mean", "Branch.Dev",
        "Attr.Min", "Attr.Max", "Attr.Mean", "Attr.Dev",
    ),
    FamilyId.LANDMARKING: (
        "Naive.Bayes", "One.NN", "Elite.NN", "Decision.Node", "Random.Node", "Worst.Node",
    ),
    FamilyId.COMPLEXITY: (
        "Bound.Len", "Adherence.Prop", "Intra/Inter.Ratio", "NN.Nonlinerity",
        "Linear.Nonlinerity", "Fisher.Ratio", "Ins/Attr",
    ),
    FamilyId.STRUCTURAL: _quantile_names("OneItem") + _quantile_names("TwoItem"),
}

FAMILY_ARITY: Dict[FamilyId, int] = {f: len(names) for f, names in FAMILY_MEASURES.items()}


@dataclass(frozen=True, eq=False)
class MetaFeatureVector:
    family: FamilyId
    names: Tuple[str, ...]
    values: np.ndarray
    imputed: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float, copy=True)
        imputed = np.array(self.imputed, dtype=bool, copy=True)
        if not (len(self.names) == values.shape[0] == imputed.shape[0]):
            raise ArityMismatch(
                f"family {int(self.family)}: {len(self.names)} names, "
                f"{values.shape[0]} values, {imputed.shape[0]} flags"
            )
        values.flags.writeable = False
        imputed.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "imputed", imputed)

    @property
    def columns(self) -> List[str]:
        return [f"{int(self.family)}.{name}" for name in self.names]

    @classmethod
    def from_measures(
        cls, family: FamilyId, measures: Dict[str, Optional[float]]
    ) -> "MetaFeatureVector":
        """Apply the sentinel policy to raw measures (None or non-finite)."""
        names = FAMILY_MEASURES[family]
        values = np.empty(len(names))
        imputed = np.zeros(len(names), dtype=bool)
        for i, name in enumerate(names):
            v = measures.get(name)
            if v is None or not np.isfinite(v):
                values[i] = SENTINEL
                imputed[i] = True
            else:
                values[i] = float(v)
        return cls(family, names, values, imputed)


@dataclass(frozen=True)
class MetaFeatureGroupSet:
    problem: str
    vectors: Tuple[MetaFeatureVector, ...]

    def __post_init__(self) -> None:
        families = [v.family for v in self.vectors]
        if sorted(families) != list(FamilyId):
            raise ArityMismatch(f"{self.problem}: expected families 1-5, got {families}")
        object.__setattr__(
            self, "vectors", tuple(sorted(self.vectors, key=lambda v: v.family))
        )

    def vector(self, family: Union[FamilyId, int]) -> MetaFeatureVector:
        return self.vectors[int(family) - 1]

    def combined(self, families: Iterable[int]) -> np.ndarray:
        """Values of the given families concatenated in ascending order."""
        return np.concatenate([self.vector(f).values for f in sorted(families)])

    def columns(self, families: Iterable[int] = tuple(FamilyId)) -> List[str]:
        return [c for f in sorted(families) for c in self.vector(f).columns]


def _quietly(fn: Callable[[], Optional[float]]) -> Optional[float]:
    with warnings.catch_warnings(), np.errstate(all="ignore"):
        warnings.simplefilter("ignore", RuntimeWarning)
        try:
            return fn()
        except (ValueError, ZeroDivisionError, np.linalg.LinAlgError):
            return None


def _mean_finite(values: Sequence[Optional[float]]) -> Optional[float]:
    finite = [v for v in values if v is not None and np.isfinite(v)]
    return float(np.mean(finite)) if finite else None


def _shifted(x: np.ndarray) -> np.ndarray:
    return np.abs(x) + 1.0 if np.any(x <= 0) else x


def _known(d: TabularDataset, j: int) -> np.ndarray:
    col = d.X[:, j]
    return col[~np.isnan(col)]


def _numeric_block(d: TabularDataset) -> np.ndarray:
    """Mean-imputed numeric columns that are not constant."""
    cols = []
    for j in d.numeric_indices:
        col = d.X[:, j]
        known = col[~np.isnan(col)]
        if known.size == 0:
            continue
        filled = np.where(np.isnan(col), known.mean(), col)
        if np.ptp(filled) > 0:
            cols.append(filled)
    return np.column_stack(cols) if cols else np.empty((d.n_instances, 0))


def _orthonormal_basis(A: np.ndarray) -> np.ndarray:
    A = A - A.mean(axis=0)
    if A.shape[1] == 0:
        return A
    u, s, _ = np.linalg.svd(A, full_matrices=False)
    tol = s.max() * max(A.shape) * np.finfo(float).eps if s.size else 0.0
    return u[:, s > tol]


def canonical_correlation(A: np.ndarray, B: np.ndarray) -> Optional[float]:
    """First canonical correlation between two column blocks."""
    Ua = _orthonormal_basis(A)
    Ub = _orthonormal_basis(B)
    if Ua.shape[1] == 0 or Ub.shape[1] == 0:
        return None
    s = np.linalg.svd(Ua.T @ Ub, compute_uv=False)
    return float(np.clip(s.max(), 0.0, 1.0))


def _per_attribute(d: TabularDataset, fn: Callable[[np.ndarray], float]) -> Optional[float]:
    values = []
    for j in d.numeric_indices:
        known = _known(d, j)
        if known.size:
            values.append(_quietly(lambda: float(fn(known))))
    return _mean_finite(values)


def _has_outliers(x: np.ndarray) -> bool:
    med = np.median(x)
    spread = OUTLIER_IQR * stats.iqr(x)
    return bool(np.any((x < med - spread) | (x > med + spread)))


def extract_statistical(d: TabularDataset) -> MetaFeatureVector:
    n, m = d.n_instances, d.n_attributes
    counts = d.class_counts
    observed = counts[counts > 0]
    missing = np.isnan(d.X)
    m_nom = len(d.nominal_indices)
    m_num = len(d.numeric_indices)

    out: Dict[str, Optional[float]] = {
        "Ins.Num": n,
        "Attr.Num": m,
        "Target.Num": observed.size,
        "Target.Min": observed.min() / n if n else None,
        "Target.Max": observed.max() / n if n else None,
        "Pro.Nom": m_nom / m if m else None,
        "Pro.Num": m_num / m if m else None,
        "Pro.MissIns": missing.any(axis=1).mean() if m and n else None,
        "Pro.MissValues": missing.mean() if m and n else None,
    }
    binary = sum(1 for j in range(m) if np.unique(_known(d, j)).size == 2)
    out["Pro.Bin"] = binary / m if m else None

    out["Mean.Geo"] = _per_attribute(d, lambda x: stats.gmean(_shifted(x)))
    out["Mean.Harm"] = _per_attribute(d, lambda x: stats.hmean(_shifted(x)))
    out["Mean.Trim"] = _per_attribute(d, lambda x: stats.trim_mean(x, TRIM_FRACTION))
    out["Mad"] = _per_attribute(d, lambda x: np.mean(np.abs(x - x.mean())))
    out["Var"] = _per_attribute(d, np.var)
    out["Std"] = _per_attribute(d, np.std)
    out["Prcitile"] = _per_attribute(d, lambda x: np.percentile(x, 75))
    out["Int.Range"] = _per_attribute(d, stats.iqr)
    out["Skewness"] = _per_attribute(d, stats.skew)
    out["Kurtosis"] = _per_attribute(d, stats.kurtosis)
    with_known = [j for j in d.numeric_indices if _known(d, j).size]
    out["Prop.AttrWithOutlier"] = (
        sum(_has_outliers(_known(d, j)) for j in with_known) / len(with_known)
        if with_known else None
    )

    Z = _numeric_block(d)
    if Z.shape[1] >= 1 and n >= 2:
        corr = np.corrcoef(Z, rowvar=False) if Z.shape[1] > 1 else np.ones((1, 1))
        eig = np.linalg.eigvalsh(corr)
        out["Max.eig"] = float(eig.max())
        out["Min.eig"] = float(eig.min())
        if Z.shape[1] > 1:
            off = np.abs(corr[~np.eye(Z.shape[1], dtype=bool)])
            out["MeanAbsCoef"] = float(off.mean())
        onehot = np.eye(d.n_classes)[d.y][:, d.observed_classes]
        out["Can.corr"] = _quietly(lambda: canonical_correlation(Z, onehot))
        out["Grav.cent"] = _quietly(lambda: _gravity_center(d, Z))

    out.update(_information_measures(d))
    return MetaFeatureVector.from_measures(FamilyId.STATISTICAL, out)


def _gravity_center(d: TabularDataset, Z: np.ndarray) -> Optional[float]:
    """Distance between the centroids of the two most frequent classes."""
    if d.observed_classes.size < 2:
        return None
    scaled = (Z - Z.mean(axis=0)) / Z.std(axis=0)
    first, second = np.argsort(-d.class_counts, kind="stable")[:2]
    a = scaled[d.y == first].mean(axis=0)
    b = scaled[d.y == second].mean(axis=0)
    return float(np.linalg.norm(a - b))


def mutual_information(x: np.ndarray, y: np.ndarray, kx: int, ky: int) -> float:
    joint = np.zeros((kx, ky))
    np.add.at(joint, (x, y), 1.0)
    return float(entropy(joint.sum(axis=1)) + entropy(joint.sum(axis=0)) - entropy(joint.ravel()))


def _information_measures(d: TabularDataset) -> Dict[str, Optional[float]]:
    hc = float(entropy(d.class_counts))
    hx, mi = [], []
    for j in d.nominal_indices:
        col = d.X[:, j]
        known = ~np.isnan(col)
        if not known.any():
            continue
        x = col[known].astype(np.int64)
        k = d.attributes[j].n_categories
        hx.append(float(entropy(np.bincount(x, minlength=k))))
        mi.append(mutual_information(x, d.y[known], k, d.n_classes))
    mean_hx = float(np.mean(hx)) if hx else None
    mean_mi = float(np.mean(mi)) if mi else None
    informative = mean_mi is not None and mean_mi > 1e-12
    return {
        "H.C": hc,
        "H.X": mean_hx,
        "M.CX": mean_mi,
        "En.attr": hc / mean_mi if informative else None,
        "Ns.ratio": mean_hx / mean_mi - 1.0 if informative else None,
    }


def extract_model_structure(d: TabularDataset, params: TreeParams = TreeParams()) -> MetaFeatureVector:
    tree = train_tree(d, params)
    levels: Dict[int, int] = {}
    branches: List[int] = []
    occurrences = np.zeros(d.n_attributes)
    for node, level in tree.nodes():
        levels[level] = levels.get(level, 0) + 1
        if isinstance(node, Leaf):
            branches.append(level)
        else:
            occurrences[node.attribute] += 1
    per_level = np.array([levels[k] for k in sorted(levels)], dtype=float)
    lengths = np.array(branches, dtype=float)

    out: Dict[str, Optional[float]] = {
        "Tree.Height": per_level.size,
        "Tree.Width": per_level.max(),
        "Node.Num": per_level.sum(),
        "Leaf.Num": lengths.size,
        "Level.Max": per_level.max(),
        "Level.Mean": per_level.mean(),
        "Level.Dev": per_level.std(),
        "Branch.Long": lengths.max(),
        "Branch.Short": lengths.min(),
        "Branch.Mean": lengths.mean(),
        "Branch.Dev": lengths.std(),
    }
    if d.n_attributes:
        out.update({
            "Attr.Min": occurrences.min(),
            "Attr.Max": occurrences.max(),
            "Attr.Mean": occurrences.mean(),
            "Attr.Dev": occurrences.std(),
        })
    return MetaFeatureVector.from_measures(FamilyId.MODEL_STRUCTURE, out)


def extract_landmarking(d: TabularDataset, seed: int = 0) -> MetaFeatureVector:
    """Stratified 10-fold accuracy of each landmark learner."""
    if d.n_instances < LANDMARK_FOLDS:
        raise TooFewInstances(
            f"{d.name}: landmarking needs {LANDMARK_FOLDS} instances, got {d.n_instances}"
        )
    if d.observed_classes.size < 2:
        raise TooFewInstances(f"{d.name}: landmarking needs two classes")
    plan = stratified_folds(d, LANDMARK_FOLDS, seed)
    correct = np.zeros(len(LANDMARK_ORDER))
    for train, test in plan:
        fit = d.take(train)
        for i, kind in enumerate(LANDMARK_ORDER):
            model = train_landmarker(fit, kind, seed)
            correct[i] += np.count_nonzero(model.predict(d.X[test]) == d.y[test])
    accuracy = correct / d.n_instances
    names = FAMILY_MEASURES[FamilyId.LANDMARKING]
    return MetaFeatureVector.from_measures(
        FamilyId.LANDMARKING, dict(zip(names, accuracy.tolist()))
    )


#
# problem complexity
#
def _linear_design(d: TabularDataset, X: np.ndarray, X_ref: np.ndarray) -> np.ndarray:
    """Bias, z-scored numeric and one-hot nominal columns."""
    parts = [np.ones((X.shape[0], 1))]
    for j, attr in enumerate(d.attributes):
        ref = X_ref[:, j]
        known = ref[~np.isnan(ref)]
        col = X[:, j]
        if attr.is_nominal:
            onehot = np.zeros((X.shape[0], attr.n_categories))
            ok = ~np.isnan(col)
            onehot[np.flatnonzero(ok), col[ok].astype(np.int64)] = 1.0
            parts.append(onehot)
            continue
        mu = known.mean() if known.size else 0.0
        sd = known.std() if known.size else 0.0
        filled = np.where(np.isnan(col), mu, col)
        parts.append(((filled - mu) / sd if sd > 0 else filled - mu)[:, None])
    return np.hstack(parts)


def interpolate_pairs(
    d: TabularDataset, count: int, rng: np.random.Generator
) -> Tuple[np.ndarray, np.ndarray]:
    """Points between random same-class pairs, labelled with that class."""
    X = np.empty((count, d.n_attributes))
    y = rng.choice(d.y, size=count)
    members = {c: np.flatnonzero(d.y == c) for c in d.observed_classes}
    nominal = np.array([a.is_nominal for a in d.attributes], dtype=bool)
    for i, c in enumerate(y):
        a, b = rng.choice(members[c], size=2)
        lam = rng.random()
        xa, xb = d.X[a], d.X[b]
        point = np.where(nominal, np.where(lam < 0.5, xa, xb), xa + lam * (xb - xa))
        X[i] = np.where(np.isnan(xa), xb, np.where(np.isnan(xb), xa, point))
    return X, y


def _boundary_length(D: np.ndarray, y: np.ndarray) -> float:
    n = D.shape[0]
    # zero distances would vanish from the sparse graph
    weights = D + 1e-9
    np.fill_diagonal(weights, 0.0)
    mst = minimum_spanning_tree(weights).tocoo()
    return float(np.count_nonzero(y[mst.row] != y[mst.col]) / (n - 1))


def _adherence_proportion(D: np.ndarray, y: np.ndarray) -> float:
    enemy = np.where(y[:, None] != y[None, :], D, np.inf)
    radius = enemy.min(axis=1)
    same = (y[:, None] == y[None, :]) & ~np.eye(y.size, dtype=bool)
    # inside[i, j]: ball i lies within ball j
    inside = same & (D + radius[:, None] <= radius[None, :] + 1e-12)
    mutual = inside & inside.T
    lower = np.arange(y.size)[None, :] < np.arange(y.size)[:, None]
    absorbed = (inside & (~mutual | lower)).any(axis=1)
    return float(np.count_nonzero(~absorbed) / y.size)


def _intra_inter_ratio(D: np.ndarray, y: np.ndarray) -> Optional[float]:
    same = (y[:, None] == y[None, :]) & ~np.eye(y.size, dtype=bool)
    intra = np.where(same, D, np.inf).min(axis=1)
    inter = np.where(y[:, None] != y[None, :], D, np.inf).min(axis=1)
    intra = intra[np.isfinite(intra)]
    inter = inter[np.isfinite(inter)]
    if intra.size == 0 or inter.size == 0 or inter.mean() <= 0:
        return None
    return float(intra.mean() / inter.mean())


def _fisher_ratio(d: TabularDataset) -> Optional[float]:
    best = None
    classes = d.observed_classes
    for j in d.numeric_indices:
        col = d.X[:, j]
        groups = [col[(d.y == c) & ~np.isnan(col)] for c in classes]
        for a in range(len(groups)):
            for b in range(a + 1, len(groups)):
                ga, gb = groups[a], groups[b]
                if ga.size == 0 or gb.size == 0:
                    continue
                denom = ga.var() + gb.var()
                if denom <= 0:
                    continue
                ratio = (ga.mean() - gb.mean()) ** 2 / denom
                best = ratio if best is None else max(best, ratio)
    return best


def extract_complexity(d: TabularDataset, seed: int = 0) -> MetaFeatureVector:
    if d.observed_classes.size < 2:
        raise TooFewInstances(f"{d.name}: complexity measures need two classes")
    rng = np.random.default_rng(seed)
    sample = d
    if d.n_instances > COMPLEXITY_SAMPLE:
        rows = np.sort(rng.choice(d.n_instances, COMPLEXITY_SAMPLE, replace=False))
        sample = d.take(rows)
        if sample.observed_classes.size < 2:
            sample = d
    y = sample.y
    D = MixedDistance(sample.attributes, sample.X)(sample.X, sample.X)

    Xs, ys = interpolate_pairs(sample, 2 * sample.n_instances, rng)
    nn = NearestNeighbor(sample)
    nn_error = float(np.mean(nn.predict(Xs) != ys))

    A = _linear_design(sample, sample.X, sample.X)
    targets = np.where(np.eye(sample.n_classes)[y] > 0, 1.0, -1.0)
    W = np.linalg.lstsq(A, targets, rcond=None)[0]
    scores = _linear_design(sample, Xs, sample.X) @ W
    observed = sample.observed_classes
    linear_pred = observed[np.argmax(scores[:, observed], axis=1)]
    linear_error = float(np.mean(linear_pred != ys))

    out: Dict[str, Optional[float]] = {
        "Bound.Len": _boundary_length(D, y),
        "Adherence.Prop": _adherence_proportion(D, y),
        "Intra/Inter.Ratio": _intra_inter_ratio(D, y),
        "NN.Nonlinerity": nn_error,
        "Linear.Nonlinerity": linear_error,
        "Fisher.Ratio": _fisher_ratio(sample),
        "Ins/Attr": d.n_instances / d.n_attributes if d.n_attributes else None,
    }
    return MetaFeatureVector.from_measures(FamilyId.COMPLEXITY, out)


#
# structural information
#
def item_codes(d: TabularDataset) -> np.ndarray:
    """Per-attribute item index (category or equal-frequency bin); -1 = missing."""
    codes = np.full(d.X.shape, -1, dtype=np.int64)
    for j, attr in enumerate(d.attributes):
        col = d.X[:, j]
        known = ~np.isnan(col)
        if not known.any():
            continue
        if attr.is_nominal:
            codes[known, j] = col[known].astype(np.int64)
        elif np.ptp(col[known]) == 0:
            # a constant column has a single bin edge, so qcut yields no bins
            codes[known, j] = 0
        else:
            bins = pd.qcut(col[known], STRUCTURE_BINS, labels=False, duplicates="drop")
            codes[known, j] = np.asarray(bins, dtype=np.int64)
    return codes


def item_supports(d: TabularDataset) -> Tuple[np.ndarray, np.ndarray]:
    """Supports of observed one-item and cross-attribute two-item sets."""
    n = d.n_instances
    codes = item_codes(d)
    one: List[np.ndarray] = []
    two: List[np.ndarray] = []
    for a in range(d.n_attributes):
        ca = codes[:, a]
        _, counts = np.unique(ca[ca >= 0], return_counts=True)
        one.append(counts / n)
        for b in range(a + 1, d.n_attributes):
            cb = codes[:, b]
            ok = (ca >= 0) & (cb >= 0)
            pairs = ca[ok] * (cb.max() + 1) + cb[ok]
            _, counts = np.unique(pairs, return_counts=True)
            two.append(counts / n)
    return _flatten(one), _flatten(two)


def _flatten(parts: List[np.ndarray]) -> np.ndarray:
    return np.concatenate(parts) if parts else np.empty(0)


def extract_structural(d: TabularDataset) -> MetaFeatureVector:
    one, two = item_supports(d)
    out: Dict[str, Optional[float]] = {}
    for prefix, support in (("OneItem", one), ("TwoItem", two)):
        names = _quantile_names(prefix)
        qs = np.quantile(support, QUANTILES) if support.size else [None] * len(names)
        out.update(zip(names, qs))
    return MetaFeatureVector.from_measures(FamilyId.STRUCTURAL, out)


def extract_all(
    d: TabularDataset, seed: int = 0, params: TreeParams = TreeParams()
) -> MetaFeatureGroupSet:
    if d.n_attributes == 0:
        raise NoAttributes(f"{d.name}: nothing to characterize besides the target")
    vectors = (
        extract_statistical(d),
        extract_model_structure(d, params),
        extract_landmarking(d, seed),
        extract_complexity(d, seed),
        extract_structural(d),
    )
    imputed = [c for v in vectors for c, flag in zip(v.columns, v.imputed) if flag]
    if imputed:
        log.warning("%s: %d measures imputed (%s)", d.name, len(imputed), ", ".join(imputed))
    log.debug("%s: extracted %d meta-features", d.name, sum(len(v.names) for v in vectors))
    return MetaFeatureGroupSet(d.name, vectors)


#
# tables
#
def imputed_path(path: TPath) -> Path:
    return Path(path).with_suffix(".imputed.csv")


def feature_frame(groups: Sequence[MetaFeatureGroupSet], flags: bool = False) -> pd.DataFrame:
    columns = groups[0].columns() if groups else [
        f"{int(f)}.{name}" for f in FamilyId for name in FAMILY_MEASURES[f]
    ]
    rows = []
    for g in groups:
        arrays = [v.imputed.astype(int) if flags else v.values for v in g.vectors]
        rows.append([g.problem] + np.concatenate(arrays).tolist())
    return pd.DataFrame(rows, columns=["problem"] + columns)


def write_feature_table(groups: Sequence[MetaFeatureGroupSet], path: TPath) -> None:
    write_frame(path, feature_frame(groups))
    write_frame(imputed_path(path), feature_frame(groups, flags=True))


def read_feature_table(path: TPath) -> List[MetaFeatureGroupSet]:
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype={"problem": str})
    except (OSError, pd.errors.EmptyDataError, pd.errors.ParserError) as e:
        raise MalformedInput(f"{path}: {e}") from e
    if "problem" not in frame.columns:
        raise MalformedInput(f"{path}: no 'problem' column")
    flags = None
    sidecar = imputed_path(path)
    if sidecar.exists():
        flags = pd.read_csv(sidecar, dtype={"problem": str})
        if list(flags.columns) != list(frame.columns) or len(flags) != len(frame):
            log.warning("%s: ignoring imputation flags that do not match the table", sidecar)
            flags = None

    by_family: Dict[FamilyId, List[str]] = {f: [] for f in FamilyId}
    for column in frame.columns:
        if column == "problem":
            continue
        head, _, name = column.partition(".")
        try:
            by_family[FamilyId(int(head))].append(column)
        except ValueError:
            raise MalformedInput(f"{path}: bad meta-feature column {column!r}") from None
    for family, columns in by_family.items():
        if len(columns) != FAMILY_ARITY[family]:
            raise ArityMismatch(
                f"{path}: family {int(family)} has {len(columns)} columns, "
                f"expected {FAMILY_ARITY[family]}"
            )

    blocks = []
    for family in FamilyId:
        columns = by_family[family]
        try:
            values = frame[columns].to_numpy(dtype=float)
        except ValueError as e:
            raise MalformedInput(f"{path}: {e}") from e
        marks = (
            flags[columns].to_numpy(dtype=bool) if flags is not None
            else np.zeros(values.shape, dtype=bool)
        )
        names = tuple(c.partition(".")[2] for c in columns)
        blocks.append((family, names, values, marks))

    groups = []
    for i, problem in enumerate(frame["problem"]):
        vectors = tuple(
            MetaFeatureVector(family, names, values[i], marks[i])
            for family, names, values, marks in blocks
        )
        groups.append(MetaFeatureGroupSet(str(problem), vectors))
    log.debug("read %d meta-feature rows from %s", len(groups), path)
    return groups
