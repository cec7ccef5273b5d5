"""
Base-level learners.

The gain-ratio decision tree is both the ensemble's base learner and the
substrate of the model-structure and node landmarkers.  The remaining
landmark learners (naive Bayes, nearest neighbour variants) live here too.
"""

import logging
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Any, ClassVar, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import entr

from .errors import ConfigError, EmptyDataset, MalformedInput, SchemaMismatch
from .tabular import Attribute, AttributeKind, TabularDataset

log = logging.getLogger(__name__)

LN2 = np.log(2.0)
# gains below this are rounding noise
GAIN_EPSILON = 1e-12


@dataclass(frozen=True)
class TreeParams:
    min_leaf: int = 2
    max_depth: Optional[int] = None

    CRITERION: ClassVar[str] = "gain-ratio"

    def __post_init__(self) -> None:
        if self.min_leaf < 1:
            raise ConfigError(f"min_leaf must be >= 1, got {self.min_leaf}")
        if self.max_depth is not None and self.max_depth < 1:
            raise ConfigError(f"max_depth must be >= 1, got {self.max_depth}")


@dataclass(frozen=True, eq=False)
class Leaf:
    distribution: np.ndarray
    n: int


@dataclass(frozen=True, eq=False)
class Split:
    """Internal node.

    threshold is None for a nominal split (one child per category); numeric
    splits have two children, value <= threshold going left.
    """

    attribute: int
    threshold: Optional[float]
    children: Tuple["TreeNode", ...]
    heaviest: int
    n: int


TreeNode = Union[Leaf, Split]


@dataclass(frozen=True)
class SplitCandidate:
    attribute: int
    threshold: Optional[float]
    gain: float
    gain_ratio: float


def entropy(counts: np.ndarray) -> np.ndarray:
    """Entropy in bits of count vectors along the last axis."""
    counts = np.asarray(counts, dtype=float)
    total = counts.sum(axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        p = np.where(total > 0, counts / np.where(total > 0, total, 1), 0.0)
    return entr(p).sum(axis=-1) / LN2


def laplace(counts: np.ndarray) -> np.ndarray:
    counts = np.asarray(counts, dtype=float)
    return (counts + 1.0) / (counts.sum() + counts.shape[0])


def _class_counts(y: np.ndarray, n_classes: int) -> np.ndarray:
    return np.bincount(y, minlength=n_classes).astype(float)


def _nominal_candidate(
    j: int, col: np.ndarray, y: np.ndarray, attr: Attribute, n_classes: int, min_leaf: int
) -> Optional[SplitCandidate]:
    known = ~np.isnan(col)
    nk = int(known.sum())
    if nk == 0 or attr.n_categories < 2:
        return None
    counts = np.zeros((attr.n_categories, n_classes))
    np.add.at(counts, (col[known].astype(np.int64), y[known]), 1.0)
    sizes = counts.sum(axis=1)
    if np.count_nonzero(sizes >= min_leaf) < 2:
        return None
    children = (sizes / nk * entropy(counts)).sum()
    gain = nk / col.shape[0] * (entropy(counts.sum(axis=0)) - children)
    split_info = entropy(sizes)
    if gain <= GAIN_EPSILON or split_info <= 0:
        return None
    return SplitCandidate(j, None, float(gain), float(gain / split_info))


def _numeric_candidate(
    j: int, col: np.ndarray, y: np.ndarray, n_classes: int, min_leaf: int
) -> Optional[SplitCandidate]:
    known = ~np.isnan(col)
    nk = int(known.sum())
    if nk < 2 * min_leaf:
        return None
    order = np.argsort(col[known], kind="stable")
    values = col[known][order]
    labels = y[known][order]
    onehot = np.zeros((nk, n_classes))
    onehot[np.arange(nk), labels] = 1.0
    left = np.cumsum(onehot, axis=0)[:-1]
    total = left[-1] + onehot[-1]
    right = total - left
    n_left = np.arange(1, nk, dtype=float)
    n_right = nk - n_left
    valid = (values[:-1] < values[1:]) & (n_left >= min_leaf) & (n_right >= min_leaf)
    if not valid.any():
        return None
    children = (n_left * entropy(left) + n_right * entropy(right)) / nk
    gain = nk / col.shape[0] * (entropy(total) - children)
    split_info = entropy(np.column_stack([n_left, n_right]))
    ok = valid & (gain > GAIN_EPSILON) & (split_info > 0)
    if not ok.any():
        return None
    ratio = np.where(ok, gain / np.where(split_info > 0, split_info, 1.0), -np.inf)
    # argmax keeps the lowest threshold among ties
    best = int(np.argmax(ratio))
    threshold = (values[best] + values[best + 1]) / 2.0
    return SplitCandidate(j, float(threshold), float(gain[best]), float(ratio[best]))


def candidate_splits(
    X: np.ndarray,
    y: np.ndarray,
    schema: Sequence[Attribute],
    n_classes: int,
    min_leaf: int,
    attributes: Optional[Sequence[int]] = None,
) -> List[SplitCandidate]:
    """Best admissible split of each attribute, in attribute order."""
    result = []
    for j in attributes if attributes is not None else range(len(schema)):
        attr = schema[j]
        if attr.is_nominal:
            cand = _nominal_candidate(j, X[:, j], y, attr, n_classes, min_leaf)
        else:
            cand = _numeric_candidate(j, X[:, j], y, n_classes, min_leaf)
        if cand is not None:
            result.append(cand)
    return result


def best_split(candidates: Sequence[SplitCandidate]) -> Optional[SplitCandidate]:
    best = None
    for cand in candidates:
        if best is None or cand.gain_ratio > best.gain_ratio:
            best = cand
    return best


def _branch_of(col: np.ndarray, split: SplitCandidate) -> np.ndarray:
    if split.threshold is None:
        return col
    return np.where(np.isnan(col), np.nan, (col > split.threshold).astype(float))


class _Builder:
    def __init__(
        self,
        d: TabularDataset,
        params: TreeParams,
        attributes: Optional[Sequence[int]],
    ) -> None:
        self.X = d.X
        self.y = d.y
        self.schema = d.attributes
        self.n_classes = d.n_classes
        self.params = params
        self.attributes = attributes

    def build(self, rows: np.ndarray, depth: int) -> TreeNode:
        y = self.y[rows]
        counts = _class_counts(y, self.n_classes)
        leaf = Leaf(laplace(counts), int(rows.size))
        params = self.params
        if (
            np.count_nonzero(counts) <= 1
            or rows.size < 2 * params.min_leaf
            or (params.max_depth is not None and depth >= params.max_depth)
        ):
            return leaf

        X = self.X[rows]
        split = best_split(
            candidate_splits(
                X, y, self.schema, self.n_classes, params.min_leaf, self.attributes
            )
        )
        if split is None:
            return leaf

        branch = _branch_of(X[:, split.attribute], split)
        n_children = 2 if split.threshold is not None else self.schema[split.attribute].n_categories
        known = ~np.isnan(branch)
        sizes = np.bincount(branch[known].astype(np.int64), minlength=n_children)
        heaviest = int(np.argmax(sizes))
        branch = np.where(known, branch, heaviest).astype(np.int64)

        children: List[TreeNode] = []
        for c in range(n_children):
            sub = rows[branch == c]
            if sub.size == 0:
                children.append(Leaf(leaf.distribution, 0))
            else:
                children.append(self.build(sub, depth + 1))
        log.debug(
            "split depth=%d attr=%d threshold=%s ratio=%.4f",
            depth, split.attribute, split.threshold, split.gain_ratio,
        )
        return Split(split.attribute, split.threshold, tuple(children), heaviest, int(rows.size))


class DecisionTree:
    FORMAT: ClassVar[int] = 1

    def __init__(
        self,
        root: TreeNode,
        schema: Tuple[Attribute, ...],
        classes: Tuple[str, ...],
        params: TreeParams,
    ) -> None:
        self.root = root
        self.schema = schema
        self.classes = classes
        self.params = params

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def _check(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != len(self.schema):
            raise SchemaMismatch(
                f"expected {len(self.schema)} values per instance, got shape {X.shape}"
            )
        for j, attr in enumerate(self.schema):
            if not attr.is_nominal:
                continue
            col = X[:, j]
            known = col[~np.isnan(col)]
            if known.size and (known.min() < 0 or known.max() >= attr.n_categories):
                raise SchemaMismatch(f"category index out of range for {attr.name!r}")
        return X

    def predict_proba(self, x: Sequence[float]) -> np.ndarray:
        return self.predict_proba_batch(np.asarray(x, dtype=float).reshape(1, -1))[0]

    def predict_proba_batch(self, X: np.ndarray) -> np.ndarray:
        X = self._check(X)
        out = np.empty((X.shape[0], self.n_classes))
        self._route(self.root, X, np.arange(X.shape[0]), out)
        return out

    def _route(self, node: TreeNode, X: np.ndarray, rows: np.ndarray, out: np.ndarray) -> None:
        if rows.size == 0:
            return
        if isinstance(node, Leaf):
            out[rows] = node.distribution
            return
        col = X[rows, node.attribute]
        missing = np.isnan(col)
        if node.threshold is None:
            branch = np.where(missing, node.heaviest, np.nan_to_num(col)).astype(np.int64)
        else:
            branch = np.where(missing, node.heaviest, (col > node.threshold).astype(np.int64))
        for c, child in enumerate(node.children):
            self._route(child, X, rows[branch == c], out)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_proba_batch(X), axis=1)

    def nodes(self) -> Iterator[Tuple[TreeNode, int]]:
        """Depth-first (node, level) pairs, root at level 1."""
        stack: List[Tuple[TreeNode, int]] = [(self.root, 1)]
        while stack:
            node, level = stack.pop()
            yield node, level
            if isinstance(node, Split):
                stack.extend((c, level + 1) for c in reversed(node.children))

    #
    # persistence
    #
    def to_dict(self) -> Dict[str, Any]:
        return {
            "format": self.FORMAT,
            "classes": list(self.classes),
            "params": asdict(self.params),
            "schema": [
                {"name": a.name, "kind": a.kind.value, "categories": list(a.categories)}
                for a in self.schema
            ],
            "root": _node_to_dict(self.root),
        }

    @classmethod
    def from_dict(cls, doc: Dict[str, Any]) -> "DecisionTree":
        try:
            if doc["format"] != cls.FORMAT:
                raise MalformedInput(f"unsupported tree format {doc['format']!r}")
            schema = tuple(
                Attribute(a["name"], AttributeKind(a["kind"]), tuple(a["categories"]))
                for a in doc["schema"]
            )
            return cls(
                _node_from_dict(doc["root"]),
                schema,
                tuple(doc["classes"]),
                TreeParams(**doc["params"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise MalformedInput(f"bad tree document: {e}") from e


def _node_to_dict(node: TreeNode) -> Dict[str, Any]:
    if isinstance(node, Leaf):
        return {"kind": "leaf", "n": node.n, "distribution": node.distribution.tolist()}
    return {
        "kind": "split",
        "attribute": node.attribute,
        "threshold": node.threshold,
        "heaviest": node.heaviest,
        "n": node.n,
        "children": [_node_to_dict(c) for c in node.children],
    }


def _node_from_dict(doc: Dict[str, Any]) -> TreeNode:
    if doc["kind"] == "leaf":
        return Leaf(np.asarray(doc["distribution"], dtype=float), int(doc["n"]))
    return Split(
        int(doc["attribute"]),
        None if doc["threshold"] is None else float(doc["threshold"]),
        tuple(_node_from_dict(c) for c in doc["children"]),
        int(doc["heaviest"]),
        int(doc["n"]),
    )


def train_tree(
    d: TabularDataset,
    params: TreeParams = TreeParams(),
    attributes: Optional[Sequence[int]] = None,
) -> DecisionTree:
    """Greedy top-down gain-ratio induction with Laplace leaves.

    attributes restricts the split candidates (used by the node landmarkers).
    """
    if d.n_instances == 0:
        raise EmptyDataset(f"{d.name}: cannot train on zero instances")
    root = _Builder(d, params, attributes).build(np.arange(d.n_instances), 0)
    return DecisionTree(root, d.attributes, d.target.categories, params)


def predict_proba(tree: DecisionTree, x: Sequence[float]) -> np.ndarray:
    return tree.predict_proba(x)


#
# landmark learners
#
class LandmarkKind(str, Enum):
    NAIVE_BAYES = "naive-bayes"
    ONE_NN = "1nn"
    ELITE_ONE_NN = "elite-1nn"
    DECISION_NODE = "decision-node"
    RANDOM_NODE = "random-node"
    WORST_NODE = "worst-node"


LANDMARK_ORDER = (
    LandmarkKind.NAIVE_BAYES,
    LandmarkKind.ONE_NN,
    LandmarkKind.ELITE_ONE_NN,
    LandmarkKind.DECISION_NODE,
    LandmarkKind.RANDOM_NODE,
    LandmarkKind.WORST_NODE,
)


class MixedDistance:
    """Sum over attributes of range-normalised |a - b| (numeric) or 0/1
    overlap (nominal); a missing value on either side contributes 1."""

    def __init__(self, schema: Sequence[Attribute], X: np.ndarray) -> None:
        self.nominal = np.array([a.is_nominal for a in schema], dtype=bool)
        X = np.asarray(X, dtype=float)
        with np.errstate(all="ignore"):
            if X.shape[0]:
                lo = np.nanmin(np.where(np.isnan(X), np.inf, X), axis=0)
                hi = np.nanmax(np.where(np.isnan(X), -np.inf, X), axis=0)
                span = hi - lo
            else:
                span = np.zeros(X.shape[1])
        self.span = np.where(np.isfinite(span) & (span > 0), span, 0.0)

    def __call__(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        A = np.asarray(A, dtype=float)
        B = np.asarray(B, dtype=float)
        total = np.zeros((A.shape[0], B.shape[0]))
        for j in range(A.shape[1]):
            a = A[:, j][:, None]
            b = B[:, j][None, :]
            if self.nominal[j]:
                part = (a != b).astype(float)
            elif self.span[j] > 0:
                part = np.minimum(np.abs(a - b) / self.span[j], 1.0)
            else:
                part = np.zeros((a.shape[0], b.shape[1]))
            total += np.where(np.isnan(a) | np.isnan(b), 1.0, part)
        return total


class MajorityClass:
    def __init__(self, d: TabularDataset) -> None:
        self.label = int(np.argmax(d.class_counts))

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.full(np.asarray(X).shape[0], self.label, dtype=np.int64)


class NaiveBayes:
    """Gaussian likelihoods for numeric attributes, Laplace-smoothed
    frequencies for nominal ones; missing values are skipped."""

    def __init__(self, d: TabularDataset) -> None:
        K = d.n_classes
        counts = d.class_counts.astype(float)
        self.log_prior = np.log((counts + 1.0) / (counts.sum() + K))
        self.schema = d.attributes
        self.tables: Dict[int, np.ndarray] = {}
        self.gauss: Dict[int, Tuple[np.ndarray, np.ndarray]] = {}
        for j, attr in enumerate(d.attributes):
            col = d.X[:, j]
            known = ~np.isnan(col)
            if attr.is_nominal:
                table = np.zeros((K, attr.n_categories))
                np.add.at(table, (d.y[known], col[known].astype(np.int64)), 1.0)
                table = (table + 1.0) / (table.sum(axis=1, keepdims=True) + attr.n_categories)
                self.tables[j] = np.log(table)
                continue
            overall_mean = float(np.mean(col[known])) if known.any() else 0.0
            overall_var = float(np.var(col[known])) if known.any() else 1.0
            floor = 1e-9 * max(overall_var, 1.0)
            means = np.full(K, overall_mean)
            variances = np.full(K, max(overall_var, floor))
            for c in range(K):
                vals = col[known & (d.y == c)]
                if vals.size:
                    means[c] = vals.mean()
                    variances[c] = max(float(vals.var()), floor)
            self.gauss[j] = (means, variances)

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        score = np.tile(self.log_prior, (X.shape[0], 1))
        for j, table in self.tables.items():
            col = X[:, j]
            known = ~np.isnan(col)
            score[known] += table[:, col[known].astype(np.int64)].T
        for j, (means, variances) in self.gauss.items():
            col = X[:, j]
            known = ~np.isnan(col)
            diff = col[known][:, None] - means[None, :]
            score[known] += -0.5 * (np.log(2 * np.pi * variances) + diff ** 2 / variances)
        return np.argmax(score, axis=1)


class NearestNeighbor:
    def __init__(self, d: TabularDataset, attributes: Optional[Sequence[int]] = None) -> None:
        self.columns = list(range(d.n_attributes)) if attributes is None else list(attributes)
        self.X = d.X[:, self.columns]
        self.y = d.y
        self.distance = MixedDistance([d.attributes[j] for j in self.columns], self.X)

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)[:, self.columns]
        # argmin picks the lowest-index neighbour among ties
        return self.y[np.argmin(self.distance(X, self.X), axis=1)]


class NodeTree:
    """One-level tree restricted to a single attribute."""

    def __init__(self, d: TabularDataset, attribute: Optional[int]) -> None:
        self.attribute = attribute
        attrs = [] if attribute is None else [attribute]
        self.tree = train_tree(d, TreeParams(min_leaf=1, max_depth=1), attributes=attrs)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.tree.predict(X)


LandmarkModel = Union[MajorityClass, NaiveBayes, NearestNeighbor, NodeTree]


def attribute_gains(d: TabularDataset) -> np.ndarray:
    """Information gain of each attribute's best split (0 when none)."""
    gains = np.zeros(d.n_attributes)
    for cand in candidate_splits(d.X, d.y, d.attributes, d.n_classes, 1):
        gains[cand.attribute] = cand.gain
    return gains


def train_landmarker(d: TabularDataset, kind: Union[LandmarkKind, str], seed: int = 0) -> LandmarkModel:
    kind = LandmarkKind(kind)
    if d.n_instances == 0:
        raise EmptyDataset(f"{d.name}: cannot train on zero instances")
    if kind is LandmarkKind.NAIVE_BAYES:
        return NaiveBayes(d)
    if kind is LandmarkKind.ONE_NN:
        return NearestNeighbor(d)

    gains = attribute_gains(d)
    if d.n_attributes == 0:
        return NodeTree(d, None)
    if kind is LandmarkKind.ELITE_ONE_NN:
        return NearestNeighbor(d, [int(np.argmax(gains))])
    if kind is LandmarkKind.DECISION_NODE:
        return NodeTree(d, int(np.argmax(gains)))
    if kind is LandmarkKind.WORST_NODE:
        return NodeTree(d, int(np.argmin(gains)))
    rng = np.random.default_rng(seed)
    return NodeTree(d, int(rng.integers(d.n_attributes)))
