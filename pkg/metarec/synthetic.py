"""
Seeded synthetic classification problems and the meta-corpus built on them.

Problems mix Gaussian class blobs (favouring probabilistic and distance
based learners) with axis-aligned rule concepts (favouring trees), so that
different candidates win on different problems.
"""

import logging
from dataclasses import dataclass
from functools import partial
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import DataError
from .learners import TreeParams
from .metafeatures import MetaFeatureGroupSet, extract_all
from .metatarget import (
    DEFAULT_CANDIDATES, AccuracyMatrix, MetaTarget, derive_meta_target,
    estimate_accuracy_matrix,
)
from .parallel import parallel_map
from .tabular import Attribute, TabularDataset

log = logging.getLogger(__name__)

KINDS = ("blobs", "rules")


def _labels(n_classes: int) -> Tuple[str, ...]:
    return tuple(f"c{i}" for i in range(n_classes))


def _rule_labels(X: np.ndarray, n_classes: int, rng: np.random.Generator) -> np.ndarray:
    """Labels from a random depth-two threshold tree on the columns of X."""
    a, b = rng.choice(X.shape[1], size=2, replace=X.shape[1] < 2)
    ta, tb = np.quantile(X[:, a], rng.uniform(0.3, 0.7)), np.quantile(X[:, b], rng.uniform(0.3, 0.7))
    cell = 2 * (X[:, a] > ta) + (X[:, b] > tb)
    leaf_class = rng.integers(n_classes, size=4)
    leaf_class[:n_classes] = rng.permutation(n_classes)[: min(n_classes, 4)]
    return leaf_class[cell]


def generate_problem(rng: np.random.Generator, name: str) -> TabularDataset:
    n = int(rng.integers(60, 301))
    n_classes = int(rng.integers(2, 5))
    m_num = int(rng.integers(1, 7))
    m_nom = int(rng.integers(0, 4))
    kind = KINDS[int(rng.integers(len(KINDS)))]
    noise = float(rng.uniform(0.0, 0.2))

    if kind == "blobs":
        spread = float(rng.uniform(0.2, 2.5))
        y = rng.integers(n_classes, size=n)
        centers = rng.normal(0.0, spread, size=(n_classes, m_num))
        numeric = centers[y] + rng.normal(size=(n, m_num))
    else:
        numeric = rng.uniform(-1.0, 1.0, size=(n, m_num))
        y = _rule_labels(numeric, n_classes, rng)

    flip = rng.random(n) < noise
    y = np.where(flip, rng.integers(n_classes, size=n), y)

    columns = [numeric]
    attributes = [Attribute.numeric(f"x{j}") for j in range(m_num)]
    for j in range(m_nom):
        n_cat = int(rng.integers(2, 5))
        # per-class category preferences; small concentration = informative
        prefs = rng.dirichlet(np.full(n_cat, rng.uniform(0.3, 3.0)), size=n_classes)
        codes = np.array([rng.choice(n_cat, p=prefs[c]) for c in y], dtype=float)
        columns.append(codes[:, None])
        attributes.append(Attribute.nominal(f"a{j}", tuple(f"v{i}" for i in range(n_cat))))
    X = np.hstack(columns)

    if rng.random() < 0.3:
        X[rng.random(X.shape) < rng.uniform(0.0, 0.05)] = np.nan

    d = TabularDataset(name, tuple(attributes), Attribute.nominal("class", _labels(n_classes)), X, y)
    log.debug("generated %r (%s)", d, kind)
    return d


def generate_corpus(count: int, seed: int = 0, prefix: str = "synth") -> List[TabularDataset]:
    result = []
    for i, child in enumerate(np.random.SeedSequence(seed).spawn(count)):
        rng = np.random.default_rng(child)
        d = generate_problem(rng, f"{prefix}{i:04d}")
        # redraw until the problem has two observed classes
        while d.observed_classes.size < 2:
            d = generate_problem(rng, d.name)
        result.append(d)
    return result


@dataclass
class MetaCorpus:
    algorithms: Tuple[str, ...]
    features: List[MetaFeatureGroupSet]
    targets: List[MetaTarget]
    accuracies: List[AccuracyMatrix]
    failed: List[str]


def _characterize(
    d: TabularDataset, candidates: Sequence[str], alpha: float, seed: int, params: TreeParams
) -> Optional[Tuple[MetaFeatureGroupSet, AccuracyMatrix, MetaTarget]]:
    try:
        features = extract_all(d, seed, params)
        acc = estimate_accuracy_matrix(d, candidates, seed)
        return features, acc, derive_meta_target(acc, alpha, d.name)
    except DataError as e:
        log.warning("%s: skipped: %s", d.name, e)
        return None


def build_meta_corpus(
    datasets: Sequence[TabularDataset],
    candidates: Sequence[str] = DEFAULT_CANDIDATES,
    alpha: float = 0.05,
    seed: int = 0,
    params: TreeParams = TreeParams(),
    jobs: Optional[int] = None,
) -> MetaCorpus:
    """Meta-features, accuracy matrices and meta-targets for every problem."""
    run = partial(_characterize, candidates=candidates, alpha=alpha, seed=seed, params=params)
    corpus = MetaCorpus(tuple(), [], [], [], [])
    for d, result in zip(datasets, parallel_map(run, datasets, jobs)):
        if result is None:
            corpus.failed.append(d.name)
            continue
        features, acc, target = result
        corpus.algorithms = acc.names
        corpus.features.append(features)
        corpus.accuracies.append(acc)
        corpus.targets.append(target)
    log.info("meta-corpus: %d problems, %d failed", len(corpus.features), len(corpus.failed))
    return corpus
