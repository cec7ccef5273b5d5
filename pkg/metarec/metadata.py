"""
Meta-datasets built from meta-features and meta-targets.

Each non-empty combination of meta-feature families yields one multi-label
meta-dataset; the binary relevance transformation splits it into one binary
problem per candidate algorithm.
"""

import logging
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .errors import ArityMismatch, DomainError, LengthMismatch
from .metafeatures import FAMILY_ARITY, FamilyId, MetaFeatureGroupSet
from .metatarget import MetaTarget
from .storage import write_frame
from .tabular import Attribute, TabularDataset

TPath = Union[str, Path]

log = logging.getLogger(__name__)

BINARY_CLASSES = ("0", "1")


@dataclass(frozen=True)
class FamilyCombo:
    members: Tuple[int, ...]
    combo_id: int

    def __post_init__(self) -> None:
        if not self.members:
            raise DomainError("a family combination cannot be empty")
        object.__setattr__(self, "members", tuple(sorted(self.members)))

    @property
    def arity(self) -> int:
        return sum(FAMILY_ARITY[FamilyId(f)] for f in self.members)

    def features(self, group: MetaFeatureGroupSet) -> np.ndarray:
        return group.combined(self.members)

    def __str__(self) -> str:
        return "{" + ",".join(str(f) for f in self.members) + "}"


def feature_combinations(q: int = len(FamilyId)) -> List[FamilyCombo]:
    """All 2**q - 1 non-empty family subsets, by size then lexicographically."""
    if q < 1:
        raise DomainError(f"need at least one family, got q={q}")
    result = []
    for size in range(1, q + 1):
        for members in combinations(range(1, q + 1), size):
            result.append(FamilyCombo(members, len(result) + 1))
    return result


@dataclass(frozen=True, eq=False)
class MetaDataset:
    """Rows of (combined meta-features, k appropriateness bits)."""

    combo: FamilyCombo
    feature_names: Tuple[str, ...]
    algorithms: Tuple[str, ...]
    problems: Tuple[str, ...]
    X: np.ndarray
    Y: np.ndarray

    @property
    def n_rows(self) -> int:
        return len(self.problems)

    @property
    def k(self) -> int:
        return len(self.algorithms)


@dataclass(frozen=True, eq=False)
class BinaryMetaDataset:
    combo: FamilyCombo
    algorithm: int
    algorithm_name: str
    feature_names: Tuple[str, ...]
    X: np.ndarray
    y: np.ndarray

    def as_tabular(self) -> TabularDataset:
        return TabularDataset(
            f"{self.combo.combo_id}:{self.algorithm_name}",
            tuple(Attribute.numeric(name) for name in self.feature_names),
            Attribute.nominal("appropriate", BINARY_CLASSES),
            self.X,
            self.y,
        )


def assemble_meta_dataset(
    features: Sequence[MetaFeatureGroupSet],
    targets: Sequence[MetaTarget],
    combo: FamilyCombo,
    algorithms: Optional[Sequence[str]] = None,
) -> MetaDataset:
    if len(features) != len(targets):
        raise LengthMismatch(f"{len(features)} meta-feature rows but {len(targets)} meta-targets")
    k = targets[0].k if targets else len(algorithms or ())
    if algorithms is None:
        algorithms = [f"A{j + 1}" for j in range(k)]
    if len(algorithms) != k:
        raise ArityMismatch(f"{len(algorithms)} algorithm names for {k} target bits")

    rows, bits = [], []
    for group, target in zip(features, targets):
        if group.problem and target.problem and group.problem != target.problem:
            raise LengthMismatch(
                f"meta-features of {group.problem} paired with the meta-target of {target.problem}"
            )
        x = combo.features(group)
        if x.shape[0] != combo.arity:
            raise ArityMismatch(f"{group.problem}: {x.shape[0]} values for combo {combo}")
        if target.k != k:
            raise ArityMismatch(f"{target.problem}: {target.k} target bits, expected {k}")
        rows.append(x)
        bits.append(target.bits)

    names = tuple(features[0].columns(combo.members)) if features else ()
    return MetaDataset(
        combo,
        names,
        tuple(algorithms),
        tuple(g.problem for g in features),
        np.array(rows, dtype=float).reshape(len(rows), combo.arity),
        np.array(bits, dtype=np.int64).reshape(len(bits), k),
    )


def br_transform(m: MetaDataset) -> List[BinaryMetaDataset]:
    """One binary dataset per algorithm, rows in the original order."""
    return [
        BinaryMetaDataset(m.combo, j, name, m.feature_names, m.X, m.Y[:, j])
        for j, name in enumerate(m.algorithms)
    ]


def write_meta_dataset(m: MetaDataset, path: TPath) -> None:
    frame = pd.DataFrame(m.X, columns=list(m.feature_names))
    frame.insert(0, "problem", list(m.problems))
    for j, name in enumerate(m.algorithms):
        frame[name] = m.Y[:, j]
    write_frame(path, frame)


def align_problems(
    features: Sequence[MetaFeatureGroupSet], targets: Sequence[MetaTarget]
) -> Tuple[List[MetaFeatureGroupSet], List[MetaTarget]]:
    """Pair rows by problem name, in meta-feature order."""
    by_name = {t.problem: t for t in targets}
    if len(by_name) != len(targets):
        raise LengthMismatch("duplicate problem names among the meta-targets")
    paired_features, paired_targets = [], []
    for group in features:
        target = by_name.pop(group.problem, None)
        if target is None:
            log.warning("%s: no meta-target, skipped", group.problem)
            continue
        paired_features.append(group)
        paired_targets.append(target)
    for name in sorted(by_name):
        log.warning("%s: no meta-features, skipped", name)
    if not paired_features:
        raise LengthMismatch("no problem has both meta-features and a meta-target")
    return paired_features, paired_targets
