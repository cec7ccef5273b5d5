"""
Base-level classification datasets.

A dataset is a typed attribute list plus a nominal target.  Values live in a
float matrix: numeric attributes hold their value, nominal attributes hold the
category index, and NaN marks a missing value for either kind.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.io import arff

from .errors import EmptyDataset, MalformedInput, NonNominalTarget, TooFewInstances
from .storage import read_json, write_frame, write_json

TPath = Union[str, Path]

log = logging.getLogger(__name__)

MISSING = "?"


class AttributeKind(str, Enum):
    NUMERIC = "numeric"
    NOMINAL = "nominal"


@dataclass(frozen=True)
class Attribute:
    name: str
    kind: AttributeKind
    categories: Tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.kind is AttributeKind.NOMINAL and not self.categories:
            raise MalformedInput(f"nominal attribute {self.name!r} has no categories")
        if self.kind is AttributeKind.NUMERIC and self.categories:
            raise MalformedInput(f"numeric attribute {self.name!r} has categories")

    @property
    def is_nominal(self) -> bool:
        return self.kind is AttributeKind.NOMINAL

    @property
    def is_numeric(self) -> bool:
        return self.kind is AttributeKind.NUMERIC

    @property
    def n_categories(self) -> int:
        return len(self.categories)

    @classmethod
    def numeric(cls, name: str) -> "Attribute":
        return cls(name, AttributeKind.NUMERIC)

    @classmethod
    def nominal(cls, name: str, categories: Sequence[str]) -> "Attribute":
        return cls(name, AttributeKind.NOMINAL, tuple(categories))


@dataclass(frozen=True, eq=False)
class TabularDataset:
    """Immutable attribute/instance container.

    X: n x m float matrix (NaN = missing)
    y: n class indices into target.categories
    """

    name: str
    attributes: Tuple[Attribute, ...]
    target: Attribute
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self) -> None:
        y = np.array(self.y, dtype=np.int64, copy=True).reshape(-1)
        X = np.array(self.X, dtype=float, copy=True)
        try:
            X = X.reshape(y.shape[0] if X.size == 0 else -1, len(self.attributes))
        except ValueError as e:
            raise MalformedInput(f"{self.name}: values do not fit {len(self.attributes)} attributes") from e
        if X.shape[0] != y.shape[0]:
            raise MalformedInput(
                f"{self.name}: {X.shape[0]} rows of values but {y.shape[0]} targets"
            )
        if not self.target.is_nominal:
            raise NonNominalTarget(f"{self.name}: target {self.target.name!r}")
        names = [a.name for a in self.attributes] + [self.target.name]
        if len(set(names)) != len(names):
            raise MalformedInput(f"{self.name}: duplicate attribute names")
        if y.size and (y.min() < 0 or y.max() >= self.target.n_categories):
            raise MalformedInput(f"{self.name}: target index out of range")
        for j, attr in enumerate(self.attributes):
            if not attr.is_nominal:
                continue
            col = X[:, j]
            known = col[~np.isnan(col)]
            if known.size and (
                known.min() < 0
                or known.max() >= attr.n_categories
                or np.any(known != np.floor(known))
            ):
                raise MalformedInput(f"{self.name}: bad category index in {attr.name!r}")
        X.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n_instances(self) -> int:
        return int(self.y.shape[0])

    @property
    def n_attributes(self) -> int:
        return len(self.attributes)

    @property
    def n_classes(self) -> int:
        return self.target.n_categories

    @property
    def class_counts(self) -> np.ndarray:
        return np.bincount(self.y, minlength=self.n_classes)

    @property
    def observed_classes(self) -> np.ndarray:
        return np.flatnonzero(self.class_counts)

    @property
    def nominal_indices(self) -> List[int]:
        return [j for j, a in enumerate(self.attributes) if a.is_nominal]

    @property
    def numeric_indices(self) -> List[int]:
        return [j for j, a in enumerate(self.attributes) if a.is_numeric]

    def take(self, rows: Sequence[int], name: Optional[str] = None) -> "TabularDataset":
        rows = np.asarray(rows, dtype=np.int64)
        return TabularDataset(
            name or self.name, self.attributes, self.target, self.X[rows], self.y[rows]
        )

    def __repr__(self) -> str:
        return (
            f"TabularDataset({self.name!r}, n={self.n_instances}, "
            f"m={self.n_attributes}, classes={self.n_classes})"
        )


@dataclass(frozen=True, eq=False)
class FoldPlan:
    fold_of: np.ndarray
    k: int
    seed: int

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of != fold)

    def __iter__(self) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
        for fold in range(self.k):
            yield self.train_indices(fold), self.test_indices(fold)


#
# loading
#
def _category_order(values: Sequence[str]) -> Tuple[str, ...]:
    return tuple(sorted(set(values)))


def _encode(values: Sequence[Optional[str]], categories: Sequence[str]) -> np.ndarray:
    index = {c: i for i, c in enumerate(categories)}
    return np.array(
        [np.nan if v is None else float(index[v]) for v in values], dtype=float
    )


def _is_integral(column: np.ndarray) -> bool:
    known = column[~np.isnan(column)]
    return bool(np.all(known == np.floor(known)))


def _infer_column(name: str, raw: pd.Series) -> Tuple[Attribute, np.ndarray]:
    cells = [None if v in ("", MISSING) else v for v in raw.tolist()]
    present = [v for v in cells if v is not None]
    numbers = pd.to_numeric(pd.Series(present, dtype=object), errors="coerce")
    if present and not numbers.isna().any():
        values = np.array(
            [np.nan if v is None else float(v) for v in cells], dtype=float
        )
        return Attribute.numeric(name), values
    categories = _category_order(present) or (MISSING,)
    return Attribute.nominal(name, categories), _encode(cells, categories)


def _as_target(name: str, attr: Attribute, values: np.ndarray, raw: pd.Series) -> Tuple[Attribute, np.ndarray]:
    if attr.is_nominal:
        return attr, values
    if not _is_integral(values):
        raise NonNominalTarget(f"{name}: target {attr.name!r} has non-integral values")
    # integral class codes become nominal labels
    cells = [None if v in ("", MISSING) else str(int(float(v))) for v in raw.tolist()]
    present = [v for v in cells if v is not None]
    categories = tuple(sorted(set(present), key=lambda c: int(c)))
    return Attribute.nominal(attr.name, categories), _encode(cells, categories)


def _finish(
    name: str,
    attributes: List[Attribute],
    columns: List[np.ndarray],
    target_index: int,
) -> TabularDataset:
    target = attributes[target_index]
    y = columns[target_index]
    keep = ~np.isnan(y)
    if not keep.all():
        log.warning("%s: dropping %d rows with missing target", name, int((~keep).sum()))
    attrs = tuple(a for j, a in enumerate(attributes) if j != target_index)
    cols = [c[keep] for j, c in enumerate(columns) if j != target_index]
    X = np.column_stack(cols) if cols else np.empty((int(keep.sum()), 0))
    d = TabularDataset(name, attrs, target, X, y[keep].astype(np.int64))
    if d.n_instances == 0:
        raise EmptyDataset(f"{name}: no instances")
    if d.observed_classes.size < 2:
        raise MalformedInput(f"{name}: target {target.name!r} has a single class")
    return d


def kinds_path(path: TPath) -> Path:
    """Sidecar declaring nominal columns whose labels would read back as numbers."""
    path = Path(path)
    return path.with_name(f"{path.stem}.kinds.json")


def _declared_nominals(path: Path) -> Dict[str, Tuple[str, ...]]:
    sidecar = kinds_path(path)
    if not sidecar.exists():
        return {}
    try:
        declared = read_json(sidecar)["nominal"]
        return {str(k): tuple(str(c) for c in v) for k, v in declared.items()}
    except (ValueError, KeyError, TypeError, AttributeError) as e:
        raise MalformedInput(f"{sidecar}: {e}") from e


def _declared_column(name: str, raw: pd.Series, categories: Tuple[str, ...], path: Path) -> Tuple[Attribute, np.ndarray]:
    cells = [None if v in ("", MISSING) else v for v in raw.tolist()]
    unknown = {v for v in cells if v is not None} - set(categories)
    if unknown:
        raise MalformedInput(f"{path}: {name!r} has undeclared labels {sorted(unknown)}")
    return Attribute.nominal(name, categories), _encode(cells, categories)


def _target_index(names: Sequence[str], target: Optional[str], path: Path) -> int:
    if target is None:
        return len(names) - 1
    try:
        return list(names).index(target)
    except ValueError:
        raise MalformedInput(f"{path}: no column named {target!r}") from None


def load_csv(path: TPath, target: Optional[str] = None) -> TabularDataset:
    path = Path(path)
    try:
        frame = pd.read_csv(
            path, dtype=str, na_filter=False, skipinitialspace=True
        )
    except (pd.errors.EmptyDataError, pd.errors.ParserError, UnicodeDecodeError) as e:
        raise MalformedInput(f"{path}: {e}") from e
    if frame.shape[1] < 1:
        raise MalformedInput(f"{path}: no columns")
    if frame.shape[0] == 0:
        raise EmptyDataset(f"{path}: no instances")
    # rows longer than the header make pandas promote the first column to an index
    if not isinstance(frame.index, pd.RangeIndex):
        raise MalformedInput(f"{path}: rows have more fields than the header")
    # with na_filter off, only short rows produce NaN cells
    short = frame.isna().any(axis=1)
    if short.any():
        row = int(np.flatnonzero(short.to_numpy())[0]) + 2
        raise MalformedInput(f"{path}: ragged row at line {row}")

    names = [str(c).strip() for c in frame.columns]
    ti = _target_index(names, target, path)
    declared = _declared_nominals(path)
    attributes: List[Attribute] = []
    columns: List[np.ndarray] = []
    for j, name in enumerate(names):
        raw = frame.iloc[:, j].str.strip()
        if name in declared:
            attr, values = _declared_column(name, raw, declared[name], path)
        else:
            attr, values = _infer_column(name, raw)
        if j == ti:
            attr, values = _as_target(path.name, attr, values, raw)
        attributes.append(attr)
        columns.append(values)
    return _finish(path.stem, attributes, columns, ti)


def load_arff(path: TPath, target: Optional[str] = None) -> TabularDataset:
    path = Path(path)
    try:
        data, meta = arff.loadarff(str(path))
    except (arff.ArffError, ValueError, UnicodeDecodeError, IndexError) as e:
        raise MalformedInput(f"{path}: {e}") from e

    names = list(meta.names())
    if not names:
        raise MalformedInput(f"{path}: no attributes")
    ti = _target_index(names, target, path)
    attributes: List[Attribute] = []
    columns: List[np.ndarray] = []
    for j, name in enumerate(names):
        kind, declared = meta[name]
        if kind == "nominal":
            categories = tuple(declared)
            cells = [
                None if v.decode() == MISSING else v.decode() for v in data[name]
            ]
            attributes.append(Attribute.nominal(name, categories))
            columns.append(_encode(cells, categories))
        elif kind == "numeric":
            if j == ti:
                raise NonNominalTarget(f"{path}: target {name!r} is numeric")
            attributes.append(Attribute.numeric(name))
            columns.append(np.asarray(data[name], dtype=float))
        else:
            raise MalformedInput(f"{path}: unsupported attribute type {kind!r} for {name!r}")
    if len(data) == 0:
        raise EmptyDataset(f"{path}: no instances")
    return _finish(meta.name or path.stem, attributes, columns, ti)


def load_dataset(
    path: TPath, format: Optional[str] = None, target: Optional[str] = None
) -> TabularDataset:
    """Load a CSV or ARFF file; format defaults to the file suffix."""
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).lower()
    log.debug("loading %s as %s", path, fmt)
    if fmt == "csv":
        return load_csv(path, target)
    if fmt == "arff":
        return load_arff(path, target)
    raise MalformedInput(f"{path}: unknown format {fmt!r}")


def to_frame(d: TabularDataset) -> pd.DataFrame:
    columns = {}
    for j, attr in enumerate(d.attributes):
        col = d.X[:, j]
        if attr.is_nominal:
            columns[attr.name] = [
                MISSING if np.isnan(v) else attr.categories[int(v)] for v in col
            ]
        else:
            columns[attr.name] = [MISSING if np.isnan(v) else repr(float(v)) for v in col]
    columns[d.target.name] = [d.target.categories[int(c)] for c in d.y]
    return pd.DataFrame(columns, columns=[a.name for a in d.attributes] + [d.target.name])


def _looks_numeric(categories: Sequence[str]) -> bool:
    return not pd.to_numeric(pd.Series(categories, dtype=object), errors="coerce").isna().any()


def save_csv(d: TabularDataset, path: TPath) -> None:
    """Write d as CSV.

    Nominal columns with number-like labels (a former target coded 0/1, say)
    are listed in a kinds sidecar so load_csv keeps them nominal.
    """
    write_frame(path, to_frame(d))
    ambiguous = {
        a.name: list(a.categories)
        for a in d.attributes + (d.target,)
        if a.is_nominal and _looks_numeric(a.categories)
    }
    if ambiguous:
        write_json(kinds_path(path), {"nominal": ambiguous})
    else:
        kinds_path(path).unlink(missing_ok=True)


#
# datasetoids and folds
#
def generate_datasetoids(d: TabularDataset) -> List[TabularDataset]:
    """One derived problem per nominal attribute, with roles exchanged."""
    result = []
    for j in d.nominal_indices:
        new_target = d.attributes[j]
        attributes = list(d.attributes)
        attributes[j] = d.target
        X = np.array(d.X, copy=True)
        X[:, j] = d.y
        y = d.X[:, j]
        keep = ~np.isnan(y)
        oid = TabularDataset(
            f"{d.name}@{new_target.name}",
            tuple(attributes),
            new_target,
            X[keep],
            y[keep].astype(np.int64),
        )
        log.debug("datasetoid %s: %d instances", oid.name, oid.n_instances)
        result.append(oid)
    return result


def stratified_assignment(labels: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Per-class round-robin fold ids after a seeded shuffle."""
    labels = np.asarray(labels)
    order = rng.permutation(labels.shape[0])
    fold_of = np.empty(labels.shape[0], dtype=np.int64)
    offset = 0
    for label in np.unique(labels):
        members = order[labels[order] == label]
        fold_of[members] = (offset + np.arange(members.size)) % k
        offset += members.size
    return fold_of


def stratified_folds(d: TabularDataset, k: int, seed: int) -> FoldPlan:
    if k < 2:
        raise TooFewInstances(f"fold count must be >= 2, got {k}")
    if d.n_instances < k:
        raise TooFewInstances(f"{d.name}: {d.n_instances} instances for {k} folds")
    rng = np.random.default_rng(seed)
    fold_of = stratified_assignment(d.y, k, rng)
    fold_of.flags.writeable = False
    return FoldPlan(fold_of, k, seed)
