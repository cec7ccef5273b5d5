"""
Agreement and significance statistics.

kappa and its t-derived threshold decide whether two classifiers make
different mistakes; the Friedman and Holm procedures decide which candidate
algorithms are indistinguishable from the best one.
"""

import logging
from dataclasses import dataclass
from typing import Any, Optional, Sequence, Tuple

import numpy as np
from scipy import special, stats

from .errors import DomainError, LengthMismatch, UndefinedKappa

log = logging.getLogger(__name__)

# Theta2 this close to 1 leaves no room for chance-corrected agreement
THETA_EPSILON = 1e-12


@dataclass(frozen=True, eq=False)
class ContingencyTable:
    """K x K counts of (first model label, second model label) over the
    instances either model got wrong."""

    counts: np.ndarray

    def __post_init__(self) -> None:
        counts = np.array(self.counts, dtype=np.int64, copy=True)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise LengthMismatch(f"contingency table must be square, got {counts.shape}")
        if counts.size and counts.min() < 0:
            raise DomainError("contingency counts must be nonnegative")
        counts.flags.writeable = False
        object.__setattr__(self, "counts", counts)

    @property
    def K(self) -> int:
        return int(self.counts.shape[0])

    @property
    def N(self) -> int:
        return int(self.counts.sum())

    @property
    def rows(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def columns(self) -> np.ndarray:
        return self.counts.sum(axis=0)


@dataclass(frozen=True)
class DiversityVerdict:
    kappa: Optional[float]
    delta: Optional[float]
    diverse: bool
    N: int


@dataclass(frozen=True, eq=False)
class ComparisonResult:
    statistic: float
    p_value: float
    reject: bool
    appropriate: Optional[np.ndarray] = None


def build_contingency(
    pred1: Sequence[int], pred2: Sequence[int], truth: Sequence[int], K: int
) -> ContingencyTable:
    pred1 = np.asarray(pred1, dtype=np.int64)
    pred2 = np.asarray(pred2, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if not (pred1.shape == pred2.shape == truth.shape):
        raise LengthMismatch(
            f"sequence lengths differ: {pred1.size}, {pred2.size}, {truth.size}"
        )
    for labels in (pred1, pred2, truth):
        if labels.size and (labels.min() < 0 or labels.max() >= K):
            raise DomainError(f"labels must lie in [0, {K})")
    wrong = (pred1 != truth) | (pred2 != truth)
    counts = np.zeros((K, K), dtype=np.int64)
    np.add.at(counts, (pred1[wrong], pred2[wrong]), 1)
    return ContingencyTable(counts)


def agreement_terms(t: ContingencyTable) -> Tuple[float, float]:
    """Observed (Theta1) and chance (Theta2) agreement."""
    N = t.N
    if N == 0:
        raise UndefinedKappa("kappa is undefined for an empty table")
    theta1 = float(np.trace(t.counts)) / N
    theta2 = float(np.dot(t.rows, t.columns)) / (N * N)
    return theta1, theta2


def kappa(t: ContingencyTable) -> float:
    theta1, theta2 = agreement_terms(t)
    if abs(1.0 - theta2) < THETA_EPSILON:
        raise UndefinedKappa("chance agreement is 1, kappa is undefined")
    return float(np.clip((theta1 - theta2) / (1.0 - theta2), -1.0, 1.0))


def t_quantile(df: float, p: float) -> float:
    """Student t quantile by inverting the regularized incomplete beta."""
    if not df >= 1:
        raise DomainError(f"degrees of freedom must be >= 1, got {df}")
    if not 0.0 < p < 1.0:
        raise DomainError(f"probability must lie in (0, 1), got {p}")
    if p == 0.5:
        return 0.0
    tail = 2.0 * min(p, 1.0 - p)
    x = float(special.betaincinv(df / 2.0, 0.5, tail))
    t = float(np.sqrt(df * (1.0 - x) / x))
    return t if p > 0.5 else -t


def diversity_threshold(N: int, alpha: float) -> float:
    """Smallest |kappa| that is significant at alpha for N disagreements."""
    if N <= 2:
        raise DomainError(f"need N >= 3 for a diversity threshold, got {N}")
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    tc = t_quantile(N - 2, 1.0 - alpha / 2.0)
    return tc / float(np.sqrt(N - 2 + tc * tc))


def diversity_verdict(t: ContingencyTable, alpha: float) -> DiversityVerdict:
    N = t.N
    if N <= 2:
        return DiversityVerdict(None, None, False, N)
    delta = diversity_threshold(N, alpha)
    try:
        k = kappa(t)
    except UndefinedKappa:
        return DiversityVerdict(None, delta, False, N)
    if abs(k) >= 1.0:
        return DiversityVerdict(k, delta, False, N)
    return DiversityVerdict(k, delta, abs(k) < delta, N)


#
# multiple comparison over accuracy matrices (k algorithms x r runs)
#
def _runs(acc: Any) -> np.ndarray:
    return np.asarray(getattr(acc, "runs", acc), dtype=float)


def run_ranks(acc: Any) -> np.ndarray:
    """k x r ranks within each run, 1 = most accurate, ties averaged."""
    runs = _runs(acc)
    return stats.rankdata(-runs, axis=0)


def average_ranks(acc: Any) -> np.ndarray:
    return run_ranks(acc).mean(axis=1)


def reference_index(acc: Any) -> int:
    """Highest mean accuracy; argmax keeps the lowest index among ties."""
    return int(np.argmax(_runs(acc).mean(axis=1)))


def friedman_test(acc: Any, alpha: float) -> ComparisonResult:
    runs = _runs(acc)
    k, r = runs.shape
    if k < 3:
        raise DomainError(f"Friedman test needs k >= 3 algorithms, got {k}")
    if r < 2:
        raise DomainError(f"Friedman test needs r >= 2 runs, got {r}")
    mean_ranks = average_ranks(runs)
    statistic = 12.0 * r / (k * (k + 1)) * (
        float(np.sum(mean_ranks ** 2)) - k * (k + 1) ** 2 / 4.0
    )
    # rounding can leave a tiny negative value for all-tied runs
    statistic = max(statistic, 0.0)
    p_value = float(stats.chi2.sf(statistic, k - 1))
    log.debug("friedman k=%d r=%d chi2=%.4f p=%.4g", k, r, statistic, p_value)
    return ComparisonResult(statistic, p_value, p_value < alpha)


def holm_procedure(acc: Any, alpha: float) -> np.ndarray:
    """Bits marking the reference and every algorithm Holm cannot separate
    from it."""
    runs = _runs(acc)
    k, r = runs.shape
    if k < 2 or r < 2:
        raise DomainError(f"Holm procedure needs k >= 2 and r >= 2, got {k}x{r}")
    ref = reference_index(runs)
    mean_ranks = average_ranks(runs)
    se = np.sqrt(k * (k + 1) / (6.0 * r))
    others = np.array([j for j in range(k) if j != ref])
    z = (mean_ranks[others] - mean_ranks[ref]) / se
    p = 2.0 * stats.norm.sf(np.abs(z))

    bits = np.ones(k, dtype=np.int8)
    m = others.size
    for step, idx in enumerate(np.argsort(p, kind="stable")):
        if p[idx] >= alpha / (m - step):
            break
        bits[others[idx]] = 0
    return bits


def wilcoxon_test(acc: Any, alpha: float) -> ComparisonResult:
    """Two-sided paired signed-rank test between two algorithms."""
    runs = _runs(acc)
    if runs.shape[0] != 2:
        raise DomainError(f"Wilcoxon test compares exactly 2 algorithms, got {runs.shape[0]}")
    if runs.shape[1] < 2:
        raise DomainError(f"Wilcoxon test needs r >= 2 runs, got {runs.shape[1]}")
    diff = runs[0] - runs[1]
    if np.all(diff == 0):
        return ComparisonResult(0.0, 1.0, False)
    statistic, p_value = stats.wilcoxon(runs[0], runs[1])
    p_value = float(p_value)
    if np.isnan(p_value):
        p_value = 1.0
    return ComparisonResult(float(statistic), p_value, p_value < alpha)
