import json
import os
import tempfile
import unittest

import numpy as np
import pandas as pd

from metarec import evaluation
from metarec.ensemble import FilterMode, rank_algorithms
from metarec.errors import DegenerateTarget, DomainError, LengthMismatch, TooFewInstances
from metarec.evaluation import CvConfig
from metarec.metafeatures import FAMILY_ARITY, FAMILY_MEASURES, FamilyId, MetaFeatureGroupSet, MetaFeatureVector
from metarec.metatarget import MetaTarget

TIED_RANKS = (2.5, 5, 1, 4, 2.5)


def group(name: str, values: dict) -> MetaFeatureGroupSet:
    return MetaFeatureGroupSet(name, tuple(
        MetaFeatureVector(f, FAMILY_MEASURES[f], values[f], np.zeros(FAMILY_ARITY[f])) for f in FamilyId
    ))


def random_group(rng: np.random.Generator, name: str) -> MetaFeatureGroupSet:
    return group(name, {f: rng.normal(size=FAMILY_ARITY[f]) for f in FamilyId})


def meta_corpus(n: int, k: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    features = [random_group(rng, f'p{i:02d}') for i in range(n)]
    targets = []
    for g in features:
        bits = rng.integers(0, 2, size=k)
        bits[0] = int(g.vector(1).values[0] > 0)
        if not bits.any():
            bits[-1] = 1
        targets.append(MetaTarget(bits, g.problem))
    return features, targets


def enumerate_loss(ranks, truth) -> float:
    good = [i for i, t in enumerate(truth) if t]
    bad = [i for i, t in enumerate(truth) if not t]
    lost = sum(1 for a in good for b in bad if ranks[a] > ranks[b])
    return lost / (len(good) * len(bad))


def enumerate_average_precision(ranks, truth) -> float:
    order = sorted(range(len(ranks)), key=lambda i: (ranks[i], i))
    total = 0.0
    for m in range(1, len(order) + 1):
        if truth[order[m - 1]]:
            total += sum(truth[i] for i in order[:m]) / m
    return total / sum(truth)


class TestMetrics(unittest.TestCase):

    def test_ranking_loss(self) -> None:
        assert evaluation.ranking_loss((3, 1, 2), (1, 0, 0)) == 1.0
        assert evaluation.ranking_loss((2, 1, 3), (1, 0, 0)) == 0.5
        assert evaluation.ranking_loss((1, 2, 3), (1, 0, 0)) == 0.0

    def test_ties_cost_nothing(self) -> None:
        assert evaluation.ranking_loss((1.5, 1.5), (1, 0)) == 0.0

    def test_precision(self) -> None:
        assert evaluation.precision_at((1, 2), (0, 1), 2) == 0.5
        assert evaluation.precision_at(TIED_RANKS, (1, 0, 1, 0, 0), 2) == 1.0
        assert evaluation.precision_at(TIED_RANKS, (1, 0, 1, 0, 0), 1) == 1.0

    def test_precision_domain(self) -> None:
        with self.assertRaises(DomainError):
            evaluation.precision_at((1, 2), (0, 1), 3)

    def test_average_precision(self) -> None:
        self.assertAlmostEqual(evaluation.average_precision((1, 2, 3, 4, 5), (0, 0, 0, 0, 1)), 0.2)
        assert evaluation.average_precision(TIED_RANKS, (1, 0, 1, 0, 0)) == 1.0
        assert evaluation.average_precision((1, 2, 3), (1, 1, 0)) == 1.0

    def test_degenerate(self) -> None:
        for truth in ((0, 0, 0), (1, 1, 1)):
            with self.assertRaises(DegenerateTarget):
                evaluation.ranking_loss((1, 2, 3), truth)
            with self.assertRaises(DegenerateTarget):
                evaluation.average_precision((1, 2, 3), truth)

    def test_length(self) -> None:
        with self.assertRaises(LengthMismatch):
            evaluation.ranking_loss((1, 2), (1, 0, 0))

    def test_against_enumeration(self) -> None:
        rng = np.random.default_rng(42)
        checked = 0
        while checked < 1000:
            k = int(rng.integers(2, 9))
            truth = rng.integers(0, 2, size=k)
            if truth.sum() in (0, k):
                continue
            ranks = rank_algorithms(np.round(rng.uniform(size=k), 1))
            assert evaluation.ranking_loss(ranks, truth) == enumerate_loss(ranks, truth)
            self.assertAlmostEqual(
                evaluation.average_precision(ranks, truth),
                enumerate_average_precision(ranks, truth), delta=1e-12,
            )
            self.assertAlmostEqual(evaluation.precision_at(ranks, truth, k), truth.sum() / k, delta=1e-12)
            checked += 1

    def test_score(self) -> None:
        record = evaluation.score((0.7, 0.4, 0.8, 0.5, 0.7), (1, 0, 1, 0, 0), 'p', at=(1, 2, 9))
        assert record.problem == 'p'
        assert record.values() == {
            'ranking_loss': 0.0, 'average_precision': 1.0, 'precision@1': 1.0, 'precision@2': 1.0,
        }


class TestSummary(unittest.TestCase):

    def test_notch(self) -> None:
        s = evaluation.summarize([5, 1, 4, 2, 3])
        assert (s['n'], s['mean'], s['median'], s['q1'], s['q3']) == (5, 3.0, 3.0, 2.0, 4.0)
        half = 1.57 * 2 / np.sqrt(5)
        self.assertAlmostEqual(s['notch_low'], 3 - half)
        self.assertAlmostEqual(s['notch_high'], 3 + half)

    def test_empty(self) -> None:
        assert evaluation.summarize([])['n'] == 0


class TestCrossValidation(unittest.TestCase):

    def test_plan(self) -> None:
        cells = evaluation.plan_cells(33, CvConfig())
        assert len(cells) == 50
        for rep in range(5):
            tests = [c.test for c in cells if c.repetition == rep]
            assert sorted(np.concatenate(tests).tolist()) == list(range(33))
        for c in cells:
            assert not set(c.test) & set(c.rest)
            assert c.test.size + c.rest.size == 33

    def test_too_few(self) -> None:
        features, targets = meta_corpus(19, 3)
        with self.assertRaises(TooFewInstances):
            evaluation.run_cross_validation(features, targets)

    def test_config(self) -> None:
        with self.assertRaises(DomainError):
            CvConfig(modes=())
        with self.assertRaises(DomainError):
            CvConfig(folds=1)
        assert CvConfig().ensemble_name(FilterMode.ALL) == 'En'
        assert CvConfig(modes=('all', 'diverse')).ensemble_name(FilterMode.ALL) == 'En:all'

    def test_report(self) -> None:
        features, targets = meta_corpus(24, 3)
        config = CvConfig(modes=tuple(FilterMode), repetitions=2, folds=4, seed=3, precision_at=(1, 2))
        report = evaluation.run_cross_validation(features, targets, config, ('a', 'b', 'c'))
        assert report.n_cells == 8
        assert report.variants[:4] == ('En:all', 'En:accurate', 'En:diverse', 'En:accurate-and-diverse')
        assert len(report.variants) == 4 + 31
        assert report.kept['all'] == 31.0
        assert report.kept['diverse'] <= report.kept['all']
        assert set(report.summary) == {'ranking_loss', 'average_precision', 'precision@1', 'precision@2'}
        frame = report.summary['ranking_loss']
        assert frame['variant'].tolist() == list(report.variants)
        assert frame['mean'].between(0, 1).all()

        with tempfile.TemporaryDirectory() as tmp:
            evaluation.write_report(report, tmp)
            with open(os.path.join(tmp, 'report.json')) as fp:
                doc = json.load(fp)
            assert doc['config']['seed'] == 3
            assert doc['config']['modes'] == [m.value for m in FilterMode]
            assert len(doc['cells']) == 8
            assert pd.read_csv(os.path.join(tmp, 'average_precision.csv')).shape[0] == 35

    def test_deterministic(self) -> None:
        features, targets = meta_corpus(20, 2, seed=4)
        config = CvConfig(repetitions=1, folds=4, seed=9)
        first = evaluation.run_cross_validation(features, targets, config)
        second = evaluation.run_cross_validation(features, targets, config)
        assert json.dumps(first.to_dict(), sort_keys=True) == json.dumps(second.to_dict(), sort_keys=True)


class TestFamilyCorrelation(unittest.TestCase):

    def test_independent(self) -> None:
        rng = np.random.default_rng(8)
        features = [random_group(rng, f'p{i}') for i in range(200)]
        corr = evaluation.family_correlation(features)
        assert corr.shape == (5, 5)
        assert np.all((corr >= 0) & (corr <= 1))
        off = corr[~np.eye(5, dtype=bool)]
        assert off.max() <= 0.15, off

    def test_duplicated_family(self) -> None:
        rng = np.random.default_rng(9)
        features = []
        for i in range(30):
            z = rng.normal()
            values = {f: rng.normal(size=FAMILY_ARITY[f]) for f in FamilyId}
            values[FamilyId.STATISTICAL] = z * np.arange(1.0, 32.0)
            values[FamilyId.MODEL_STRUCTURE] = -z * np.arange(1.0, 16.0) + 2
            features.append(group(f'p{i}', values))
        corr = evaluation.family_correlation(features)
        self.assertAlmostEqual(corr[0, 1], 1.0)
        self.assertAlmostEqual(corr[0, 0], 1.0)

    def test_constant_family(self) -> None:
        rng = np.random.default_rng(10)
        features = []
        for i in range(10):
            values = {f: rng.normal(size=FAMILY_ARITY[f]) for f in FamilyId}
            values[FamilyId.LANDMARKING] = np.full(6, 0.5)
            features.append(group(f'p{i}', values))
        corr = evaluation.family_correlation(features)
        assert np.isnan(corr[2]).all()
        assert np.isnan(corr[:, 2]).all()
        assert not np.isnan(corr[0, 1])

    def test_too_few(self) -> None:
        rng = np.random.default_rng(0)
        with self.assertRaises(TooFewInstances):
            evaluation.family_correlation([random_group(rng, 'a'), random_group(rng, 'b')])
