import os
import tempfile
import unittest

import numpy as np
import pandas as pd

from metarec import metadata
from metarec.errors import ArityMismatch, DomainError, LengthMismatch
from metarec.metafeatures import FAMILY_ARITY, FAMILY_MEASURES, FamilyId, MetaFeatureGroupSet, MetaFeatureVector
from metarec.metatarget import MetaTarget


def random_group(rng: np.random.Generator, name: str) -> MetaFeatureGroupSet:
    return MetaFeatureGroupSet(name, tuple(
        MetaFeatureVector(f, FAMILY_MEASURES[f], rng.normal(size=FAMILY_ARITY[f]), np.zeros(FAMILY_ARITY[f]))
        for f in FamilyId
    ))


def random_target(rng: np.random.Generator, k: int, name: str) -> MetaTarget:
    bits = rng.integers(0, 2, size=k)
    bits[rng.integers(k)] = 1
    return MetaTarget(bits, name)


class TestCombinations(unittest.TestCase):

    def test_count(self) -> None:
        combos = metadata.feature_combinations(5)
        assert len(combos) == 31
        assert [c.combo_id for c in combos] == list(range(1, 32))
        assert len({c.members for c in combos}) == 31

    def test_order(self) -> None:
        combos = metadata.feature_combinations(3)
        assert [c.members for c in combos] == [(1,), (2,), (3,), (1, 2), (1, 3), (2, 3), (1, 2, 3)]
        assert str(combos[4]) == '{1,3}'

    def test_arity(self) -> None:
        combos = metadata.feature_combinations(5)
        assert combos[0].arity == 31
        assert combos[-1].arity == 77

    def test_domain(self) -> None:
        with self.assertRaises(DomainError):
            metadata.feature_combinations(0)
        with self.assertRaises(DomainError):
            metadata.FamilyCombo((), 1)


class TestMetaDataset(unittest.TestCase):

    def setUp(self) -> None:
        self.rng = np.random.default_rng(0)
        self.features = [random_group(self.rng, f'p{i}') for i in range(6)]
        self.targets = [random_target(self.rng, 3, f'p{i}') for i in range(6)]

    def test_assemble(self) -> None:
        combo = metadata.feature_combinations(5)[5]  # {1,2}
        m = metadata.assemble_meta_dataset(self.features, self.targets, combo, ('a', 'b', 'c'))
        assert m.X.shape == (6, 46)
        assert m.Y.shape == (6, 3)
        assert m.feature_names[0] == '1.Ins.Num'
        assert m.feature_names[31] == '2.Tree.Height'
        np.testing.assert_array_equal(m.X[2], np.concatenate([
            self.features[2].vector(1).values, self.features[2].vector(2).values,
        ]))

    def test_default_names(self) -> None:
        m = metadata.assemble_meta_dataset(self.features, self.targets, metadata.feature_combinations(5)[0])
        assert m.algorithms == ('A1', 'A2', 'A3')

    def test_length_mismatch(self) -> None:
        with self.assertRaises(LengthMismatch):
            metadata.assemble_meta_dataset(self.features[:5], self.targets, metadata.feature_combinations(5)[0])

    def test_misaligned_problems(self) -> None:
        targets = self.targets[1:] + self.targets[:1]
        with self.assertRaises(LengthMismatch):
            metadata.assemble_meta_dataset(self.features, targets, metadata.feature_combinations(5)[0])

    def test_name_count(self) -> None:
        with self.assertRaises(ArityMismatch):
            metadata.assemble_meta_dataset(
                self.features, self.targets, metadata.feature_combinations(5)[0], ('a', 'b')
            )

    def test_binary_relevance_is_lossless(self) -> None:
        combos = metadata.feature_combinations(5)
        for trial in range(100):
            n = int(self.rng.integers(1, 12))
            k = int(self.rng.integers(1, 8))
            features = [random_group(self.rng, f'p{i}') for i in range(n)]
            targets = [random_target(self.rng, k, f'p{i}') for i in range(n)]
            m = metadata.assemble_meta_dataset(features, targets, combos[trial % 31])
            parts = metadata.br_transform(m)
            assert len(parts) == k
            np.testing.assert_array_equal(np.column_stack([b.y for b in parts]), m.Y)
            for b in parts:
                np.testing.assert_array_equal(b.X, m.X)

    def test_as_tabular(self) -> None:
        m = metadata.assemble_meta_dataset(self.features, self.targets, metadata.feature_combinations(5)[2])
        d = metadata.br_transform(m)[1].as_tabular()
        assert d.target.categories == ('0', '1')
        assert d.n_attributes == 6
        np.testing.assert_array_equal(d.y, m.Y[:, 1])

    def test_write(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'meta.csv')
            m = metadata.assemble_meta_dataset(
                self.features, self.targets, metadata.feature_combinations(5)[2], ('a', 'b', 'c')
            )
            metadata.write_meta_dataset(m, path)
            frame = pd.read_csv(path)
        assert list(frame.columns[:2]) == ['problem', '3.Naive.Bayes']
        assert list(frame.columns[-3:]) == ['a', 'b', 'c']
        assert frame.shape == (6, 1 + 6 + 3)


class TestAlign(unittest.TestCase):

    def test_pairs_by_name(self) -> None:
        rng = np.random.default_rng(1)
        features = [random_group(rng, name) for name in ('x', 'y', 'z')]
        targets = [random_target(rng, 2, name) for name in ('z', 'w', 'x')]
        with self.assertLogs('metarec.metadata', 'WARNING'):
            f, t = metadata.align_problems(features, targets)
        assert [g.problem for g in f] == ['x', 'z']
        assert [g.problem for g in t] == ['x', 'z']

    def test_nothing_in_common(self) -> None:
        rng = np.random.default_rng(1)
        with self.assertRaises(LengthMismatch):
            metadata.align_problems([random_group(rng, 'x')], [random_target(rng, 2, 'y')])
