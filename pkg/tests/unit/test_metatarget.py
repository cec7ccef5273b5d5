import os
import tempfile
import unittest

import numpy as np

from metarec import metatarget
from metarec.errors import ConfigError, DomainError, MalformedInput, OutOfRangeAccuracy
from metarec.metatarget import AccuracyMatrix, MetaTarget
from metarec.synthetic import generate_corpus


def alternating() -> AccuracyMatrix:
    runs = np.empty((3, 50))
    runs[0] = np.where(np.arange(50) % 2 == 0, 0.9, 0.85)
    runs[1] = np.where(np.arange(50) % 2 == 0, 0.85, 0.9)
    runs[2] = 0.5
    return AccuracyMatrix(('a', 'b', 'c'), runs)


class TestAccuracyMatrix(unittest.TestCase):

    def test_shape(self) -> None:
        acc = alternating()
        assert (acc.k, acc.r) == (3, 50)
        np.testing.assert_allclose(acc.mean_accuracy(), [0.875, 0.875, 0.5])

    def test_out_of_range(self) -> None:
        with self.assertRaises(OutOfRangeAccuracy):
            AccuracyMatrix(('a', 'b'), [[0.5, 1.2], [0.4, 0.3]])

    def test_duplicate_names(self) -> None:
        with self.assertRaises(MalformedInput):
            AccuracyMatrix(('a', 'a'), [[0.5], [0.4]])

    def test_name_count(self) -> None:
        with self.assertRaises(MalformedInput):
            AccuracyMatrix(('a',), [[0.5], [0.4]])


class TestMetaTarget(unittest.TestCase):

    def test_needs_appropriate(self) -> None:
        with self.assertRaises(MalformedInput):
            MetaTarget([0, 0, 0])

    def test_bits(self) -> None:
        with self.assertRaises(MalformedInput):
            MetaTarget([1, 2])
        assert MetaTarget([1, 0, 1]).k == 3


class TestCandidates(unittest.TestCase):

    def test_parse(self) -> None:
        spec = metatarget.parse_candidate('tree:min_leaf=10,max_depth=3')
        assert spec.kind == 'tree'
        assert spec.params.min_leaf == 10
        assert spec.params.max_depth == 3
        assert str(spec) == 'tree:min_leaf=10,max_depth=3'
        assert str(metatarget.parse_candidate('tree')) == 'tree'
        assert str(metatarget.parse_candidate('1nn')) == '1nn'

    def test_parse_errors(self) -> None:
        for text in ('svm', 'naive-bayes:min_leaf=2', 'tree:depth=3', 'tree:min_leaf=x', 'tree:min_leaf=0'):
            with self.assertRaises(ConfigError, msg=text):
                metatarget.parse_candidate(text)

    def test_defaults_parse(self) -> None:
        for text in metatarget.DEFAULT_CANDIDATES:
            assert str(metatarget.parse_candidate(text)) == text


class TestEstimate(unittest.TestCase):

    def setUp(self) -> None:
        self.d = generate_corpus(1, seed=21)[0]

    def test_layout(self) -> None:
        acc = metatarget.estimate_accuracy_matrix(
            self.d, ('majority', 'tree', 'naive-bayes'), seed=1, repetitions=2, folds=3
        )
        assert acc.names == ('majority', 'tree', 'naive-bayes')
        assert acc.runs.shape == (3, 6)
        assert np.all((acc.runs >= 0) & (acc.runs <= 1))

    def test_seeded(self) -> None:
        a = metatarget.estimate_accuracy_matrix(self.d, ('1nn', 'tree'), seed=4, repetitions=2, folds=5)
        b = metatarget.estimate_accuracy_matrix(self.d, ('1nn', 'tree'), seed=4, repetitions=2, folds=5)
        np.testing.assert_array_equal(a.runs, b.runs)

    def test_no_candidates(self) -> None:
        with self.assertRaises(ConfigError):
            metatarget.estimate_accuracy_matrix(self.d, ())


class TestDerive(unittest.TestCase):

    def test_identical(self) -> None:
        runs = np.tile(np.linspace(0.6, 0.9, 10), (4, 1))
        target = metatarget.derive_meta_target(AccuracyMatrix(tuple('abcd'), runs), 0.05, 'p')
        assert target.bits.tolist() == [1, 1, 1, 1]
        assert target.method == 'friedman'

    def test_dominated(self) -> None:
        target = metatarget.derive_meta_target(alternating(), 0.05)
        assert target.bits.tolist() == [1, 1, 0]
        assert target.method == 'friedman-holm'

    def test_two_candidates(self) -> None:
        rng = np.random.default_rng(3)
        runs = np.vstack([0.6 + rng.uniform(0, 0.05, 20), 0.9 + rng.uniform(0, 0.05, 20)])
        with self.assertLogs('metarec.metatarget', 'WARNING'):
            target = metatarget.derive_meta_target(AccuracyMatrix(('a', 'b'), runs))
        assert target.bits.tolist() == [0, 1]
        assert target.method == 'wilcoxon'

    def test_domain(self) -> None:
        with self.assertRaises(DomainError):
            metatarget.derive_meta_target(AccuracyMatrix(('a',), [[0.5, 0.6]]))
        with self.assertRaises(DomainError):
            metatarget.derive_meta_target(AccuracyMatrix(('a', 'b', 'c'), [[0.5], [0.6], [0.7]]))

    def random_matrices(self, seed: int, low: int = 2):
        rng = np.random.default_rng(seed)
        while True:
            k = int(rng.integers(low, 7))
            runs = np.round(rng.uniform(0.3, 0.6, size=(k, 20)) + rng.uniform(0, 0.1, size=(k, 1)), 2)
            means = np.sort(runs.mean(axis=1))
            # near-tied best means make the reference depend on column order
            if means[-1] - means[-2] > 1e-6:
                yield runs

    def test_permutation_equivariant(self) -> None:
        rng = np.random.default_rng(13)
        for _, runs in zip(range(50), self.random_matrices(11)):
            k = runs.shape[0]
            names = tuple(f'a{i}' for i in range(k))
            bits = metatarget.derive_meta_target(AccuracyMatrix(names, runs)).bits
            perm = rng.permutation(k)
            moved = metatarget.derive_meta_target(AccuracyMatrix(names, runs[perm])).bits
            np.testing.assert_array_equal(moved, bits[perm])

    def test_shift_invariant(self) -> None:
        for _, runs in zip(range(50), self.random_matrices(12, low=3)):
            names = tuple(f'a{i}' for i in range(runs.shape[0]))
            bits = metatarget.derive_meta_target(AccuracyMatrix(names, runs)).bits
            shifted = metatarget.derive_meta_target(AccuracyMatrix(names, runs + 0.25)).bits
            np.testing.assert_array_equal(shifted, bits)


class TestTables(unittest.TestCase):

    def setUp(self) -> None:
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def path(self, name: str) -> str:
        return os.path.join(self.tmp.name, name)

    def test_accuracy_matrix(self) -> None:
        acc = alternating()
        metatarget.write_accuracy_matrix(acc, self.path('p.csv'))
        again = metatarget.load_accuracy_matrix(self.path('p.csv'))
        assert again.names == acc.names
        np.testing.assert_allclose(again.runs, acc.runs)

    def test_accuracy_matrix_malformed(self) -> None:
        with open(self.path('bad.csv'), 'w') as fp:
            fp.write('a,b\n0.5,0.6\n0.7\n')
        with self.assertRaises(MalformedInput):
            metatarget.load_accuracy_matrix(self.path('bad.csv'))
        with open(self.path('range.csv'), 'w') as fp:
            fp.write('a,b\n0.5,1.5\n')
        with self.assertRaises(OutOfRangeAccuracy):
            metatarget.load_accuracy_matrix(self.path('range.csv'))

    def test_meta_targets(self) -> None:
        targets = [MetaTarget([1, 0, 1], 'p1'), MetaTarget([0, 1, 0], 'p2')]
        metatarget.write_meta_targets(('a', 'b', 'c'), targets, self.path('t.csv'))
        names, again = metatarget.read_meta_targets(self.path('t.csv'))
        assert names == ('a', 'b', 'c')
        assert [t.problem for t in again] == ['p1', 'p2']
        assert [t.bits.tolist() for t in again] == [[1, 0, 1], [0, 1, 0]]
