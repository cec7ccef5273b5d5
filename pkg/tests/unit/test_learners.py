import json
import unittest

import numpy as np

from metarec import learners
from metarec.errors import ConfigError, EmptyDataset, MalformedInput, SchemaMismatch
from metarec.learners import LandmarkKind, Leaf, Split, TreeParams
from metarec.tabular import Attribute, TabularDataset

BINARY = Attribute.nominal('class', ('0', '1'))


def xor() -> TabularDataset:
    # cells (0,0) x3, (0,1) x2, (1,0) x2, (1,1) x1
    rows = [(0, 0)] * 3 + [(0, 1)] * 2 + [(1, 0)] * 2 + [(1, 1)]
    X = np.array(rows, dtype=float)
    y = (X[:, 0] != X[:, 1]).astype(int)
    return TabularDataset(
        'xor',
        (Attribute.nominal('a', ('0', '1')), Attribute.nominal('b', ('0', '1'))),
        BINARY, X, y,
    )


def line() -> TabularDataset:
    return TabularDataset(
        'line', (Attribute.numeric('x'),), BINARY,
        np.arange(1.0, 7.0)[:, None], [0, 0, 0, 1, 1, 1],
    )


def signal_and_noise(seed: int = 0) -> TabularDataset:
    rng = np.random.default_rng(seed)
    y = np.repeat([0, 1], 40)
    X = np.column_stack([y * 3.0 + rng.normal(scale=0.3, size=80), rng.normal(size=80)])
    return TabularDataset(
        'sn', (Attribute.numeric('signal'), Attribute.numeric('noise')), BINARY, X, y
    )


class TestHelpers(unittest.TestCase):

    def test_entropy(self) -> None:
        assert learners.entropy([1, 1]) == 1.0
        assert learners.entropy([4, 0]) == 0.0
        np.testing.assert_allclose(learners.entropy([[1, 1, 1, 1], [0, 0, 0, 0]]), [2.0, 0.0])

    def test_laplace(self) -> None:
        np.testing.assert_allclose(learners.laplace([3, 1]), [4 / 6, 2 / 6])

    def test_tree_params(self) -> None:
        with self.assertRaises(ConfigError):
            TreeParams(min_leaf=0)
        with self.assertRaises(ConfigError):
            TreeParams(max_depth=0)


class TestDecisionTree(unittest.TestCase):

    def test_xor_fits_training_set(self) -> None:
        d = xor()
        tree = learners.train_tree(d, TreeParams(min_leaf=1))
        np.testing.assert_array_equal(tree.predict(d.X), d.y)
        assert max(level for _, level in tree.nodes()) == 3

    def test_single_class(self) -> None:
        d = TabularDataset('one', (Attribute.numeric('x'),), BINARY, [[1.0], [2.0], [3.0]], [0, 0, 0])
        tree = learners.train_tree(d)
        assert isinstance(tree.root, Leaf)
        proba = tree.predict_proba([9.0])
        assert proba.argmax() == 0
        np.testing.assert_allclose(proba, [4 / 5, 1 / 5])

    def test_min_leaf_covers_everything(self) -> None:
        d = line()
        tree = learners.train_tree(d, TreeParams(min_leaf=d.n_instances))
        assert isinstance(tree.root, Leaf)
        np.testing.assert_allclose(tree.predict_proba([0.0]), [0.5, 0.5])

    def test_numeric_threshold(self) -> None:
        tree = learners.train_tree(line(), TreeParams(min_leaf=1))
        assert isinstance(tree.root, Split)
        assert tree.root.threshold == 3.5
        assert tree.predict(np.array([[3.0], [4.0]])).tolist() == [0, 1]

    def test_max_depth(self) -> None:
        tree = learners.train_tree(xor(), TreeParams(min_leaf=1, max_depth=1))
        assert max(level for _, level in tree.nodes()) == 2

    def test_missing_goes_to_heaviest_child(self) -> None:
        d = TabularDataset(
            'skew', (Attribute.numeric('x'),), BINARY,
            np.array([1.0, 2.0, 3.0, 4.0, 10.0, 11.0])[:, None], [0, 0, 0, 0, 1, 1],
        )
        tree = learners.train_tree(d, TreeParams(min_leaf=1))
        assert tree.root.heaviest == 0
        np.testing.assert_allclose(tree.predict_proba([np.nan]), tree.predict_proba([1.0]))

    def test_schema_mismatch(self) -> None:
        tree = learners.train_tree(xor(), TreeParams(min_leaf=1))
        with self.assertRaises(SchemaMismatch):
            tree.predict_proba([0.0])
        with self.assertRaises(SchemaMismatch):
            tree.predict_proba([0.0, 5.0])

    def test_empty(self) -> None:
        d = TabularDataset('e', (Attribute.numeric('x'),), BINARY, np.empty((0, 1)), [])
        with self.assertRaises(EmptyDataset):
            learners.train_tree(d)

    def test_document(self) -> None:
        d = xor()
        tree = learners.train_tree(d, TreeParams(min_leaf=1))
        doc = json.loads(json.dumps(tree.to_dict()))
        again = learners.DecisionTree.from_dict(doc)
        np.testing.assert_allclose(again.predict_proba_batch(d.X), tree.predict_proba_batch(d.X))
        assert again.params == tree.params

    def test_bad_document(self) -> None:
        with self.assertRaises(MalformedInput):
            learners.DecisionTree.from_dict({'format': 1})
        with self.assertRaises(MalformedInput):
            learners.DecisionTree.from_dict({'format': 99})

    def test_restricted_attributes(self) -> None:
        d = signal_and_noise()
        tree = learners.train_tree(d, TreeParams(min_leaf=1, max_depth=1), attributes=[1])
        if isinstance(tree.root, Split):
            assert tree.root.attribute == 1


class TestLandmarkers(unittest.TestCase):

    def test_distance(self) -> None:
        schema = (Attribute.numeric('x'), Attribute.nominal('c', ('p', 'q')))
        X = np.array([[0.0, 0], [10.0, 1]])
        dist = learners.MixedDistance(schema, X)
        np.testing.assert_allclose(dist(X, X), [[0.0, 2.0], [2.0, 0.0]])
        np.testing.assert_allclose(dist(np.array([[5.0, np.nan]]), X), [[1.5, 1.5]])

    def test_naive_bayes(self) -> None:
        d = signal_and_noise()
        model = learners.train_landmarker(d, LandmarkKind.NAIVE_BAYES)
        assert np.mean(model.predict(d.X) == d.y) >= 0.95

    def test_nearest_neighbor_recalls_training_set(self) -> None:
        d = signal_and_noise()
        model = learners.train_landmarker(d, '1nn')
        np.testing.assert_array_equal(model.predict(d.X), d.y)

    def test_gains(self) -> None:
        gains = learners.attribute_gains(signal_and_noise())
        assert gains[0] > gains[1]

    def test_node_choice(self) -> None:
        d = signal_and_noise()
        assert learners.train_landmarker(d, 'decision-node').attribute == 0
        assert learners.train_landmarker(d, 'worst-node').attribute == 1
        assert learners.train_landmarker(d, 'elite-1nn').columns == [0]
        random_node = learners.train_landmarker(d, 'random-node', seed=4)
        assert random_node.attribute in (0, 1)

    def test_majority(self) -> None:
        d = TabularDataset('m', (Attribute.numeric('x'),), BINARY, [[0.0], [1.0], [2.0]], [1, 1, 0])
        assert learners.MajorityClass(d).predict(d.X).tolist() == [1, 1, 1]

    def test_unknown_kind(self) -> None:
        with self.assertRaises(ValueError):
            learners.train_landmarker(line(), 'svm')
