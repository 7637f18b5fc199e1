"""
Tests for item scoring and negative sampling
"""

import numpy as np
import pytest


class TestScoring:
    """Tests for dot-product scores"""

    def test_orthogonal_and_self(self):
        """Orthogonal rows score 0; a row scored against itself gives its squared norm"""
        from src.layers.objective import score_items

        table = np.array([[1.0, 0.0], [0.0, 2.0], [3.0, 4.0]])
        users = np.array([[1.0, 0.0], [3.0, 4.0]])
        scores = score_items(users, table, np.array([[1, 0], [2, 2]]))
        assert scores.tolist() == [[0.0, 1.0], [25.0, 25.0]]

    def test_matches_loop(self, rng):
        """Batched scores equal a per-pair loop"""
        from src.layers.objective import score_items

        table = rng.standard_normal((20, 5))
        users = rng.standard_normal((4, 5))
        candidates = rng.integers(0, 20, size=(4, 7))
        scores = score_items(users, table, candidates)
        for b in range(4):
            for c in range(7):
                assert abs(scores[b, c] - float(users[b] @ table[candidates[b, c]])) <= 1e-10

    def test_shape_errors(self, rng):
        """Mismatched shapes and unknown ids are rejected"""
        from src.layers.objective import score_items
        from src.utils.errors import DimensionError

        table = rng.standard_normal((5, 3))
        with pytest.raises(DimensionError):
            score_items(rng.standard_normal((2, 4)), table, np.zeros((2, 1), dtype=int))
        with pytest.raises(DimensionError):
            score_items(rng.standard_normal((2, 3)), table, np.zeros((3, 1), dtype=int))
        with pytest.raises(IndexError):
            score_items(rng.standard_normal((1, 3)), table, np.array([[5]]))

    def test_recorded_scores_agree(self, rng):
        """The tape version gives the same values as the plain one"""
        from src.layers.objective import score_candidates, score_items
        from src.numkit.autograd import Tape

        table = rng.standard_normal((10, 4))
        users = rng.standard_normal((3, 4))
        candidates = rng.integers(0, 10, size=(3, 6))

        tape = Tape(enabled=False)
        recorded = score_candidates(tape.constant(users), tape.constant(table), candidates)
        assert np.allclose(recorded.value, score_items(users, table, candidates), atol=1e-12)

    def test_full_catalog(self, rng):
        """Full-catalog scores are the product with the item table"""
        from src.layers.objective import user_item_scores

        table = rng.standard_normal((8, 3))
        users = rng.standard_normal((2, 3))
        assert np.allclose(user_item_scores(users, table), users @ table.T, atol=1e-12)


class TestNegativeSampling:
    """Tests for uniform negatives"""

    def test_two_items(self):
        """With two items every negative is the other one"""
        from src.layers.objective import sample_negatives

        assert sample_negatives(np.random.default_rng(0), 0, 2, k=64).tolist() == [1] * 64

    def test_never_target(self):
        """The target is never drawn"""
        from src.layers.objective import sample_negatives

        draws = sample_negatives(np.random.default_rng(2), 3, 5, k=2000)
        assert not np.any(draws == 3)
        assert set(draws.tolist()) == {0, 1, 2, 4}

    def test_deterministic(self):
        """One seed, one sample sequence"""
        from src.layers.objective import sample_negatives

        a = sample_negatives(np.random.default_rng(9), 10, 100)
        b = sample_negatives(np.random.default_rng(9), 10, 100)
        assert np.array_equal(a, b)
        assert len(a) == 64

    def test_uniform(self):
        """Every non-target id appears within five standard deviations of uniform"""
        from src.layers.objective import sample_negatives

        n_items, draws = 1000, 100_000
        counts = np.bincount(sample_negatives(np.random.default_rng(5), 0, n_items, k=draws), minlength=n_items)
        p = 1.0 / (n_items - 1)
        sigma = np.sqrt(draws * p * (1.0 - p))
        assert counts[0] == 0
        assert np.all(np.abs(counts[1:] - draws * p) <= 5.0 * sigma)

    def test_history_exclusion(self):
        """Excluded ids are never drawn; an empty candidate set is an error"""
        from src.layers.objective import sample_negatives
        from src.utils.errors import SamplingError

        draws = sample_negatives(np.random.default_rng(1), 2, 6, k=300, exclude=[0, 1])
        assert set(draws.tolist()) == {3, 4, 5}
        with pytest.raises(SamplingError):
            sample_negatives(np.random.default_rng(1), 2, 4, exclude=[0, 1, 3])

    def test_invalid_inputs(self):
        """Catalogs below two items and out-of-range targets are rejected"""
        from src.layers.objective import sample_negative_batch, sample_negatives
        from src.utils.errors import ContractError, SamplingError

        with pytest.raises(SamplingError):
            sample_negatives(np.random.default_rng(0), 0, 1)
        with pytest.raises(SamplingError):
            sample_negative_batch(np.random.default_rng(0), np.array([0]), 1)
        with pytest.raises(ContractError):
            sample_negatives(np.random.default_rng(0), 7, 5)

    def test_batch(self):
        """Batch rows avoid their own targets; history rows match per-user sampling"""
        from src.layers.objective import sample_negative_batch, sample_negatives

        targets = np.array([0, 4, 9, 4])
        batch = sample_negative_batch(np.random.default_rng(3), targets, 10, k=50)
        assert batch.shape == (4, 50)
        assert not np.any(batch == targets[:, None])

        histories = [np.array([1, 2]), np.array([0]), np.array([8]), np.array([], dtype=np.int64)]
        excluded = sample_negative_batch(np.random.default_rng(3), targets, 10, k=5, histories=histories)
        rng = np.random.default_rng(3)
        for row, (target, history) in enumerate(zip(targets, histories)):
            assert np.array_equal(excluded[row], sample_negatives(rng, int(target), 10, 5, exclude=history.tolist()))
