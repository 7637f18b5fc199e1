"""
Tests for the spectral layer and the synthetic benchmark
"""

import numpy as np
import pytest


class TestSvd:
    """Tests for the deterministic thin SVD"""

    def test_contract(self, rng):
        """Orthonormal factors, ordered spectrum, exact reconstruction"""
        from src.layers.spectral import svd_decompose

        for rows, cols in [(12, 5), (5, 12), (120, 40), (30, 256)]:
            E = rng.standard_normal((rows, cols))
            F = svd_decompose(E)
            r = F.rank
            assert r == min(rows, cols)
            assert np.allclose(F.U.T @ F.U, np.eye(r), atol=1e-8)
            assert np.allclose(F.Vt @ F.Vt.T, np.eye(r), atol=1e-8)
            assert np.all(np.diff(F.sigma) <= 0)
            assert np.allclose(F.reconstruct(), E, atol=1e-8 * max(1.0, F.sigma[0]))

    def test_contract_on_random_sizes(self, rng):
        """Reconstruction and orthonormality hold on 50 random shapes up to 300 x 1024"""
        from src.layers.spectral import svd_decompose

        for _ in range(50):
            rows, cols = int(rng.integers(1, 301)), int(rng.integers(1, 1025))
            E = rng.standard_normal((rows, cols))
            F = svd_decompose(E)
            r = F.rank
            assert np.linalg.norm(E - (F.U * F.sigma) @ F.Vt) <= 1e-5 * np.linalg.norm(E)
            assert np.linalg.norm(F.U.T @ F.U - np.eye(r)) <= 1e-6
            assert np.linalg.norm(F.Vt @ F.Vt.T - np.eye(r)) <= 1e-6

    def test_sign_convention(self, small_factors):
        """Largest-magnitude entry of every U column is positive"""
        U = small_factors.U
        pivots = np.argmax(np.abs(U), axis=0)
        assert np.all(U[pivots, np.arange(U.shape[1])] > 0)

    def test_repeatable(self, small_semantic):
        """Same input, bitwise identical factors"""
        from src.layers.spectral import svd_decompose

        a, b = svd_decompose(small_semantic), svd_decompose(small_semantic)
        assert np.array_equal(a.U, b.U)
        assert np.array_equal(a.sigma, b.sigma)

    def test_rank_deficient_trimmed(self, rng):
        """Near-zero singular values are dropped"""
        from src.layers.spectral import svd_decompose

        E = rng.standard_normal((20, 3)) @ rng.standard_normal((3, 10))
        F = svd_decompose(E)
        assert F.rank == 3
        assert F.U.shape == (20, 3)
        assert F.Vt.shape == (3, 10)

    def test_non_finite(self):
        """NaN input is a data error"""
        from src.layers.spectral import svd_decompose
        from src.utils.errors import DataError

        with pytest.raises(DataError):
            svd_decompose(np.array([[1.0, np.inf], [0.0, 1.0]]))


class TestStaticProjections:
    """Tests for the truncation and whitening baselines"""

    def test_truncate_matches_principal_projection(self, small_semantic, small_factors):
        """U_d diag(sigma_d) equals E V_d"""
        from src.layers.spectral import truncate_project

        projected = truncate_project(small_factors, 6)
        assert projected.shape == (30, 6)
        assert np.allclose(projected, small_semantic @ small_factors.Vt[:6].T, atol=1e-10)

    def test_identity_is_whitened(self, small_factors):
        """Columns are orthonormal"""
        from src.layers.spectral import identity_project

        projected = identity_project(small_factors, 5)
        assert np.allclose(projected.T @ projected, np.eye(5), atol=1e-10)

    def test_truncation_is_best_rank_d(self, small_semantic, small_factors, rng):
        """No random rank-d reconstruction beats the leading singular triplets"""
        d = 5
        best = small_factors.U[:, :d] * small_factors.sigma[:d] @ small_factors.Vt[:d]
        best_error = np.linalg.norm(small_semantic - best)

        for _ in range(50):
            basis, _ = np.linalg.qr(rng.standard_normal((small_semantic.shape[0], d)))
            projected = basis @ (basis.T @ small_semantic)
            assert np.linalg.norm(small_semantic - projected) >= best_error

            factor = rng.standard_normal((small_semantic.shape[0], d)) @ rng.standard_normal((d, 16))
            assert np.linalg.norm(small_semantic - factor) >= best_error

        shifted = small_factors.U[:, 1:d + 1] * small_factors.sigma[1:d + 1] @ small_factors.Vt[1:d + 1]
        assert np.linalg.norm(small_semantic - shifted) > best_error

    def test_dimension_bounds(self, small_factors):
        """d must lie in [1, r]"""
        from src.layers.spectral import truncate_project
        from src.utils.errors import DimensionError

        with pytest.raises(DimensionError):
            truncate_project(small_factors, small_factors.rank + 1)
        with pytest.raises(DimensionError):
            truncate_project(small_factors, 0)

    def test_zero_sigma_whitening(self):
        """Whitening a zero direction is singular"""
        from src.layers.spectral import SvdFactors, identity_project
        from src.utils.errors import SingularityError

        F = SvdFactors(U=np.eye(3), sigma=np.array([2.0, 1.0, 0.0]), Vt=np.eye(3))
        with pytest.raises(SingularityError):
            identity_project(F, 3)

    def test_dynamic_kinds_rejected(self, small_factors):
        """Only the two static kinds have a fixed projection"""
        from src.config.constants import TransformKind
        from src.layers.spectral import static_projection
        from src.utils.errors import UnsupportedOperationError

        with pytest.raises(UnsupportedOperationError):
            static_projection(small_factors, TransformKind.SPECTRAN, 4)


class TestSpectrum:
    """Tests for the covariance spectrum diagnostic"""

    def test_fractions(self, small_semantic):
        """Nonincreasing eigenvalues and cumulative mass ending at one"""
        from src.layers.spectral import cumulative_spectrum

        report = cumulative_spectrum(small_semantic)
        assert np.all(np.diff(report.eigenvalues) <= 1e-12)
        assert np.all(np.diff(report.fractions) >= -1e-12)
        assert report.fractions[-1] == pytest.approx(1.0)
        assert 1 <= report.effective_rank() <= 16

    def test_collapsed_embeddings(self, rng):
        """Rank-one data concentrates all mass in one component"""
        from src.layers.spectral import cumulative_spectrum

        E = np.outer(rng.standard_normal(50), rng.standard_normal(8))
        report = cumulative_spectrum(E, top_k=3)
        assert report.fraction_at(1) == pytest.approx(1.0)
        assert report.effective_rank() == 1
        assert report.entropy_effective_rank() == pytest.approx(1.0, abs=1e-6)
        assert len(report.rows("projected")) == 3
        assert report.rows("projected")[0]["source"] == "projected"

    def test_row_order_does_not_matter(self, small_semantic, rng):
        """Shuffling items leaves the spectrum unchanged"""
        from src.layers.spectral import cumulative_spectrum

        base = cumulative_spectrum(small_semantic)
        for _ in range(5):
            shuffled = cumulative_spectrum(small_semantic[rng.permutation(small_semantic.shape[0])])
            assert np.allclose(shuffled.eigenvalues, base.eigenvalues, rtol=1e-10, atol=1e-12)
            assert np.allclose(shuffled.fractions, base.fractions, rtol=0.0, atol=1e-12)

    def test_top_k_bounds(self, small_semantic):
        """top_k cannot exceed the column count"""
        from src.layers.spectral import cumulative_spectrum
        from src.utils.errors import DimensionError

        with pytest.raises(DimensionError):
            cumulative_spectrum(small_semantic, top_k=17)

    def test_constant_rows(self):
        """Zero variance cannot be normalised"""
        from src.layers.spectral import cumulative_spectrum
        from src.utils.errors import DataError

        with pytest.raises(DataError):
            cumulative_spectrum(np.ones((5, 3)))


class TestSpectralLayer:
    """Tests for the memoizing spectral service layer"""

    def test_decompose_is_cached(self, small_semantic, tmp_path):
        """The second decomposition of the same matrix is a cache hit"""
        from src.layers.spectral import SpectralLayer
        from src.utils.caching import FactorCache

        layer = SpectralLayer(FactorCache(cache_dir=tmp_path / "factors"))
        first = layer.decompose(small_semantic)
        second = layer.decompose(small_semantic)

        assert layer.cache.hits == 1
        assert layer.cache.misses == 1
        assert np.array_equal(first.sigma, second.sigma)
        assert list((tmp_path / "factors").glob("*.joblib"))

    def test_disk_cache_survives_new_instance(self, small_semantic, tmp_path):
        """A fresh cache over the same directory reads the stored factors"""
        from src.layers.spectral import SpectralLayer
        from src.utils.caching import FactorCache

        SpectralLayer(FactorCache(cache_dir=tmp_path / "factors")).decompose(small_semantic)
        layer = SpectralLayer(FactorCache(cache_dir=tmp_path / "factors"))
        layer.decompose(small_semantic)
        assert layer.cache.hits == 1


class TestSynthetic:
    """Tests for the planted-spectrum benchmark generator"""

    @staticmethod
    def _section(**overrides):
        from src.config.run_config import SynthSection

        fields = dict(n_items=40, n_users=30, dim=16, rank=8, min_seq_len=5, max_seq_len=8, noise=0.0)
        fields.update(overrides)
        return SynthSection(**fields)

    def test_planted_spectrum(self):
        """Noise-free singular values equal the geometric profile"""
        from src.layers.spectral import svd_decompose
        from src.layers.synthetic import planted_spectrum, synth_generate

        cfg = self._section()
        semantic, _ = synth_generate(cfg, np.random.default_rng(0))
        F = svd_decompose(semantic)

        assert semantic.shape == (40, 16)
        assert F.rank == 8
        assert np.allclose(F.sigma, planted_spectrum(cfg), atol=1e-8)
        assert np.allclose(semantic.mean(axis=0), 0.0, atol=1e-10)

    def test_sequences(self):
        """Every user's sequence length lies in the configured range"""
        from src.layers.synthetic import synth_generate

        _, log = synth_generate(self._section(), np.random.default_rng(1))
        lengths = [len(seq) for seq in log.sequences()]
        assert log.n_users == 30
        assert min(lengths) >= 5
        assert max(lengths) <= 8
        assert log.item_ids.max() < 40

    def test_same_seed_same_benchmark(self):
        """Generation is a pure function of the seed"""
        from src.layers.synthetic import synth_generate

        cfg = self._section(noise=0.01)
        a_sem, a_log = synth_generate(cfg, np.random.default_rng(5))
        b_sem, b_log = synth_generate(cfg, np.random.default_rng(5))
        assert np.array_equal(a_sem, b_sem)
        assert np.array_equal(a_log.items, b_log.items)
        assert np.array_equal(a_log.timestamps, b_log.timestamps)

    def test_rank_too_large(self):
        """Latent rank above min(N, l) is a configuration error"""
        from src.layers.synthetic import synth_generate
        from src.utils.errors import ConfigError

        with pytest.raises(ConfigError):
            synth_generate(self._section(rank=20), np.random.default_rng(0))

    def test_choices_follow_preference_softmax(self):
        """Without drift every step samples proportionally to softmax(taste . item factors)"""
        from src.layers.synthetic import sample_sequences

        tastes = np.array([[0.8, -0.4]])
        item_factors = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.5, 0.5], [0.0, -2.0]])
        steps = 20_000
        chosen = sample_sequences(tastes, item_factors, steps, np.random.default_rng(4))

        logits = tastes[0] @ item_factors.T
        probs = np.exp(logits - logits.max())
        probs /= probs.sum()
        counts = np.bincount(chosen[0], minlength=5)
        sigma = np.sqrt(steps * probs * (1.0 - probs))
        assert np.all(np.abs(counts - steps * probs) <= 5.0 * sigma)

    def test_drift_follows_last_item(self):
        """Full drift with a strong item signal repeats the previous choice"""
        from src.layers.synthetic import sample_sequences

        item_factors = 10.0 * np.eye(3)
        tastes = np.zeros((4, 3))
        sticky = sample_sequences(tastes, item_factors, 12, np.random.default_rng(2), drift=1.0, scale=2.0)
        assert np.all(sticky == sticky[:, :1])

        free = sample_sequences(tastes, item_factors, 12, np.random.default_rng(2))
        assert not np.all(free == free[:, :1])

    def test_default_has_no_drift(self):
        """The default benchmark samples from fixed user tastes"""
        from src.config.run_config import SynthSection

        assert SynthSection().drift == 0.0
