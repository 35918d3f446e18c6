import math

import numpy as np
import pytest

from miaudit.errors import DimError, RankError
from miaudit.features import (
    ChistParams,
    HogParams,
    chist_features,
    hog_features,
    load_pca_model,
    pca_fit,
    pca_transform,
    save_pca_model,
)


def brute_force_pca(reference, k):
    """Oracle: explicit covariance matrix eigendecomposition."""
    reference = np.asarray(reference, dtype=np.float64)
    mean = reference.mean(axis=0)
    centered = reference - mean
    cov = centered.T @ centered / (reference.shape[0] - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    return mean, eigvals[order][:k], eigvecs[:, order][:, :k].T


class TestPcaFit:
    def test_hand_worked_two_dim(self):
        ref = np.array([[1, 1], [-1, -1], [2, 2], [-2, -2]], dtype=float)
        model = pca_fit(ref, k=1)
        assert np.allclose(model.mean, [0.0, 0.0])
        assert np.allclose(model.components, [[1 / math.sqrt(2), 1 / math.sqrt(2)]])

    def test_full_rank_identity_reconstructs(self):
        rng = np.random.default_rng(3)
        ref = np.diag([5.0, 3.0, 2.0, 1.0]) @ np.eye(4)
        ref = np.vstack([ref, -ref])  # enough rows for rank 4
        model = pca_fit(ref, k=4)
        x = rng.standard_normal(4)
        recon = model.mean + pca_transform(model, x) @ model.components
        assert np.allclose(recon, x, atol=1e-10)

    def test_matches_brute_force_eigendecomposition(self):
        rng = np.random.default_rng(11)
        ref = rng.standard_normal((100, 50))
        model = pca_fit(ref, k=10)
        mean, eigvals, comps = brute_force_pca(ref, 10)
        assert np.allclose(model.mean, mean, atol=1e-12)
        assert np.allclose(model.explained_variance, eigvals, atol=1e-6)
        for got, want in zip(model.components, comps):
            # orientation is a convention; compare up to sign
            assert min(
                np.abs(got - want).max(), np.abs(got + want).max()
            ) < 1e-6

    def test_rank_deficient_rejected(self):
        ref = np.outer(np.arange(10.0), np.ones(5))  # rank 1 after centering
        with pytest.raises(RankError):
            pca_fit(ref, k=3)

    def test_diagonal_covariance_gives_axis_aligned_components(self):
        rng = np.random.default_rng(5)
        scales = np.array([4.0, 2.0, 1.0])
        ref = rng.standard_normal((5000, 3)) * scales
        model = pca_fit(ref, k=3)
        for row, axis in zip(model.components, np.eye(3)):
            assert min(np.abs(row - axis).max(), np.abs(row + axis).max()) < 0.05


class TestPcaTransform:
    def test_hand_worked_projection(self):
        ref = np.array([[1, 1], [-1, -1], [2, 2], [-2, -2]], dtype=float)
        model = pca_fit(ref, k=1)
        assert np.allclose(pca_transform(model, np.array([3.0, 3.0])), [3 * math.sqrt(2)])

    def test_mean_maps_to_zero(self):
        rng = np.random.default_rng(2)
        ref = rng.standard_normal((30, 6))
        model = pca_fit(ref, k=4)
        assert np.allclose(pca_transform(model, model.mean), 0.0)

    def test_distances_invariant_to_sign_flips(self):
        rng = np.random.default_rng(9)
        ref = rng.standard_normal((40, 8))
        model = pca_fit(ref, k=3)
        flipped = pca_fit(ref, k=3)
        flipped = type(model)(
            mean=model.mean,
            components=-model.components,
            k=model.k,
            explained_variance=model.explained_variance,
        )
        a, b = rng.standard_normal(8), rng.standard_normal(8)
        d1 = np.linalg.norm(pca_transform(model, a) - pca_transform(model, b))
        d2 = np.linalg.norm(pca_transform(flipped, a) - pca_transform(flipped, b))
        assert np.isclose(d1, d2)

    def test_dimension_mismatch(self):
        ref = np.random.default_rng(0).standard_normal((10, 4))
        model = pca_fit(ref, k=2)
        with pytest.raises(DimError):
            pca_transform(model, np.ones(5))

    def test_save_load_round_trip(self, tmp_path):
        rng = np.random.default_rng(4)
        model = pca_fit(rng.standard_normal((50, 12)), k=5)
        path = tmp_path / "model.pca"
        save_pca_model(model, path)
        back = load_pca_model(path)
        assert np.array_equal(back.mean, model.mean)
        assert np.array_equal(back.components, model.components)
        assert back.k == model.k


class TestHog:
    params = HogParams(image_shape=(28, 28), cell_size=7, orientation_bins=9, block_size=2)

    def test_constant_image_all_zeros(self):
        feats = hog_features(np.full((28, 28), 3.7), self.params)
        assert np.all(feats == 0.0)

    def test_feature_length(self):
        feats = hog_features(np.random.default_rng(0).random((28, 28)), self.params)
        cells = 28 // 7
        blocks = (cells - 2 + 1) ** 2
        assert feats.size == blocks * 2**2 * 9 == self.params.feature_length

    def test_vertical_edge_energy_in_horizontal_bin(self):
        image = np.zeros((28, 28))
        image[:, 14:] = 1.0  # vertical step edge: gradient points along x
        feats = hog_features(image, self.params)
        per_bin = feats.reshape(-1, 9).sum(axis=0)
        assert np.argmax(per_bin) == 0
        assert per_bin[0] > 0.9 * per_bin.sum()

    def test_gradient_flip_invariance(self):
        rng = np.random.default_rng(6)
        image = rng.random((28, 28))
        a = hog_features(image, self.params)
        b = hog_features(-image, self.params)  # all gradients rotate by 180 deg
        assert np.allclose(a, b)

    def test_shape_mismatch(self):
        with pytest.raises(DimError):
            hog_features(np.zeros((27, 28)), self.params)

    def test_indivisible_cell_size_rejected(self):
        with pytest.raises(DimError):
            HogParams(image_shape=(28, 28), cell_size=5)


class TestChist:
    def test_hand_binned_two_pixels(self):
        params = ChistParams(bins_per_channel=4, channels=3, intensity_range=(0.0, 256.0))
        image = np.array([[[0, 0, 0], [255, 255, 255]]], dtype=float)
        feats = chist_features(image, params)
        expected = np.tile([0.5, 0.0, 0.0, 0.5], 3)
        assert np.array_equal(feats, expected)

    def test_single_pixel(self):
        params = ChistParams(bins_per_channel=4, channels=3)
        image = np.array([[[10.0, 100.0, 250.0]]])
        feats = chist_features(image, params).reshape(3, 4)
        assert np.array_equal(feats[0], [1, 0, 0, 0])
        assert np.array_equal(feats[1], [0, 1, 0, 0])
        assert np.array_equal(feats[2], [0, 0, 0, 1])

    def test_out_of_range_clamped(self):
        params = ChistParams(bins_per_channel=2, channels=1, intensity_range=(0.0, 1.0))
        image = np.array([[[-5.0], [7.0]]])
        feats = chist_features(image, params)
        assert np.array_equal(feats, [0.5, 0.5])

    def test_per_channel_probability_vector(self):
        rng = np.random.default_rng(8)
        params = ChistParams(bins_per_channel=16, channels=3)
        image = rng.uniform(0, 256, size=(9, 9, 3))
        feats = chist_features(image, params).reshape(3, 16)
        assert np.all(feats >= 0)
        assert np.allclose(feats.sum(axis=1), 1.0)
