import numpy as np
import pytest

from curator.clustering import (
    assign,
    cluster_distribution,
    effective_k,
    inertia,
    kmeans_fit,
)


def two_blobs(seed=0, n=1000, sep=10.0, sigma=0.1):
    rng = np.random.default_rng(seed)
    a = rng.normal(-sep, sigma, size=(n, 1))
    b = rng.normal(sep, sigma, size=(n, 1))
    return np.vstack([a, b])


def lloyd_full_batch(points, init, iters=50):
    """Independent full-batch Lloyd's iteration used as an oracle."""
    centroids = init.copy()
    for _ in range(iters):
        d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        labels = np.argmin(d2, axis=1)
        for c in range(centroids.shape[0]):
            members = points[labels == c]
            if members.size:
                centroids[c] = members.mean(axis=0)
    return centroids


class TestKmeansFit:
    def test_k1_is_mean(self):
        pts = np.random.default_rng(1).normal(size=(500, 2))
        model = kmeans_fit(pts, k=1, seed=0)
        np.testing.assert_allclose(model.centroids[0], pts.mean(axis=0), atol=1e-3)

    def test_two_blobs_matches_lloyd_oracle(self):
        pts = two_blobs()
        model = kmeans_fit(pts, k=2, seed=3)
        got = np.sort(model.centroids.ravel())
        oracle = np.sort(
            lloyd_full_batch(pts, np.array([[-1.0], [1.0]])).ravel()
        )
        np.testing.assert_allclose(got, oracle, atol=0.1)
        assert abs(got[0] + 10.0) < 0.1 and abs(got[1] - 10.0) < 0.1

    def test_n_less_than_k(self):
        with pytest.raises(ValueError, match="at least k"):
            kmeans_fit(np.zeros((3, 1)), k=5)

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError, match="non-finite"):
            kmeans_fit(np.array([[1.0], [np.nan]]), k=1)

    def test_deterministic_given_seed(self):
        pts = np.random.default_rng(7).normal(size=(400, 3))
        a = kmeans_fit(pts, k=5, seed=11)
        b = kmeans_fit(pts, k=5, seed=11)
        assert a.centroids.tobytes() == b.centroids.tobytes()

    def test_seed_changes_output(self):
        pts = np.random.default_rng(7).normal(size=(400, 3))
        a = kmeans_fit(pts, k=5, seed=11)
        b = kmeans_fit(pts, k=5, seed=12)
        assert a.centroids.tobytes() != b.centroids.tobytes()

    def test_refinement_never_worse_than_init(self):
        pts = np.random.default_rng(5).normal(size=(2000, 2))
        init = kmeans_fit(pts, k=8, seed=2, max_iters=0)
        fitted = kmeans_fit(pts, k=8, seed=2)
        assert inertia(fitted, pts) <= inertia(init, pts) + 1e-12

    def test_separated_blobs_recovered(self):
        # k well-separated blobs: >= 99% label purity across seeds
        rng = np.random.default_rng(0)
        k, per = 4, 300
        centers = np.array([0.0, 30.0, 60.0, 90.0])
        pts = np.concatenate(
            [rng.normal(c, 1.0, size=per) for c in centers]
        )[:, None]
        truth = np.repeat(np.arange(k), per)
        ok = 0
        for seed in range(20):
            model = kmeans_fit(pts, k=k, seed=seed)
            labels = assign(model, pts)
            # map each fitted label to its majority truth blob
            agree = 0
            for c in range(k):
                members = truth[labels == c]
                if members.size:
                    agree += np.max(np.bincount(members, minlength=k))
            ok += agree / pts.shape[0] >= 0.99
        assert ok == 20


class TestAssign:
    def make_model(self):
        pts = np.array([[0.0], [1.0], [2.0], [3.0], [4.0]])
        return kmeans_fit(pts, k=5, seed=0, max_iters=0)

    def test_exact_centroid(self):
        model = self.make_model()
        c3 = model.centroids[3]
        assert assign(model, c3[None, :])[0] == 3

    def test_tie_breaks_low_index(self):
        from curator.clustering import ClusterModel

        model = ClusterModel(
            centroids=np.array([[0.0], [2.0], [9.0], [7.0], [4.0]]),
            feature_names=("f0",), seed=0,
            scale_min=np.array([0.0]), scale_range=np.array([1.0]),
        )
        # 3.0 is equidistant to centroids 1 and 4; lowest index wins
        assert assign(model, np.array([[3.0]]))[0] == 1

    def test_matches_brute_force(self):
        rng = np.random.default_rng(9)
        pts = rng.normal(size=(300, 2))
        model = kmeans_fit(pts, k=6, seed=1)
        labels = assign(model, pts)
        norm = (pts - model.scale_min) / model.scale_range
        cnorm = (model.centroids - model.scale_min) / model.scale_range
        brute = np.array(
            [int(np.argmin([(p - c) @ (p - c) for c in cnorm])) for p in norm]
        )
        np.testing.assert_array_equal(labels, brute)

    def test_dimension_mismatch(self):
        model = self.make_model()
        with pytest.raises(ValueError, match="features"):
            assign(model, np.zeros((2, 3)))

    def test_idempotent(self):
        rng = np.random.default_rng(3)
        pts = rng.normal(size=(100, 1))
        model = kmeans_fit(pts, k=3, seed=0)
        a = assign(model, pts)
        b = assign(model, pts)
        np.testing.assert_array_equal(a, b)


class TestClusterDistribution:
    def test_counting(self):
        np.testing.assert_allclose(
            cluster_distribution([0, 0, 0, 1], 2), [0.75, 0.25]
        )

    def test_one_hot(self):
        np.testing.assert_allclose(
            cluster_distribution([2, 2, 2], 4), [0, 0, 1, 0]
        )

    def test_uniform(self):
        np.testing.assert_allclose(
            cluster_distribution(list(range(5)) * 3, 5), [0.2] * 5
        )

    def test_sums_to_one(self):
        rng = np.random.default_rng(0)
        labels = rng.integers(0, 7, size=999)
        assert abs(cluster_distribution(labels, 7).sum() - 1.0) < 1e-12

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            cluster_distribution([], 2)

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            cluster_distribution([0, 5], 3)


def test_effective_k_reduces_with_warning():
    with pytest.warns(UserWarning, match="distinct"):
        assert effective_k(np.array([1.0, 1.0, 2.0]), 5) == 2
    assert effective_k(np.arange(10.0), 5) == 5
