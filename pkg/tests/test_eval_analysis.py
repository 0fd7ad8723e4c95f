"""Embedding-space analysis: distance and the 3-d projection.

The projection tests deliberately check the iterative solver against
numpy's full eigendecomposition; the production path must never switch
to eigh or these stop being independent.
"""

import math

import numpy as np
import pytest

from biasforge.llm_client import EmbeddingSet
from biasforge.mitigation import compute_alignment_loss
from biasforge.eval import embedding_distance, project3


def eset(vectors, source="original", prefix="v"):
    vectors = [list(map(float, v)) for v in vectors]
    return EmbeddingSet.build(
        vectors=vectors,
        source=source,
        ids=[f"{prefix}{i}" for i in range(len(vectors))],
    )


class TestEmbeddingDistance:
    def test_hand_example(self):
        orig = eset([[0.0, 0.0], [2.0, 2.0]])  # mean (1, 1)
        aug = eset([[0.0, 0.0]], "augmented", "a")  # mean (0, 0)
        assert embedding_distance(orig, aug) == pytest.approx(math.sqrt(2.0))

    def test_identical_sets_zero(self):
        vs = [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]
        assert embedding_distance(eset(vs), eset(vs, "augmented", "a")) == 0.0

    def test_square_is_alignment_loss(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            a = eset(rng.normal(size=(int(rng.integers(1, 12)), 5)).tolist())
            b = eset(rng.normal(size=(int(rng.integers(1, 12)), 5)).tolist(), "augmented", "b")
            d = embedding_distance(a, b)
            loss = compute_alignment_loss(a, b)
            assert d * d == pytest.approx(loss, rel=1e-9, abs=1e-15)


def eigh_oracle(pooled):
    """Top-3 principal axes straight from numpy's full eigendecomposition."""
    X = np.asarray(pooled, dtype=np.float64)
    Xc = X - X.mean(axis=0)
    cov = Xc.T @ Xc / (len(X) - 1)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1]
    vals = vals[order][:3]
    vecs = vecs[:, order][:, :3].T
    trace = np.trace(cov)
    return vecs, vals / trace


def axis_aligned_cloud(scales, n=400, dim=None, seed=3):
    """Gaussian cloud with independent per-axis scales (diagonal covariance)."""
    dim = dim or len(scales)
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, dim))
    X[:, : len(scales)] *= np.asarray(scales)
    X[:, len(scales):] *= 0.01
    return X


class TestProject3:
    def test_recovers_axis_aligned_structure(self):
        X = axis_aligned_cloud([9.0, 5.0, 2.5], dim=6)
        proj = project3([eset(X.tolist())])
        oracle_vecs, oracle_shares = eigh_oracle(X)
        for k in range(3):
            corr = abs(float(np.dot(proj.components[k], oracle_vecs[k])))
            assert corr >= 0.999, f"component {k} correlation {corr}"
            assert proj.shares[k] == pytest.approx(oracle_shares[k], rel=1e-6)
        assert not proj.warnings

    def test_random_cloud_matches_oracle(self):
        rng = np.random.default_rng(11)
        # Random covariance with well-separated spectrum so power iteration
        # and eigh cannot disagree about ordering.
        basis, _ = np.linalg.qr(rng.normal(size=(7, 7)))
        scales = np.array([8.0, 4.0, 2.0, 0.5, 0.2, 0.1, 0.05])
        X = rng.normal(size=(500, 7)) * scales @ basis.T
        proj = project3([eset(X.tolist())])
        oracle_vecs, oracle_shares = eigh_oracle(X)
        for k in range(3):
            corr = abs(float(np.dot(proj.components[k], oracle_vecs[k])))
            assert corr >= 0.999
            assert proj.shares[k] == pytest.approx(oracle_shares[k], rel=1e-6)

    def test_coords_are_centered_projections(self):
        X = axis_aligned_cloud([3.0, 2.0, 1.0], n=60, dim=4, seed=9)
        proj = project3([eset(X.tolist())])
        Xc = X - X.mean(axis=0)
        expect = Xc @ np.asarray(proj.components).T
        assert np.allclose(np.asarray(proj.coords), expect, atol=1e-9)

    def test_pools_sets_and_labels_sources(self):
        a = axis_aligned_cloud([2.0, 1.0, 0.5], n=10, dim=3, seed=1)
        b = axis_aligned_cloud([2.0, 1.0, 0.5], n=7, dim=3, seed=2) + 5.0
        proj = project3([eset(a.tolist(), "original", "o"), eset(b.tolist(), "augmented", "a")])
        assert len(proj.coords) == 17
        assert proj.sources == ("original",) * 10 + ("augmented",) * 7
        assert proj.ids[:2] == ("o0", "o1") and proj.ids[-1] == "a6"

    def test_two_cluster_separation(self):
        rng = np.random.default_rng(5)
        a = rng.normal(size=(40, 5)) * 0.1
        b = rng.normal(size=(40, 5)) * 0.1 + np.array([10.0, 0, 0, 0, 0])
        proj = project3([eset(a.tolist(), "original"), eset(b.tolist(), "augmented", "b")])
        first = np.asarray(proj.coords)[:, 0]
        assert (first[:40] > 0).all() != (first[40:] > 0).all()
        assert abs(first[:40].mean() - first[40:].mean()) > 9.0
        assert proj.shares[0] > 0.99

    def test_rank_deficient_pads_with_zeros(self):
        # Points vary along only 2 directions; third component must be a
        # zero vector with zero share plus a warning.
        rng = np.random.default_rng(13)
        coeffs = rng.normal(size=(50, 2)) * [4.0, 1.5]
        X = np.zeros((50, 5))
        X[:, 0] = coeffs[:, 0]
        X[:, 3] = coeffs[:, 1]
        proj = project3([eset(X.tolist())])
        assert np.allclose(proj.components[2], 0.0)
        assert proj.shares[2] == 0.0
        assert any("rank" in w for w in proj.warnings)
        oracle_vecs, _ = eigh_oracle(X)
        for k in range(2):
            assert abs(float(np.dot(proj.components[k], oracle_vecs[k]))) >= 0.999

    def test_all_identical_vectors(self):
        proj = project3([eset([[1.0, 2.0, 3.0]] * 8)])
        assert np.allclose(proj.coords, 0.0)
        assert proj.shares == (0.0, 0.0, 0.0)
        assert proj.warnings

    def test_deterministic(self):
        X = axis_aligned_cloud([5.0, 2.0, 1.0], n=80, dim=4, seed=21)
        p1 = project3([eset(X.tolist())])
        p2 = project3([eset(X.tolist())])
        assert np.array_equal(p1.components, p2.components)
        assert np.array_equal(p1.coords, p2.coords)
        assert p1.shares == p2.shares

    def test_dim_mismatch_rejected(self):
        with pytest.raises(Exception, match="dim"):
            project3([eset([[1.0, 2.0, 3.0]]), eset([[1.0, 2.0]], "augmented", "b")])

    def test_needs_three_dims(self):
        with pytest.raises(Exception, match="3"):
            project3([eset([[1.0, 2.0]])])
