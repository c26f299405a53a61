from __future__ import annotations

import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from soilscreen import dbscan, geodata
from soilscreen.dbscan import DbscanConfig
from soilscreen.geodata import FeatureMatrix

from oracles import brute_dbscan, canonical


def _fm(x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    return FeatureMatrix(x, [f"f{j}" for j in range(x.shape[1])], [f"r{i}" for i in range(len(x))])


class TestKDistance:
    def test_collinear(self):
        assert dbscan.k_distance_profile(_fm([0.0, 1.0, 2.0]), 1).tolist() == [1.0, 1.0, 1.0]

    def test_k_too_large(self):
        with pytest.raises(ValueError, match="k < n"):
            dbscan.k_distance_profile(_fm([0.0, 1.0, 2.0]), 3)

    def test_outlier_appends_one_large_value(self):
        rng = np.random.default_rng(0)
        blobs = np.vstack([rng.normal(0, 0.05, (10, 2)), rng.normal(5, 0.05, (10, 2))])
        base = dbscan.k_distance_profile(_fm(blobs), 1)
        assert base.max() < 0.5
        with_out = dbscan.k_distance_profile(_fm(np.vstack([blobs, [[100.0, 100.0]]])), 1)
        assert np.array_equal(with_out[:-1], base)
        assert with_out[-1] > 90

    @given(st.integers(3, 25), st.integers(1, 4), st.integers(0, 10_000))
    def test_matches_brute_force(self, n, k, seed):
        x = np.random.default_rng(seed).normal(size=(n, 3))
        k = min(k, n - 1)
        brute = sorted(sorted(np.linalg.norm(x[i] - x[j]) for j in range(n) if j != i)[k - 1] for i in range(n))
        assert np.allclose(dbscan.k_distance_profile(_fm(x), k), brute, rtol=1e-12)


class TestSuggestEps:
    def test_knee_before_jump(self):
        assert dbscan.suggest_eps(np.array([1, 1, 1, 1, 10.0])) == 1.0

    def test_linear_profile(self):
        with pytest.warns(UserWarning, match="no clear knee"):
            assert dbscan.suggest_eps(np.arange(1.0, 8.0)) == 4.0

    def test_constant_profile(self):
        with pytest.warns(UserWarning, match="constant"):
            assert dbscan.suggest_eps(np.full(6, 2.5)) == 2.5

    def test_fixture_knee_in_range(self, fixture_dataset):
        z = geodata.standardize(fixture_dataset.features())
        eps = dbscan.suggest_eps(dbscan.k_distance_profile(z, 5))
        assert 1.0 <= eps <= 2.0


class TestCluster:
    def test_single_dense_group(self):
        x = np.random.default_rng(1).uniform(0, 0.1, (10, 2))
        lab = dbscan.cluster(_fm(x), DbscanConfig(eps=0.5, min_samples=5))
        assert lab.n_clusters == 1 and lab.n_noise == 0

    def test_far_point_is_noise(self):
        x = np.vstack([np.random.default_rng(2).uniform(0, 0.1, (10, 2)), [[100.0, 100.0]]])
        lab = dbscan.cluster(_fm(x), DbscanConfig(eps=0.5, min_samples=5))
        assert lab.n_clusters == 1
        assert lab.noise.tolist() == [False] * 10 + [True]

    def test_fixture(self, fixture_dataset):
        z = geodata.standardize(fixture_dataset.features())
        lab = dbscan.cluster(z, DbscanConfig(eps=1.5, min_samples=5))
        assert lab.n_noise == 0
        assert 3 <= lab.n_clusters <= 7

    def test_tiny_eps_fixture_mostly_noise(self, fixture_dataset):
        z = geodata.standardize(fixture_dataset.features())
        lab = dbscan.cluster(z, DbscanConfig(eps=0.1, min_samples=5))
        expected = brute_dbscan(z.values, 0.1, 5)
        assert lab.labels.tolist() == expected.tolist()
        assert lab.n_noise > 60

    def test_border_joins_first_seeded_cluster(self):
        # two groups on a line, the last row sits midway and touches a core of each
        x = np.array([[-1.0], [-1.1], [-1.2], [1.0], [1.1], [1.2], [0.0]])
        lab = dbscan.cluster(_fm(x), DbscanConfig(eps=1.0, min_samples=4))
        assert lab.is_core[0] and lab.is_core[3] and not lab.is_core[6]
        assert lab.n_clusters == 2
        assert lab.labels[6] == lab.labels[0] == 0

    @given(
        st.integers(1, 30), st.integers(1, 5), st.floats(0.05, 3.0), st.integers(1, 8), st.integers(0, 2**31)
    )
    def test_matches_oracle(self, n, d, eps, min_samples, seed):
        x = np.random.default_rng(seed).normal(size=(n, d))
        lab = dbscan.cluster(_fm(x), DbscanConfig(eps=eps, min_samples=min_samples))
        assert canonical(lab.labels) == canonical(brute_dbscan(x, eps, min_samples))

    def test_bad_config(self):
        with pytest.raises(ValueError):
            DbscanConfig(eps=0.0)
        with pytest.raises(ValueError):
            DbscanConfig(min_samples=0)


class TestDetect:
    def test_noise_is_the_flag(self):
        x = np.vstack([np.zeros((6, 2)), [[9.0, 9.0]]])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res, lab = dbscan.detect(_fm(x), DbscanConfig(eps=0.5, min_samples=3))
        assert res.detector_name == "dbscan"
        assert res.is_anomaly.tolist() == lab.noise.tolist() == [False] * 6 + [True]
        assert res.scores[-1] > res.scores[0]
