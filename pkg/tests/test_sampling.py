import json
from math import comb, pi, sqrt

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.polynomial import chebyshev as npc
from scipy import stats

from chebmin.sampling import (
    SampleSet, default_grid_size, grid_for_count, sample_iid, sample_points, tensor_grid,
)


class TestIID:
    def test_ks_against_arcsine_cdf(self):
        S = sample_iid(1, 10 ** 5, 42)
        res = stats.kstest(S.points[:, 0], lambda x: 1.0 - np.arccos(x) / pi)
        assert res.statistic <= 0.006

    def test_transformed_mean(self):
        S = sample_iid(1, 10 ** 5, 7)
        assert 0.497 <= np.mean(np.arccos(S.points[:, 0]) / pi) <= 0.503

    def test_empty(self):
        S = sample_iid(2, 0, 1)
        assert len(S) == 0 and S.points.shape == (0, 2)

    def test_deterministic(self):
        a, b = sample_iid(3, 50, 123), sample_iid(3, 50, 123)
        assert np.array_equal(a.points, b.points)

    def test_seed_changes_points(self):
        assert not np.array_equal(sample_iid(2, 10, 1).points, sample_iid(2, 10, 2).points)

    @given(st.integers(1, 4), st.integers(0, 200), st.integers(0, 2 ** 63 - 1))
    def test_in_cube_and_provenance(self, n, k, seed):
        S = sample_iid(n, k, seed)
        assert S.points.shape == (k, n)
        assert np.all(np.abs(S.points) <= 1.0)
        assert S.provenance == {"kind": "iid", "seed": seed, "k": k}

    def test_coordinates_uncorrelated(self):
        S = sample_iid(2, 20000, 3)
        assert abs(np.corrcoef(S.points.T)[0, 1]) < 0.03


class TestGrid:
    def test_single_node(self):
        assert np.allclose(tensor_grid(1, 1).points, [[0.0]], atol=1e-16)

    def test_two_nodes(self):
        assert np.allclose(sorted(tensor_grid(1, 2).points[:, 0]), [-sqrt(2) / 2, sqrt(2) / 2])

    def test_120_squared(self):
        assert len(tensor_grid(2, 120)) == 14400

    @pytest.mark.parametrize("m", [1, 2, 5, 17, 120])
    def test_nodes_are_chebyshev_roots(self, m):
        x = tensor_grid(1, m).points[:, 0]
        c = np.zeros(m + 1)
        c[m] = 1.0
        assert np.max(np.abs(npc.chebval(x, c))) <= 1e-12

    def test_matches_numpy_chebpts1(self):
        assert np.allclose(np.sort(tensor_grid(1, 9).points[:, 0]), np.sort(npc.chebpts1(9)))

    @given(st.integers(1, 3), st.integers(1, 12))
    def test_count_and_distinct(self, n, m):
        S = tensor_grid(n, m)
        assert len(S) == m ** n
        assert len({tuple(p) for p in S.points}) == m ** n

    def test_grid_for_count(self):
        assert grid_for_count(2, 100).provenance["points_per_axis"] == 10
        assert grid_for_count(2, 101).provenance["points_per_axis"] == 11
        assert grid_for_count(3, 27).provenance["points_per_axis"] == 3

    def test_default_grid_size(self):
        assert default_grid_size(2, 18) == 120
        assert default_grid_size(2, 70) == 142
        m = default_grid_size(4, 8)
        assert m >= 2 * 9 or m ** 4 * comb(12, 4) <= 2e7
        assert m >= 10

    def test_sample_points_dispatch(self):
        assert sample_points(2, 16, "grid").is_grid
        assert not sample_points(2, 16, "iid", seed=1).is_grid
        with pytest.raises(ValueError):
            sample_points(2, 16, "sobol")


class TestSerialization:
    def test_roundtrip_files(self, tmp_path):
        S = sample_iid(2, 12, 5)
        csv_path, side = S.save(tmp_path / "s.csv")
        assert json.loads(side.read_text())["provenance"]["seed"] == 5
        T = SampleSet.load(csv_path)
        assert np.array_equal(T.points, S.points)
        assert T.provenance == S.provenance

    def test_csv_header(self):
        assert tensor_grid(2, 2).to_csv().splitlines()[0] == "x1,x2"
