from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from refscan.errors import DimensionError, InputError
from refscan.retrieval import VisualTokenGrid, build_trajectory, build_trajectory_set, nearest_token


def brute_force_nearest(query, frame_tokens):
    """Independent oracle: explicit loop over cells, strict < keeps first min."""
    best_idx, best_d = 0, float("inf")
    for i, tok in enumerate(frame_tokens):
        d = float(np.sqrt(np.sum((np.asarray(query) - np.asarray(tok)) ** 2)))
        if d < best_d:
            best_idx, best_d = i, d
    return best_idx


class TestNearestToken:
    def test_exact_match(self):
        idx, tok = nearest_token([1.0, 0.0], [[1.0, 0.0], [0.0, 1.0]])
        assert idx == 0
        assert np.linalg.norm(np.asarray([1.0, 0.0]) - tok) == 0.0

    def test_tie_break_lowest_index(self):
        idx, _ = nearest_token([0.0, 0.0], [[1.0, 0.0], [1.0, 0.0]])
        assert idx == 0

    def test_hand_distances(self):
        # d^2 to [1,0] is 0.8, to [0,1] is 0.4
        idx, _ = nearest_token([0.6, 0.8], [[1.0, 0.0], [0.0, 1.0]])
        assert idx == 1

    def test_dim_mismatch(self):
        with pytest.raises(DimensionError):
            nearest_token([1.0, 0.0, 0.0], [[1.0, 0.0]])

    @given(st.integers(0, 10_000))
    @settings(max_examples=150, deadline=None)
    def test_matches_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        cells = int(rng.integers(1, 9))
        dim = int(rng.integers(1, 6))
        query = rng.normal(size=dim)
        tokens = rng.normal(size=(cells, dim))
        idx, _ = nearest_token(query, tokens)
        assert idx == brute_force_nearest(query, tokens)

    @given(st.integers(0, 10_000), st.floats(0.1, 100.0))
    @settings(max_examples=100, deadline=None)
    def test_invariant_under_positive_scaling(self, seed, scale):
        rng = np.random.default_rng(seed)
        query = rng.normal(size=4)
        tokens = rng.normal(size=(6, 4))
        idx_base, _ = nearest_token(query, tokens)
        idx_scaled, _ = nearest_token(query * scale, tokens * scale)
        assert idx_base == idx_scaled


class TestBuildTrajectory:
    def test_single_frame(self):
        grid = VisualTokenGrid(np.arange(8.0).reshape(1, 4, 2))
        traj = build_trajectory(np.array([6.1, 7.1]), grid)
        assert traj.length == 1
        assert traj.spatial_indices.tolist() == [3]
        np.testing.assert_array_equal(traj.tokens[0], [6.0, 7.0])

    def test_planted_exact_matches(self):
        frames, cells, dim = 5, 3, 4
        rng = np.random.default_rng(1)
        query = rng.normal(size=dim)
        grid_arr = rng.normal(size=(frames, cells, dim)) * 10.0
        for l in range(frames):
            grid_arr[l, l % cells] = query
        traj = build_trajectory(query, VisualTokenGrid(grid_arr))
        assert traj.spatial_indices.tolist() == [l % cells for l in range(frames)]

    def test_matches_exhaustive_oracle(self):
        rng = np.random.default_rng(2)
        grid_arr = rng.normal(size=(3, 4, 5))
        query = rng.normal(size=5)
        traj = build_trajectory(query, VisualTokenGrid(grid_arr))
        for l in range(3):
            assert traj.spatial_indices[l] == brute_force_nearest(query, grid_arr[l])

    def test_query_projection_applied(self):
        grid = VisualTokenGrid(np.array([[[1.0, 0.0], [0.0, 1.0]]]))
        proj = np.array([[0.0, 1.0], [1.0, 0.0]])  # swaps coordinates
        traj = build_trajectory(np.array([1.0, 0.0]), grid, query_projection=proj)
        assert traj.spatial_indices.tolist() == [1]

    def test_steps_are_one_based_and_ordered(self):
        grid = VisualTokenGrid(np.zeros((4, 2, 3)))
        traj = build_trajectory(np.zeros(3), grid)
        assert [l for l, _, _ in traj.steps()] == [1, 2, 3, 4]


class TestBuildTrajectorySet:
    def test_empty_queries(self):
        grid = VisualTokenGrid(np.zeros((2, 2, 3)))
        ts = build_trajectory_set(np.zeros((0, 3)), grid, "keyword")
        assert len(ts) == 0

    def test_duplicate_queries_duplicate_trajectories(self):
        rng = np.random.default_rng(3)
        grid = VisualTokenGrid(rng.normal(size=(3, 4, 5)))
        q = rng.normal(size=5)
        ts = build_trajectory_set(np.stack([q, q]), grid, "keyword")
        np.testing.assert_array_equal(ts.trajectories[0].spatial_indices, ts.trajectories[1].spatial_indices)
        np.testing.assert_array_equal(ts.trajectories[0].tokens, ts.trajectories[1].tokens)

    def test_composes_from_single_builds(self):
        rng = np.random.default_rng(4)
        grid = VisualTokenGrid(rng.normal(size=(3, 4, 5)))
        queries = rng.normal(size=(3, 5))
        ts = build_trajectory_set(queries, grid, "scene-attribute")
        for k in range(3):
            solo = build_trajectory(queries[k], grid)
            np.testing.assert_array_equal(ts.trajectories[k].spatial_indices, solo.spatial_indices)
        assert ts.trajectories[1].query_id == ("scene-attribute", 1)

    @given(st.integers(0, 10_000))
    @settings(max_examples=100, deadline=None)
    def test_fuzz_indices_in_range_and_full_length(self, seed):
        rng = np.random.default_rng(seed)
        frames = int(rng.integers(1, 6))
        cells = int(rng.integers(1, 7))
        dim = int(rng.integers(2, 5))
        grid = VisualTokenGrid(rng.normal(size=(frames, cells, dim)))
        ts = build_trajectory_set(rng.normal(size=(2, dim)), grid, "keyword")
        for traj in ts.trajectories:
            assert traj.length == frames
            assert np.all(traj.spatial_indices >= 0)
            assert np.all(traj.spatial_indices < cells)


def test_grid_validation():
    with pytest.raises(DimensionError):
        VisualTokenGrid(np.zeros((2, 3)))
    with pytest.raises(InputError):
        VisualTokenGrid(np.full((1, 1, 2), np.nan))
