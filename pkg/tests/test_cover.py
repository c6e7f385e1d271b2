import itertools

import numpy as np
import pytest

from metricert.core import Dataset, LabeledExample
from metricert.cover import (
    CoverConfig,
    OutOfCover,
    Partition,
    assign_cell,
    assign_cells,
    build_partition,
    cell_counts,
    covering_number_upper_bound,
    greedy_cover,
)


def minimal_cover_size(points, radius, norm):
    """Exhaustive search for the smallest subset covering all points."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = len(points)

    def dist(a, b):
        return np.abs(a - b).sum() if norm == "l1" else np.linalg.norm(a - b)

    for size in range(1, n + 1):
        for subset in itertools.combinations(range(n), size):
            if all(
                min(dist(p, points[c]) for c in subset) <= radius + 1e-12
                for p in points
            ):
                return size
    return n


def make_ds(points, labels, R=None):
    X = np.atleast_2d(np.asarray(points, dtype=float))
    if R is None:
        R = float(np.linalg.norm(X, axis=1).max()) + 1e-12
    return Dataset(X, list(labels), R)


class TestGreedyCover:
    def test_line_radius_half(self):
        centers = greedy_cover([[0.0], [1.0], [2.0]], 0.5)
        assert len(centers) == 3
        assert minimal_cover_size([[0.0], [1.0], [2.0]], 0.5, "l2") == 3

    def test_single_point(self):
        assert len(greedy_cover([[0.3, 0.3]], 1.0)) == 1

    def test_greedy_trace(self):
        pts = [[0.0], [0.4], [0.8]]
        centers = greedy_cover(pts, 0.5)
        assert np.allclose(centers, [[0.0], [0.8]])
        # the middle point alone covers everything, greedy stays within 2x
        assert minimal_cover_size(pts, 0.5, "l2") == 1

    def test_empty_input(self):
        assert len(greedy_cover([], 1.0)) == 0

    def test_cover_validity_random(self):
        rng = np.random.default_rng(1)
        for norm in ("l1", "l2"):
            for _ in range(20):
                pts = rng.uniform(-1, 1, size=(30, 2))
                radius = float(rng.uniform(0.1, 1.0))
                centers = greedy_cover(pts, radius, norm)
                diff = pts[:, None, :] - centers[None, :, :]
                d = (
                    np.abs(diff).sum(axis=2)
                    if norm == "l1"
                    else np.linalg.norm(diff, axis=2)
                )
                assert d.min(axis=1).max() <= radius

    def test_at_most_twice_optimal_small(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            pts = rng.uniform(-1, 1, size=(8, 1))
            radius = 0.4
            got = len(greedy_cover(pts, radius))
            opt = minimal_cover_size(pts, radius, "l2")
            assert opt <= got <= 2 * opt

    def test_monotone_in_radius(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            pts = rng.uniform(-1, 1, size=(15, 2))
            big = len(greedy_cover(pts, 0.5))
            small = len(greedy_cover(pts, 0.25))
            assert small >= big


class TestCoveringNumberBound:
    def test_hand_values(self):
        assert covering_number_upper_bound(1.0, 1.0, 1) == 3
        assert covering_number_upper_bound(1.0, 2.0, 1) == 2
        assert covering_number_upper_bound(1.0, 0.5, 2) == 25

    def test_l1_rescale(self):
        # R*sqrt(2) in d=2
        assert covering_number_upper_bound(1.0, 1.0, 2, "l1") == int(
            np.ceil((1 + 2 * np.sqrt(2)) ** 2)
        )

    def test_overflow(self):
        with pytest.raises(OverflowError):
            covering_number_upper_bound(1.0, 1e-6, 20)

    def test_dominates_greedy_on_ball_data(self):
        rng = np.random.default_rng(4)
        R = 1.0
        for _ in range(20):
            pts = rng.uniform(-1, 1, size=(25, 2))
            pts *= R / np.linalg.norm(pts, axis=1).max()
            radius = float(rng.uniform(0.3, 1.0))
            for norm in ("l1", "l2"):
                got = len(greedy_cover(pts, radius, norm))
                assert got <= covering_number_upper_bound(R, radius, 2, norm)


class TestPartition:
    def test_identical_points_two_labels(self):
        ds = make_ds([[0.5, 0.0], [0.5, 0.0]], "ab")
        p = build_partition(ds, CoverConfig(gamma=1.0))
        assert p.centers.shape[0] == 1
        assert p.K == 2

    def test_line_three_cells(self):
        ds = make_ds([[0.0], [1.0], [2.0]], "aaa")
        p = build_partition(ds, CoverConfig(gamma=1.0))
        assert p.K == 3

    def test_same_cell_same_label_within_gamma(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            n = int(rng.integers(3, 15))
            ds = make_ds(
                rng.uniform(-1, 1, size=(n, 2)), rng.choice(["a", "b"], size=n)
            )
            gamma = float(rng.uniform(0.2, 1.5))
            p = build_partition(ds, CoverConfig(gamma=gamma))
            ids = assign_cells(p, ds.X, ds.y)
            assert (ids >= 0).all()
            for i in range(n):
                for j in range(n):
                    if ids[i] == ids[j]:
                        assert ds.y[i] == ds.y[j]
                        assert np.linalg.norm(ds.X[i] - ds.X[j]) <= gamma + 1e-9


class TestAssignCell:
    def test_center_maps_to_own_cell(self):
        ds = make_ds([[0.0, 0.0], [1.0, 0.0]], "aa")
        p = build_partition(ds, CoverConfig(gamma=0.5))
        z = LabeledExample(p.centers[1], "a")
        assert assign_cell(p, z) % p.centers.shape[0] == 1

    def test_tie_goes_to_lowest_index(self):
        p = Partition(gamma=2.0, norm="l2", centers=np.array([[0.0], [1.0]]), labels=("a",))
        z = LabeledExample(np.array([0.5]), "a")
        assert assign_cell(p, z) == 0

    def test_out_of_cover_raises(self):
        p = Partition(gamma=0.2, norm="l2", centers=np.array([[0.0]]), labels=("a",))
        with pytest.raises(OutOfCover):
            assign_cell(p, LabeledExample(np.array([5.0]), "a"))

    def test_round_trip_within_radius(self):
        rng = np.random.default_rng(6)
        ds = make_ds(rng.uniform(-1, 1, size=(40, 2)), ["a"] * 40)
        p = build_partition(ds, CoverConfig(gamma=0.6))
        ids = assign_cells(p, ds.X, ds.y)
        for i, cid in enumerate(ids):
            center = p.centers[cid % p.centers.shape[0]]
            assert np.linalg.norm(ds.X[i] - center) <= 0.3 + 1e-9


class TestCellCounts:
    def test_one_point_per_cell(self):
        ds = make_ds([[0.0], [1.0], [2.0]], "aaa")
        p = build_partition(ds, CoverConfig(gamma=1.0))
        counts = cell_counts(p, ds)
        assert counts.sum() == 3
        assert set(counts) <= {0, 1}

    def test_sums_to_n(self):
        rng = np.random.default_rng(7)
        ds = make_ds(rng.uniform(-1, 1, size=(25, 2)), rng.choice(["a", "b"], size=25))
        p = build_partition(ds, CoverConfig(gamma=0.7))
        assert cell_counts(p, ds).sum() == 25

    def test_multinomial_concentration(self):
        # resampling from a fixed discrete distribution: mean cell frequency
        # approaches the cell probability within 3 standard errors
        rng = np.random.default_rng(8)
        support = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        probs = np.array([0.5, 0.3, 0.2])
        base = Dataset(support, ["a", "a", "a"], R=2.0)
        p = build_partition(base, CoverConfig(gamma=0.5))
        ids_support = assign_cells(p, support, ["a"] * 3)
        n, reps = 60, 1000
        freq = np.zeros((reps, p.K))
        for r in range(reps):
            picks = rng.choice(3, size=n, p=probs)
            for cid in ids_support[picks]:
                freq[r, cid] += 1
        freq /= n
        mean = freq.mean(axis=0)
        se = freq.std(axis=0, ddof=1) / np.sqrt(reps)
        target = np.zeros(p.K)
        for s, pr in zip(ids_support, probs):
            target[s] += pr
        for i in range(p.K):
            assert abs(mean[i] - target[i]) <= 3 * max(se[i], 1e-12) + 1e-9
