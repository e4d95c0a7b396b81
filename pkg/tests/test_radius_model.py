from collections import Counter

import numpy as np
import pytest

from radius_lsh.lsh import ParameterError
from radius_lsh.radius_model import (RadiusOracle, TrainingSet, bucket_matrix, build_histogram,
                                     collect_training_set, ground_truth_radius, select_i2r)
from radius_lsh.schedule import RadiusSchedule
from radius_lsh.search import SearchError, euclidean, should_stop


def sweep_radius(small, q, k):
    """First R = 1, 2, 3, ... whose from-scratch candidate set passes the stop test."""
    table = small.family.hash_points(small.data)
    sig = small.family.hash_points(q[None, :])[0]
    dists = euclidean(small.data, q)
    for radius in range(1, small.max_radius + 1):
        cand = (np.abs(table - sig) <= radius).sum(axis=1) >= small.params.l
        if should_stop(dists[cand], radius, k, small.params):
            return radius
    raise AssertionError("sweep found no radius")


class TestGroundTruth:
    @pytest.mark.parametrize("k", [1, 3, 10, 40])
    def test_matches_linear_sweep(self, small, rng, k):
        for qid in rng.choice(300, 5, replace=False):
            q = small.data[qid] + rng.normal(size=8) * 5
            got = ground_truth_radius(q, k, small.index, small.family, small.params, small.data,
                                      max_radius=small.max_radius)
            assert got == sweep_radius(small, q, k)

    def test_monotone_in_k(self, small):
        oracle = RadiusOracle.from_index(small.index, small.data, small.params,
                                         max_radius=small.max_radius)
        for qid in (0, 99, 201):
            q = small.data[qid] + 2.0
            got = oracle.radii(q, small.family.hash_points(q[None, :])[0], [1, 5, 25, 50, 100])
            assert got == sorted(got)

    def test_self_match_at_min_radius(self, small):
        q = small.data[12]
        assert ground_truth_radius(q, 1, small.index, small.family, small.params, small.data) == 1

    def test_min_radius(self, small):
        q = small.data[12]
        got = ground_truth_radius(q, 1, small.index, small.family, small.params, small.data,
                                  min_radius=7)
        assert got == 7

    def test_bucket_matrix_matches_hashing(self, small):
        assert np.array_equal(bucket_matrix(small.index), small.family.hash_points(small.data))

    def test_rejects_k_above_n(self, small):
        with pytest.raises(ParameterError):
            ground_truth_radius(small.data[0], 301, small.index, small.family, small.params, small.data)

    def test_unreachable(self, small):
        oracle = RadiusOracle(bucket_matrix(small.index), small.data, small.params, max_radius=2)
        q = small.data[0] + 1e4
        with pytest.raises(SearchError):
            oracle.radius(q, small.family.hash_points(q[None, :])[0], 100)


class TestSampling:
    def test_histogram_counts_queries(self, small):
        hist = build_histogram(small.data[:20], 10, small.engine, small.max_radius)
        assert sum(hist.values()) == 20
        assert all(r & (r - 1) == 0 or r == small.max_radius for r in hist)

    @pytest.mark.parametrize("hist,expected", [({4096: 50, 8192: 900, 16384: 50}, 4096),
                                               ({1: 10}, 1),
                                               ({2: 5, 4: 5}, 1),
                                               ({8: 3, 64: 7}, 32)])
    def test_select_i2r(self, hist, expected):
        assert select_i2r(Counter(hist)) == expected

    def test_select_i2r_empty(self):
        with pytest.raises(ValueError):
            select_i2r({})

    def test_sampled_start_not_past_most_queries(self, small):
        hist = build_histogram(small.data[::10], 25, small.engine, small.max_radius)
        i2r = select_i2r(hist)
        schedule = RadiusSchedule.ivr(i2r, small.max_radius)
        assert schedule.i2r < max(hist, key=hist.get)


class TestTrainingSet:
    def test_csv_round_trip(self, tmp_path):
        ts = TrainingSet(np.array([[1, -2, 3], [4, 5, -6]]), np.array([1, 25]), np.array([7, 900]))
        ts.to_csv(tmp_path / "t.csv")
        back = TrainingSet.from_csv(tmp_path / "t.csv")
        assert np.array_equal(back.signatures, ts.signatures)
        assert np.array_equal(back.ks, ts.ks) and np.array_equal(back.targets, ts.targets)
        assert (tmp_path / "t.csv").read_text().splitlines()[0] == "h0,h1,h2,k,r_act"

    def test_bad_header(self, tmp_path):
        (tmp_path / "t.csv").write_text("a,b\n1,2\n")
        with pytest.raises(ValueError):
            TrainingSet.from_csv(tmp_path / "t.csv")

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            TrainingSet(np.zeros((2, 3)), np.zeros(3), np.zeros(2))

    def test_collect(self, small):
        oracle = RadiusOracle.from_index(small.index, small.data, small.params,
                                         max_radius=small.max_radius)
        ts = collect_training_set(oracle, small.family, small.data, 23, ks=(1, 5, 10), seed=3)
        assert len(ts) == 23
        assert ts.features.shape == (23, small.params.m + 1)
        assert set(ts.ks.tolist()) == {1, 5, 10}
        assert np.all(ts.targets >= 1)
        again = collect_training_set(oracle, small.family, small.data, 23, ks=(1, 5, 10), seed=3)
        assert np.array_equal(again.targets, ts.targets)
