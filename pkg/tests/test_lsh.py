import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from radius_lsh.lsh import (HashFamily, HashFunction, ParameterError, collision_prob,
                            derive_params, hash_level, hash_point, load_family,
                            offset_upper_bound, radius_exponent, save_family, signature)

W = 2.184
# mpmath, 40 digits, of the defining integral (see test_acceptance for the live check)
P1_REF = 0.63935144457375575815
P2_REF = 0.39701382748000213624


def closed_form(r, w):
    phi = 0.5 * math.erfc((w / r) / math.sqrt(2.0))
    return 1.0 - 2.0 * phi - 2.0 * r / (math.sqrt(2.0 * math.pi) * w) * (1.0 - math.exp(-w * w / (2 * r * r)))


class TestCollisionProb:
    def test_vanishing_width(self):
        assert collision_prob(1.0, 1e-12) == pytest.approx(0.0, abs=1e-11)

    @pytest.mark.parametrize("r", [0.25, 0.5, 1.0, 2.0, 3.0, 8.0])
    @pytest.mark.parametrize("w", [0.5, W, 4.0])
    def test_matches_closed_form(self, r, w):
        assert collision_prob(r, w) == pytest.approx(closed_form(r, w), abs=1e-9)

    def test_reference_values(self):
        assert collision_prob(1.0, W) == pytest.approx(P1_REF, abs=1e-9)
        assert collision_prob(2.0, W) == pytest.approx(P2_REF, abs=1e-9)

    def test_strictly_decreasing(self):
        values = [collision_prob(r, W) for r in (0.5, 1, 2, 4, 8)]
        assert all(a > b for a, b in zip(values, values[1:]))

    @pytest.mark.parametrize("r,w", [(0, 1), (-1, 1), (1, 0), (1, -2)])
    def test_domain(self, r, w):
        with pytest.raises(ParameterError):
            collision_prob(r, w)


class TestDeriveParams:
    def test_reference_point(self):
        p = derive_params(10_000, 2.0, W, 0.1)
        assert p.beta == 0.01
        assert p.z == pytest.approx(math.sqrt(math.log(200) / math.log(10)), rel=1e-15)
        assert p.z == pytest.approx(1.5170, abs=1e-4)
        assert p.m == 125
        assert p.l == 68
        assert p.alpha == pytest.approx(0.54306783837793689, abs=1e-9)
        assert p.false_positive_allowance == 100

    @pytest.mark.parametrize("n", [100, 1000, 10**6])
    @pytest.mark.parametrize("c", [2.0, 3.0])
    @pytest.mark.parametrize("delta", [0.1, 0.01])
    def test_invariants(self, n, c, delta):
        p = derive_params(n, c, W, delta)
        assert p.p1 > p.p2
        assert p.p2 < p.alpha < p.p1
        assert 1 <= p.l <= p.m
        assert p.beta == pytest.approx(100 / n)

    def test_rejects_small_n(self):
        with pytest.raises(ParameterError):
            derive_params(99)

    @pytest.mark.parametrize("delta", [0.0, 1.0, -0.1, 2])
    def test_rejects_bad_delta(self, delta):
        with pytest.raises(ParameterError):
            derive_params(1000, delta=delta)


class TestHashing:
    def test_axis_projection(self):
        fn = HashFunction(np.array([1.0, 0.0, 0.0]), 0.0, 2.0)
        assert hash_point([5.0, 3.0, -7.0], fn) == 2

    def test_negative_values_floor(self):
        fn = HashFunction(np.array([1.0]), 0.0, 2.0)
        assert hash_point([-0.5], fn) == -1

    def test_deterministic(self, rng):
        fam = HashFamily.generate(6, 4, W, seed=3, b_upper=W)
        x = rng.normal(size=6)
        for fn in fam.functions:
            assert hash_point(x, fn) == hash_point(x.copy(), fn)

    def test_shift_by_one_width(self, rng):
        fam = HashFamily.generate(5, 50, W, seed=11, b_upper=10 * W)
        for fn in fam.functions:
            while True:
                x = rng.normal(size=5) * 10
                frac = ((fn.a @ x + fn.b) / fn.w) % 1.0
                if 1e-6 < frac < 1 - 1e-6:
                    break
            shifted = x + fn.w * fn.a / (fn.a @ fn.a)
            assert hash_point(shifted, fn) - hash_point(x, fn) == 1

    def test_dimension_mismatch(self):
        fn = HashFunction(np.ones(3), 0.0, 1.0)
        with pytest.raises(ParameterError):
            hash_point([1.0, 2.0], fn)


class TestHashLevel:
    @pytest.mark.parametrize("bucket,radius,expected", [(7450, 4096, 1), (13, 1, 13), (-1, 2, -1),
                                                         (-4, 2, -2), (-5, 4, -2)])
    def test_examples(self, bucket, radius, expected):
        assert hash_level(bucket, radius) == expected

    def test_rejects_zero(self):
        with pytest.raises(ParameterError):
            hash_level(3, 0)

    @given(st.integers(-10**9, 10**9), st.integers(2, 5), st.integers(0, 12))
    def test_levels_nest(self, bucket, c, i):
        assert hash_level(bucket, c ** (i + 1)) == hash_level(hash_level(bucket, c ** i), c)


class TestFamily:
    def test_seed_reproducible(self):
        a = HashFamily.generate(16, 30, W, seed=99, b_upper=100.0)
        b = HashFamily.generate(16, 30, W, seed=99, b_upper=100.0)
        assert a.a.tobytes() == b.a.tobytes() and a.b.tobytes() == b.b.tobytes()
        assert HashFamily.generate(16, 30, W, seed=100, b_upper=100.0) != a

    def test_offsets_in_interval(self):
        fam = HashFamily.generate(4, 500, W, seed=1, b_upper=7.5)
        assert fam.b.min() >= 0 and fam.b.max() < 7.5

    def test_offset_interval_from_data(self):
        assert radius_exponent(3.0, 10, 2.0) == 5
        assert radius_exponent(3.2, 10, 2.0) == 5  # t*d = 32 exactly
        assert radius_exponent(0.01, 10, 2.0) == 0
        assert offset_upper_bound(3.0, 10, 2.0, W) == pytest.approx(32 * W * W)
        assert offset_upper_bound(3.0, 10, 2.0, W, squared_width=False) == pytest.approx(32 * W)
        data = np.array([[3.0, -1.0], [0.5, 2.0]])
        fam = HashFamily.for_dataset(data, 8, 2.0, W, seed=4)
        assert fam.b_upper == pytest.approx(8 * W * W)

    def test_file_round_trip(self, tmp_path):
        fam = HashFamily.generate(7, 13, W, seed=2024, b_upper=55.0)
        save_family(fam, tmp_path / "f.bin")
        assert load_family(tmp_path / "f.bin") == fam
        raw = (tmp_path / "f.bin").read_bytes()
        assert raw[:6] == b"LSHFAM"
        assert len(raw) == 44 + 13 * 8 * 8

    def test_rejects_bad_file(self, tmp_path):
        (tmp_path / "bad.bin").write_bytes(b"nonsense" * 10)
        with pytest.raises(ValueError):
            load_family(tmp_path / "bad.bin")

    def test_batch_and_single_hash_agree(self, rng):
        fam = HashFamily.generate(32, 40, W, seed=5, b_upper=1e4)
        pts = rng.normal(size=(200, 32)) * 300
        batch = fam.hash_points(pts)
        for i in range(0, 200, 17):
            assert np.array_equal(signature(pts[i], fam), batch[i])


class TestSignature:
    def test_single_function(self, rng):
        fam = HashFamily.generate(3, 1, W, seed=8, b_upper=W)
        q = rng.normal(size=3)
        assert signature(q, fam).tolist() == [hash_point(q, fam.functions[0])]

    def test_far_points_differ(self, rng):
        differing = 0
        for trial in range(1000):
            fam = HashFamily.generate(8, 10, W, seed=trial, b_upper=W)
            q = rng.normal(size=8)
            far = q + rng.normal(size=8) / math.sqrt(8) * 1000
            differing += not np.array_equal(signature(q, fam), signature(far, fam))
        assert differing >= 999
