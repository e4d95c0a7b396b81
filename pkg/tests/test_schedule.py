import pytest
from hypothesis import given
from hypothesis import strategies as st

from radius_lsh.schedule import (RadiusSchedule, ScheduleExhausted, Strategy, next_power_of_two,
                                 next_radius, radii)


class TestExamples:
    def test_ivr_4096(self):
        seq = radii(RadiusSchedule.ivr(4096), limit=16)
        assert seq[:14] == [4097, 4098, 4100, 4104, 4112, 4128, 4160, 4224, 4352, 4608,
                            5120, 6144, 8192, 16384]
        assert seq[14:16] == [32768, 65536]

    def test_ivr_rounds_up_to_power_of_two(self):
        assert RadiusSchedule.ivr(3000).i2r == 4096
        assert radii(RadiusSchedule.ivr(3000), limit=3) == [4097, 4098, 4100]

    def test_ivr_one(self):
        assert radii(RadiusSchedule.ivr(1), limit=5) == [2, 4, 8, 16, 32]

    def test_ovr(self):
        assert radii(RadiusSchedule.ovr(2.0), limit=6) == [1, 2, 4, 8, 16, 32]
        assert radii(RadiusSchedule.ovr(3.0, max_radius=100)) == [1, 3, 9, 27, 81, 100]

    def test_ovr_non_integer_ratio(self):
        assert radii(RadiusSchedule.ovr(1.5), limit=6) == [1, 2, 3, 4, 6, 8]

    def test_nn_ivr_not_power_of_two(self):
        assert radii(RadiusSchedule.nn_ivr(100), limit=10) == \
            [101, 102, 104, 108, 116, 132, 164, 256, 512, 1024]

    def test_nn_ivr_power_of_two_matches_ivr(self):
        assert radii(RadiusSchedule.nn_ivr(256), limit=12) == radii(RadiusSchedule.ivr(256), limit=12)

    def test_nn_lambda(self):
        assert radii(RadiusSchedule.nn_lambda(1000, 0.1), limit=4) == [1000, 1100, 1200, 1300]
        assert radii(RadiusSchedule.nn_lambda(7, 0.1), limit=4) == [7, 8, 9, 10]

    def test_until(self):
        assert radii(RadiusSchedule.ovr(), until=5) == [1, 2, 4, 8]
        assert radii(RadiusSchedule.nn_lambda(10, 0.5), until=10) == [10]

    def test_next_radius_between_elements(self):
        assert next_radius(RadiusSchedule.ovr(), 5) == 8
        assert next_radius(RadiusSchedule.ivr(64), 70) == 72
        assert next_radius(RadiusSchedule.nn_lambda(100, 0.1), 105) == 110

    def test_power_of_two_helper(self):
        assert [next_power_of_two(x) for x in (0, 1, 2, 3, 4, 5, 1023, 1025)] == \
            [1, 1, 2, 4, 4, 8, 1024, 2048]


class TestExhaustion:
    @pytest.mark.parametrize("schedule", [RadiusSchedule.ovr(max_radius=50),
                                          RadiusSchedule.ivr(16, max_radius=50),
                                          RadiusSchedule.nn_ivr(20, max_radius=50),
                                          RadiusSchedule.nn_lambda(20, 0.5, max_radius=50)])
    def test_ends_at_max(self, schedule):
        seq = radii(schedule)
        assert seq[-1] == 50
        with pytest.raises(ScheduleExhausted):
            next_radius(schedule, 50)

    def test_start_above_max(self):
        schedule = RadiusSchedule.nn_lambda(500, max_radius=100)
        assert radii(schedule) == [100]


class TestValidation:
    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            RadiusSchedule.ivr(0)
        with pytest.raises(ValueError):
            RadiusSchedule.nn_ivr(0)
        with pytest.raises(ValueError):
            RadiusSchedule.nn_lambda(10, lam=0)
        with pytest.raises(ValueError):
            RadiusSchedule.ovr(c=1.0)
        with pytest.raises(ValueError):
            RadiusSchedule(Strategy.OVR, max_radius=0)

    def test_strategy_from_string(self):
        assert RadiusSchedule("nn-lambda", r_pred=3).strategy is Strategy.NN_LAMBDA
        assert Strategy.NN_IVR.uses_predictor and not Strategy.IVR.uses_predictor


@given(st.sampled_from(["ovr", "ivr", "nn-ivr", "nn-lambda"]), st.integers(1, 5000),
       st.floats(0.01, 1.0), st.integers(1, 100_000))
def test_strictly_increasing(kind, start, lam, max_radius):
    schedule = RadiusSchedule(kind, c=2.0, i2r=start, r_pred=start, lam=lam, max_radius=max_radius)
    seq = radii(schedule, limit=3000)
    assert seq
    assert all(a < b for a, b in zip(seq, seq[1:]))
    assert all(1 <= r <= max_radius for r in seq)
    assert seq[-1] == max_radius or len(seq) == 3000
