"""Radius expansion schedules.

Each strategy emits a strictly increasing sequence of integer window radii:

* ``ovr``        1, c, c^2, ...
* ``ivr``        i2R+1, i2R+2, i2R+4, ..., 2*i2R, then 4*i2R, 8*i2R, ...
* ``nn-ivr``     the ``ivr`` sequence seeded with the predicted radius itself;
                 for a seed that is not a power of two the small steps stop at
                 i2R + 2^floor(log2 i2R) and the powers of two resume above it
* ``nn-lambda``  R_pred, R_pred + inc, R_pred + 2*inc, ... with inc = ceil(R_pred * lambda)

Once a sequence passes ``max_radius`` the schedule emits ``max_radius`` one
time and is then exhausted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum


class Strategy(str, Enum):
    OVR = "ovr"
    IVR = "ivr"
    NN_IVR = "nn-ivr"
    NN_LAMBDA = "nn-lambda"

    @property
    def uses_predictor(self) -> bool:
        return self in (Strategy.NN_IVR, Strategy.NN_LAMBDA)


class ScheduleExhausted(Exception):
    """The schedule has no radius left below its maximum."""


def next_power_of_two(x: int) -> int:
    x = max(1, int(x))
    return 1 << (x - 1).bit_length()


@dataclass(frozen=True)
class RadiusSchedule:
    strategy: Strategy
    c: float = 2.0
    i2r: int | None = None
    r_pred: int | None = None
    lam: float = 0.1
    max_radius: int = 1 << 30

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        if self.max_radius < 1:
            raise ValueError("max_radius must be >= 1")
        if self.strategy is Strategy.OVR and not self.c > 1:
            raise ValueError("ovr needs c > 1")
        if self.strategy is Strategy.IVR:
            if self.i2r is None or self.i2r < 1:
                raise ValueError("ivr needs an initial radius i2r >= 1")
            object.__setattr__(self, "i2r", next_power_of_two(self.i2r))
        if self.strategy.uses_predictor:
            if self.r_pred is None or self.r_pred < 1:
                raise ValueError(f"{self.strategy.value} needs a predicted radius >= 1")
            if self.strategy is Strategy.NN_LAMBDA and not self.lam > 0:
                raise ValueError("nn-lambda needs lambda > 0")

    @classmethod
    def ovr(cls, c: float = 2.0, max_radius: int = 1 << 30) -> "RadiusSchedule":
        return cls(Strategy.OVR, c=c, max_radius=max_radius)

    @classmethod
    def ivr(cls, i2r: int, max_radius: int = 1 << 30) -> "RadiusSchedule":
        return cls(Strategy.IVR, i2r=i2r, max_radius=max_radius)

    @classmethod
    def nn_ivr(cls, r_pred: int, max_radius: int = 1 << 30) -> "RadiusSchedule":
        return cls(Strategy.NN_IVR, r_pred=r_pred, max_radius=max_radius)

    @classmethod
    def nn_lambda(cls, r_pred: int, lam: float = 0.1, max_radius: int = 1 << 30) -> "RadiusSchedule":
        return cls(Strategy.NN_LAMBDA, r_pred=r_pred, lam=lam, max_radius=max_radius)

    @property
    def start_radius(self) -> int:
        """``i2R`` for the ``ivr``-style strategies."""
        return self.i2r if self.strategy is Strategy.IVR else self.r_pred


def _next_ovr(c: float, current: int | None) -> int:
    if current is None:
        return 1
    if float(c).is_integer():
        step, r = int(c), 1
        while r <= current:
            r *= step
        return r
    j = math.floor(math.log(current) / math.log(c)) if current >= 1 else 0
    while math.ceil(c ** j) <= current:
        j += 1
    return math.ceil(c ** j)


def _next_ivr(i2r: int, current: int | None) -> int:
    if current is None or current <= i2r:
        return i2r + 1
    last_step = i2r + (1 << (i2r.bit_length() - 1))
    if current < last_step:
        # smallest i2r + 2^x above current
        return i2r + (1 << (current - i2r).bit_length())
    # powers of two below last_step would break monotonicity and are skipped
    return 1 << current.bit_length()


def _next_lambda(r_pred: int, lam: float, current: int | None) -> int:
    if current is None or current < r_pred:
        return r_pred
    inc = max(1, math.ceil(r_pred * lam))
    return r_pred + ((current - r_pred) // inc + 1) * inc


def next_radius(schedule: RadiusSchedule, current: int | None) -> int:
    """The first radius of ``schedule`` strictly greater than ``current``."""
    s = schedule.strategy
    if s is Strategy.OVR:
        nxt = _next_ovr(schedule.c, current)
    elif s is Strategy.IVR:
        nxt = _next_ivr(schedule.i2r, current)
    elif s is Strategy.NN_IVR:
        nxt = _next_ivr(schedule.r_pred, current)
    else:
        nxt = _next_lambda(schedule.r_pred, schedule.lam, current)
    if nxt > schedule.max_radius:
        if current is not None and current >= schedule.max_radius:
            raise ScheduleExhausted(f"{s.value} schedule exhausted at radius {current}")
        return schedule.max_radius
    return nxt


def radii(schedule: RadiusSchedule, until: int | None = None, limit: int = 10_000) -> list[int]:
    """Schedule prefix up to and including the first radius ``>= until``.

    Without ``until`` the whole schedule is listed (bounded by ``limit``).
    """
    out: list[int] = []
    current = None
    while len(out) < limit:
        try:
            current = next_radius(schedule, current)
        except ScheduleExhausted:
            break
        out.append(current)
        if until is not None and current >= until:
            break
    return out
