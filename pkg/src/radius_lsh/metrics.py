"""Accuracy ratio and the modelled query processing time."""

from __future__ import annotations

import math

SEEK_MS = 8.5
READ_FACTOR = 0.156


def accuracy_ratio(result_dists, truth_dists, k: int) -> tuple[float, bool]:
    """Mean of per-rank distance ratios between returned and true neighbours.

    A zero true distance counts as ratio 1 when the returned distance is also
    zero; otherwise that rank is left out of the mean and the second return
    value is True.
    """
    if len(result_dists) < k or len(truth_dists) < k:
        raise ValueError(f"need {k} results and {k} true neighbours")
    ratios = []
    flagged = False
    for got, best in zip(result_dists[:k], truth_dists[:k]):
        if best == 0:
            if got == 0:
                ratios.append(1.0)
            else:
                flagged = True
            continue
        ratios.append(got / best)
    if not ratios:
        return math.nan, True
    return math.fsum(ratios) / len(ratios), flagged


def qpt(counters, seek_ms: float = SEEK_MS, read_factor: float = READ_FACTOR) -> float:
    """``seeks * 8.5 + MB * 0.156 + algorithm time + false-positive removal time``.

    ``counters`` is anything with ``disk_seeks``, ``data_read_mb``,
    ``alg_time_ms`` and ``fp_rem_time_ms``.
    """
    return (counters.disk_seeks * seek_ms + counters.data_read_mb * read_factor
            + counters.alg_time_ms + counters.fp_rem_time_ms)
