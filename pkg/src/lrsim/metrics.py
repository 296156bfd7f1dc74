"""Run evaluation: drop rate, fairness indices, energy per delivered packet.

Fairness uses the classic index (sum x)^2 / (N * sum x^2): scale-invariant,
1 when all shares are equal, 1/N when a single one carries everything.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


class UndefinedMetricError(ValueError):
    pass


class NoDeliveryError(RuntimeError):
    pass


@dataclass
class RunMetrics:
    drop_rate: float
    rate_fairness: float
    load_fairness: float
    energy_per_delivered: float
    delivered: int
    dropped: int
    cn_count: int
    per_source_success_rate: dict = field(default_factory=dict)


def jain_index(values) -> float:
    values = list(values)
    if not values:
        raise UndefinedMetricError("fairness of an empty set is undefined")
    if any(v < 0 for v in values):
        raise ValueError("fairness inputs must be nonnegative")
    total = math.fsum(values)
    squares = math.fsum(v * v for v in values)
    if squares == 0.0:
        raise UndefinedMetricError("fairness is undefined when all values are zero")
    return total * total / (len(values) * squares)


def drop_rate(stats) -> float:
    """Queue drops over enqueue attempts at sensor queues; 0/0 counts as 0."""
    if stats.enqueue_attempts == 0:
        return 0.0
    return stats.queue_drops / stats.enqueue_attempts


def per_source_success_rates(stats) -> dict:
    """Delivered-at-sink over generated, per source (0 when nothing generated)."""
    out = {}
    for sid, generated in stats.generated_by_source.items():
        delivered = stats.delivered_by_source.get(sid, 0)
        out[sid] = delivered / generated if generated > 0 else 0.0
    return out


def rate_fairness(stats) -> float:
    rates = per_source_success_rates(stats)
    if not rates:
        raise UndefinedMetricError("no sources")
    return jain_index(rates.values())


def load_fairness(stats) -> float:
    """Fairness of forwarded bits over the sensors that actually forwarded."""
    loads = [bits for bits in stats.relayed_bits.values() if bits > 0]
    if not loads:
        raise UndefinedMetricError("no sensor forwarded any data")
    return jain_index(loads)


def energy_per_delivered(stats) -> float:
    if stats.delivered_total == 0:
        raise NoDeliveryError("no packet reached the sink")
    return stats.energy_consumed / stats.delivered_total


def compute_metrics(stats) -> RunMetrics:
    """Metrics bundle for one run; undefined fairness/energy become NaN."""
    try:
        rf = rate_fairness(stats)
    except UndefinedMetricError:
        rf = float("nan")
    try:
        lf = load_fairness(stats)
    except UndefinedMetricError:
        lf = float("nan")
    try:
        epd = energy_per_delivered(stats)
    except NoDeliveryError:
        epd = float("nan")
    return RunMetrics(
        drop_rate=drop_rate(stats),
        rate_fairness=rf,
        load_fairness=lf,
        energy_per_delivered=epd,
        delivered=stats.delivered_total,
        dropped=stats.queue_drops,
        cn_count=stats.cn_count,
        per_source_success_rate=per_source_success_rates(stats),
    )


# ---------------------------------------------------------------------------
# qualitative orderings between the repartition modes over a sweep

#: (label, metric column, mode expected larger, mode expected smaller, strict)
ORDERING_CHECKS = [
    ("drop: mode 0 worse than mode 2", "drop_rate", 0, 2, True),
    ("drop: mode 0 worse than mode 3", "drop_rate", 0, 3, True),
    ("drop: mode 2 at least mode 1", "drop_rate", 2, 1, False),
    ("drop: mode 3 at least mode 1", "drop_rate", 3, 1, False),
    ("rate fairness: mode 2 above mode 0", "rate_fairness", 2, 0, True),
    ("rate fairness: mode 2 above mode 1", "rate_fairness", 2, 1, True),
    ("load fairness: mode 0 above mode 1", "load_fairness", 0, 1, True),
    ("load fairness: mode 0 above mode 2", "load_fairness", 0, 2, True),
    ("load fairness: mode 0 above mode 3", "load_fairness", 0, 3, True),
    ("load fairness: mode 3 above mode 1", "load_fairness", 3, 1, True),
    ("load fairness: mode 3 above mode 2", "load_fairness", 3, 2, True),
    ("energy/delivered: mode 0 below mode 1", "energy_per_delivered", 1, 0, True),
    ("energy/delivered: mode 0 below mode 2", "energy_per_delivered", 2, 0, True),
    ("energy/delivered: mode 0 below mode 3", "energy_per_delivered", 3, 0, True),
    ("energy/delivered: mode 1 above mode 2", "energy_per_delivered", 1, 2, True),
    ("energy/delivered: mode 1 above mode 3", "energy_per_delivered", 1, 3, True),
]

RATE_FAIRNESS_FLOOR = 0.7  # mode 2 must clear this on every point


def ordering_results(point_means: dict) -> list:
    """Evaluate the mode orderings for one node count.

    point_means maps mode -> {metric: mean value}.  Returns a list of
    (label, passed, margin) where margin > 0 means the ordering holds
    strictly.
    """
    out = []
    for label, metric, larger, smaller, strict in ORDERING_CHECKS:
        margin = point_means[larger][metric] - point_means[smaller][metric]
        passed = margin > 0 if strict else margin >= 0
        out.append((label, bool(passed), float(margin)))
    floor_margin = point_means[2]["rate_fairness"] - RATE_FAIRNESS_FLOOR
    out.append(("rate fairness: mode 2 at least 0.7", bool(floor_margin >= 0), float(floor_margin)))
    return out
