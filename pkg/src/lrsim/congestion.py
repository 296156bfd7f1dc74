"""Congestion notifications and the load repartition state machines.

A node whose queue occupancy exceeds a threshold sends one notification
CN(nid, pid) per path id it knows.  Sources never slow down; they react by
re-spreading their fixed base rate over more paths:

  mode 0 – single best path, no reaction;
  mode 1 – uniform over all known paths from the start, no reaction;
  mode 2 – activate one more path per notification, re-split uniformly;
  mode 3 – move the congested path's current rate evenly onto all paths.

Allocations map pid -> rate and contain only active paths; the sum always
equals the source's base rate.  The arithmetic lives in kernel.py so the
event loop and this module cannot drift apart.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernel


class NoPathError(RuntimeError):
    """A source has no known path to allocate onto."""


@dataclass(frozen=True)
class CongestionNotification:
    nid: int
    pid: int


@dataclass
class SourceState:
    source_id: object
    base_rate: float
    known_paths: list  # pids, best quality first
    mode: int
    allocation: dict = field(default_factory=dict)  # pid -> rate, active paths only

    @property
    def active_paths(self) -> set:
        return set(self.allocation)

    def total_rate(self) -> float:
        return sum(self.allocation.values())


def _rows(source: SourceState):
    n = len(source.known_paths)
    rates = np.zeros(n, dtype=np.float64)
    active = np.zeros(n, dtype=np.uint8)
    for j, pid in enumerate(source.known_paths):
        if pid in source.allocation:
            rates[j] = source.allocation[pid]
            active[j] = 1
    return rates, active


def _to_allocation(source: SourceState, rates, active) -> dict:
    return {
        pid: float(rates[j])
        for j, pid in enumerate(source.known_paths)
        if active[j]
    }


def init_allocation(source: SourceState) -> dict:
    """Whole base rate on the best path (modes 0, 2, 3) or a uniform split
    over every known path (mode 1)."""
    n = len(source.known_paths)
    if n == 0:
        raise NoPathError(f"source {source.source_id} knows no path")
    rates = np.zeros(n, dtype=np.float64)
    active = np.zeros(n, dtype=np.uint8)
    kernel.alloc_init(source.mode, float(source.base_rate), n, rates, active)
    return _to_allocation(source, rates, active)


def should_react(source: SourceState, cn: CongestionNotification) -> bool:
    """Mode 3 reacts to notifications about currently active paths; mode 2
    reacts to any known path while it still has an inactive one to add;
    modes 0 and 1 never react."""
    if source.mode == 3:
        return cn.pid in source.allocation
    if source.mode == 2:
        return cn.pid in source.known_paths and any(
            p not in source.allocation for p in source.known_paths
        )
    return False


def _apply(source: SourceState, cn: CongestionNotification) -> dict:
    rates, active = _rows(source)
    j_cn = source.known_paths.index(cn.pid)
    if source.mode == 2:
        kernel.mode2_apply(float(source.base_rate), len(source.known_paths), rates, active, j_cn)
    elif source.mode == 3:
        kernel.mode3_apply(len(source.known_paths), rates, active, j_cn)
    else:
        raise ValueError(f"mode {source.mode} has no reaction rule")
    source.allocation = _to_allocation(source, rates, active)
    return source.allocation


def apply_cn_mode2(source: SourceState, cn: CongestionNotification) -> dict:
    """Add the first inactive path different from the congested one (or that
    path itself if it is the only one left) and re-split uniformly."""
    assert source.mode == 2
    return _apply(source, cn)


def apply_cn_mode3(source: SourceState, cn: CongestionNotification) -> dict:
    """Rebalance the congested path's current rate over all known paths."""
    assert source.mode == 3
    return _apply(source, cn)


def node_congested(queue_occupancy: float, capacity: float, threshold: float) -> bool:
    """Strictly above the fractional threshold counts as congested."""
    if not 0 <= queue_occupancy <= capacity:
        raise ValueError("occupancy must be within [0, capacity]")
    if not 0 < threshold <= 1:
        raise ValueError("threshold must be in (0, 1]")
    return bool(kernel.occupancy_over_threshold(queue_occupancy, capacity, threshold))


def emit_cns(node_id: int, pids, now: float = 0.0, last_emit: dict | None = None,
             cooldown: float = 1.0) -> list:
    """One CN(nid, pid) per path id the node knows, suppressed per (node, pid)
    while the cooldown since the previous emission has not elapsed."""
    out = []
    for pid in sorted(pids):
        if last_emit is not None:
            key = (node_id, pid)
            if key in last_emit and now - last_emit[key] < cooldown:
                continue
            last_emit[key] = now
        out.append(CongestionNotification(nid=node_id, pid=pid))
    return out


@dataclass(frozen=True)
class AllocationEvent:
    """One line of the congestion event log."""

    time: float
    source_id: object
    cn: CongestionNotification
    old_allocation: dict
    new_allocation: dict


def deliver_cn_batch(sources, cns, now: float = 0.0, log: list | None = None) -> set:
    """Deliver notifications emitted together to every source knowing their
    path id (instantaneous, analytic mode).

    Reaction decisions are judged against each source's allocation as it was
    before the batch, so the outcome does not depend on the order of the
    notifications within it.  Returns the ids of sources that received at
    least one notification.
    """
    delivered = set()
    for source in sources:
        pre = dict(source.allocation)
        pre_state = SourceState(
            source_id=source.source_id,
            base_rate=source.base_rate,
            known_paths=list(source.known_paths),
            mode=source.mode,
            allocation=pre,
        )
        for cn in cns:
            if cn.pid not in source.known_paths:
                continue
            delivered.add(source.source_id)
            if not should_react(pre_state, cn):
                continue
            old = dict(source.allocation)
            new = _apply(source, cn)
            if log is not None:
                log.append(AllocationEvent(now, source.source_id, cn, old, dict(new)))
    return delivered


def deliver_cn(sources, cn: CongestionNotification, now: float = 0.0, log: list | None = None) -> set:
    """Single-notification delivery (a batch of one)."""
    return deliver_cn_batch(sources, [cn], now=now, log=log)
