"""Deterministic discrete-event data plane.

run() wires a scenario together: topology, flooding-built path tables,
per-source allocations, then hands flat arrays to kernel.simulate and
reassembles the results.  The same seed always yields the same run, event
log included.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernel, routing
from .congestion import SourceState, init_allocation
from .scenario import ScenarioConfig, Topology, generate_topology, select_sources


@dataclass
class EngineParams:
    queue_capacity: int = 64  # packets per node
    packet_bits: int = 4000
    capacity_bps: float = 250_000.0  # per-node transmit capacity
    threshold: float = 0.8  # congested above this queue fraction
    cn_cooldown: float = 1.0  # seconds between notifications per (node, pid)
    cn_bits: int = 128
    e_elec: float = 50e-9  # J/bit
    e_amp: float = 100e-12  # J/bit/m^2
    analytic_cn: bool = False  # deliver notifications instantly, free of charge
    collect_log: bool = False

    def validate(self):
        if self.queue_capacity < 1:
            raise ValueError("queue_capacity must be >= 1")
        if self.packet_bits <= 0 or self.cn_bits <= 0:
            raise ValueError("packet sizes must be > 0")
        if self.capacity_bps <= 0:
            raise ValueError("capacity_bps must be > 0")
        if not 0.0 < self.threshold <= 1.0:
            raise ValueError("threshold must be in (0, 1]")
        if self.cn_cooldown < 0:
            raise ValueError("cn_cooldown must be >= 0")
        if self.e_elec < 0 or self.e_amp < 0:
            raise ValueError("energy constants must be >= 0")
        return self


@dataclass(frozen=True)
class Packet:
    kind: str  # "DATA" | "CN"
    source_id: int
    pid: int
    size: int
    seq: int
    created_at: float


def tx_energy(bits: float, distance_m: float, e_elec: float = 50e-9, e_amp: float = 100e-12) -> float:
    """Transmission cost: electronics per bit plus amplifier per bit over d^2."""
    if bits < 0 or distance_m < 0:
        raise ValueError("bits and distance must be >= 0")
    return float(kernel.tx_energy_j(float(bits), float(distance_m), e_elec, e_amp))


def rx_energy(bits: float, e_elec: float = 50e-9) -> float:
    if bits < 0:
        raise ValueError("bits must be >= 0")
    return float(kernel.rx_energy_j(float(bits), e_elec))


def service_time(bits: float, capacity_bps: float) -> float:
    return bits / capacity_bps


# ---------------------------------------------------------------------------
# standalone node/generator surfaces (the event loop uses the same kernels
# on batched arrays)

class NodeState:
    """One node's bounded FIFO and counters, backed by the kernel queue ops."""

    def __init__(self, node_id: int, capacity: int, energy: float = math.inf):
        self.id = node_id
        self.capacity = capacity
        self.residual_energy = energy
        self._q_pid = np.zeros((1, capacity), dtype=np.int64)
        self._q_src = np.zeros((1, capacity), dtype=np.int64)
        self._q_seq = np.zeros((1, capacity), dtype=np.int64)
        self._q_head = np.zeros(1, dtype=np.int64)
        self._q_len = np.zeros(1, dtype=np.int64)
        self.enqueued = 0
        self.dequeued = 0
        self.dropped = 0

    def __len__(self):
        return int(self._q_len[0])

    def pop(self) -> tuple:
        if len(self) == 0:
            raise IndexError("queue empty")
        pid, src, seq = kernel.queue_pop(
            self._q_pid, self._q_src, self._q_seq, self._q_head, self._q_len, 0, self.capacity
        )
        self.dequeued += 1
        return int(pid), int(src), int(seq)


def enqueue(node: NodeState, packet: Packet) -> str:
    """Drop-tail admission: 'accepted' or 'dropped'."""
    ok = kernel.queue_push(
        node._q_pid, node._q_src, node._q_seq, node._q_head, node._q_len,
        0, node.capacity, packet.pid, packet.source_id, packet.seq,
    )
    if ok:
        node.enqueued += 1
        return "accepted"
    node.dropped += 1
    return "dropped"


class GeneratorState:
    """Per-source packet generation clock with one credit accumulator per path."""

    def __init__(self, source_id: int, packet_bits: int = 4000):
        self.source_id = source_id
        self.packet_bits = packet_bits
        self.clock = 0.0
        self.credits: dict = {}
        self.next_seq = 0


def generate_packets(gen: GeneratorState, allocation: dict, dt: float) -> list:
    """Packets emitted over the next dt seconds for an allocation {pid: rate}.

    Each active path emits at interval packet_bits/rate; fractional credit
    carries across calls so the long-run per-path bit rate matches the
    allocation exactly.
    """
    if dt < 0:
        raise ValueError("dt must be >= 0")
    out = []
    bits = float(gen.packet_bits)
    for pid in sorted(allocation):
        rate = allocation[pid]
        if rate <= 0.0:
            continue
        credit = gen.credits.get(pid, 0.0)
        cap = int(rate * dt / bits) + 2
        times = np.empty(cap, dtype=np.float64)
        count, credit = kernel.credit_emissions(credit, float(rate), bits, gen.clock, float(dt), times)
        gen.credits[pid] = float(credit)
        for i in range(count):
            out.append(
                Packet(
                    kind="DATA",
                    source_id=gen.source_id,
                    pid=pid,
                    size=gen.packet_bits,
                    seq=gen.next_seq,
                    created_at=float(times[i]),
                )
            )
            gen.next_seq += 1
    gen.clock += dt
    out.sort(key=lambda p: (p.created_at, p.pid))
    return out


# ---------------------------------------------------------------------------
# full runs

_LOG_KIND_NAMES = {
    kernel.LOG_GEN: "generate",
    kernel.LOG_ENQ: "enqueue",
    kernel.LOG_QDROP: "queue_drop",
    kernel.LOG_DELIVER: "deliver",
    kernel.LOG_EDROP_TX: "energy_drop_tx",
    kernel.LOG_EDROP_RX: "energy_drop_rx",
    kernel.LOG_BROKEN: "broken_path",
    kernel.LOG_CN_EMIT: "cn_emit",
    kernel.LOG_CN_HOP: "cn_hop",
}


@dataclass
class AllocationChange:
    time: float
    source_id: int
    cn_node: int
    cn_pid: int
    old_allocation: dict
    new_allocation: dict


@dataclass
class RunStats:
    """Raw per-run counters, the input to every metric."""

    enqueue_attempts: int = 0
    queue_drops: int = 0
    energy_drops: int = 0
    broken_drops: int = 0
    leftover: int = 0
    delivered_total: int = 0
    cn_count: int = 0
    cn_hops: int = 0
    generated_by_source: dict = field(default_factory=dict)
    delivered_by_source: dict = field(default_factory=dict)
    relayed_bits: dict = field(default_factory=dict)
    energy_initial: dict = field(default_factory=dict)
    energy_final: dict = field(default_factory=dict)
    energy_charged: float = 0.0

    @property
    def generated_total(self) -> int:
        return sum(self.generated_by_source.values())

    @property
    def energy_consumed(self) -> float:
        return sum(self.energy_initial.values()) - sum(self.energy_final.values())


@dataclass
class RunResult:
    stats: RunStats
    metrics: "object"
    sources: list
    final_allocations: dict
    allocation_log: list
    event_log: list
    node_counters: dict

    def event_log_lines(self) -> list:
        return [
            f"{t:.9f} {kind} {node} {pkt} {aux}"
            for (t, kind, node, pkt, aux) in self.event_log
        ]


def build_source_states(topology: Topology, tables: dict, sources: list, config: ScenarioConfig) -> list:
    states = []
    for sid in sources:
        known = [e.pid for e in tables[sid]]
        st = SourceState(
            source_id=sid,
            base_rate=float(config.source_rate),
            known_paths=known,
            mode=config.mode,
        )
        st.allocation = init_allocation(st)
        states.append(st)
    return states


def run(config: ScenarioConfig, params: EngineParams | None = None,
        topology: Topology | None = None, tables: dict | None = None,
        sources: list | None = None) -> RunResult:
    """Simulate one seeded scenario and return stats, metrics, and logs."""
    from .metrics import compute_metrics

    params = (params or EngineParams()).validate()
    config.validate()
    if topology is None:
        topology = generate_topology(config)
    if sources is None:
        sources = select_sources(topology, config)
    if tables is None:
        tables = routing.build_paths(topology, sources)
    states = build_source_states(topology, tables, sources, config)

    n_all = topology.positions.shape[0]
    sink = topology.sink_id
    pid_list = sorted({e.pid for entries in tables.values() for e in entries})
    n_pids = len(pid_list)
    pid_to_k = {p: k for k, p in enumerate(pid_list)}

    next_hop = np.full((n_all, max(n_pids, 1)), -1, dtype=np.int64)
    hop_dist = np.full((n_all, max(n_pids, 1)), -1.0, dtype=np.float64)
    for v, entries in tables.items():
        for e in entries:
            k = pid_to_k[e.pid]
            next_hop[v, k] = e.next_node
            hop_dist[v, k] = topology.distance(v, e.next_node)

    children: dict = {}
    for v in range(n_all):
        if v == sink:
            continue
        for k in range(n_pids):
            u = next_hop[v, k]
            if u >= 0 and u != sink:
                children.setdefault((int(u), k), []).append(v)
    rev_ptr = np.zeros(n_all * max(n_pids, 1) + 1, dtype=np.int64)
    rev_child_list = []
    for u in range(n_all):
        for k in range(max(n_pids, 1)):
            kids = sorted(children.get((u, k), []))
            rev_child_list.extend(kids)
            rev_ptr[u * max(n_pids, 1) + k + 1] = len(rev_child_list)
    rev_child = np.asarray(rev_child_list, dtype=np.int64) if rev_child_list else np.zeros(0, dtype=np.int64)

    n_src = len(states)
    max_paths = max(len(st.known_paths) for st in states)
    src_node = np.asarray([st.source_id for st in states], dtype=np.int64)
    src_of = np.full(n_all, -1, dtype=np.int64)
    for i, st in enumerate(states):
        src_of[st.source_id] = i
    base_rate = np.asarray([st.base_rate for st in states], dtype=np.float64)
    sp_pid = np.full((n_src, max_paths), -1, dtype=np.int64)
    sp_n = np.zeros(n_src, dtype=np.int64)
    sp_pos = np.full((n_src, max(n_pids, 1)), -1, dtype=np.int64)
    for i, st in enumerate(states):
        sp_n[i] = len(st.known_paths)
        for j, pid in enumerate(st.known_paths):
            k = pid_to_k[pid]
            sp_pid[i, j] = k
            sp_pos[i, k] = j

    energy0 = topology.energies.copy()
    result = kernel.simulate(
        float(config.duration), sink, topology.energies.copy(),
        next_hop, hop_dist, rev_ptr, rev_child,
        src_node, src_of, base_rate, sp_pid, sp_n, sp_pos,
        int(config.mode),
        float(params.packet_bits), float(params.cn_bits), float(params.capacity_bps),
        int(params.queue_capacity), float(params.threshold), float(params.cn_cooldown),
        float(params.e_elec), float(params.e_amp),
        bool(params.analytic_cn), bool(params.collect_log),
    )
    (
        energy_final, charges,
        attempts, enqueued, dequeued, qdrops, edrops_tx, edrops_rx, broken,
        relayed_bits, generated_bits,
        gen_count, delivered,
        cn_emitted, cn_hops,
        q_len,
        rates, active,
        _pkt_total,
        log_t, log_kind, log_node, log_pkt, log_aux,
        ra_t, ra_src, ra_node, ra_pid, ra_rates,
    ) = result

    sensor_ids = [v for v in range(n_all) if v != sink]
    stats = RunStats(
        enqueue_attempts=int(attempts.sum()),
        queue_drops=int(qdrops.sum()),
        energy_drops=int(edrops_tx.sum() + edrops_rx.sum()),
        broken_drops=int(broken.sum()),
        leftover=int(q_len.sum()),
        delivered_total=int(delivered.sum()),
        cn_count=int(cn_emitted),
        cn_hops=int(cn_hops),
        generated_by_source={int(src_node[i]): int(gen_count[i]) for i in range(n_src)},
        delivered_by_source={int(src_node[i]): int(delivered[i]) for i in range(n_src)},
        relayed_bits={v: float(relayed_bits[v]) for v in sensor_ids},
        energy_initial={v: float(energy0[v]) for v in sensor_ids},
        energy_final={v: float(energy_final[v]) for v in sensor_ids},
        energy_charged=float(charges),
    )

    # final allocations and the change log, path positions mapped back to pids
    final_allocations = {}
    for i, st in enumerate(states):
        alloc = {}
        for j, pid in enumerate(st.known_paths):
            if active[i, j]:
                alloc[pid] = float(rates[i, j])
        final_allocations[st.source_id] = alloc
        st.allocation = dict(alloc)
    for st in states:
        for e in tables[st.source_id]:
            e.in_use = e.pid in st.allocation
            e.rate = st.allocation.get(e.pid, 0.0)

    running = {st.source_id: dict(init_allocation(SourceState(
        source_id=st.source_id, base_rate=st.base_rate,
        known_paths=list(st.known_paths), mode=st.mode))) for st in states}
    allocation_log = []
    for r in range(ra_t.shape[0]):
        i = int(ra_src[r])
        st = states[i]
        new_alloc = {}
        for j, pid in enumerate(st.known_paths):
            rate = float(ra_rates[r, j])
            if rate > 0.0:
                new_alloc[pid] = rate
        allocation_log.append(
            AllocationChange(
                time=float(ra_t[r]),
                source_id=st.source_id,
                cn_node=int(ra_node[r]),
                cn_pid=pid_list[int(ra_pid[r])],
                old_allocation=running[st.source_id],
                new_allocation=dict(new_alloc),
            )
        )
        running[st.source_id] = dict(new_alloc)

    event_log = [
        (
            float(log_t[i]),
            _LOG_KIND_NAMES[int(log_kind[i])],
            int(log_node[i]),
            int(log_pkt[i]),
            pid_list[int(log_aux[i])] if int(log_aux[i]) >= 0 and int(log_aux[i]) < n_pids else int(log_aux[i]),
        )
        for i in range(log_t.shape[0])
    ]

    node_counters = {
        v: {
            "enqueued": int(enqueued[v]),
            "dequeued": int(dequeued[v]),
            "dropped": int(qdrops[v]),
            "energy_drops": int(edrops_tx[v] + edrops_rx[v]),
            "relayed_bits": float(relayed_bits[v]),
            "generated_bits": float(generated_bits[v]),
            "queue_len": int(q_len[v]),
        }
        for v in sensor_ids
    }

    return RunResult(
        stats=stats,
        metrics=compute_metrics(stats),
        sources=states,
        final_allocations=final_allocations,
        allocation_log=allocation_log,
        event_log=event_log,
        node_counters=node_counters,
    )
