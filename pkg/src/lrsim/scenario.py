"""Topology generation and scenario configuration.

A scenario is a square sensor field with one sink in a corner, randomly
deployed stationary sensors, and an event region in the opposite quarter.
Sensors inside the event region become traffic sources.  Everything is a
pure function of a ScenarioConfig (and its seed), so runs are repeatable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np


class UnconnectableError(RuntimeError):
    """No sampled topology connected every source to the sink within the retry budget."""


@dataclass
class ScenarioConfig:
    n_nodes: int = 100
    radio_range: float = 400.0
    field_size: tuple[float, float] = (1000.0, 1000.0)
    sink_position: tuple[float, float] = (1000.0, 1000.0)
    event_position: tuple[float, float] = (250.0, 250.0)
    event_radius: float = 150.0
    source_rate: float = 250_000.0  # bit/s per source
    energy_range: tuple[float, float] = (0.0, 0.4)  # joules
    seed: int = 1
    mode: int = 0
    duration: float = 30.0
    connect_retries: int = 100

    def validate(self):
        if self.n_nodes < 1:
            raise ValueError("n_nodes must be >= 1")
        if self.radio_range <= 0:
            raise ValueError("radio_range must be > 0")
        lo, hi = self.energy_range
        if lo < 0 or hi < lo:
            raise ValueError("energy_range must be a nonnegative interval")
        if self.mode not in (0, 1, 2, 3):
            raise ValueError("mode must be one of 0, 1, 2, 3")
        if self.duration < 0:
            raise ValueError("duration must be >= 0")
        if self.source_rate < 0:
            raise ValueError("source_rate must be >= 0")
        return self


@dataclass(frozen=True)
class Topology:
    """Sensor ids are 0..n-1; the sink gets the one extra id n.

    positions and energies are indexed by node id (sink row included,
    sink energy is +inf: it is never a bottleneck).
    """

    positions: np.ndarray  # (n+1, 2) float64
    energies: np.ndarray  # (n+1,) float64
    sink_id: int
    radio_range: float
    field_size: tuple[float, float]

    @property
    def sensor_ids(self):
        return [i for i in range(self.positions.shape[0]) if i != self.sink_id]

    @property
    def nodes(self):
        """(node_id, (x, y), initial_energy) per sensor, sink excluded."""
        return [
            (i, (float(self.positions[i, 0]), float(self.positions[i, 1])), float(self.energies[i]))
            for i in self.sensor_ids
        ]

    def distance(self, a: int, b: int) -> float:
        return float(math.hypot(*(self.positions[a] - self.positions[b])))

    def neighbors(self, node: int) -> list[int]:
        d = np.hypot(*(self.positions - self.positions[node]).T)
        out = np.flatnonzero(d <= self.radio_range)
        return [int(i) for i in out if i != node]


def _reachable_from_sink(positions: np.ndarray, sink: int, radio_range: float) -> np.ndarray:
    """Boolean mask of nodes with a multi-hop path to the sink (BFS on the radio graph)."""
    n = positions.shape[0]
    diff = positions[:, None, :] - positions[None, :, :]
    adj = np.hypot(diff[..., 0], diff[..., 1]) <= radio_range
    np.fill_diagonal(adj, False)
    seen = np.zeros(n, dtype=bool)
    seen[sink] = True
    frontier = [sink]
    while frontier:
        nxt = []
        for v in frontier:
            for u in np.flatnonzero(adj[v]):
                if not seen[u]:
                    seen[u] = True
                    nxt.append(int(u))
        frontier = nxt
    return seen


def generate_topology(config: ScenarioConfig) -> Topology:
    """Sample sensor positions and energies until every source can reach the sink.

    Deterministic for a given seed; raises UnconnectableError after the retry budget.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    n = config.n_nodes
    w, h = config.field_size
    lo, hi = config.energy_range
    for _ in range(max(1, config.connect_retries)):
        positions = np.empty((n + 1, 2), dtype=np.float64)
        positions[:n, 0] = rng.uniform(0.0, w, n)
        positions[:n, 1] = rng.uniform(0.0, h, n)
        positions[n] = config.sink_position
        energies = np.empty(n + 1, dtype=np.float64)
        energies[:n] = rng.uniform(lo, hi, n)
        energies[n] = np.inf
        topo = Topology(
            positions=positions,
            energies=energies,
            sink_id=n,
            radio_range=config.radio_range,
            field_size=config.field_size,
        )
        sources = select_sources(topo, config)
        reach = _reachable_from_sink(positions, n, config.radio_range)
        if all(reach[s] for s in sources):
            return topo
    raise UnconnectableError(
        f"no topology connecting all sources to the sink in {config.connect_retries} tries"
    )


def select_sources(topology: Topology, config: ScenarioConfig) -> list[int]:
    """Sensors strictly inside the event circle, sorted by id.

    Falls back to the single sensor nearest to the event when the circle is empty.
    """
    ev = np.asarray(config.event_position, dtype=np.float64)
    ids = topology.sensor_ids
    dists = {i: float(np.hypot(*(topology.positions[i] - ev))) for i in ids}
    inside = sorted(i for i in ids if dists[i] < config.event_radius)
    if inside:
        return inside
    return [min(ids, key=lambda i: (dists[i], i))]


# ---------------------------------------------------------------------------
# Canonical four-source fixture (abstract path memberships, no geometry)

@dataclass(frozen=True)
class CanonicalFixture:
    """Four sources feeding a sink over three path ids.

    S1/S2 know paths {1,2} and start on 1; S3/S4 know {1,2,3} and start on 2.
    known_paths tuples are quality-ordered (best first).  Observers map relay
    nodes to the set of path ids whose traffic they carry.
    """

    source_rates: dict = field(
        default_factory=lambda: {"S1": 50_000.0, "S2": 50_000.0, "S3": 90_000.0, "S4": 90_000.0}
    )
    known_paths: dict = field(
        default_factory=lambda: {"S1": (1, 2), "S2": (1, 2), "S3": (2, 1, 3), "S4": (2, 1, 3)}
    )
    observers: dict = field(
        default_factory=lambda: {5: (1, 2), 2: (2,), 3: (3,), 4: (3,), 10: (3,)}
    )

    @property
    def total_rate(self) -> float:
        return sum(self.source_rates.values())

    def path_totals(self, allocations: dict) -> dict:
        """Per-path aggregate rate over all sources, given {source: {pid: rate}}."""
        pids = sorted({p for paths in self.known_paths.values() for p in paths})
        return {p: sum(alloc.get(p, 0.0) for alloc in allocations.values()) for p in pids}

    def relay_load(self, node: int, allocations: dict) -> float:
        """Aggregate rate relayed by an observer node (sum over its path ids)."""
        totals = self.path_totals(allocations)
        return sum(totals[p] for p in self.observers[node])


def canonical_fixture() -> CanonicalFixture:
    return CanonicalFixture()


# ---------------------------------------------------------------------------
# key=value config files

_FIELD_ALIASES = {
    "nodes": "n_nodes",
    "rate": "source_rate",
    "range": "radio_range",
}

_TUPLE_FIELDS = {
    "field_size",
    "sink_position",
    "event_position",
    "energy_range",
}

_INT_FIELDS = {"n_nodes", "seed", "mode", "connect_retries"}


def parse_config_file(path) -> dict:
    """Read `key=value` lines into a dict of ScenarioConfig field overrides.

    Blank lines and '#' comments are ignored.  Pair-valued fields take
    `a,b`.  Unknown keys are reported instead of silently dropped.
    """
    known = {f.name for f in fields(ScenarioConfig)}
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
            key, val = (part.strip() for part in line.split("=", 1))
            key = _FIELD_ALIASES.get(key, key)
            if key not in known:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
            if key in _TUPLE_FIELDS:
                parts = [float(p) for p in val.split(",")]
                if len(parts) != 2:
                    raise ValueError(f"{path}:{lineno}: {key} needs two comma-separated numbers")
                out[key] = (parts[0], parts[1])
            elif key in _INT_FIELDS:
                out[key] = int(val)
            else:
                out[key] = float(val)
    return out


def config_from_file(path, **overrides) -> ScenarioConfig:
    values = parse_config_file(path)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return replace(ScenarioConfig(), **values)
