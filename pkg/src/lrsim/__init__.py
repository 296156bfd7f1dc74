"""Load repartition over multipath routes: simulator and protocol library."""

from .congestion import (
    CongestionNotification,
    SourceState,
    apply_cn_mode2,
    apply_cn_mode3,
    deliver_cn,
    deliver_cn_batch,
    emit_cns,
    init_allocation,
    node_congested,
    should_react,
)
from .engine import EngineParams, run
from .kernel import USING_NUMBA
from .metrics import RunMetrics, jain_index
from .routing import build_paths, path_quality, path_trace
from .scenario import ScenarioConfig, canonical_fixture, generate_topology, select_sources

__version__ = "0.1.0"

__all__ = [
    "CongestionNotification",
    "EngineParams",
    "RunMetrics",
    "ScenarioConfig",
    "SourceState",
    "USING_NUMBA",
    "apply_cn_mode2",
    "apply_cn_mode3",
    "build_paths",
    "canonical_fixture",
    "deliver_cn",
    "deliver_cn_batch",
    "emit_cns",
    "generate_topology",
    "init_allocation",
    "jain_index",
    "node_congested",
    "path_quality",
    "path_trace",
    "run",
    "select_sources",
    "should_react",
]
