"""Command-line front end: single runs, mode sweeps, and the worked
four-source allocation example as a self-check.

CSV rows are schema-stable:
run_id,mode,n_nodes,seed,drop_rate,rate_fairness,load_fairness,energy_per_delivered_J,delivered,dropped,cn_count
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from dataclasses import replace

from . import routing
from .congestion import SourceState, deliver_cn_batch, emit_cns, init_allocation
from .engine import EngineParams, run
from .scenario import ScenarioConfig, canonical_fixture, generate_topology, parse_config_file, select_sources

CSV_HEADER = (
    "run_id,mode,n_nodes,seed,drop_rate,rate_fairness,load_fairness,"
    "energy_per_delivered_J,delivered,dropped,cn_count"
)

DEFAULT_NODE_COUNTS = (50, 100, 150, 200, 250)


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


def _metrics_row(run_id, mode, n_nodes, seed, m) -> str:
    cells = [
        str(run_id), str(mode), str(n_nodes), "" if seed is None else str(seed),
        _fmt(m.drop_rate), _fmt(m.rate_fairness), _fmt(m.load_fairness),
        _fmt(m.energy_per_delivered), str(m.delivered), str(m.dropped), str(m.cn_count),
    ]
    return ",".join(cells)


def _write_csv(path: str, lines: list):
    """Write atomically so a failed run leaves no partial file behind."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".lrsim-", suffix=".csv")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
        os.replace(tmp, path)
    except OSError:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def _scenario_from_args(args) -> ScenarioConfig:
    base = ScenarioConfig()
    if getattr(args, "config", None):
        overrides = parse_config_file(args.config)
        base = replace(base, **overrides)
    updates = {}
    if getattr(args, "nodes", None) is not None:
        updates["n_nodes"] = args.nodes
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "mode", None) is not None:
        updates["mode"] = args.mode
    if getattr(args, "rate", None) is not None:
        updates["source_rate"] = args.rate
    if getattr(args, "duration", None) is not None:
        updates["duration"] = args.duration
    return replace(base, **updates)


def _params_from_args(args) -> EngineParams:
    params = EngineParams()
    if getattr(args, "queue_capacity", None) is not None:
        params.queue_capacity = args.queue_capacity
    if getattr(args, "threshold", None) is not None:
        params.threshold = args.threshold
    if getattr(args, "packet_bits", None) is not None:
        params.packet_bits = args.packet_bits
    if getattr(args, "capacity_bps", None) is not None:
        params.capacity_bps = args.capacity_bps
    if getattr(args, "analytic", False):
        params.analytic_cn = True
    return params


def cmd_run(args) -> int:
    try:
        config = _scenario_from_args(args).validate()
        params = _params_from_args(args).validate()
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    result = run(config, params)
    m = result.metrics
    print(f"mode            = {config.mode}")
    print(f"n_nodes         = {config.n_nodes}")
    print(f"seed            = {config.seed}")
    print(f"sources         = {[s.source_id for s in result.sources]}")
    print(f"drop_rate       = {_fmt(m.drop_rate)}")
    print(f"rate_fairness   = {_fmt(m.rate_fairness)}")
    print(f"load_fairness   = {_fmt(m.load_fairness)}")
    print(f"energy_per_pkt  = {_fmt(m.energy_per_delivered)} J")
    print(f"delivered       = {m.delivered}")
    print(f"dropped         = {m.dropped}")
    print(f"cn_count        = {m.cn_count}")
    if args.output:
        row = _metrics_row(f"m{config.mode}n{config.n_nodes}r0", config.mode, config.n_nodes, config.seed, m)
        try:
            _write_csv(args.output, [CSV_HEADER, row])
        except OSError as exc:
            print(f"error: cannot write {args.output}: {exc}", file=sys.stderr)
            return 1
    return 0


def cmd_sweep(args) -> int:
    try:
        modes = sorted({int(m) for m in args.modes.split(",")})
        counts = [int(c) for c in args.node_counts.split(",")]
        if not counts:
            raise ValueError("node_counts must not be empty")
        if args.runs < 1:
            raise ValueError("runs must be >= 1")
        if any(m not in (0, 1, 2, 3) for m in modes):
            raise ValueError("modes must be a subset of 0,1,2,3")
        base_config = _scenario_from_args(args)
        params = _params_from_args(args).validate()
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    rows = {}
    metric_values = {}
    for count in counts:
        for r in range(args.runs):
            seed = args.base_seed + r
            config = replace(base_config, n_nodes=count, seed=seed).validate()
            topology = generate_topology(config)
            sources = select_sources(topology, config)
            tables = routing.build_paths(topology, sources)
            for mode in modes:
                cfg = replace(config, mode=mode)
                result = run(cfg, params, topology=topology, tables=tables, sources=sources)
                m = result.metrics
                rows[(mode, count, r)] = _metrics_row(f"m{mode}n{count}r{r}", mode, count, seed, m)
                metric_values.setdefault((mode, count), []).append(m)
        print(f"sweep: finished {count} nodes ({args.runs} runs x {len(modes)} modes)", file=sys.stderr)

    lines = [CSV_HEADER]
    for mode in modes:
        for count in counts:
            for r in range(args.runs):
                lines.append(rows[(mode, count, r)])
    for mode in modes:
        for count in counts:
            ms = metric_values[(mode, count)]
            k = len(ms)
            mean = lambda vals: sum(vals) / k  # noqa: E731
            lines.append(
                ",".join(
                    [
                        "mean", str(mode), str(count), "",
                        _fmt(mean([x.drop_rate for x in ms])),
                        _fmt(mean([x.rate_fairness for x in ms])),
                        _fmt(mean([x.load_fairness for x in ms])),
                        _fmt(mean([x.energy_per_delivered for x in ms])),
                        _fmt(mean([float(x.delivered) for x in ms])),
                        _fmt(mean([float(x.dropped) for x in ms])),
                        _fmt(mean([float(x.cn_count) for x in ms])),
                    ]
                )
            )
    try:
        _write_csv(args.output, lines)
    except OSError as exc:
        print(f"error: cannot write {args.output}: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.output} ({len(lines) - 1} rows)", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# canonical fixture check

_KB = 1000.0


def _fixture_states(mode: int) -> list:
    fx = canonical_fixture()
    states = []
    for sid in sorted(fx.source_rates):
        st = SourceState(
            source_id=sid,
            base_rate=fx.source_rates[sid],
            known_paths=list(fx.known_paths[sid]),
            mode=mode,
        )
        st.allocation = init_allocation(st)
        states.append(st)
    return states


def _close(a: float, b: float, rel: float = 1e-9) -> bool:
    return abs(a - b) <= rel * max(1.0, abs(a), abs(b))


def fixture_report(mode: int) -> tuple:
    """Run the worked example in analytic mode; returns (passed, lines)."""
    fx = canonical_fixture()
    states = _fixture_states(mode)
    lines = [f"canonical fixture, mode {mode} (rates in kbit/s)"]
    failures = []

    expect_step1 = {
        "S1": {1: 25.0, 2: 25.0},
        "S2": {1: 25.0, 2: 25.0},
        "S3": {1: 30.0, 2: 30.0, 3: 30.0},
        "S4": {1: 30.0, 2: 30.0, 3: 30.0},
    }
    if mode == 3:
        expect_step2 = {
            "S1": {1: 37.5, 2: 12.5},
            "S2": {1: 37.5, 2: 12.5},
            "S3": {1: 40.0, 2: 10.0, 3: 40.0},
            "S4": {1: 40.0, 2: 10.0, 3: 40.0},
        }
        expect_totals2 = {1: 155.0, 2: 45.0, 3: 80.0}
        expect_node5_2 = 200.0
    else:
        # with every path already active, mode 2 has nothing left to add
        expect_step2 = expect_step1
        expect_totals2 = {1: 110.0, 2: 110.0, 3: 60.0}
        expect_node5_2 = 220.0

    steps = [
        ("initial", None, None, {1: 100.0, 2: 180.0, 3: 0.0}, 280.0),
        ("after CN(5,1)+CN(5,2)", 5, expect_step1, {1: 110.0, 2: 110.0, 3: 60.0}, 220.0),
        ("after CN(2,2)", 2, expect_step2, expect_totals2, expect_node5_2),
    ]
    for name, cn_node, expected_alloc, expected_totals, expected_node5 in steps:
        if cn_node is not None:
            batch = emit_cns(cn_node, fx.observers[cn_node])
            deliver_cn_batch(states, batch)
        allocations = {st.source_id: dict(st.allocation) for st in states}
        totals = {p: t / _KB for p, t in fx.path_totals(allocations).items()}
        node5 = fx.relay_load(5, allocations) / _KB
        lines.append(f"  {name}:")
        for p in sorted(totals):
            ok = _close(totals[p], expected_totals[p])
            lines.append(f"    path {p} total {totals[p]:g} expected {expected_totals[p]:g} {'ok' if ok else 'MISMATCH'}")
            if not ok:
                failures.append(f"{name}: path {p} total")
        ok = _close(node5, expected_node5)
        lines.append(f"    node 5 aggregate {node5:g} expected {expected_node5:g} {'ok' if ok else 'MISMATCH'}")
        if not ok:
            failures.append(f"{name}: node 5 aggregate")
        if expected_alloc is not None:
            for sid in sorted(expected_alloc):
                got = {p: v / _KB for p, v in allocations[sid].items()}
                want = expected_alloc[sid]
                if set(got) != set(want) or any(not _close(got[p], want[p]) for p in want):
                    failures.append(f"{name}: {sid} allocation")
                    lines.append(f"    {sid} allocation {got} expected {want} MISMATCH")
                else:
                    lines.append(f"    {sid} allocation {got} ok")
    passed = not failures
    lines.append("PASS" if passed else "FAIL: " + "; ".join(failures))
    return passed, lines


def cmd_fixture(args) -> int:
    passed, lines = fixture_report(args.mode)
    print("\n".join(lines))
    return 0 if passed else 1


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lrsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="one seeded run, metrics on stdout")
    p_run.add_argument("--mode", type=int, choices=(0, 1, 2, 3), default=0)
    p_run.add_argument("--nodes", type=int)
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--rate", type=float, help="source rate in bit/s")
    p_run.add_argument("--duration", type=float)
    p_run.add_argument("--queue-capacity", type=int)
    p_run.add_argument("--threshold", type=float)
    p_run.add_argument("--packet-bits", type=int)
    p_run.add_argument("--capacity-bps", type=float)
    p_run.add_argument("--analytic", action="store_true", help="instantaneous congestion notifications")
    p_run.add_argument("--config", help="key=value scenario file, flags override")
    p_run.add_argument("--output", help="also write a one-row CSV")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="modes x node counts x seeds, CSV out")
    p_sweep.add_argument("--modes", default="0,1,2,3")
    p_sweep.add_argument("--node-counts", default=",".join(str(c) for c in DEFAULT_NODE_COUNTS))
    p_sweep.add_argument("--runs", type=int, default=20, help="runs per point (100 reproduces the full design)")
    p_sweep.add_argument("--base-seed", type=int, default=1)
    p_sweep.add_argument("--rate", type=float)
    p_sweep.add_argument("--duration", type=float)
    p_sweep.add_argument("--queue-capacity", type=int)
    p_sweep.add_argument("--threshold", type=float)
    p_sweep.add_argument("--packet-bits", type=int)
    p_sweep.add_argument("--capacity-bps", type=float)
    p_sweep.add_argument("--analytic", action="store_true")
    p_sweep.add_argument("--config", help="key=value scenario file, flags override")
    p_sweep.add_argument("--output", required=True)
    p_sweep.set_defaults(func=cmd_sweep)

    p_fix = sub.add_parser("fixture", help="check the worked four-source example")
    p_fix.add_argument("--mode", type=int, choices=(2, 3), default=3)
    p_fix.set_defaults(func=cmd_fixture)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
