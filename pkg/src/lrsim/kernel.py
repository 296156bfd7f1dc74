"""Hot simulation kernels over flat numpy arrays.

Every function in this module is nopython-compatible.  With numba installed
the kernels are JIT-compiled; setting LRSIM_NO_NUMBA=1 (or running without
numba) executes the exact same code as plain Python over the same arrays,
so both paths produce identical results.  benchmarks/bench_kernel.py
compares the two.

The discrete-event loop lives in simulate(): a binary heap of events keyed
by (time, node id, sequence), per-node drop-tail FIFO ring buffers, credit
accumulators driving packet generation, transmit/receive energy accounting,
and congestion notifications that either propagate hop-by-hop down the
reverse routing trees or are applied instantaneously (analytic mode).
"""

from __future__ import annotations

import os

import numpy as np


def _numba_enabled() -> bool:
    flag = os.environ.get("LRSIM_NO_NUMBA", "").strip().lower()
    if flag in ("1", "true", "yes", "on"):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


USING_NUMBA = _numba_enabled()

if USING_NUMBA:
    from numba import njit as _numba_njit

    def njit(func):
        return _numba_njit(cache=True)(func)
else:
    def njit(func):  # pure-Python fallback: run kernels uncompiled
        return func


# event kinds
EV_GENERATE = 0
EV_TX_DONE = 1
EV_CN = 2

# event-log record kinds
LOG_GEN = 0
LOG_ENQ = 1
LOG_QDROP = 2
LOG_DELIVER = 3
LOG_EDROP_TX = 4
LOG_EDROP_RX = 5
LOG_BROKEN = 6
LOG_CN_EMIT = 7
LOG_CN_HOP = 8


# ---------------------------------------------------------------------------
# radio energy (first-order model: electronics per bit + amplifier per bit*d^2)

@njit
def tx_energy_j(bits, distance, e_elec, e_amp):
    return e_elec * bits + e_amp * bits * distance * distance


@njit
def rx_energy_j(bits, e_elec):
    return e_elec * bits


# ---------------------------------------------------------------------------
# rate allocation state machines (rates/active are per-source rows, indexed
# by the source's quality-ordered path position)

@njit
def alloc_init(mode, base, n_paths, rates, active):
    for j in range(n_paths):
        rates[j] = 0.0
        active[j] = 0
    if mode == 1:
        share = base / n_paths
        for j in range(n_paths):
            rates[j] = share
            active[j] = 1
    else:
        rates[0] = base
        active[0] = 1


@njit
def mode2_apply(base, n_paths, rates, active, j_cn):
    """Activate the first inactive path other than the congested one (the
    congested path itself when it is the only inactive one), then re-split
    the base rate uniformly over the active set."""
    pick = -1
    for j in range(n_paths):
        if active[j] == 0 and j != j_cn:
            pick = j
            break
    if pick < 0 and active[j_cn] == 0:
        pick = j_cn
    if pick >= 0:
        active[pick] = 1
    n_act = 0
    for j in range(n_paths):
        if active[j] == 1:
            n_act += 1
    share = base / n_act
    for j in range(n_paths):
        if active[j] == 1:
            rates[j] = share
        else:
            rates[j] = 0.0


@njit
def mode3_apply(n_paths, rates, active, j_cn):
    """Spread the congested path's current rate evenly over all known paths
    (the congested path keeps one share); every path becomes active."""
    share = rates[j_cn] / n_paths
    for j in range(n_paths):
        if j == j_cn:
            rates[j] = share
        else:
            rates[j] = rates[j] + share
        active[j] = 1


@njit
def occupancy_over_threshold(occupancy, capacity, threshold):
    return occupancy > threshold * capacity


# ---------------------------------------------------------------------------
# drop-tail FIFO ring buffers, one row per node

@njit
def queue_push(q_pid, q_src, q_seq, q_head, q_len, v, cap, pid_k, src, pkt):
    if q_len[v] >= cap:
        return False
    slot = (q_head[v] + q_len[v]) % cap
    q_pid[v, slot] = pid_k
    q_src[v, slot] = src
    q_seq[v, slot] = pkt
    q_len[v] += 1
    return True


@njit
def queue_pop(q_pid, q_src, q_seq, q_head, q_len, v, cap):
    slot = q_head[v]
    q_head[v] = (slot + 1) % cap
    q_len[v] -= 1
    return q_pid[v, slot], q_src[v, slot], q_seq[v, slot]


# ---------------------------------------------------------------------------
# event heap: parallel arrays, min-ordered by (time, node, sequence)

@njit
def _ev_before(t1, n1, s1, t2, n2, s2):
    if t1 != t2:
        return t1 < t2
    if n1 != n2:
        return n1 < n2
    return s1 < s2


@njit
def heap_push(h_t, h_node, h_seq, h_kind, h_a, h_b, h_c, size, t, node, seq, kind, a, b, c):
    i = size
    h_t[i] = t
    h_node[i] = node
    h_seq[i] = seq
    h_kind[i] = kind
    h_a[i] = a
    h_b[i] = b
    h_c[i] = c
    while i > 0:
        p = (i - 1) // 2
        if _ev_before(h_t[i], h_node[i], h_seq[i], h_t[p], h_node[p], h_seq[p]):
            h_t[i], h_t[p] = h_t[p], h_t[i]
            h_node[i], h_node[p] = h_node[p], h_node[i]
            h_seq[i], h_seq[p] = h_seq[p], h_seq[i]
            h_kind[i], h_kind[p] = h_kind[p], h_kind[i]
            h_a[i], h_a[p] = h_a[p], h_a[i]
            h_b[i], h_b[p] = h_b[p], h_b[i]
            h_c[i], h_c[p] = h_c[p], h_c[i]
            i = p
        else:
            break
    return size + 1


@njit
def heap_remove_root(h_t, h_node, h_seq, h_kind, h_a, h_b, h_c, size):
    last = size - 1
    h_t[0] = h_t[last]
    h_node[0] = h_node[last]
    h_seq[0] = h_seq[last]
    h_kind[0] = h_kind[last]
    h_a[0] = h_a[last]
    h_b[0] = h_b[last]
    h_c[0] = h_c[last]
    i = 0
    while True:
        left = 2 * i + 1
        right = left + 1
        best = i
        if left < last and _ev_before(h_t[left], h_node[left], h_seq[left], h_t[best], h_node[best], h_seq[best]):
            best = left
        if right < last and _ev_before(h_t[right], h_node[right], h_seq[right], h_t[best], h_node[best], h_seq[best]):
            best = right
        if best == i:
            break
        h_t[i], h_t[best] = h_t[best], h_t[i]
        h_node[i], h_node[best] = h_node[best], h_node[i]
        h_seq[i], h_seq[best] = h_seq[best], h_seq[i]
        h_kind[i], h_kind[best] = h_kind[best], h_kind[i]
        h_a[i], h_a[best] = h_a[best], h_a[i]
        h_b[i], h_b[best] = h_b[best], h_b[i]
        h_c[i], h_c[best] = h_c[best], h_c[i]
        i = best
    return last


@njit
def _grown_f8(a, need):
    cap = a.shape[0]
    while cap < need:
        cap *= 2
    out = np.empty(cap, dtype=np.float64)
    out[: a.shape[0]] = a
    return out


@njit
def _grown_i8(a, need):
    cap = a.shape[0]
    while cap < need:
        cap *= 2
    out = np.empty(cap, dtype=np.int64)
    out[: a.shape[0]] = a
    return out


@njit
def _grown_f8_2d(a, need):
    cap = a.shape[0]
    while cap < need:
        cap *= 2
    out = np.empty((cap, a.shape[1]), dtype=np.float64)
    out[: a.shape[0], :] = a
    return out


# ---------------------------------------------------------------------------
# packet generation credit accumulator

@njit
def credit_emissions(credit, rate, bits, t0, dt, out_times):
    """Emission times in (t0, t0+dt] for a constant-rate credit accumulator.

    A packet leaves whenever accumulated credit reaches the packet size;
    the fractional remainder carries over so the long-run bit rate equals
    the allocation exactly.  Returns (count, credit_after).
    """
    count = 0
    if rate <= 0.0:
        return 0, credit
    t = t0
    remaining = dt
    while count < out_times.shape[0]:
        wait = (bits - credit) / rate
        if wait > remaining:
            credit += rate * remaining
            break
        t += wait
        remaining -= wait
        credit += rate * wait - bits
        out_times[count] = t
        count += 1
    return count, credit


# ---------------------------------------------------------------------------
# the event loop

@njit
def _log_row(log_t, log_kind, log_node, log_pkt, log_aux, log_n, t, kind, node, pkt, aux):
    log_t[log_n] = t
    log_kind[log_n] = kind
    log_node[log_n] = node
    log_pkt[log_n] = pkt
    log_aux[log_n] = aux
    return log_n + 1


@njit
def _apply_and_reschedule(
    s, j_cn, now, mode, base_rate,
    sp_n, rates, active, cur_rate, credit, last_upd, epoch,
    src_node, packet_bits,
    h_t, h_node, h_seq, h_kind, h_a, h_b, h_c, h_size, ev_seq,
):
    """Apply a congestion reaction at source s and restart the generators of
    every path whose rate changed.  Credits are advanced under the old rates
    first so carried fractions stay exact."""
    n_paths = sp_n[s]
    for j in range(n_paths):
        credit[s, j] += cur_rate[s, j] * (now - last_upd[s, j])
        last_upd[s, j] = now
    if mode == 2:
        mode2_apply(base_rate[s], n_paths, rates[s], active[s], j_cn)
    else:
        mode3_apply(n_paths, rates[s], active[s], j_cn)
    for j in range(n_paths):
        new_rate = rates[s, j]
        if active[s, j] == 1 and new_rate != cur_rate[s, j]:
            cur_rate[s, j] = new_rate
            epoch[s, j] += 1
            wait = (packet_bits - credit[s, j]) / new_rate
            if wait < 0.0:
                wait = 0.0
            h_size = heap_push(
                h_t, h_node, h_seq, h_kind, h_a, h_b, h_c, h_size,
                now + wait, src_node[s], ev_seq, EV_GENERATE, s, j, epoch[s, j],
            )
            ev_seq += 1
    return h_size, ev_seq


@njit
def _should_react(s, j_cn, mode, sp_n, active):
    if mode == 3:
        return active[s, j_cn] == 1
    if mode == 2:
        for j in range(sp_n[s]):
            if active[s, j] == 0:
                return True
        return False
    return False


@njit
def _start_service(
    v, now, sink,
    energy, next_hop, hop_dist,
    q_pid, q_src, q_seq, q_head, q_len, queue_cap,
    busy, dead, edrops_tx, broken, relayed_bits, src_node,
    packet_bits, capacity_bps, e_elec, e_amp,
    h_t, h_node, h_seq, h_kind, h_a, h_b, h_c, h_size, ev_seq,
    log_t, log_kind, log_node, log_pkt, log_aux, log_n, collect_log,
):
    """Begin transmitting the head packet of v's queue.  Heads with no route
    are dropped and skipped; a head the node's energy cannot cover is dropped
    and the node stops relaying for good (its queue keeps filling, so the
    starved path shows up as congestion upstream).  The packet being sent
    stays in its queue slot until TX_DONE pops it."""
    charges = 0.0
    if dead[v] == 1:
        busy[v] = 0
        return h_size, ev_seq, charges, log_n
    while q_len[v] > 0:
        slot = q_head[v]
        pid_k = q_pid[v, slot]
        src = q_src[v, slot]
        pkt = q_seq[v, slot]
        nxt = next_hop[v, pid_k]
        if nxt < 0:
            queue_pop(q_pid, q_src, q_seq, q_head, q_len, v, queue_cap)
            broken[v] += 1
            if collect_log:
                log_n = _log_row(log_t, log_kind, log_node, log_pkt, log_aux, log_n, now, LOG_BROKEN, v, pkt, pid_k)
            continue
        cost = tx_energy_j(packet_bits, hop_dist[v, pid_k], e_elec, e_amp)
        if energy[v] < cost:
            queue_pop(q_pid, q_src, q_seq, q_head, q_len, v, queue_cap)
            edrops_tx[v] += 1
            dead[v] = 1
            busy[v] = 0
            if collect_log:
                log_n = _log_row(log_t, log_kind, log_node, log_pkt, log_aux, log_n, now, LOG_EDROP_TX, v, pkt, pid_k)
            return h_size, ev_seq, charges, log_n
        energy[v] -= cost
        charges += cost
        if src_node[src] != v:
            relayed_bits[v] += packet_bits
        busy[v] = 1
        h_size = heap_push(
            h_t, h_node, h_seq, h_kind, h_a, h_b, h_c, h_size,
            now + packet_bits / capacity_bps, v, ev_seq, EV_TX_DONE, 0, 0, 0,
        )
        ev_seq += 1
        return h_size, ev_seq, charges, log_n
    busy[v] = 0
    return h_size, ev_seq, charges, log_n


@njit
def simulate(
    duration,
    sink,
    energy,
    next_hop,
    hop_dist,
    rev_ptr,
    rev_child,
    src_node,
    src_of,
    base_rate,
    sp_pid,
    sp_n,
    sp_pos,
    mode,
    packet_bits,
    cn_bits,
    capacity_bps,
    queue_cap,
    threshold,
    cooldown,
    e_elec,
    e_amp,
    analytic_cn,
    collect_log,
):
    n = energy.shape[0]
    n_pids = next_hop.shape[1]
    n_src = src_node.shape[0]
    max_paths = sp_pid.shape[1]

    rates = np.zeros((n_src, max_paths), dtype=np.float64)
    active = np.zeros((n_src, max_paths), dtype=np.uint8)
    cur_rate = np.zeros((n_src, max_paths), dtype=np.float64)
    credit = np.zeros((n_src, max_paths), dtype=np.float64)
    last_upd = np.zeros((n_src, max_paths), dtype=np.float64)
    epoch = np.zeros((n_src, max_paths), dtype=np.int64)
    for s in range(n_src):
        alloc_init(mode, base_rate[s], sp_n[s], rates[s], active[s])

    q_pid = np.zeros((n, queue_cap), dtype=np.int64)
    q_src = np.zeros((n, queue_cap), dtype=np.int64)
    q_seq = np.zeros((n, queue_cap), dtype=np.int64)
    q_head = np.zeros(n, dtype=np.int64)
    q_len = np.zeros(n, dtype=np.int64)
    busy = np.zeros(n, dtype=np.uint8)
    last_cn = np.full((n, max(n_pids, 1)), -1.0e18, dtype=np.float64)

    attempts = np.zeros(n, dtype=np.int64)
    enqueued = np.zeros(n, dtype=np.int64)
    dequeued = np.zeros(n, dtype=np.int64)
    qdrops = np.zeros(n, dtype=np.int64)
    edrops_tx = np.zeros(n, dtype=np.int64)
    edrops_rx = np.zeros(n, dtype=np.int64)
    broken = np.zeros(n, dtype=np.int64)
    relayed_bits = np.zeros(n, dtype=np.float64)
    generated_bits = np.zeros(n, dtype=np.float64)
    gen_count = np.zeros(n_src, dtype=np.int64)
    delivered = np.zeros(n_src, dtype=np.int64)
    cn_emitted = 0
    cn_hops = 0
    charges = 0.0
    pkt_seq = 0
    ev_seq = 0

    batch_ks = np.zeros(max(n_pids, 1), dtype=np.int64)
    pre_active = np.zeros(max(max_paths, 1), dtype=np.uint8)

    cn_delay = cn_bits / capacity_bps

    # worst-case events/log rows appended while handling one event
    slack = n_src * max_paths + n * n_pids + queue_cap + 16

    h_cap = 2 * slack + 1024
    h_t = np.zeros(h_cap, dtype=np.float64)
    h_node = np.zeros(h_cap, dtype=np.int64)
    h_seq = np.zeros(h_cap, dtype=np.int64)
    h_kind = np.zeros(h_cap, dtype=np.int64)
    h_a = np.zeros(h_cap, dtype=np.int64)
    h_b = np.zeros(h_cap, dtype=np.int64)
    h_c = np.zeros(h_cap, dtype=np.int64)
    h_size = 0

    log_cap = 2 * slack + 1024 if collect_log else 1
    log_t = np.zeros(log_cap, dtype=np.float64)
    log_kind = np.zeros(log_cap, dtype=np.int64)
    log_node = np.zeros(log_cap, dtype=np.int64)
    log_pkt = np.zeros(log_cap, dtype=np.int64)
    log_aux = np.zeros(log_cap, dtype=np.int64)
    log_n = 0

    ra_cap = 256
    ra_t = np.zeros(ra_cap, dtype=np.float64)
    ra_src = np.zeros(ra_cap, dtype=np.int64)
    ra_node = np.zeros(ra_cap, dtype=np.int64)
    ra_pid = np.zeros(ra_cap, dtype=np.int64)
    ra_rates = np.zeros((ra_cap, max_paths), dtype=np.float64)
    ra_n = 0

    for s in range(n_src):
        for j in range(sp_n[s]):
            r = rates[s, j]
            cur_rate[s, j] = r
            if r > 0.0:
                h_size = heap_push(
                    h_t, h_node, h_seq, h_kind, h_a, h_b, h_c, h_size,
                    packet_bits / r, src_node[s], ev_seq, EV_GENERATE, s, j, 0,
                )
                ev_seq += 1

    while h_size > 0:
        # keep enough headroom that no handler needs to grow mid-flight
        if h_size + slack > h_t.shape[0]:
            need = h_size + slack
            h_t = _grown_f8(h_t, need)
            h_node = _grown_i8(h_node, need)
            h_seq = _grown_i8(h_seq, need)
            h_kind = _grown_i8(h_kind, need)
            h_a = _grown_i8(h_a, need)
            h_b = _grown_i8(h_b, need)
            h_c = _grown_i8(h_c, need)
        if collect_log and log_n + slack > log_t.shape[0]:
            need = log_n + slack
            log_t = _grown_f8(log_t, need)
            log_kind = _grown_i8(log_kind, need)
            log_node = _grown_i8(log_node, need)
            log_pkt = _grown_i8(log_pkt, need)
            log_aux = _grown_i8(log_aux, need)
        if ra_n + n_src * max(n_pids, 1) > ra_t.shape[0]:
            need = ra_n + n_src * max(n_pids, 1)
            ra_t = _grown_f8(ra_t, need)
            ra_src = _grown_i8(ra_src, need)
            ra_node = _grown_i8(ra_node, need)
            ra_pid = _grown_i8(ra_pid, need)
            ra_rates = _grown_f8_2d(ra_rates, need)

        now = h_t[0]
        kind = h_kind[0]
        ev_a = h_a[0]
        ev_b = h_b[0]
        ev_c = h_c[0]
        ev_node = h_node[0]
        h_size = heap_remove_root(h_t, h_node, h_seq, h_kind, h_a, h_b, h_c, h_size)
        if now > duration:
            break

        touched = -1  # node whose queue grew this event, for the congestion check

        if kind == EV_GENERATE:
            s = ev_a
            j = ev_b
            if ev_c != epoch[s, j]:
                continue
            r = cur_rate[s, j]
            if r <= 0.0:
                continue
            credit[s, j] += r * (now - last_upd[s, j]) - packet_bits
            last_upd[s, j] = now
            h_size = heap_push(
                h_t, h_node, h_seq, h_kind, h_a, h_b, h_c, h_size,
                now + (packet_bits - credit[s, j]) / r, ev_node, ev_seq, EV_GENERATE, s, j, epoch[s, j],
            )
            ev_seq += 1
            v = src_node[s]
            pid_k = sp_pid[s, j]
            pkt = pkt_seq
            pkt_seq += 1
            gen_count[s] += 1
            generated_bits[v] += packet_bits
            if collect_log:
                log_n = _log_row(log_t, log_kind, log_node, log_pkt, log_aux, log_n, now, LOG_GEN, v, pkt, pid_k)
            attempts[v] += 1
            if queue_push(q_pid, q_src, q_seq, q_head, q_len, v, queue_cap, pid_k, s, pkt):
                enqueued[v] += 1
                if collect_log:
                    log_n = _log_row(log_t, log_kind, log_node, log_pkt, log_aux, log_n, now, LOG_ENQ, v, pkt, pid_k)
                if busy[v] == 0:
                    h_size, ev_seq, dq, log_n = _start_service(
                        v, now, sink, energy, next_hop, hop_dist,
                        q_pid, q_src, q_seq, q_head, q_len, queue_cap,
                        busy, edrops_tx, broken, relayed_bits, src_node,
                        packet_bits, capacity_bps, e_elec, e_amp,
                        h_t, h_node, h_seq, h_kind, h_a, h_b, h_c, h_size, ev_seq,
                        log_t, log_kind, log_node, log_pkt, log_aux, log_n, collect_log,
                    )
                    charges += dq
            else:
                qdrops[v] += 1
                if collect_log:
                    log_n = _log_row(log_t, log_kind, log_node, log_pkt, log_aux, log_n, now, LOG_QDROP, v, pkt, pid_k)
            touched = v

        elif kind == EV_TX_DONE:
            v = ev_node
            pid_k, src, pkt = queue_pop(q_pid, q_src, q_seq, q_head, q_len, v, queue_cap)
            dequeued[v] += 1
            u = next_hop[v, pid_k]
            if u == sink:
                delivered[src] += 1
                if collect_log:
                    log_n = _log_row(log_t, log_kind, log_node, log_pkt, log_aux, log_n, now, LOG_DELIVER, sink, pkt, pid_k)
            else:
                rxc = rx_energy_j(packet_bits, e_elec)
                if energy[u] < rxc:
                    edrops_rx[u] += 1
                    if collect_log:
                        log_n = _log_row(log_t, log_kind, log_node, log_pkt, log_aux, log_n, now, LOG_EDROP_RX, u, pkt, pid_k)
                else:
                    energy[u] -= rxc
                    charges += rxc
                    attempts[u] += 1
                    if queue_push(q_pid, q_src, q_seq, q_head, q_len, u, queue_cap, pid_k, src, pkt):
                        enqueued[u] += 1
                        if collect_log:
                            log_n = _log_row(log_t, log_kind, log_node, log_pkt, log_aux, log_n, now, LOG_ENQ, u, pkt, pid_k)
                        if busy[u] == 0:
                            h_size, ev_seq, dq, log_n = _start_service(
                                u, now, sink, energy, next_hop, hop_dist,
                                q_pid, q_src, q_seq, q_head, q_len, queue_cap,
                                busy, edrops_tx, broken, relayed_bits, src_node,
                                packet_bits, capacity_bps, e_elec, e_amp,
                                h_t, h_node, h_seq, h_kind, h_a, h_b, h_c, h_size, ev_seq,
                                log_t, log_kind, log_node, log_pkt, log_aux, log_n, collect_log,
                            )
                            charges += dq
                    else:
                        qdrops[u] += 1
                        if collect_log:
                            log_n = _log_row(log_t, log_kind, log_node, log_pkt, log_aux, log_n, now, LOG_QDROP, u, pkt, pid_k)
                    touched = u
            if q_len[v] > 0 or busy[v] == 1:
                h_size, ev_seq, dq, log_n = _start_service(
                    v, now, sink, energy, next_hop, hop_dist,
                    q_pid, q_src, q_seq, q_head, q_len, queue_cap,
                    busy, edrops_tx, broken, relayed_bits, src_node,
                    packet_bits, capacity_bps, e_elec, e_amp,
                    h_t, h_node, h_seq, h_kind, h_a, h_b, h_c, h_size, ev_seq,
                    log_t, log_kind, log_node, log_pkt, log_aux, log_n, collect_log,
                )
                charges += dq

        else:  # EV_CN: a=path index, b=origin node of the notification
            c_node = ev_node
            k = ev_a
            origin = ev_b
            rxc = rx_energy_j(cn_bits, e_elec)
            if energy[c_node] >= rxc:
                energy[c_node] -= rxc
                charges += rxc
            if collect_log:
                log_n = _log_row(log_t, log_kind, log_node, log_pkt, log_aux, log_n, now, LOG_CN_HOP, c_node, -1, k)
            s = src_of[c_node]
            if s >= 0 and sp_pos[s, k] >= 0:
                j_cn = sp_pos[s, k]
                if _should_react(s, j_cn, mode, sp_n, active):
                    h_size, ev_seq = _apply_and_reschedule(
                        s, j_cn, now, mode, base_rate,
                        sp_n, rates, active, cur_rate, credit, last_upd, epoch,
                        src_node, packet_bits,
                        h_t, h_node, h_seq, h_kind, h_a, h_b, h_c, h_size, ev_seq,
                    )
                    ra_t[ra_n] = now
                    ra_src[ra_n] = s
                    ra_node[ra_n] = origin
                    ra_pid[ra_n] = k
                    for j in range(max_paths):
                        ra_rates[ra_n, j] = rates[s, j]
                    ra_n += 1
            base_idx = c_node * n_pids + k
            for ci in range(rev_ptr[base_idx], rev_ptr[base_idx + 1]):
                child = rev_child[ci]
                txc = tx_energy_j(cn_bits, hop_dist[child, k], e_elec, e_amp)
                if energy[c_node] >= txc:
                    energy[c_node] -= txc
                    charges += txc
                cn_hops += 1
                h_size = heap_push(
                    h_t, h_node, h_seq, h_kind, h_a, h_b, h_c, h_size,
                    now + cn_delay, child, ev_seq, EV_CN, k, origin, 0,
                )
                ev_seq += 1

        # queue grew (or overflowed): emit congestion notifications
        if touched >= 0 and occupancy_over_threshold(q_len[touched], queue_cap, threshold):
            u = touched
            nb = 0
            for k in range(n_pids):
                if next_hop[u, k] >= 0 and now - last_cn[u, k] >= cooldown:
                    last_cn[u, k] = now
                    batch_ks[nb] = k
                    nb += 1
                    cn_emitted += 1
                    if collect_log:
                        log_n = _log_row(log_t, log_kind, log_node, log_pkt, log_aux, log_n, now, LOG_CN_EMIT, u, -1, k)
            if nb > 0:
                if analytic_cn:
                    # instantaneous batch delivery to every source knowing the
                    # path id; reactions judged against pre-batch active sets
                    for s in range(n_src):
                        n_paths = sp_n[s]
                        for j in range(n_paths):
                            pre_active[j] = active[s, j]
                        for bi in range(nb):
                            k = batch_ks[bi]
                            j_cn = sp_pos[s, k]
                            if j_cn < 0:
                                continue
                            if mode == 3:
                                ok = pre_active[j_cn] == 1
                            elif mode == 2:
                                ok = False
                                for j in range(n_paths):
                                    if pre_active[j] == 0:
                                        ok = True
                                        break
                            else:
                                ok = False
                            if not ok:
                                continue
                            h_size, ev_seq = _apply_and_reschedule(
                                s, j_cn, now, mode, base_rate,
                                sp_n, rates, active, cur_rate, credit, last_upd, epoch,
                                src_node, packet_bits,
                                h_t, h_node, h_seq, h_kind, h_a, h_b, h_c, h_size, ev_seq,
                            )
                            ra_t[ra_n] = now
                            ra_src[ra_n] = s
                            ra_node[ra_n] = u
                            ra_pid[ra_n] = k
                            for j in range(max_paths):
                                ra_rates[ra_n, j] = rates[s, j]
                            ra_n += 1
                else:
                    for bi in range(nb):
                        k = batch_ks[bi]
                        s = src_of[u]
                        if s >= 0 and sp_pos[s, k] >= 0:
                            j_cn = sp_pos[s, k]
                            if _should_react(s, j_cn, mode, sp_n, active):
                                h_size, ev_seq = _apply_and_reschedule(
                                    s, j_cn, now, mode, base_rate,
                                    sp_n, rates, active, cur_rate, credit, last_upd, epoch,
                                    src_node, packet_bits,
                                    h_t, h_node, h_seq, h_kind, h_a, h_b, h_c, h_size, ev_seq,
                                )
                                ra_t[ra_n] = now
                                ra_src[ra_n] = s
                                ra_node[ra_n] = u
                                ra_pid[ra_n] = k
                                for j in range(max_paths):
                                    ra_rates[ra_n, j] = rates[s, j]
                                ra_n += 1
                        base_idx = u * n_pids + k
                        for ci in range(rev_ptr[base_idx], rev_ptr[base_idx + 1]):
                            child = rev_child[ci]
                            txc = tx_energy_j(cn_bits, hop_dist[child, k], e_elec, e_amp)
                            if energy[u] >= txc:
                                energy[u] -= txc
                                charges += txc
                            cn_hops += 1
                            h_size = heap_push(
                                h_t, h_node, h_seq, h_kind, h_a, h_b, h_c, h_size,
                                now + cn_delay, child, ev_seq, EV_CN, k, u, 0,
                            )
                            ev_seq += 1

    return (
        energy, charges,
        attempts, enqueued, dequeued, qdrops, edrops_tx, edrops_rx, broken,
        relayed_bits, generated_bits,
        gen_count, delivered,
        cn_emitted, cn_hops,
        q_len,
        rates, active,
        pkt_seq,
        log_t[:log_n].copy(), log_kind[:log_n].copy(), log_node[:log_n].copy(),
        log_pkt[:log_n].copy(), log_aux[:log_n].copy(),
        ra_t[:ra_n].copy(), ra_src[:ra_n].copy(), ra_node[:ra_n].copy(),
        ra_pid[:ra_n].copy(), ra_rates[:ra_n].copy(),
    )
