"""Offline optimum via a compressed time-expanded max-flow network.

The plain time-expanded network has one carry node per (u, t). Most of those
nodes are idle, so the network here is compressed in two ways:

* consecutive arrivals with the same neighbor set form one *block* node whose
  sink arc has capacity equal to the block length. A block is closed after any
  step at which one of its members is refilled, so members' budgets only go
  down inside a block and any per-node split of the block is feasible;
* each offline node keeps a chain of *epochs*. A new epoch starts only when a
  refill arrives after the node was used in the current epoch; otherwise the
  refill is merged into the current epoch's source arc. This is exact under a
  cap because ``min(K, min(K, x + r1) + r2) == min(K, x + r1 + r2)``.

With a finite cap every epoch is an in/out pair joined by an arc of capacity K.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit
from scipy.sparse import csr_array
from scipy.sparse.csgraph import maximum_flow

from ._pushrelabel import max_flow_dag
from .core import ContractError, OnlineInstance

SOURCE, SINK = 0, 1


@dataclass
class FlowNetwork:
    num_nodes: int
    tails: np.ndarray
    heads: np.ndarray
    caps: np.ndarray
    cap: int | None  # budget cap K of the instance
    block_start: np.ndarray
    block_len: np.ndarray
    block_arc: np.ndarray  # arc block -> sink
    match_arcs: np.ndarray  # arcs epoch -> block, grouped by block in time order
    match_node: np.ndarray
    match_block: np.ndarray
    match_epoch: np.ndarray
    ep_src: np.ndarray  # source arc of each epoch
    ep_carry: np.ndarray  # carry arc into the epoch, -1 for a node's first epoch
    ep_split: np.ndarray  # in -> out arc under a finite cap, else -1
    ep_prev: np.ndarray  # previous epoch of the same node, or -1
    last_block: np.ndarray  # last block using each offline node

    @property
    def num_arcs(self) -> int:
        return int(self.tails.size)


class _RefillLookup:
    """Total refill of node u over steps (lo, hi]."""

    def __init__(self, instance: OnlineInstance):
        sched = instance.refills
        self.kind = sched.kind
        self.m = sched.m
        self.step_members = {}
        if self.kind in ("bernoulli", "explicit"):
            ts, us, amts = sched.events(instance.n, instance.T)
            order = np.lexsort((ts, us))
            ts_u, us_u, a_u = ts[order], us[order], amts[order]
            bounds = np.searchsorted(us_u, np.arange(instance.n + 1))
            self.times = [ts_u[bounds[u]:bounds[u + 1]].tolist() for u in range(instance.n)]
            self.cum = [[0] + np.cumsum(a_u[bounds[u]:bounds[u + 1]]).tolist()
                        for u in range(instance.n)]
            for t, u in zip(ts.tolist(), us.tolist()):
                self.step_members.setdefault(t, set()).add(u)

    def amount(self, u: int, lo: int, hi: int) -> int:
        if hi <= lo or self.kind == "none":
            return 0
        if self.kind == "periodic":
            return hi // self.m - lo // self.m
        times, cum = self.times[u], self.cum[u]
        return cum[bisect.bisect_right(times, hi)] - cum[bisect.bisect_right(times, lo)]

    def splits(self, t: int, members) -> bool:
        """Whether a member of the block is refilled at step t."""
        if self.kind == "periodic":
            return t % self.m == 0
        if self.kind == "none":
            return False
        hit = self.step_members.get(t)
        return bool(hit) and not hit.isdisjoint(members)


def _blocks(instance: OnlineInstance, refills: _RefillLookup):
    starts, lens, sets = [], [], []
    cur, cur_set, run = None, None, 0
    for t, nb in enumerate(instance.neighbors, start=1):
        if run and nb is not cur and nb != cur:
            run = 0
        if run == 0:
            if not nb:
                continue
            starts.append(t)
            lens.append(0)
            sets.append(nb)
            cur, cur_set = nb, None
        lens[-1] += 1
        run += 1
        if refills.kind in ("bernoulli", "explicit"):
            if cur_set is None:
                cur_set = set(cur)
            if refills.splits(t, cur_set):
                run = 0
        elif refills.splits(t, None):
            run = 0
    return starts, lens, sets


def build_network(instance: OnlineInstance, max_nodes: int = 50_000_000,
                  max_arcs: int = 200_000_000) -> FlowNetwork:
    """Compressed time-expanded network whose max-flow value is OPT."""
    refills = _RefillLookup(instance)
    starts, lens, sets = _blocks(instance, refills)
    n, K, b0 = instance.n, instance.cap, instance.b0
    split = K is not None
    carry_cap = K if split else instance.T + n * b0 + 1

    tails, heads, caps = [], [], []
    block_arc, match_arcs, match_node, match_block, match_epoch = [], [], [], [], []
    ep_src, ep_carry, ep_split, ep_prev = [], [], [], []
    num = [2]

    def new_node():
        num[0] += 1
        return num[0] - 1

    def arc(a, b, c):
        tails.append(a)
        heads.append(b)
        caps.append(c)
        return len(caps) - 1

    def new_epoch(prev_out, supply, prev_id=-1):
        ep_prev.append(prev_id)
        node_in = new_node()
        node_out = new_node() if split else node_in
        ep_split.append(arc(node_in, node_out, K) if split else -1)
        ep_src.append(arc(SOURCE, node_in, supply))
        ep_carry.append(arc(prev_out, node_in, carry_cap) if prev_out is not None else -1)
        return node_out, len(ep_src) - 1

    epoch_out = [None] * n  # current epoch's out node
    epoch_id = [-1] * n
    used = [False] * n
    seen_to = [0] * n  # refills accounted for up to this step
    last_block = [-1] * n

    for bid, (s, L, nb) in enumerate(zip(starts, lens, sets)):
        bnode = new_node()
        block_arc.append(arc(bnode, SINK, L))
        for u in nb:
            if epoch_out[u] is None:
                r = refills.amount(u, 0, s - 1)
                epoch_out[u], epoch_id[u] = new_epoch(None, b0 + r)
            else:
                r = refills.amount(u, seen_to[u], s - 1)
                if r:
                    if used[u]:
                        epoch_out[u], epoch_id[u] = new_epoch(epoch_out[u], r, epoch_id[u])
                        used[u] = False
                    else:
                        caps[ep_src[epoch_id[u]]] += r
            seen_to[u] = s - 1
            used[u] = True
            last_block[u] = bid
            match_arcs.append(arc(epoch_out[u], bnode, L))
            match_node.append(u)
            match_block.append(bid)
            match_epoch.append(epoch_id[u])
        if num[0] > max_nodes or len(caps) > max_arcs:
            raise ContractError(f"network exceeds limits ({num[0]} nodes, {len(caps)} arcs)")

    def arr(x):
        return np.asarray(x, dtype=np.int64)

    return FlowNetwork(num[0], arr(tails), arr(heads), arr(caps), K, arr(starts), arr(lens),
                       arr(block_arc), arr(match_arcs), arr(match_node), arr(match_block),
                       arr(match_epoch), arr(ep_src), arr(ep_carry), arr(ep_split), arr(ep_prev),
                       arr(last_block))


@njit(cache=True)
def _greedy_flow(ncap, caps, block_arc, match_arcs, match_node, match_block, match_epoch,
                 ep_src, ep_carry, ep_split, ep_prev, last_block, n):
    """A feasible starting flow: blocks in time order, each served first by the members
    whose last use comes soonest. ``ncap < 0`` means no budget cap."""
    flow = np.zeros(caps.size, np.int64)
    cur = np.full(n, -1, np.int64)
    avail = np.zeros(n, np.int64)
    i, na = 0, match_arcs.size
    while i < na:
        b = match_block[i]
        j = i
        while j < na and match_block[j] == b:
            j += 1
        keys = np.empty(j - i, np.int64)
        for a in range(i, j):
            u = match_node[a]
            e = match_epoch[a]
            if cur[u] != e:
                carry = avail[u] if cur[u] >= 0 else 0
                if ep_carry[e] >= 0:
                    flow[ep_carry[e]] = carry
                level = carry + caps[ep_src[e]]
                if ncap >= 0 and level > ncap:
                    level = ncap
                flow[ep_src[e]] = level - carry
                if ep_split[e] >= 0:
                    flow[ep_split[e]] = level
                avail[u] = level
                cur[u] = e
            keys[a - i] = last_block[u]
        need = caps[block_arc[b]]
        for r in np.argsort(keys, kind="mergesort"):
            if need == 0:
                break
            a = i + r
            u = match_node[a]
            x = avail[u] if avail[u] < need else need
            if x > 0:
                flow[match_arcs[a]] = x
                avail[u] -= x
                need -= x
        flow[block_arc[b]] = caps[block_arc[b]] - need
        i = j
    # leftover budget has nowhere to go: unwind it back towards the source
    for u in range(n):
        e, rem = cur[u], avail[u]
        while rem > 0 and e >= 0:
            if ep_split[e] >= 0:
                flow[ep_split[e]] -= rem
            d = flow[ep_src[e]] if flow[ep_src[e]] < rem else rem
            flow[ep_src[e]] -= d
            rem -= d
            if rem > 0:
                flow[ep_carry[e]] -= rem
            e = ep_prev[e]
    return flow


def greedy_flow(net: FlowNetwork) -> np.ndarray:
    if net.match_arcs.size == 0:
        return np.zeros(net.num_arcs, np.int64)
    return _greedy_flow(-1 if net.cap is None else int(net.cap), net.caps, net.block_arc,
                        net.match_arcs, net.match_node, net.match_block, net.match_epoch,
                        net.ep_src, net.ep_carry, net.ep_split, net.ep_prev, net.last_block,
                        int(net.match_node.max()) + 1)


def solve_network(net: FlowNetwork, method: str = "push-relabel"):
    """Returns ``(value, flow on each arc)``.

    ``push-relabel`` is the compiled solver in :mod:`._pushrelabel`; ``dinic``
    uses scipy and is kept as an independent cross-check for small networks.
    """
    if net.num_arcs == 0:
        return 0, np.zeros(0, dtype=np.int64)
    if method == "push-relabel":
        # run on the reversed graph: arrivals are the scarce side, so starting
        # excess at the sink drains far faster than saturating every budget arc
        # warm-started from a greedy flow
        return max_flow_dag(net.num_nodes, net.heads, net.tails, net.caps, SINK, SOURCE,
                            init=greedy_flow(net))
    if method != "dinic":
        raise ContractError(f"unknown max-flow method {method!r}")
    if net.caps.max() >= 2**31:
        raise ContractError("capacities overflow int32")
    g = csr_array((net.caps.astype(np.int32), (net.tails, net.heads)),
                  shape=(net.num_nodes, net.num_nodes))
    res = maximum_flow(g, SOURCE, SINK, method="dinic")
    f = res.flow.tocoo()
    keys = f.row.astype(np.int64) * net.num_nodes + f.col
    order = np.argsort(keys)
    keys, vals = keys[order], np.asarray(f.data, dtype=np.int64)[order]
    want = net.tails * net.num_nodes + net.heads
    idx = np.minimum(np.searchsorted(keys, want), keys.size - 1)
    flow = np.where(keys[idx] == want, vals[idx], 0)
    return int(res.flow_value), np.maximum(flow, 0)


def opt_maxflow(instance: OnlineInstance, method: str = "push-relabel", **limits):
    """Maximum feasible matching size and one witness assignment (``-1`` = unmatched)."""
    if not isinstance(instance, OnlineInstance):
        raise ContractError("freeze adaptive instances first")
    net = build_network(instance, **limits)
    value, flow = solve_network(net, method)
    choices = np.full(instance.T, -1, dtype=np.int64)
    fill = np.zeros(net.block_start.size, dtype=np.int64)
    mflow = flow[net.match_arcs] if net.match_arcs.size else np.zeros(0, np.int64)
    for u, b, f in zip(net.match_node.tolist(), net.match_block.tolist(), mflow.tolist()):
        if f:
            s = int(net.block_start[b]) - 1 + int(fill[b])
            choices[s:s + f] = u
            fill[b] += f
    return value, choices


def brute_force_opt(instance: OnlineInstance) -> int:
    """Exhaustive search; only for ``T <= 20`` and ``n <= 8``."""
    if instance.T > 20 or instance.n > 8:
        raise ContractError("brute force limited to T <= 20, n <= 8")
    refill = instance.refills.to_matrix(instance.n, instance.T)
    K, nbs, T = instance.cap, instance.neighbors, instance.T

    def after(b, t):
        col = refill[:, t - 1]
        out = [x + int(r) for x, r in zip(b, col)]
        return tuple(out if K is None else (min(K, x) for x in out))

    @lru_cache(maxsize=None)
    def best(t, b):
        if t > T:
            return 0
        val = best(t + 1, after(b, t))
        for u in nbs[t - 1]:
            if b[u] >= 1:
                nb = list(b)
                nb[u] -= 1
                val = max(val, 1 + best(t + 1, after(nb, t)))
        return val

    return best(1, (instance.b0,) * instance.n)


def opt_upper_bound_sto(n: int, b0: int, beta: float, T: int) -> float:
    """``n * b0 + beta * T``: every match spends one unit of initial or refilled budget."""
    return n * b0 + beta * T
