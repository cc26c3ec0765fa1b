"""Random and adversarial instance generators."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (STREAM_ADVERSARY, STREAM_EDGES, AdaptiveInstance, ContractError,
                   OnlineInstance, RefillSchedule, _geometric_positions, make_rng)


def gen_erdos_renyi(n: int, T: int, a: float, beta: float, b0: int = 1, cap=None,
                    seed: int = 0) -> OnlineInstance:
    """Each (u, t) edge independently with probability a/n; Bernoulli(beta/n) refills.

    Edges and refills are drawn from separate streams of ``seed`` so that changing
    ``beta`` leaves the graph untouched.
    """
    if n < 1 or T < 0:
        raise ContractError("need n >= 1 and T >= 0")
    if not 0 <= a <= n:
        raise ContractError(f"edge probability a/n = {a}/{n} outside [0, 1]")
    if not 0 <= beta <= n:
        raise ContractError(f"refill probability beta/n = {beta}/{n} outside [0, 1]")
    pos = _geometric_positions(make_rng(seed, STREAM_EDGES), a / n, n * T)
    counts = np.bincount(pos // n, minlength=T).tolist()
    nodes = (pos % n).tolist()
    neighbors, i = [], 0
    empty = ()
    for c in counts:
        neighbors.append(tuple(nodes[i:i + c]) if c else empty)
        i += c
    return OnlineInstance(n, T, neighbors, RefillSchedule.bernoulli(beta, seed), b0, cap)


# --------------------------------------------------------------------------
# Kalyanasundaram-Pruhs style block


@dataclass(frozen=True)
class KpParams:
    b0: int

    @property
    def k(self) -> int:
        return (self.b0 + 1) ** self.b0

    @property
    def v_count(self) -> int:
        return self.k * self.b0

    def alive_sizes(self) -> list:
        """``|A_0|, ..., |A_b0|``."""
        sizes = [self.k]
        for _ in range(self.b0):
            sizes.append(sizes[-1] * self.b0 // (self.b0 + 1))
        return sizes

    def segments(self) -> list:
        """Arrival count of each segment: ``r_1..r_b0`` then the final ``b0^(b0+1)``."""
        return self.alive_sizes()[1:] + [self.b0 ** (self.b0 + 1)]


class _KpBlock:
    """Nested-phase adversary over a fixed list of servers."""

    def __init__(self, b0: int, servers: list):
        self.params = KpParams(b0)
        self.sizes = self.params.alive_sizes()
        self.segs = self.params.segments()
        self.alive = tuple(servers)
        self.seg = 0
        self.left = self.segs[0]
        self.matches = {}

    def next(self, budgets) -> tuple:
        if self.left == 0:
            self.seg += 1
            if self.seg >= len(self.segs):
                raise ContractError("KP block exhausted")
            self.left = self.segs[self.seg]
            drop = len(self.alive) - self.sizes[self.seg]
            ranked = sorted(self.alive, key=lambda u: (-budgets[u], u))
            self.alive = tuple(sorted(ranked[drop:]))
        self.left -= 1
        return self.alive

    def record(self, choice):
        if choice is not None:
            self.matches[choice] = self.matches.get(choice, 0) + 1


class KpAdversary(AdaptiveInstance):
    """Single KP block on ``k = (b0+1)^b0`` servers, ``k*b0`` arrivals, no refills."""

    def __init__(self, b0: int):
        if b0 < 1:
            raise ContractError("b0 >= 1")
        p = KpParams(b0)
        super().__init__(p.k, p.v_count, RefillSchedule.none(), b0, None)
        self.block = _KpBlock(b0, list(range(p.k)))

    def _reveal(self, t, budgets):
        return self.block.next(budgets)

    def _observe(self, t, choice):
        self.block.record(choice)


def kp_adversary(b0: int) -> KpAdversary:
    return KpAdversary(b0)


class Theorem1Adversary(AdaptiveInstance):
    """``j = m // (k*b0)`` disjoint KP blocks, then a tail pinned on one depleted server."""

    def __init__(self, b0: int, m: int, T: int):
        p = KpParams(b0)
        self.j = m // p.v_count
        if b0 < 1 or self.j < 1:
            raise ContractError(f"m={m} < k*b0={p.v_count}: no complete block fits")
        if m > T:
            raise ContractError("need m <= T")
        self.k = p.k
        super().__init__(self.j * p.k, T, RefillSchedule.periodic(m), b0, None)
        self.block_len = p.v_count
        self.blocks = [_KpBlock(b0, list(range(i * p.k, (i + 1) * p.k))) for i in range(self.j)]
        self.u_tilde = None
        self.tail = None

    def _reveal(self, t, budgets):
        i = (t - 1) // self.block_len
        if i < self.j:
            return self.blocks[i].next(budgets)
        if self.tail is None:
            first = self.blocks[0].matches
            depleted = [u for u in range(self.k) if first.get(u, 0) >= self.b0]
            self.u_tilde = depleted[0] if depleted else 0
            self.tail = (self.u_tilde,)
        return self.tail

    def _observe(self, t, choice):
        i = (t - 1) // self.block_len
        if i < self.j:
            self.blocks[i].record(choice)


def gen_theorem1(b0: int, m: int, T: int) -> Theorem1Adversary:
    return Theorem1Adversary(b0, m, T)


# --------------------------------------------------------------------------
# phased elimination


@dataclass
class PhaseSchedule:
    t0: int
    times: np.ndarray
    approx: np.ndarray


def phase_times(b0: int, m: int, t0: int, count: int | None = None) -> PhaseSchedule:
    """Exact phase ends ``t_1..t_count`` and their closed-form approximations."""
    if m < 2 or t0 < 1:
        raise ContractError("need m >= 2 and t0 >= 1")
    count = m - 1 if count is None else count
    if count > m - 1:
        raise ContractError("count <= m - 1")
    times, t = [], t0
    for _ in range(count):
        t = b0 - 1 + t + -(-(b0 + t) // (m - 1))
        times.append(t)
    i = np.arange(1, count + 1)
    approx = (1 + 1 / (m - 1)) ** i * (t0 + m * b0 - m + 1) - m * b0 + m - 1
    return PhaseSchedule(t0, np.asarray(times, dtype=np.int64), approx)


def phase_time_search(b0: int, m: int, t_prev: int) -> int:
    """``inf{t > t_prev : b0 + floor(t/m) = t - t_prev}`` by direct scan."""
    t = t_prev + 1
    while b0 + t // m != t - t_prev:
        t += 1
    return t


def theorem2_size(b0: int, m: int, t0: int) -> int:
    q = t0 // m
    first = -(-t0 // (b0 + q))
    second = -(-(m * q) // (b0 + q - 1)) if b0 + q - 1 > 0 else 0
    return m - 1 + max(first, second)


class Theorem2Adversary(AdaptiveInstance):
    """Phase 0 is complete on ``n`` servers; then ``m-1`` lowest-budget servers are
    kept and the richest one is dropped at the end of each phase.

    ``removal="lowest"`` drops the poorest node instead (ties by lowest index).
    """

    def __init__(self, b0: int, m: int, T: int, t0: int | None = None, seed: int = 0,
                 removal: str = "highest"):
        if m < 2:
            raise ContractError("m >= 2")
        if removal not in ("highest", "lowest"):
            raise ContractError(f"removal must be 'highest' or 'lowest', got {removal!r}")
        self.removal = removal
        t0 = int(T / math.e) if t0 is None else int(t0)
        if t0 < m:
            raise ContractError(f"t0={t0} < m={m}; increase T")
        super().__init__(theorem2_size(b0, m, t0), T, RefillSchedule.periodic(m), b0, None)
        self.m, self.t0, self.seed = m, t0, seed
        self.schedule = phase_times(b0, m, t0)
        self.ends = self.schedule.times.tolist()
        self.full = tuple(range(self.n))
        self.current = self.full
        self.phase = 0

    def _reveal(self, t, budgets):
        if t == self.t0 + 1:
            perm = make_rng(self.seed, STREAM_ADVERSARY).permutation(self.n).tolist()
            perm.sort(key=budgets.__getitem__)
            self.current = tuple(sorted(perm[: self.m - 1]))
            self.phase = 1
        elif self.phase >= 1 and len(self.current) > 1 and t == self.ends[self.phase - 1] + 1:
            sign = -1 if self.removal == "highest" else 1
            drop = min(self.current, key=lambda u: (sign * budgets[u], u))
            self.current = tuple(u for u in self.current if u != drop)
            self.phase += 1
        return self.current


def gen_theorem2(b0: int, m: int, T: int, t0: int | None = None, seed: int = 0,
                 removal: str = "highest") -> Theorem2Adversary:
    return Theorem2Adversary(b0, m, T, t0, seed, removal)
