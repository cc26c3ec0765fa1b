"""Instances, traces, the budget update law and the online matching engine.

Offline nodes are indexed ``0..n-1``. Arrivals are indexed ``1..T`` so that a
periodic refill lands on steps with ``t % m == 0``; ``instance.neighbors[t - 1]``
holds the neighbor set of arrival ``t``.

Within a step the order is fixed: the policy picks among nodes with
``b[u] >= 1`` (the budget left at the end of the previous step), the match is
applied, then the refills of step ``t`` are added and the cap is applied.
"""

from __future__ import annotations

import csv
import json
import random
from dataclasses import dataclass, field
from operator import itemgetter
from typing import Iterable, Sequence

import numpy as np

# RNG stream ids; refills and tie-breaks never share a stream.
STREAM_EDGES = 1
STREAM_REFILLS = 2
STREAM_POLICY = 3
STREAM_ADVERSARY = 4


class ContractError(ValueError):
    """A documented precondition was violated."""


class PolicyFault(RuntimeError):
    """A policy returned a node that cannot be matched at this step."""

    def __init__(self, t, choice, neighbors, budget):
        self.t = t
        self.choice = choice
        super().__init__(
            f"step {t}: policy chose {choice!r} (budget {budget}) "
            f"from neighbors {tuple(neighbors)[:12]}"
        )


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """numpy Generator for stream ``key`` under master ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))


def make_py_rng(seed: int, *key: int) -> random.Random:
    """Python ``random.Random`` keyed the same way; cheap per-call draws for policies."""
    state = np.random.SeedSequence(int(seed), spawn_key=key).generate_state(4, np.uint32)
    return random.Random(int.from_bytes(state.tobytes(), "little"))


def derive_seed(seed: int, *key: int) -> int:
    """A 63-bit child seed of ``seed``; used for replicate seeds."""
    return int(np.random.SeedSequence(int(seed), spawn_key=key).generate_state(1, np.uint64)[0] >> 1)


def _geometric_positions(rng: np.random.Generator, p: float, size: int) -> np.ndarray:
    """Sorted indices in ``[0, size)`` where independent Bernoulli(p) trials succeed."""
    if p <= 0.0 or size == 0:
        return np.empty(0, dtype=np.int64)
    if p >= 1.0:
        return np.arange(size, dtype=np.int64)
    chunks = []
    last = -1
    mean = size * p
    while True:
        draw = int(mean + 6.0 * np.sqrt(mean) + 16)
        pos = last + np.cumsum(rng.geometric(p, size=draw))
        keep = pos[pos < size]
        chunks.append(keep)
        if keep.size < pos.size:
            break
        last = int(pos[-1])
    return np.concatenate(chunks)


# --------------------------------------------------------------------------
# refill schedules


@dataclass(eq=False)
class RefillSchedule:
    """Which node gets how many refill units at which step.

    kinds: ``periodic`` (every node gets one unit when ``t % m == 0``),
    ``bernoulli`` (each (u, t) independently with probability ``beta / n``),
    ``explicit`` (an ``(n, T)`` integer matrix) and ``none``.
    """

    kind: str
    m: int | None = None
    beta: float | None = None
    seed: int | None = None
    matrix: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == "periodic":
            if self.m is None or int(self.m) < 1:
                raise ContractError("periodic refills need m >= 1")
            self.m = int(self.m)
        elif self.kind == "bernoulli":
            if self.beta is None or self.beta < 0:
                raise ContractError("bernoulli refills need beta >= 0")
            self.seed = int(self.seed or 0)
        elif self.kind == "explicit":
            mat = np.asarray(self.matrix, dtype=np.int64)
            if mat.ndim != 2 or (mat < 0).any():
                raise ContractError("explicit refills need a non-negative (n, T) matrix")
            self.matrix = mat
        elif self.kind != "none":
            raise ContractError(f"unknown refill kind {self.kind!r}")
        self._cache = None

    @classmethod
    def periodic(cls, m):
        return cls("periodic", m=m)

    @classmethod
    def bernoulli(cls, beta, seed=0):
        return cls("bernoulli", beta=float(beta), seed=seed)

    @classmethod
    def explicit(cls, matrix):
        return cls("explicit", matrix=matrix)

    @classmethod
    def none(cls):
        return cls("none")

    def validate(self, n: int, T: int):
        if self.kind == "bernoulli" and self.beta > n:
            raise ContractError(f"beta/n = {self.beta}/{n} exceeds 1")
        if self.kind == "explicit" and self.matrix.shape != (n, T):
            raise ContractError(f"refill matrix shape {self.matrix.shape} != {(n, T)}")

    def events(self, n: int, T: int):
        """Refill events as ``(t, u, amount)`` int64 arrays sorted by ``(t, u)``."""
        if self._cache is not None and self._cache[0] == (n, T):
            return self._cache[1]
        if self.kind == "none":
            ev = (np.empty(0, np.int64),) * 3
        elif self.kind == "periodic":
            ts = np.arange(self.m, T + 1, self.m, dtype=np.int64)
            ev = (np.repeat(ts, n), np.tile(np.arange(n, dtype=np.int64), ts.size),
                  np.ones(ts.size * n, dtype=np.int64))
        elif self.kind == "bernoulli":
            self.validate(n, T)
            pos = _geometric_positions(make_rng(self.seed, STREAM_REFILLS), self.beta / n, n * T)
            ev = (pos // n + 1, pos % n, np.ones(pos.size, dtype=np.int64))
        else:
            self.validate(n, T)
            u, t = np.nonzero(self.matrix)
            order = np.lexsort((u, t))
            u, t = u[order], t[order]
            ev = (t.astype(np.int64) + 1, u.astype(np.int64), self.matrix[u, t])
        self._cache = ((n, T), ev)
        return ev

    def to_matrix(self, n: int, T: int) -> np.ndarray:
        mat = np.zeros((n, T), dtype=np.int64)
        t, u, a = self.events(n, T)
        np.add.at(mat, (u, t - 1), a)
        return mat

    def total(self, n: int, T: int) -> int:
        if self.kind == "periodic":
            return n * (T // self.m)
        return int(self.events(n, T)[2].sum())

    def to_dict(self) -> dict:
        if self.kind == "periodic":
            return {"kind": "periodic", "m": self.m}
        if self.kind == "bernoulli":
            return {"kind": "bernoulli", "beta": self.beta, "seed": self.seed}
        if self.kind == "explicit":
            return {"kind": "explicit", "matrix": self.matrix.tolist()}
        return {"kind": "none"}

    @classmethod
    def from_dict(cls, d: dict) -> "RefillSchedule":
        d = dict(d)
        kind = d.pop("kind")
        allowed = {"periodic": {"m"}, "bernoulli": {"beta", "seed"},
                   "explicit": {"matrix"}, "none": set()}
        if kind not in allowed:
            raise ContractError(f"unknown refill kind {kind!r}")
        extra = set(d) - allowed[kind]
        if extra:
            raise ContractError(f"unknown refill keys {sorted(extra)}")
        return cls(kind, **d)


# --------------------------------------------------------------------------
# instances


def _check_cap(b0, cap):
    if int(b0) < 0:
        raise ContractError("b0 must be non-negative")
    if cap is not None:
        if int(cap) < 1:
            raise ContractError("cap must be a positive integer or None (unbounded)")
        if b0 > cap:
            raise ContractError(f"b0={b0} exceeds cap={cap}")


@dataclass(eq=False)
class OnlineInstance:
    """A fully materialized instance. ``cap=None`` means unbounded budgets."""

    n: int
    T: int
    neighbors: list
    refills: RefillSchedule
    b0: int
    cap: int | None = None

    def __post_init__(self):
        self.n, self.T, self.b0 = int(self.n), int(self.T), int(self.b0)
        _check_cap(self.b0, self.cap)
        if len(self.neighbors) != self.T:
            raise ContractError(f"{len(self.neighbors)} neighbor sets for T={self.T}")
        self.refills.validate(self.n, self.T)
        seen = set()
        for nb in self.neighbors:
            if id(nb) in seen:
                continue
            seen.add(id(nb))
            if list(nb) != sorted(set(nb)):
                raise ContractError(f"neighbor set {nb} is not sorted and duplicate-free")
            if nb and (nb[0] < 0 or nb[-1] >= self.n):
                raise ContractError(f"neighbor set {nb} out of range 0..{self.n - 1}")

    def to_dict(self) -> dict:
        return {"n": self.n, "T": self.T, "b0": self.b0, "cap": self.cap,
                "refills": self.refills.to_dict(),
                "neighbors": [list(nb) for nb in self.neighbors]}

    @classmethod
    def from_dict(cls, d: dict) -> "OnlineInstance":
        extra = set(d) - {"n", "T", "b0", "cap", "refills", "neighbors"}
        if extra:
            raise ContractError(f"unknown instance keys {sorted(extra)}")
        return cls(d["n"], d["T"], [tuple(nb) for nb in d["neighbors"]],
                   RefillSchedule.from_dict(d["refills"]), d["b0"], d.get("cap"))

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), separators=(",", ":"))
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_json(cls, text_or_path) -> "OnlineInstance":
        text = str(text_or_path)
        if not text.lstrip().startswith("{"):
            with open(text_or_path) as fh:
                text = fh.read()
        return cls.from_dict(json.loads(text))


class AdaptiveInstance:
    """An instance whose arrivals are revealed after seeing earlier choices.

    Subclasses implement ``_reveal(t, budgets)``; ``budgets`` is the budget
    vector at the end of step ``t - 1``. The base class enforces the
    reveal/observe order and records the transcript so the run can be
    frozen into an :class:`OnlineInstance`.
    """

    def __init__(self, n, T, refills, b0, cap=None):
        _check_cap(b0, cap)
        self.n, self.T, self.b0, self.cap = int(n), int(T), int(b0), cap
        self.refills = refills
        self.transcript = []
        self._pending = None

    def reveal(self, t: int, budgets: Sequence[int]) -> tuple:
        if t != len(self.transcript) + 1 or self._pending is not None:
            raise ContractError(f"reveal({t}) out of order")
        nb = self._reveal(t, budgets)
        self.transcript.append(nb)
        self._pending = t
        return nb

    def observe(self, t: int, choice) -> None:
        if self._pending != t:
            raise ContractError(f"observe({t}) without a matching reveal")
        self._pending = None
        self._observe(t, choice)

    def _reveal(self, t, budgets):
        raise NotImplementedError

    def _observe(self, t, choice):
        pass

    def freeze(self) -> OnlineInstance:
        if len(self.transcript) != self.T:
            raise ContractError("freeze() needs a complete run")
        return OnlineInstance(self.n, self.T, list(self.transcript), self.refills, self.b0, self.cap)


# --------------------------------------------------------------------------
# budgets


def step_budget(b_prev: int, matched: bool, refill: int, cap: int | None) -> int:
    """One step of ``b = min(cap, b_prev - matched + refill)``."""
    if matched and b_prev < 1:
        raise ContractError("cannot match a node with zero budget")
    if b_prev < 0 or refill < 0:
        raise ContractError("budgets and refills are non-negative")
    b = b_prev - int(bool(matched)) + refill
    return b if cap is None else min(cap, b)


@dataclass
class BudgetState:
    budgets: np.ndarray
    cap: int | None = None

    @property
    def histogram(self) -> np.ndarray:
        return budget_histogram(self)


def budget_histogram(state: BudgetState) -> np.ndarray:
    """Counts ``Y_0..Y_K`` of nodes at each budget level (``K`` = cap, or the max level)."""
    b = np.asarray(state.budgets, dtype=np.int64)
    size = (state.cap + 1) if state.cap is not None else (int(b.max()) + 1 if b.size else 1)
    return np.bincount(b, minlength=size)


# --------------------------------------------------------------------------
# traces


@dataclass(eq=False)
class MatchTrace:
    """Record of one run. ``choices[t-1]`` is the node matched to arrival t, or -1."""

    choices: np.ndarray
    size_over_time: np.ndarray
    final_budgets: np.ndarray
    rng_seed: int
    n: int
    cap: int | None = None
    sample_times: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    yk: np.ndarray = field(default_factory=lambda: np.empty((0, 0), np.int64))
    source: str = "online"

    @property
    def size(self) -> int:
        return int(self.size_over_time[-1]) if self.size_over_time.size else 0

    @property
    def T(self) -> int:
        return int(self.choices.size)

    def same_as(self, other: "MatchTrace") -> bool:
        return (np.array_equal(self.choices, other.choices)
                and np.array_equal(self.size_over_time, other.size_over_time)
                and np.array_equal(self.final_budgets, other.final_budgets)
                and np.array_equal(self.sample_times, other.sample_times)
                and np.array_equal(self.yk, other.yk))

    def to_dict(self) -> dict:
        return {"n": self.n, "cap": self.cap, "rng_seed": self.rng_seed, "source": self.source,
                "choices": self.choices.tolist(), "size_over_time": self.size_over_time.tolist(),
                "final_budgets": self.final_budgets.tolist(),
                "sample_times": self.sample_times.tolist(), "yk": self.yk.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "MatchTrace":
        yk = np.asarray(d["yk"], dtype=np.int64)
        if yk.size == 0:
            yk = yk.reshape(0, 0)
        return cls(np.asarray(d["choices"], np.int64), np.asarray(d["size_over_time"], np.int64),
                   np.asarray(d["final_budgets"], np.int64), d["rng_seed"], d["n"], d["cap"],
                   np.asarray(d["sample_times"], np.int64), yk, d.get("source", "online"))

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), separators=(",", ":"))
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def to_csv(self, path) -> None:
        """Columns ``t, choice, size, y0..yK, source``; y columns are blank between samples."""
        K = self.yk.shape[1] - 1 if self.yk.size else -1
        row_of = {int(t): i for i, t in enumerate(self.sample_times)}
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "choice", "size"] + [f"y{k}" for k in range(K + 1)] + ["source"])
            for t in range(1, self.T + 1):
                c = int(self.choices[t - 1])
                ys = self.yk[row_of[t]].tolist() if t in row_of else [""] * (K + 1)
                w.writerow([t, "" if c < 0 else c, int(self.size_over_time[t - 1])] + ys + [self.source])


# --------------------------------------------------------------------------
# engine


def run_online(instance, policy, seed: int = 0, stride: int | None = None) -> MatchTrace:
    """Run ``policy`` on a fixed or adaptive instance.

    ``stride`` controls how often the histogram ``Y_k(t)`` is sampled;
    ``None`` uses ``max(1, T // 2000)`` and ``0`` disables sampling.
    """
    adaptive = isinstance(instance, AdaptiveInstance)
    n, T, cap, b0 = instance.n, instance.T, instance.cap, instance.b0
    refills = instance.refills
    if stride is None:
        stride = max(1, T // 2000)

    budgets = [b0] * n
    hist = None
    if cap is not None:
        hist = [0] * (cap + 1)
        hist[b0] = n
    rng = make_py_rng(seed, STREAM_POLICY)
    if hasattr(policy, "start"):
        policy.start()
    decide = policy.decide
    every_step = getattr(policy, "every_step", False)

    period = refills.m if refills.kind == "periodic" else 0
    if refills.kind in ("bernoulli", "explicit"):
        ev_t, ev_u, ev_a = (x.tolist() for x in refills.events(n, T))
    else:
        ev_t, ev_u, ev_a = [], [], []
    n_ev = len(ev_t)
    ptr = 0

    choices = np.full(T, -1, dtype=np.int64)
    sizes = np.zeros(T, dtype=np.int64)
    sample_t, samples = [], []
    size = 0
    neighbors = None if adaptive else instance.neighbors

    for t in range(1, T + 1):
        nb = instance.reveal(t, budgets) if adaptive else neighbors[t - 1]
        c = decide(nb, budgets, rng) if nb or every_step else None
        if c is not None:
            bc = budgets[c] if 0 <= c < n else None
            if bc is None or bc < 1 or c not in nb:
                raise PolicyFault(t, c, nb, bc)
            budgets[c] = bc - 1
            if hist is not None:
                hist[bc] -= 1
                hist[bc - 1] += 1
            choices[t - 1] = c
            size += 1
        if adaptive:
            instance.observe(t, c)

        if period and t % period == 0:
            if cap is None:
                budgets = [b + 1 for b in budgets]
            else:
                budgets = [b + 1 if b < cap else b for b in budgets]
                hist = [0] + hist[:-2] + [hist[-2] + hist[-1]]
        while ptr < n_ev and ev_t[ptr] == t:
            u = ev_u[ptr]
            old = budgets[u]
            new = old + ev_a[ptr]
            if cap is not None:
                new = min(cap, new)
                hist[old] -= 1
                hist[new] += 1
            budgets[u] = new
            ptr += 1

        sizes[t - 1] = size
        if stride and (t % stride == 0 or t == T):
            sample_t.append(t)
            samples.append(list(hist) if hist is not None else np.bincount(budgets))

    if samples and hist is None:
        width = max(len(s) for s in samples)
        samples = [np.pad(np.asarray(s), (0, width - len(s))) for s in samples]
    yk = np.asarray(samples, dtype=np.int64) if samples else np.empty((0, 0), np.int64)
    return MatchTrace(choices, sizes, np.asarray(budgets, dtype=np.int64), int(seed), n, cap,
                      np.asarray(sample_t, dtype=np.int64), yk)


def replay_budgets(instance: OnlineInstance, choices: Iterable[int]) -> np.ndarray:
    """Recompute final budgets from choices with :func:`step_budget`, checking feasibility.

    Raises ``ContractError`` if any choice is off-neighborhood or uses a depleted node.
    """
    n, T = instance.n, instance.T
    mat_t, mat_u, mat_a = instance.refills.events(n, T)
    per_t = {}
    for t, u, a in zip(mat_t.tolist(), mat_u.tolist(), mat_a.tolist()):
        per_t.setdefault(t, {})[u] = per_t.get(t, {}).get(u, 0) + a
    b = [instance.b0] * n
    for t, c in enumerate(choices, start=1):
        c = int(c)
        if c >= 0 and c not in instance.neighbors[t - 1]:
            raise ContractError(f"step {t}: {c} not adjacent")
        ref = per_t.get(t, {})
        for u in range(n):
            b[u] = step_budget(b[u], u == c, ref.get(u, 0), instance.cap)
    return np.asarray(b, dtype=np.int64)


def trace_from_choices(instance: OnlineInstance, choices, source="offline") -> MatchTrace:
    """Wrap a feasible assignment (e.g. an OPT witness) as a trace."""
    choices = np.asarray(choices, dtype=np.int64)
    final = replay_budgets(instance, choices)
    sizes = np.cumsum(choices >= 0)
    return MatchTrace(choices, sizes, final, 0, instance.n, instance.cap, source=source)


def neighbors_getter(nb):
    """``itemgetter`` over a neighbor tuple that always returns a tuple."""
    if len(nb) == 1:
        u = nb[0]
        return lambda b: (b[u],)
    return itemgetter(*nb)
