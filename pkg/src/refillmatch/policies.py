"""Online matching policies.

A policy is any object with a ``name`` and ``decide(neighbors, budgets, rng)``
returning an offline node or ``None`` (pass). ``budgets`` may be any indexable
view; ``rng`` is a ``random.Random`` owned by the run.
"""

from __future__ import annotations

from typing import Sequence

from .core import ContractError


def greedy_decide(neighbors, budgets, rng):
    """Uniform choice among neighbors with budget >= 1."""
    avail = [u for u in neighbors if budgets[u] >= 1]
    if not avail:
        return None
    if len(avail) == 1:
        return avail[0]
    return avail[rng.randrange(len(avail))]


def balance_decide(neighbors, budgets, rng, deterministic=False):
    """Highest-budget neighbor; ties uniform, or lowest index if ``deterministic``."""
    if len(neighbors) == 1:
        u = neighbors[0]
        return u if budgets[u] >= 1 else None
    best = max(map(budgets.__getitem__, neighbors))
    if best < 1:
        return None
    ties = [u for u in neighbors if budgets[u] == best]
    if deterministic or len(ties) == 1:
        return ties[0]
    return ties[rng.randrange(len(ties))]


def random_decide(neighbors, budgets, rng):
    """Pick a neighbor uniformly regardless of budget; pass if it is depleted."""
    u = neighbors[rng.randrange(len(neighbors))]
    return u if budgets[u] >= 1 else None


class Policy:
    name = "policy"

    def start(self):
        pass

    def decide(self, neighbors, budgets, rng):
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}()"


class Greedy(Policy):
    name = "greedy"

    def decide(self, neighbors, budgets, rng):
        return greedy_decide(neighbors, budgets, rng)


class Balance(Policy):
    name = "balance"

    def __init__(self, deterministic: bool = False):
        self.deterministic = deterministic

    def decide(self, neighbors, budgets, rng):
        return balance_decide(neighbors, budgets, rng, self.deterministic)

    def __repr__(self):
        return f"Balance(deterministic={self.deterministic})"


class Lazy(Policy):
    """Never matches. A test policy for the dominance check."""

    name = "lazy"

    def decide(self, neighbors, budgets, rng):
        return None


class RandomUniform(Policy):
    name = "random"

    def decide(self, neighbors, budgets, rng):
        return random_decide(neighbors, budgets, rng)


class FixedScript(Policy):
    """Replays a recorded choice sequence (``-1`` or ``None`` means pass)."""

    name = "fixed-script"
    every_step = True  # consulted on empty arrivals too, to stay aligned with t

    def __init__(self, choices: Sequence):
        self.choices = [None if c is None or int(c) < 0 else int(c) for c in choices]
        self._t = 0

    def start(self):
        self._t = 0

    def decide(self, neighbors, budgets, rng):
        if self._t >= len(self.choices):
            raise ContractError("script exhausted")
        c = self.choices[self._t]
        self._t += 1
        return c


POLICIES = {"greedy": Greedy, "balance": Balance, "lazy": Lazy, "random": RandomUniform}


def get_policy(name: str, **kwargs) -> Policy:
    """Resolve a policy by name. ``fixed-script`` needs ``choices=...``."""
    if name == "fixed-script":
        return FixedScript(kwargs["choices"])
    if name == "balance-det":
        return Balance(deterministic=True)
    try:
        return POLICIES[name](**kwargs)
    except KeyError:
        raise ContractError(f"unknown policy {name!r}; choose from "
                            f"{sorted(POLICIES) + ['balance-det', 'fixed-script']}") from None
