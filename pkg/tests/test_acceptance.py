"""Acceptance gate for the refill-matching toolkit.

Each criterion prints exactly one ``[PASS]`` or ``[FAIL]`` line with the measured
quantities and the wall time against its limit; the lines are repeated in the
pytest terminal summary. Tolerances are the published ones and are not relaxed.

Run alone with ``pytest tests/test_acceptance.py -v`` or ``python tests/test_acceptance.py``.
"""

import sys
import time
from functools import lru_cache

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, random_instance
from refillmatch.analysis import (cr_bound_th2, cr_lower_bound, integrate, solve_alpha,
                                  stationary_z0, stationary_z0_K1, stationary_z0_Kinf,
                                  z_total_closed_form)
from refillmatch.core import make_rng, replay_budgets, run_online
from refillmatch.generators import (gen_theorem1, gen_theorem2, kp_adversary, phase_time_search,
                                    phase_times)
from refillmatch.harness import ExperimentSpec, dominance_check, run_experiment
from refillmatch.offline_opt import brute_force_opt, opt_maxflow
from refillmatch.policies import Balance, get_policy


def record(cid, title, ok, detail, elapsed, limit):
    ok = bool(ok) and elapsed < limit
    line = f"[{'PASS' if ok else 'FAIL'}] {cid:<3} {title}: {detail}  ({elapsed:.1f}s of {limit:g}s)"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def balance_ratio(adv):
    tr = run_online(adv, Balance(), seed=0, stride=0)
    opt = opt_maxflow(adv.freeze())[0]
    return tr.size, opt


# ------------------------------------------------------------------ 1


def test_c1_constants():
    t = time.perf_counter()
    alpha, bound = solve_alpha(), cr_bound_th2()
    el = time.perf_counter() - t
    ok = abs(alpha - 0.603) <= 1e-3 and abs(bound - 0.73325) <= 5e-4
    record("1", "constants", ok, f"alpha={alpha:.7f} th2_bound={bound:.7f}", el, 1)


# ------------------------------------------------------------------ 2


def test_c2_kp_exactness():
    t = time.perf_counter()
    rows, ok = [], True
    for b0 in (1, 2, 3):
        alg, opt = balance_ratio(kp_adversary(b0))
        want_alg = b0 * (b0 + 1) ** b0 - b0 ** (b0 + 1)
        want_opt = b0 * (b0 + 1) ** b0
        ok &= alg == want_alg and opt == want_opt
        rows.append(f"b0={b0}: {alg}/{opt}")
    record("2", "KP exactness", ok, ", ".join(rows), time.perf_counter() - t, 10)


# ------------------------------------------------------------------ 3


def test_c3_composite_trend():
    t = time.perf_counter()
    rows, ok = [], True
    for b0, target in ((1, 0.5), (2, 5 / 9)):
        alg, opt = balance_ratio(gen_theorem1(b0, 10**4, 10**6))
        cr = alg / opt
        ok &= abs(cr - target) <= 0.01
        rows.append(f"b0={b0}: CR={cr:.5f} (target {target:.5f})")
    record("3", "composite adversary trend", ok, "; ".join(rows), time.perf_counter() - t, 120)


# ------------------------------------------------------------------ 4


@lru_cache(maxsize=None)
def phased_cr(T):
    t = time.perf_counter()
    alg, opt = balance_ratio(gen_theorem2(1, 100, T))
    return alg / opt, time.perf_counter() - t


def test_c4a_phased_range():
    cr, el = phased_cr(10**6)
    hi = cr_bound_th2() + 0.01
    record("4a", "phased adversary range", 0.68 <= cr <= hi,
           f"CR(T=1e6)={cr:.5f} in [0.68, {hi:.5f}]", el, 300)


def test_c4b_phased_decreasing():
    cr5, el5 = phased_cr(10**5)
    cr6, el6 = phased_cr(10**6)
    record("4b", "phased adversary decreasing in T", cr6 < cr5,
           f"CR(1e5)={cr5:.5f} -> CR(1e6)={cr6:.5f}, bound {cr_bound_th2():.5f}", el5 + el6, 300)


# ------------------------------------------------------------------ 5


def test_c5_dominance():
    t = time.perf_counter()
    m = 20
    rep = dominance_check(1, m, 10**5, ["greedy", "lazy", "random"], seeds=20, jobs=1)
    detail = f"balance={rep.balance_mean:.1f} +m^2={rep.margin}; " + ", ".join(
        f"{p}={rep.mean(p):.1f}" for p in rep.sizes)
    record("5", "dominance", rep.passed, detail, time.perf_counter() - t, 60)


# ------------------------------------------------------------------ 6

ER = dict(a=2.0, beta=0.5, b0=1, cap=3)


@lru_cache(maxsize=None)
def er_report(n, reps):
    spec = ExperimentSpec("erdos_renyi", dict(ER, n=n, T=5 * n), policy="greedy",
                          replicates=reps, seed=0, opt="none", trajectory=True)
    t = time.perf_counter()
    return run_experiment(spec, jobs=1), time.perf_counter() - t


def test_c6a_fluid_mean():
    rep, el = er_report(5000, 20)
    h = integrate(None, ER["a"], ER["beta"], ER["cap"], 5.0, b0=ER["b0"]).h[-1]
    mean = float(np.mean(rep.alg)) / 5000
    rel = abs(mean / h - 1)
    record("6a", "fluid limit mean", rel < 0.01,
           f"mean ALG/n={mean:.5f} h(5)={h:.5f} rel={rel:.2e}", el, 300)


def test_c6b_wormald():
    rep, el = er_report(5000, 20)
    worst = max(rep.size_dev) * 5000
    record("6b", "Wormald bound", worst <= rep.wormald,
           f"max_t |ALG - n h| = {worst:.1f} <= {rep.wormald:.1f}", el, 300)


def test_c6c_deviation_shrinks():
    t = time.perf_counter()
    med = []
    for n in (1000, 4000, 16000):
        rep, _ = er_report(n, 10)
        med.append(np.median(np.asarray(rep.per_k_dev), axis=0))
    med = np.asarray(med)
    ok = bool((np.diff(med, axis=0) < 0).all())
    detail = "; ".join(f"k={k}: " + " > ".join(f"{v:.4f}" for v in med[:, k]) for k in range(med.shape[1]))
    record("6c", "per-k deviation shrinks with n", ok, detail, time.perf_counter() - t, 300)


# ------------------------------------------------------------------ 7


def test_c7_stationary():
    t = time.perf_counter()
    grid = [(a, b) for a in (0.5, 2.0, 5.0) for b in (0.2, 0.5, 0.9)]
    k1 = max(abs(stationary_z0(a, b, 1).z0_star - stationary_z0_K1(a, b)) for a, b in grid)
    kinf = max(abs(stationary_z0(a, b, 200).z0_star - stationary_z0_Kinf(a, b)) for a, b in grid)
    conv = 0.0
    for a, b in grid:
        for K in (1, 3):
            z = integrate(None, a, b, K, 50.0, dt=0.01).z[-1]
            conv = max(conv, float(np.abs(z - stationary_z0(a, b, K).profile).max()))
    ok = k1 <= 1e-10 and kinf <= 1e-4 and conv <= 1e-3
    record("7", "stationary cross-oracles", ok,
           f"K=1 gap {k1:.1e}, K=200 gap {kinf:.1e}, ODE gap at tau=50 {conv:.1e}",
           time.perf_counter() - t, 10)


# ------------------------------------------------------------------ 8


def test_c8a_stochastic_bound_consistency():
    t = time.perf_counter()
    rows, ok = [], True
    for K in (1, 3):
        spec = ExperimentSpec("erdos_renyi", dict(n=500, T=2000, a=2.0, beta=0.5, b0=1, cap=K),
                              policy="greedy", replicates=20, seed=0, opt="maxflow")
        rep = run_experiment(spec, jobs=1)
        lb = cr_lower_bound(2000, K, 500, 1, 0.5, 2.0)
        ok &= rep.ratio_of_means >= lb - 0.05
        rows.append(f"K={K}: CR={rep.ratio_of_means:.4f} >= {lb:.4f}-0.05")
    record("8a", "empirical CR vs lower bound", ok, "; ".join(rows), time.perf_counter() - t, 300)


def test_c8b_bound_tends_to_one():
    t = time.perf_counter()
    T = 10**6
    lb = cr_lower_bound(T, 50, T / 10, 1, 0.5, 2.0)
    record("8b", "lower bound near 1 (K=50, T=1e6, n=T/10)", abs(lb - 1) <= 0.02,
           f"bound={lb:.5f}", time.perf_counter() - t, 300)


# ------------------------------------------------------------------ 9


def test_c9_oracles():
    t = time.perf_counter()
    rng = make_rng(9, 0)
    bad_opt = 0
    for _ in range(200):
        inst = random_instance(rng, n_max=5, T_max=12)
        bad_opt += opt_maxflow(inst)[0] != brute_force_opt(inst)
    bad_z = 0
    for Z0 in range(7):
        for k in range(6):
            for m in range(1, 7):
                for j in range(m):
                    Z = Z0
                    for s in range(1, 70):
                        Z = Z - (Z >= 1) + (k if s % m == j else 0)
                        bad_z += z_total_closed_form(Z0, k, m, j, s) != Z
    bad_phase = 0
    for b0 in (1, 2, 3):
        for m in range(2, 51):
            for t0 in range(1, 201):
                prev = t0
                for ti in phase_times(b0, m, t0).times.tolist():
                    bad_phase += ti != phase_time_search(b0, m, prev)
                    prev = ti
    record("9", "oracle equivalence", bad_opt == bad_z == bad_phase == 0,
           f"maxflow/brute mismatches {bad_opt}/200, Z mismatches {bad_z}, phase mismatches {bad_phase}",
           time.perf_counter() - t, 60)


# ------------------------------------------------------------------ 10


def test_c10_engine_invariants():
    t = time.perf_counter()
    rng = make_rng(10, 0)
    names = ["greedy", "balance", "random", "lazy", "balance-det"]
    fails = []
    for i in range(1000):
        inst = random_instance(rng, n_max=8, T_max=40)
        pol = names[i % len(names)]
        tr = run_online(inst, get_policy(pol), seed=i, stride=1)
        ok = np.array_equal(replay_budgets(inst, tr.choices), tr.final_budgets)
        ok &= all(c < 0 or c in nb for c, nb in zip(tr.choices.tolist(), inst.neighbors))
        ok &= set(np.diff(np.concatenate([[0], tr.size_over_time])).tolist()) <= {0, 1}
        if inst.cap is None:
            ok &= int(tr.final_budgets.sum()) == (inst.n * inst.b0 + inst.refills.total(inst.n, inst.T)
                                                  - tr.size)
        ok &= bool((tr.yk.sum(axis=1) == inst.n).all())
        ok &= run_online(inst, get_policy(pol), seed=i, stride=1).same_as(tr)
        if not ok:
            fails.append(i)
    record("10", "engine invariants", not fails, f"{1000 - len(fails)}/1000 fuzzed instances clean",
           time.perf_counter() - t, 60)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
