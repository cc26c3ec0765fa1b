"""Seeded experiment orchestration, ratio estimation and report emission."""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .analysis.fluid import integrate, wormald_bound
from .core import AdaptiveInstance, ContractError, MatchTrace, derive_seed, run_online
from .generators import gen_erdos_renyi, gen_theorem1, gen_theorem2, kp_adversary, phase_times
from .offline_opt import opt_maxflow, opt_upper_bound_sto
from .policies import get_policy

GENERATORS = {
    "erdos_renyi": {"n", "T", "a", "beta", "b0", "cap"},
    "kp": {"b0"},
    "theorem1": {"b0", "m", "T"},
    "theorem2": {"b0", "m", "T", "t0", "removal"},
}
OPT_MODES = ("maxflow", "closed-form", "bound", "none")


class ReplicateError(RuntimeError):
    def __init__(self, index, seed, cause):
        self.index, self.seed = index, seed
        super().__init__(f"replicate {index} (seed {seed}) failed: {cause!r}")


def build_instance(generator: str, params: dict, seed: int):
    if generator not in GENERATORS:
        raise ContractError(f"unknown generator {generator!r}; choose from {sorted(GENERATORS)}")
    extra = set(params) - GENERATORS[generator]
    if extra:
        raise ContractError(f"unknown {generator} parameters {sorted(extra)}")
    if generator == "erdos_renyi":
        return gen_erdos_renyi(seed=seed, **params)
    if generator == "kp":
        return kp_adversary(**params)
    if generator == "theorem1":
        return gen_theorem1(**params)
    return gen_theorem2(seed=seed, **params)


def closed_form_opt(generator: str, params: dict, instance) -> int:
    """Hindsight optimum where the construction fixes it.

    KP blocks are matched in full. For the composite instance the tail node also
    uses every refill. For the phased instance this is ``t_{m-1}`` plus one match
    per tail refill, which the max-flow value can exceed by at most ``m``.
    """
    if generator == "kp":
        b0 = params["b0"]
        return b0 * (b0 + 1) ** b0
    if generator == "theorem1":
        m, T = params["m"], params["T"]
        return instance.j * instance.k * params["b0"] + (T - 1) // m
    if generator == "theorem2":
        m, T = params["m"], params["T"]
        t_last = min(int(instance.ends[-1]), T)
        return t_last + (T - t_last) // m
    raise ContractError(f"no closed-form OPT for {generator!r}")


@dataclass
class ExperimentSpec:
    generator: str
    params: dict
    policy: str = "greedy"
    replicates: int = 1
    seed: int = 0
    opt: str = "maxflow"
    stride: int | None = None
    trajectory: bool = False
    ode_dt: float = 1e-3
    wormald_eps: float = 0.1

    def __post_init__(self):
        if self.replicates < 1:
            raise ContractError("replicates >= 1")
        if self.stride is not None and self.stride < 1:
            raise ContractError("stride >= 1")
        if self.opt not in OPT_MODES:
            raise ContractError(f"opt must be one of {OPT_MODES}")
        if self.trajectory and self.generator != "erdos_renyi":
            raise ContractError("trajectory comparison needs the erdos_renyi generator")
        if self.generator not in GENERATORS:
            raise ContractError(f"unknown generator {self.generator!r}")
        get_policy(self.policy)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ContractError(f"unknown experiment keys {sorted(extra)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrajectoryDeviation:
    size_dev: float  # sup_t |ALG(t)/n - h(t/n)|
    per_k: list  # sup_t |Y_k(t)/n - z_k(t/n)|
    n: int
    bound: float | None = None  # Wormald bound on the unscaled deviation
    violates: bool = False


def compare_trajectory(trace, ode, n: int | None = None, bound: float | None = None,
                       eps: float = 0.1) -> TrajectoryDeviation:
    """Sup deviations between a sampled trace and the fluid solution.

    ``trace`` needs ``sample_times``, ``size_over_time`` and ``yk``; the ODE is
    interpolated linearly at ``t / n``. Without an explicit ``bound`` the
    Wormald bound for ``(n, T, ode.a, eps)`` is used for the violation flag.
    """
    n = trace.n if n is None else n
    if bound is None:
        bound = wormald_bound(n, len(trace.size_over_time), ode.a, eps)
    t = np.asarray(trace.sample_times, dtype=float)
    if t.size == 0:
        raise ContractError("trace has no sampled trajectory")
    tau = t / n
    if tau[-1] > ode.tau[-1] + 1e-12 or tau[0] < ode.tau[0] - 1e-12:
        raise ContractError(f"trace spans tau up to {tau[-1]}, ODE only to {ode.tau[-1]}")
    size = np.asarray(trace.size_over_time, dtype=float)[np.asarray(trace.sample_times) - 1]
    size_dev = float(np.max(np.abs(size / n - ode.h_at(tau))))
    yk = np.asarray(trace.yk, dtype=float) / n
    z = ode.z_at(tau)
    width = max(yk.shape[1], z.shape[1])
    yk = np.pad(yk, ((0, 0), (0, width - yk.shape[1])))
    z = np.pad(z, ((0, 0), (0, width - z.shape[1])))
    per_k = np.max(np.abs(yk - z), axis=0).tolist()
    return TrajectoryDeviation(size_dev, per_k, n, bound, bool(size_dev * n > bound))


@dataclass
class ExperimentReport:
    spec: dict
    seeds: list = field(default_factory=list)
    alg: list = field(default_factory=list)
    opt: list = field(default_factory=list)
    cr: list = field(default_factory=list)
    size_dev: list = field(default_factory=list)
    per_k_dev: list = field(default_factory=list)
    wormald: float | None = None
    trajectory: dict | None = None  # replicate 0: t, tau, size/n, h, Y_k/n, z_k
    curve: list = field(default_factory=list)  # (parameter value, ratio of means)

    @property
    def ratio_of_means(self) -> float:
        if not self.opt or sum(self.opt) == 0:
            return float("nan")
        return float(np.mean(self.alg) / np.mean(self.opt))

    def summary(self) -> dict:
        cr = np.asarray(self.cr, dtype=float)
        out = {"replicates": len(self.alg), "alg_mean": float(np.mean(self.alg)) if self.alg else None,
               "opt_mean": float(np.mean(self.opt)) if self.opt else None,
               "cr_ratio_of_means": self.ratio_of_means if self.opt else None}
        if cr.size:
            sd = float(np.std(cr, ddof=1)) if cr.size > 1 else 0.0
            half = 1.96 * sd / math.sqrt(cr.size)
            mean = float(cr.mean())
            out.update(cr_mean=mean, cr_sd=sd, cr_ci95=[mean - half, mean + half])
        return out

    def to_dict(self) -> dict:
        d = asdict(self)
        d["summary"] = self.summary()
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1, default=_jsonable)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        d = {k: v for k, v in d.items() if k != "summary"}
        return cls(**d)


def _jsonable(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(type(x))


def default_jobs() -> int:
    env = os.environ.get("REFILL_MATCH_JOBS")
    if env:
        return max(1, int(env))
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1)


def _ode_for(spec: ExperimentSpec):
    p = spec.params
    K = p.get("cap")
    if K is None:
        raise ContractError("trajectory comparison needs a finite cap K")
    tau_end = p["T"] / p["n"]
    return integrate(None, p["a"], p["beta"], K, tau_end, spec.ode_dt, p.get("b0", 1))


def run_replicate(spec: ExperimentSpec, index: int, ode=None) -> dict:
    seed = derive_seed(spec.seed, index)
    try:
        inst = build_instance(spec.generator, spec.params, seed)
        trace = run_online(inst, get_policy(spec.policy), seed=seed, stride=spec.stride)
        frozen = inst.freeze() if isinstance(inst, AdaptiveInstance) else inst
        if spec.opt == "maxflow":
            opt = opt_maxflow(frozen)[0]
        elif spec.opt == "closed-form":
            opt = closed_form_opt(spec.generator, spec.params, inst)
        elif spec.opt == "bound":
            p = spec.params
            opt = opt_upper_bound_sto(frozen.n, frozen.b0, p.get("beta", 0.0), frozen.T)
        else:
            opt = None
        out = {"index": index, "seed": seed, "alg": trace.size, "opt": opt}
        if spec.trajectory:
            dev = compare_trajectory(trace, ode, frozen.n, eps=spec.wormald_eps)
            out["size_dev"], out["per_k"] = dev.size_dev, dev.per_k
            if index == 0:
                out["trace"] = trace
        return out
    except Exception as exc:
        raise ReplicateError(index, seed, exc) from exc


def _replicate_star(args):
    return run_replicate(*args)


def run_experiment(spec: ExperimentSpec, jobs: int | None = None) -> ExperimentReport:
    """Run ``spec.replicates`` replicates; the result does not depend on ``jobs``."""
    jobs = default_jobs() if jobs is None else max(1, int(jobs))
    ode = _ode_for(spec) if spec.trajectory else None
    tasks = [(spec, i, ode) for i in range(spec.replicates)]
    if jobs == 1 or spec.replicates == 1:
        results = [run_replicate(*t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, spec.replicates)) as pool:
            results = list(pool.map(_replicate_star, tasks))
    results.sort(key=lambda r: r["index"])

    report = ExperimentReport(spec.to_dict())
    for r in results:
        report.seeds.append(r["seed"])
        report.alg.append(int(r["alg"]))
        if r["opt"] is not None:
            report.opt.append(r["opt"])
            report.cr.append(r["alg"] / r["opt"] if r["opt"] else 1.0)
        if spec.trajectory:
            report.size_dev.append(r["size_dev"])
            report.per_k_dev.append(r["per_k"])
    if spec.trajectory:
        p = spec.params
        report.wormald = wormald_bound(p["n"], p["T"], p["a"], spec.wormald_eps)
        report.trajectory = _trajectory_table(results[0]["trace"], ode, p["n"])
    return report


def _trajectory_table(trace: MatchTrace, ode, n: int) -> dict:
    t = trace.sample_times
    tau = t / n
    return {"t": t.tolist(), "tau": tau.tolist(),
            "size_over_n": (trace.size_over_time[t - 1] / n).tolist(),
            "h": ode.h_at(tau).tolist(),
            "y_over_n": (trace.yk / n).T.tolist(),
            "z": ode.z_at(tau).T.tolist()}


def cr_curve(spec: ExperimentSpec, param: str, values, jobs: int | None = None) -> ExperimentReport:
    """Ratio of means as one generator parameter varies; per-value replicates are pooled."""
    report = ExperimentReport(dict(spec.to_dict(), sweep={"param": param, "values": list(values)}))
    for v in values:
        sub = ExperimentSpec.from_dict(dict(spec.to_dict(), params=dict(spec.params, **{param: v})))
        r = run_experiment(sub, jobs)
        report.seeds += r.seeds
        report.alg += r.alg
        report.opt += r.opt
        report.cr += r.cr
        report.curve.append([v, r.ratio_of_means])
    return report


@dataclass
class DominanceReport:
    b0: int
    m: int
    T: int
    margin: int
    balance: list
    sizes: dict  # policy -> per-seed sizes

    @property
    def balance_mean(self) -> float:
        return float(np.mean(self.balance))

    def mean(self, policy: str) -> float:
        return float(np.mean(self.sizes[policy]))

    def holds(self, policy: str) -> bool:
        """Mean size against its own adversary within ``margin`` of Balance's."""
        return self.mean(policy) <= self.balance_mean + self.margin

    @property
    def passed(self) -> bool:
        return all(self.holds(p) for p in self.sizes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(balance_mean=self.balance_mean, passed=self.passed,
                 means={p: self.mean(p) for p in self.sizes})
        return d


def _dominance_run(args):
    b0, m, T, policy, seed = args
    inst = gen_theorem2(b0, m, T, seed=seed)
    return run_online(inst, get_policy(policy), seed=seed, stride=0).size


def dominance_check(b0: int, m: int, T: int, policies, seeds: int = 1, master_seed: int = 0,
                    jobs: int | None = None) -> DominanceReport:
    """Run each policy against its own phased adversary and compare with Balance + m^2."""
    jobs = default_jobs() if jobs is None else max(1, int(jobs))
    seed_list = [derive_seed(master_seed, i) for i in range(seeds)]
    names = ["balance"] + [p for p in policies if p != "balance"]
    tasks = [(b0, m, T, p, s) for p in names for s in seed_list]
    if jobs == 1:
        sizes = [_dominance_run(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            sizes = list(pool.map(_dominance_run, tasks))
    per = {p: sizes[i * seeds:(i + 1) * seeds] for i, p in enumerate(names)}
    return DominanceReport(b0, m, T, m * m, per.pop("balance"), per)


# --------------------------------------------------------------------------
# emission

RATIO_COLUMNS = ["replicate", "seed", "alg_size", "opt_value", "cr"]


def _trajectory_columns(K: int) -> list:
    return (["t", "tau", "size_over_n", "h_tau"] + [f"y{k}_over_n" for k in range(K + 1)]
            + [f"z{k}" for k in range(K + 1)])


def emit(report: ExperimentReport, fmt: str, path) -> list:
    """Write the report as ``csv``, ``json`` or ``svg``; returns the written paths."""
    path = Path(path)
    if fmt == "json":
        path.write_text(report.to_json())
        return [path]
    if fmt == "csv":
        written = [path]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(RATIO_COLUMNS)
            for i, (seed, alg) in enumerate(zip(report.seeds, report.alg)):
                opt = report.opt[i] if i < len(report.opt) else ""
                cr = report.cr[i] if i < len(report.cr) else ""
                w.writerow([i, seed, alg, opt, cr])
        if report.trajectory:
            tp = path.with_name(path.stem + "_trajectory.csv")
            tr = report.trajectory
            K = len(tr["z"]) - 1
            with open(tp, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(_trajectory_columns(K))
                ys = [tr["y_over_n"][k] if k < len(tr["y_over_n"]) else [0.0] * len(tr["t"])
                      for k in range(K + 1)]
                for i in range(len(tr["t"])):
                    w.writerow([tr["t"][i], tr["tau"][i], tr["size_over_n"][i], tr["h"][i]]
                               + [ys[k][i] for k in range(K + 1)] + [tr["z"][k][i] for k in range(K + 1)])
            written.append(tp)
        return written
    if fmt == "svg":
        return _emit_svg(report, path)
    raise ContractError(f"unknown format {fmt!r}")


def _emit_svg(report: ExperimentReport, path: Path) -> list:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "refillmatch"
    meta = {"Date": None}
    written = []

    def save(fig, p):
        fig.savefig(p, format="svg", metadata=meta)
        plt.close(fig)
        written.append(p)

    tr = report.trajectory
    if tr:
        for k in range(len(tr["z"])):
            fig, ax = plt.subplots(figsize=(5, 3.2))
            if k < len(tr["y_over_n"]):
                ax.plot(tr["tau"], tr["y_over_n"][k], lw=1, label=f"Y{k}/n")
            ax.plot(tr["tau"], tr["z"][k], "--", lw=1, label=f"z{k}")
            ax.set_xlabel("tau = t/n")
            ax.legend()
            save(fig, path.with_name(f"{path.stem}_z{k}.svg"))
        fig, ax = plt.subplots(figsize=(5, 3.2))
        ax.plot(tr["tau"], tr["size_over_n"], lw=1, label="ALG(t)/n")
        ax.plot(tr["tau"], tr["h"], "--", lw=1, label="h(tau)")
        ax.set_xlabel("tau = t/n")
        ax.legend()
        save(fig, path.with_name(f"{path.stem}_h.svg"))
    if report.curve:
        xs, ys = zip(*report.curve)
        fig, ax = plt.subplots(figsize=(5, 3.2))
        ax.plot(xs, ys, "o-", lw=1)
        ax.set_xscale("log")
        ax.set_xlabel(report.spec.get("sweep", {}).get("param", "T"))
        ax.set_ylabel("E[ALG] / E[OPT]")
        save(fig, path.with_name(f"{path.stem}_cr.svg"))
    return written


def phase_summary(b0: int, m: int, t0: int) -> dict:
    """Exact and approximate phase ends, for reports on the phased adversary."""
    ps = phase_times(b0, m, t0)
    return {"t0": t0, "times": ps.times.tolist(), "approx": ps.approx.tolist()}
