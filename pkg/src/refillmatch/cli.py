"""Command-line entry point: ``refillmatch <subcommand> ...``.

Exit codes: 0 success, 1 usage or contract error, 2 runtime error, 3 a checked
inequality failed.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (cr_bound_th1, cr_bound_th2, cr_bound_th2_detailed, integrate,
                       solve_alpha, stationary_z0)
from .core import AdaptiveInstance, ContractError, OnlineInstance, run_online
from .harness import (ExperimentSpec, build_instance, cr_curve, dominance_check, emit,
                      run_experiment)
from .offline_opt import brute_force_opt, opt_maxflow
from .policies import get_policy

log = logging.getLogger("refillmatch")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME, EXIT_ASSERT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _param(text: str):
    key, sep, val = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        return key, json.loads(val)
    except json.JSONDecodeError:
        return key, val


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON file of option values; flags override it")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--jobs", type=int, default=None,
                        help="worker processes (default: REFILL_MATCH_JOBS or CPU count)")
    common.add_argument("--format", choices=("text", "json"), default="text")
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = _Parser(prog="refillmatch", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def gen_args(sp):
        sp.add_argument("--generator", choices=("erdos_renyi", "kp", "theorem1", "theorem2"))
        sp.add_argument("--param", "-p", type=_param, action="append", default=[],
                        metavar="KEY=VALUE", help="generator parameter, repeatable")

    sp = sub.add_parser("gen", parents=[common], help="write an instance as JSON")
    gen_args(sp)
    sp.add_argument("--policy", default="balance",
                    help="policy that drives an adaptive generator before freezing")
    sp.add_argument("--out", type=Path)

    sp = sub.add_parser("sim", parents=[common], help="run a policy")
    sp.add_argument("--instance", type=Path, help="instance JSON (else use --generator)")
    gen_args(sp)
    sp.add_argument("--policy", default="greedy")
    sp.add_argument("--stride", type=int, default=None)
    sp.add_argument("--out", type=Path, help="trace file (.json or .csv)")

    sp = sub.add_parser("opt", parents=[common], help="offline optimum of an instance")
    sp.add_argument("--instance", type=Path)
    sp.add_argument("--method", choices=("push-relabel", "dinic", "brute-force"),
                    default="push-relabel")

    sp = sub.add_parser("ode", parents=[common], help="integrate the fluid ODE")
    sp.add_argument("--a", type=float, default=2.0)
    sp.add_argument("--beta", type=float, default=0.5)
    sp.add_argument("--K", type=int, default=1)
    sp.add_argument("--b0", type=int, default=1)
    sp.add_argument("--tau-end", type=float, default=1.0)
    sp.add_argument("--dt", type=float, default=1e-3)
    sp.add_argument("--out", type=Path)

    sp = sub.add_parser("stationary", parents=[common], help="stationary budget profile")
    sp.add_argument("--a", type=float, default=2.0)
    sp.add_argument("--beta", type=float, default=0.5)
    sp.add_argument("--K", type=int, default=1)

    sp = sub.add_parser("constants", parents=[common], help="alpha and the ratio bounds")
    sp.add_argument("--b0", type=int, default=1)
    sp.add_argument("--m", type=int, default=None, help="also print the finite-m bound")
    sp.add_argument("--t0", type=float, default=None)

    sp = sub.add_parser("experiment", parents=[common], help="replicated experiment from config")
    sp.add_argument("--out", type=Path, default=Path("."), help="output directory")
    sp.add_argument("--name", default="report")
    sp.add_argument("--emit", nargs="+", choices=("csv", "json", "svg"), default=["json", "csv"])

    sp = sub.add_parser("dominance", parents=[common], help="ALG <= Balance + m^2 check")
    sp.add_argument("--b0", type=int, default=1)
    sp.add_argument("--m", type=int, default=20)
    sp.add_argument("--T", type=int, default=100_000)
    sp.add_argument("--policies", nargs="+", default=["greedy", "lazy", "random"])
    sp.add_argument("--seeds", type=int, default=1)
    return p


def _explicit_dests(parser: argparse.ArgumentParser, argv) -> set:
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    sp = sub.choices[argv[0]] if argv and argv[0] in sub.choices else None
    if sp is None:
        return set()
    given = set()
    for act in sp._actions:
        for opt in act.option_strings:
            if any(tok == opt or tok.startswith(opt + "=") for tok in argv[1:]):
                given.add(act.dest)
    return given


def resolve(argv):
    """Parse ``argv`` and merge ``--config``; returns (namespace, experiment config or None)."""
    parser = build_parser()
    args = parser.parse_args(argv)
    given = _explicit_dests(parser, argv)
    exp_cfg = None
    if args.config is not None:
        cfg = json.loads(Path(args.config).read_text())
        if not isinstance(cfg, dict):
            raise ContractError("config must be a JSON object")
        if args.command == "experiment":
            # experiment configs describe the ExperimentSpec, plus an optional sweep
            exp_cfg = dict(cfg)
            if "seed" in given or "seed" not in exp_cfg:
                exp_cfg["seed"] = args.seed
        else:
            known = set(vars(args)) - {"command", "config"}
            extra = set(cfg) - known
            if extra:
                raise ContractError(f"unknown config keys {sorted(extra)}")
            for k, v in cfg.items():
                if k not in given:
                    setattr(args, k, v)
    elif args.command == "experiment":
        raise UsageError("experiment needs --config")
    return args, exp_cfg


def _output(args, payload: dict, text: str | None = None):
    if args.format == "json":
        print(json.dumps(payload, sort_keys=True, default=_plain))
    else:
        print(text if text is not None else "\n".join(f"{k} = {v}" for k, v in payload.items()))


def _plain(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    return str(x)


def _instance_from_args(args):
    if getattr(args, "instance", None):
        return OnlineInstance.from_json(Path(args.instance).read_text())
    if not args.generator:
        raise UsageError("give --instance or --generator")
    return build_instance(args.generator, dict(args.param), args.seed)


def cmd_gen(args):
    inst = _instance_from_args(args)
    if isinstance(inst, AdaptiveInstance):
        run_online(inst, get_policy(args.policy), seed=args.seed, stride=0)
        inst = inst.freeze()
    text = inst.to_json()
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text)
    return EXIT_OK


def cmd_sim(args):
    inst = _instance_from_args(args)
    trace = run_online(inst, get_policy(args.policy), seed=args.seed, stride=args.stride)
    if args.out:
        out = Path(args.out)
        if out.suffix == ".csv":
            trace.to_csv(out)
        else:
            out.write_text(trace.to_json())
    _output(args, {"policy": args.policy, "size": trace.size, "T": trace.T, "n": trace.n})
    return EXIT_OK


def cmd_opt(args):
    if not args.instance:
        raise UsageError("opt needs --instance")
    inst = OnlineInstance.from_json(Path(args.instance).read_text())
    if args.method == "brute-force":
        value = brute_force_opt(inst)
    else:
        value = opt_maxflow(inst, method=args.method)[0]
    _output(args, {"opt": value, "method": args.method})
    return EXIT_OK


def cmd_ode(args):
    sol = integrate(None, args.a, args.beta, args.K, args.tau_end, args.dt, args.b0)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["tau", "h"] + [f"z{k}" for k in range(args.K + 1)])
            for i in range(sol.tau.size):
                w.writerow([repr(float(sol.tau[i])), repr(float(sol.h[i]))]
                           + [repr(float(x)) for x in sol.z[i]])
    _output(args, {"tau_end": float(sol.tau[-1]), "h": float(sol.h[-1]), "z": sol.z[-1].tolist()})
    return EXIT_OK


def cmd_stationary(args):
    sp = stationary_z0(args.a, args.beta, args.K)
    d = sp.to_dict()
    _output(args, d, "\n".join(f"{k} = {v}" for k, v in d.items() if k != "profile")
            + "\nprofile = " + " ".join(f"{x:.6g}" for x in sp.profile))
    return EXIT_OK


def cmd_constants(args):
    alpha = solve_alpha()
    out = {"alpha": alpha, "cr_bound_th2": cr_bound_th2(alpha),
           "cr_bound_th1": float(cr_bound_th1(args.b0)), "b0": args.b0}
    if args.m is not None:
        t0 = args.t0 if args.t0 is not None else 1000.0 * args.m
        out["cr_bound_th2_detailed"] = cr_bound_th2_detailed(args.m, args.b0, t0)
    _output(args, out)
    return EXIT_OK


def cmd_experiment(args, cfg):
    cfg = dict(cfg)
    sweep = cfg.pop("sweep", None)
    spec = ExperimentSpec.from_dict(cfg)
    log.info("experiment spec %s", json.dumps(spec.to_dict(), sort_keys=True))
    if sweep is not None:
        if set(sweep) != {"param", "values"}:
            raise ContractError("sweep needs exactly 'param' and 'values'")
        report = cr_curve(spec, sweep["param"], sweep["values"], args.jobs)
    else:
        report = run_experiment(spec, args.jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for fmt in args.emit:
        target = out / (f"{args.name}.{fmt}" if fmt != "svg" else args.name)
        written += emit(report, fmt, target)
    summary = report.summary()
    summary["files"] = [str(p) for p in written]
    _output(args, summary)
    return EXIT_OK


def cmd_dominance(args):
    rep = dominance_check(args.b0, args.m, args.T, args.policies, args.seeds, args.seed, args.jobs)
    d = rep.to_dict()
    lines = [f"balance = {rep.balance_mean:g}  (+ m^2 = {rep.balance_mean + rep.margin:g})"]
    for p in rep.sizes:
        lines.append(f"{p} = {rep.mean(p):g}  {'ok' if rep.holds(p) else 'VIOLATED'}")
    _output(args, d, "\n".join(lines))
    if not rep.passed:
        print("dominance inequality violated; sizes: "
              + json.dumps({p: rep.sizes[p] for p in rep.sizes}), file=sys.stderr)
        return EXIT_ASSERT
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "sim": cmd_sim, "opt": cmd_opt, "ode": cmd_ode,
            "stationary": cmd_stationary, "constants": cmd_constants,
            "dominance": cmd_dominance}


def _setup_logging(verbose: int):
    for h in list(log.handlers):
        log.removeHandler(h)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(name)s: %(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.DEBUG if verbose > 1 else logging.INFO)
    log.propagate = False


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args, exp_cfg = resolve(argv)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except (UsageError, ContractError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    _setup_logging(args.verbose)
    resolved = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()}
    log.info("config %s", json.dumps(resolved, sort_keys=True, default=str))
    try:
        if args.command == "experiment":
            return cmd_experiment(args, exp_cfg)
        return COMMANDS[args.command](args)
    except (UsageError, ContractError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        if args.verbose:
            raise
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
