"""``dyncore`` command line: load a spec, run one check or experiment, write JSON or CSV.

Exit status: 0 when the run completed (whatever the verdict), 1 when
``reproduce`` saw a failing example, 2 for usage errors, 3 for bad input
files or parameters, 4 for numerical failures (solver, divergence, budget).
"""

from __future__ import annotations

import argparse
import csv
import inspect
import io
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .credible_core import credible_core_check, one_deviation_check, policy_from_json, theorem3_equivalence
from .dynamics import AllocationSequence, DiscountSpec, DynamicSpec, State, simulate, uniform_schedule
from .errors import (BudgetError, ConfigurationError, DivergenceError, DyncoreError, InputError,
                     PreconditionError, SearchExhaustedError, SimulationError, SolverError)
from .fair_core import (efficiency_check, efficient_fair_certificate_search, fair_core_membership,
                        synthesize_fair_sequence, theorem1_certificate_search)
from .families import FAMILIES, bundled_dir, load_json, resolve_spec_path, spec_from_json
from .game import coalition, coalition_sums, format_coalition, game_from_json, least_core, members
from .schemas import validate_result, validate_spec_file
from .stable_core import (constant_worth_criterion, fixed_point, induced_game, stable_core_membership,
                          theorem2_experiment)

log = logging.getLogger("dyncore")

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3, 4

DEFAULTS = {"delta": 0.99, "eps": 0.05, "grid": 1 / 20, "precision": 1e-4}


class UsageError(Exception):
    pass


# -- configuration ------------------------------------------------------------

def threads() -> int:
    """Worker cap from ``DYNCORE_THREADS``; the current code paths run on one thread."""
    raw = os.environ.get("DYNCORE_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"DYNCORE_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise UsageError("DYNCORE_THREADS must be a positive integer")
    return n


def check_config(args) -> None:
    if not 0 < args.delta < 1:
        raise UsageError("--delta must lie in (0, 1)")
    if args.eps < 0:
        raise UsageError("--eps must be nonnegative")
    if args.grid <= 0:
        raise UsageError("--grid must be positive")
    if args.horizon is not None and args.horizon < 1:
        raise UsageError("--horizon must be at least 1")
    if args.depth is not None and args.depth < 0:
        raise UsageError("--depth must be nonnegative")
    if args.gamma is not None and args.gamma <= 0:
        raise UsageError("--gamma must be positive")


def read_spec_file(args) -> tuple[dict, Path]:
    if not args.spec:
        raise UsageError("--spec is required")
    path = resolve_spec_path(args.spec)
    data = load_json(path)
    validate_spec_file(data)
    if args.seed is not None and "family" in data:
        data = dict(data, params=dict(data.get("params", {}), seed=args.seed)) if _takes_seed(data) else data
    return data, path


def _takes_seed(data: dict) -> bool:
    fn = FAMILIES.get(data.get("family"))
    return fn is not None and "seed" in inspect.signature(fn).parameters


def load(args) -> tuple[DynamicSpec, dict]:
    data, _ = read_spec_file(args)
    return spec_from_json(data), data


def discount(args, spec: DynamicSpec) -> DiscountSpec:
    peak = max(1.0, float(np.abs(spec.initial.worth).max()))
    if args.horizon is not None:
        return DiscountSpec(args.delta, args.horizon, peak)
    return DiscountSpec.from_precision(args.delta, args.precision, peak)


def parse_sequence(raw, n: int):
    if raw is None or raw == "uniform":
        return uniform_schedule
    if isinstance(raw, str):
        raw = json.loads(raw)
    if isinstance(raw, list):
        raw = {"cycle": raw}
    if not isinstance(raw, dict):
        raise InputError("a sequence is 'uniform', a list of allocations or {prefix, cycle}")
    seq = AllocationSequence(tuple(raw.get("prefix", ())), tuple(raw.get("cycle", ())))
    if any(len(x) != n for x in seq.prefix + seq.cycle):
        raise InputError(f"sequence allocations must have {n} entries")
    return seq


def parse_vector(raw: str) -> np.ndarray:
    try:
        return np.array([float(t) for t in raw.replace("(", "").replace(")", "").split(",")])
    except ValueError:
        raise InputError(f"bad vector {raw!r}") from None


def parse_coalition(raw: str) -> int:
    try:
        return coalition(int(t) for t in raw.strip("{}").split(","))
    except ValueError:
        raise InputError(f"bad coalition {raw!r}") from None


# -- commands -----------------------------------------------------------------
# each returns (json payload, csv rows)

def cmd_leastcore(args):
    data, _ = read_spec_file(args)
    g = game_from_json(data) if "worth" in data else spec_from_json(data).initial
    rep = least_core(g, args.floor)
    out = {"epsilon_star": rep.epsilon_star, "witness": rep.witness.tolist(),
           "binding": [format_coalition(T) for T in rep.binding], "core_nonempty": rep.core_nonempty}
    share = {p: float(v) for p, v in zip(g.players, rep.witness)}
    rows = []
    for T, w in g.items():
        s = sum(share[p] for p in members(T))
        rows.append({"coalition": format_coalition(T), "worth": w, "share": s, "excess": w - s})
    return out, rows


def cmd_faircore_check(args):
    spec, data = load(args)
    ds = discount(args, spec)
    seq = parse_sequence(args.sequence if args.sequence is not None else data.get("sequence"), spec.n)
    rep = fair_core_membership(spec, seq, ds, args.eps)
    eff = efficiency_check(spec, seq, ds, args.grid)
    out = dict(rep.to_json(), efficiency=eff.to_json())
    return out, [r.to_json() for r in rep.rows]


def cmd_faircore_certificate(args):
    spec, _ = load(args)
    if args.gamma is None:
        cert = theorem1_certificate_search(spec, args.grid, args.kmax)
    else:
        cert = efficient_fair_certificate_search(spec, args.gamma, args.grid, args.kmax)
    out = {"found": cert is not None, "gamma": args.gamma, "certificate": None if cert is None else cert.to_json()}
    rows = [] if cert is None else [{"weight": float(a), **{f"y{i}": float(v) for i, v in enumerate(p)}}
                                     for p, a in zip(cert.split.points, cert.split.weights)]
    return out, rows


def cmd_faircore_synthesize(args):
    spec, _ = load(args)
    ds = discount(args, spec)
    cert = theorem1_certificate_search(spec, args.grid, args.kmax)
    if cert is None:
        raise SearchExhaustedError("no grid certificate exists for this spec; nothing to synthesize")
    seq = synthesize_fair_sequence(cert, ds)
    peak = float(np.abs(spec.initial.worth).max())
    eps = max(args.eps, 2 * (1 - ds.delta) * peak + 0.01)
    check = fair_core_membership(spec, seq, ds, eps)
    out = {"certificate": cert.to_json(), "sequence": [x.tolist() for x in seq.prefix],
           "check": {"verdict": check.passed, "eps": eps, "min_slack": check.min_slack,
                     "discounted_average": check.average.tolist()}}
    rows = [{"t": t + 1, **{f"x{i}": float(v) for i, v in enumerate(x)}} for t, x in enumerate(seq.prefix)]
    return out, rows


def cmd_stablecore_check(args):
    spec, data = load(args)
    ds = discount(args, spec)
    seq = parse_sequence(args.sequence if args.sequence is not None else data.get("sequence"), spec.n)
    rep = stable_core_membership(spec, seq, ds, args.eps, args.hcheck, args.grid)
    names = [format_coalition(T) for T in range(1, 1 << spec.n)]
    rows = [{"h": h, "coalition": names[j], "planned": float(rep.planned[h, j]),
             "deviation": float(rep.deviation[h, j]), "slack": float(rep.slack[h, j])}
            for h in range(rep.slack.shape[0]) for j in range(len(names))]
    return rep.to_json(), rows


def _aggregate(spec: DynamicSpec):
    if spec.aggregate is None:
        raise PreconditionError(f"family {spec.name!r} is not aggregate-dependent")
    return spec.aggregate


def cmd_stablecore_uxgame(args):
    spec, _ = load(args)
    ad = _aggregate(spec)
    x = parse_vector(args.x) if args.x else np.full(ad.n, ad.initial.grand_worth / ad.n)
    u = induced_game(ad, x).game
    rep = least_core(u, ad.floor)
    sums = coalition_sums(x)
    fps = [fixed_point(ad, T, float(sums[T]), max(args.eps, 1e-6)).to_json() for T in range(1, 1 << ad.n)]
    out = {"x": x.tolist(), "game": u.to_json(), "epsilon_star": rep.epsilon_star, "fixed_points": fps}
    rows = [{"coalition": format_coalition(T), "entry": float(sums[T]), "limit": w} for T, w in u.items()]
    return out, rows


def cmd_stablecore_theorem2(args):
    spec, _ = load(args)
    ad = _aggregate(spec)
    v = theorem2_experiment(ad, discount(args, spec), max(args.eps, 1e-9), args.grid)
    return v.to_json(), [{k: val for k, val in v.to_json().items() if not isinstance(val, list)}]


def cmd_stablecore_constworth(args):
    spec, _ = load(args)
    v = constant_worth_criterion(spec, discount(args, spec), args.eps, args.grid)
    rows = [{"coalition": format_coalition(T), "optimal_value": w} for T, w in v.optimal_game.items()]
    return v.to_json(), rows


def _policy(args, data):
    raw = args.policy if args.policy is not None else data.get("policy", "uniform")
    if isinstance(raw, str) and raw.strip().startswith("{"):
        raw = json.loads(raw)
    return policy_from_json(raw)


def cmd_credible_check(args):
    spec, data = load(args)
    ds = discount(args, spec)
    v = credible_core_check(spec, _policy(args, data), ds, args.eps, args.depth, args.hcheck, args.grid,
                            args.budget)
    return v.to_json(), [{k: val for k, val in v.to_json().items() if not isinstance(val, (dict, list))}]


def cmd_credible_onedev(args):
    spec, data = load(args)
    ds = discount(args, spec)
    state = None
    if args.state_allocation:
        S = parse_coalition(args.state_coalition) if args.state_coalition else spec.grand
        state = State(S, parse_vector(args.state_allocation))
    if not args.coalition:
        raise UsageError("--coalition is required")
    rep = one_deviation_check(spec, _policy(args, data), state, parse_coalition(args.coalition), ds, args.eps,
                              args.grid)
    out = rep.to_json()
    return out, [{k: val for k, val in out.items() if not isinstance(val, list)}]


def cmd_credible_theorem3(args):
    spec, data = load(args)
    ds = discount(args, spec)
    v = theorem3_equivalence(spec, _policy(args, data), ds, args.eps, args.depth, args.hcheck, args.stages,
                             args.grid, args.budget)
    return v.to_json(), [{k: val for k, val in v.to_json().items() if not isinstance(val, (dict, list))}]


def cmd_simulate(args):
    spec, data = load(args)
    ds = discount(args, spec)
    seq = parse_sequence(args.sequence if args.sequence is not None else data.get("sequence"), spec.n)
    traj = simulate(spec, seq, ds, length=args.length)
    out = {"coalitions": [format_coalition(S) for S in traj.coalitions],
           "allocations": [x.tolist() for x in traj.allocations],
           "worths": [g.grand_worth for g in traj.games]}
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "trajectory.csv"
        traj.to_csv(path, include_worths=args.worths)
        return out, path.read_text()


# -- reproduce ------------------------------------------------------------------

def cmd_reproduce(args):
    from . import reproduce as R
    if args.list:
        out = {"passed": True, "examples": [{"name": name, "passed": True, "detail": ", ".join(files)}
                                            for name, files, _ in R.EXAMPLES]}
        return out, [{"name": e["name"], "specs": e["detail"]} for e in out["examples"]]
    root = Path(args.data) if args.data else bundled_dir()
    results = R.run_all(root)
    out = {"passed": all(r["passed"] for r in results), "examples": results}
    return out, results


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", help="spec JSON file (path, or name of a bundled example)")
    common.add_argument("--delta", type=float, default=DEFAULTS["delta"], help="discount factor (default 0.99)")
    common.add_argument("--eps", type=float, default=DEFAULTS["eps"], help="slack (default 0.05)")
    common.add_argument("--gamma", type=float, default=None, help="efficiency slack for certificates")
    common.add_argument("--grid", type=float, default=DEFAULTS["grid"], help="grid step (default 1/20)")
    common.add_argument("--horizon", type=int, default=None,
                        help="truncation horizon (default: from --precision)")
    common.add_argument("--precision", type=float, default=DEFAULTS["precision"], help="tail precision (1e-4)")
    common.add_argument("--depth", type=int, default=None, help="maximum nested splits (default n-1)")
    common.add_argument("--hcheck", type=int, default=None, help="periods checked (default: horizon)")
    common.add_argument("--seed", type=int, default=None, help="seed for seeded families")
    common.add_argument("--floor", type=float, default=0.0, help="allocation floor for leastcore")
    common.add_argument("--out", default=None, help="output file (default stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="dyncore", description="Cores of dynamic cooperative games.")
    p.add_argument("--version", action="version", version=f"dyncore {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def add(parent, name, fn, help_, **kw):
        q = parent.add_parser(name, parents=[common], help=help_, **kw)
        q.set_defaults(fn=fn)
        return q

    add(sub, "leastcore", cmd_leastcore, "least core of a game (or of a spec's first stage game)")

    fc = sub.add_parser("faircore", help="fair core checks and convex-split certificates")
    fcs = fc.add_subparsers(dest="action", required=True)
    q = add(fcs, "check", cmd_faircore_check, "fair-core membership and efficiency of a sequence")
    q.add_argument("--sequence", default=None, help="'uniform', JSON list or {prefix, cycle}")
    q = add(fcs, "certificate", cmd_faircore_certificate, "search a convexification certificate")
    q.add_argument("--kmax", type=int, default=None)
    q = add(fcs, "synthesize", cmd_faircore_synthesize, "certificate plus the synthesized fair sequence")
    q.add_argument("--kmax", type=int, default=None)

    sc = sub.add_parser("stablecore", help="stable core checks and the fixed-point machinery")
    scs = sc.add_subparsers(dest="action", required=True)
    q = add(scs, "check", cmd_stablecore_check, "stable-core membership of a sequence")
    q.add_argument("--sequence", default=None)
    q = add(scs, "uxgame", cmd_stablecore_uxgame, "limit game u_x of an aggregate dynamic")
    q.add_argument("--x", default=None, help="allocation, comma separated (default equal split)")
    add(scs, "theorem2", cmd_stablecore_theorem2, "u_x least core versus periodic stable sequences")
    add(scs, "constworth", cmd_stablecore_constworth, "least core of the optimal-value game")

    cc = sub.add_parser("credible", help="allocation policies and the one-deviation principle")
    ccs = cc.add_subparsers(dest="action", required=True)
    for name, fn, help_ in (("check", cmd_credible_check, "credible-core check of a policy"),
                            ("onedev", cmd_credible_onedev, "best one-period deviation of a coalition"),
                            ("theorem3", cmd_credible_theorem3, "one-shot versus multi-stage deviations")):
        q = add(ccs, name, fn, help_)
        q.add_argument("--policy", default=None, help="uniform | cyclic | greedy-core | JSON object")
        q.add_argument("--budget", type=int, default=200_000, help="maximum explored states")
        if name == "onedev":
            q.add_argument("--coalition", default=None, help="deviating coalition, e.g. 0,1")
            q.add_argument("--state-coalition", default=None)
            q.add_argument("--state-allocation", default=None, help="last allocation (omit: empty history)")
        if name == "theorem3":
            q.add_argument("--stages", type=int, default=3, help="longest multi-stage deviation")

    q = add(sub, "simulate", cmd_simulate, "play a sequence forward and export the trajectory")
    q.add_argument("--sequence", default=None)
    q.add_argument("--length", type=int, default=None)
    q.add_argument("--worths", action="store_true", help="add every coalition's stage worth to the CSV")

    q = add(sub, "reproduce", cmd_reproduce, "run every bundled worked example")
    q.add_argument("--list", action="store_true", help="list the examples without running them")
    q.add_argument("--data", default=None, help="directory holding the example specs")
    return p


def command_name(args) -> str:
    return args.command if getattr(args, "action", None) is None else f"{args.command} {args.action}"


def emit(args, payload, rows) -> None:
    if args.format == "json":
        text = json.dumps(payload, indent=2, sort_keys=False, default=_json_default) + "\n"
    elif isinstance(rows, str):
        text = rows
    else:
        buf = io.StringIO()
        if rows:
            fields = list(dict.fromkeys(k for r in rows for k in r))
            w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
            w.writeheader()
            for r in rows:
                w.writerow({k: (json.dumps(v) if isinstance(v, (list, dict)) else v) for k, v in r.items()})
        text = buf.getvalue()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    name = command_name(args)
    try:
        check_config(args)
        log.info("threads: %d", threads())
        payload, rows = args.fn(args)
        payload = json.loads(json.dumps(payload, default=_json_default))
        validate_result(name, payload)
        emit(args, payload, rows)
    except UsageError as exc:
        print(f"dyncore {name}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"dyncore {name}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InputError, ConfigurationError, PreconditionError, json.JSONDecodeError) as exc:
        print(f"dyncore {name}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SolverError, DivergenceError, BudgetError, SearchExhaustedError, SimulationError, DyncoreError) as exc:
        print(f"dyncore {name}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if name == "reproduce" and not payload["passed"]:
        return EXIT_FAILED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
