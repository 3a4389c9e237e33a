"""Command-line entry point: ``hybridclust <command> ...``.

Every command that reads an instance prints a RunReport (JSON) that embeds
the instance and the full configuration, so ``hybridclust replay REPORT``
reproduces its outcome payload without the original files.

Exit codes: 0 success, 2 no solution found, 1 usage or I/O error.
"""

from __future__ import annotations

import argparse
import csv
import glob
import io
import json
import logging
import sys
import time
from pathlib import Path

from . import __version__
from .ballint import BudgetExceeded, Infeasible, RequestSet, request_ratio, solve as ball_solve
from .coreset import build_T, build_coreset, certify
from .gen import KINDS, generate
from .io import atomic_write_text, dumps
from .metric import (Instance, MetricError, instance_from_dict, instance_to_dict, load_instance,
                     save_instance)
from .oracle import EnumerationTooLarge, brute_force, kcenter_radius
from .solver import NoSolutionFound, SolverConfig, scatter_diagnostics, solve, threads_from_env

SCHEMA_VERSION = 1
EXIT_OK, EXIT_USAGE, EXIT_NO_SOLUTION = 0, 1, 2

log = logging.getLogger("hybridclust")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# pure command bodies: (config, instance) -> outcome payload
# ---------------------------------------------------------------------------

def run_solve(cfg: dict, inst: Instance) -> tuple[dict, int]:
    config = SolverConfig(epsilon=cfg["epsilon"], iteration_cap=cfg.get("iteration_cap"),
                          repetitions=cfg["repetitions"], seed=cfg["seed"], guess=cfg.get("guess"),
                          workers=cfg.get("threads") or 1)
    z = inst.z if cfg.get("z") is None else cfg["z"]
    try:
        res = solve(inst.space, inst.k, inst.r, cfg["epsilon"], config, z)
    except NoSolutionFound as exc:
        return {"status": "no-solution-found", **_strip_rows(exc.report)}, EXIT_NO_SOLUTION
    out = res.to_json()
    out["status"] = "solution"
    out["cost_full_radius"] = res.best.cost_full_radius if res.best else 0.0
    out["best_seed"] = list(res.best.seed) if res.best else None
    out["best_G"] = res.best.G if res.best else None
    out = {**out, **_strip_rows(res.report)}
    return out, EXIT_OK


def _strip_rows(report: dict) -> dict:
    """Per-guess summary without the per-repetition rows (those go to ``bench``)."""
    per = []
    for g in report.get("per_guess", []):
        reasons: dict = {}
        for row in g["rows"]:
            key = row["status"] if row["reason"] is None else row["reason"]
            reasons[key] = reasons.get(key, 0) + 1
        per.append({"guess_index": g["guess_index"], "G": g["G"], "marked": g["marked"],
                    "successes": g["successes"], "outcomes": dict(sorted(reasons.items())),
                    "scatter_violations": sum(r["scatter_violations"] for r in g["rows"])})
    return {"per_guess": per, "guesses": report.get("guesses", 0), "upper_bound": report.get("upper_bound")}


def run_coreset(cfg: dict, inst: Instance) -> tuple[dict, int]:
    space, k, r = inst.space, inst.k, inst.r
    opt = None
    if cfg.get("certify") or cfg.get("exact_alpha", True):
        try:
            opt = brute_force(space, k, r).opt_cost
        except (EnumerationTooLarge, TypeError):
            opt = None
    T = build_T(space, k, r, opt_cost=opt, seed=cfg.get("seed", 0))
    cs = build_coreset(space, k, r, cfg["epsilon"], T)
    out = {
        "coreset": [[p, w] for p, w in cs.members],
        "size": len(cs),
        "total_weight": cs.total_weight,
        "measured_alpha": T.alpha_bound,
        "anchor_count": len(T.points),
        "anchor_cost": T.measured_cost,
        "opt_cost": opt,
        "uncovered": cs.uncovered,
    }
    if cfg.get("certify"):
        if space.continuous:
            raise UsageError("--certify needs a finite facility set")
        cert = certify(space, cs, k, r, cfg["epsilon"])
        out.update(max_relative_error=cert["max_relative_error"], violations=cert["violations"],
                   checked=cert["checked"])
    return out, EXIT_OK


def run_oracle(cfg: dict, inst: Instance) -> tuple[dict, int]:
    if cfg.get("kcenter"):
        return {"radius": kcenter_radius(inst.space, inst.k)}, EXIT_OK
    res = brute_force(inst.space, inst.k, inst.r, inst.z if cfg.get("z") is None else cfg["z"])
    return res.to_json(), EXIT_OK


def run_ballcheck(cfg: dict, inst: Instance) -> tuple[dict, int]:
    Q = RequestSet.from_json(cfg["requests"])
    eta = cfg["eta"]
    try:
        x = ball_solve(inst.space, Q, eta)
    except Infeasible as exc:
        return {"status": "infeasible", "best_ratio": exc.best_ratio}, EXIT_OK
    except BudgetExceeded as exc:
        return {"status": "budget-exceeded", "upper": exc.upper, "lower": exc.lower}, EXIT_OK
    ratio = request_ratio(inst.space, Q, x)
    center = x.tolist() if hasattr(x, "tolist") else int(x)
    return {"status": "feasible", "center": center, "ratio": ratio}, EXIT_OK


COMMANDS = {"solve": run_solve, "coreset": run_coreset, "oracle": run_oracle, "ballcheck": run_ballcheck}


def make_report(command: str, argv: list, cfg: dict, inst: Instance, outcome: dict, timings: dict) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "command": command,
        "argv": argv,
        "config": cfg,
        "instance": instance_to_dict(inst),
        "timings": timings,
        "outcome": outcome,
    }


def replay(report: dict) -> tuple[dict, int]:
    if report.get("schema_version") != SCHEMA_VERSION:
        raise UsageError(f"unsupported schema_version {report.get('schema_version')!r}")
    fn = COMMANDS.get(report["command"])
    if fn is None:
        raise UsageError(f"command {report['command']!r} is not replayable")
    inst = instance_from_dict(report["instance"])
    return fn(report["config"], inst)


def normalized(payload) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hybridclust", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="write a random instance file")
    g.add_argument("--kind", choices=KINDS, required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--m", type=int, required=True)
    g.add_argument("--dim", type=int, default=2)
    g.add_argument("--k", type=int, default=2)
    g.add_argument("--r", type=float, default=0.0)
    g.add_argument("--z", type=float, default=1.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)

    s = sub.add_parser("solve", help="run the bicriteria scheme")
    _instance_arg(s)
    s.add_argument("--epsilon", type=float, required=True)
    s.add_argument("--repetitions", type=int, default=50)
    s.add_argument("--iteration-cap", type=int, default=None)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--z", type=float, default=None)
    s.add_argument("--guess", type=float, default=None)
    s.add_argument("--threads", type=int, default=None)
    s.add_argument("--trace", default=None, help="write the best run's trace here")
    s.add_argument("--out", default=None)

    c = sub.add_parser("coreset", help="build (and optionally certify) a coreset")
    _instance_arg(c)
    c.add_argument("--epsilon", type=float, required=True)
    c.add_argument("--certify", action="store_true")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", default=None)

    o = sub.add_parser("oracle", help="exact optimum by enumeration")
    _instance_arg(o)
    o.add_argument("--z", type=float, default=None)
    o.add_argument("--kcenter", action="store_true", help="report the optimal k-center radius instead")
    o.add_argument("--out", default=None)

    b = sub.add_parser("ballcheck", help="run ball intersection on a request file")
    _instance_arg(b)
    b.add_argument("--requests", required=True, help="JSON list of [client_index, radius]")
    b.add_argument("--eta", type=float, required=True)
    b.add_argument("--out", default=None)

    bn = sub.add_parser("bench", help="per-repetition CSV over a set of instances")
    bn.add_argument("--instances", required=True, help="glob pattern")
    bn.add_argument("--epsilon", type=float, nargs="+", required=True)
    bn.add_argument("--repetitions", type=int, default=10)
    bn.add_argument("--iteration-cap", type=int, default=None)
    bn.add_argument("--seed", type=int, default=0)
    bn.add_argument("--oracle", action="store_true", help="add cost ratios against brute force")
    bn.add_argument("--out", default=None)

    d = sub.add_parser("diag", help="scattering diagnostics for a trace file")
    d.add_argument("--trace", required=True)
    d.add_argument("--out", default=None)

    rp = sub.add_parser("replay", help="re-run a RunReport and compare outcomes")
    rp.add_argument("report")
    return p


def _instance_arg(p):
    p.add_argument("--instance", required=True)
    p.add_argument("--no-validate", action="store_true", help="skip the triangle-inequality check")


def _emit(payload, out):
    text = dumps(payload)
    if out:
        atomic_write_text(Path(out), text)
    sys.stdout.write(text)


def _config_from_args(args) -> dict:
    skip = {"command", "instance", "out", "trace", "verbose", "no_validate"}
    cfg = {k: v for k, v in vars(args).items() if k not in skip}
    if args.command == "solve" and cfg.get("threads") is None:
        cfg["threads"] = threads_from_env(1)
    if args.command == "ballcheck":
        with open(args.requests, encoding="utf-8") as fh:
            doc = json.load(fh)
        cfg["requests"] = doc["requests"] if isinstance(doc, dict) else doc
    return cfg


def _cmd_instance(args, argv) -> int:
    inst = load_instance(args.instance, validate=not args.no_validate)
    cfg = _config_from_args(args)
    t0 = time.perf_counter()
    outcome, code = COMMANDS[args.command](cfg, inst)
    timings = {"total_s": round(time.perf_counter() - t0, 6)}
    if args.command == "solve" and args.trace:
        _write_trace(args.trace, cfg, inst, outcome)
    _emit(make_report(args.command, argv, cfg, inst, outcome, timings), args.out)
    return code


def _write_trace(path, cfg, inst, outcome):
    # the winning run is re-derived from its seed so the trace file is self-contained
    from .solver import compute_upper_bounds, greedy_mark, run_single

    doc = {"epsilon": cfg["epsilon"], "k": inst.k, "r": inst.r, "z": inst.z if cfg.get("z") is None else cfg["z"], "trace": []}
    best_seed = outcome.get("best_seed")
    if best_seed is not None:
        G = outcome["best_G"]
        u = compute_upper_bounds(inst.space, G, inst.r)
        run = run_single(inst.space, inst.k, inst.r, cfg["epsilon"], G, tuple(best_seed),
                         cfg.get("iteration_cap"), doc["z"], u=u, marked=greedy_mark(inst.space, u))
        doc.update(G=G, seed=best_seed, trace=[t.to_json() for t in run.trace],
                   requests=[Q.to_json() for Q in run.state.Q] if run.state else [])
    atomic_write_text(Path(path), dumps(doc))


def _cmd_gen(args) -> int:
    inst = generate(args.kind, args.n, args.m, args.dim, args.k, args.r, args.seed, args.z)
    save_instance(inst, args.out)
    return EXIT_OK


def _cmd_diag(args) -> int:
    with open(args.trace, encoding="utf-8") as fh:
        doc = json.load(fh)
    rep = scatter_diagnostics(doc["trace"], doc["epsilon"], doc["k"], doc["r"])
    _emit({"schema_version": SCHEMA_VERSION, "command": "diag", "trace": str(args.trace), "outcome": rep}, args.out)
    return EXIT_OK


BENCH_FIELDS = ["instance", "epsilon", "guess_index", "G", "repetition", "seed", "status", "reason",
                "iterations", "nearby", "faraway", "cost", "oracle_cost", "ratio"]


def bench_rows(paths, epsilons, repetitions, iteration_cap, seed, with_oracle):
    for path in paths:
        inst = load_instance(path)
        opt = None
        if with_oracle:
            try:
                opt = brute_force(inst.space, inst.k, inst.r, inst.z).opt_cost
            except (EnumerationTooLarge, TypeError):
                opt = None
        for eps in epsilons:
            config = SolverConfig(epsilon=eps, iteration_cap=iteration_cap, repetitions=repetitions, seed=seed)
            try:
                res = solve(inst.space, inst.k, inst.r, eps, config, inst.z)
                per_guess = res.report["per_guess"]
            except NoSolutionFound as exc:
                per_guess = exc.report["per_guess"]
            for g in per_guess:
                for rep, row in enumerate(g["rows"]):
                    ratio = None
                    if opt is not None and row["cost"] is not None:
                        ratio = row["cost"] / opt if opt > 0 else (1.0 if row["cost"] == 0 else float("inf"))
                    yield {"instance": str(path), "epsilon": eps, "guess_index": g["guess_index"], "G": g["G"],
                           "repetition": rep, "seed": "/".join(map(str, row["seed"])), "status": row["status"],
                           "reason": row["reason"] or "", "iterations": row["iterations"],
                           "nearby": row["nearby"], "faraway": row["faraway"],
                           "cost": "" if row["cost"] is None else row["cost"],
                           "oracle_cost": "" if opt is None else opt, "ratio": "" if ratio is None else ratio}


def _cmd_bench(args) -> int:
    paths = sorted(glob.glob(args.instances))
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=BENCH_FIELDS, lineterminator="\n")
    w.writeheader()
    for row in bench_rows(paths, args.epsilon, args.repetitions, args.iteration_cap, args.seed, args.oracle):
        w.writerow(row)
    if args.out:
        atomic_write_text(Path(args.out), buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


def _cmd_replay(args) -> int:
    with open(args.report, encoding="utf-8") as fh:
        report = json.load(fh)
    outcome, code = replay(report)
    same = normalized(outcome) == normalized(report["outcome"])
    sys.stdout.write(dumps({"identical": same, "outcome": outcome}))
    if not same:
        log.error("replayed outcome differs from the recorded one")
        return EXIT_USAGE
    return code


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "gen":
            return _cmd_gen(args)
        if args.command == "bench":
            return _cmd_bench(args)
        if args.command == "diag":
            return _cmd_diag(args)
        if args.command == "replay":
            return _cmd_replay(args)
        return _cmd_instance(args, argv)
    except (OSError, MetricError, UsageError, EnumerationTooLarge, ValueError, KeyError, TypeError) as exc:
        print(f"hybridclust: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
