"""Command-line interface: classify, walk, cascade, network, couple, verify, sample-tree.

Every stochastic subcommand requires an explicit --seed (no wall-clock
defaults), writes schema-stable JSON or RFC 4180 CSV, and is byte-identical
across reruns and worker counts.  Exit codes: 0 success, 1 failed check,
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

from . import coupling as coupling_mod
from . import experiments, network, regime, trees, walk
from .cascade import cascade as cascade_series
from .errors import RwreError
from .laws import load_law
from .seeding import spawn_rng

SCHEMA_VERSION = experiments.SCHEMA_VERSION


def _size_cap() -> int | None:
    cap = os.environ.get("RWRE_SIZE_CAP")
    return int(cap) if cap else None


def _emit(text: str, out_path: str | None) -> None:
    if out_path:
        with open(out_path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json_dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _cmd_classify(args) -> int:
    law = load_law(args.config)
    rng = spawn_rng(args.seed) if args.seed is not None else None
    report = regime.classify(law, rng=rng, draws=args.draws)
    payload = {"schema_version": SCHEMA_VERSION, **report.to_dict()}
    if args.json:
        _emit(_json_dump(payload), args.out)
    else:
        _emit(
            f"classification={report.classification.value} p={report.p:.12g} "
            f"rho'(1)={report.rho_prime_one:.12g} "
            f"kappa={'inf' if math.isinf(report.kappa) else format(report.kappa, '.12g')}\n",
            args.out,
        )
    return 0


def _cmd_walk(args) -> int:
    law = load_law(args.config)
    rng = spawn_rng(args.seed, 0)
    if args.tree == "imt":
        env = trees.generate_imt(law, 4, 0, rng, size_cap=_size_cap())
        level_name = "h"
    else:
        env = trees.generate_mt(law, 0, rng, size_cap=_size_cap())
        level_name = "depth"
    traj = walk.run_walk(env, None, args.steps, spawn_rng(args.seed, 1))
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["t", "vertex", level_name])
    for t, (v, lv) in enumerate(zip(traj.vertices, traj.levels)):
        writer.writerow([t, v, lv])
    _emit(buf.getvalue(), args.out)
    return 0


def _cmd_cascade(args) -> int:
    law = load_law(args.config)
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["replica", "n", "value", "normalized"])
    from .seeding import replica_rng

    rho_alpha = law.rho_exact(args.alpha) if law.is_finite_support else None
    for r in range(args.replicas):
        t = trees.generate_mt(law, args.depth, replica_rng(args.seed, r),
                              size_cap=_size_cap())
        series = cascade_series(t, args.alpha, args.depth, rho_alpha=rho_alpha)
        for n, y in enumerate(series.values):
            norm = series.normalized[n] if series.normalized else ""
            writer.writerow([r, n, repr(y), repr(norm) if norm != "" else ""])
    _emit(buf.getvalue(), args.out)
    return 0


def _cmd_network(args) -> int:
    law = load_law(args.config)
    from .seeding import replica_rng

    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["replica", "stat", "value"])
    fn = network.effective_conductance if args.stat == "conductance" else network.max_flow
    for r in range(args.replicas):
        t = trees.generate_mt(law, args.depth, replica_rng(args.seed, r),
                              size_cap=_size_cap())
        writer.writerow([r, args.stat, repr(fn(t, args.depth))])
    _emit(buf.getvalue(), args.out)
    return 0


def _cmd_couple(args) -> int:
    law = load_law(args.config)
    pair = coupling_mod.couple_to_horizon(
        law,
        args.steps,
        tree_rng=spawn_rng(args.seed, 0),
        walk_rng=spawn_rng(args.seed, 1),
        tilde_rng=spawn_rng(args.seed, 2),
        size_cap=_size_cap(),
    )
    decomp = pair.decomp
    checkpoints = []
    t = 10
    ts = []
    while t <= pair.horizon:
        ts.append(t)
        t *= 10
    if pair.horizon not in ts:
        ts.append(pair.horizon)
    for t in ts:
        d = coupling_mod.discrepancies(pair, args.alpha, t)
        checkpoints.append({
            "t": t,
            "delta": d.delta,
            "delta_alpha": d.delta_alpha,
            "tilde_delta": d.tilde_delta,
            "tilde_delta_alpha": d.tilde_delta_alpha,
            "backtrack": d.backtrack,
            "reflected": d.reflected,
        })
    payload = {
        "schema_version": SCHEMA_VERSION,
        "seed": args.seed,
        "steps": args.steps,
        "alpha": args.alpha,
        "tau": decomp.tau,
        "eta": decomp.eta,
        "tilde_tau": pair.tilde_tau,
        "tilde_eta": pair.tilde_eta,
        "checkpoints": checkpoints,
    }
    _emit(_json_dump(payload), args.out)
    return 0


def _cmd_verify(args) -> int:
    workers = args.workers if args.workers else max(1, os.cpu_count() or 1)
    law = load_law(args.config) if args.config else None
    reports = experiments.verify_suite(args.suite, args.seed, workers=workers,
                                       scale=args.scale, law=law)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "suite": args.suite,
        "seed": args.seed,
        "law_config": args.config,
        "passed": all(r.passed for r in reports),
        "checks": [r.to_dict(include_timing=args.timings) for r in reports],
    }
    _emit(_json_dump(payload), args.out)
    return 0 if payload["passed"] else 1


def _cmd_sample_tree(args) -> int:
    law = load_law(args.config)
    rng = spawn_rng(args.seed)
    if args.imt:
        t = trees.generate_imt(law, args.ray_len, args.depth, rng,
                               size_cap=_size_cap())
    else:
        t = trees.generate_mt(law, args.depth, rng, size_cap=_size_cap())
    buf = io.StringIO()
    trees.dump_jsonl(t, buf)
    _emit(buf.getvalue(), args.out)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="rwre",
        description="Random walks in random environments on marked trees",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed_required=True, config_required=True):
        sp.add_argument("--config", required=config_required,
                        help="law config (.toml or .json)")
        sp.add_argument("--seed", type=int, required=seed_required,
                        help="master seed (required for stochastic runs)")
        sp.add_argument("--out", help="output path (default stdout)")

    sp = sub.add_parser("classify", help="classify the walk regime of a law")
    common(sp, seed_required=False)
    sp.add_argument("--json", action="store_true", help="emit the full JSON report")
    sp.add_argument("--draws", type=int, default=regime.DEFAULT_MC_DRAWS)
    sp.set_defaults(fn=_cmd_classify)

    sp = sub.add_parser("walk", help="simulate one walk and emit t,vertex,level CSV")
    common(sp)
    sp.add_argument("--steps", type=int, required=True)
    sp.add_argument("--tree", choices=("mt", "imt"), default="mt")
    sp.set_defaults(fn=_cmd_walk)

    sp = sub.add_parser("cascade", help="per-replica cascade level sums")
    common(sp)
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--depth", type=int, required=True)
    sp.add_argument("--replicas", type=int, default=100)
    sp.set_defaults(fn=_cmd_cascade)

    sp = sub.add_parser("network", help="conductance/flow statistics over replicas")
    common(sp)
    sp.add_argument("--depth", type=int, required=True)
    sp.add_argument("--stat", choices=("conductance", "flow"), required=True)
    sp.add_argument("--replicas", type=int, default=100)
    sp.set_defaults(fn=_cmd_network)

    sp = sub.add_parser("couple", help="excursion coupling tables and discrepancies")
    common(sp)
    sp.add_argument("--steps", type=int, required=True)
    sp.add_argument("--alpha", type=float, default=0.4)
    sp.set_defaults(fn=_cmd_couple)

    sp = sub.add_parser("verify", help="run a verification suite")
    sp.add_argument("--suite", choices=("core", "clt", "coupling"), required=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--config", help="optional law replacing the subject law")
    sp.add_argument("--out", help="output path (default stdout)")
    sp.add_argument("--workers", type=int, default=0,
                    help="worker processes (default: available parallelism)")
    sp.add_argument("--scale", type=float, default=1.0,
                    help="replica-count multiplier (1.0 = full acceptance scale)")
    sp.add_argument("--timings", action="store_true",
                    help="include wall-clock fields (breaks byte-identity)")
    sp.set_defaults(fn=_cmd_verify)

    sp = sub.add_parser("sample-tree", help="dump a sampled tree as JSON lines")
    common(sp)
    sp.add_argument("--depth", type=int, required=True)
    sp.add_argument("--imt", action="store_true")
    sp.add_argument("--ray-len", type=int, default=8)
    sp.set_defaults(fn=_cmd_sample_tree)
    return p


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (RwreError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
