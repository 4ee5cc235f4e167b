"""Command-line interface.

Exit codes: 0 success / verification pass, 1 usage error, 2 verification
failure.  Every subcommand that consumes randomness prints the effective
seed in its output header, and trace lines of `prune` and `beta` share one
schema so the two engines are diffable.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass

from . import coalescent, mc, oracle, specfun
from .pruning import prune_chain
from .sampler import (
    DEFAULT_NODE_CAP,
    OVERFLOW,
    make_rng,
    sample_gw,
    sample_gw_with_n_leaves,
)
from .trees import tree_to_json

DEFAULT_ALPHAS = (0.5, 0.6, 2.0 / 3.0, 0.8, 0.9)


@dataclass
class RunConfig:
    alpha: float | None
    n: int | None
    reps: int
    seed: int
    workers: int
    fmt: str
    out: str | None
    trace: bool
    node_cap: int


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def build_parser() -> _Parser:
    p = _Parser(prog="prunecoal", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, alpha_required=True):
        sp.add_argument("--alpha", type=float, required=alpha_required)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--reps", type=int, default=100_000)
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--format", dest="fmt", choices=("json", "csv"),
                        default="json")
        sp.add_argument("--out", default=None)

    sp = sub.add_parser("sample-tree", help="emit one tree as JSON")
    common(sp)
    sp.add_argument("--leaves", type=int, default=None,
                    help="condition on this exact leaf count")
    sp.add_argument("--max-leaves", type=int, default=None,
                    help="unconditioned draw aborted past this many leaves")

    sp = sub.add_parser("prune", help="run one node-cut chain")
    common(sp)
    sp.add_argument("--leaves", type=int, required=True)
    sp.add_argument("--trace", action="store_true")

    sp = sub.add_parser("beta", help="run one coalescent jump chain")
    common(sp)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--trace", action="store_true")

    sp = sub.add_parser("verify", help="exact and statistical check suites")
    sp.add_argument("suite", choices=("theorem1", "rates", "pk", "k0", "specfn",
                                      "bn", "zn"))
    common(sp, alpha_required=False)
    sp.add_argument("--nmax", type=int, default=None)

    sp = sub.add_parser("dist", help="Monte Carlo distribution tables")
    sp.add_argument("kind", choices=("bn", "zn", "first-event"))
    common(sp)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--engine", choices=("prune", "beta"), default="beta")

    sp = sub.add_parser("specfn", help="closed forms vs quadrature tables")
    sp.add_argument("kind", choices=("phi", "zmoments", "bpmf"))
    common(sp)
    sp.add_argument("--lambda", dest="lam", type=float, default=1.0)
    sp.add_argument("--jmax", type=int, default=5)
    sp.add_argument("--m", type=int, default=8)
    return p


def _write(out_path, text):
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _jsonline(obj) -> str:
    return json.dumps(obj, separators=(",", ":"))


def _trace_lines(header, trace):
    lines = [_jsonline(header)]
    for e in trace.events:
        lines.append(
            _jsonline(
                {
                    "step": e.step,
                    "cut_node": e.cut_node,
                    "merged": [list(b) for b in e.merged],
                    "partition": [list(b) for b in e.partition.blocks],
                }
            )
        )
    return "\n".join(lines) + "\n"


def _summary_obj(header, trace):
    last = trace.events[-1] if trace.events else None
    largest = None
    if last is not None:
        largest = max(len(b) for b in last.merged) / trace.n
    obj = dict(header)
    obj.update(
        {
            "z": trace.z,
            "b": trace.b,
            "first_event_size": trace.first_event_size,
            "largest_block_fraction": largest,
        }
    )
    return obj


def _cmd_sample_tree(args, cfg: RunConfig) -> int:
    rng = make_rng(cfg.seed)
    header = {"seed": cfg.seed, "alpha": cfg.alpha}
    if args.leaves is not None:
        tree = sample_gw_with_n_leaves(cfg.alpha, args.leaves, rng)
    else:
        cap = args.max_leaves or 1_000_000
        tree = sample_gw(cfg.alpha, rng, cap)
        if tree is OVERFLOW:
            _write(cfg.out, _jsonline({**header, "overflow": True}) + "\n")
            return 0
    labeled = tree.with_labels(range(1, tree.leaf_count() + 1))
    obj = {**header, "tree": json.loads(tree_to_json(labeled))}
    _write(cfg.out, _jsonline(obj) + "\n")
    return 0


def _cmd_prune(args, cfg: RunConfig) -> int:
    rng = make_rng(cfg.seed)
    tree = sample_gw_with_n_leaves(cfg.alpha, args.leaves, rng)
    tree = tree.with_random_labels(rng)
    trace = prune_chain(tree, rng)
    header = {"engine": "prune", "alpha": cfg.alpha, "n": args.leaves,
              "seed": cfg.seed}
    if args.trace:
        _write(cfg.out, _trace_lines(header, trace))
    else:
        _write(cfg.out, _jsonline(_summary_obj(header, trace)) + "\n")
    return 0


def _cmd_beta(args, cfg: RunConfig) -> int:
    rng = make_rng(cfg.seed)
    trace = coalescent.beta_chain(cfg.alpha, args.n, rng)
    header = {"engine": "beta", "alpha": cfg.alpha, "n": args.n,
              "seed": cfg.seed}
    if args.trace:
        _write(cfg.out, _trace_lines(header, trace))
    else:
        _write(cfg.out, _jsonline(_summary_obj(header, trace)) + "\n")
    return 0


def _rows_to_text(suite, seed, rows):
    lines = ["# suite=%s seed=%d" % (suite, seed)]
    for r in rows:
        lines.append(
            "%-12s %-40s value=%.6e tol=%.1e %s"
            % (r.suite, r.label, r.value, r.tol, "PASS" if r.passed else "FAIL")
        )
    ok = all(r.passed for r in rows)
    lines.append("RESULT %s" % ("PASS" if ok else "FAIL"))
    return "\n".join(lines) + "\n", ok


def _verify_specfn_rows():
    rows = []
    worst = 0.0
    for alpha in (0.5, 0.6, 0.7, 0.8, 0.9):
        for lam in (0.25, 0.5, 1.0, 2.0, 5.0, 10.0):
            closed = specfun.phi_subordinator(alpha, lam, "closed")
            num = specfun.phi_subordinator(alpha, lam, "quadrature")
            worst = max(worst, abs(num - closed) / abs(closed))
    rows.append(oracle.VerifyRow("specfn", "phi closed vs quadrature", worst,
                                 1e-8, worst < 1e-8))
    dev = abs(specfun.z_moment(0.5, 1) - math.sqrt(math.pi) / 2.0)
    rows.append(oracle.VerifyRow("specfn", "z moment j=1 alpha=0.5", dev, 1e-12,
                                 dev < 1e-12))
    dev = abs(specfun.z_moment(0.5, 2) - 1.0)
    rows.append(oracle.VerifyRow("specfn", "z moment j=2 alpha=0.5", dev, 1e-12,
                                 dev < 1e-12))
    dev = abs(specfun.b_pmf(0.5, 2) - 5.0 / 12.0)
    rows.append(oracle.VerifyRow("specfn", "block pmf m=2 alpha=0.5", dev, 1e-8,
                                 dev < 1e-8))
    dev = abs(specfun.b_pmf(0.0, 2) - math.log(2.0))
    rows.append(oracle.VerifyRow("specfn", "block pmf m=2 alpha=0", dev, 1e-8,
                                 dev < 1e-8))
    for alpha in (0.5, 0.7, 0.9):
        dev = abs(specfun.phi_alpha(alpha, 1.0) - 1.0)
        rows.append(
            oracle.VerifyRow("specfn", "gf at 1 alpha=%.2f" % alpha, dev, 1e-6,
                             dev < 1e-6)
        )
    return rows


def _cmd_verify(args, cfg: RunConfig) -> int:
    alphas = (cfg.alpha,) if cfg.alpha is not None else DEFAULT_ALPHAS
    suite = args.suite
    if suite == "theorem1":
        rows = oracle.verify_theorem_equality(alphas, args.nmax or 5)
    elif suite == "rates":
        rows = oracle.verify_rates(alphas, args.nmax or 5)
    elif suite == "pk":
        rows = oracle.verify_post_event_law(alphas, args.nmax or 6)
    elif suite == "k0":
        rows = oracle.verify_root_degree_mean(alphas, args.nmax or 7)
    elif suite == "specfn":
        rows = _verify_specfn_rows()
    elif suite == "bn":
        rows = mc.verify_b_convergence(cfg.seed, cfg.workers, cfg.reps,
                                       alpha=cfg.alpha or 0.5)
    else:
        rows = mc.verify_z_trend(cfg.seed, cfg.workers,
                                 min(cfg.reps, 10_000), alpha=cfg.alpha or 0.5)
    text, ok = _rows_to_text(suite, cfg.seed, rows)
    _write(cfg.out, text)
    return 0 if ok else 2


def _cmd_dist(args, cfg: RunConfig) -> int:
    if args.kind == "zn":
        summary = mc.run_experiment(
            "z-scaled-moments", alpha=cfg.alpha, n=args.n, reps=cfg.reps,
            seed=cfg.seed, workers=cfg.workers
        )
        obj = {
            "seed": cfg.seed,
            "alpha": cfg.alpha,
            "n": args.n,
            "replicates": summary.replicates,
            "estimates": summary.estimates,
            "conf99": summary.conf99,
        }
        _write(cfg.out, json.dumps(obj, indent=2, sort_keys=True) + "\n")
        return 0
    name = "b-histogram" if args.kind == "bn" else "first-event-size"
    table = mc.run_experiment(
        name, alpha=cfg.alpha, n=args.n, reps=cfg.reps, seed=cfg.seed,
        workers=cfg.workers, engine=args.engine
    )
    lines = ["# seed=%d alpha=%r n=%d reps=%d" % (cfg.seed, cfg.alpha, args.n,
                                                  cfg.reps)]
    lines.append("value,freq")
    for key in sorted(table.table):
        lines.append("%s,%.10g" % (key, table.table[key]))
    _write(cfg.out, "\n".join(lines) + "\n")
    return 0


def _cmd_specfn(args, cfg: RunConfig) -> int:
    lines = []
    if args.kind == "phi":
        lines.append("alpha,lambda,closed,quadrature,relerr")
        closed = specfun.phi_subordinator(cfg.alpha, args.lam, "closed")
        num = specfun.phi_subordinator(cfg.alpha, args.lam, "quadrature")
        rel = abs(num - closed) / abs(closed)
        lines.append("%g,%g,%.8f,%.8f,%.3e" % (cfg.alpha, args.lam, closed, num,
                                               rel))
    elif args.kind == "zmoments":
        lines.append("alpha,j,closed,product,relerr")
        for j in range(args.jmax + 1):
            a = specfun.z_moment(cfg.alpha, j, "closed")
            b = specfun.z_moment(cfg.alpha, j, "product")
            rel = abs(a - b) / abs(a) if a else 0.0
            lines.append("%g,%d,%.12g,%.12g,%.3e" % (cfg.alpha, j, a, b, rel))
    else:
        lines.append("alpha,m,pmf")
        for m in range(1, args.m + 1):
            lines.append("%g,%d,%.12g" % (cfg.alpha, m,
                                          specfun.b_pmf(cfg.alpha, m)))
    _write(cfg.out, "\n".join(lines) + "\n")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        sys.stderr.write("usage error: %s\n" % exc)
        return 1
    node_cap = int(os.environ.get("PRUNECOAL_MAX_NODES", DEFAULT_NODE_CAP))
    cfg = RunConfig(
        alpha=getattr(args, "alpha", None),
        n=getattr(args, "n", None),
        reps=getattr(args, "reps", 0),
        seed=getattr(args, "seed", 0),
        workers=getattr(args, "workers", 1),
        fmt=getattr(args, "fmt", "json"),
        out=getattr(args, "out", None),
        trace=getattr(args, "trace", False),
        node_cap=node_cap,
    )
    try:
        if args.command == "sample-tree":
            return _cmd_sample_tree(args, cfg)
        if args.command == "prune":
            return _cmd_prune(args, cfg)
        if args.command == "beta":
            return _cmd_beta(args, cfg)
        if args.command == "verify":
            return _cmd_verify(args, cfg)
        if args.command == "dist":
            return _cmd_dist(args, cfg)
        if args.command == "specfn":
            return _cmd_specfn(args, cfg)
    except (ValueError, oracle.ResourceLimitError) as exc:
        sys.stderr.write("error: %s\n" % exc)
        return 1
    raise AssertionError("unreachable")


if __name__ == "__main__":
    raise SystemExit(main())
