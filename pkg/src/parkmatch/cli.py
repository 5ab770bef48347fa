"""Command line interface: ``parkmatch <subcommand> ...``.

Reports are plain ``key=value`` lines so they diff cleanly; the same seed
always gives the same bytes.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import formats
from .experiment import ExperimentConfig, run_experiment
from .generators import gen_match_instance, gen_random_tree, gen_search_instance
from .grove import build_grove, grove_parameters, GroveMatch, run_grove_match
from .match_mono import TreeMatch, run_tree_match
from .mw_search import build_expert_index, run_tree_search
from .oracles import opt_matching_cost, opt_search_cost
from .pricing import (build_partition_distribution, price_partition, random_monotone_pi,
                      verify_marginals)
from .rng import make_rng, resolve_seed
from .verify import (check_distortion, check_jump_bound, check_monotonicity,
                     estimate_occupancy, sweep_marginals)

# one stream key per subcommand, so subcommands never share coins
STREAMS = {"build-grove": 1, "run-search": 2, "run-match": 3, "run-grove": 4, "price": 5,
           "verify": 6, "gen": 7, "experiment": 8}


def _auto_real(text: str):
    if text == "auto":
        return None
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'auto' or a number, got {text!r}") from None


def _u64(text: str) -> int:
    x = int(text)
    if not 0 <= x < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return x


def _positive(text: str) -> int:
    x = int(text)
    if x < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return x


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


def kv(**items) -> str:
    return " ".join(f"{k}={_fmt(v)}" for k, v in items.items())


# -- subcommands ---------------------------------------------------------------

def cmd_build_grove(args, rng, out):
    doc = formats.load(args.file)
    tree = doc.tree
    alpha, eps = grove_parameters(tree, args.alpha, args.epsilon)
    g = build_grove(tree, alpha, rng)
    out.append(kv(n=tree.n, Delta=g.Delta, alpha=alpha, epsilon=eps,
                  depth=max(node.depth for node in g.nodes()),
                  max_hops=max(node.max_hops() for node in g.nodes())))
    out.extend(g.dump())


def cmd_run_search(args, rng, out):
    inst = formats.load(args.file).search_instance()
    _, eps = grove_parameters(inst.tree, args.alpha, args.epsilon)
    tr = run_tree_search(inst, eps, rng)
    out.extend(tr.lines())
    opt = opt_search_cost(inst)
    out.append(kv(epsilon=eps, H=tr.H, d=tr.d, prologue_jumps=tr.prologue_jumps,
                  core_jumps=tr.core_jumps, distance=tr.total_distance, opt=opt,
                  survivor=inst.survivor, final_car=tr.final_car))


def _match_doc(args):
    doc = formats.load(args.file)
    if not doc.servers:
        raise formats.FormatError("matching instance needs 'server' lines")
    return doc


def cmd_run_match(args, rng, out):
    doc = _match_doc(args)
    _, eps = grove_parameters(doc.tree, args.alpha, args.epsilon)
    res = run_tree_match(doc.tree, doc.servers, doc.requests, eps, rng)
    out.extend(res.lines())
    out.append(kv(epsilon=eps, opt=opt_matching_cost(doc.tree, doc.servers, doc.requests)))


def cmd_run_grove(args, rng, out):
    doc = _match_doc(args)
    alpha, eps = grove_parameters(doc.tree, args.alpha, args.epsilon)
    res = run_grove_match(doc.tree, doc.servers, doc.requests, rng, alpha, eps)
    out.extend(res.lines())
    out.append(kv(alpha=alpha, epsilon=eps,
                  opt=opt_matching_cost(doc.tree, doc.servers, doc.requests)))


def cmd_price(args, rng, out):
    doc = _match_doc(args)
    pi = doc.pi_matrix()
    dist = build_partition_distribution(doc.tree, doc.servers, pi)
    rep = verify_marginals(dist, pi)
    out.append(kv(partitions=len(dist.entries), marginal_error=rep.max_error,
                  marginals_ok=int(rep.passed)))
    for part, p in dist.entries:
        out.extend(part.lines(p))
        prices = price_partition(doc.tree, doc.servers, part)
        out.append("prices " + " ".join(f"{i}={'inf' if not np.isfinite(x) else _fmt(float(x))}"
                                        for i, x in enumerate(prices)))


def cmd_verify(args, rng, out):
    doc = formats.load(args.file)
    tree = doc.tree
    chosen = [f for f in ("occupancy", "jumps", "monotone", "distortion", "marginals")
              if getattr(args, f)]
    if not chosen:
        raise SystemExit("verify: pick at least one of --occupancy --jumps --monotone "
                         "--distortion --marginals")
    ok = True
    alpha, eps = grove_parameters(tree, args.alpha, args.epsilon)
    if args.occupancy:
        rep = estimate_occupancy(doc.search_instance(), eps, args.trials or 100_000, rng)
        out.extend(rep.lines())
        ok &= rep.passed
    if args.jumps:
        rep = check_jump_bound(doc.search_instance(), eps, args.trials or 20_000, rng)
        out.extend(rep.lines())
        ok &= rep.passed
    if args.monotone:
        doc = _match_doc(args)
        g = build_grove(tree, alpha, rng)
        for name, algo in (("tree_match", TreeMatch(tree, doc.servers, eps)),
                           ("grove_match", GroveMatch(g, doc.servers, eps))):
            for step in range(len(doc.requests) + 1):
                if algo.count.sum() == 0:
                    break
                exact = check_monotonicity(algo, tree)
                out.append(f"{name} step={step} " + exact.lines()[0])
                ok &= exact.passed
                if args.trials:
                    mc = check_monotonicity(algo, tree, rng, trials=args.trials, exact=False)
                    out.append(f"{name} step={step} " + mc.lines()[0])
                    ok &= mc.passed
                if step < len(doc.requests):
                    algo.serve(doc.requests[step], rng)
    if args.distortion:
        rep = check_distortion(tree, alpha, args.trials or 1000, rng)
        out.extend(rep.lines())
        ok &= rep.passed
    if args.marginals:
        doc = _match_doc(args)
        if doc.pi:
            cases = [(tree, doc.servers, doc.pi_matrix())]
        else:
            cases = [(tree, doc.servers, random_monotone_pi(tree, doc.servers, rng))
                     for _ in range(args.trials or 50)]
        rep = sweep_marginals(cases, rng)
        out.extend(rep.lines())
        ok &= rep.passed
    out.append(f"result checks={','.join(chosen)} seed={args.seed} pass={int(ok)}")
    return 0 if ok else 1


def cmd_gen(args, rng, out):
    tree = gen_random_tree(args.n, rng, args.weights, args.delta)
    if args.kind == "tree":
        out.extend(formats.tree_lines(tree))
    elif args.kind == "search":
        out.extend(formats.search_lines(gen_search_instance(tree, rng, args.spots, distinct=True)))
    else:
        k = args.k if args.k is not None else tree.n
        m = args.m if args.m is not None else k
        servers, requests = gen_match_instance(tree, k, m, rng)
        out.extend(formats.match_lines(tree, servers, requests))


def cmd_experiment(args, rng, out):
    cfg = ExperimentConfig(seed=args.seed, trials=args.trials or 20, instances=args.instances,
                           n=args.n, Delta=args.delta, alpha=args.alpha, epsilon=args.epsilon)
    rep = run_experiment(cfg)
    out.extend(rep.lines())
    return 0 if rep.passed else 1


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_u64, default=None,
                        help="random seed (default: $PARKMATCH_SEED, then 0)")
    common.add_argument("--alpha", type=_auto_real, default=None, metavar="auto|REAL")
    common.add_argument("--epsilon", type=_auto_real, default=None, metavar="auto|REAL")
    common.add_argument("--trials", type=_positive, default=None)

    p = argparse.ArgumentParser(prog="parkmatch", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help, file=True):
        sp = sub.add_parser(name, parents=[common], help=help)
        if file:
            sp.add_argument("file", help="instance file")
        sp.set_defaults(fn=fn)
        return sp

    add("build-grove", cmd_build_grove, "build a random grove and dump it")
    add("run-search", cmd_run_search, "run TreeSearch on a search instance")
    add("run-match", cmd_run_match, "run TreeMatch on a matching instance")
    add("run-grove", cmd_run_grove, "run GroveMatch on a matching instance")
    add("price", cmd_price, "compile a one-step matching law into posted prices")
    v = add("verify", cmd_verify, "check guarantees on an instance")
    for flag in ("occupancy", "jumps", "monotone", "distortion", "marginals"):
        v.add_argument(f"--{flag}", action="store_true")
    g = add("gen", cmd_gen, "generate a random instance", file=False)
    g.add_argument("kind", choices=("tree", "search", "match"))
    g.add_argument("--n", type=_positive, default=12)
    g.add_argument("--delta", type=float, default=64.0)
    g.add_argument("--weights", choices=("unit", "uniform", "loguniform"), default="loguniform")
    g.add_argument("--spots", type=_positive, default=None)
    g.add_argument("--k", type=_positive, default=None, help="servers")
    g.add_argument("--m", type=int, default=None, help="requests")
    e = add("experiment", cmd_experiment, "GroveMatch competitive ratios on random instances",
            file=False)
    e.add_argument("--instances", type=_positive, default=20)
    e.add_argument("--n", type=_positive, default=40)
    e.add_argument("--delta", type=float, default=256.0)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args.seed = resolve_seed(args.seed)
    rng = make_rng(args.seed, STREAMS[args.command])
    out: list[str] = []
    try:
        code = args.fn(args, rng, out) or 0
    except (ValueError, RuntimeError) as e:
        sys.stdout.write(formats.dumps(out) if out else "")
        print(f"error: {e}", file=sys.stderr)
        return 2
    sys.stdout.write(formats.dumps(out))
    return code


if __name__ == "__main__":
    sys.exit(main())
