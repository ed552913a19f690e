"""Command-line interface.

Subcommands: gen, opt, gridsearch, bench, profile, oracle, regions, verify.
Machine output is JSON on stdout (CSV/SVG files where documented). Exit
codes: 0 success, 1 usage error, 2 runtime failure. Set RELUWALK_LOG to a
level name (DEBUG, INFO, ...) to enable logging.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import secrets
import sys

import numpy as np

from . import bench as bench_mod
from .lp import LpSolverFailure
from .network import (
    Box,
    forward,
    gradient,
    load_box,
    load_network,
    project_box,
    random_network,
    sample_uniform,
    save_network,
    activation_pattern,
)
from .optimizers import ALGORITHMS, OptimizerConfig, run_algorithm, write_trace_csv
from .oracle import enumerate_optimum, finite_diff_gradient
from .region import ratio_test, region_affine, region_halfspaces

log = logging.getLogger("reluwalk.cli")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on bad flags; the documented contract is 1
    def error(self, message):
        raise _UsageError(message)


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _positive_float(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def _nonnegative_int(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {text}")
    return value


def _vector(text):
    try:
        return np.array([float(part) for part in text.split(",") if part.strip() != ""])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _emit(payload):
    print(json.dumps(payload))


def _load_net_box(args):
    net = load_network(args.net, strict=getattr(args, "strict", False))
    if getattr(args, "box", None):
        box = load_box(args.box)
        if box.dim != net.input_dim:
            raise ValueError("box dimension does not match the network input")
    else:
        box = Box.unit(net.input_dim)
    return net, box


def _resolve_seed(args):
    if args.seed is not None:
        return args.seed
    seed = secrets.randbelow(2**31)
    print(f"generated seed: {seed}", file=sys.stderr)
    return seed


def cmd_gen(args):
    net = random_network(args.n0, args.depth, args.width, args.seed)
    save_network(net, args.out)
    _emit({"out": args.out, "parameters": net.parameter_count,
           "hidden_neurons": net.hidden_neuron_count, "seed": args.seed})
    return EXIT_OK


def cmd_opt(args):
    net, box = _load_net_box(args)
    seed = _resolve_seed(args)
    cfg = OptimizerConfig(
        gamma=args.gamma, xi=args.xi, epsilon=args.epsilon, k=args.k,
        time_limit=args.time, iteration_limit=args.iters, seed=seed,
        stall_reset=args.stall_reset,
    )
    result = run_algorithm(args.algo, net, box, cfg)
    if args.trace_out:
        write_trace_csv(result.trace, args.trace_out)
    _emit({
        "algorithm": args.algo,
        "seed": seed,
        "best_value": result.best_value,
        "best_point": result.best_point.tolist(),
        "iterations": result.iterations,
        "resets": result.resets,
    })
    return EXIT_OK


def cmd_gridsearch(args):
    with open(args.config, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    try:
        dims = (int(data["n0"]), int(data["depth"]), int(data["width"]))
        algorithm = data["algorithm"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed grid search config: {exc}") from None
    plan = bench_mod.GridSearchPlan.from_dict(data)
    found = bench_mod.grid_search(plan, dims, algorithm)
    _emit({
        "algorithm": algorithm,
        "gamma": found.gamma,
        "xi": found.xi,
        "k": found.k,
        "appearances": found.appearances,
        "grid_points": len(plan.combinations()),
        "grid_seeds": list(plan.grid_seeds),
    })
    return EXIT_OK


def cmd_bench(args):
    campaign = bench_mod.load_campaign(args.config)
    rows, results_path = bench_mod.run_campaign(campaign, workers=args.workers)
    _emit({"experiments": len(rows), "results": results_path})
    return EXIT_OK


def cmd_profile(args):
    table = bench_mod.read_results_table(args.results)
    curves = bench_mod.performance_profile(table)
    fmt = "svg" if args.out.lower().endswith(".svg") else "csv"
    bench_mod.emit_profile(curves, fmt, args.out)
    _emit({"out": args.out, "format": fmt,
           "algorithms": [c.algorithm for c in curves], "problems": len(table)})
    return EXIT_OK


def cmd_oracle(args):
    net, box = _load_net_box(args)
    best = enumerate_optimum(net, box, max_neurons=args.max_neurons)
    _emit({
        "value": best.value,
        "point": best.point.tolist(),
        "feasible_regions": best.feasible_regions,
        "patterns_enumerated": best.patterns_enumerated,
    })
    return EXIT_OK


def cmd_regions(args):
    net, box = _load_net_box(args)
    x = project_box(box, args.x)
    pattern = activation_pattern(net, x)
    affine = region_affine(net, pattern)
    halfspaces = region_halfspaces(net, pattern)
    rt = ratio_test(net, x)
    _emit({
        "x": x.tolist(),
        "f": forward(net, x).output,
        "pattern": [layer.astype(int).tolist() for layer in pattern.layers],
        "affine": {"T": affine.T.tolist(), "t": affine.t},
        "halfspaces": [
            {"a": hs.a.tolist(), "b": hs.b, "sense": hs.sense} for hs in halfspaces
        ],
        "ratio_test": {
            "u": rt.u if np.isfinite(rt.u) else None,
            "blocking_neuron": rt.blocking_neuron,
        },
    })
    return EXIT_OK


def _verify_checks(net, box, samples, rng):
    results = []

    def check(name, passed, detail):
        results.append({"check": name, "passed": bool(passed), "detail": detail})

    worst_grad = 0.0
    worst_lin = 0.0
    worst_boundary = 0.0
    worst_proj = 0.0
    all_finite = True
    margin = 1e-4
    for _ in range(samples):
        x = sample_uniform(box, rng)
        # gradient vs central differences, away from region boundaries
        trace = forward(net, x)
        if not (np.isfinite(trace.output) and np.all(np.isfinite(gradient(net, x)))):
            all_finite = False
            continue
        min_pre = min(float(np.min(np.abs(g))) for g in trace.preactivations)
        if min_pre > margin:
            g = gradient(net, x)
            fd = finite_diff_gradient(net, x)
            rel = float(np.linalg.norm(fd - g) / max(np.linalg.norm(g), 1e-12))
            worst_grad = max(worst_grad, rel)
        # linearity inside the region found by the ratio test
        g = gradient(net, x)
        rt = ratio_test(net, x)
        if np.isfinite(rt.u) and rt.u > 0:
            alpha = 0.5 * rt.u
            predicted = trace.output + alpha * float(g @ g)
            actual = forward(net, x + alpha * g).output
            worst_lin = max(worst_lin, abs(predicted - actual))
            boundary = forward(net, x + rt.u * g)
            min_abs = min(float(np.min(np.abs(p))) for p in boundary.preactivations)
            worst_boundary = max(worst_boundary, min_abs)
        # projection idempotence
        y = x + rng.normal(0.0, box.diagonal() + 1.0, size=box.dim)
        p = project_box(box, y)
        worst_proj = max(worst_proj, float(np.max(np.abs(project_box(box, p) - p))))

    vacuous = samples == 0
    if vacuous:
        print("warning: --samples 0 makes every check vacuous", file=sys.stderr)
    check("finite_evaluations", vacuous or all_finite,
          "f and grad f finite at every sample" if all_finite
          else "non-finite network evaluation")
    check("gradient_vs_finite_differences", vacuous or worst_grad < 1e-6,
          f"worst relative error {worst_grad:.3e}")
    check("region_linearity", vacuous or worst_lin < 1e-9,
          f"worst absolute error {worst_lin:.3e}")
    check("ratio_test_boundary", vacuous or worst_boundary < 1e-6,
          f"worst boundary preactivation {worst_boundary:.3e}")
    check("projection_idempotent", vacuous or worst_proj == 0.0,
          f"worst reprojection delta {worst_proj:.3e}")
    return results


def cmd_verify(args):
    net, box = _load_net_box(args)
    seed = _resolve_seed(args)
    rng = np.random.default_rng(seed)
    results = _verify_checks(net, box, args.samples, rng)
    passed = all(r["passed"] for r in results)
    _emit({"passed": passed, "samples": args.samples, "seed": seed, "checks": results})
    return EXIT_OK if passed else EXIT_RUNTIME


def build_parser():
    parser = _Parser(prog="reluwalk",
                     description="Maximize a ReLU network's output over a box")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a random network JSON file")
    p.add_argument("--n0", type=_positive_int, required=True)
    p.add_argument("--depth", type=_positive_int, required=True)
    p.add_argument("--width", type=_positive_int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("opt", help="run one optimizer on a network")
    p.add_argument("--net", required=True)
    p.add_argument("--box", help="box JSON; defaults to the unit box")
    p.add_argument("--algo", choices=sorted(ALGORITHMS), required=True)
    p.add_argument("--gamma", type=_positive_float, default=0.1)
    p.add_argument("--xi", type=float, default=2.0)
    p.add_argument("--epsilon", type=float, default=1e-3)
    p.add_argument("--k", type=_positive_int, default=100)
    p.add_argument("--time", type=_positive_float, help="time limit in seconds")
    p.add_argument("--iters", type=_positive_int, help="iteration limit")
    p.add_argument("--seed", type=int)
    p.add_argument("--stall-reset", action="store_true")
    p.add_argument("--trace-out")
    p.set_defaults(func=cmd_opt)

    p = sub.add_parser("gridsearch", help="grid-search-and-vote calibration")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_gridsearch)

    p = sub.add_parser("bench", help="run a benchmark campaign")
    p.add_argument("--config", required=True)
    p.add_argument("--workers", type=_positive_int, default=1)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("profile", help="performance profile from a results CSV")
    p.add_argument("--results", required=True)
    p.add_argument("--out", required=True, help="output path (.csv or .svg)")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("oracle", help="exact optimum by region enumeration")
    p.add_argument("--net", required=True)
    p.add_argument("--box")
    p.add_argument("--max-neurons", type=_positive_int, default=20)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("regions", help="inspect the linear region at a point")
    p.add_argument("--net", required=True)
    p.add_argument("--box")
    p.add_argument("--x", type=_vector, required=True,
                   help="comma-separated coordinates")
    p.set_defaults(func=cmd_regions)

    p = sub.add_parser("verify", help="sample-based self checks")
    p.add_argument("--net", required=True)
    p.add_argument("--box")
    p.add_argument("--samples", type=_nonnegative_int, default=50)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv=None):
    level = os.environ.get("RELUWALK_LOG")
    if level:
        logging.basicConfig(level=getattr(logging, level.upper(), logging.INFO))
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError, json.JSONDecodeError, LpSolverFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
