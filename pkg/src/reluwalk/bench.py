"""Benchmark harness: experiment specs, grid-search calibration with voting,
campaign execution, and performance profiles.

An experiment fixes (input size, depth, width, seed, algorithm, budget);
the network is generated from the seed and the algorithm is run over the
unit box. Gradient algorithms are calibrated by running every point of a
(gamma, xi, k) grid on a few grid-seed networks, keeping each seed's top
combinations, and electing the combination that appears most often.

Profiles compare algorithms across problems. Because runs maximize f and
values can be negative, each result is first converted to the cost
(best-of-problem - value + eta) with a small positive shift eta; the profile
ratio is the usual cost over the problem's minimal cost, so the best
algorithm on a problem gets ratio 1 and rho(tau) is the fraction of problems
with ratio at most tau.
"""

from __future__ import annotations

import concurrent.futures
import csv
import itertools
import json
import logging
import math
import os
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

from .network import Box, random_network
from .optimizers import OptimizerConfig, run_algorithm, write_trace_csv

__all__ = [
    "Budget",
    "ExperimentSpec",
    "GridSearchPlan",
    "GridSearchResult",
    "ProfileCurve",
    "CampaignConfig",
    "RESULTS_HEADER",
    "run_experiment",
    "grid_search",
    "vote_top_combinations",
    "performance_profile",
    "emit_profile",
    "load_campaign",
    "run_campaign",
    "read_results_table",
]

log = logging.getLogger("reluwalk.bench")

GRADIENT_ALGORITHMS = ("pga", "ppga", "ppga-lr")
ALGORITHM_NAMES = GRADIENT_ALGORITHMS + ("lp-walk",)

# Default calibration grid and seeds.
DEFAULT_GRID_GAMMAS = (0.001, 0.01, 0.1, 1.0, 5.0)
DEFAULT_GRID_XIS = (0.2, 2.0, 20.0)
DEFAULT_GRID_KS = (100, 500, 1000)
DEFAULT_GRID_SEEDS = (5, 6, 7, 8, 9)

RESULTS_HEADER = [
    "n0", "depth", "width", "seed", "algorithm",
    "gamma", "xi", "epsilon", "k", "budget_s", "best_value", "iterations",
]


@dataclass(frozen=True)
class Budget:
    """Per-run budget: wall seconds, an iteration count, or both."""

    time_s: float | None = None
    iterations: int | None = None

    def __post_init__(self):
        if self.time_s is None and self.iterations is None:
            raise ValueError("budget needs time_s or iterations")

    @classmethod
    def from_dict(cls, data):
        return cls(time_s=data.get("time_s"), iterations=data.get("iterations"))


@dataclass(frozen=True)
class ExperimentSpec:
    n0: int
    depth: int
    width: int
    seed: int
    algorithm: str
    hyperparameters: dict = field(default_factory=dict)
    budget: Budget = Budget(time_s=60.0)

    def __post_init__(self):
        if self.algorithm not in ALGORITHM_NAMES:
            raise ValueError(
                f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHM_NAMES}"
            )
        if min(self.n0, self.depth, self.width) < 1:
            raise ValueError("n0, depth, and width must be positive")
        if self.algorithm in GRADIENT_ALGORITHMS and "gamma" not in self.hyperparameters:
            raise ValueError(f"{self.algorithm} needs a gamma hyperparameter")


def _config_for(spec):
    hp = spec.hyperparameters
    return OptimizerConfig(
        gamma=float(hp.get("gamma", 1.0)),
        xi=float(hp.get("xi", 2.0)),
        epsilon=float(hp.get("epsilon", 1e-3)),
        k=int(hp.get("k", 100)),
        time_limit=spec.budget.time_s,
        iteration_limit=spec.budget.iterations,
        seed=spec.seed,
    )


def run_experiment(spec, trace_path=None):
    """Generate the network from the spec's seed, run the algorithm over the
    unit box, optionally write the trace CSV, and return the RunResult."""
    net = random_network(spec.n0, spec.depth, spec.width, spec.seed)
    box = Box.unit(spec.n0)
    result = run_algorithm(spec.algorithm, net, box, _config_for(spec))
    if trace_path is not None:
        write_trace_csv(result.trace, trace_path)
    return result


@dataclass(frozen=True)
class GridSearchPlan:
    gammas: tuple = DEFAULT_GRID_GAMMAS
    xis: tuple = DEFAULT_GRID_XIS
    ks: tuple = DEFAULT_GRID_KS
    grid_seeds: tuple = DEFAULT_GRID_SEEDS
    budget: Budget = Budget(time_s=300.0)
    top_count: int = 5

    def __post_init__(self):
        if not (self.gammas and self.xis and self.ks):
            raise ValueError("the grid must contain at least one point")
        if not self.grid_seeds:
            raise ValueError("at least one grid seed is required")
        if self.top_count < 1:
            raise ValueError("top_count must be positive")

    def combinations(self):
        """All (gamma, xi, k) grid points, in lexicographic order."""
        return list(itertools.product(self.gammas, self.xis, self.ks))

    @classmethod
    def from_dict(cls, data):
        kwargs = {}
        for name in ("gammas", "xis", "ks", "grid_seeds"):
            if name in data:
                kwargs[name] = tuple(data[name])
        if "budget" in data:
            kwargs["budget"] = Budget.from_dict(data["budget"])
        if "top_count" in data:
            kwargs["top_count"] = int(data["top_count"])
        return cls(**kwargs)


@dataclass(frozen=True)
class GridSearchResult:
    gamma: float
    xi: float
    k: int
    appearances: int
    top_lists: tuple
    mean_values: dict

    @property
    def combination(self):
        return (self.gamma, self.xi, self.k)


def vote_top_combinations(top_lists, mean_values):
    """Elect the combination appearing in the most top lists.

    Ties break by higher mean value, then by ascending combination order.
    """
    counts = {}
    for top in top_lists:
        for combo in top:
            counts[combo] = counts.get(combo, 0) + 1
    if not counts:
        raise ValueError("no combinations were ranked")
    best = min(
        counts,
        key=lambda combo: (-counts[combo], -mean_values.get(combo, -math.inf), combo),
    )
    return best, counts[best]


def _default_grid_runner(dims, seed, algorithm, combo, budget):
    gamma, xi, k = combo
    spec = ExperimentSpec(
        n0=dims[0], depth=dims[1], width=dims[2], seed=seed, algorithm=algorithm,
        hyperparameters={"gamma": gamma, "xi": xi, "k": k},
        budget=budget,
    )
    return run_experiment(spec).best_value


def grid_search(plan, dims, algorithm, run_fn=None):
    """Grid-search-and-vote calibration for one (n0, depth, width) setup.

    run_fn(dims, seed, algorithm, combo, budget) -> final best value; the
    default builds and runs the real experiment. Injectable so protocol tests
    can substitute a stub.
    """
    if algorithm not in GRADIENT_ALGORITHMS:
        raise ValueError(f"grid search applies to gradient algorithms, not {algorithm!r}")
    if run_fn is None:
        run_fn = _default_grid_runner
    combos = plan.combinations()
    scores_by_seed = {}
    top_lists = []
    for seed in plan.grid_seeds:
        scores = {}
        for combo in combos:
            scores[combo] = float(run_fn(dims, seed, algorithm, combo, plan.budget))
        scores_by_seed[seed] = scores
        ranked = sorted(combos, key=lambda cb: (-scores[cb], cb))
        top_lists.append(tuple(ranked[: plan.top_count]))
        log.info("grid seed %s: best combo %s", seed, ranked[0])
    mean_values = {
        combo: float(np.mean([scores_by_seed[s][combo] for s in plan.grid_seeds]))
        for combo in combos
    }
    chosen, appearances = vote_top_combinations(top_lists, mean_values)
    return GridSearchResult(
        gamma=chosen[0], xi=chosen[1], k=chosen[2],
        appearances=appearances, top_lists=tuple(top_lists), mean_values=mean_values,
    )


@dataclass(frozen=True)
class ProfileCurve:
    """Nondecreasing fraction-of-problems curve rho(tau) for one algorithm."""

    algorithm: str
    points: tuple  # ((tau, rho), ...) with tau >= 1 ascending


def performance_profile(results, eta_rel=1e-6):
    """Profile curves from final best values.

    results maps problem -> {algorithm: value}. Values are maximization
    results; they are converted to the shifted optimality gap described in
    the module docstring. Missing or non-finite entries get ratio +inf and
    never count toward any finite tau.
    """
    problems = sorted(results, key=repr)
    if not problems:
        raise ValueError("no problems given")
    algorithms = sorted({a for vals in results.values() for a in vals})
    ratios = {algo: [] for algo in algorithms}
    for problem in problems:
        vals = {a: v for a, v in results[problem].items() if v is not None and np.isfinite(v)}
        if not vals:
            raise ValueError(f"problem {problem!r} has no finite result")
        f_star = max(vals.values())
        eta = max(eta_rel * abs(f_star), 1e-12)
        costs = {a: f_star - v + eta for a, v in vals.items()}
        c_min = min(costs.values())
        for algo in algorithms:
            ratios[algo].append(costs[algo] / c_min if algo in costs else np.inf)
    n = len(problems)
    curves = []
    for algo in algorithms:
        r = np.asarray(ratios[algo])
        finite = np.unique(r[np.isfinite(r)])
        taus = [1.0] + [float(t) for t in finite if t > 1.0]
        points = tuple((tau, float(np.count_nonzero(r <= tau) / n)) for tau in taus)
        curves.append(ProfileCurve(algo, points))
    return curves


_SVG_COLORS = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b")


def _profile_svg(curves, width=640, height=440):
    ml, mr, mt, mb = 62, 160, 20, 48
    pw, ph = width - ml - mr, height - mt - mb
    tau_max = max((pt[0] for c in curves for pt in c.points), default=1.0)
    tau_max = max(tau_max, 10.0)
    log_max = math.log10(tau_max)

    def xpos(tau):
        return ml + pw * (math.log10(max(tau, 1.0)) / log_max)

    def ypos(rho):
        return mt + ph * (1.0 - rho)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="white" stroke="#333"/>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = ypos(frac)
        parts.append(f'<line x1="{ml}" y1="{y:.1f}" x2="{ml + pw}" y2="{y:.1f}" '
                     'stroke="#ddd" stroke-width="1"/>')
        parts.append(f'<text x="{ml - 8}" y="{y + 4:.1f}" text-anchor="end">{frac:g}</text>')
    decade = 0
    while 10 ** decade <= tau_max:
        x = xpos(10 ** decade)
        parts.append(f'<line x1="{x:.1f}" y1="{mt}" x2="{x:.1f}" y2="{mt + ph}" '
                     'stroke="#ddd" stroke-width="1"/>')
        label = "1" if decade == 0 else f"1e{decade}"
        parts.append(f'<text x="{x:.1f}" y="{mt + ph + 16}" text-anchor="middle">{label}</text>')
        decade += 1
    parts.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">'
                 'performance factor tau (log scale)</text>')
    parts.append(f'<text x="16" y="{mt + ph / 2:.1f}" text-anchor="middle" '
                 f'transform="rotate(-90 16 {mt + ph / 2:.1f})">fraction of problems</text>')
    for idx, curve in enumerate(curves):
        color = _SVG_COLORS[idx % len(_SVG_COLORS)]
        pts = []
        prev_rho = None
        for tau, rho in curve.points:
            x = xpos(tau)
            if prev_rho is not None:
                pts.append(f"{x:.2f},{ypos(prev_rho):.2f}")
            pts.append(f"{x:.2f},{ypos(rho):.2f}")
            prev_rho = rho
        if prev_rho is not None:
            pts.append(f"{ml + pw},{ypos(prev_rho):.2f}")
        parts.append(f'<polyline points="{" ".join(pts)}" fill="none" '
                     f'stroke="{color}" stroke-width="2"/>')
        ly = mt + 16 + 18 * idx
        lx = ml + pw + 12
        parts.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 24}" y2="{ly}" '
                     f'stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{lx + 30}" y="{ly + 4}">{escape(curve.algorithm)}</text>')
    parts.append("</svg>")
    return "\n".join(parts)


def emit_profile(curves, fmt, path):
    """Write curves as CSV (algorithm,tau,rho) or as an SVG line chart."""
    if not curves:
        raise ValueError("no curves to emit")
    if fmt == "csv":
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["algorithm", "tau", "rho"])
            for curve in curves:
                for tau, rho in curve.points:
                    writer.writerow([curve.algorithm, repr(tau), repr(rho)])
    elif fmt == "svg":
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(_profile_svg(curves))
    else:
        raise ValueError(f"unknown profile format {fmt!r}; use 'csv' or 'svg'")
    return path


@dataclass(frozen=True)
class CampaignConfig:
    configs: tuple           # ((n0, depth, width), ...)
    seeds: tuple
    algorithms: tuple
    budget: Budget
    output_dir: str
    hyperparameters: dict = field(default_factory=dict)  # algorithm -> hp dict
    grid: GridSearchPlan | None = None


def load_campaign(path):
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    try:
        configs = tuple(
            (int(c["n0"]), int(c["depth"]), int(c["width"])) for c in data["configs"]
        )
        seeds = tuple(int(s) for s in data["seeds"])
        algorithms = tuple(data["algorithms"])
        budget = Budget.from_dict(data["budget"])
        output_dir = data["output_dir"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed campaign config: {exc}") from None
    for algo in algorithms:
        if algo not in ALGORITHM_NAMES:
            raise ValueError(f"unknown algorithm {algo!r} in campaign config")
    grid = GridSearchPlan.from_dict(data["grid"]) if "grid" in data else None
    return CampaignConfig(
        configs=configs,
        seeds=seeds,
        algorithms=algorithms,
        budget=budget,
        output_dir=output_dir,
        hyperparameters={k: dict(v) for k, v in data.get("hyperparameters", {}).items()},
        grid=grid,
    )


def _run_campaign_task(spec, trace_path):
    result = run_experiment(spec, trace_path=trace_path)
    return spec, result.best_value, result.iterations


def _result_row(spec, best_value, iterations):
    hp = spec.hyperparameters
    is_gradient = spec.algorithm in GRADIENT_ALGORITHMS
    return {
        "n0": spec.n0,
        "depth": spec.depth,
        "width": spec.width,
        "seed": spec.seed,
        "algorithm": spec.algorithm,
        "gamma": hp.get("gamma", "") if is_gradient else "",
        "xi": hp.get("xi", "") if is_gradient else "",
        "epsilon": hp.get("epsilon", 1e-3) if is_gradient else "",
        "k": hp.get("k", "") if is_gradient else "",
        "budget_s": "" if spec.budget.time_s is None else spec.budget.time_s,
        "best_value": repr(float(best_value)),
        "iterations": iterations,
    }


def run_campaign(campaign, workers=1):
    """Execute every (config, seed, algorithm) experiment of the campaign.

    Writes results.csv plus one trace CSV per run under output_dir and
    returns the result rows. Hyperparameters come from the campaign's
    explicit hyperparameter map when present, otherwise from grid search
    (gradient algorithms only).
    """
    os.makedirs(campaign.output_dir, exist_ok=True)
    trace_dir = os.path.join(campaign.output_dir, "traces")
    os.makedirs(trace_dir, exist_ok=True)

    chosen_hp = {}
    for algo in campaign.algorithms:
        if algo == "lp-walk":
            continue
        for dims in campaign.configs:
            key = (algo, dims)
            if algo in campaign.hyperparameters:
                chosen_hp[key] = dict(campaign.hyperparameters[algo])
            elif campaign.grid is not None:
                log.info("grid search for %s on %s", algo, dims)
                found = grid_search(campaign.grid, dims, algo)
                chosen_hp[key] = {"gamma": found.gamma, "xi": found.xi, "k": found.k}
            else:
                raise ValueError(
                    f"no hyperparameters and no grid plan for {algo!r}"
                )

    tasks = []
    for dims in campaign.configs:
        for seed in campaign.seeds:
            for algo in campaign.algorithms:
                hp = chosen_hp.get((algo, dims), {})
                spec = ExperimentSpec(
                    n0=dims[0], depth=dims[1], width=dims[2], seed=seed,
                    algorithm=algo, hyperparameters=hp, budget=campaign.budget,
                )
                trace_name = f"{dims[0]}x{dims[1]}x{dims[2]}_s{seed}_{algo}.csv"
                tasks.append((spec, os.path.join(trace_dir, trace_name)))

    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_campaign_task, *zip(*tasks)))
    else:
        outcomes = [_run_campaign_task(spec, path) for spec, path in tasks]

    rows = [_result_row(spec, value, iters) for spec, value, iters in outcomes]
    results_path = os.path.join(campaign.output_dir, "results.csv")
    with open(results_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=RESULTS_HEADER)
        writer.writeheader()
        writer.writerows(rows)
    return rows, results_path


def read_results_table(path):
    """Results CSV -> {problem key: {algorithm: best value}} for profiling."""
    table = {}
    with open(path, "r", newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            problem = (row["n0"], row["depth"], row["width"], row["seed"])
            table.setdefault(problem, {})[row["algorithm"]] = float(row["best_value"])
    return table
