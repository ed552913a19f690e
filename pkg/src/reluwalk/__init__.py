"""Maximize the scalar output of a ReLU feed-forward network over a box.

The toolkit bundles the network/region machinery, a small dense LP solver,
four local-search algorithms (pga, ppga, ppga-lr, lp-walk), an exact
enumeration oracle for tiny networks, and a benchmark harness with
grid-search calibration and performance profiles.
"""

from .network import (
    ActivationPattern,
    Box,
    ForwardTrace,
    Network,
    activation_pattern,
    forward,
    gradient,
    gradient_for_pattern,
    load_box,
    load_network,
    pattern_from_trace,
    project_box,
    random_network,
    sample_uniform,
    save_box,
    save_network,
)
from .region import (
    AffineMap,
    RatioTest,
    neuron_affines,
    ratio_test,
    region_affine,
    region_halfspaces,
)
from .lp import (
    FEASIBILITY_TOL,
    Halfspace,
    LinearProgram,
    LpOutcome,
    LpSolverFailure,
    LpStatus,
    solve_lp,
)
from .optimizers import (
    ALGORITHMS,
    OptimizerConfig,
    RunResult,
    TraceRow,
    ValveParams,
    lp_walk,
    pga,
    pga_step,
    ppga,
    ppga_lr,
    run_algorithm,
    valve_step,
    write_trace_csv,
)
from .oracle import (
    GlobalOptimum,
    enumerate_optimum,
    finite_diff_gradient,
    forward_batch,
    grid_optimum,
)
from .bench import (
    RESULTS_HEADER,
    Budget,
    CampaignConfig,
    ExperimentSpec,
    GridSearchPlan,
    GridSearchResult,
    ProfileCurve,
    emit_profile,
    grid_search,
    load_campaign,
    performance_profile,
    read_results_table,
    run_campaign,
    run_experiment,
    vote_top_combinations,
)

__version__ = "0.1.0"
