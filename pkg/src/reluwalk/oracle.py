"""Ground-truth machinery for tiny networks.

enumerate_optimum finds the exact global maximum over a box by solving one
LP per activation pattern; the closures of all regions cover the box, so the
best feasible region LP is the true optimum. grid_optimum and
finite_diff_gradient are cheap independent cross-checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lp import LinearProgram, LpStatus, solve_lp
from .network import ActivationPattern, forward
from .region import region_affine, region_halfspaces

__all__ = [
    "GlobalOptimum",
    "enumerate_optimum",
    "grid_optimum",
    "finite_diff_gradient",
    "forward_batch",
]

MAX_ENUMERATION_NEURONS = 20


@dataclass(frozen=True)
class GlobalOptimum:
    value: float
    point: np.ndarray
    feasible_regions: int
    patterns_enumerated: int


def enumerate_optimum(net, box, max_neurons=MAX_ENUMERATION_NEURONS):
    """Exact global maximum of f over the box by full pattern enumeration.

    Every one of the 2**N activation patterns (N hidden neurons) yields an LP
    over the closed region intersected with the box; infeasible patterns are
    skipped. Refuses to run when N exceeds max_neurons.
    """
    n_bits = net.hidden_neuron_count
    if n_bits > max_neurons:
        raise ValueError(
            f"{n_bits} hidden neurons exceed the enumeration cap of "
            f"{max_neurons}; raise max_neurons explicitly to proceed"
        )
    if box.dim != net.input_dim:
        raise ValueError("box dimension does not match the network input")
    widths = net.layer_widths
    best_value = -np.inf
    best_point = None
    feasible = 0
    total = 1 << n_bits
    bit_positions = np.arange(n_bits)
    for code in range(total):
        bits = (code >> bit_positions) & 1
        pattern = ActivationPattern.from_flat(bits.astype(bool), widths)
        affine = region_affine(net, pattern)
        outcome = solve_lp(LinearProgram(affine.T, region_halfspaces(net, pattern), box))
        if outcome.status is not LpStatus.OPTIMAL:
            continue
        feasible += 1
        value = outcome.value + affine.t
        if value > best_value:
            best_value = value
            best_point = outcome.point
    return GlobalOptimum(float(best_value), best_point, feasible, total)


def forward_batch(net, points):
    """f evaluated at each row of `points`, shape (n_points, input_dim)."""
    h = np.asarray(points, dtype=np.float64)
    if h.ndim != 2 or h.shape[1] != net.input_dim:
        raise ValueError(f"expected shape (n, {net.input_dim}), got {h.shape}")
    for weights, bias in net.hidden_layers:
        h = np.maximum(h @ weights.T + bias, 0.0)
    return h @ net.output_weights + net.output_bias


def grid_optimum(net, box, resolution):
    """Best f over a uniform grid (resolution points per axis, corners
    included). Only for input dimension 1 or 2; anything larger is refused."""
    n0 = net.input_dim
    if n0 > 2:
        raise ValueError("grid search supports at most 2 input dimensions")
    if resolution < 2 and np.any(box.widths > 0):
        raise ValueError("resolution must be at least 2")
    axes = [np.linspace(box.lower[j], box.upper[j], max(resolution, 1)) for j in range(n0)]
    if n0 == 1:
        points = axes[0][:, None]
    else:
        g0, g1 = np.meshgrid(axes[0], axes[1], indexing="ij")
        points = np.column_stack([g0.ravel(), g1.ravel()])
    values = forward_batch(net, points)
    idx = int(np.argmax(values))
    return float(values[idx]), points[idx]


def finite_diff_gradient(net, x, h=1e-5):
    """Central difference approximation of grad f, step h per coordinate."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for j in range(x.size):
        bump = np.zeros_like(x)
        bump[j] = h
        grad[j] = (forward(net, x + bump).output - forward(net, x - bump).output) / (2 * h)
    return grad
