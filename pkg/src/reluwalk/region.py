"""Linear-region algebra for ReLU networks.

Inside one region (fixed activation pattern z) the network is affine, and so
is every neuron's preactivation as a function of the input. This module
computes that affine map T.x + t, the per-neuron input-space affine functions,
the halfspaces bounding the region, and the ratio test that measures how far
a gradient step can travel before the pattern changes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .lp import Halfspace
from .network import forward, gradient_for_pattern, pattern_from_trace

__all__ = [
    "AffineMap",
    "RegionHalfspaces",
    "RatioTest",
    "RATIO_PARALLEL_TOL",
    "region_affine",
    "neuron_affines",
    "region_halfspaces",
    "ratio_test",
]

# Preactivation deltas smaller than this are treated as parallel to the step
# (their boundary can never be crossed), so their ratio becomes +inf.
RATIO_PARALLEL_TOL = 1e-12


@dataclass(frozen=True)
class AffineMap:
    """f restricted to one linear region: x -> T.x + t."""

    T: np.ndarray
    t: float

    def __call__(self, x):
        return float(self.T @ np.asarray(x, dtype=np.float64) + self.t)


# One halfspace per hidden neuron, in flat neuron order.
RegionHalfspaces = list


class RatioTest(NamedTuple):
    u: float
    blocking_neuron: int | None


def _check_pattern(net, pattern):
    if tuple(l.size for l in pattern.layers) != net.layer_widths:
        raise ValueError("pattern does not match the network's hidden widths")


def _affine_layers(net, pattern):
    """Yield (P, q) per layer: the input-space affine map of preactivations,
    g^l(x) = P.x + q for any x in the region of `pattern`."""
    n0 = net.input_dim
    A = np.eye(n0)
    c = np.zeros(n0)
    for (weights, bias), mask in zip(net.hidden_layers, pattern.layers):
        P = weights @ A
        q = weights @ c + bias
        yield P, q
        A = mask[:, None] * P
        c = np.where(mask, q, 0.0)


def region_affine(net, pattern):
    """Affine map (T, t) with T.x + t = f(x) on the region of `pattern`."""
    _check_pattern(net, pattern)
    n0 = net.input_dim
    A = np.eye(n0)
    c = np.zeros(n0)
    for (weights, bias), mask in zip(net.hidden_layers, pattern.layers):
        A = mask[:, None] * (weights @ A)
        c = np.where(mask, weights @ c + bias, 0.0)
    T = net.output_weights @ A
    t = float(net.output_weights @ c + net.output_bias)
    return AffineMap(T, t)


def neuron_affines(net, pattern):
    """Per-neuron (a_i, b_i) with g_i(x) = a_i.x + b_i on the region.

    Flat neuron order: layer by layer, neurons in layer order.
    """
    _check_pattern(net, pattern)
    result = []
    for P, q in _affine_layers(net, pattern):
        for i in range(P.shape[0]):
            result.append((P[i], float(q[i])))
    return result


def region_halfspaces(net, pattern):
    """Halfspaces whose intersection is the (closed) region of `pattern`:
    a_i.x + b_i >= 0 where bit i is set, <= 0 where it is not."""
    flat_bits = pattern.flat
    return [
        Halfspace(a, b, "ge" if bit else "le")
        for (a, b), bit in zip(neuron_affines(net, pattern), flat_bits)
    ]


def _frozen_preactivations(net, x, masks):
    """Preactivations at x with each ReLU replaced by a fixed 0/1 mask, i.e.
    the affine extension of the masks' region maps evaluated at x."""
    h = np.asarray(x, dtype=np.float64)
    pre = []
    for (weights, bias), mask in zip(net.hidden_layers, masks):
        g = weights @ h + bias
        pre.append(g)
        h = np.where(mask, g, 0.0)
    return pre


def _ratio_for_step(net, x, base, grad, parallel_tol=RATIO_PARALLEL_TOL):
    """Ratio test given a precomputed forward trace and gradient at x."""
    masks = [p >= 0.0 for p in base.preactivations]
    stepped = _frozen_preactivations(net, np.asarray(x, dtype=np.float64) + grad, masks)
    g = np.concatenate(base.preactivations)
    dg = np.concatenate(stepped) - g
    safe = np.where(np.abs(dg) < parallel_tol, 1.0, dg)
    rho = np.where(np.abs(dg) < parallel_tol, np.inf, -g / safe)
    rho = np.where(rho < 0.0, np.inf, rho)
    idx = int(np.argmin(rho))
    u = float(rho[idx])
    if not np.isfinite(u):
        return RatioTest(np.inf, None)
    return RatioTest(u, idx)


def ratio_test(net, x, parallel_tol=RATIO_PARALLEL_TOL):
    """Smallest nonnegative multiple u of the step direction grad f(x) at
    which some neuron's preactivation reaches zero.

    The preactivation deltas come from one extra pass at x + grad f(x) run
    with the current region's masks frozen, so each delta is exactly the
    region-affine slope a_i . grad f and the test is exact rather than a
    chord estimate (a plain ReLU pass would bend once the probe point leaves
    the region). Returns u = +inf when no boundary lies ahead (zero
    gradient, or every crossing is behind the step). A binding neuron at x
    yields u = 0; callers decide how to treat a zero-length step.

    Guarantee for interior x: the activation pattern is constant along
    x + alpha * grad f(x) for all alpha in (0, u).
    """
    base = forward(net, x)
    grad = gradient_for_pattern(net, pattern_from_trace(base))
    return _ratio_for_step(net, x, base, grad, parallel_tol)
