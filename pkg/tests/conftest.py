import itertools

import numpy as np
import pytest

import reluwalk as rw


@pytest.fixture
def one_neuron_net():
    # f(x) = max(0, x - 0.5)
    return rw.Network(1, [([[1.0]], [-0.5])], [1.0], 0.0)


@pytest.fixture
def two_neuron_net():
    # g1 = x - 0.5, g2 = -x + 0.9, f = h1 + 0.5 h2
    return rw.Network(1, [([[1.0], [-1.0]], [-0.5, 0.9])], [1.0, 0.5], 0.0)


@pytest.fixture
def zero_net():
    return rw.Network(1, [([[0.0]], [0.0])], [0.0], 0.3)


@pytest.fixture
def unit_box_1():
    return rw.Box([0.0], [1.0])


def naive_forward(net, x):
    """Plain-Python forward pass, written independently of the numpy one:
    explicit loops over layers and neurons, ReLU by comparison."""
    h = [float(v) for v in x]
    for weights, bias in net.hidden_layers:
        out = []
        for i in range(weights.shape[0]):
            acc = float(bias[i])
            for j in range(weights.shape[1]):
                acc += float(weights[i, j]) * h[j]
            out.append(acc if acc > 0.0 else 0.0)
        h = out
    acc = float(net.output_bias)
    for j in range(len(h)):
        acc += float(net.output_weights[j]) * h[j]
    return acc


def brute_force_lp_2d(lp, tol=1e-7):
    """All pairwise intersections of constraint/box boundary lines, filtered
    for feasibility; returns (best value, best point) or (None, None)."""
    lines = [(hs.a, -hs.b) for hs in lp.halfspaces]  # a.x = -b
    lo, up = lp.box.lower, lp.box.upper
    lines.append((np.array([1.0, 0.0]), lo[0]))
    lines.append((np.array([1.0, 0.0]), up[0]))
    lines.append((np.array([0.0, 1.0]), lo[1]))
    lines.append((np.array([0.0, 1.0]), up[1]))
    points = []
    for (a1, c1), (a2, c2) in itertools.combinations(lines, 2):
        A = np.array([a1, a2])
        if abs(np.linalg.det(A)) < 1e-12:
            continue
        points.append(np.linalg.solve(A, np.array([c1, c2])))
    feasible = [
        p for p in points
        if np.all(p >= lo - tol) and np.all(p <= up + tol)
        and all(hs.satisfied(p, tol) for hs in lp.halfspaces)
    ]
    if not feasible:
        return None, None
    values = [float(lp.objective @ p) for p in feasible]
    idx = int(np.argmax(values))
    return values[idx], feasible[idx]


def random_lp_2d(rng, max_halfspaces=6):
    n_hs = int(rng.integers(0, max_halfspaces + 1))
    halfspaces = [
        rw.Halfspace(rng.uniform(-1, 1, 2), float(rng.uniform(-0.5, 0.5)),
                     "ge" if rng.random() < 0.5 else "le")
        for _ in range(n_hs)
    ]
    lower = rng.uniform(-1.0, 0.0, 2)
    upper = lower + rng.uniform(0.2, 1.5, 2)
    return rw.LinearProgram(rng.normal(0.0, 1.0, 2), halfspaces, rw.Box(lower, upper))
