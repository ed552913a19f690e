import numpy as np
import pytest

import reluwalk as rw


def region_point_samples(net, pattern, x0, rng, count=10):
    """Points inside the region of x0, built by stepping random directions
    until just before the first preactivation sign change, then verified
    against the region halfspaces (discarded when any check fails)."""
    affines = rw.neuron_affines(net, pattern)
    halfspaces = rw.region_halfspaces(net, pattern)
    points = []
    while len(points) < count:
        direction = rng.normal(0, 1, net.input_dim)
        t_max = np.inf
        for a, b in affines:
            g0 = float(a @ x0 + b)
            slope = float(a @ direction)
            if abs(slope) < 1e-12:
                continue
            t_cross = -g0 / slope
            if t_cross > 0:
                t_max = min(t_max, t_cross)
        if not np.isfinite(t_max):
            t_max = 1.0
        candidate = x0 + rng.uniform(0.0, 0.9) * t_max * direction
        if all(hs.satisfied(candidate, tol=1e-12) for hs in halfspaces):
            points.append(candidate)
    return points


def test_region_affine_one_neuron(one_neuron_net):
    z1 = rw.activation_pattern(one_neuron_net, [0.75])
    aff = rw.region_affine(one_neuron_net, z1)
    assert aff.T.tolist() == [1.0] and aff.t == -0.5

    z0 = rw.activation_pattern(one_neuron_net, [0.25])
    aff = rw.region_affine(one_neuron_net, z0)
    assert aff.T.tolist() == [0.0] and aff.t == 0.0


def test_region_affine_matches_forward():
    net = rw.random_network(10, 2, 20, 42)
    rng = np.random.default_rng(1)
    for _ in range(20):
        x = rng.uniform(0, 1, 10)
        aff = rw.region_affine(net, rw.activation_pattern(net, x))
        assert aff(x) == pytest.approx(rw.forward(net, x).output, abs=1e-9)


def test_neuron_affines_first_layer_independent_of_pattern(one_neuron_net):
    for bits in ([True], [False]):
        z = rw.ActivationPattern.from_flat(bits, one_neuron_net.layer_widths)
        (a, b), = rw.neuron_affines(one_neuron_net, z)
        assert a.tolist() == [1.0] and b == -0.5


def test_neuron_affines_masked_layer():
    net = rw.Network(1, [([[1.0]], [0.0]), ([[1.0]], [0.0])], [1.0], 0.0)
    z = rw.ActivationPattern.from_flat([False, True], net.layer_widths)
    affs = rw.neuron_affines(net, z)
    a2, b2 = affs[1]
    assert a2.tolist() == [0.0] and b2 == 0.0


def test_neuron_affines_match_preactivations():
    net = rw.random_network(10, 2, 20, 42)
    rng = np.random.default_rng(2)
    x = rng.uniform(0, 1, 10)
    trace = rw.forward(net, x)
    flat_g = np.concatenate(trace.preactivations)
    affs = rw.neuron_affines(net, rw.pattern_from_trace(trace))
    for (a, b), g in zip(affs, flat_g):
        assert a @ x + b == pytest.approx(g, abs=1e-9)


def test_region_halfspaces_one_neuron(one_neuron_net):
    z1 = rw.ActivationPattern.from_flat([True], (1,))
    (hs,) = rw.region_halfspaces(one_neuron_net, z1)
    assert hs.sense == "ge" and hs.a.tolist() == [1.0] and hs.b == -0.5
    z0 = rw.ActivationPattern.from_flat([False], (1,))
    (hs,) = rw.region_halfspaces(one_neuron_net, z0)
    assert hs.sense == "le"


def test_region_halfspaces_contain_their_point():
    rng = np.random.default_rng(3)
    for seed in range(10):
        net = rw.random_network(4, 2, 6, seed)
        x = rng.uniform(0, 1, 4)
        for hs in rw.region_halfspaces(net, rw.activation_pattern(net, x)):
            assert hs.satisfied(x, tol=1e-9)


def test_region_affine_consistent_with_gradient():
    for seed in range(20):
        net = rw.random_network(6, 3, 10, seed)
        x = np.random.default_rng(seed).uniform(0, 1, 6)
        z = rw.activation_pattern(net, x)
        assert np.allclose(rw.region_affine(net, z).T, rw.gradient(net, x), atol=1e-12)


def test_affine_identity_inside_region():
    rng = np.random.default_rng(11)
    pairs = 0
    while pairs < 25:
        net = rw.random_network(3, 2, 5, int(rng.integers(0, 10_000)))
        x0 = rng.uniform(0, 1, 3)
        z = rw.activation_pattern(net, x0)
        aff = rw.region_affine(net, z)
        for p in region_point_samples(net, z, x0, rng, count=10):
            assert aff(p) == pytest.approx(rw.forward(net, p).output, abs=1e-9)
        pairs += 1


def test_ratio_test_two_neurons(two_neuron_net):
    rt = rw.ratio_test(two_neuron_net, [0.75])
    assert rt.u == pytest.approx(0.3)
    assert rt.blocking_neuron == 1
    grad = rw.gradient(two_neuron_net, [0.75])
    assert grad.tolist() == [0.5]
    crossing = rw.forward(two_neuron_net, np.array([0.75]) + rt.u * grad)
    assert abs(crossing.preactivations[0][1]) < 1e-12


def test_ratio_test_zero_gradient(one_neuron_net):
    rt = rw.ratio_test(one_neuron_net, [0.25])
    assert rt.u == np.inf and rt.blocking_neuron is None


def test_ratio_test_boundary_behind_step(one_neuron_net):
    rt = rw.ratio_test(one_neuron_net, [0.75])
    assert rt.u == np.inf


def test_ratio_test_binding_point_gives_zero(one_neuron_net):
    rt = rw.ratio_test(one_neuron_net, [0.5])
    assert rt.u == 0.0 and rt.blocking_neuron == 0


def test_ratio_test_finite_u_hits_a_boundary():
    rng = np.random.default_rng(5)
    found = 0
    while found < 30:
        net = rw.random_network(4, 2, 8, int(rng.integers(0, 100_000)))
        x = rng.uniform(0, 1, 4)
        rt = rw.ratio_test(net, x)
        if not np.isfinite(rt.u) or rt.u == 0.0:
            continue
        grad = rw.gradient(net, x)
        affs = rw.neuron_affines(net, rw.activation_pattern(net, x))
        crossing = x + rt.u * grad
        residuals = [abs(float(a @ crossing + b)) for a, b in affs]
        assert min(residuals) < 1e-7
        assert rt.u >= 0.0
        found += 1


def test_ratio_test_pattern_constant_below_u():
    rng = np.random.default_rng(6)
    found = 0
    while found < 20:
        net = rw.random_network(5, 2, 10, int(rng.integers(0, 100_000)))
        x = rng.uniform(0, 1, 5)
        rt = rw.ratio_test(net, x)
        if not np.isfinite(rt.u) or rt.u <= 0.0:
            continue
        z = rw.activation_pattern(net, x)
        grad = rw.gradient(net, x)
        for frac in (0.1, 0.5, 0.99):
            alpha = frac * rt.u * (1 - 1e-9)
            assert rw.activation_pattern(net, x + alpha * grad) == z
        found += 1


def test_pattern_width_mismatch_rejected(one_neuron_net):
    z = rw.ActivationPattern.from_flat([True, False], (2,))
    with pytest.raises(ValueError):
        rw.region_affine(one_neuron_net, z)
    with pytest.raises(ValueError):
        rw.gradient_for_pattern(one_neuron_net, z)
