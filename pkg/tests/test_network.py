import json

import numpy as np
import pytest

import reluwalk as rw
from conftest import naive_forward


def test_forward_single_affine(one_neuron_net):
    trace = rw.forward(one_neuron_net, [0.75])
    assert trace.preactivations[0] == pytest.approx(0.25)
    assert trace.activations[0] == pytest.approx(0.25)
    assert trace.output == pytest.approx(0.25)


def test_forward_relu_clipping(one_neuron_net):
    trace = rw.forward(one_neuron_net, [0.25])
    assert trace.preactivations[0][0] == pytest.approx(-0.25)
    assert trace.activations[0][0] == 0.0
    assert trace.output == 0.0


def test_forward_matches_naive_reimplementation():
    net = rw.random_network(10, 2, 20, 42)
    box = rw.Box.unit(10)
    x = box.center()
    assert rw.forward(net, x).output == pytest.approx(naive_forward(net, x), abs=1e-12)


def test_forward_dimension_mismatch(one_neuron_net):
    with pytest.raises(ValueError):
        rw.forward(one_neuron_net, [0.1, 0.2])


def test_forward_trace_relu_invariants():
    net = rw.random_network(4, 3, 6, 3)
    trace = rw.forward(net, np.linspace(0, 1, 4))
    for g, h in zip(trace.preactivations, trace.activations):
        assert np.array_equal(h, np.maximum(g, 0.0))
    assert trace.output == pytest.approx(
        float(net.output_weights @ trace.activations[-1] + net.output_bias))


def test_activation_pattern_bits(one_neuron_net):
    assert rw.activation_pattern(one_neuron_net, [0.75]).flat.tolist() == [True]
    # binding neuron takes bit 1
    assert rw.activation_pattern(one_neuron_net, [0.5]).flat.tolist() == [True]
    assert rw.activation_pattern(one_neuron_net, [0.25]).flat.tolist() == [False]


def test_pattern_round_trip_and_equality():
    net = rw.random_network(3, 2, 4, 9)
    z = rw.activation_pattern(net, [0.1, 0.5, 0.9])
    again = rw.ActivationPattern.from_flat(z.flat, net.layer_widths)
    assert z == again and hash(z) == hash(again)
    assert z.n_bits == net.hidden_neuron_count
    with pytest.raises(ValueError):
        rw.ActivationPattern.from_flat([True] * 3, net.layer_widths)


def test_gradient_chain_product(one_neuron_net):
    assert rw.gradient(one_neuron_net, [0.75]).tolist() == [1.0]
    assert rw.gradient(one_neuron_net, [0.25]).tolist() == [0.0]


def test_gradient_matches_finite_differences():
    net = rw.random_network(10, 2, 20, 42)
    rng = np.random.default_rng(0)
    box = rw.Box.unit(10)
    checked = 0
    while checked < 5:
        x = rw.sample_uniform(box, rng)
        trace = rw.forward(net, x)
        if min(float(np.min(np.abs(g))) for g in trace.preactivations) < 1e-6:
            continue
        g = rw.gradient(net, x)
        fd = rw.finite_diff_gradient(net, x, h=1e-5)
        assert np.linalg.norm(fd - g) <= 1e-6 * max(np.linalg.norm(g), 1e-12)
        checked += 1


def test_piecewise_linearity_along_small_steps():
    rng = np.random.default_rng(4)
    for seed in range(10):
        net = rw.random_network(3, 2, 8, seed)
        x = rng.uniform(0, 1, 3)
        direction = rng.normal(0, 1, 3)
        z = rw.activation_pattern(net, x)
        g = rw.gradient(net, x)
        f0 = rw.forward(net, x).output
        alpha = 1e-4
        while alpha > 1e-9 and rw.activation_pattern(net, x + alpha * direction) != z:
            alpha /= 4
        if rw.activation_pattern(net, x + alpha * direction) != z:
            continue
        f1 = rw.forward(net, x + alpha * direction).output
        assert f1 - f0 == pytest.approx(alpha * float(g @ direction), abs=1e-9)


def test_random_network_dimensions_and_range():
    net = rw.random_network(10, 2, 100, 10)
    assert net.input_dim == 10
    assert net.layer_widths == (100, 100)
    for w, b in net.hidden_layers:
        assert np.all(np.abs(w) <= 1.0) and np.all(np.abs(b) <= 1.0)
    assert np.all(np.abs(net.output_weights) <= 1.0)
    assert abs(net.output_bias) <= 1.0


def test_random_network_deterministic():
    assert rw.random_network(4, 2, 7, 123) == rw.random_network(4, 2, 7, 123)
    assert rw.random_network(4, 2, 7, 123) != rw.random_network(4, 2, 7, 124)


def test_random_network_parameter_count():
    net = rw.random_network(1, 1, 1, 0)
    assert net.parameter_count == 4


def test_random_network_rejects_bad_sizes():
    with pytest.raises(ValueError):
        rw.random_network(0, 1, 1, 0)
    with pytest.raises(ValueError):
        rw.random_network(1, 1, 0, 0)


def test_project_box_clamps():
    box = rw.Box([0.0, 0.0], [1.0, 1.0])
    assert rw.project_box(box, [1.5, -0.2]).tolist() == [1.0, 0.0]
    assert rw.project_box(box, [0.3, 0.7]).tolist() == [0.3, 0.7]
    assert rw.project_box(rw.Box([-2.0], [-1.0]), [0.0]).tolist() == [-1.0]


def test_project_box_idempotent_and_nearest():
    rng = np.random.default_rng(8)
    box = rw.Box(rng.uniform(-1, 0, 5), rng.uniform(0.5, 2, 5))
    for _ in range(50):
        y = rng.normal(0, 3, 5)
        p = rw.project_box(box, y)
        assert np.array_equal(rw.project_box(box, p), p)
        assert box.contains(p)
        # no sampled feasible point is closer than the clamp
        others = rng.uniform(box.lower, box.upper, size=(100, 5))
        dists = np.linalg.norm(others - y, axis=1)
        assert np.linalg.norm(p - y) <= dists.min() + 1e-12


def test_sample_uniform_degenerate_and_reproducible():
    assert rw.sample_uniform(rw.Box([0.0], [0.0]), np.random.default_rng(1)).tolist() == [0.0]
    a = rw.sample_uniform(rw.Box.unit(10), np.random.default_rng(7))
    b = rw.sample_uniform(rw.Box.unit(10), np.random.default_rng(7))
    assert np.array_equal(a, b)
    assert rw.Box.unit(10).contains(a)


def test_sample_uniform_mean():
    rng = np.random.default_rng(3)
    box = rw.Box([0.0], [1.0])
    samples = np.array([rw.sample_uniform(box, rng)[0] for _ in range(100_000)])
    assert abs(samples.mean() - 0.5) < 0.01


def test_network_json_round_trip(tmp_path):
    net = rw.random_network(10, 2, 20, 42)
    path = tmp_path / "net.json"
    rw.save_network(net, path)
    assert rw.load_network(path) == net
    assert rw.load_network(path, strict=True) == net


def test_network_json_hand_written(tmp_path, one_neuron_net):
    payload = {
        "input_dim": 1,
        "hidden_layers": [{"weights": [[1.0]], "bias": [-0.5]}],
        "output_layer": {"weights": [[1.0]], "bias": [0.0]},
    }
    path = tmp_path / "one.json"
    path.write_text(json.dumps(payload))
    assert rw.load_network(path) == one_neuron_net


def test_network_json_validation(tmp_path):
    bad_dim = {
        "input_dim": 2,
        "hidden_layers": [{"weights": [[1.0]], "bias": [0.0]}],
        "output_layer": {"weights": [[1.0]], "bias": [0.0]},
    }
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(bad_dim))
    with pytest.raises(ValueError):
        rw.load_network(path)

    oversized = {
        "input_dim": 1,
        "hidden_layers": [{"weights": [[2.5]], "bias": [0.0]}],
        "output_layer": {"weights": [[1.0]], "bias": [0.0]},
    }
    path.write_text(json.dumps(oversized))
    rw.load_network(path)  # lax load accepts any finite entries
    with pytest.raises(ValueError):
        rw.load_network(path, strict=True)


def test_box_json_round_trip(tmp_path):
    box = rw.Box([-1.0, 0.0], [2.0, 3.0])
    path = tmp_path / "box.json"
    rw.save_box(box, path)
    loaded = rw.load_box(path)
    assert np.array_equal(loaded.lower, box.lower)
    assert np.array_equal(loaded.upper, box.upper)


def test_box_validation():
    with pytest.raises(ValueError):
        rw.Box([1.0], [0.0])
    with pytest.raises(ValueError):
        rw.Box([0.0], [np.inf])


def test_network_validation():
    with pytest.raises(ValueError):
        rw.Network(2, [([[1.0]], [0.0])], [1.0], 0.0)  # 1 column vs 2 inputs
    with pytest.raises(ValueError):
        rw.Network(1, [([[1.0]], [0.0, 0.0])], [1.0], 0.0)  # bias length
    with pytest.raises(ValueError):
        rw.Network(1, [([[1.0]], [0.0])], [1.0, 1.0], 0.0)  # output length
