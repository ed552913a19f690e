"""ReLU feed-forward networks with a scalar output.

Provides the network container, forward evaluation with per-layer traces,
activation patterns, analytic gradients (masked weight products), axis-aligned
box domains, uniform sampling, box projection, and JSON (de)serialization.

All numerics are float64. Networks and boxes are immutable after construction
and safe to share across threads; random state is always owned by the caller.
Random draws use numpy's default generator (PCG64), which is seedable and
yields the same stream on every platform; that generator choice is fixed and
must not change, or stored seeds stop reproducing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Network",
    "ForwardTrace",
    "ActivationPattern",
    "Box",
    "forward",
    "activation_pattern",
    "pattern_from_trace",
    "gradient",
    "gradient_for_pattern",
    "random_network",
    "project_box",
    "sample_uniform",
    "save_network",
    "load_network",
    "network_to_dict",
    "network_from_dict",
    "save_box",
    "load_box",
]


def _frozen_array(values, dtype=np.float64):
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


class Network:
    """A ReLU network mapping R^input_dim to a single scalar.

    hidden_layers is a sequence of (weights, bias) pairs where weights has
    shape (n_l, n_{l-1}) and bias has shape (n_l,). The output layer is a
    weight vector of length n_L plus a scalar bias; no activation is applied
    to the output.
    """

    def __init__(self, input_dim, hidden_layers, output_weights, output_bias):
        input_dim = int(input_dim)
        if input_dim < 1:
            raise ValueError("input_dim must be at least 1")
        layers = []
        prev = input_dim
        for idx, (weights, bias) in enumerate(hidden_layers):
            w = _frozen_array(np.atleast_2d(weights))
            b = _frozen_array(np.atleast_1d(bias))
            if w.ndim != 2 or w.shape[1] != prev:
                raise ValueError(
                    f"hidden layer {idx}: weights shape {w.shape} does not "
                    f"accept {prev}-dimensional input"
                )
            if b.shape != (w.shape[0],):
                raise ValueError(
                    f"hidden layer {idx}: bias shape {b.shape} does not match "
                    f"{w.shape[0]} neurons"
                )
            layers.append((w, b))
            prev = w.shape[0]
        if not layers:
            raise ValueError("network needs at least one hidden layer")
        out_w = _frozen_array(np.asarray(output_weights, dtype=np.float64).reshape(-1))
        if out_w.shape != (prev,):
            raise ValueError(
                f"output weights have length {out_w.shape[0]}, expected {prev}"
            )
        self.input_dim = input_dim
        self.hidden_layers = tuple(layers)
        self.output_weights = out_w
        self.output_bias = float(output_bias)

    @property
    def depth(self):
        """Number of hidden layers."""
        return len(self.hidden_layers)

    @property
    def layer_widths(self):
        return tuple(w.shape[0] for w, _ in self.hidden_layers)

    @property
    def hidden_neuron_count(self):
        return sum(self.layer_widths)

    @property
    def parameter_count(self):
        count = sum(w.size + b.size for w, b in self.hidden_layers)
        return count + self.output_weights.size + 1

    def __eq__(self, other):
        if not isinstance(other, Network):
            return NotImplemented
        return (
            self.input_dim == other.input_dim
            and len(self.hidden_layers) == len(other.hidden_layers)
            and all(
                np.array_equal(wa, wb) and np.array_equal(ba, bb)
                for (wa, ba), (wb, bb) in zip(self.hidden_layers, other.hidden_layers)
            )
            and np.array_equal(self.output_weights, other.output_weights)
            and self.output_bias == other.output_bias
        )

    def __repr__(self):
        dims = " -> ".join(str(d) for d in (self.input_dim, *self.layer_widths, 1))
        return f"Network({dims})"


@dataclass(frozen=True)
class ForwardTrace:
    """Per-layer preactivations g^l, activations h^l = max(0, g^l), and f(x)."""

    preactivations: tuple
    activations: tuple
    output: float


class ActivationPattern:
    """One boolean per hidden neuron, grouped per layer.

    A bit is True exactly when the neuron's preactivation is nonnegative,
    so binding neurons (preactivation zero) carry bit True. The pattern
    identifies the linear region a point belongs to.
    """

    __slots__ = ("layers",)

    def __init__(self, layers):
        self.layers = tuple(_frozen_array(l, dtype=bool) for l in layers)

    @property
    def n_bits(self):
        return sum(l.size for l in self.layers)

    @property
    def flat(self):
        """All bits concatenated in layer order."""
        return np.concatenate([l for l in self.layers])

    @classmethod
    def from_flat(cls, bits, layer_widths):
        bits = np.asarray(bits, dtype=bool).reshape(-1)
        if bits.size != sum(layer_widths):
            raise ValueError(
                f"{bits.size} bits do not fill layer widths {tuple(layer_widths)}"
            )
        layers, start = [], 0
        for width in layer_widths:
            layers.append(bits[start : start + width])
            start += width
        return cls(layers)

    def __eq__(self, other):
        if not isinstance(other, ActivationPattern):
            return NotImplemented
        return len(self.layers) == len(other.layers) and all(
            np.array_equal(a, b) for a, b in zip(self.layers, other.layers)
        )

    def __hash__(self):
        return hash(tuple(l.tobytes() for l in self.layers))

    def __repr__(self):
        groups = ["".join("1" if b else "0" for b in l) for l in self.layers]
        return f"ActivationPattern({'|'.join(groups)})"


class Box:
    """Axis-aligned box given by finite per-coordinate lower/upper bounds."""

    def __init__(self, lower, upper):
        lower = _frozen_array(np.atleast_1d(lower))
        upper = _frozen_array(np.atleast_1d(upper))
        if lower.shape != upper.shape or lower.ndim != 1:
            raise ValueError("lower and upper must be vectors of equal length")
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise ValueError("box bounds must be finite")
        if np.any(lower > upper):
            raise ValueError("every lower bound must not exceed its upper bound")
        self.lower = lower
        self.upper = upper

    @property
    def dim(self):
        return self.lower.size

    @property
    def widths(self):
        return self.upper - self.lower

    def diagonal(self):
        """Euclidean length of the main diagonal."""
        return float(np.linalg.norm(self.widths))

    def center(self):
        return 0.5 * (self.lower + self.upper)

    def contains(self, x, tol=0.0):
        x = np.asarray(x, dtype=np.float64)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    @classmethod
    def unit(cls, dim):
        return cls(np.zeros(dim), np.ones(dim))

    def to_dict(self):
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(data["lower"], data["upper"])
        except KeyError as exc:
            raise ValueError(f"box JSON is missing field {exc}") from None

    def __repr__(self):
        return f"Box(lower={self.lower.tolist()}, upper={self.upper.tolist()})"


def _as_input(net, x):
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.size != net.input_dim:
        raise ValueError(f"input has length {x.size}, expected {net.input_dim}")
    return x


def forward(net, x):
    """Evaluate the network at x, keeping every g^l and h^l."""
    h = _as_input(net, x)
    pre, post = [], []
    for weights, bias in net.hidden_layers:
        g = weights @ h + bias
        h = np.maximum(g, 0.0)
        pre.append(g)
        post.append(h)
    out = float(net.output_weights @ h + net.output_bias)
    return ForwardTrace(tuple(pre), tuple(post), out)


def pattern_from_trace(trace):
    """Activation pattern of an already-computed forward trace."""
    return ActivationPattern([g >= 0.0 for g in trace.preactivations])


def activation_pattern(net, x):
    """Pattern with bit 1 iff the neuron's preactivation is >= 0 at x."""
    return pattern_from_trace(forward(net, x))


def _masked_row_product(net, layer_masks):
    row = net.output_weights
    for (weights, _), mask in zip(reversed(net.hidden_layers), reversed(layer_masks)):
        row = (row * mask) @ weights
    return row


def gradient_for_pattern(net, pattern):
    """Row vector w_out * prod_l diag(z^l) W^l for a fixed pattern."""
    if tuple(l.size for l in pattern.layers) != net.layer_widths:
        raise ValueError("pattern does not match the network's hidden widths")
    return _masked_row_product(net, pattern.layers)


def gradient(net, x):
    """Gradient of f at x.

    Exact in the interior of a linear region; at region boundaries it is the
    subgradient choice induced by the bit-1 convention for binding neurons.
    """
    trace = forward(net, x)
    return _masked_row_product(net, [g >= 0.0 for g in trace.preactivations])


def random_network(n0, d, m, seed):
    """Network with architecture n0 -> (m,) * d -> 1 and i.i.d. Uniform(-1, 1)
    weights and biases, drawn from np.random.default_rng(seed).

    Draw order is fixed: per hidden layer weights then bias, then output
    weights then output bias. Identical arguments give bit-identical networks.
    """
    if min(n0, d, m) < 1:
        raise ValueError("n0, d, and m must all be at least 1")
    rng = np.random.default_rng(seed)
    dims = [n0] + [m] * d
    hidden = []
    for l in range(d):
        weights = rng.uniform(-1.0, 1.0, size=(dims[l + 1], dims[l]))
        bias = rng.uniform(-1.0, 1.0, size=dims[l + 1])
        hidden.append((weights, bias))
    out_w = rng.uniform(-1.0, 1.0, size=m)
    out_b = rng.uniform(-1.0, 1.0)
    net = Network(n0, hidden, out_w, out_b)
    _check_entry_range(net)
    return net


def _check_entry_range(net):
    arrays = [a for w, b in net.hidden_layers for a in (w, b)]
    arrays += [net.output_weights, np.array([net.output_bias])]
    if not all(np.all(np.abs(a) <= 1.0) for a in arrays):
        raise AssertionError("generated entries escaped [-1, 1]")


def project_box(box, x):
    """Componentwise clamp of x into the box.

    For boxes this clamp is the exact Euclidean projection; it is idempotent
    and costs O(dim).
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.size != box.dim:
        raise ValueError(f"point has length {x.size}, expected {box.dim}")
    return np.clip(x, box.lower, box.upper)


def sample_uniform(box, rng):
    """One point with independent Uniform(lower_j, upper_j) coordinates."""
    return rng.uniform(box.lower, box.upper)


def network_to_dict(net):
    return {
        "input_dim": net.input_dim,
        "hidden_layers": [
            {"weights": w.tolist(), "bias": b.tolist()} for w, b in net.hidden_layers
        ],
        "output_layer": {
            "weights": [net.output_weights.tolist()],
            "bias": [net.output_bias],
        },
    }


def network_from_dict(data, strict=False):
    """Build a Network from its JSON dict form.

    Dimension consistency is always enforced. With strict=True every weight
    and bias entry must additionally lie in [-1, 1] (NaNs are rejected too).
    """
    try:
        input_dim = data["input_dim"]
        hidden = [(layer["weights"], layer["bias"]) for layer in data["hidden_layers"]]
        out = data["output_layer"]
        out_weights = np.asarray(out["weights"], dtype=np.float64).reshape(-1)
        out_bias = out["bias"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed network JSON: {exc}") from None
    out_bias = float(np.asarray(out_bias, dtype=np.float64).reshape(-1)[0])
    net = Network(input_dim, hidden, out_weights, out_bias)
    if strict:
        for w, b in (*net.hidden_layers, (net.output_weights, np.array([net.output_bias]))):
            for arr in (w, b):
                inside = np.abs(arr) <= 1.0
                if not np.all(inside):
                    raise ValueError("strict load: entries outside [-1, 1]")
    return net


def save_network(net, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(network_to_dict(net), fh)


def load_network(path, strict=False):
    with open(path, "r", encoding="utf-8") as fh:
        return network_from_dict(json.load(fh), strict=strict)


def save_box(box, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(box.to_dict(), fh)


def load_box(path):
    with open(path, "r", encoding="utf-8") as fh:
        return Box.from_dict(json.load(fh))
