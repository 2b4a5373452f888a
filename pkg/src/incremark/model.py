"""Network and property model, variable numbering, and the text file formats.

A network is a stack of affine layers, each followed by a ReLU except
(optionally) the last. Every quantity the verifier talks about gets a global
variable id:

    inputs, then per layer its pre-activation neurons followed by its
    post-activation neurons, then (implicitly) the outputs, then auxiliary
    slack variables in introduction order: one slack per ReLU inequality
    x_post >= x_pre, then one constant slack per equation (affine equations
    first, then the ReLU inequalities).

The numbering is a pure function of the layer dimensions, so trees recorded
for one network apply to any same-shaped network.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .constants import EPS_SAT

NeuronId = int

RELU = "relu"
NONE = "none"


@dataclass(frozen=True)
class LinearConstraint:
    """One conjunct of the negated property: coeffs . y >= threshold."""

    coeffs: tuple[float, ...]
    threshold: float


@dataclass(frozen=True)
class SafetyProperty:
    """Input box plus the negated output property (conjunction of >=).

    An empty constraint tuple is the explicit empty-negation marker: the
    negation is unsatisfiable and verification is immediately UNSAT.
    """

    box: tuple[tuple[float, float], ...]
    constraints: tuple[LinearConstraint, ...]

    def __post_init__(self) -> None:
        for lo, hi in self.box:
            if lo > hi:
                raise ValueError(f"empty input box: [{lo}, {hi}]")


@dataclass(frozen=True)
class Verdict:
    sat: bool
    witness: tuple[float, ...] | None = None

    @property
    def name(self) -> str:
        return "sat" if self.sat else "unsat"


UNSAT = Verdict(False)


class Network:
    """Feed-forward ReLU network with per-layer activation flags."""

    def __init__(self, weights, biases, activations=None):
        self.weights = [np.asarray(w, dtype=float) for w in weights]
        self.biases = [np.asarray(b, dtype=float) for b in biases]
        k = len(self.weights)
        if len(self.biases) != k or k == 0:
            raise ValueError("need matching weight/bias lists")
        if activations is None:
            activations = [RELU] * (k - 1) + [NONE]
        self.activations = list(activations)
        if len(self.activations) != k:
            raise ValueError("one activation flag per layer")
        for i, act in enumerate(self.activations):
            if act not in (RELU, NONE):
                raise ValueError(f"unknown activation {act!r}")
            if act == NONE and i != k - 1:
                raise ValueError("'none' is only permitted on the final layer")
        dims = [self.weights[0].shape[1]]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise ValueError(f"layer {i + 1}: bad weight/bias shape")
            if w.shape[1] != dims[-1]:
                raise ValueError(f"layer {i + 1}: expects {dims[-1]} inputs, got {w.shape[1]}")
            dims.append(w.shape[0])
        self.dims = tuple(dims)
        self.layout = VariableLayout(self.dims, tuple(self.activations))

    @property
    def n_inputs(self) -> int:
        return self.dims[0]

    @property
    def n_outputs(self) -> int:
        return self.dims[-1]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Network):
            return NotImplemented
        return (
            self.dims == other.dims
            and self.activations == other.activations
            and all(np.array_equal(a, b) for a, b in zip(self.weights, other.weights))
            and all(np.array_equal(a, b) for a, b in zip(self.biases, other.biases))
        )


@dataclass
class VariableLayout:
    """Global variable ids for a network shape. Pure function of (dims, acts)."""

    dims: tuple[int, ...]
    activations: tuple[str, ...]
    input_ids: list[int] = field(default_factory=list)
    pre_ids: list[list[int]] = field(default_factory=list)    # per layer 1..k
    post_ids: list[list[int]] = field(default_factory=list)   # per layer; == pre_ids for 'none'
    output_ids: list[int] = field(default_factory=list)
    relu_pairs: list[tuple[int, int]] = field(default_factory=list)
    relu_slack: dict[tuple[int, int], int] = field(default_factory=dict)
    affine_const_slack: dict[int, int] = field(default_factory=dict)  # pre id -> slack id
    relu_const_slack: dict[tuple[int, int], int] = field(default_factory=dict)
    n_vars: int = 0  # network neurons + structural slacks; property slacks go after

    def __post_init__(self) -> None:
        nxt = 0
        self.input_ids = list(range(self.dims[0]))
        nxt = self.dims[0]
        for i, n in enumerate(self.dims[1:]):
            pre = list(range(nxt, nxt + n))
            nxt += n
            self.pre_ids.append(pre)
            if self.activations[i] == RELU:
                post = list(range(nxt, nxt + n))
                nxt += n
                self.post_ids.append(post)
                self.relu_pairs.extend(zip(pre, post))
            else:
                self.post_ids.append(pre)
        self.output_ids = self.post_ids[-1]
        for pair in self.relu_pairs:
            self.relu_slack[pair] = nxt
            nxt += 1
        for layer_pre in self.pre_ids:
            for p in layer_pre:
                self.affine_const_slack[p] = nxt
                nxt += 1
        for pair in self.relu_pairs:
            self.relu_const_slack[pair] = nxt
            nxt += 1
        self.n_vars = nxt

    def var_name(self, vid: int) -> str:
        return f"x{vid + 1}"


def evaluate(net: Network, x) -> np.ndarray:
    """Exact forward pass; raises on dimension mismatch."""
    v = np.asarray(x, dtype=float)
    if v.shape != (net.n_inputs,):
        raise ValueError(f"expected {net.n_inputs} inputs, got shape {v.shape}")
    for w, b, act in zip(net.weights, net.biases, net.activations):
        v = w @ v + b
        if act == RELU:
            v = np.maximum(v, 0.0)
    return v


def forward_values(net: Network, x) -> dict[int, float]:
    """Values of every network variable (inputs, pre, post) at input x."""
    v = np.asarray(x, dtype=float)
    lay = net.layout
    out: dict[int, float] = {i: float(v[j]) for j, i in enumerate(lay.input_ids)}
    for li, (w, b, act) in enumerate(zip(net.weights, net.biases, net.activations)):
        pre = w @ v + b
        for j, vid in enumerate(lay.pre_ids[li]):
            out[vid] = float(pre[j])
        v = np.maximum(pre, 0.0) if act == RELU else pre
        for j, vid in enumerate(lay.post_ids[li]):
            out[vid] = float(v[j])
    return out


def witness_ok(net: Network, prop: SafetyProperty, x, eps: float = EPS_SAT) -> bool:
    """A SAT witness must sit in the box and violate the property, i.e.
    satisfy every negated constraint, within eps."""
    x = np.asarray(x, dtype=float)
    if x.shape != (net.n_inputs,):
        return False
    for xi, (lo, hi) in zip(x, prop.box):
        if xi < lo - eps or xi > hi + eps:
            return False
    if not prop.constraints:
        return False  # empty negation: nothing can violate the property
    y = evaluate(net, x)
    for c in prop.constraints:
        if float(np.dot(c.coeffs, y)) < c.threshold - eps:
            return False
    return True


def make_robustness_queries(net, x0, r, domain=None) -> list[SafetyProperty]:
    """One query per competing label: SAT of any query = not robust at x0.

    The negated constraint is y_j - y_c >= 0 (a tie already counts against
    robustness). Raises when the label at x0 is itself tied.
    """
    if r <= 0:
        raise ValueError("radius must be positive")
    x0 = np.asarray(x0, dtype=float)
    y0 = evaluate(net, x0)
    c = int(np.argmax(y0))
    if sum(1 for v in y0 if v == y0[c]) > 1:
        raise ValueError("argmax tie at the centre point; label undefined")
    box = []
    for i, xi in enumerate(x0):
        lo, hi = xi - r, xi + r
        if domain is not None:
            lo, hi = max(lo, domain[i][0]), min(hi, domain[i][1])
        box.append((float(lo), float(hi)))
    queries = []
    for j in range(net.n_outputs):
        if j == c:
            continue
        coeffs = [0.0] * net.n_outputs
        coeffs[j] = 1.0
        coeffs[c] = -1.0
        queries.append(SafetyProperty(tuple(box), (LinearConstraint(tuple(coeffs), 0.0),)))
    return queries


# ---------------------------------------------------------------------------
# text formats

def _tokens(path: str) -> list[str]:
    toks: list[str] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            body = line.split("#", 1)[0]
            toks.extend(body.split())
    return toks


def load_network(path: str) -> Network:
    """Parse the `relunet` format (see save_network for the layout)."""
    toks = _tokens(path)
    pos = 0

    def take(n: int) -> list[str]:
        nonlocal pos
        if pos + n > len(toks):
            raise ValueError(f"{path}: truncated network file")
        out = toks[pos:pos + n]
        pos += n
        return out

    magic, version = take(2)
    if magic != "relunet" or version != "1":
        raise ValueError(f"{path}: not a relunet version 1 file")
    if take(1)[0] != "dims":
        raise ValueError(f"{path}: expected 'dims'")
    dims = []
    while pos < len(toks) and toks[pos] != "layer":
        dims.append(int(take(1)[0]))
    if len(dims) < 2:
        raise ValueError(f"{path}: need at least input and output dims")
    weights, biases, acts = [], [], []
    for i in range(1, len(dims)):
        kw, idx, act = take(3)
        if kw != "layer" or int(idx) != i:
            raise ValueError(f"{path}: expected 'layer {i}'")
        if act not in (RELU, NONE):
            raise ValueError(f"{path}: bad activation {act!r}")
        acts.append(act)
        rows = [[float(t) for t in take(dims[i - 1])] for _ in range(dims[i])]
        bias = [float(t) for t in take(dims[i])]
        weights.append(rows)
        biases.append(bias)
    if pos != len(toks):
        raise ValueError(f"{path}: trailing tokens")
    return Network(weights, biases, acts)


def save_network(net: Network, path: str) -> None:
    """Write the canonical relunet form; floats use shortest round-trip repr."""
    lines = ["relunet 1", "dims " + " ".join(str(d) for d in net.dims)]
    for i, (w, b, act) in enumerate(zip(net.weights, net.biases, net.activations)):
        lines.append(f"layer {i + 1} {act}")
        for row in w:
            lines.append(" ".join(repr(float(v)) for v in row))
        lines.append(" ".join(repr(float(v)) for v in b))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_property(path: str) -> SafetyProperty:
    toks = _tokens(path)
    if not toks or toks[0] != "box":
        raise ValueError(f"{path}: property file must start with 'box'")
    pos = 1
    box = []
    while pos < len(toks) and toks[pos] != "ge":
        if pos + 1 >= len(toks):
            raise ValueError(f"{path}: dangling box bound")
        box.append((float(toks[pos]), float(toks[pos + 1])))
        pos += 2
    constraints = []
    n = None
    while pos < len(toks):
        if toks[pos] != "ge":
            raise ValueError(f"{path}: expected 'ge', got {toks[pos]!r}")
        pos += 1
        rest = []
        while pos < len(toks) and toks[pos] != "ge":
            rest.append(float(toks[pos]))
            pos += 1
        if len(rest) < 2:
            raise ValueError(f"{path}: 'ge' needs a threshold and coefficients")
        if n is None:
            n = len(rest) - 1
        elif len(rest) - 1 != n:
            raise ValueError(f"{path}: inconsistent coefficient counts")
        constraints.append(LinearConstraint(tuple(rest[1:]), rest[0]))
    return SafetyProperty(tuple(box), tuple(constraints))


def save_property(prop: SafetyProperty, path: str) -> None:
    lines = ["box"]
    for lo, hi in prop.box:
        lines.append(f"{lo!r} {hi!r}")
    for c in prop.constraints:
        lines.append("ge " + " ".join(repr(float(v)) for v in (c.threshold, *c.coeffs)))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def property_hash(prop: SafetyProperty) -> str:
    parts = ["box"]
    for lo, hi in prop.box:
        parts.append(f"{lo!r},{hi!r}")
    for c in prop.constraints:
        parts.append("ge:" + repr(float(c.threshold)) + ":" + ",".join(repr(float(v)) for v in c.coeffs))
    return hashlib.sha256("|".join(parts).encode()).hexdigest()[:16]
