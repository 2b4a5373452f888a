"""Symbolic interval analysis over the network (DeepPoly-style).

Each post-activation neuron carries linear lower/upper bounds over its
pre-activation neuron; concrete intervals come from substituting those
relations all the way back to the input box. Sign assertions clamp the
pre-activation interval *before* the ReLU case split, so asserted branches
propagate tightened relaxations downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constants import EPS_BOUND
from .model import RELU, Network

NONNEG = "nonneg"
NONPOS = "nonpos"


@dataclass(frozen=True, order=True)
class Assertion:
    neuron: int
    sign: str  # NONNEG | NONPOS

    def negated(self) -> "Assertion":
        return Assertion(self.neuron, NONPOS if self.sign == NONNEG else NONNEG)


@dataclass
class Bounds:
    """Concrete intervals per variable id, plus each post neuron's linear
    relations over its pre neuron: post >= lc*pre + lk, post <= uc*pre + uk.

    Covers network neurons and the structural slack variables (the ReLU
    inequality slack post - pre and the per-equation constant slacks).
    `infeasible` means some assertion emptied a pre-activation interval, in
    which case the remaining dicts are only partially filled.
    """

    lo: dict[int, float] = field(default_factory=dict)
    hi: dict[int, float] = field(default_factory=dict)
    relu_lower: dict[int, tuple[float, float]] = field(default_factory=dict)
    relu_upper: dict[int, tuple[float, float]] = field(default_factory=dict)
    output_ids: tuple[int, ...] = ()
    infeasible: bool = False

    def interval(self, vid: int) -> tuple[float, float]:
        return self.lo[vid], self.hi[vid]


def is_property_refuted(bounds: Bounds, prop, eps: float = EPS_BOUND) -> bool:
    """True when no point within `bounds` can satisfy the property.

    An empty constraint list is refuted vacuously. Otherwise some conjunct
    a.y >= c must be interval-impossible: ub(a.y) < c - eps.
    """
    if not prop.constraints:
        return True
    if bounds.infeasible:
        return True
    for c in prop.constraints:
        if len(c.coeffs) != len(bounds.output_ids):
            raise ValueError("constraint arity does not match the network outputs")
        ub = 0.0
        for a, vid in zip(c.coeffs, bounds.output_ids):
            if a > 0:
                ub += a * bounds.hi[vid]
            elif a < 0:
                ub += a * bounds.lo[vid]
        if ub < c.threshold - eps:
            return True
    return False


def analyze(net: Network, box, asserts=()) -> Bounds:
    """Run the abstraction under sign assertions; `box` is passed explicitly
    so callers can re-propagate with a tightened one."""
    lay = net.layout
    res = Bounds(output_ids=tuple(lay.output_ids))
    by_neuron: dict[int, list[str]] = {}
    for a in asserts:
        by_neuron.setdefault(a.neuron, []).append(a.sign)

    lo0 = np.array([b[0] for b in box], dtype=float)
    hi0 = np.array([b[1] for b in box], dtype=float)
    if len(lo0) != net.n_inputs:
        raise ValueError("box arity does not match the network inputs")
    for j, vid in enumerate(lay.input_ids):
        res.lo[vid], res.hi[vid] = float(lo0[j]), float(hi0[j])

    # Per processed layer: relation vectors (lower coef, lower const, upper
    # coef, upper const) of post over pre, used during back-substitution.
    rel: list[tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]] = []

    def back(level: int, coefs: np.ndarray, const: float, upper: bool) -> float:
        """Bound coefs . post_level + const over the input box.

        level 0 means the inputs themselves; level j >= 1 means the
        post-activation vector of layer j-1.
        """
        c = coefs.astype(float, copy=True)
        k = const
        for j in range(level, 0, -1):
            lc, lk, uc, uk = rel[j - 1]
            take_u = (c > 0) if upper else (c <= 0)
            k += float(np.sum(np.where(take_u, uk, lk) * c))
            c = np.where(take_u, uc, lc) * c
            w, b = net.weights[j - 1], net.biases[j - 1]
            k += float(c @ b)
            c = c @ w
        if upper:
            return k + float(np.sum(np.where(c > 0, c * hi0, c * lo0)))
        return k + float(np.sum(np.where(c > 0, c * lo0, c * hi0)))

    for li in range(net.n_layers):
        w = net.weights[li]
        n = w.shape[0]
        pre_lo = np.array(
            [back(li, w[j], float(net.biases[li][j]), upper=False) for j in range(n)]
        )
        pre_hi = np.array(
            [back(li, w[j], float(net.biases[li][j]), upper=True) for j in range(n)]
        )

        for j, vid in enumerate(lay.pre_ids[li]):
            lo, hi = pre_lo[j], pre_hi[j]
            for sign in by_neuron.get(vid, ()):
                if sign == NONNEG:
                    lo = max(lo, 0.0)
                else:
                    hi = min(hi, 0.0)
            if lo > hi:
                if lo > hi + 1e-12:
                    res.infeasible = True
                    return res
                lo = hi  # tolerance-level crossing, collapse to a point
            pre_lo[j], pre_hi[j] = lo, hi
            res.lo[vid], res.hi[vid] = float(lo), float(hi)

        if net.activations[li] == RELU:
            lc = np.zeros(n)
            lk = np.zeros(n)
            uc = np.zeros(n)
            uk = np.zeros(n)
            for j in range(n):
                l, u = pre_lo[j], pre_hi[j]
                if l >= 0.0:
                    lc[j] = uc[j] = 1.0
                elif u <= 0.0:
                    pass  # both relations are the zero function
                else:
                    s = u / (u - l)
                    uc[j], uk[j] = s, -s * l
                    # lower relation stays 0 for uncertain neurons
            rel.append((lc, lk, uc, uk))
            eye = np.eye(n)
            for j, vid in enumerate(lay.post_ids[li]):
                plo = back(li + 1, eye[j], 0.0, upper=False)
                phi = back(li + 1, eye[j], 0.0, upper=True)
                res.lo[vid] = float(max(plo, 0.0))
                res.hi[vid] = float(max(phi, 0.0))
                res.relu_lower[vid] = (float(lc[j]), float(lk[j]))
                res.relu_upper[vid] = (float(uc[j]), float(uk[j]))
        else:
            # identity activation: post ids alias the pre ids
            rel.append((np.ones(n), np.zeros(n), np.ones(n), np.zeros(n)))

    # Structural slack intervals follow from the pre-activation intervals.
    for (pre, post) in lay.relu_pairs:
        l, u = res.lo[pre], res.hi[pre]
        sid = lay.relu_slack[(pre, post)]
        res.lo[sid] = float(max(0.0, -u))
        res.hi[sid] = float(max(0.0, -l))
    for li in range(net.n_layers):
        for j, pre in enumerate(lay.pre_ids[li]):
            sid = lay.affine_const_slack[pre]
            res.lo[sid] = res.hi[sid] = -float(net.biases[li][j])
    for sid in lay.relu_const_slack.values():
        res.lo[sid] = res.hi[sid] = 0.0

    return res
