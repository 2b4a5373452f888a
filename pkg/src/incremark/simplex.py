"""Sparse-tableau simplex layer: configurations, pivoting, bound repair,
the interval UNSAT row test, and Gaussian restoration of a stored basis.

A Configuration owns a tableau (one row per basic variable, written over the
non-basic ones), per-variable bounds, and a row-exact assignment. Rows carry
no constants: every equation has a slack variable pinned by l = u, so a pivot
is pure coefficient algebra.
"""

from __future__ import annotations

from dataclasses import dataclass

from .constants import COEF_EPS, EPS_BOUND, EPS_PIVOT, EPS_RELU


class PivotError(ValueError):
    """Requested pivot coefficient is numerically zero."""


class SingularBasisError(Exception):
    """gauss_to_basis could not make some target variable basic."""


@dataclass(frozen=True)
class RowVerdict:
    """Feasible when unsat_row is None; otherwise the basic id of the first
    row contradicting its own bounds by interval arithmetic."""

    unsat_row: int | None = None

    @property
    def feasible(self) -> bool:
        return self.unsat_row is None


FEASIBLE = RowVerdict()


@dataclass(frozen=True)
class Progress:
    pass


@dataclass(frozen=True)
class Satisfied:
    witness: tuple[float, ...]


@dataclass(frozen=True)
class Stuck:
    """No single repair applies. stuck_row is set when the blocker was a
    bound violation whose row has no eligible entering variable (the row is
    then an exact certificate at the current bounds)."""

    violations: dict[int, int]
    stuck_row: int | None = None


PROGRESS = Progress()

StepResult = Progress | Satisfied | Stuck


class Configuration:
    """Tableau + bounds + assignment + ReLU pair bookkeeping.

    rows: basic id -> {non-basic id: coefficient}
    prop_slacks: property-constraint index -> slack variable id (multi-output
    constraints only; single-output ones become direct bounds).
    """

    def __init__(self, rows, lo, hi, alpha, relu_pairs, input_ids, prop_slacks=None):
        self.rows: dict[int, dict[int, float]] = rows
        self.lo: dict[int, float] = lo
        self.hi: dict[int, float] = hi
        self.alpha: dict[int, float] = alpha
        self.relu_pairs: list[tuple[int, int]] = list(relu_pairs)
        self.input_ids: list[int] = list(input_ids)
        self.prop_slacks: dict[int, int] = dict(prop_slacks or {})
        self.violations: dict[int, int] = {pre: 0 for pre, _ in self.relu_pairs}

    @property
    def basis(self) -> set[int]:
        return set(self.rows)

    def copy(self) -> "Configuration":
        c = Configuration(
            {b: dict(r) for b, r in self.rows.items()},
            dict(self.lo),
            dict(self.hi),
            dict(self.alpha),
            self.relu_pairs,
            self.input_ids,
            self.prop_slacks,
        )
        c.violations = dict(self.violations)
        return c

    def row_value(self, basic: int) -> float:
        return sum(c * self.alpha[k] for k, c in sorted(self.rows[basic].items()))

    def witness(self) -> tuple[float, ...]:
        return tuple(self.alpha[i] for i in self.input_ids)


def recompute(cfg: Configuration) -> None:
    """Re-solve every row for its basic variable from the non-basic alphas."""
    for b in cfg.rows:
        cfg.alpha[b] = cfg.row_value(b)


def pivot(cfg: Configuration, leaving: int, entering: int) -> Configuration:
    """Swap a basic and a non-basic variable, substituting everywhere.

    Mutates cfg in place and returns it. Solution set is unchanged.
    """
    row = cfg.rows[leaving]
    a = row.get(entering, 0.0)
    if abs(a) <= EPS_PIVOT:
        raise PivotError(f"pivot coefficient {a!r} for ({leaving}, {entering})")
    new_row = {leaving: 1.0 / a}
    for k, c in row.items():
        if k == entering:
            continue
        v = -c / a
        if abs(v) > COEF_EPS:
            new_row[k] = v
    del cfg.rows[leaving]
    for r in cfg.rows.values():
        c = r.pop(entering, 0.0)
        if c == 0.0:
            continue
        for k, v in new_row.items():
            w = r.get(k, 0.0) + c * v
            if abs(w) > COEF_EPS:
                r[k] = w
            elif k in r:
                del r[k]
    cfg.rows[entering] = new_row
    return cfg


def row_interval(cfg: Configuration, basic: int) -> tuple[float, float]:
    """Interval-arithmetic range of a row's right-hand side under l, u."""
    lo = hi = 0.0
    for k, c in cfg.rows[basic].items():
        if c > 0:
            lo += c * cfg.lo[k]
            hi += c * cfg.hi[k]
        else:
            lo += c * cfg.hi[k]
            hi += c * cfg.lo[k]
    return lo, hi


def row_unsat(cfg: Configuration, basic: int, eps: float = EPS_BOUND) -> bool:
    """Does this row contradict its basic variable's bounds with margin > eps?"""
    rlo, rhi = row_interval(cfg, basic)
    return cfg.lo[basic] > rhi + eps or cfg.hi[basic] < rlo - eps


def check_unsat_rows(cfg: Configuration, eps: float = EPS_BOUND) -> RowVerdict:
    """First contradicting row by basic-variable id order, else Feasible."""
    for b in sorted(cfg.rows):
        if row_unsat(cfg, b, eps):
            return RowVerdict(b)
    return FEASIBLE


def bound_violation(cfg: Configuration, eps: float = EPS_BOUND):
    """Lowest-id basic variable outside its bounds, with the needed direction.

    Returns (basic id, need_up) or None. Non-basic variables satisfy their
    bounds by construction (clamped whenever bounds change).
    """
    for b in sorted(cfg.rows):
        a = cfg.alpha[b]
        if a < cfg.lo[b] - eps:
            return b, True
        if a > cfg.hi[b] + eps:
            return b, False
    return None


def entering_for(cfg: Configuration, basic: int, need_up: bool) -> int | None:
    """Bland-style entering choice: lowest-id non-basic in the row whose
    coefficient sign permits moving the basic variable the needed way and
    whose own bound in that movement direction is not saturated."""
    for k in sorted(cfg.rows[basic]):
        c = cfg.rows[basic][k]
        if abs(c) <= EPS_PIVOT:
            continue
        increase_k = (c > 0) == need_up
        if increase_k:
            if cfg.alpha[k] < cfg.hi[k]:
                return k
        else:
            if cfg.alpha[k] > cfg.lo[k]:
                return k
    return None


def set_variable(cfg: Configuration, vid: int, value: float) -> bool:
    """Drive one variable to a value within its bounds, pivoting it out of
    the basis first when needed. False when the move is impossible."""
    lo, hi = cfg.lo[vid], cfg.hi[vid]
    if value < lo - EPS_RELU or value > hi + EPS_RELU:
        return False
    value = min(max(value, lo), hi)
    if vid in cfg.rows:
        d = value - cfg.alpha[vid]
        if abs(d) <= EPS_RELU / 2:
            return False
        ent = entering_for(cfg, vid, d > 0)
        if ent is None:
            return False
        pivot(cfg, vid, ent)
    cfg.alpha[vid] = value
    recompute(cfg)
    return True


def violated_relu_pairs(cfg: Configuration) -> list[tuple[int, int]]:
    out = []
    for pre, post in cfg.relu_pairs:
        if abs(cfg.alpha[post] - max(0.0, cfg.alpha[pre])) > EPS_RELU:
            out.append((pre, post))
    return out


def repair_step(cfg: Configuration) -> StepResult:
    """One move of the local search.

    Priority: restore non-basic bound feasibility (only possible after an
    external bound refresh), then fix the lowest-id basic bound violation by
    pivot-and-update, then fix the lowest-id violated ReLU pair. Satisfied
    when nothing is violated.
    """
    for v in sorted(cfg.alpha):
        if v in cfg.rows:
            continue
        a = cfg.alpha[v]
        clamped = min(max(a, cfg.lo[v]), cfg.hi[v])
        if clamped != a:
            cfg.alpha[v] = clamped
            recompute(cfg)
            return PROGRESS

    bv = bound_violation(cfg)
    if bv is not None:
        b, need_up = bv
        ent = entering_for(cfg, b, need_up)
        if ent is None:
            return Stuck(dict(cfg.violations), stuck_row=b)
        target = cfg.lo[b] if need_up else cfg.hi[b]
        pivot(cfg, b, ent)
        cfg.alpha[b] = target
        recompute(cfg)
        return PROGRESS

    bad = violated_relu_pairs(cfg)
    if bad:
        pre, post = bad[0]
        cfg.violations[pre] = cfg.violations.get(pre, 0) + 1
        if set_variable(cfg, post, max(0.0, cfg.alpha[pre])):
            return PROGRESS
        if set_variable(cfg, pre, cfg.alpha[post]):
            return PROGRESS
        return Stuck(dict(cfg.violations))

    return Satisfied(cfg.witness())


def gauss_to_basis(cfg0: Configuration, target) -> Configuration:
    """Re-express a copy of cfg0's tableau over the target basis.

    Sequential pivoting, partial pivoting on coefficient magnitude among rows
    whose basic variable is not itself a target. Raises SingularBasisError
    when some target variable cannot enter.
    """
    target = set(target)
    if len(target) != len(cfg0.rows):
        raise ValueError(f"target basis size {len(target)} != row count {len(cfg0.rows)}")
    cfg = cfg0.copy()
    for t in sorted(target):
        if t in cfg.rows:
            continue
        best_b, best_c = None, 0.0
        for b in sorted(cfg.rows):
            if b in target:
                continue
            c = cfg.rows[b].get(t, 0.0)
            if abs(c) > EPS_PIVOT and abs(c) > abs(best_c):
                best_b, best_c = b, c
        if best_b is None:
            raise SingularBasisError(f"variable {t} cannot be made basic")
        pivot(cfg, best_b, t)
    recompute(cfg)
    return cfg


# ---------------------------------------------------------------------------
# building the initial configuration

def _define_row(rows: dict[int, dict[int, float]], basic: int, expr: dict[int, float]) -> None:
    """Install basic = expr, substituting already-basic variables so the RHS
    only mentions non-basics."""
    out: dict[int, float] = {}
    stack = list(expr.items())
    while stack:
        k, c = stack.pop()
        if k in rows:
            stack.extend((k2, c * c2) for k2, c2 in rows[k].items())
        else:
            out[k] = out.get(k, 0.0) + c
    rows[basic] = {k: v for k, v in sorted(out.items()) if abs(v) > COEF_EPS}


def _apply_property(lay, prop, lo, hi, prop_slacks) -> None:
    """Fold the negated-property constraints into the bound maps.

    Single-output constraints tighten that output's interval directly.
    Multi-output ones bound their slack row: l = threshold, u = the interval
    upper bound of the expression (floored at the threshold so a refuted-level
    contradiction shows up in the row test, not as an inverted interval).
    """
    for idx, c in enumerate(prop.constraints):
        terms = [(lay.output_ids[k], a) for k, a in enumerate(c.coeffs) if a != 0.0]
        if len(terms) == 1:
            vid, a = terms[0]
            if a > 0:
                lo[vid] = max(lo[vid], c.threshold / a)
            else:
                hi[vid] = min(hi[vid], c.threshold / a)
        elif terms:
            sid = prop_slacks[idx]
            ub = 0.0
            for vid, a in terms:
                ub += a * (hi[vid] if a > 0 else lo[vid])
            lo[sid] = c.threshold
            hi[sid] = max(ub, c.threshold)


def initialize(net, prop, bounds) -> Configuration:
    """Standard encoding: affine rows (pre basic), ReLU inequality rows
    (slack basic), property rows (property slack basic); bounds from the
    abstraction; non-basics start at their lower bound."""
    if not prop.constraints:
        raise ValueError("empty negation is decided before encoding")
    lay = net.layout
    lo = dict(bounds.lo)
    hi = dict(bounds.hi)

    rows: dict[int, dict[int, float]] = {}
    prev = lay.input_ids
    for li in range(net.n_layers):
        w = net.weights[li]
        for j, pre in enumerate(lay.pre_ids[li]):
            expr = {prev[k]: float(w[j, k]) for k in range(w.shape[1]) if w[j, k] != 0.0}
            expr[lay.affine_const_slack[pre]] = -1.0
            _define_row(rows, pre, expr)
        prev = lay.post_ids[li]
    for pair in lay.relu_pairs:
        pre, post = pair
        _define_row(
            rows,
            lay.relu_slack[pair],
            {post: 1.0, pre: -1.0, lay.relu_const_slack[pair]: -1.0},
        )

    prop_slacks: dict[int, int] = {}
    nxt = lay.n_vars
    for idx, c in enumerate(prop.constraints):
        terms = {lay.output_ids[k]: float(a) for k, a in enumerate(c.coeffs) if a != 0.0}
        if len(terms) >= 2:
            prop_slacks[idx] = nxt
            _define_row(rows, nxt, terms)
            nxt += 1
    _apply_property(lay, prop, lo, hi, prop_slacks)

    alpha = {v: lo[v] for v in lo if v not in rows}
    cfg = Configuration(rows, lo, hi, alpha, lay.relu_pairs, lay.input_ids, prop_slacks)
    recompute(cfg)
    return cfg


def refresh_bounds(cfg: Configuration, net, prop, bounds) -> None:
    """Replace cfg's bounds with freshly analyzed ones (same variable set),
    clamp non-basics back into range, and re-solve the basics. Violation
    counters restart: they score the upcoming local search only."""
    lay = net.layout
    lo = dict(bounds.lo)
    hi = dict(bounds.hi)
    _apply_property(lay, prop, lo, hi, cfg.prop_slacks)
    cfg.lo, cfg.hi = lo, hi
    for v in cfg.alpha:
        if v not in cfg.rows:
            cfg.alpha[v] = min(max(cfg.alpha[v], lo[v]), hi[v])
    recompute(cfg)
    cfg.violations = {pre: 0 for pre, _ in cfg.relu_pairs}


def dump(cfg: Configuration, title: str | None = None) -> str:
    """Human-readable tableau, bounds, and assignment (debug aid)."""

    def name(v: int) -> str:
        return f"x{v + 1}"

    lines = [] if title is None else [f"[{title}]"]
    for b in sorted(cfg.rows):
        terms = []
        for k in sorted(cfg.rows[b]):
            c = cfg.rows[b][k]
            sign = "-" if c < 0 else ("+" if terms else "")
            mag = abs(c)
            coef = "" if abs(mag - 1.0) < 1e-12 else f"{mag:g}*"
            terms.append(f"{sign} {coef}{name(k)}".strip())
        lines.append(f"{name(b)} = " + " ".join(terms) if terms else f"{name(b)} = 0")
    lines.append("")
    for v in sorted(cfg.lo):
        mark = "B" if v in cfg.rows else " "
        lines.append(
            f"{mark} {name(v):>6}  in [{cfg.lo[v]:.6g}, {cfg.hi[v]:.6g}]  alpha={cfg.alpha[v]:.6g}"
        )
    return "\n".join(lines)
