"""From-scratch verification: budgeted local repair inside each branch,
abstraction-guided splitting on the most-conflicted uncertain ReLU, DFS over
sign assertions, full proof tree recording.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import prooftree as pt
from .deeppoly import NONNEG, NONPOS, Assertion, analyze, is_property_refuted
from .model import UNSAT, Verdict, property_hash, witness_ok
from .simplex import (
    Satisfied,
    Stuck,
    check_unsat_rows,
    initialize,
    refresh_bounds,
    repair_step,
)


@dataclass(frozen=True)
class SearchParams:
    """local_budget: repair steps per node (None = max(200, 50 x uncertain
    ReLUs of the node)); max_depth: split depth cap (None = one level per
    ReLU neuron); seed is carried for interface stability, the default
    search is fully deterministic and ignores it."""

    local_budget: int | None = None
    max_depth: int | None = None
    seed: int = 0


def _uncertain(lay, bounds) -> list[int]:
    return [
        pre
        for pre, _ in lay.relu_pairs
        if bounds.lo.get(pre, 0.0) < 0.0 < bounds.hi.get(pre, 0.0)
    ]


def _node_budget(params: SearchParams, n_uncertain: int) -> int:
    if params.local_budget is not None:
        return max(1, params.local_budget)
    return max(200, 50 * n_uncertain)


def solve(net, prop, params: SearchParams | None = None):
    """Decide (net, prop.box, negated property) and record the search.

    Returns (Verdict, ProofTree). SAT stops the whole search; branches never
    visited stay in the tree as Unsolved leaves.
    """
    params = params or SearchParams()
    tree = pt.ProofTree(net.dims, property_hash(prop))
    bounds = analyze(net, prop.box)
    if is_property_refuted(bounds, prop):
        tree.root.status = pt.UNSAT
        tree.verdict = "unsat"
        return UNSAT, tree
    cfg = initialize(net, prop, bounds)
    max_depth = params.max_depth if params.max_depth is not None else len(net.layout.relu_pairs)
    witness = _visit(net, prop, params, tree, 0, cfg, bounds, 0, max_depth, frozenset())
    if witness is None:
        tree.verdict = "unsat"
        return UNSAT, tree
    tree.verdict = "sat"
    return Verdict(True, witness), tree


def _visit(net, prop, params, tree, nid, cfg, bounds, depth, max_depth,
           base=frozenset()):
    """Solve one branch; returns a witness or None (branch UNSAT).

    The node's configuration is exclusively owned here; children get copies.
    `base` holds assertions established outside this tree (re-verification
    seeds a branch search below stored edges), so children are analyzed
    under base plus their own edge path.
    """
    lay = net.layout
    node = tree.nodes[nid]
    candidates = _uncertain(lay, bounds)
    budget = _node_budget(params, len(candidates))
    steps = 0
    while True:
        verdict = check_unsat_rows(cfg)
        if not verdict.feasible:
            node.status = pt.UNSAT
            node.basis = tuple(sorted(cfg.rows))
            node.key_row_var = verdict.unsat_row
            return None
        # the budget only rations work before a split; a branch with every
        # ReLU decided is a pure LP and the loop runs it to a decision
        if steps >= budget and candidates:
            break
        steps += 1
        step = repair_step(cfg)
        if isinstance(step, Satisfied):
            if not witness_ok(net, prop, step.witness):
                raise RuntimeError(f"local search produced an invalid witness {step.witness}")
            node.status = pt.SAT
            node.witness = step.witness
            node.basis = tuple(sorted(cfg.rows))
            return step.witness
        if isinstance(step, Stuck):
            if candidates:
                break
            if step.stuck_row is not None:
                # pinned row: exact infeasibility certificate at these bounds
                node.status = pt.UNSAT
                node.basis = tuple(sorted(cfg.rows))
                node.key_row_var = step.stuck_row
                return None
            raise RuntimeError("local search stuck on a fully decided branch")

    if depth >= max_depth:
        # the depth cap forbids the only remaining move
        raise RuntimeError("search stuck with no uncertain neuron left to split")
    split = max(candidates, key=lambda p: (cfg.violations.get(p, 0), -p))
    node.status = pt.INTERNAL
    kids = [tree.add_child(nid, Assertion(split, sign)) for sign in (NONPOS, NONNEG)]

    witness = None
    for cid in kids:
        if witness is not None:
            break  # later siblings stay Unsolved
        child = tree.nodes[cid]
        child_bounds = analyze(net, prop.box, sorted(base | tree.asserts_of(cid)))
        if child_bounds.infeasible or is_property_refuted(child_bounds, prop):
            # region empty or property interval-impossible: nothing to search
            child.status = pt.UNSAT
            continue
        ccfg = cfg.copy()
        refresh_bounds(ccfg, net, prop, child_bounds)
        witness = _visit(net, prop, params, tree, cid, ccfg, child_bounds,
                         depth + 1, max_depth, base)
    return witness
