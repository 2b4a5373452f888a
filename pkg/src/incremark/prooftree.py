"""Labelled binary tree recording a search: edges carry sign assertions on
ReLU pre-activations, leaves carry the features needed to replay them later
(UNSAT: basis + key row variable; SAT: witness).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .constants import EPS_BOUND
from .deeppoly import NONNEG, NONPOS, Assertion, Bounds

INTERNAL = "internal"
UNSAT = "unsat"
SAT = "sat"
UNSOLVED = "unsolved"

FORMAT_VERSION = 1


@dataclass
class Node:
    id: int
    parent: int | None
    assertion: Assertion | None  # edge label from parent; None at the root
    status: str = UNSOLVED
    basis: tuple[int, ...] | None = None
    key_row_var: int | None = None
    witness: tuple[float, ...] | None = None
    children: list[int] = field(default_factory=list)


class ProofTree:
    def __init__(self, dims, prop_hash: str, verdict: str | None = None):
        self.dims = tuple(int(d) for d in dims)
        self.prop_hash = prop_hash
        self.verdict = verdict  # stored hint; recomputed on re-verification
        self.nodes: dict[int, Node] = {0: Node(0, None, None)}
        self._next = 1

    @property
    def root(self) -> Node:
        return self.nodes[0]

    def add_child(self, parent: int, assertion: Assertion, status: str = UNSOLVED) -> int:
        nid = self._next
        self._next += 1
        self.nodes[nid] = Node(nid, parent, assertion, status)
        self.nodes[parent].children.append(nid)
        return nid

    def asserts_of(self, v: int) -> frozenset[Assertion]:
        """Edge labels on the path root -> v (root itself carries none)."""
        out = []
        n = self.nodes[v]
        while n.parent is not None:
            out.append(n.assertion)
            n = self.nodes[n.parent]
        return frozenset(out)

    def distance(self, a: int, b: int) -> int:
        """Cardinality of the symmetric difference of the two Assert sets."""
        return len(self.asserts_of(a) ^ self.asserts_of(b))

    def leaves(self) -> list[int]:
        return [i for i in sorted(self.nodes) if not self.nodes[i].children]

    def leaves_with_status(self, status: str) -> list[int]:
        return [i for i in self.leaves() if self.nodes[i].status == status]

    def sat_leaf(self) -> int | None:
        for i in sorted(self.nodes):
            n = self.nodes[i]
            if n.status == SAT and not n.children:
                return i
        return None

    # -- pruning ------------------------------------------------------------

    def prune(self, bounds: Bounds, removed: list[int] | None = None) -> "ProofTree":
        """Drop every subtree whose edge assertion contradicts the intervals.

        nonneg on x is impossible when u(x) < -EPS_BOUND; nonpos when
        l(x) > EPS_BOUND. A dropped branch covers an empty region, so its
        root is kept as an UNSAT leaf with no stored proof (nothing to
        replay; ids of these leaves are appended to `removed`). Complementary
        assertions can never both contradict one interval, so no internal
        node loses both children.
        """
        out = self.copy()
        for nid in sorted(out.nodes):
            if nid not in out.nodes:
                continue  # already deleted with an ancestor
            n = out.nodes[nid]
            a = n.assertion
            if a is None or a.neuron not in bounds.hi:
                continue
            dead = (
                bounds.hi[a.neuron] < -EPS_BOUND
                if a.sign == NONNEG
                else bounds.lo[a.neuron] > EPS_BOUND
            )
            if not dead:
                continue
            for c in list(n.children):
                out._delete_subtree(c)
            n.children = []
            n.status = UNSAT
            n.basis = None
            n.key_row_var = None
            n.witness = None
            if removed is not None:
                removed.append(nid)
        return out

    def _delete_subtree(self, nid: int) -> None:
        n = self.nodes.pop(nid)
        for c in n.children:
            self._delete_subtree(c)

    def copy(self) -> "ProofTree":
        t = ProofTree(self.dims, self.prop_hash, self.verdict)
        t.nodes = {
            i: Node(n.id, n.parent, n.assertion, n.status, n.basis,
                    n.key_row_var, n.witness, list(n.children))
            for i, n in self.nodes.items()
        }
        t._next = self._next
        return t

    # -- invariants ----------------------------------------------------------

    def validate(self, n_rows: int | None = None) -> None:
        """Raise ValueError on a structural invariant breach."""
        sat_leaves = 0
        unsolved = 0
        for n in self.nodes.values():
            if n.children:
                if n.status != INTERNAL:
                    raise ValueError(f"node {n.id}: children but status {n.status}")
                if len(n.children) != 2:
                    raise ValueError(f"node {n.id}: {len(n.children)} children")
                a, b = (self.nodes[c].assertion for c in n.children)
                if a is None or b is None or a.neuron != b.neuron or a.sign == b.sign:
                    raise ValueError(f"node {n.id}: children are not complementary")
            else:
                if n.status == SAT:
                    sat_leaves += 1
                elif n.status == UNSOLVED:
                    unsolved += 1
                elif n.status == UNSAT and n.basis is not None:
                    if n.key_row_var not in n.basis:
                        raise ValueError(f"node {n.id}: key row var outside basis")
                    if n_rows is not None and len(n.basis) != n_rows:
                        raise ValueError(
                            f"node {n.id}: basis size {len(n.basis)} != row count {n_rows}"
                        )
        if sat_leaves > 1:
            raise ValueError("more than one SAT leaf")
        if unsolved and not sat_leaves:
            raise ValueError("unsolved leaves without a SAT leaf")

    # -- serialization --------------------------------------------------------

    def to_json(self) -> dict:
        nodes = []
        for i in sorted(self.nodes):
            n = self.nodes[i]
            nodes.append({
                "id": n.id,
                "parent": n.parent,
                "assert": None if n.assertion is None else
                          {"neuron": n.assertion.neuron, "sign": n.assertion.sign},
                "status": n.status,
                "basis": None if n.basis is None else sorted(n.basis),
                "key_row_var": n.key_row_var,
                "witness": None if n.witness is None else list(n.witness),
            })
        return {
            "version": FORMAT_VERSION,
            "dims": list(self.dims),
            "prop_hash": self.prop_hash,
            "verdict": self.verdict,
            "nodes": nodes,
        }

    def serialize(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=1)
            fh.write("\n")


def from_json(data: dict) -> ProofTree:
    if data.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported proof tree version {data.get('version')!r}")
    tree = ProofTree(data["dims"], data["prop_hash"], data.get("verdict"))
    tree.nodes = {}
    for nd in data["nodes"]:
        a = nd.get("assert")
        assertion = None if a is None else Assertion(int(a["neuron"]), a["sign"])
        if assertion is not None and assertion.sign not in (NONNEG, NONPOS):
            raise ValueError(f"bad assertion sign {assertion.sign!r}")
        node = Node(
            int(nd["id"]),
            nd["parent"],
            assertion,
            nd["status"],
            None if nd.get("basis") is None else tuple(nd["basis"]),
            nd.get("key_row_var"),
            None if nd.get("witness") is None else tuple(nd["witness"]),
        )
        tree.nodes[node.id] = node
    for n in tree.nodes.values():
        if n.parent is not None:
            tree.nodes[n.parent].children.append(n.id)
    for n in tree.nodes.values():
        n.children.sort()
    tree._next = max(tree.nodes) + 1 if tree.nodes else 0
    return tree


def deserialize(path: str) -> ProofTree:
    with open(path, "r", encoding="utf-8") as fh:
        return from_json(json.load(fh))
