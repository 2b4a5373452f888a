"""Safety-property verification for small feed-forward ReLU networks.

The from-scratch solver combines symbolic interval analysis with a
Reluplex-style tableau search and records every branch decision in a proof
tree. After a weight modification, the incremental driver re-verifies by
replaying the stored per-branch certificates against the new network,
falling back to search only where a certificate no longer holds.
"""

from .bench import CompareReport, Perturbation, compare, oracle, perturb
from .deeppoly import Assertion, Bounds, analyze, is_property_refuted
from .incremental import (
    IncrementalReport,
    ShapeMismatchError,
    solve_leaf,
    verify_incremental,
)
from .model import (
    LinearConstraint,
    Network,
    SafetyProperty,
    Verdict,
    evaluate,
    load_network,
    load_property,
    property_hash,
    save_network,
    save_property,
    witness_ok,
)
from .prooftree import ProofTree, deserialize, from_json
from .solver import SearchParams, solve

__version__ = "0.1.0"

__all__ = [
    "Assertion",
    "Bounds",
    "CompareReport",
    "IncrementalReport",
    "LinearConstraint",
    "Network",
    "Perturbation",
    "ProofTree",
    "SafetyProperty",
    "SearchParams",
    "ShapeMismatchError",
    "Verdict",
    "analyze",
    "compare",
    "deserialize",
    "evaluate",
    "from_json",
    "is_property_refuted",
    "load_network",
    "load_property",
    "oracle",
    "perturb",
    "property_hash",
    "save_network",
    "save_property",
    "solve",
    "solve_leaf",
    "verify_incremental",
    "witness_ok",
]
