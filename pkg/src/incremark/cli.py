"""Command-line front end.

Exit codes: 10 SAT, 20 UNSAT, 1 generic error (bad files, solver failure,
benchmark disagreement), 2 stored-tree mismatch against the network or
property being re-verified.
"""

from __future__ import annotations

import json
import logging
import os
import sys

import click

from . import bench as bench_mod
from . import prooftree
from .deeppoly import analyze
from .incremental import LAZY, STRICT, ShapeMismatchError, verify_incremental
from .model import load_network, load_property, save_network
from .simplex import dump, initialize
from .solver import SearchParams, solve

EXIT_SAT = 10
EXIT_UNSAT = 20
EXIT_ERROR = 1
EXIT_MISMATCH = 2

log = logging.getLogger("incremark")

_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


@click.group()
def main():
    """Verify safety properties of small ReLU networks, incrementally."""
    level = os.environ.get("INCREMARK_LOG", "error").lower()
    logging.basicConfig(level=_LEVELS.get(level, logging.ERROR),
                        format="%(levelname)s %(name)s: %(message)s")


def _load(loader, path: str, what: str):
    try:
        return loader(path)
    except (OSError, ValueError) as e:
        click.echo(f"error reading {what} {path}: {e}", err=True)
        sys.exit(EXIT_ERROR)


def _finish(verdict) -> None:
    if verdict.name == "sat":
        click.echo("SAT " + " ".join(repr(float(x)) for x in verdict.witness))
        sys.exit(EXIT_SAT)
    click.echo("UNSAT")
    sys.exit(EXIT_UNSAT)


@main.command()
@click.option("--net", "net_path", required=True, help="Network file.")
@click.option("--prop", "prop_path", required=True, help="Property file.")
@click.option("--tree-out", default=None, help="Write the proof tree here.")
@click.option("--budget", type=int, default=None, help="Repair steps per node.")
@click.option("--seed", type=int, default=0)
@click.option("--dump-tableau", is_flag=True, help="Print the initial tableau.")
def verify(net_path, prop_path, tree_out, budget, seed, dump_tableau):
    """Decide a property from scratch and record the proof tree."""
    net = _load(load_network, net_path, "network")
    prop = _load(load_property, prop_path, "property")
    if dump_tableau:
        cfg = initialize(net, prop, analyze(net, prop.box))
        click.echo(dump(cfg, "initial tableau"))
    try:
        verdict, tree = solve(net, prop, SearchParams(local_budget=budget, seed=seed))
    except RuntimeError as e:
        click.echo(f"solver error: {e}", err=True)
        sys.exit(EXIT_ERROR)
    log.info("verify %s: %s, %d tree nodes", net_path, verdict.name, len(tree.nodes))
    if tree_out:
        tree.serialize(tree_out)
    _finish(verdict)


@main.command()
@click.option("--net", "net_path", required=True, help="Modified network file.")
@click.option("--prop", "prop_path", required=True)
@click.option("--tree", "tree_path", required=True, help="Stored proof tree.")
@click.option("--mode", type=click.Choice([STRICT, LAZY]), default=LAZY)
@click.option("--tree-out", default=None, help="Write the updated tree here.")
@click.option("--report", "report_path", default=None, help="Write a JSON run report.")
@click.option("--budget", type=int, default=None)
def reverify(net_path, prop_path, tree_path, mode, tree_out, report_path, budget):
    """Re-verify a modified network guided by a stored proof tree."""
    net = _load(load_network, net_path, "network")
    prop = _load(load_property, prop_path, "property")
    tree = _load(prooftree.deserialize, tree_path, "proof tree")
    try:
        verdict, rep, new_tree = verify_incremental(
            net, prop, tree, mode=mode, params=SearchParams(local_budget=budget))
    except ShapeMismatchError as e:
        click.echo(f"stored tree does not match: {e}", err=True)
        sys.exit(EXIT_MISMATCH)
    except RuntimeError as e:
        click.echo(f"solver error: {e}", err=True)
        sys.exit(EXIT_ERROR)
    log.info("reverify %s: %s, replay %.1f%%", net_path, verdict.name, rep.replay_pct)
    if tree_out:
        new_tree.serialize(tree_out)
    if report_path:
        with open(report_path, "w", encoding="utf-8") as fh:
            json.dump(rep.to_json(), fh, indent=2)
            fh.write("\n")
    _finish(verdict)


@main.command()
@click.option("--net", "net_path", required=True)
@click.option("--prop", "prop_path", required=True, help="Supplies the input box.")
def bounds(net_path, prop_path):
    """Print abstraction intervals and the ReLU relational bounds."""
    net = _load(load_network, net_path, "network")
    prop = _load(load_property, prop_path, "property")
    b = analyze(net, prop.box)
    lay = net.layout
    shown: list[int] = list(lay.input_ids)
    for li in range(net.n_layers):
        shown.extend(lay.pre_ids[li])
        if lay.post_ids[li] is not lay.pre_ids[li]:
            shown.extend(lay.post_ids[li])
    for vid in shown:
        click.echo(f"x{vid + 1} in [{b.lo[vid]:.10g}, {b.hi[vid]:.10g}]")
    for pre, post in lay.relu_pairs:
        if post not in b.relu_upper:
            continue
        lc, lk = b.relu_lower[post]
        uc, uk = b.relu_upper[post]
        click.echo(f"x{post + 1} >= {lc:.10g}*x{pre + 1} + {lk:.10g}")
        click.echo(f"x{post + 1} <= {uc:.10g}*x{pre + 1} + {uk:.10g}")
    sys.exit(0)


@main.command()
@click.option("--net", "net_path", required=True)
@click.option("--out", "out_path", required=True, help="Perturbed network file.")
@click.option("--gamma", type=float, required=True)
@click.option("--fraction", type=float, default=1.0)
@click.option("--seed", type=int, default=0)
@click.option("--scope", type=click.Choice([bench_mod.WEIGHTS, bench_mod.WEIGHTS_AND_BIASES]),
              default=bench_mod.WEIGHTS)
def perturb(net_path, out_path, gamma, fraction, seed, scope):
    """Write a randomly perturbed copy of a network."""
    net = _load(load_network, net_path, "network")
    try:
        p = bench_mod.Perturbation(gamma, fraction, seed, scope)
    except ValueError as e:
        click.echo(str(e), err=True)
        sys.exit(EXIT_ERROR)
    save_network(bench_mod.perturb(net, p), out_path)
    sys.exit(0)


@main.command()
@click.option("--net", "net_path", required=True)
@click.option("--prop", "prop_path", required=True)
def oracle(net_path, prop_path):
    """Exact verdict by activation-pattern enumeration (small nets only)."""
    net = _load(load_network, net_path, "network")
    prop = _load(load_property, prop_path, "property")
    try:
        verdict = bench_mod.oracle(net, prop)
    except (ValueError, RuntimeError) as e:
        click.echo(f"oracle error: {e}", err=True)
        sys.exit(EXIT_ERROR)
    _finish(verdict)


@main.command()
@click.option("--net", "net_path", default=None,
              help="Base network (default: a seeded random 2-5-5-1 net).")
@click.option("--prop", "prop_path", default=None,
              help="Property (default: a seeded random threshold property).")
@click.option("--gammas", default="0.001,0.01,0.03,0.05", show_default=True)
@click.option("--fractions", default="0.1,0.3,0.5", show_default=True,
              help="Cycled across trials within each gamma.")
@click.option("--trials", type=int, default=25, show_default=True,
              help="Perturbations per gamma; rows = gammas x trials.")
# seed 18 gives a default instance with a nontrivial unsat proof tree
@click.option("--seed", type=int, default=18)
@click.option("--mode", type=click.Choice([STRICT, LAZY]), default=LAZY)
@click.option("--budget", type=int, default=None)
@click.option("--out", "out_path", required=True, help="CSV destination.")
def bench(net_path, prop_path, gammas, fractions, trials, seed, mode, budget, out_path):
    """Scratch-vs-incremental comparison over random perturbations."""
    try:
        gamma_vals = [float(g) for g in gammas.split(",") if g]
        fraction_vals = [float(f) for f in fractions.split(",") if f]
    except ValueError as e:
        click.echo(f"bad flag value: {e}", err=True)
        sys.exit(EXIT_ERROR)
    if net_path:
        net = _load(load_network, net_path, "network")
    else:
        net = bench_mod.random_network((2, 5, 5, 1), seed)
    if prop_path:
        prop = _load(load_property, prop_path, "property")
    else:
        prop = bench_mod.random_threshold_property(net, seed + 1)
    perts = []
    run = 0
    for g in gamma_vals:
        for t in range(trials):
            perts.append(bench_mod.Perturbation(
                g, fraction_vals[t % len(fraction_vals)], seed + 7919 * run))
            run += 1
    try:
        report = bench_mod.compare(net, prop, perts, modes=(mode,),
                                   params=SearchParams(local_budget=budget))
    except bench_mod.OracleDisagreement as e:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(e.csv_text)
        click.echo(f"disagreement: {e}", err=True)
        sys.exit(EXIT_ERROR)
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(report.csv_text)
    for line in report.summary_lines():
        click.echo(line)
    click.echo(f"rows={len(report.rows)} all_agree={str(report.all_agree).lower()}")
    sys.exit(0)


if __name__ == "__main__":
    main()
