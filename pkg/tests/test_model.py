import numpy as np
import pytest

from incremark.model import (
    UNSAT,
    LinearConstraint,
    Network,
    SafetyProperty,
    Verdict,
    evaluate,
    forward_values,
    load_network,
    load_property,
    make_robustness_queries,
    property_hash,
    save_network,
    save_property,
    witness_ok,
)

from conftest import BOX


def test_layout_demo_shape(demo_net):
    lay = demo_net.layout
    assert demo_net.dims == (2, 2, 1)
    assert lay.input_ids == [0, 1]
    assert lay.pre_ids == [[2, 3], [6]]
    assert lay.post_ids == [[4, 5], [6]]
    assert lay.output_ids == [6]
    assert lay.relu_pairs == [(2, 4), (3, 5)]
    assert lay.relu_slack == {(2, 4): 7, (3, 5): 8}
    assert lay.affine_const_slack == {2: 9, 3: 10, 6: 11}
    assert lay.relu_const_slack == {(2, 4): 12, (3, 5): 13}
    assert lay.n_vars == 14


def test_layout_final_none_layer_shares_ids(demo_net):
    lay = demo_net.layout
    assert lay.post_ids[-1] is lay.pre_ids[-1]


def test_layout_deeper_shape():
    net = Network(
        [np.zeros((8, 3)), np.zeros((1, 8))],
        [np.zeros(8), np.zeros(1)],
    )
    lay = net.layout
    assert lay.input_ids == [0, 1, 2]
    assert lay.pre_ids[0] == list(range(3, 11))
    assert lay.post_ids[0] == list(range(11, 19))
    assert lay.pre_ids[1] == [19]
    # 8 relu slacks, 9 affine consts, 8 relu consts after the neurons
    assert lay.n_vars == 20 + 8 + 9 + 8


def test_var_name_is_one_based(demo_net):
    assert demo_net.layout.var_name(0) == "x1"
    assert demo_net.layout.var_name(6) == "x7"


def test_evaluate_demo_witness(demo_net):
    y = evaluate(demo_net, (0.675, 0.05))
    assert y.shape == (1,)
    assert y[0] == 0.30000000000000004


def test_evaluate_fprime_point(fprime):
    y = evaluate(fprime, (0.714, 0.204))
    assert y[0] == pytest.approx(0.29988, abs=1e-12)


def test_evaluate_fdoubleprime_corner(fdoubleprime):
    # direct arithmetic: relu(0.34+1.34-0.05)*0.4 + relu(0.16+0.69-0.33)*0.6
    y = evaluate(fdoubleprime, (1.0, -1.0))
    assert y[0] == 0.9640000000000001


def test_evaluate_rejects_bad_shape(demo_net):
    with pytest.raises(ValueError):
        evaluate(demo_net, (0.1, 0.2, 0.3))


def test_forward_values_matches_evaluate(demo_net):
    x = (0.3, -0.4)
    vals = forward_values(demo_net, x)
    assert set(vals) == set(range(7))
    assert vals[0] == 0.3 and vals[1] == -0.4
    # pre-activations, then clamped posts
    assert vals[2] == pytest.approx(0.2 * 0.3 - 0.7 * -0.4 - 0.1)
    assert vals[4] == max(vals[2], 0.0)
    assert vals[5] == max(vals[3], 0.0)
    assert vals[6] == evaluate(demo_net, x)[0]


def test_witness_ok_accepts_demo_witness(demo_net, demo_prop):
    assert witness_ok(demo_net, demo_prop, (0.675, 0.05))


def test_witness_ok_rejects(demo_net, demo_prop):
    assert not witness_ok(demo_net, demo_prop, (1.5, 0.0))     # outside box
    assert not witness_ok(demo_net, demo_prop, (0.0, 0.0))     # y below threshold
    assert not witness_ok(demo_net, demo_prop, (0.675,))       # wrong arity
    empty = SafetyProperty(BOX, ())
    assert not witness_ok(demo_net, empty, (0.0, 0.0))


def test_witness_ok_tolerance(demo_net):
    # witness exactly eps/2 below the threshold still passes
    y = evaluate(demo_net, (0.675, 0.05))[0]
    tight = SafetyProperty(BOX, (LinearConstraint((1.0,), y + 5e-7),))
    assert witness_ok(demo_net, tight, (0.675, 0.05))
    far = SafetyProperty(BOX, (LinearConstraint((1.0,), y + 1e-5),))
    assert not witness_ok(demo_net, far, (0.675, 0.05))


def test_property_box_must_be_nonempty():
    with pytest.raises(ValueError):
        SafetyProperty(((0.5, -0.5),), ())


def test_verdict_names():
    assert Verdict(True, (0.0,)).name == "sat"
    assert UNSAT.name == "unsat"
    assert UNSAT.witness is None


def test_network_validation():
    with pytest.raises(ValueError):
        Network([[[1.0]]], [])                      # bias list shorter
    with pytest.raises(ValueError):
        Network([[[1.0]], [[1.0]]], [[0.0], [0.0]], ["none", "none"])
    with pytest.raises(ValueError):
        Network([[[1.0]]], [[0.0]], ["sigmoid"])
    with pytest.raises(ValueError):
        Network([[[1.0, 2.0]], [[1.0, 2.0]]], [[0.0], [0.0]])  # chain mismatch


def test_robustness_queries():
    net = Network([[[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]]], [[0.0, 0.0, 0.2]])
    qs = make_robustness_queries(net, (1.0, 0.0), 0.25)
    assert len(qs) == 2  # one per competing label, centre label 0 excluded
    for q in qs:
        assert q.box == ((0.75, 1.25), (-0.25, 0.25))
        assert len(q.constraints) == 1
        c = q.constraints[0]
        assert c.threshold == 0.0
        assert c.coeffs[0] == -1.0 and sum(c.coeffs) == 0.0


def test_robustness_queries_domain_clip():
    net = Network([[[1.0, 0.0], [0.0, 1.0]]], [[0.5, 0.0]])
    qs = make_robustness_queries(net, (0.875, 0.0), 0.25, domain=((0.0, 1.0), (0.0, 1.0)))
    assert qs[0].box == ((0.625, 1.0), (0.0, 0.25))


def test_robustness_queries_errors():
    net = Network([[[1.0, 0.0], [0.0, 1.0]]], [[0.0, 0.0]])
    with pytest.raises(ValueError):
        make_robustness_queries(net, (0.5, 0.5), 0.1)  # argmax tie
    with pytest.raises(ValueError):
        make_robustness_queries(net, (1.0, 0.0), 0.0)  # radius


def test_network_roundtrip(tmp_path, fdoubleprime):
    p = tmp_path / "n.rnn"
    save_network(fdoubleprime, str(p))
    back = load_network(str(p))
    assert back == fdoubleprime
    assert back.activations == ["relu", "none"]


def test_network_file_comments(tmp_path, demo_net):
    p = tmp_path / "c.rnn"
    save_network(demo_net, str(p))
    text = "# demo network\n" + p.read_text().replace("layer 1 relu", "layer 1 relu  # first")
    p.write_text(text)
    assert load_network(str(p)) == demo_net


def test_network_file_errors(tmp_path):
    p = tmp_path / "bad.rnn"
    p.write_text("relunet 2\ndims 1 1\nlayer 1 none\n1.0\n0.0\n")
    with pytest.raises(ValueError):
        load_network(str(p))
    p.write_text("relunet 1\ndims 1 1\nlayer 1 none\n1.0\n")
    with pytest.raises(ValueError):
        load_network(str(p))  # truncated
    p.write_text("relunet 1\ndims 1 1\nlayer 1 none\n1.0\n0.0\nextra\n")
    with pytest.raises(ValueError):
        load_network(str(p))  # trailing tokens
    p.write_text("relunet 1\ndims 1\nlayer 1 none\n")
    with pytest.raises(ValueError):
        load_network(str(p))  # single dim


def test_property_roundtrip(tmp_path, demo_prop):
    p = tmp_path / "p.prop"
    save_property(demo_prop, str(p))
    back = load_property(str(p))
    assert back == demo_prop


def test_property_multi_constraint_roundtrip(tmp_path):
    prop = SafetyProperty(
        ((-1.0, 1.0),),
        (LinearConstraint((1.0, -1.0), 0.0), LinearConstraint((0.25, 0.5), -0.125)),
    )
    p = tmp_path / "m.prop"
    save_property(prop, str(p))
    assert load_property(str(p)) == prop


def test_property_file_errors(tmp_path):
    p = tmp_path / "bad.prop"
    p.write_text("ge 0.3 1.0\n")
    with pytest.raises(ValueError):
        load_property(str(p))  # must start with box
    p.write_text("box\n-1.0 1.0\n-1.0\nge 0.3 1.0\n")
    with pytest.raises(ValueError):
        load_property(str(p))  # dangling bound
    p.write_text("box\n-1.0 1.0\nge 0.3\n")
    with pytest.raises(ValueError):
        load_property(str(p))  # constraint without coefficients
    p.write_text("box\n-1.0 1.0\nge 0.3 1.0\nge 0.1 1.0 2.0\n")
    with pytest.raises(ValueError):
        load_property(str(p))  # inconsistent arity


def test_property_hash_frozen(demo_prop):
    assert property_hash(demo_prop) == "833a2885059f3ff5"
    shifted = SafetyProperty(demo_prop.box, (LinearConstraint((1.0,), 0.31),))
    assert property_hash(shifted) != property_hash(demo_prop)


def test_data_files_match_fixtures(data_dir, demo_net, fprime, fdoubleprime, demo_prop):
    assert load_network(str(data_dir / "demo.rnn")) == demo_net
    assert load_network(str(data_dir / "fprime.rnn")) == fprime
    assert load_network(str(data_dir / "fdoubleprime.rnn")) == fdoubleprime
    assert load_property(str(data_dir / "demo.prop")) == demo_prop
    unsat = load_property(str(data_dir / "unsat.prop"))
    assert unsat.constraints[0].threshold == 2.0
