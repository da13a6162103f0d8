"""Small hand-checkable cases for each public function."""

import json
import math

import numpy as np
import pytest

from qnil.cli import run_command
from qnil.coordspace import CoordVector, basis_vector, coord_functional, dominating_coordinate, in_cone, vec_norm
from qnil.errors import ConstantTermPresent, DanglingReference, NoPositiveCoordinate, ZeroPatternViolation
from qnil.operators import (
    OperatorTuple,
    WeightSpec,
    compose,
    derive_weights,
    identity,
    is_positive,
    make_backward_shift,
    make_forward_shift,
    matrix,
    op_sum,
    paper_pair,
    rank_one_piece,
    scaled,
    weighted_operator,
    zero_operator,
)
from qnil.quasinil import (
    REFUTED,
    WordSpec,
    certify_joint,
    jsr_estimate,
    local_radius_sequence,
    polynomial_bound,
    polynomial_radius,
    uniform_joint_sequence,
    word_radius_sequence,
)
from qnil.report import render_text
from qnil.scenario import BUILTINS, parse_scenario
from qnil.subspace import (
    OrbitGenParams,
    SubspaceChecks,
    SubspaceResult,
    commutant_invariance,
    common_invariant_subspace,
    corollary_subspace,
    ideal_support,
    kernel_intersection,
    orbit_vectors,
    projection_vanishing_check,
    span_basis,
    weighted_invariant_subspace,
)

T1, T2 = paper_pair()
PAIR = paper_pair()
GEO = OperatorTuple([make_forward_shift(WeightSpec.geometric(0.5)), make_forward_shift(WeightSpec.geometric(1 / 3))])
PARAMS = OrbitGenParams(depth=12, rank_tol=1e-10, truncation_dim=16)


# coordinate space

def test_norm_cases():
    assert vec_norm(CoordVector()) == 0.0
    assert vec_norm(basis_vector(3)) == 1.0
    assert vec_norm(CoordVector({1: 1, 2: 1})) == pytest.approx(math.sqrt(2), rel=1e-15)


def test_functional_cases():
    assert coord_functional(2, basis_vector(2)) == 1
    assert coord_functional(1, basis_vector(2)) == 0
    assert coord_functional(3, CoordVector({3: 5, 7: 2})) == 5


def test_cone_cases():
    assert in_cone(CoordVector({1: 1, 4: 2})).in_cone
    v = in_cone(CoordVector({1: 1, 2: -1}))
    assert not v.in_cone and v.worst_violation == 1
    assert in_cone(CoordVector({1: 1 + 1e-12j}), tol=1e-9).in_cone


def test_dominating_cases():
    assert dominating_coordinate(CoordVector({2: 3, 5: 1})) == 2
    assert dominating_coordinate(basis_vector(1)) == 1
    with pytest.raises(NoPositiveCoordinate):
        dominating_coordinate(basis_vector(1, 1e-15), tol=1e-9)


# operators

def test_pair_shift_cases():
    assert T1.apply(basis_vector(1)).is_zero()
    assert T2.apply(basis_vector(3)) == basis_vector(4, 1 / 3)
    x = CoordVector({2: 1 + 1j, 9: -3})
    assert identity().apply(x) == x
    assert make_backward_shift(WeightSpec.constant(1)).apply(basis_vector(5)) == basis_vector(4)
    assert make_backward_shift(WeightSpec.explicit([7, 8])).apply(basis_vector(2)) == basis_vector(1, 8)


def test_weight_family_cases():
    F = make_forward_shift(WeightSpec.reciprocal_factorial())
    assert F.apply(basis_vector(2))[3] == pytest.approx(0.5, rel=1e-15)
    assert make_forward_shift(WeightSpec.constant(0)).apply(basis_vector(4)).is_zero()
    assert make_forward_shift(WeightSpec.geometric(0.5)).apply(basis_vector(3)) == basis_vector(4, 1 / 8)


def test_composition_cases():
    for k in range(2, 8):
        assert compose(T1, T2).apply(basis_vector(k))[k] == pytest.approx(1 / k, rel=1e-15)
        assert compose(T2, T1).apply(basis_vector(k))[k] == pytest.approx(1 / (k - 1), rel=1e-15)


def test_t2_power_closed_form():
    for k in (1, 2, 5):
        y = basis_vector(k)
        for n in range(1, 12):
            y = T2.apply(y)
            want = 1 / math.prod(range(k, k + n))
            assert y.support() == [n + k]
            assert y[n + k].real == pytest.approx(want, rel=1e-13)


def test_positivity_cases():
    assert is_positive(T2, 100).positive
    v = is_positive(matrix([[1, -1], [0, 1]]), 2)
    assert not v.positive and v.witness == (1, 2, -1)
    assert is_positive(zero_operator(), 10).positive


def test_rank_one_cases():
    P = rank_one_piece(T2, 4, 3, 8)
    assert P.apply(basis_vector(3)) == basis_vector(4, 1 / 3)
    assert P.apply(basis_vector(2)).is_zero()
    assert rank_one_piece(T2, 1, 1, 8).apply(basis_vector(1)).is_zero()
    E = rank_one_piece(identity(), 2, 2, 4)
    assert np.array_equal(E.truncate(4), np.diag([0, 1, 0, 0]).astype(complex))


def test_weighted_operator_cases():
    d = 6
    assert np.array_equal(weighted_operator(T2, np.ones((d, d)), d).truncate(d), T2.truncate(d))
    assert not weighted_operator(T2, np.zeros((d, d)), d).truncate(d).any()
    W = np.ones((d, d), dtype=complex)
    W[3, 2] = 2j
    assert weighted_operator(T2, W, d).truncate(d)[3, 2] == pytest.approx(2j / 3)


def test_derive_weight_cases():
    d = 6
    A = GEO.member(1)
    support = np.abs(A.truncate(d)) > 0
    assert np.allclose(derive_weights(A, scaled(3, A), d)[support], 3)
    assert np.allclose(derive_weights(A, A, d)[support], 1)
    with pytest.raises(ZeroPatternViolation) as ei:
        derive_weights(matrix(np.eye(2)), matrix([[1, 1], [0, 1]]), 2)
    assert (ei.value.i, ei.value.j) == (1, 2)


# radius sequences

def test_local_radius_cases():
    for k in range(2, 7):
        assert all(abs(r - 1 / k) < 1e-12 for r in local_radius_sequence(compose(T1, T2), basis_vector(k), 30).roots)
        s = local_radius_sequence(T1, basis_vector(k), 10)
        assert all(s[n].exact_zero for n in range(k, 11))
    r200 = local_radius_sequence(T2, basis_vector(2), 200)[200].root
    assert r200 <= 0.02
    assert r200 == pytest.approx(math.exp(-math.lgamma(202) / 200), rel=1e-12)


def test_word_radius_cases():
    for k in (2, 3, 4):
        seq = word_radius_sequence(PAIR, [1, 2], basis_vector(k), 20)
        assert all(seq[2 * m].root == pytest.approx(k ** -0.5, rel=1e-12) for m in range(1, 11))
    one = OperatorTuple([T2])
    a = word_radius_sequence(one, WordSpec.random(5), basis_vector(3), 15)
    assert a.log_norms == local_radius_sequence(T2, basis_vector(3), 15).log_norms
    b = word_radius_sequence(PAIR, [2], basis_vector(2), 40)
    assert b.log_norms == local_radius_sequence(T2, basis_vector(2), 40).log_norms


def test_uniform_cases():
    s = uniform_joint_sequence(PAIR, basis_vector(3), 10, strategy="exact")
    assert all(s[2 * m].root >= 3 ** -0.5 - 1e-10 for m in range(1, 6))
    for strategy, depth in (("exact", 12), ("pruned", 30)):
        g = uniform_joint_sequence(GEO, basis_vector(1), depth, strategy=strategy)
        assert all(g[n].log_norm == pytest.approx(-(n * (n + 1) / 2) * math.log(2), rel=1e-12)
                   for n in range(1, depth + 1))
    z = uniform_joint_sequence(OperatorTuple([zero_operator()]), basis_vector(4), 5)
    assert all(p.exact_zero for p in z.points)


def test_certify_cases():
    v = certify_joint(PAIR, basis_vector(3), 16, 0.3)
    assert v.status == REFUTED
    assert set(v.witness) == {1, 2} and all(a != b for a, b in zip(v.witness, v.witness[1:]))
    assert certify_joint(GEO, basis_vector(1), 40, 1e-3).final_root == pytest.approx(2 ** -20.5, rel=1e-9)


def test_polynomial_cases():
    for k in (2, 3, 5):
        assert np.allclose(polynomial_radius(PAIR, [(1, (1, 2))], basis_vector(k), 20).roots, 1 / k, rtol=1e-12)
    p = [(1, (1,)), (1, (2,))]
    r = polynomial_radius(GEO, p, basis_vector(1), 60).roots
    bound = polynomial_bound(GEO, p, basis_vector(1), 60)
    assert r[-1] <= bound[-1]
    with pytest.raises(ConstantTermPresent):
        polynomial_radius(GEO, [(1, ()), (1, (1,))], basis_vector(1), 4)


def test_jsr_cases():
    est = jsr_estimate(OperatorTuple([identity()]), 8, 4)
    assert est.lower == pytest.approx(1, rel=1e-12) and est.upper == pytest.approx(1, rel=1e-12)
    est = jsr_estimate(OperatorTuple([scaled(0.5, identity()), scaled(0.25, identity())]), 8, 4)
    assert est.lower == pytest.approx(0.5, rel=1e-12) and est.upper == pytest.approx(0.5, rel=1e-12)
    assert jsr_estimate(PAIR, 32, 4).lower >= 0.5 ** 0.5 - 1e-12


# subspaces

def test_orbit_vector_cases():
    vs = orbit_vectors(GEO, basis_vector(1), OrbitGenParams(depth=5, truncation_dim=16))
    assert [v.support() for v in vs] == [[2], [3], [4], [5], [6]]
    assert orbit_vectors(OperatorTuple([zero_operator()]), basis_vector(2), PARAMS) == []
    vs = orbit_vectors(OperatorTuple([T1]), basis_vector(3), OrbitGenParams(depth=5, truncation_dim=8))
    assert [v.support() for v in vs] == [[2], [1]]


def test_span_basis_cases():
    b = span_basis([basis_vector(2), basis_vector(2, 2), basis_vector(5)], 1e-10, 8)
    assert sorted(k for q in b for k in q.support()) == [2, 5]
    assert span_basis([], 1e-10, 4) == []
    b = span_basis([CoordVector({1: 1, 2: 1}), CoordVector({1: 1, 2: -1})], 1e-10, 2)
    Q = np.column_stack([q.to_dense(2) for q in b])
    assert np.abs(Q.conj().T @ Q - np.eye(2)).max() <= 1e-12


def test_vanishing_cases():
    assert projection_vanishing_check(GEO, 1, 8) == 0
    assert projection_vanishing_check(PAIR, 2, 4) >= 0.5
    assert projection_vanishing_check(OperatorTuple([T1]), 2, 5) == 0


def test_kernel_cases():
    assert 1 in kernel_intersection(OperatorTuple([T1]), 8).ideal_support
    r = kernel_intersection(OperatorTuple([identity()]), 4)
    assert r.dimension == 0 and not r.checks.nontrivial
    r = kernel_intersection(OperatorTuple([matrix(np.diag([0, 1, 1.0])), matrix(np.diag([0, 0, 1.0]))]), 3)
    assert r.ideal_support == (1,) and r.dimension == 1


def test_common_subspace_cases():
    res = common_invariant_subspace(GEO, basis_vector(1), PARAMS)
    assert res.kind == "orbit" and res.ideal_support == tuple(range(2, 14))
    back = OperatorTuple([make_backward_shift(WeightSpec.constant(1)), make_backward_shift(WeightSpec.constant(2))])
    assert common_invariant_subspace(back, basis_vector(1), PARAMS).kind == "kernel"


def _manual(basis, d):
    checks = SubspaceChecks(None, (), len(basis), d, True, len(basis), True)
    return SubspaceResult("orbit", tuple(basis), None, checks)


def test_ideal_support_cases():
    assert ideal_support(_manual([basis_vector(2), basis_vector(5)], 6)) == ((2, 5), True)
    s = 2 ** -0.5
    assert ideal_support(_manual([CoordVector({1: s, 2: s})], 4)) == ((1, 2), False)


def test_commutant_cases():
    res = common_invariant_subspace(GEO, basis_vector(1), PARAMS)
    c = commutant_invariance(res, identity(), GEO)
    assert c.commute_residual == 0 and c.invariance_residual == 0
    S1 = GEO.member(1)
    p = op_sum(identity(), scaled(2, S1), scaled(0.5, GEO.member(2)))
    c = commutant_invariance(res, p, GEO)
    assert c.invariance_residual <= 1e-10
    # S1^2 reaches two steps past the interior, so the finite window shows through
    c = commutant_invariance(res, compose(S1, S1), OperatorTuple([S1]))
    assert c.invariance_residual == pytest.approx(2.0 ** -12 * 2.0 ** -13, rel=1e-9)
    c = commutant_invariance(res, make_backward_shift(WeightSpec.constant(1)), GEO)
    assert c.invariance_residual > 0


def test_weighted_cases():
    d = PARAMS.truncation_dim
    ones = weighted_invariant_subspace(GEO, [np.ones((d, d))] * 2, basis_vector(1), PARAMS)
    common = common_invariant_subspace(GEO, basis_vector(1), PARAMS)
    assert ones.subspace.ideal_support == common.ideal_support
    assert np.allclose(ones.subspace.projector(), common.projector(), atol=1e-12)
    zeros = weighted_invariant_subspace(GEO, [np.zeros((d, d))] * 2, basis_vector(1), PARAMS)
    assert max(zeros.b_residuals) == 0


def test_corollary_cases():
    two = OperatorTuple([scaled(2, m) for m in GEO])
    r = corollary_subspace(GEO, two, basis_vector(1), PARAMS)
    assert r.subspace.ideal_support == tuple(range(2, 14)) and max(r.b_residuals) <= 1e-10
    d = PARAMS.truncation_dim
    conj = OperatorTuple([matrix(np.conj(m.truncate(d))) for m in GEO])
    ones = weighted_invariant_subspace(GEO, [np.ones((d, d))] * 2, basis_vector(1), PARAMS)
    assert corollary_subspace(GEO, conj, basis_vector(1), PARAMS).to_json() == ones.to_json()


# scenarios and reports

def test_scenario_cases():
    scn = parse_scenario(BUILTINS["paper-example"])
    assert scn.tuple_names == ["T1", "T2"]
    assert sorted(scn.vectors) == [f"e{k}" for k in range(2, 7)]
    doc = json.loads(BUILTINS["paper-example"])
    doc["tuple"] = ["T1", "T9"]
    with pytest.raises(DanglingReference) as ei:
        parse_scenario(json.dumps(doc))
    assert ei.value.name == "T9"
    doc["operators"] = []
    doc["tuple"] = ["T1"]
    with pytest.raises(DanglingReference):
        parse_scenario(json.dumps(doc))


def test_jsr_command_on_identity():
    doc = {"name": "id", "operators": [{"name": "I", "kind": "identity"}], "tuple": ["I"], "params": {"dim": 6}}
    rep = run_command("jsr", parse_scenario(json.dumps(doc)), {})
    assert rep.results["jsr"]["lower"] == pytest.approx(1) and rep.results["jsr"]["upper"] == pytest.approx(1)


def test_text_shows_witness():
    rep = run_command("joint", parse_scenario(BUILTINS["paper-example"]), {"depth": 16})
    assert "1 2 1 2" in render_text(rep)
