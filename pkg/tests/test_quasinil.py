import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from qnil.coordspace import CoordVector, basis_vector
from qnil.errors import BudgetExceeded, ConstantTermPresent, InvalidSeed
from qnil.operators import (
    OperatorTuple,
    WeightSpec,
    identity,
    make_backward_shift,
    make_forward_shift,
    matrix,
    op_sum,
    paper_pair,
)
from qnil.quasinil import (
    CERTIFIED,
    INCONCLUSIVE,
    REFUTED,
    QnilVerdict,
    RadiusSequence,
    WordSpec,
    certify_joint,
    jsr_estimate,
    local_radius_sequence,
    polynomial_bound,
    polynomial_radius,
    pruning_eligible,
    uniform_joint_sequence,
    word_radius_sequence,
)

PAIR = paper_pair()
T1, T2 = PAIR
GEO = OperatorTuple([make_forward_shift(WeightSpec.geometric(0.5)), make_forward_shift(WeightSpec.geometric(1 / 3))])


def test_local_radius_against_oracle():
    for k in range(2, 7):
        x = {k: Fraction(1)}
        got = local_radius_sequence(T2, basis_vector(k), 60).roots
        want = oracles.local_radii(oracles.PAIR_T2, x, 60)
        assert np.allclose(got, want, rtol=1e-12, atol=0)
        assert got[-1] == pytest.approx(oracles.t2_radius(k, 60), rel=1e-12)


def test_exact_zero_is_recorded_as_none():
    s = local_radius_sequence(T1, basis_vector(3), 6)
    assert [p.log_norm is None for p in s.points] == [False, False, True, True, True, True]
    assert s[3].root == 0.0 and s[3].exact_zero


def test_i_plus_f_against_closed_form():
    IF = op_sum(identity(), make_forward_shift(WeightSpec.reciprocal_factorial()))
    s = local_radius_sequence(IF, basis_vector(1), 100)
    for n in (1, 2, 5, 17, 50, 100):
        assert s[n].root == pytest.approx(oracles.root(oracles.i_plus_f_orbit(n), n), rel=1e-12)


@pytest.mark.parametrize("norm", ["one", "two", "sup"])
def test_seed_scaling(norm):
    # ||T^n (c x)|| = |c| ||T^n x||
    x = CoordVector({2: 1.0, 4: 0.5})
    a = local_radius_sequence(T2, x, 20, norm=norm)
    b = local_radius_sequence(T2, 3.0 * x, 20, norm=norm)
    for p, q in zip(a.points, b.points):
        assert q.log_norm == pytest.approx(p.log_norm + math.log(3.0), abs=1e-12)


def test_operator_scaling():
    from qnil.operators import scaled
    a = local_radius_sequence(T2, basis_vector(2), 30).roots
    b = local_radius_sequence(scaled(0.25, T2), basis_vector(2), 30).roots
    assert np.allclose(b, 0.25 * np.array(a), rtol=1e-12)


def test_periodic_word_convention():
    # period (1, 2) at length 2m is (T1 T2)^m, with T2 acting first
    seq = word_radius_sequence(PAIR, [1, 2], basis_vector(4), 20)
    for m in range(1, 11):
        assert seq[2 * m].root == pytest.approx((1 / 4) ** 0.5, rel=1e-12)
        assert seq.words[2 * m - 1] == (1, 2) * m
    assert seq.words[0] == (2,)


def test_explicit_word_is_read_from_the_right():
    word = (1, 1, 2, 2)
    seq = word_radius_sequence(PAIR, WordSpec.explicit(word), basis_vector(3), 4)
    for n in range(1, 5):
        y = PAIR.apply_word(word[-n:], basis_vector(3))
        assert seq.words[n - 1] == word[-n:]
        assert seq[n].root == pytest.approx(oracles.root({k: Fraction(v.real) for k, v in y}, n), rel=1e-12)


def test_random_word_is_seeded():
    a = word_radius_sequence(PAIR, WordSpec.random(7), basis_vector(3), 30)
    b = word_radius_sequence(PAIR, WordSpec.random(7), basis_vector(3), 30)
    assert a.to_json() == b.to_json()


positive_shift = st.one_of(
    st.builds(lambda r: ("f", Fraction(r).limit_denominator(16)), st.floats(0.05, 1.0)),
    st.builds(lambda r: ("b", Fraction(r).limit_denominator(16)), st.floats(0.05, 1.0)),
)


def _build(specs):
    ops, refs = [], []
    for kind, r in specs:
        if kind == "f":
            ops.append(make_forward_shift(WeightSpec.geometric(float(r))))
            refs.append(oracles.fwd(lambda n, r=r: r ** n))
        else:
            ops.append(make_backward_shift(WeightSpec.constant(float(r))))
            refs.append(oracles.bwd(lambda n, r=r: r))
    return OperatorTuple(ops), refs


@given(st.lists(positive_shift, min_size=1, max_size=3),
       st.dictionaries(st.integers(1, 5), st.integers(1, 4), min_size=1, max_size=3))
@settings(max_examples=30, deadline=None)
def test_beta_against_brute_force(specs, seed):
    tup, refs = _build(specs)
    x = CoordVector({k: float(v) for k, v in seed.items()})
    n = 7
    want, _ = oracles.brute_force_beta(refs, {k: Fraction(v) for k, v in seed.items()}, n)
    for strategy in ("exact", "pruned"):
        got = uniform_joint_sequence(tup, x, n, strategy=strategy).roots
        assert np.allclose(got, want, rtol=1e-12, atol=1e-300)


@given(st.lists(positive_shift, min_size=2, max_size=3), st.integers(1, 6))
@settings(max_examples=20, deadline=None)
def test_beta_dominates_every_word(specs, k):
    tup, _ = _build(specs)
    x = basis_vector(k)
    beta = uniform_joint_sequence(tup, x, 8)
    for letters in [(1,), (2,), (1, 2), (2, 1, 1)]:
        seq = word_radius_sequence(tup, letters, x, 8)
        for b, r in zip(beta.roots, seq.roots):
            assert r <= b * (1 + 1e-12)


def test_beam_is_lower_bound():
    exact = uniform_joint_sequence(PAIR, basis_vector(5), 10)
    beam = uniform_joint_sequence(PAIR, basis_vector(5), 10, strategy="beam:3")
    assert beam.lower_bound_only
    assert all(b <= e * (1 + 1e-12) for b, e in zip(beam.roots, exact.roots))


def test_pruning_falls_back_when_not_eligible():
    x = CoordVector({3: 1.0, 4: -1.0})
    assert not pruning_eligible(PAIR, x, 6)
    s = uniform_joint_sequence(PAIR, x, 6, strategy="pruned")
    assert s.meta["strategy"] == "exact"


def test_budget_exceeded_carries_prefix():
    with pytest.raises(BudgetExceeded) as ei:
        uniform_joint_sequence(PAIR, basis_vector(3), 16, strategy="exact", budget=500)
    exc = ei.value
    assert exc.deepest == len(exc.partial.points)
    full = uniform_joint_sequence(PAIR, basis_vector(3), exc.deepest, strategy="exact")
    assert exc.partial.log_norms == full.log_norms


@pytest.mark.parametrize("workers", [2, 8])
def test_workers_do_not_change_results(workers):
    a = uniform_joint_sequence(PAIR, basis_vector(3), 12, strategy="exact", workers=1)
    b = uniform_joint_sequence(PAIR, basis_vector(3), 12, strategy="exact", workers=workers)
    assert json.dumps(a.to_json()) == json.dumps(b.to_json())


def test_sequence_json_roundtrip():
    s = uniform_joint_sequence(PAIR, basis_vector(3), 8)
    t = RadiusSequence.from_json(json.loads(json.dumps(s.to_json())))
    assert t.to_json() == s.to_json()


def test_verdicts():
    v = certify_joint(PAIR, basis_vector(3), 16, 0.3)
    assert v.status == REFUTED
    assert QnilVerdict.from_json(v.to_json()) == v
    assert certify_joint(GEO, basis_vector(1), 40, 1e-3).status == CERTIFIED
    assert certify_joint(GEO, basis_vector(1), 12, 1e-3).status == INCONCLUSIVE
    pw = certify_joint(GEO, basis_vector(1), 40, 1e-3, mode="per-word", count=8, seed=3)
    assert pw.status == CERTIFIED and pw.seed == 3
    with pytest.raises(InvalidSeed):
        certify_joint(PAIR, CoordVector(), 8, 0.1)
    with pytest.raises(ValueError):
        certify_joint(PAIR, basis_vector(3), 3, 0.1)


def test_polynomial_radius_and_bound():
    z1z2 = [(1, (1, 2))]
    r = polynomial_radius(GEO, z1z2, basis_vector(1), 10).roots
    bound = polynomial_bound(GEO, z1z2, basis_vector(1), 10)
    assert all(a <= b for a, b in zip(r, bound))
    # S1 S2 e_1 = (1/3)(1/4) e_3 so the first term is exact
    assert r[0] == pytest.approx(1 / 12, rel=1e-14)
    with pytest.raises(ConstantTermPresent):
        polynomial_radius(GEO, [(1, ()), (1, (1,))], basis_vector(1), 5)


def test_jsr_brackets():
    est = jsr_estimate(OperatorTuple([matrix(np.diag([0.5, 0.2])), matrix(np.diag([0.1, 0.7]))]), 2, 4)
    assert est.lower == pytest.approx(0.7, rel=1e-9)
    assert est.upper == pytest.approx(0.7, rel=1e-9)
    est = jsr_estimate(PAIR, 16, 4)
    assert est.lower <= est.upper + 1e-12
