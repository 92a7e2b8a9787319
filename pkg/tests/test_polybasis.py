import itertools
import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from momentdensity.polybasis import (
    CapacityError,
    Polynomial,
    SemialgebraicSet,
    count_indices,
    enumerate_indices,
    evaluate,
    index_rank,
    poly_mul,
    preordering,
)


def brute_force_indices(nvars, d):
    found = [e for e in itertools.product(range(d + 1), repeat=nvars) if sum(e) <= d]
    # graded, then lexicographically descending on the leading exponents
    return sorted(found, key=lambda e: (sum(e), tuple(-x for x in e)))


def test_two_variables_degree_two_in_graded_lex_order():
    assert enumerate_indices(2, 2) == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]


def test_constant_only():
    assert enumerate_indices(1, 0) == [(0,)]


def test_three_variables_degree_four_count():
    assert len(enumerate_indices(3, 4)) == 35


@pytest.mark.parametrize("nvars", range(1, 5))
@pytest.mark.parametrize("d", range(0, 11))
def test_enumeration_matches_brute_force_and_binomial(nvars, d):
    listed = enumerate_indices(nvars, d)
    assert listed == brute_force_indices(nvars, d)
    assert len(listed) == math.comb(nvars + d, d) == count_indices(nvars, d)


@pytest.mark.parametrize("nvars", range(1, 5))
@pytest.mark.parametrize("d", range(0, 11))
def test_rank_inverts_enumeration(nvars, d):
    listed = enumerate_indices(nvars, d)
    for pos, idx in enumerate(listed):
        assert index_rank(idx) == pos
        assert listed[index_rank(idx)] == idx


@pytest.mark.parametrize("idx, rank", [((0, 0), 0), ((0, 1), 2), ((2, 0), 3)])
def test_rank_examples(idx, rank):
    assert index_rank(idx) == rank


def test_bad_arguments():
    with pytest.raises(ValueError):
        enumerate_indices(0, 2)
    with pytest.raises(ValueError):
        enumerate_indices(2, -1)
    with pytest.raises(ValueError):
        index_rank((1, -1))


X = Polynomial.univariate([0.0, 1.0])
ONE_MINUS_X = Polynomial.univariate([1.0, -1.0])


def test_product_of_x_and_one_minus_x():
    assert poly_mul(X, ONE_MINUS_X) == Polynomial.univariate([0.0, 1.0, -1.0])


def test_unit_is_neutral():
    p = Polynomial(2, {(1, 0): 3.0, (0, 2): -1.5})
    assert poly_mul(p, Polynomial.constant(2)) == p


def test_cancellation_drops_terms():
    prod = poly_mul(ONE_MINUS_X, Polynomial.univariate([1.0, 1.0]))
    assert prod.terms == {(0,): 1.0, (2,): -1.0}
    assert prod.degree == 2


def test_ring_mismatch_is_rejected():
    with pytest.raises(ValueError):
        poly_mul(X, Polynomial.constant(2))
    with pytest.raises(ValueError):
        evaluate(X, [0.1, 0.2])


def test_zero_polynomial():
    zero = Polynomial(3)
    assert zero.is_zero() and zero.degree == 0
    assert evaluate(zero, [1.0, 2.0, 3.0]) == 0.0


@pytest.mark.parametrize(
    "poly, point, value",
    [
        (Polynomial.univariate([0.0, 1.0, -1.0]), [0.5], 0.25),
        (Polynomial.constant(2), [0.3, -7.0], 1.0),
        (Polynomial.univariate([1.0, 0.0, -1.0]), [1.0], 0.0),
    ],
)
def test_evaluation_examples(poly, point, value):
    assert evaluate(poly, point) == value


def random_polynomial(rng, nvars, max_deg, nterms):
    terms = {}
    for _ in range(nterms):
        exp = rng.choice(enumerate_indices(nvars, max_deg))
        terms[exp] = rng.uniform(-2.0, 2.0)
    return Polynomial(nvars, terms)


@pytest.mark.parametrize("nvars", [1, 2, 3])
def test_product_agrees_with_pointwise_product(nvars):
    rng = random.Random(20260 + nvars)
    for _ in range(10):
        p = random_polynomial(rng, nvars, 4, 6)
        q = random_polynomial(rng, nvars, 3, 5)
        pq = poly_mul(p, q)
        if not p.is_zero() and not q.is_zero():
            assert pq.degree == p.degree + q.degree
        for _ in range(100):
            x = [rng.uniform(-1.0, 1.0) for _ in range(nvars)]
            expected = evaluate(p, x) * evaluate(q, x)
            assert evaluate(pq, x) == pytest.approx(expected, rel=1e-12, abs=1e-12)


coefficients = st.floats(-3, 3, allow_nan=False).filter(lambda c: c == 0 or abs(c) > 1e-3)


@st.composite
def polynomials(draw, nvars=2, max_deg=3):
    exps = draw(st.lists(st.sampled_from(enumerate_indices(nvars, max_deg)), max_size=5))
    return Polynomial(nvars, {e: draw(coefficients) for e in exps})


@settings(max_examples=60, deadline=None)
@given(polynomials(), polynomials(), polynomials())
def test_product_is_commutative_and_distributive(p, q, r):
    assert poly_mul(p, q) == poly_mul(q, p)
    left = poly_mul(p, q + r)
    right = poly_mul(p, q) + poly_mul(p, r)
    for e in set(left.terms) | set(right.terms):
        assert left.terms.get(e, 0.0) == pytest.approx(right.terms.get(e, 0.0), abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(polynomials(nvars=3, max_deg=4))
def test_json_round_trip(p):
    assert Polynomial.from_json(p.to_json()) == p


def test_lift_pads_exponents():
    g = Polynomial.univariate([0.0, 1.0, -1.0]).lift()
    assert g.nvars == 2
    assert g.terms == {(1, 0): 1.0, (2, 0): -1.0}


def test_interval_preordering():
    terms = preordering(SemialgebraicSet.interval(0.0, 1.0))
    assert [t.selector for t in terms] == [(0,), (1,)]
    assert terms[0].product == Polynomial.constant(1)
    assert terms[0].halfdeg == 0
    assert terms[1].product == Polynomial.univariate([0.0, 1.0, -1.0])
    assert terms[1].halfdeg == 1


def test_empty_preordering_is_the_unit():
    box = SemialgebraicSet(2, (), ((0.0, 1.0), (0.0, 1.0)))
    terms = preordering(box)
    assert len(terms) == 1
    assert terms[0].selector == () and terms[0].product == Polynomial.constant(2)


def test_two_generators_in_binary_counting_order():
    kset = SemialgebraicSet(1, (X, ONE_MINUS_X), ((0.0, 1.0),))
    terms = preordering(kset)
    assert [t.selector for t in terms] == [(0, 0), (1, 0), (0, 1), (1, 1)]
    assert [t.halfdeg for t in terms] == [0, 1, 1, 1]


@pytest.mark.parametrize("m", range(0, 5))
def test_preordering_size_and_degrees(m):
    rng = random.Random(m)
    gens = tuple(random_polynomial(rng, 2, 3, 3) for _ in range(m))
    gens = tuple(g if not g.is_zero() else Polynomial.constant(2) for g in gens)
    terms = preordering(SemialgebraicSet(2, gens, ((0.0, 1.0), (0.0, 1.0))))
    assert len(terms) == 2**m
    for t in terms:
        assert t.product.degree == sum(b * g.degree for b, g in zip(t.selector, gens))


def test_preordering_capacity_guard():
    gens = tuple(X for _ in range(21))
    with pytest.raises(CapacityError, match="2\\^21"):
        preordering(SemialgebraicSet(1, gens, ((0.0, 1.0),)))


def test_set_json_round_trip_and_validation():
    kset = SemialgebraicSet.interval(0.0, 2.0)
    assert SemialgebraicSet.from_json(kset.to_json()) == kset
    with pytest.raises(ValueError):
        SemialgebraicSet(1, (), ((1.0, 1.0),))
    with pytest.raises(ValueError):
        SemialgebraicSet(2, (X,), ((0.0, 1.0), (0.0, 1.0)))
