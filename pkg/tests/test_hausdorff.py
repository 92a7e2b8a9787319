import math
import warnings
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from certificates import mixture_sequence
from momentdensity.hausdorff import check_lp, check_markov, difference_table, lp_row_norm

UNIFORM = [Fraction(1, k + 1) for k in range(121)]
DIRAC0 = [Fraction(1)] + [Fraction(0)] * 120
DIRAC1 = [Fraction(1)] * 121
TWO_X = [Fraction(2, k + 2) for k in range(121)]


def bernstein_integral(n, j):
    """Integral over [0, 1] of C(n, j) x^j (1 - x)^(n - j), by quadrature."""
    with mpmath.workdps(30):
        return float(mpmath.binomial(n, j) * mpmath.quad(lambda x: x**j * (1 - x) ** (n - j), [0, 1]))


@pytest.mark.parametrize("n", [0, 1, 5, 12, 30, 50])
def test_uniform_rows_match_the_beta_integral(n):
    table = difference_table(UNIFORM, 50)
    for j in range(n + 1):
        assert float(table[n, j]) == pytest.approx(bernstein_integral(n, j), abs=1e-10)
        assert float(table[n, j]) == pytest.approx(1 / (n + 1), abs=1e-10)


def test_exact_uniform_rows():
    table = difference_table(UNIFORM, 80)
    assert all(v == Fraction(1, n + 1) for n, row in enumerate(table.rows) for v in row)


def test_dirac_tables():
    at0 = difference_table(DIRAC0, 20)
    at1 = difference_table(DIRAC1, 20)
    for n in range(21):
        assert at0[n, 0] == 1 and all(v == 0 for v in at0.rows[n][1:])
        assert at1[n, n] == 1 and all(v == 0 for v in at1.rows[n][:-1])


def test_table_shape():
    table = difference_table([0.7, 0.2, 0.1], None)
    assert table.n_max == 2
    assert [len(r) for r in table.rows] == [1, 2, 3]
    assert table[0, 0] == 0.7


def test_empty_and_short_sequences_rejected():
    with pytest.raises(ValueError):
        difference_table([])
    with pytest.raises(ValueError):
        difference_table([1.0, 0.5], 3)


def test_float_rows_are_capped_with_a_warning():
    with pytest.warns(UserWarning):
        table = difference_table([1.0 / (k + 1) for k in range(101)], 100)
    assert table.n_max == 16
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert difference_table(UNIFORM, 100).n_max == 100


def test_uniform_passes_markov():
    assert check_markov(UNIFORM, 1 + 1e-6, 50).passed


@pytest.mark.parametrize("n", range(17))
def test_double_precision_rows_stay_accurate_up_to_the_cap(n):
    table = difference_table([1.0 / (k + 1) for k in range(17)], 16)
    assert max(abs(float(v) - 1 / (n + 1)) for v in table.rows[n]) <= 1e-10


@pytest.mark.parametrize("c", [5, 10, 20])
def test_dirac_fails_markov_at_the_ceiling(c):
    result = check_markov(DIRAC0, c, 60)
    assert not result.passed
    assert result.where == (math.ceil(c), 0)
    assert result.value == 1.0


def test_dirac_at_ten_example():
    result = check_markov([1.0] + [0.0] * 16, 10, 16)
    assert result.where == (10, 0)


def test_mixture_with_an_atom_fails():
    s = mixture_sequence(Fraction(1, 2), [(Fraction(1, 2), 1)], 60)
    assert not check_markov(s, 0.5, 60).passed


def test_markov_validation():
    with pytest.raises(ValueError):
        check_markov([2.0, 1.0], 1.0, 1)
    with pytest.raises(ValueError):
        check_markov(UNIFORM, 0.0, 3)
    with pytest.raises(ValueError):
        check_lp(UNIFORM, 1.0, 2.0, 3)


def test_negative_differences_are_reported_as_such():
    # s_1 > s_0 cannot come from a probability measure on [0, 1]
    bad = [1.0, 1.5, 1.0]
    assert check_markov(bad, 100.0, 2).reason == "negative difference"
    assert check_lp(bad, 2.0, 100.0, 2).reason == "not a positive sequence"


@pytest.mark.parametrize("p", [1.5, 2.0, 4.0])
def test_uniform_lp_norms_are_one(p):
    table = difference_table(UNIFORM, 40)
    assert all(lp_row_norm(row, p) == pytest.approx(1.0, abs=1e-12) for row in table.rows)
    assert check_lp(UNIFORM, p, 1.001, 40).passed


def test_dirac_lp_failure_row():
    result = check_lp(DIRAC0, 2.0, 10.0, 120)
    assert not result.passed
    assert result.where == (99, None)
    assert result.value == pytest.approx(10.0)


def test_linear_density_has_bounded_lp_norm():
    result = check_lp(TWO_X, 2.0, 2.1, 50)
    assert result.passed
    table = difference_table(TWO_X, 50)
    assert lp_row_norm(table.rows[50], 2.0) < 2 / math.sqrt(3)


def test_float_linear_density_matches_exact():
    floats = [2.0 / (k + 2) for k in range(17)]
    exact = difference_table(TWO_X, 16)
    for a, b in zip(difference_table(floats, 16).rows, exact.rows):
        assert max(abs(x - float(y)) for x, y in zip(a, b)) <= 1e-10
    assert check_lp(floats, 2.0, 2.1, 16).passed


mixtures = st.tuples(
    st.fractions(0, 1, max_denominator=20),
    st.lists(st.tuples(st.fractions(0, 1, max_denominator=20), st.integers(1, 5)), min_size=1, max_size=3),
)


def as_sequence(case, top=30):
    weight, atoms = case
    total = sum(w for _, w in atoms)
    return mixture_sequence(weight, [(s, Fraction(w, total)) for s, w in atoms], top)


@settings(max_examples=40, deadline=None)
@given(mixtures)
def test_rows_of_genuine_measures_are_partitions_of_unity(case):
    table = difference_table([float(v) for v in as_sequence(case, 16)], 16)
    for row in table.rows:
        assert sum(row) == pytest.approx(1.0, abs=1e-10)
        assert min(row) >= -1e-10


@settings(max_examples=40, deadline=None)
@given(mixtures, st.floats(1.1, 3.0), st.floats(0.0, 3.0), st.floats(1.0, 6.0))
def test_lp_passes_are_monotone_in_p(case, p1, extra, c):
    s = as_sequence(case, 25)
    if check_lp(s, p1 + extra, c, 25).passed:
        assert check_lp(s, p1, c, 25).passed
