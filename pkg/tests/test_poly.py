import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roasplit.poly import (
    Monomial,
    Polynomial,
    PolynomialSyntaxError,
    box_moments,
    format_polynomial,
    monomial_basis,
    parse_polynomial,
)


def x(name="x1"):
    return Polynomial.variable(name)


class TestMonomialBasis:
    def test_univariate_degree_two(self):
        basis = monomial_basis(1, 2)
        assert basis == [Monomial(), Monomial({"x1": 1}), Monomial({"x1": 2})]

    def test_counts_match_binomial(self):
        assert len(monomial_basis(3, 10)) == 286
        assert len(monomial_basis(2, 3)) == 10

    def test_counts_for_all_small_cases(self):
        for n in range(1, 7):
            for d in range(0, 13):
                assert len(monomial_basis(n, d)) == math.comb(n + d, d)

    def test_graded_order(self):
        basis = monomial_basis(2, 3)
        degrees = [m.degree() for m in basis]
        assert degrees == sorted(degrees)
        # within one degree the first variable's exponent decreases
        deg2 = [m for m in basis if m.degree() == 2]
        assert [m.degree_in("x1") for m in deg2] == [2, 1, 0]


class TestDifferentiate:
    def test_cubic_derivative(self):
        p = x() ** 3 - 0.25 * x()
        assert p.differentiate("x1") == 3.0 * x() ** 2 - 0.25

    def test_no_dependence_gives_zero(self):
        p = x() ** 2
        assert p.differentiate("t").is_zero()

    def test_square(self):
        assert (x() ** 2).differentiate("x1") == 2.0 * x()


class TestBoxMoments:
    def test_symmetric_interval(self):
        mv = box_moments([(-1.0, 1.0)], 1)
        assert mv.values == (2.0, 0.0)

    def test_square_quadratic_moment(self):
        mv = box_moments([(-1.0, 1.0)] * 2, 2)
        idx = mv.basis.index(Monomial({"x1": 2}))
        assert mv.values[idx] == pytest.approx(4.0 / 3.0)

    def test_unit_square_mixed_moment(self):
        mv = box_moments([(0.0, 1.0)] * 2, 3)
        idx = mv.basis.index(Monomial({"x1": 1, "x2": 2}))
        assert mv.values[idx] == pytest.approx(1.0 / 6.0)

    def test_constant_entry_is_volume(self):
        mv = box_moments([(-0.7, 0.7), (-1.2, 1.2)], 4)
        assert mv.values[0] == pytest.approx(1.4 * 2.4)

    def test_degenerate_interval_rejected(self):
        with pytest.raises(ValueError):
            box_moments([(1.0, 1.0)], 2)

    def test_monte_carlo_agreement(self):
        # every basis monomial's moment within 3 standard errors
        box = [(-1.0, 2.0), (0.5, 1.5)]
        mv = box_moments(box, 3)
        rng = np.random.default_rng(42)
        n = 1_000_000
        pts = {
            "x1": rng.uniform(box[0][0], box[0][1], n),
            "x2": rng.uniform(box[1][0], box[1][1], n),
        }
        vol = 3.0 * 1.0
        for mono, exact in zip(mv.basis, mv.values):
            vals = np.ones(n)
            for var, e in mono.exponents.items():
                vals = vals * pts[var] ** e
            est = vals.mean() * vol
            se = vals.std() / math.sqrt(n) * vol
            assert abs(est - exact) <= 3.0 * se + 1e-12


class TestEvaluate:
    def test_root_of_benchmark_cubic(self):
        p = x() * (x() - 0.5) * (x() + 0.5)
        assert p.evaluate({"x1": 0.5}) == pytest.approx(0.0, abs=1e-15)

    def test_cross_product_term(self):
        p = x("x1") * Polynomial.variable("u2") - x("x2") * Polynomial.variable("u1")
        assert p.evaluate({"x1": 1.0, "x2": 0.0, "u1": 0.0, "u2": 1.0}) == 1.0

    def test_constant(self):
        assert Polynomial.constant(1.0).evaluate({}) == 1.0

    def test_missing_assignment_rejected(self):
        with pytest.raises(KeyError):
            (x() + 1.0).evaluate({})

    def test_evaluate_many_matches_scalar(self):
        p = 2.0 * x() ** 3 - x("x2") * x() + 0.5
        rng = np.random.default_rng(0)
        cols = {"x1": rng.normal(size=40), "x2": rng.normal(size=40)}
        vec = p.evaluate_many(cols)
        for i in range(40):
            point = {"x1": cols["x1"][i], "x2": cols["x2"][i]}
            assert vec[i] == pytest.approx(p.evaluate(point), rel=1e-12)


def _random_poly(rng, nvars=2, degree=3, nterms=5):
    names = [f"x{i+1}" for i in range(nvars)]
    terms = {}
    for _ in range(nterms):
        exps = {name: int(rng.integers(0, degree + 1)) for name in names}
        terms[Monomial({k: v for k, v in exps.items() if v})] = float(rng.normal())
    return Polynomial(terms, names)


class TestRingAxioms:
    def test_distributivity_at_random_points(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            p, q, r = (_random_poly(rng) for _ in range(3))
            lhs = (p + q) * r
            rhs = p * r + q * r
            for _ in range(5):
                point = {"x1": float(rng.normal()), "x2": float(rng.normal())}
                a, b = lhs.evaluate(point), rhs.evaluate(point)
                assert a == pytest.approx(b, rel=1e-12, abs=1e-12)

    def test_product_rule_at_random_points(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            p, q = _random_poly(rng), _random_poly(rng)
            d_lhs = (p * q).differentiate("x1")
            d_rhs = p.differentiate("x1") * q + p * q.differentiate("x1")
            for _ in range(5):
                point = {"x1": float(rng.normal()), "x2": float(rng.normal())}
                a, b = d_lhs.evaluate(point), d_rhs.evaluate(point)
                assert a == pytest.approx(b, rel=1e-12, abs=1e-12)

    @given(st.integers(0, 6), st.integers(0, 6), st.floats(-10, 10), st.floats(-10, 10))
    @settings(max_examples=60, deadline=None)
    def test_add_commutes_with_evaluation(self, e1, e2, c1, c2):
        p = Polynomial({Monomial({"x1": e1}): c1})
        q = Polynomial({Monomial({"x1": e2}): c2})
        val = (p + q).evaluate({"x1": 1.5})
        assert val == pytest.approx(c1 * 1.5**e1 + c2 * 1.5**e2, rel=1e-12, abs=1e-9)

    def test_zero_coefficients_pruned(self):
        p = x() - x()
        assert p.is_zero()
        assert p.terms == {}


class TestSubstitution:
    def test_affine_substitute_matches_evaluation(self):
        p = x() ** 3 - 2.0 * x() * x("x2") + 1.0
        q = p.affine_substitute({"x1": (0.5, 0.25)})
        for val1, val2 in [(0.3, -0.7), (-1.1, 0.2)]:
            direct = p.evaluate({"x1": 0.5 + 0.25 * val1, "x2": val2})
            assert q.evaluate({"x1": val1, "x2": val2}) == pytest.approx(direct, rel=1e-12)

    def test_substitute_constant_eliminates_variable(self):
        p = x() ** 2 * x("x2") + x("x2")
        q = p.substitute({"x1": 2.0})
        assert q == 5.0 * x("x2")


class TestTextSyntax:
    def test_parse_example(self):
        p = parse_polynomial("3.0*x1^2*u1 - 0.25*x1", ("x1", "u1"))
        assert p.evaluate({"x1": 2.0, "u1": 1.0}) == pytest.approx(11.5)

    def test_unknown_identifier_rejected(self):
        with pytest.raises(PolynomialSyntaxError):
            parse_polynomial("x1 + y2", ("x1",))

    def test_bare_number_term(self):
        p = parse_polynomial("1 - u1^2 - u2^2", ("u1", "u2"))
        assert p.evaluate({"u1": 0.6, "u2": 0.8}) == pytest.approx(0.0)

    def test_missing_star_rejected(self):
        with pytest.raises(PolynomialSyntaxError):
            parse_polynomial("3 x1", ("x1",))

    def test_round_trip(self):
        p = 3.0 * x() ** 2 * Polynomial.variable("u1") - 0.25 * x() + 0.125
        q = parse_polynomial(format_polynomial(p), ("x1", "u1"))
        assert q == p
