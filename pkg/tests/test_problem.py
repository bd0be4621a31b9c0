import numpy as np
import pytest

from roasplit.geom import TimeGrid
from roasplit.poly import Polynomial, parse_polynomial
from roasplit.problem import (
    ControlSystem,
    builtin_problem,
    lie_derivative,
    load_problem_toml,
)


def var(name):
    return Polynomial.variable(name)


class TestLieDerivative:
    def test_cubic_flow_of_square(self):
        cubic = builtin_problem("cubic").system
        out = lie_derivative(var("x1") ** 2, cubic)
        expected = 2.0 * var("x1") ** 4 - 0.5 * var("x1") ** 2
        assert out == expected

    def test_time_derivative(self):
        cubic = builtin_problem("cubic").system
        assert lie_derivative(var("t"), cubic) == Polynomial.constant(1.0)

    def test_brockett_third_component(self):
        brockett = builtin_problem("brockett").system
        out = lie_derivative(var("x3"), brockett)
        expected = var("u1") * var("x2") - var("u2") * var("x1")
        assert out == expected

    def test_rejects_input_dependence(self):
        brockett = builtin_problem("brockett").system
        with pytest.raises(ValueError):
            lie_derivative(var("u1"), brockett)

    def test_linearity_at_random_points(self):
        system = builtin_problem("double_integrator").system
        rng = np.random.default_rng(5)
        v1 = var("x1") ** 2 * var("t") - var("x2")
        v2 = var("x2") ** 3 + var("t") ** 2
        a, b = 1.7, -0.3
        lhs = lie_derivative(a * v1 + b * v2, system)
        rhs = a * lie_derivative(v1, system) + b * lie_derivative(v2, system)
        for _ in range(100):
            point = {
                "t": float(rng.uniform(0, 1)),
                "x1": float(rng.normal()),
                "x2": float(rng.normal()),
                "u1": float(rng.uniform(-1, 1)),
            }
            assert lhs.evaluate(point) == pytest.approx(rhs.evaluate(point), rel=1e-12, abs=1e-12)

    def test_degree_bound(self):
        system = builtin_problem("brockett").system
        deg_f = max(fj.degree() for fj in system.f)
        for v in (var("x1") ** 3 * var("t"), var("x2") ** 2, var("t") ** 4):
            assert lie_derivative(v, system).degree() <= v.degree() - 1 + deg_f


class TestBuiltins:
    def test_cubic_data(self):
        prob = builtin_problem("cubic")
        assert prob.T == 100.0
        assert prob.X == ((-1.0, 1.0),)
        assert prob.U is None
        # X_T = [-0.01, 0.01] as two affine inequalities
        for g, arg, expect in [
            (prob.XT.inequalities[0], 0.01, True),
            (prob.XT.inequalities[1], 0.01, True),
        ]:
            assert (g.evaluate({"x1": arg}) >= 0) is expect
        assert prob.XT.contains({"x1": 0.0})
        assert not prob.XT.contains({"x1": 0.02})

    def test_cubic_dynamics(self):
        prob = builtin_problem("cubic")
        f = prob.system.f[0]
        x = var("x1")
        assert f == x * (x - 0.5) * (x + 0.5)

    def test_brockett_input_ball(self):
        prob = builtin_problem("brockett")
        (g,) = prob.U.inequalities
        assert g == Polynomial.constant(1.0) - var("u1") ** 2 - var("u2") ** 2
        assert prob.T == 1.0
        assert prob.X == ((-1.0, 1.0),) * 3

    def test_double_integrator_data(self):
        prob = builtin_problem("double_integrator")
        assert prob.X == ((-0.7, 0.7), (-1.2, 1.2))
        assert prob.system.f[0] == var("x2")
        assert prob.system.f[1] == var("u1")
        assert prob.T == 1.0
        # target is a small ball around the origin
        assert prob.XT.contains({"x1": 0.0, "x2": 0.0})
        assert not prob.XT.contains({"x1": 0.01, "x2": 0.0})

    def test_unknown_name(self):
        with pytest.raises(ValueError):
            builtin_problem("pendulum")

    def test_discretization_validation(self):
        prob = builtin_problem("cubic")
        with pytest.raises(ValueError):
            prob.with_discretization(degree=5)  # odd degree
        with pytest.raises(ValueError):
            prob.with_discretization(degree=4, time_grid=TimeGrid((0.0, 1.0)))  # wrong horizon
        full = prob.with_discretization(degree=4)
        assert full.is_discretized()
        assert len(full.cells) == 1


CONFIG = """
name = "shifted-integrator"

[system]
n = 2
m = 1
f = ["x2", "u1"]

[sets]
X = [[-0.7, 0.7], [-1.2, 1.2]]
U = ["u1 + 1", "1 - u1"]
XT = ["0.0001 - x1^2 - x2^2"]
u_box = [[-1, 1]]

[roa]
T = 1.0
degree = 4
cells_per_axis = [2, 1]
time_knots = [0.0, 0.5, 1.0]
"""


class TestConfig:
    def test_toml_round_trip(self, tmp_path):
        path = tmp_path / "prob.toml"
        path.write_text(CONFIG)
        prob = load_problem_toml(str(path))
        assert prob.name == "shifted-integrator"
        assert prob.system.n == 2 and prob.system.m == 1
        assert prob.degree == 4
        assert len(prob.cells) == 2
        assert prob.time_grid.knots == (0.0, 0.5, 1.0)
        assert prob.system.f[0] == var("x2")

    def test_explicit_cuts(self):
        data = {
            "system": {"n": 1, "m": 0, "f": ["x1^3 - 0.25*x1"]},
            "sets": {"X": [[-1, 1]], "XT": ["0.01 - x1", "x1 + 0.01"]},
            "roa": {"T": 100.0, "degree": 8, "cuts": {"x1": [-0.5, 0.5]}},
        }
        prob = load_problem_toml(data)
        assert len(prob.cells) == 3
        assert prob.cells[1].box == ((-0.5, 0.5),)

    def test_malformed_polynomial_raises(self):
        data = {
            "system": {"n": 1, "m": 0, "f": ["x1 ** 3"]},
            "sets": {"X": [[-1, 1]], "XT": ["0.01 - x1"]},
            "roa": {"T": 1.0, "degree": 4},
        }
        with pytest.raises(Exception):
            load_problem_toml(data)

    def test_missing_section_named(self):
        with pytest.raises(ValueError, match="sets"):
            load_problem_toml({"system": {"n": 1, "m": 0, "f": ["x1"]}, "roa": {}})
