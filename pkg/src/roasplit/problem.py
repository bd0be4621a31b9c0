"""Finite-horizon controlled-reachability problem instances.

A problem bundles polynomial dynamics, the state box X, the admissible
input set U, the target set X_T, the horizon and the relaxation degree,
together with an axis-aligned cell partition of X and a time grid.
Built-in benchmark instances mirror three standard test systems.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Sequence

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .geom import Cell, SemialgebraicSet, TimeGrid, halving_split_sequence, split_box
from .poly import Polynomial, parse_polynomial

__all__ = [
    "ControlSystem",
    "RoaProblem",
    "lie_derivative",
    "builtin_problem",
    "load_problem_toml",
    "BUILTIN_NAMES",
]

BUILTIN_NAMES = ("cubic", "double_integrator", "brockett")

DEFAULT_TARGET_RADIUS = 1e-4


@dataclass(frozen=True)
class ControlSystem:
    """Polynomial dynamics dx/dt = f(t, x, u)."""

    n: int
    m: int
    f: tuple[Polynomial, ...]

    def __post_init__(self):
        if self.n < 1 or self.m < 0:
            raise ValueError("need n >= 1 states and m >= 0 inputs")
        if len(self.f) != self.n:
            raise ValueError("one dynamics component per state required")
        allowed = set(self.variable_names())
        for j, fj in enumerate(self.f):
            extra = set(fj.universe) - allowed
            if extra:
                raise ValueError(f"component {j} uses unknown variables {sorted(extra)}")

    def state_names(self) -> tuple[str, ...]:
        return tuple(f"x{i + 1}" for i in range(self.n))

    def input_names(self) -> tuple[str, ...]:
        return tuple(f"u{i + 1}" for i in range(self.m))

    def variable_names(self) -> tuple[str, ...]:
        return ("t",) + self.state_names() + self.input_names()


def lie_derivative(v: Polynomial, system: ControlSystem) -> Polynomial:
    """d/dt of v along the flow: dv/dt + grad_x(v) . f."""
    allowed = {"t", *system.state_names()}
    extra = set(v.universe) - allowed
    if extra:
        raise ValueError(f"v may only depend on t and x, found {sorted(extra)}")
    out = v.differentiate("t")
    for name, fj in zip(system.state_names(), system.f):
        out = out + v.differentiate(name) * fj
    return out


@dataclass(frozen=True)
class RoaProblem:
    """A full instance: dynamics, sets, horizon, degree and partition.

    ``cells``, ``time_grid`` and ``degree`` may be absent on a bare
    instance (e.g. fresh from :func:`builtin_problem`); attach them with
    :meth:`with_discretization` before compiling.
    """

    system: ControlSystem
    X: tuple[tuple[float, float], ...]
    U: SemialgebraicSet | None
    XT: SemialgebraicSet
    T: float
    degree: int | None = None
    cells: tuple[Cell, ...] | None = None
    time_grid: TimeGrid | None = None
    u_box: tuple[tuple[float, float], ...] | None = None
    name: str = "custom"

    def __post_init__(self):
        if self.T <= 0:
            raise ValueError("horizon must be positive")
        if len(self.X) != self.system.n:
            raise ValueError("one state interval per state variable required")
        for lo, hi in self.X:
            if not lo < hi:
                raise ValueError("state box intervals must be nondegenerate")
        if (self.U is None) != (self.system.m == 0):
            raise ValueError("U must be given exactly when the system has inputs")
        if self.u_box is not None and len(self.u_box) != self.system.m:
            raise ValueError("one input interval per input variable required")
        if self.degree is not None:
            if self.degree < 2 or self.degree % 2 != 0:
                raise ValueError("relaxation degree must be even and >= 2")
        if self.time_grid is not None and self.time_grid.horizon != self.T:
            raise ValueError("time grid must span [0, T]")
        if self.cells is not None:
            vol = sum(c.volume() for c in self.cells)
            box_vol = 1.0
            for lo, hi in self.X:
                box_vol *= hi - lo
            if abs(vol - box_vol) > 1e-9 * box_vol:
                raise ValueError("cells do not tile the state box")

    # -- discretization helpers -------------------------------------------
    def with_discretization(
        self,
        degree: int,
        cells: Sequence[Cell] | None = None,
        time_grid: TimeGrid | None = None,
        cuts: Mapping[int, Sequence[float]] | None = None,
        cells_per_axis: Sequence[int] | None = None,
        n_cells: int | None = None,
        split_seed: int = 0,
    ) -> "RoaProblem":
        if cells is None:
            if n_cells is not None:
                if cuts or cells_per_axis:
                    raise ValueError("give only one cell specification")
                cells = halving_split_sequence(self.X, n_cells, seed=split_seed)
            else:
                cells = split_box(self.X, cuts=cuts, cells_per_axis=cells_per_axis)
        if time_grid is None:
            time_grid = TimeGrid((0.0, self.T))
        return replace(
            self,
            degree=degree,
            cells=tuple(cells),
            time_grid=time_grid,
        )

    def is_discretized(self) -> bool:
        return self.degree is not None and self.cells is not None and self.time_grid is not None

    def require_discretized(self) -> None:
        if not self.is_discretized():
            raise ValueError("problem needs degree, cells and a time grid; "
                             "call with_discretization first")

    def state_volume(self) -> float:
        v = 1.0
        for lo, hi in self.X:
            v *= hi - lo
        return v


def _ball_inequality(names: Sequence[str], radius: float) -> Polynomial:
    g = Polynomial.constant(radius * radius, names)
    for name in names:
        x = Polynomial.variable(name)
        g = g - x * x
    return g


def builtin_problem(name: str, target_radius: float = DEFAULT_TARGET_RADIUS) -> RoaProblem:
    """The three benchmark instances, without partition or degree.

    cubic:             dx = x(x-0.5)(x+0.5), X=[-1,1], X_T=[-0.01,0.01], T=100
    double_integrator: dx1 = x2, dx2 = u, X=[-0.7,0.7]x[-1.2,1.2],
                       X_T={0} (ball of ``target_radius``), U=[-1,1], T=1
    brockett:          dx = (u1, u2, u1 x2 - u2 x1), X = unit sup-norm ball,
                       X_T={0} (ball), U = unit 2-norm ball, T=1
    """
    if name == "cubic":
        x = Polynomial.variable("x1")
        system = ControlSystem(n=1, m=0, f=(x * (x - 0.5) * (x + 0.5),))
        xt = SemialgebraicSet((x + 0.01, -x + 0.01))
        return RoaProblem(
            system=system,
            X=((-1.0, 1.0),),
            U=None,
            XT=xt,
            T=100.0,
            name=name,
        )
    if name == "double_integrator":
        x2 = Polynomial.variable("x2")
        u1 = Polynomial.variable("u1")
        system = ControlSystem(n=2, m=1, f=(x2, u1))
        xt = SemialgebraicSet((_ball_inequality(("x1", "x2"), target_radius),))
        uset = SemialgebraicSet((u1 + 1.0, -u1 + 1.0))
        return RoaProblem(
            system=system,
            X=((-0.7, 0.7), (-1.2, 1.2)),
            U=uset,
            XT=xt,
            T=1.0,
            u_box=((-1.0, 1.0),),
            name=name,
        )
    if name == "brockett":
        x1, x2 = Polynomial.variable("x1"), Polynomial.variable("x2")
        u1, u2 = Polynomial.variable("u1"), Polynomial.variable("u2")
        system = ControlSystem(n=3, m=2, f=(u1, u2, u1 * x2 - u2 * x1))
        xt = SemialgebraicSet((_ball_inequality(("x1", "x2", "x3"), target_radius),))
        uset = SemialgebraicSet((Polynomial.constant(1.0) - u1 * u1 - u2 * u2,))
        return RoaProblem(
            system=system,
            X=((-1.0, 1.0),) * 3,
            U=uset,
            XT=xt,
            T=1.0,
            u_box=((-1.0, 1.0), (-1.0, 1.0)),
            name=name,
        )
    raise ValueError(f"unknown builtin problem {name!r}; choose from {BUILTIN_NAMES}")


# -- config files -------------------------------------------------------------

def load_problem_toml(source: str | bytes | dict) -> RoaProblem:
    """Build a problem from a TOML config.

    Expected shape::

        [system]
        n = 2
        m = 1
        f = ["x2", "u1"]

        [sets]
        X = [[-0.7, 0.7], [-1.2, 1.2]]
        U = ["u1 + 1", "1 - u1"]          # omit when m = 0
        XT = ["0.0001 - x1^2 - x2^2"]
        u_box = [[-1, 1]]                 # optional, used for scaling

        [roa]
        T = 1.0
        degree = 6
        cells_per_axis = [2, 2]           # or n_cells = 8, seed = 0
        # cuts.x1 = [-0.5, 0.5]           # or explicit cut positions
        time_knots = [0.0, 1.0]           # optional
    """
    if isinstance(source, dict):
        data = source
    elif isinstance(source, bytes):
        data = tomllib.loads(source.decode())
    else:
        with open(source, "rb") as fh:
            data = tomllib.load(fh)

    try:
        sys_tab = data["system"]
        sets_tab = data["sets"]
        roa_tab = data["roa"]
    except KeyError as e:
        raise ValueError(f"config missing section {e.args[0]!r}") from e

    n = int(sys_tab["n"])
    m = int(sys_tab.get("m", 0))
    state_names = tuple(f"x{i + 1}" for i in range(n))
    input_names = tuple(f"u{i + 1}" for i in range(m))
    universe = ("t",) + state_names + input_names
    f = tuple(parse_polynomial(s, universe) for s in sys_tab["f"])
    system = ControlSystem(n=n, m=m, f=f)

    X = tuple((float(lo), float(hi)) for lo, hi in sets_tab["X"])
    XT = SemialgebraicSet(tuple(parse_polynomial(s, state_names) for s in sets_tab["XT"]))
    U = None
    if m > 0:
        U = SemialgebraicSet(tuple(parse_polynomial(s, input_names) for s in sets_tab["U"]))
    u_box = None
    if "u_box" in sets_tab:
        u_box = tuple((float(lo), float(hi)) for lo, hi in sets_tab["u_box"])

    problem = RoaProblem(
        system=system,
        X=X,
        U=U,
        XT=XT,
        T=float(roa_tab["T"]),
        u_box=u_box,
        name=str(data.get("name", "custom")),
    )

    kwargs: dict = {}
    if "cells_per_axis" in roa_tab:
        kwargs["cells_per_axis"] = [int(c) for c in roa_tab["cells_per_axis"]]
    if "cuts" in roa_tab:
        cuts = {}
        for var, positions in roa_tab["cuts"].items():
            if var not in state_names:
                raise ValueError(f"cuts refer to unknown state variable {var!r}")
            cuts[state_names.index(var)] = [float(p) for p in positions]
        kwargs["cuts"] = cuts
    if "n_cells" in roa_tab:
        kwargs["n_cells"] = int(roa_tab["n_cells"])
        kwargs["split_seed"] = int(roa_tab.get("seed", 0))
    time_grid = None
    if "time_knots" in roa_tab:
        time_grid = TimeGrid(tuple(float(v) for v in roa_tab["time_knots"]))
    return problem.with_discretization(
        degree=int(roa_tab["degree"]),
        time_grid=time_grid,
        **kwargs,
    )
