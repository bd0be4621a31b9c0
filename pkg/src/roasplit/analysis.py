"""Turning solved certificates into answers about the region of attraction.

Provides the piecewise certificate evaluators, Monte-Carlo volume
estimates, analytic minimum-time oracles for the benchmark systems
(with constructive near-optimal controls), a fixed-step simulator and
identity residual checks against the compiled layout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .compiler import DecisionLayout, extract_solution
from .geom import neighbor_facets
from .poly import Polynomial
from .problem import RoaProblem, lie_derivative

__all__ = [
    "RoaCertificate",
    "VolumeEstimate",
    "member_v",
    "member_w",
    "volume",
    "brockett_min_time",
    "brockett_min_time_many",
    "brockett_reach_control",
    "double_integrator_min_time",
    "oracle_member",
    "oracle_member_many",
    "sample_certified",
    "oracle_volume",
    "simulate",
    "SimulationResult",
    "identity_residuals",
    "IdentityResidual",
    "export_grid_csv",
    "mc_integral_w",
]


# ---------------------------------------------------------------------------
# certificates


@dataclass
class RoaCertificate:
    """Piecewise polynomials (v, w) over the cell partition and time grid.

    Points on cell boundaries evaluate on the lowest incident cell id,
    knot times on the lower interval index.
    """

    problem: RoaProblem
    v: dict  # (cell id, interval) -> Polynomial in (t, x)
    w: dict  # cell id -> Polynomial in x

    @staticmethod
    def from_solution(layout: DecisionLayout, x: np.ndarray) -> "RoaCertificate":
        v, w = extract_solution(layout, x)
        return RoaCertificate(problem=layout.problem, v=v, w=w)

    # -- point location -------------------------------------------------
    def locate_cell(self, x) -> int:
        for cell in self.problem.cells:
            if cell.contains(x):
                return cell.id
        raise ValueError(f"point {x} outside the state box")

    def locate_cells(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.full(X.shape[0], -1, dtype=int)
        for cell in self.problem.cells:
            mask = out < 0
            for j, (lo, hi) in enumerate(cell.box):
                mask &= (X[:, j] >= lo) & (X[:, j] <= hi)
            out[mask] = cell.id
        return out

    # -- evaluation -------------------------------------------------------
    def value_v(self, t: float, x) -> float:
        cell = self.locate_cell(x)
        k = self.problem.time_grid.locate(t)
        point = {"t": t}
        for j, name in enumerate(self.problem.system.state_names()):
            point[name] = float(x[j])
        return self.v[(cell, k)].evaluate(point)

    def value_w(self, x) -> float:
        cell = self.locate_cell(x)
        point = {
            name: float(x[j])
            for j, name in enumerate(self.problem.system.state_names())
        }
        return self.w[cell].evaluate(point)

    def _grouped_eval(self, X: np.ndarray, poly_of_cell, extra_cols=None) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        cells = self.locate_cells(X)
        if np.any(cells < 0):
            bad = X[cells < 0][0]
            raise ValueError(f"point {bad} outside the state box")
        out = np.empty(X.shape[0])
        names = self.problem.system.state_names()
        for cell in self.problem.cells:
            mask = cells == cell.id
            if not np.any(mask):
                continue
            cols = {name: X[mask, j] for j, name in enumerate(names)}
            if extra_cols:
                for key, val in extra_cols.items():
                    cols[key] = np.full(int(mask.sum()), val)
            out[mask] = poly_of_cell(cell.id).evaluate_many(cols)
        return out

    def values_v0(self, X: np.ndarray) -> np.ndarray:
        """v(0, x) on an (N, n) array of states."""
        return self._grouped_eval(X, lambda cid: self.v[(cid, 0)], {"t": 0.0})

    def values_w(self, X: np.ndarray) -> np.ndarray:
        return self._grouped_eval(X, lambda cid: self.w[cid])


def member_v(cert: RoaCertificate, x) -> bool:
    """Membership in the certified outer set {x : v(0, x) >= 0}."""
    return cert.value_v(0.0, x) >= 0.0


def member_w(cert: RoaCertificate, x) -> bool:
    """Membership in the indicator-style estimate {x : w(x) >= 1}."""
    return cert.value_w(x) >= 1.0


@dataclass(frozen=True)
class VolumeEstimate:
    mean: float
    std_error: float
    samples: int
    seed: int


def _uniform_box(rng, box, n):
    los = np.array([lo for lo, _ in box])
    his = np.array([hi for _, hi in box])
    return los + (his - los) * rng.random((n, len(box)))


def volume(
    cert: RoaCertificate,
    mode: str = "v",
    n_samples: int = 1_000_000,
    seed: int = 0,
) -> VolumeEstimate:
    """Monte-Carlo volume of the v-set {v(0,.) >= 0} or w-set {w >= 1}."""
    if n_samples < 10_000:
        raise ValueError("use at least 10^4 samples")
    rng = np.random.default_rng(seed)
    X = _uniform_box(rng, cert.problem.X, n_samples)
    if mode == "v":
        inside = cert.values_v0(X) >= 0.0
    elif mode == "w":
        inside = cert.values_w(X) >= 1.0
    else:
        raise ValueError("mode must be 'v' or 'w'")
    lam = cert.problem.state_volume()
    p = float(np.mean(inside))
    return VolumeEstimate(
        mean=p * lam,
        std_error=math.sqrt(p * (1.0 - p) / n_samples) * lam,
        samples=n_samples,
        seed=seed,
    )


def mc_integral_w(cert: RoaCertificate, n_samples: int = 200_000, seed: int = 0):
    """Monte-Carlo estimate of the integral of w over X (mean, std error)."""
    rng = np.random.default_rng(seed)
    X = _uniform_box(rng, cert.problem.X, n_samples)
    vals = cert.values_w(X)
    lam = cert.problem.state_volume()
    return float(np.mean(vals) * lam), float(np.std(vals) / math.sqrt(n_samples) * lam)


# ---------------------------------------------------------------------------
# benchmark oracles


def _brockett_theta_many(ratio: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Solve (theta - sin theta cos theta)/sin^2 theta = ratio on (0, pi).

    The left-hand side increases monotonically from 0 to +inf, so
    bisection always brackets; iterate until the bracket is below tol.
    """
    lo = np.full_like(ratio, 1e-9)
    hi = np.full_like(ratio, math.pi - 1e-14)
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        s = np.sin(mid)
        val = (mid - s * np.cos(mid)) / (s * s)
        take_hi = val < ratio
        lo = np.where(take_hi, mid, lo)
        hi = np.where(take_hi, hi, mid)
        if np.max(hi - lo) <= tol:
            break
    return 0.5 * (lo + hi)


def brockett_min_time_many(X: np.ndarray) -> np.ndarray:
    """Minimum time to the origin for the nonholonomic integrator."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    rho2 = X[:, 0] ** 2 + X[:, 1] ** 2
    a3 = 2.0 * np.abs(X[:, 2])
    out = np.zeros(X.shape[0])
    pure_plane = (a3 == 0.0) & (rho2 > 0.0)
    out[pure_plane] = np.sqrt(rho2[pure_plane])
    pure_twist = (rho2 == 0.0) & (a3 > 0.0)
    out[pure_twist] = np.sqrt(math.pi * a3[pure_twist])
    generic = (rho2 > 0.0) & (a3 > 0.0)
    if np.any(generic):
        theta = _brockett_theta_many(a3[generic] / rho2[generic])
        s, c = np.sin(theta), np.cos(theta)
        out[generic] = (
            theta
            * np.sqrt(rho2[generic] + a3[generic])
            / np.sqrt(theta + s * s - s * c)
        )
    return out


def brockett_min_time(x) -> float:
    """Scalar minimum time; exact limits at x3 = 0 and x1 = x2 = 0."""
    return float(brockett_min_time_many(np.asarray(x, dtype=float).reshape(1, 3))[0])


def _brockett_arc_params(X: np.ndarray):
    """Geometry of the time-optimal planar paths (vectorized).

    Returns dict of arrays describing, per point, either a straight
    segment to the origin (x3 = 0) or a circular arc whose swept sector
    consumes x3.  Duration always equals the minimum time.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = X.shape[0]
    p = X[:, :2]
    x3 = X[:, 2]
    rho = np.hypot(p[:, 0], p[:, 1])
    T = brockett_min_time_many(X)

    is_line = (x3 == 0.0)
    C = np.zeros((n, 2))
    R = np.zeros(n)
    phi_p = np.zeros(n)
    omega = np.zeros(n)
    sweep = np.zeros(n)

    # full circle from the origin (rho = 0, x3 != 0)
    circle = (~is_line) & (rho == 0.0)
    if np.any(circle):
        Rc = np.sqrt(np.abs(x3[circle]) / (2.0 * math.pi))
        R[circle] = Rc
        C[circle, 0] = Rc
        phi_p[circle] = math.pi
        omega[circle] = np.sign(x3[circle])
        sweep[circle] = 2.0 * math.pi

    generic = (~is_line) & (rho > 0.0)
    if np.any(generic):
        idx = np.flatnonzero(generic)
        rho2 = rho[idx] ** 2
        theta = _brockett_theta_many(2.0 * np.abs(x3[idx]) / rho2)
        Rg = rho[idx] / (2.0 * np.sin(theta))
        mid = 0.5 * p[idx]
        ehat = -p[idx] / rho[idx, None]
        nhat = np.stack([-ehat[:, 1], ehat[:, 0]], axis=1)
        h = Rg * np.cos(theta)
        # Sweeping counterclockwise raises the sector area, which lowers
        # x3; choose the side/direction pair that consumes x3 exactly.
        best_err = np.full(len(idx), np.inf)
        for sigma in (1.0, -1.0):
            Cc = mid + sigma * h[:, None] * nhat
            fp = np.arctan2(p[idx, 1] - Cc[:, 1], p[idx, 0] - Cc[:, 0])
            f0 = np.arctan2(-Cc[:, 1], -Cc[:, 0])
            for om in (1.0, -1.0):
                end = fp + om * 2.0 * theta
                mismatch = np.abs((end - f0 + math.pi) % (2.0 * math.pi) - math.pi)
                x3_end = x3[idx] - Rg * (
                    Rg * (end - fp)
                    + Cc[:, 0] * (np.sin(end) - np.sin(fp))
                    - Cc[:, 1] * (np.cos(end) - np.cos(fp))
                )
                err = mismatch + np.abs(x3_end)
                better = err < best_err
                best_err = np.where(better, err, best_err)
                C[idx] = np.where(better[:, None], Cc, C[idx])
                R[idx] = np.where(better, Rg, R[idx])
                phi_p[idx] = np.where(better, fp, phi_p[idx])
                omega[idx] = np.where(better, om, omega[idx])
                sweep[idx] = np.where(better, 2.0 * theta, sweep[idx])

    return dict(
        start=p, x3=x3, is_line=is_line, C=C, R=R,
        phi_p=phi_p, omega=omega, sweep=sweep, duration=T,
    )


def _brockett_path_points(params, fractions: np.ndarray):
    """Path states at the given time fractions; shapes (N, S) per state."""
    p = params["start"]
    n = p.shape[0]
    S = len(fractions)
    fr = fractions[None, :]
    x1 = np.empty((n, S))
    x2 = np.empty((n, S))
    x3 = np.empty((n, S))
    line = params["is_line"]
    if np.any(line):
        x1[line] = p[line, 0:1] * (1.0 - fr)
        x2[line] = p[line, 1:2] * (1.0 - fr)
        x3[line] = 0.0
    arc = ~line
    if np.any(arc):
        C = params["C"][arc]
        R = params["R"][arc]
        fp = params["phi_p"][arc]
        om = params["omega"][arc]
        sw = params["sweep"][arc]
        phi = fp[:, None] + om[:, None] * sw[:, None] * fr
        x1[arc] = C[:, 0:1] + R[:, None] * np.cos(phi)
        x2[arc] = C[:, 1:2] + R[:, None] * np.sin(phi)
        x3[arc] = params["x3"][arc, None] - R[:, None] * (
            R[:, None] * (phi - fp[:, None])
            + C[:, 0:1] * (np.sin(phi) - np.sin(fp[:, None]))
            - C[:, 1:2] * (np.cos(phi) - np.cos(fp[:, None]))
        )
    return x1, x2, x3


def brockett_reach_control(x):
    """Open-loop unit-norm control steering x to the origin in minimum time.

    Returns ``(policy, duration)``; the policy follows the optimal
    planar geometry at unit speed (constant heading on segments,
    rotating heading on arcs).
    """
    x = np.asarray(x, dtype=float).reshape(3)
    params = _brockett_arc_params(x.reshape(1, 3))
    T = float(params["duration"][0])
    if T == 0.0:
        return (lambda t, state: np.zeros(2)), 0.0
    if bool(params["is_line"][0]):
        rho = math.hypot(x[0], x[1])
        direction = np.array([-x[0] / rho, -x[1] / rho])

        def policy(t, state):
            return direction if t <= T else np.zeros(2)

        return policy, T
    R = float(params["R"][0])
    fp = float(params["phi_p"][0])
    om = float(params["omega"][0])
    sw = float(params["sweep"][0])

    def policy(t, state):
        if t > T:
            return np.zeros(2)
        phi = fp + om * sw * (t / T)
        return np.array([-om * math.sin(phi), om * math.cos(phi)])

    return policy, T


def _brockett_contained(X: np.ndarray, bound: float, n_path: int = 160) -> np.ndarray:
    """Whether the constructed optimal path stays inside the sup-norm box."""
    params = _brockett_arc_params(X)
    fr = np.linspace(0.0, 1.0, n_path)
    x1, x2, x3 = _brockett_path_points(params, fr)
    sup = np.maximum(np.abs(x1).max(axis=1), np.abs(x2).max(axis=1))
    sup = np.maximum(sup, np.abs(x3).max(axis=1))
    return sup <= bound


def double_integrator_min_time(x) -> float:
    """Closed-form bang-bang minimum time to the origin with |u| <= 1."""
    return float(double_integrator_min_time_many(np.asarray(x, dtype=float).reshape(1, 2))[0])


def double_integrator_min_time_many(X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    x1, x2 = X[:, 0], X[:, 1]
    delta = x1 + 0.5 * x2 * np.abs(x2)
    right = delta > 0.0
    T = np.empty(X.shape[0])
    T[right] = x2[right] + 2.0 * np.sqrt(0.5 * x2[right] ** 2 + x1[right])
    T[~right] = -x2[~right] + 2.0 * np.sqrt(0.5 * x2[~right] ** 2 - x1[~right])
    return T


def _di_bang_path(X: np.ndarray, fractions: np.ndarray):
    """States along the two-phase bang-bang path, vectorized.

    Points left of the switching curve are mirrored through the origin,
    which swaps the control sign but preserves path magnitudes.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    x1, x2 = X[:, 0].copy(), X[:, 1].copy()
    delta = x1 + 0.5 * x2 * np.abs(x2)
    flip = delta < 0.0
    x1[flip] *= -1.0
    x2[flip] *= -1.0
    root = np.sqrt(np.maximum(0.5 * x2**2 + x1, 0.0))
    t1 = x2 + root  # braking phase, u = -1
    t2 = root  # final approach, u = +1
    T = t1 + t2
    fr = fractions[None, :]
    t = T[:, None] * fr
    tau1 = np.minimum(t, t1[:, None])
    p1 = x1[:, None] + x2[:, None] * tau1 - 0.5 * tau1**2
    v1 = x2[:, None] - tau1
    tau2 = np.clip(t - t1[:, None], 0.0, None)
    pos = p1 + v1 * tau2 + 0.5 * tau2**2
    vel = v1 + tau2
    sign = np.where(flip, -1.0, 1.0)[:, None]
    return sign * pos, sign * vel, T


def _di_contained(X: np.ndarray, box, n_path: int = 160) -> np.ndarray:
    fr = np.linspace(0.0, 1.0, n_path)
    pos, vel, _ = _di_bang_path(X, fr)
    ok = (pos.min(axis=1) >= box[0][0]) & (pos.max(axis=1) <= box[0][1])
    ok &= (vel.min(axis=1) >= box[1][0]) & (vel.max(axis=1) <= box[1][1])
    return ok


def double_integrator_bang_policy(x):
    """Feedback form of the time-optimal control (for simulation checks)."""

    def policy(t, state):
        x1, x2 = state
        delta = x1 + 0.5 * x2 * abs(x2)
        if abs(delta) < 1e-12:
            u = -1.0 if x2 > 0 else (1.0 if x2 < 0 else 0.0)
        else:
            u = -1.0 if delta > 0 else 1.0
        return np.array([u])

    return policy


_DI_BOX = ((-0.7, 0.7), (-1.2, 1.2))


def oracle_member_many(name: str, X: np.ndarray, horizon: float) -> np.ndarray:
    """Analytic membership in the true region of attraction (vectorized).

    Certification is conservative: for the controlled benchmarks the
    point counts only when the constructed optimal path also respects
    the state box.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if name == "cubic":
        return np.abs(X[:, 0]) <= 0.5
    if name == "double_integrator":
        ok = double_integrator_min_time_many(X) <= horizon
        idx = np.flatnonzero(ok)
        if idx.size:
            ok[idx] &= _di_contained(X[idx], _DI_BOX)
        return ok
    if name == "brockett":
        ok = brockett_min_time_many(X) <= horizon
        idx = np.flatnonzero(ok)
        if idx.size:
            ok[idx] &= _brockett_contained(X[idx], 1.0)
        return ok
    raise ValueError(f"no oracle for benchmark {name!r}")


def oracle_member(name: str, x, horizon: float) -> bool:
    arr = np.asarray(x, dtype=float).reshape(1, -1)
    return bool(oracle_member_many(name, arr, horizon)[0])


_ORACLE_BOXES = {
    "cubic": ((-1.0, 1.0),),
    "double_integrator": _DI_BOX,
    "brockett": ((-1.0, 1.0),) * 3,
}


def sample_certified(name: str, n_points: int, horizon: float, seed: int = 0) -> np.ndarray:
    """Draw points certified by the analytic oracle, by rejection."""
    box = _ORACLE_BOXES[name]
    rng = np.random.default_rng(seed)
    chunks = []
    total = 0
    while total < n_points:
        draw = _uniform_box(rng, box, 4 * n_points)
        keep = draw[oracle_member_many(name, draw, horizon)]
        chunks.append(keep)
        total += len(keep)
    return np.concatenate(chunks)[:n_points]


def oracle_volume(name: str, horizon: float, n_samples: int = 1_000_000, seed: int = 0) -> VolumeEstimate:
    box = _ORACLE_BOXES[name]
    rng = np.random.default_rng(seed)
    X = _uniform_box(rng, box, n_samples)
    inside = oracle_member_many(name, X, horizon)
    lam = 1.0
    for lo, hi in box:
        lam *= hi - lo
    p = float(np.mean(inside))
    return VolumeEstimate(
        mean=p * lam,
        std_error=math.sqrt(p * (1.0 - p) / n_samples) * lam,
        samples=n_samples,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# simulation


@dataclass
class SimulationResult:
    times: np.ndarray
    states: np.ndarray
    reached: bool
    t_reached: float | None
    violated: bool
    t_violated: float | None


def simulate(
    problem: RoaProblem,
    x0,
    policy=None,
    dt: float = 1e-3,
    t_end: float | None = None,
    blowup_factor: float = 10.0,
) -> SimulationResult:
    """Fixed-step fourth-order integration of the controlled dynamics.

    State-constraint violations and target arrival are reported, never
    raised.  Integration stops early if the state leaves the box by
    more than ``blowup_factor`` times its width.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    system = problem.system
    names = system.state_names()
    input_names = system.input_names()
    T = problem.T if t_end is None else t_end
    x = np.asarray(x0, dtype=float).copy()
    if policy is None:
        policy = lambda t, state: np.zeros(system.m)

    def rhs(t, state):
        u = np.atleast_1d(np.asarray(policy(t, state), dtype=float)) if system.m else ()
        point = {"t": t}
        for j, name in enumerate(names):
            point[name] = state[j]
        for l, name in enumerate(input_names):
            point[name] = u[l]
        return np.array([fj.evaluate(point) for fj in system.f])

    def in_target(state):
        point = {name: state[j] for j, name in enumerate(names)}
        return problem.XT.contains(point)

    def in_box(state):
        return all(lo <= s <= hi for s, (lo, hi) in zip(state, problem.X))

    widths = np.array([hi - lo for lo, hi in problem.X])
    los = np.array([lo for lo, _ in problem.X])
    his = np.array([hi for _, hi in problem.X])

    n_steps = int(math.ceil(T / dt))
    times = [0.0]
    states = [x.copy()]
    reached = in_target(x)
    t_reached = 0.0 if reached else None
    violated = not in_box(x)
    t_violated = 0.0 if violated else None
    t = 0.0
    for step in range(n_steps):
        h = min(dt, T - t)
        k1 = rhs(t, x)
        k2 = rhs(t + h / 2, x + h / 2 * k1)
        k3 = rhs(t + h / 2, x + h / 2 * k2)
        k4 = rhs(t + h, x + h * k3)
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
        times.append(t)
        states.append(x.copy())
        if not reached and in_target(x):
            reached, t_reached = True, t
        if not violated and not in_box(x):
            violated, t_violated = True, t
        if np.any(x < los - blowup_factor * widths) or np.any(x > his + blowup_factor * widths):
            break
    return SimulationResult(
        times=np.array(times),
        states=np.array(states),
        reached=reached,
        t_reached=t_reached,
        violated=violated,
        t_violated=t_violated,
    )


# ---------------------------------------------------------------------------
# identity residuals


@dataclass(frozen=True)
class IdentityResidual:
    ident_id: str
    family: str
    max_abs: float
    max_rel: float  # |residual| / (1 + local magnitude)


def _identity_lhs_values(layout, ident, cert, pts_local):
    """Evaluate the identity's certified left side at original points.

    Reconstructs the polynomials independently from the extracted
    certificate and the problem data, not from the compiled matrix.
    """
    problem = layout.problem
    names = problem.system.state_names()
    cols_orig = {}
    for var in ident.local_vars:
        shift, scale = ident.var_maps[var]
        cols_orig[var] = shift + scale * pts_local[var]
    npts = len(next(iter(pts_local.values())))
    for var, val in ident.fixed_vars.items():
        cols_orig[var] = np.full(npts, val)

    fam = ident.family
    if fam == "lie":
        i, k = ident.key
        rt = layout.t_scales[k][1]
        lv = lie_derivative(cert.v[(i, k)], problem.system)
        return -rt * lv.evaluate_many(cols_orig)
    if fam == "init":
        (i,) = ident.key
        return (
            cert.w[i].evaluate_many(cols_orig)
            - cert.v[(i, 0)].substitute({"t": 0.0}).evaluate_many(cols_orig)
        )
    if fam == "terminal":
        (i,) = ident.key
        last = problem.time_grid.n_intervals - 1
        return cert.v[(i, last)].substitute({"t": problem.T}).evaluate_many(cols_orig)
    if fam == "wpos":
        (i,) = ident.key
        return cert.w[i].evaluate_many(cols_orig)
    if fam == "stitch":
        i, k = ident.key
        knot = problem.time_grid.knots[k + 1]
        a = cert.v[(i, k)].substitute({"t": knot}).evaluate_many(cols_orig)
        b = cert.v[(i, k + 1)].substitute({"t": knot}).evaluate_many(cols_orig)
        return a - b
    if fam in ("flow+", "flow-"):
        facet_idx, k = ident.key
        facets = neighbor_facets(problem.cells)
        facet = facets[facet_idx]
        va = cert.v[(facet.a, k)].evaluate_many(cols_orig)
        vb = cert.v[(facet.b, k)].evaluate_many(cols_orig)
        diff = va - vb
        return diff if fam == "flow+" else -diff
    raise ValueError(f"unknown identity family {fam!r}")


def _identity_rhs_values(ident, x, pts_local):
    npts = len(next(iter(pts_local.values())))
    total = np.full(npts, ident.const)
    magnitude = np.full(npts, abs(ident.const))
    for block in ident.blocks:
        B = np.stack([
            Polynomial({mono: 1.0}).evaluate_many(pts_local) for mono in block.basis
        ])
        order = len(block.basis)
        from .solver import svec_to_matrix

        Q = svec_to_matrix(x[block.offset : block.offset + order * (order + 1) // 2], order)
        sos_vals = np.einsum("ip,ij,jp->p", B, Q, B)
        gv = block.g.evaluate_many(pts_local)
        term = sos_vals * gv
        total += term
        magnitude += np.abs(term)
    return total, magnitude


def identity_residuals(
    layout: DecisionLayout,
    x: np.ndarray,
    cert: RoaCertificate | None = None,
    n_points: int = 200,
    seed: int = 0,
) -> list[IdentityResidual]:
    """Spot-check every compiled equality family at random domain points.

    The left side comes from the extracted certificate and the problem
    data; the right side from the Gram values in the primal vector, so
    the two routes are independent of the assembled matrix.
    """
    if cert is None:
        cert = RoaCertificate.from_solution(layout, x)
    rng = np.random.default_rng(seed)
    out = []
    for ident in layout.identities:
        pts = {var: rng.uniform(-1.0, 1.0, n_points) for var in ident.local_vars}
        lhs = _identity_lhs_values(layout, ident, cert, pts)
        rhs, mag = _identity_rhs_values(ident, x, pts)
        res = lhs - rhs
        rel = np.abs(res) / (1.0 + np.abs(lhs) + mag)
        out.append(
            IdentityResidual(
                ident_id=ident.ident_id,
                family=ident.family,
                max_abs=float(np.max(np.abs(res))),
                max_rel=float(np.max(rel)),
            )
        )
    return out


# ---------------------------------------------------------------------------
# exports


def export_grid_csv(cert: RoaCertificate, path: str, resolution=51) -> int:
    """Lattice evaluation of v(0, .) and w, written as CSV.

    Returns the number of data rows.
    """
    n = cert.problem.system.n
    if isinstance(resolution, int):
        resolution = [resolution] * n
    axes = [
        np.linspace(lo, hi, r)
        for (lo, hi), r in zip(cert.problem.X, resolution)
    ]
    grids = np.meshgrid(*axes, indexing="ij")
    X = np.stack([g.ravel() for g in grids], axis=1)
    v0 = cert.values_v0(X)
    w = cert.values_w(X)
    names = cert.problem.system.state_names()
    with open(path, "w") as fh:
        fh.write(",".join(names) + ",v0,w\n")
        for row, vv, ww in zip(X, v0, w):
            fh.write(",".join(repr(float(c)) for c in row) + f",{vv!r},{ww!r}\n")
    return X.shape[0]
