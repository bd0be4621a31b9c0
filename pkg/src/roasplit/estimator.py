"""Estimator-style front end over compile / solve / extract.

``RoaEstimator`` follows the scikit-learn protocol (``get_params`` /
``set_params`` / ``fit`` / ``predict``): fitting compiles and solves the
certificate program for a problem instance, prediction tests states for
membership in the certified outer set, and ``decision_function`` exposes
the underlying v(0, .) values the way margin classifiers do.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .analysis import RoaCertificate, volume
from .compiler import DEFAULT_MARGIN, compile_problem, compile_unsplit, problem_size
from .geom import TimeGrid
from .problem import RoaProblem, builtin_problem
from .solver import SolveOptions, solve
from .validation import check_in_box, check_state_points

__all__ = ["RoaEstimator"]


class RoaEstimator(BaseEstimator):
    """Certified outer approximation of a finite-time region of attraction.

    Parameters
    ----------
    degree : even relaxation degree of all certificate polynomials.
    cuts : {axis index: [cut positions]} for explicit axis-aligned splits.
    cells_per_axis : uniform split counts per axis (alternative to cuts).
    n_cells : number of cells grown by seeded random halving
        (alternative to the two above).
    split_seed : seed for the halving strategy.
    time_knots : interior+boundary knots of the time grid (defaults to
        a single interval [0, T]).
    margin : tightening of the decrease/terminal inequalities.
    unsplit : compile the classical single-piece program regardless of
        the partition parameters.
    backend, tol, max_iters, refine : solver options.

    Attributes (after ``fit``)
    --------------------------
    certificate_ : piecewise polynomial certificate.
    report_ : solver report (status, objectives, timings).
    nnz_ : constraint-matrix nonzeros of the compiled program.
    objective_ : primal objective (integral of w over X).
    """

    def __init__(
        self,
        degree: int = 6,
        cuts=None,
        cells_per_axis=None,
        n_cells=None,
        split_seed: int = 0,
        time_knots=None,
        margin: float = DEFAULT_MARGIN,
        unsplit: bool = False,
        backend: str = "auto",
        tol: float = 1e-8,
        max_iters=None,
        refine: bool = True,
    ):
        self.degree = degree
        self.cuts = cuts
        self.cells_per_axis = cells_per_axis
        self.n_cells = n_cells
        self.split_seed = split_seed
        self.time_knots = time_knots
        self.margin = margin
        self.unsplit = unsplit
        self.backend = backend
        self.tol = tol
        self.max_iters = max_iters
        self.refine = refine

    # -- protocol ----------------------------------------------------------
    def fit(self, problem, y=None):
        """Compile and solve for a problem instance or builtin name."""
        if isinstance(problem, str):
            problem = builtin_problem(problem)
        if not isinstance(problem, RoaProblem):
            raise TypeError("fit expects an RoaProblem or a builtin name")
        time_grid = TimeGrid(tuple(self.time_knots)) if self.time_knots else None
        problem = problem.with_discretization(
            degree=self.degree,
            cuts=self.cuts,
            cells_per_axis=self.cells_per_axis,
            n_cells=self.n_cells,
            split_seed=self.split_seed,
            time_grid=time_grid,
        )
        if self.unsplit:
            sdp, layout = compile_unsplit(problem, margin=self.margin)
        else:
            sdp, layout = compile_problem(problem, margin=self.margin)
        options = SolveOptions(
            backend=self.backend,
            tol=self.tol,
            max_iters=self.max_iters,
            refine=self.refine,
        )
        report = solve(sdp, options)
        if report.status not in ("optimal", "near-optimal"):
            raise RuntimeError(f"solver finished with status {report.status!r}")
        self.problem_ = layout.problem
        self.sdp_ = sdp
        self.layout_ = layout
        self.report_ = report
        self.nnz_ = problem_size(sdp)
        self.objective_ = report.primal_objective
        self.certificate_ = RoaCertificate.from_solution(layout, report.x)
        return self

    def _check_fitted(self):
        if not hasattr(self, "certificate_"):
            raise NotFittedError("call fit before using the estimator")

    def decision_function(self, X) -> np.ndarray:
        """v(0, x); nonnegative on the certified outer set."""
        self._check_fitted()
        X = check_state_points(X, self.problem_.system.n)
        check_in_box(X, self.problem_.X)
        return self.certificate_.values_v0(X)

    def predict(self, X) -> np.ndarray:
        """Boolean membership in {x : v(0, x) >= 0}."""
        return self.decision_function(X) >= 0.0

    def score_samples(self, X) -> np.ndarray:
        """w values; {w >= 1} is the indicator-style estimate."""
        self._check_fitted()
        X = check_state_points(X, self.problem_.system.n)
        check_in_box(X, self.problem_.X)
        return self.certificate_.values_w(X)

    def estimate_volume(self, mode: str = "v", n_samples: int = 1_000_000, seed: int = 0):
        self._check_fitted()
        return volume(self.certificate_, mode, n_samples, seed)
