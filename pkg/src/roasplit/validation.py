"""Input validation helpers for array-facing entry points."""

from __future__ import annotations

import numpy as np

__all__ = ["check_state_points", "check_in_box"]


def check_state_points(X, n_states: int) -> np.ndarray:
    """Coerce to a finite (N, n) float array of state points."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        if n_states == 1:
            X = X.reshape(-1, 1)
        elif X.shape == (n_states,):
            X = X.reshape(1, -1)
    if X.ndim != 2 or X.shape[1] != n_states:
        raise ValueError(
            f"expected points of shape (N, {n_states}), got {np.asarray(X).shape}"
        )
    if not np.all(np.isfinite(X)):
        raise ValueError("state points must be finite")
    return X


def check_in_box(X: np.ndarray, box) -> None:
    for j, (lo, hi) in enumerate(box):
        col = X[:, j]
        if np.any(col < lo) or np.any(col > hi):
            bad = X[(col < lo) | (col > hi)][0]
            raise ValueError(f"point {bad.tolist()} outside the state box")
