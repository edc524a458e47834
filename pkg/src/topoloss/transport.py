"""Entropic optimal transport between persistence diagrams.

The solver follows the reference recipe exactly: kernel K = exp(-C/mu),
normalization vectors initialized to uniform distributions, alternating
updates u = 1/(K v + eps) and v = 1/(K^T u + eps), convergence declared when
both u and v match their previous iterates elementwise within an absolute
tolerance, plan P = diag(u) K diag(v), and the reported distance is the
plain sum of P * C with no p-th root.

``naive`` stabilization reproduces that arithmetic verbatim, including the
eps guard against zero division. ``log-domain`` iterates the dual
potentials log u / log v with log-sum-exp, which reaches the same fixed
point without exp(-C/mu) underflowing; its convergence test evaluates the
same |u - u_prev| <= tol condition, computed in log space so that huge or
tiny scaling vectors never falsely trigger it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

EXACT_ASSIGNMENT_CAP = 64

STABILIZATIONS = ("naive", "log-domain")
CARDINALITY_MODES = ("paper-literal", "diagonal-augmented")


class EmptyDiagramError(ValueError):
    """A diagram with no points reached an operation that needs points."""


class NonFiniteCoordinateError(ValueError):
    """A diagram point has a NaN or infinite coordinate."""


@dataclass(frozen=True)
class SinkhornConfig:
    """Knobs of the entropic solver.

    mu: entropic regularization strength.
    epsilon: zero-division guard added to K v and K^T u (naive mode only).
    max_iter / tol: iteration cap and the absolute tolerance of the
        u/v convergence test.
    p: exponent of the coordinate-wise cost |b - b'|^p + |d - d'|^p.
    stabilization: "naive" or "log-domain".
    cardinality_mode: "paper-literal" runs on the raw rectangular cost;
        "diagonal-augmented" pads both diagrams with the other side's
        diagonal projections first, yielding a square problem.
    """

    mu: float = 0.01
    epsilon: float = 1e-99
    max_iter: int = 1000
    tol: float = 1e-6
    p: float = 2.0
    stabilization: str = "naive"
    cardinality_mode: str = "paper-literal"

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if not self.p >= 1:
            raise ValueError(f"p must be >= 1, got {self.p}")
        if self.stabilization not in STABILIZATIONS:
            raise ValueError(f"stabilization must be one of {STABILIZATIONS}")
        if self.cardinality_mode not in CARDINALITY_MODES:
            raise ValueError(f"cardinality_mode must be one of {CARDINALITY_MODES}")


@dataclass(frozen=True)
class TransportPlan:
    """Nonnegative coupling matrix plus convergence bookkeeping."""

    matrix: np.ndarray
    converged: bool
    iterations_used: int

    @property
    def shape(self) -> tuple:
        return self.matrix.shape


def _as_points(points, name: str) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.size == 0:
        raise EmptyDiagramError(f"{name} has no points")
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"{name} must be an (n, 2) array of (birth, death), got {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise NonFiniteCoordinateError(
            f"{name} has non-finite coordinates; replace infinite deaths first"
        )
    return pts


def cost_matrix(points1, points2, p: float = 2.0) -> np.ndarray:
    """C[i, j] = |b_i - b'_j|^p + |d_i - d'_j|^p for finite diagram points."""
    pts1 = _as_points(points1, "first diagram")
    pts2 = _as_points(points2, "second diagram")
    db = np.abs(pts1[:, 0][:, None] - pts2[:, 0][None, :])
    dd = np.abs(pts1[:, 1][:, None] - pts2[:, 1][None, :])
    return db**p + dd**p


def augment_diagonal(points1, points2) -> tuple:
    """Pad each diagram with the other's diagonal projections ((b+d)/2, (b+d)/2).

    Both outputs have n1 + n2 points, so unmatched features can pay their
    persistence by moving to the diagonal.
    """
    pts1 = _as_points(points1, "first diagram")
    pts2 = _as_points(points2, "second diagram")

    def projections(pts):
        mid = (pts[:, 0] + pts[:, 1]) / 2.0
        return np.column_stack([mid, mid])

    aug1 = np.vstack([pts1, projections(pts2)])
    aug2 = np.vstack([pts2, projections(pts1)])
    return aug1, aug2


def _log_abs_diff(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """log |e^a - e^b| without leaving log space; -inf where a == b."""
    hi = np.maximum(a, b)
    gap = -np.abs(a - b)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = hi + np.log(-np.expm1(gap))
    return np.where(gap == 0.0, -np.inf, out)


def _logsumexp(m: np.ndarray, axis: int) -> np.ndarray:
    mx = m.max(axis=axis)
    return mx + np.log(np.exp(m - np.expand_dims(mx, axis)).sum(axis=axis))


def sinkhorn_plan(cost: np.ndarray, config: SinkhornConfig = SinkhornConfig()) -> TransportPlan:
    """Alternating-normalization transport plan for a finite cost matrix."""
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.size == 0:
        raise ValueError(f"cost matrix must be 2D and non-empty, got shape {cost.shape}")
    if not np.all(np.isfinite(cost)) or cost.min() < 0:
        raise ValueError("cost matrix entries must be finite and nonnegative")

    n1, n2 = cost.shape
    converged = False
    iterations = config.max_iter

    if config.stabilization == "naive":
        K = np.exp(-cost / config.mu)
        u = np.ones(n1) / n1
        v = np.ones(n2) / n2
        for k in range(config.max_iter):
            u_prev, v_prev = u, v
            u = 1.0 / (K @ v + config.epsilon)
            v = 1.0 / (K.T @ u + config.epsilon)
            if np.allclose(u, u_prev, rtol=0, atol=config.tol) and np.allclose(
                v, v_prev, rtol=0, atol=config.tol
            ):
                converged = True
                iterations = k + 1
                break
        plan = u[:, None] * K * v[None, :]
    else:
        log_k = -cost / config.mu
        lu = np.full(n1, -np.log(n1))
        lv = np.full(n2, -np.log(n2))
        log_tol = np.log(config.tol)
        for k in range(config.max_iter):
            lu_prev, lv_prev = lu, lv
            lu = -_logsumexp(log_k + lv[None, :], axis=1)
            lv = -_logsumexp(log_k + lu[:, None], axis=0)
            if np.all(_log_abs_diff(lu, lu_prev) <= log_tol) and np.all(
                _log_abs_diff(lv, lv_prev) <= log_tol
            ):
                converged = True
                iterations = k + 1
                break
        with np.errstate(under="ignore"):
            plan = np.exp(lu[:, None] + log_k + lv[None, :])

    return TransportPlan(matrix=plan, converged=converged, iterations_used=iterations)


def wasserstein_distance(points1, points2, config: SinkhornConfig = SinkhornConfig()) -> float:
    """Entropic transport cost sum(P * C) between two diagrams (no p-th root)."""
    plan, cost = transport_plan(points1, points2, config)
    return float(np.sum(plan.matrix * cost))


def transport_plan(points1, points2, config: SinkhornConfig = SinkhornConfig()) -> tuple:
    """(TransportPlan, cost matrix) under the configured cardinality mode."""
    if config.cardinality_mode == "diagonal-augmented":
        points1, points2 = augment_diagonal(points1, points2)
    cost = cost_matrix(points1, points2, p=config.p)
    return sinkhorn_plan(cost, config), cost


def exact_assignment(cost: np.ndarray) -> tuple:
    """Minimum-cost perfect matching: (cost, permutation).

    Exact oracle for the square case; the transport optimum over doubly
    stochastic matrices is attained at a permutation, so this bounds the
    entropic cost from below.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise ValueError(f"exact_assignment needs a square matrix, got shape {cost.shape}")
    if cost.shape[0] > EXACT_ASSIGNMENT_CAP:
        raise ValueError(
            f"exact_assignment is an oracle capped at N <= {EXACT_ASSIGNMENT_CAP}"
        )
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix entries must be finite")
    rows, cols = linear_sum_assignment(cost)
    total = float(cost[rows, cols].sum())
    return total, tuple(int(c) for c in cols)
