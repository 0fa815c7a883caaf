"""Donor-weight solver: simplex-constrained weighted least squares.

SyntheticControl is a scikit-learn style estimator. Rows of X are time
periods in chronological order (last row = most recent), columns are donor
units, and y is the treated unit's series over the same periods. fit()
finds the weight vector w minimizing

    sum_t omega_t * (y_t - X[t] @ w)^2    s.t.  w >= 0, sum(w) = 1,

where omega_t are exponential time-decay weights (recent periods count
more). The program is a convex QP over the probability simplex; it is
solved by deterministic projected-gradient descent from the uniform
vector, with a fixed step from the Lipschitz constant and periodic exact
refinements on the active face so the returned weights carry a tight
KKT certificate. The optimum objective is unique; on degenerate (flat)
faces the weights themselves may not be, and the deterministic solve path
fixes which optimum is reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .errors import ParameterError
from .study import StudyData

__all__ = [
    "DEFAULT_DECAY",
    "DEFAULT_TOL",
    "DEFAULT_MAX_ITER",
    "TimeWeights",
    "time_weights",
    "project_to_simplex",
    "kkt_gap",
    "SyntheticControl",
    "FitResult",
    "fit_study",
]

DEFAULT_DECAY = 0.005
DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 100_000

# exact face refinement runs this often during the gradient iteration
_REFINE_EVERY = 100
_TINY = 1e-300


@dataclass(frozen=True)
class TimeWeights:
    """Per-period loss weights omega together with the decay rate used."""

    omega: np.ndarray
    alpha: float

    def __post_init__(self) -> None:
        omega = np.array(self.omega, dtype=np.float64)
        omega.setflags(write=False)
        object.__setattr__(self, "omega", omega)


def time_weights(offsets, alpha: float) -> TimeWeights:
    """Exponential decay weights omega = exp(alpha * offset).

    Offsets are month positions relative to the last pre-treatment period
    (0 for the last pre month, negative before it), so 0 < omega <= 1 and
    weights increase toward the intervention when alpha > 0.
    """
    if not (math.isfinite(alpha) and alpha >= 0.0):
        raise ParameterError(f"decay rate must be finite and >= 0, got {alpha}")
    offs = np.asarray(offsets, dtype=np.float64)
    if offs.ndim != 1 or offs.size == 0:
        raise ParameterError("offsets must be a non-empty 1-d sequence")
    if offs.max() > 0:
        raise ParameterError("offsets must be <= 0 (0 = last pre-treatment period)")
    if offs.size > 1 and not (np.diff(offs) > 0).all():
        raise ParameterError("offsets must be strictly increasing")
    return TimeWeights(omega=np.exp(alpha * offs), alpha=float(alpha))


def project_to_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {w : w >= 0, sum(w) = 1}.

    Standard sort-based algorithm; O(n log n), deterministic.
    """
    v = np.asarray(v, dtype=np.float64)
    u = np.sort(v)[::-1]
    cumulative = np.cumsum(u)
    ranks = np.arange(1, v.size + 1)
    rho = int(np.count_nonzero(u - (cumulative - 1.0) / ranks > 0))
    theta = (cumulative[rho - 1] - 1.0) / rho
    return np.maximum(v - theta, 0.0)


def _exact_simplex(w: np.ndarray) -> np.ndarray:
    """Clamp tolerated negatives and renormalize so sum(w) == 1.0 exactly.

    The residual after division is at most a few ulps; absorbing it into a
    single coordinate can leave the (pairwise) sum oscillating one ulp off,
    so the absorption walks across coordinates until the sum lands on 1.0.
    """
    if w.min() < -1e-12:
        raise ParameterError(f"weight {w.min()} below the feasibility tolerance")
    w = np.maximum(w, 0.0)
    total = w.sum()
    if total <= 0.0:
        raise ParameterError("weights sum to zero; cannot normalize")
    w = w / total
    for j in np.argsort(-w, kind="stable"):
        if w[j] <= 0.0:
            break
        for _ in range(4):
            residual = 1.0 - w.sum()
            if residual == 0.0:
                return w
            w[j] += residual
    return w


def _gradient_scale(A: np.ndarray, b: np.ndarray, w: np.ndarray) -> float:
    """Natural magnitude of the gradient 2(Aw - b), stable near optimum."""
    return 2.0 * max(float(np.abs(A @ w).max()), float(np.abs(b).max()), _TINY)


def kkt_gap(X, y, w, sample_weight=None) -> float:
    """Relative violation of the simplex KKT conditions at w.

    At an optimum, every donor holding weight has the minimal gradient
    component; this returns the largest active-donor excess over that
    minimum, normalized by the gradient's natural scale. Small values
    certify optimality.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    omega = (
        np.ones(X.shape[0])
        if sample_weight is None
        else np.asarray(sample_weight, dtype=np.float64)
    )
    Xw = X * omega[:, None]
    A = Xw.T @ X
    b = Xw.T @ y
    g = 2.0 * (A @ w - b)
    active = w > 0
    if not active.any():
        return math.inf
    excess = float(g[active].max() - g.min())
    return excess / _gradient_scale(A, b, w)


def _objective_factory(X: np.ndarray, y: np.ndarray, omega: np.ndarray):
    def objective(w: np.ndarray) -> float:
        r = y - X @ w
        return float(omega @ (r * r))

    return objective


def _refine_face(A, b, objective, w, f):
    """Exact active-set refinement of the QP over the simplex.

    Repeatedly solves the equality-constrained problem on the current
    support (least-squares solve, so rank-deficient faces are handled
    deterministically), takes ratio-test steps when the face optimum
    leaves the feasible region, and grows the support while an inactive
    donor's gradient lies below the face multiplier. Only objective
    improvements are accepted, so the refinement is monotone and finite.
    """
    n = b.size
    support = w > 0
    for _ in range(4 * n + 16):
        idx = np.flatnonzero(support)
        k = idx.size
        # KKT system on the face: 2*A_SS w_S + lam * 1 = 2*b_S, sum(w_S) = 1
        M = np.zeros((k + 1, k + 1))
        M[:k, :k] = 2.0 * A[np.ix_(idx, idx)]
        M[:k, k] = 1.0
        M[k, :k] = 1.0
        rhs = np.concatenate([2.0 * b[idx], [1.0]])
        solution = np.linalg.lstsq(M, rhs, rcond=None)[0]
        v = np.zeros(n)
        v[idx] = solution[:k]

        if v[idx].min() < -1e-12:
            # walk toward the face optimum until the first weight hits zero
            d = v - w
            shrinking = idx[d[idx] < 0]
            ratios = w[shrinking] / -d[shrinking]
            t = float(ratios.min())
            if t >= 1.0:
                t = 1.0
            candidate = w + t * d
            candidate[shrinking[ratios == ratios.min()]] = 0.0
            candidate = np.maximum(candidate, 0.0)
            f_candidate = objective(candidate)
            if f_candidate > f:
                break
            w, f = candidate, f_candidate
            support = w > 0
            continue

        candidate = np.maximum(v, 0.0)
        total = candidate.sum()
        if total <= 0.0:
            break
        candidate /= total
        f_candidate = objective(candidate)
        if f_candidate <= f:
            w, f = candidate, f_candidate
            support = w > 0
        # grow the support if some inactive donor can lower the objective
        g = 2.0 * (A @ w - b)
        inactive = ~support
        if not inactive.any():
            break
        j = int(np.flatnonzero(inactive)[np.argmin(g[inactive])])
        lam = -float(solution[k])
        if g[j] >= lam - 1e-13 * _gradient_scale(A, b, w):
            break
        support[j] = True
    return w, f


def _solve_simplex_qp(A, b, objective, tol, max_iter):
    """Projected-gradient descent with periodic exact face refinement.

    Returns (weights, objective value, iterations, converged, path).
    The per-iteration objective path is non-increasing by construction.
    """
    n = b.size
    w = np.full(n, 1.0 / n)
    f = objective(w)
    path = [f]
    lam_max = float(np.linalg.eigvalsh(A)[-1])
    if lam_max <= 0.0:
        # zero quadratic: the objective is constant over the simplex
        return w, f, 0, True, path
    step = 1.0 / (2.0 * lam_max)

    iterations = 0
    converged = False
    while iterations < max_iter:
        iterations += 1
        f_before = f
        g = 2.0 * (A @ w - b)
        candidate = project_to_simplex(w - step * g)
        f_candidate = objective(candidate)
        if f_candidate <= f:
            w, f = candidate, f_candidate
        stalled = (f_before - f) <= tol * max(f_before, _TINY)
        if stalled or iterations % _REFINE_EVERY == 0:
            w, f = _refine_face(A, b, objective, w, f)
        path.append(f)
        if (f_before - f) <= tol * max(f_before, _TINY):
            converged = True
            break
    return w, f, iterations, converged, path


class SyntheticControl(RegressorMixin, BaseEstimator):
    """Convex donor-weight counterfactual estimator.

    Parameters
    ----------
    decay : float, default 0.005
        Per-period exponential decay rate for the loss weights; 0 gives
        the classic unweighted fit. Ignored when fit() receives an
        explicit sample_weight.
    tol : float, default 1e-12
        Convergence threshold on the relative objective decrease across
        one iteration.
    max_iter : int, default 100_000
        Iteration cap; hitting it flags converged_ = False but still
        returns the best weights found.

    Attributes (after fit)
    ----------------------
    weights_ : ndarray of shape (n_donors,)
        Simplex weights: non-negative, summing to exactly 1.0.
    objective_ : float
        Final weighted sum of squared pre-period errors, original units.
    objective_path_ : ndarray
        Per-iteration objective values (non-increasing), original units.
    n_iter_ : int
    converged_ : bool
    sample_weight_ : ndarray
        The per-period loss weights actually used.
    """

    def __init__(
        self,
        decay: float = DEFAULT_DECAY,
        tol: float = DEFAULT_TOL,
        max_iter: int = DEFAULT_MAX_ITER,
    ) -> None:
        self.decay = decay
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y, sample_weight=None):
        X, y = check_X_y(X, y, dtype=np.float64, y_numeric=True)
        n_periods, n_donors = X.shape
        if not (math.isfinite(self.decay) and self.decay >= 0.0):
            raise ParameterError(f"decay must be finite and >= 0, got {self.decay}")
        if not (math.isfinite(self.tol) and self.tol >= 0.0):
            raise ParameterError(f"tol must be finite and >= 0, got {self.tol}")
        if self.max_iter < 1:
            raise ParameterError(f"max_iter must be >= 1, got {self.max_iter}")
        if sample_weight is None:
            offsets = np.arange(-(n_periods - 1), 1)
            omega = time_weights(offsets, self.decay).omega
        else:
            omega = np.asarray(sample_weight, dtype=np.float64)
            if omega.shape != (n_periods,):
                raise ParameterError(
                    f"sample_weight length {omega.size} != {n_periods} periods"
                )
            if not np.isfinite(omega).all() or (omega < 0).any() or omega.sum() <= 0:
                raise ParameterError("sample_weight must be non-negative, finite, "
                                     "and not all zero")

        # scale to O(1) so the quadratic is well conditioned at price levels;
        # fall back to the magnitude when the mean level is degenerate
        scale = abs(float(y.mean()))
        magnitude = max(1.0, float(np.abs(y).max()))
        if not math.isfinite(scale) or scale < 1e-9 * magnitude:
            scale = magnitude
        Xs = X / scale
        ys = y / scale
        weighted = Xs * omega[:, None]
        A = weighted.T @ Xs
        b = weighted.T @ ys
        objective = _objective_factory(Xs, ys, omega)

        w, _, iterations, converged, path = _solve_simplex_qp(
            A, b, objective, self.tol, self.max_iter
        )
        w = _exact_simplex(w)

        residual = y - X @ w
        self.weights_ = w
        self.objective_ = float(omega @ (residual * residual))
        self.objective_path_ = np.asarray(path) * scale * scale
        self.n_iter_ = iterations
        self.converged_ = converged
        self.sample_weight_ = omega
        self.n_features_in_ = n_donors
        return self

    def predict(self, X):
        """Synthetic series X @ weights_ for donor matrix X."""
        check_is_fitted(self, "weights_")
        X = check_array(X, dtype=np.float64)
        return X @ self.weights_


@dataclass(frozen=True)
class FitResult:
    """Fitted donor weights and pre-window diagnostics for a study."""

    weights: np.ndarray
    donor_labels: tuple[str, ...]
    synthetic_pre: np.ndarray
    objective: float
    iterations: int
    converged: bool


def fit_study(
    study: StudyData,
    tw: TimeWeights,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> FitResult:
    """Fit the donor weights for a study under the given time weights."""
    if tw.omega.shape != (len(study.periods_pre),):
        raise ParameterError(
            f"time weights cover {tw.omega.size} periods; "
            f"study pre window has {len(study.periods_pre)}"
        )
    estimator = SyntheticControl(decay=tw.alpha, tol=tol, max_iter=max_iter)
    estimator.fit(study.donors_pre.T, study.treated_pre, sample_weight=tw.omega)
    return FitResult(
        weights=estimator.weights_,
        donor_labels=study.donor_labels,
        synthetic_pre=study.donors_pre.T @ estimator.weights_,
        objective=estimator.objective_,
        iterations=estimator.n_iter_,
        converged=estimator.converged_,
    )
