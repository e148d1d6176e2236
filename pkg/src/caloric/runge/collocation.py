"""Ridge-regularized least squares with greedy pole selection.

Density of kernel sums in the space of local solutions guarantees a good
approximant exists; this module actually finds one.  Columns of the design
matrix are kernels with candidate poles, coefficients come from ridge least
squares on a greedily grown active set (orthogonal matching pursuit: each
step adds the pole that most reduces the residual, ties broken by lowest
pool index for reproducibility).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from caloric.kernels import HeatKernelParams, KernelSum, heat_kernel
from caloric.runge.report import ApproxReport


class CollocationError(ValueError):
    pass


class EmptyPoolError(CollocationError):
    pass


class IllConditionedError(CollocationError):
    def __init__(self, estimate, threshold):
        self.estimate = estimate
        self.threshold = threshold
        super().__init__(
            f"active design matrix condition {estimate:.3e} exceeds "
            f"threshold {threshold:.3e}; refusing the fit")


@dataclass
class CollocationProblem:
    targets: np.ndarray          # (P, n+1) events
    values: np.ndarray           # (P,)
    pole_pool: np.ndarray        # (Q, n+1)
    params: HeatKernelParams
    ridge: float = 0.0
    pole_budget: int = 1
    cond_threshold: float = 1e14
    min_rel_reduction: float = 1e-14

    def __post_init__(self):
        self.targets = np.asarray(self.targets, dtype=float).reshape(-1, self.params.n + 1)
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        self.pole_pool = np.asarray(self.pole_pool, dtype=float).reshape(-1, self.params.n + 1)
        if self.targets.shape[0] != self.values.shape[0]:
            raise CollocationError("one value per target point is required")
        if self.ridge < 0:
            raise CollocationError("ridge weight must be nonnegative")
        if self.pole_budget < 1:
            raise CollocationError("pole budget must be at least one")
        for pole in self.pole_pool:
            if np.any(np.all(self.targets == pole, axis=-1)):
                raise CollocationError("a target point coincides with a pool pole")


def design_matrix(targets, poles, params, chunk=4_000_000):
    """A[i, j] = K(x_i - y_j, t_i - s_j), assembled in blocks."""
    targets = np.asarray(targets, dtype=float)
    poles = np.asarray(poles, dtype=float)
    P, Q = targets.shape[0], poles.shape[0]
    A = np.empty((P, Q))
    block = max(1, chunk // max(Q, 1))
    for start in range(0, P, block):
        sl = slice(start, start + block)
        dx = targets[sl, None, :-1] - poles[None, :, :-1]
        dt = targets[sl, None, -1] - poles[None, :, -1]
        A[sl] = heat_kernel(dx, dt, params)
    return A


def _ridge_solve(A_active, values, ridge):
    """Least squares of [A; sqrt(ridge) I] c ~ [v; 0]; returns c and cond."""
    P, m = A_active.shape
    if ridge > 0:
        aug = np.vstack([A_active, np.sqrt(ridge) * np.eye(m)])
        rhs = np.concatenate([values, np.zeros(m)])
    else:
        aug = A_active
        rhs = values
    sv = linalg.svdvals(aug)
    cond = np.inf if sv[-1] == 0 else float(sv[0] / sv[-1])
    coef, *_ = linalg.lstsq(aug, rhs, lapack_driver="gelsd")
    return coef, cond


def solve_collocation(problem):
    """Greedy kernel-sum fit of the target values.

    Returns (KernelSum, ApproxReport).  The report's sup_error is the worst
    misfit over the target set itself; validation on independent grids is
    the caller's job.
    """
    if problem.pole_pool.shape[0] == 0:
        raise EmptyPoolError("candidate pole pool is empty")

    A = design_matrix(problem.targets, problem.pole_pool, problem.params)
    if not np.all(np.isfinite(A)):
        raise CollocationError("design matrix has non-finite entries")

    values = problem.values
    vnorm2 = float(values @ values)
    col_norms = np.linalg.norm(A, axis=0)
    usable = col_norms > 0

    active: list[int] = []
    coef = np.zeros(0)
    resid = values.copy()
    cond = 1.0

    budget = min(problem.pole_budget, int(np.count_nonzero(usable)))
    while len(active) < budget:
        score = np.abs(A.T @ resid)
        score[~usable] = -np.inf
        score[active] = -np.inf
        with np.errstate(invalid="ignore"):
            score = np.where(usable, score / np.where(usable, col_norms, 1.0), -np.inf)
        j = int(np.argmax(score))     # argmax returns the lowest tied index
        if not np.isfinite(score[j]) or score[j] <= 0:
            break
        trial = active + [j]
        coef_try, cond = _ridge_solve(A[:, trial], values, problem.ridge)
        if cond > problem.cond_threshold:
            raise IllConditionedError(cond, problem.cond_threshold)
        resid_try = values - A[:, trial] @ coef_try
        gain = (float(resid @ resid) - float(resid_try @ resid_try))
        if active and gain <= problem.min_rel_reduction * max(vnorm2, 1e-300):
            break
        active = trial
        coef = coef_try
        resid = resid_try

    if active:
        ks = KernelSum(problem.pole_pool[active], coef, problem.params)
    else:
        ks = KernelSum.empty(problem.params)

    report = ApproxReport(
        sup_error=float(np.max(np.abs(resid), initial=0.0)),
        residual_norm=float(np.linalg.norm(resid)),
        pole_count=len(active),
        notes={"condition": cond, "pool_size": int(problem.pole_pool.shape[0])},
    )
    return ks, report


def move_pole(pole, candidate, obs_points, eps, params):
    """True iff swapping the pole for the candidate moves the field by less
    than eps in sup norm over the observation samples."""
    pole = np.asarray(pole, dtype=float)
    candidate = np.asarray(candidate, dtype=float)
    pts = np.asarray(obs_points, dtype=float).reshape(-1, params.n + 1)
    va = heat_kernel(pts[:, :-1] - pole[:-1], pts[:, -1] - pole[-1], params)
    vb = heat_kernel(pts[:, :-1] - candidate[:-1], pts[:, -1] - candidate[-1], params)
    return bool(np.max(np.abs(va - vb), initial=0.0) < eps)


def pool_in_ball(center, radius, time_slab, n_space, n_time, dim, rng=None):
    """Deterministic candidate poles filling a ball x time slab.

    Concentric rings (2D) or Fibonacci shells (3D) keep layouts reproducible
    without a random generator; rng jitters only if given.
    """
    center = np.asarray(center, dtype=float)
    t0, t1 = time_slab
    pts = [center]
    n_rings = max(1, int(np.ceil(np.sqrt(n_space))))
    for i in range(1, n_rings + 1):
        r = radius * i / n_rings
        m = max(4, int(np.ceil(2 * np.pi * i)))
        ang = np.arange(m) * 2 * np.pi / m + 0.5 * i
        if dim == 2:
            ring = center + r * np.column_stack([np.cos(ang), np.sin(ang)])
        else:
            zs = np.linspace(-1, 1, m)
            phi = np.arange(m) * 2.399963229728653
            rho = np.sqrt(np.maximum(0.0, 1 - zs**2))
            ring = center + r * np.column_stack([rho * np.cos(phi),
                                                 rho * np.sin(phi), zs])
        pts.append(ring)
        if sum(p.shape[0] if p.ndim > 1 else 1 for p in pts) >= n_space:
            break
    space = np.vstack([np.atleast_2d(p) for p in pts])[:n_space]
    if rng is not None:
        space = space + rng.normal(scale=radius * 0.02, size=space.shape)
    times = np.linspace(t0, t1, max(n_time, 1)) if t1 > t0 else np.array([t0])
    out = np.concatenate(
        [np.column_stack([space, np.full(space.shape[0], s)]) for s in times])
    return out
