"""Heat kernel, its derivatives, and finite pole sums.

The fundamental solution used throughout is

    K(x, t) = c_n t^{-n/2} exp(-|x|^2 / 4t) * exp(c0 t)   for t > 0,
    K(x, t) = 0                                           for t <= 0,

where c_n normalizes the spatial integral to one and c0 <= 0 is a constant
zeroth-order coefficient folded in through the gauge factor exp(c0 t).  A
KernelSum is the universal global approximant: a finite combination
sum_j c_j K(x - y_j, t - s_j) with poles (y_j, s_j).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad


class KernelDomainError(ValueError):
    """Evaluation request at the kernel singularity or unsupported order."""


class PoleCollisionError(ValueError):
    """An evaluation point coincides with a pole of the sum."""

    def __init__(self, pairs):
        self.pairs = pairs
        super().__init__(f"evaluation points coincide with poles: {pairs}")


@lru_cache(maxsize=None)
def _gauss_mass_1d():
    # one-off numerical normalization; no closed form is assumed
    val, _ = quad(lambda s: math.exp(-0.25 * s * s), -np.inf, np.inf)
    return val


@lru_cache(maxsize=None)
def unit_mass_constant(n):
    """c_n such that the kernel has unit spatial integral (computed once)."""
    return _gauss_mass_1d() ** (-n)


@dataclass(frozen=True)
class HeatKernelParams:
    n: int = 2
    c0: float = 0.0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("spatial dimension must be at least 2")
        if self.c0 > 0:
            raise ValueError("zeroth-order coefficient must satisfy c0 <= 0")

    @property
    def cn(self):
        return unit_mass_constant(self.n)


def heat_kernel(x, t, params):
    """Kernel value at displacement x, elapsed time t (vectorized).

    Returns 0 for t <= 0.  Raises at the spacetime origin, where the kernel
    is singular.
    """
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    if x.shape[-1] != params.n:
        raise KernelDomainError(f"expected {params.n}-vectors, got {x.shape}")
    r2 = np.sum(x * x, axis=-1)
    t_b = np.broadcast_to(t, r2.shape)
    at_origin = (r2 == 0.0) & (t_b == 0.0)
    if np.any(at_origin):
        raise KernelDomainError("kernel evaluated at its singular point (0, 0)")
    out = np.zeros(r2.shape, dtype=float)
    pos = t_b > 0
    if np.any(pos):
        tp = t_b[pos]
        out[pos] = (params.cn * tp ** (-params.n / 2.0)
                    * np.exp(-0.25 * r2[pos] / tp + params.c0 * tp))
    return out


def _hermite_factor(xi, t, m):
    # m-th xi-derivative of exp(-xi^2/4t) equals exp(.) * h_m(xi, t)
    if m == 0:
        return np.ones_like(xi)
    inv_t = 1.0 / t
    if m == 1:
        return -0.5 * xi * inv_t
    if m == 2:
        return 0.25 * xi**2 * inv_t**2 - 0.5 * inv_t
    if m == 3:
        return -0.125 * xi**3 * inv_t**3 + 0.75 * xi * inv_t**2
    if m == 4:
        return (0.0625 * xi**4 * inv_t**4 - 0.75 * xi**2 * inv_t**3
                + 0.75 * inv_t**2)
    raise KernelDomainError(f"spatial derivative order {m} not supported")


def _spatial_derivative_gaugefree(x, t, alpha, params):
    # D^alpha of c_n t^{-n/2} exp(-|x|^2/4t); factorizes across coordinates
    r2 = np.sum(x * x, axis=-1)
    base = params.cn * t ** (-params.n / 2.0) * np.exp(-0.25 * r2 / t)
    fac = np.ones_like(base)
    for i, m in enumerate(alpha):
        if m:
            fac = fac * _hermite_factor(x[..., i], t, m)
    return base * fac


def heat_kernel_derivs(x, t, params, alpha=(), k=0):
    """Closed-form derivative D_x^alpha d_t^k of the kernel.

    Supported up to total parabolic order |alpha| + 2k <= 4.  Time
    derivatives are reduced to spatial ones through d_t = Laplacian + c0 on
    the gauge-free kernel, so everything rests on the Hermite factors above.
    """
    alpha = tuple(int(a) for a in alpha) if alpha else (0,) * params.n
    if len(alpha) != params.n:
        raise KernelDomainError("multi-index length must equal the dimension")
    if any(a < 0 for a in alpha) or k < 0:
        raise KernelDomainError("derivative orders must be nonnegative")
    if sum(alpha) + 2 * k > 4:
        raise KernelDomainError("total parabolic order capped at 4")

    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    r2 = np.sum(x * x, axis=-1)
    t_b = np.broadcast_to(t, r2.shape).astype(float)
    if np.any(t_b == 0.0):
        raise KernelDomainError("derivatives undefined on the t = 0 slice")
    out = np.zeros(r2.shape, dtype=float)
    pos = t_b > 0
    if not np.any(pos):
        return out

    xb = np.broadcast_to(x, r2.shape + (params.n,))
    xp = xb[pos]
    tp = t_b[pos]

    def laplacian_indices(base, j):
        if j == 0:
            return [base]
        out_idx = []
        for prev in laplacian_indices(base, j - 1):
            for i in range(params.n):
                bumped = list(prev)
                bumped[i] += 2
                out_idx.append(tuple(bumped))
        return out_idx

    acc = np.zeros(tp.shape, dtype=float)
    for j in range(k + 1):
        coeff = math.comb(k, j) * params.c0 ** (k - j)
        if coeff == 0.0 and (k - j) > 0:
            continue
        for idx in laplacian_indices(alpha, j):
            acc += coeff * _spatial_derivative_gaugefree(xp, tp, idx, params)
    out[pos] = acc * np.exp(params.c0 * tp)
    return out


# ---------------------------------------------------------------------------
# kernel sums


class KernelSum:
    """Finite combination of translated kernels; the global approximant.

    poles has shape (J, n+1) with rows (y_1..y_n, s); coeffs has shape (J,).
    Causality is automatic: a pole contributes nothing at times t <= s.
    """

    def __init__(self, poles, coeffs, params):
        poles = np.asarray(poles, dtype=float).reshape(-1, params.n + 1)
        coeffs = np.asarray(coeffs, dtype=float).reshape(-1)
        if poles.shape[0] != coeffs.shape[0]:
            raise ValueError("pole and coefficient counts differ")
        self.poles = poles
        self.coeffs = coeffs
        self.params = params

    @classmethod
    def empty(cls, params):
        return cls(np.zeros((0, params.n + 1)), np.zeros(0), params)

    @property
    def n_poles(self):
        return self.poles.shape[0]

    def __add__(self, other):
        if other is None:
            return self
        if not isinstance(other, KernelSum) or other.params != self.params:
            raise ValueError("can only add kernel sums with matching params")
        return KernelSum(np.vstack([self.poles, other.poles]),
                         np.concatenate([self.coeffs, other.coeffs]),
                         self.params)

    def scaled(self, factor):
        return KernelSum(self.poles.copy(), self.coeffs * factor, self.params)

    def _check_collisions(self, pts):
        if self.n_poles == 0 or pts.shape[0] == 0:
            return
        # exact coincidence only; near misses are legitimate large values
        pairs = []
        for j, pole in enumerate(self.poles):
            same = np.all(pts == pole, axis=-1)
            if np.any(same):
                for i in np.nonzero(same)[0][:4]:
                    pairs.append((int(i), int(j)))
        if pairs:
            raise PoleCollisionError(pairs)

    def eval(self, points, chunk=2_000_000):
        """Values at events of shape (..., n+1); fixed summation order."""
        pts = np.asarray(points, dtype=float)
        squeeze = pts.ndim == 1
        pts = pts.reshape(-1, self.params.n + 1)
        self._check_collisions(pts)
        out = np.zeros(pts.shape[0])
        if self.n_poles:
            block = max(1, int(chunk // max(self.n_poles, 1)))
            for start in range(0, pts.shape[0], block):
                sl = slice(start, start + block)
                p = pts[sl]
                dx = p[:, None, :-1] - self.poles[None, :, :-1]
                dt = p[:, None, -1] - self.poles[None, :, -1]
                vals = heat_kernel(dx, dt, self.params)
                out[sl] = vals @ self.coeffs
        return out[0] if squeeze and out.size == 1 else out

    __call__ = eval

    def eval_xt(self, x, t):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        t = np.broadcast_to(np.asarray(t, dtype=float), x.shape[:-1])
        pts = np.concatenate([x, t[..., None]], axis=-1)
        return self.eval(pts)

    def deriv(self, points, alpha=(), k=0):
        pts = np.asarray(points, dtype=float).reshape(-1, self.params.n + 1)
        self._check_collisions(pts)
        out = np.zeros(pts.shape[0])
        for pole, c in zip(self.poles, self.coeffs):
            dx = pts[:, :-1] - pole[:-1]
            dt = pts[:, -1] - pole[-1]
            live = dt != 0.0
            if np.any(live):
                out[live] += c * heat_kernel_derivs(dx[live], dt[live],
                                                    self.params, alpha, k)
        return out

    def to_json(self):
        return {
            "dimension": self.params.n,
            "c0": self.params.c0,
            "poles": [list(map(float, row)) for row in self.poles],
            "coeffs": [float(c) for c in self.coeffs],
        }

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, doc):
        params = HeatKernelParams(n=int(doc["dimension"]), c0=float(doc["c0"]))
        poles = np.asarray(doc["poles"], dtype=float).reshape(-1, params.n + 1)
        return cls(poles, np.asarray(doc["coeffs"], dtype=float), params)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def single_pole(pole, coeff, params):
    pole = np.asarray(pole, dtype=float)
    return KernelSum(pole[None, :], np.asarray([coeff], dtype=float), params)


def eval_kernel_sum(ks, points):
    """Functional form of KernelSum.eval (kept for symmetry with the API)."""
    return ks.eval(points)


# ---------------------------------------------------------------------------
# diagnostics


@dataclass
class GaussianBoundReport:
    constant: float
    max_ratio: float
    holds: bool
    witness_point: np.ndarray | None
    witness_pole: int | None


def verify_gaussian_bound(ks, samples, constant):
    """Check |K| <= C |t-s|^{-n/2} exp(-|x-y|^2 / (C |t-s|)) per pole.

    The ratio |K| * |t-s|^{n/2} * exp(|x-y|^2/(C|t-s|)) is computed in log
    space to avoid overflow; causal zeros contribute ratio 0.
    """
    if isinstance(ks, np.ndarray):
        raise TypeError("pass a KernelSum (wrap a bare kernel as one pole)")
    pts = np.asarray(samples, dtype=float).reshape(-1, ks.params.n + 1)
    n = ks.params.n
    best = -np.inf
    witness = None
    wpole = None
    log_cn = math.log(ks.params.cn)
    for j, pole in enumerate(ks.poles):
        dx = pts[:, :-1] - pole[:-1]
        dt = pts[:, -1] - pole[-1]
        live = dt > 0
        if not np.any(live):
            continue
        r2 = np.sum(dx[live] ** 2, axis=-1)
        # log ratio = log c_n + r2 (1/C - 1/4)/dt + c0 dt
        logr = (log_cn + r2 * (1.0 / constant - 0.25) / dt[live]
                + ks.params.c0 * dt[live])
        i = int(np.argmax(logr))
        if logr[i] > best:
            best = float(logr[i])
            witness = pts[live][i]
            wpole = j
    if best == -np.inf:
        return GaussianBoundReport(constant, 0.0, True, None, None)
    ratio = math.exp(min(best, 700.0))
    return GaussianBoundReport(constant, ratio, ratio <= constant,
                               witness, wpole)


def heat_residual(fn, points, h, params):
    """Central-difference residual of d_t u - Lap u - c0 u at given events.

    fn maps an (..., n+1) array of events to values; second-order accurate in
    h, which is the whole point: halving h must cut the residual of a true
    solution by about four.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, params.n + 1)
    n = params.n

    def shift(axis, delta):
        out = pts.copy()
        out[:, axis] += delta
        return out

    u0 = fn(pts)
    res = (fn(shift(n, h)) - fn(shift(n, -h))) / (2 * h)
    for i in range(n):
        res -= (fn(shift(i, h)) - 2 * u0 + fn(shift(i, -h))) / h**2
    res -= params.c0 * u0
    return res
