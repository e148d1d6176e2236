"""Sweep the poles of a kernel sum along a path out of the window.

Stage m replaces the current sum by one whose poles sit near waypoint z(m),
re-solving a collocation anchored on the caller's observation set with the
stage tolerance delta / 2^m, so the total change telescopes below delta.
Candidate poles are emitted from a ladder of earlier times: a source far
away but proportionally earlier produces the same wide Gaussian profile on
the window, which is what keeps the coefficients (and hence the field away
from the window) tame as the poles recede.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from caloric.kernels import KernelSum
from caloric.runge.collocation import design_matrix
from caloric.runge.report import ApproxReport


class SweepError(RuntimeError):
    pass


class SweepStageError(SweepError):
    def __init__(self, stage, achieved, tolerance, ledger):
        self.stage = stage
        self.achieved = achieved
        self.tolerance = tolerance
        self.ledger = ledger
        super().__init__(
            f"sweep stage {stage} achieved {achieved:.3e} "
            f"but needed {tolerance:.3e}")


@dataclass
class SweepPath:
    """Waypoints z(0..M) with pole neighborhoods K_m and bridge balls W_m.

    z(0) marks the cluster being swept.  Neighborhood radii default to half
    the local waypoint spacing.  time_slab bounds the emission times of
    candidate poles; if None it is derived per stage (a ladder reaching
    further into the past as the waypoints recede).
    """

    waypoints: np.ndarray
    time_slab: tuple | None = None
    radii: np.ndarray | None = None
    bridge_margin: float = 0.25

    def __post_init__(self):
        self.waypoints = np.atleast_2d(np.asarray(self.waypoints, dtype=float))
        if self.time_slab is not None:
            t0, t1 = self.time_slab
            if not t0 <= t1:
                raise ValueError("sweep time slab needs t0 <= t1")
        if self.radii is None:
            gaps = np.linalg.norm(np.diff(self.waypoints, axis=0), axis=-1)
            if gaps.size:
                r = 0.5 * np.concatenate([[gaps[0]], gaps])
            else:
                r = np.asarray([1.0])
            self.radii = r
        else:
            self.radii = np.asarray(self.radii, dtype=float)
        if self.radii.shape[0] != self.waypoints.shape[0]:
            raise ValueError("need one neighborhood radius per waypoint")

    @property
    def n_stages(self):
        return self.waypoints.shape[0] - 1

    def bridge(self, m):
        """Center and radius of W_m, containing K_{m-1} and K_m."""
        a, b = self.waypoints[m - 1], self.waypoints[m]
        ra, rb = self.radii[m - 1], self.radii[m]
        center = 0.5 * (a + b)
        radius = 0.5 * np.linalg.norm(b - a) + max(ra, rb) + self.bridge_margin
        return center, radius

    @classmethod
    def radial_escape(cls, start, origin, escape_radius, time_slab=None,
                      growth=1.8, max_stages=12):
        """Waypoints marching radially away from origin past escape_radius."""
        start = np.asarray(start, dtype=float)
        origin = np.asarray(origin, dtype=float)
        d = start - origin
        dist = np.linalg.norm(d)
        direction = d / dist if dist > 1e-9 else np.eye(start.size)[0]
        pts = [start]
        rho = max(dist, 1.0)
        for _ in range(max_stages):
            if np.linalg.norm(pts[-1] - origin) >= escape_radius:
                break
            rho *= growth
            pts.append(origin + direction * rho)
        return cls(np.asarray(pts), time_slab)


@dataclass
class SweepConfig:
    pool_points: int = 80          # spatial candidates per stage
    pool_depths: int = 13          # emission-time ladder size
    target_cap: int = 2600         # observation rows used as stage targets
    ridge_ladder: tuple = (1e-6, 1e-7, 1e-8, 1e-9)
    enlarge: float = 1.6
    retries: int = 3
    depth_min: float = 0.3


def spatial_rings(center, radius, count, dim):
    """Deterministic points filling a ball: center plus concentric rings."""
    center = np.asarray(center, dtype=float)
    pts = [center[None, :]]
    total = 1
    n_rings = max(1, int(np.ceil(np.sqrt(count))))
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
        total += m
        if total >= count:
            break
    return np.vstack(pts)[:count]


def equilibrated_ridge(A, values, lam_rel, weights=None):
    """Column-equilibrated ridge least squares; lam_rel scales with |v|."""
    if weights is not None:
        A = A * weights[:, None]
        values = values * weights
    norms = np.linalg.norm(A, axis=0)
    norms_safe = np.where(norms > 0, norms, 1.0)
    An = A / norms_safe
    lam = lam_rel * max(float(np.linalg.norm(values)), 1e-300)
    aug = np.vstack([An, lam * np.eye(A.shape[1])])
    rhs = np.concatenate([values, np.zeros(A.shape[1])])
    coef, *_ = linalg.lstsq(aug, rhs, lapack_driver="gelsd")
    coef = coef / norms_safe
    coef[norms == 0] = 0.0
    return coef


def _stage_pool(waypoint, radius, obs, cfg, n_space, n_depth):
    """Candidate poles: rings around the waypoint x emission-time ladder."""
    dim = waypoint.size
    t_min = float(obs[:, -1].min())
    t_span = float(obs[:, -1].max() - t_min) + 1e-9
    obs_center = obs[:, :-1].mean(axis=0)
    reach = float(np.linalg.norm(waypoint - obs_center))
    obs_radius = float(np.max(np.linalg.norm(obs[:, :-1] - obs_center, axis=-1)))
    d_max = max(2.0 * reach, 4.0 * obs_radius, 4.0 * t_span)
    depths = np.geomspace(cfg.depth_min, d_max, n_depth)
    s_ref = t_min - 0.05 * t_span
    space = spatial_rings(waypoint, radius, n_space, dim)
    return np.concatenate([
        np.column_stack([space, np.full(space.shape[0], s_ref - d)])
        for d in depths
    ])


def _subsample(points, cap):
    # deterministic random subset; plain striding under-covers the time axis
    if points.shape[0] <= cap:
        return points
    rng = np.random.default_rng(1234)
    idx = rng.choice(points.shape[0], size=cap, replace=False)
    return points[np.sort(idx)]


def sweep_to_infinity(ks, path, obs_points, delta, cfg=None):
    """Move the sum's poles along the path, telescoping error under delta.

    obs_points is the validation event set the caller cares about; the
    ledger entry for stage m is the measured sup change of the field there,
    required below delta / 2^m.  A stage that cannot reach tolerance after
    pool enlargement raises SweepStageError with the partial ledger.
    """
    cfg = cfg or SweepConfig()
    obs = np.asarray(obs_points, dtype=float).reshape(-1, ks.params.n + 1)
    report = ApproxReport()

    if path.n_stages == 0:
        report.notes["unchanged"] = True
        report.pole_count = ks.n_poles
        return ks, report

    if path.time_slab is not None and ks.n_poles:
        t0, t1 = path.time_slab
        s = ks.poles[:, -1]
        if np.any(s < t0 - 1e-9) or np.any(s > t1 + 1e-9):
            report.flags.append("initial_poles_outside_slab")

    targets = _subsample(obs, cfg.target_cap)
    base_vals = ks.eval(obs)
    current = ks
    cur_obs = base_vals
    for m in range(1, path.n_stages + 1):
        tol_m = delta / 2.0**m
        tvals = current.eval(targets)
        n_space = cfg.pool_points
        n_depth = cfg.pool_depths
        best = None
        achieved = np.inf
        for attempt in range(cfg.retries):
            pool = _stage_pool(path.waypoints[m], path.radii[m], obs, cfg,
                               n_space, n_depth)
            if path.time_slab is not None:
                t0, t1 = path.time_slab
                pool[:, -1] = np.clip(pool[:, -1], t0, t1)
            A = design_matrix(targets, pool, ks.params)
            for lam in cfg.ridge_ladder:
                coef = equilibrated_ridge(A, tvals, lam)
                cand = KernelSum(pool, coef, ks.params)
                cand_obs = cand.eval(obs)
                err = float(np.max(np.abs(cand_obs - cur_obs), initial=0.0))
                if err < tol_m and (best is None or err < achieved):
                    best = (cand, cand_obs, lam)
                    achieved = err
                    break
                achieved = min(achieved, err)
            if best is not None:
                break
            n_space = int(n_space * cfg.enlarge)
            n_depth = int(n_depth * 1.3) + 1
        if best is None:
            report.add_stage(f"stage_{m}", achieved, tolerance=tol_m,
                             waypoint=path.waypoints[m].tolist())
            raise SweepStageError(m, achieved, tol_m, report)
        cand, cand_obs, lam = best
        report.add_stage(f"stage_{m}", achieved, tolerance=tol_m,
                         waypoint=path.waypoints[m].tolist(),
                         poles=cand.n_poles, ridge=lam)
        current, cur_obs = cand, cand_obs

    report.sup_error = float(np.max(np.abs(cur_obs - base_vals), initial=0.0))
    report.pole_count = current.n_poles
    report.notes["telescoped_bound"] = report.ledger_total()
    return current, report
