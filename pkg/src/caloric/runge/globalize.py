"""Approximate a local caloric function by a globally defined pole sum.

Chain: extend the target v by a smooth cutoff chi to all of spacetime,
compute the source density phi = (d_t - Lap - c0)(chi v) on the collar
where the cutoff varies (v itself is caloric, so the source concentrates
there), discretize the kernel-source convolution into one pole per collar
cell, and finally sweep the collar poles -- cluster by angular sector --
out of the caller's window or into a prescribed far set.  The result is a
kernel sum, caloric wherever its poles are not, whose sup distance to v on
the validation grid is measured directly and ledgered stage by stage.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from caloric.fields import GridField
from caloric.geometry import SpacetimeRegion, region_slices_admissible
from caloric.kernels import KernelSum, heat_residual
from caloric.runge.convolution import discretize_convolution
from caloric.runge.report import ApproxReport
from caloric.runge.sweep import (SweepConfig, SweepPath, sweep_to_infinity,
                                 equilibrated_ridge)


class GlobalizeError(RuntimeError):
    pass


class TopologyError(GlobalizeError):
    """A time slice of the complement has a trapped bounded component."""


class NotCaloricError(GlobalizeError):
    """The input field does not satisfy the equation on the region."""


@dataclass
class FarSet:
    """Annular slab where final poles may live: r_lo <= |y - center| <= r_hi,
    emission times in [t_lo, t_hi]."""

    r_lo: float
    r_hi: float
    t_lo: float
    t_hi: float
    center: np.ndarray | None = None

    def contains_poles(self, poles, center_default):
        c = self.center if self.center is not None else center_default
        rr = np.linalg.norm(poles[:, :-1] - c, axis=-1)
        ss = poles[:, -1]
        return (np.all(rr >= self.r_lo - 1e-9) and np.all(rr <= self.r_hi + 1e-9)
                and np.all(ss >= self.t_lo - 1e-9) and np.all(ss <= self.t_hi + 1e-9))


@dataclass
class GlobalizeConfig:
    inner_margin: float = 0.22
    outer_margin: float = 0.5
    collar_h: float = 0.07          # collar lattice step (space and time)
    fd_step: float = 0.02           # finite-difference step for the source
    conv_delta_frac: float = 0.35   # budget share for the discretization
    conv_cell_budget: int = 60_000
    n_clusters: int = 6
    escape_factor: float = 4.0      # escape radius = factor * window diameter
    sweep_growth: float = 2.1
    sweep: SweepConfig = field(default_factory=SweepConfig)
    validation_shape: tuple = (33, 33)
    validation_nt: int = 17
    topology_times: int = 5
    topology_grid_h: float | None = None
    residual_tol: float = 1e-4
    refine_rounds: int = 2
    strict: bool = True


def _as_callable(v, params):
    if isinstance(v, KernelSum):
        return v.eval
    return v


def validation_events(region, cfg):
    """Lattice over the region's bounding box, masked to the region."""
    pts, mask = region.validation_grid(cfg.validation_shape, cfg.validation_nt,
                                       shrink=0.0)
    return pts[mask]


def _check_topology(region, cfg):
    t0, t1 = region.time_interval
    times = np.linspace(t0 + 1e-3 * (t1 - t0), t1 - 1e-3 * (t1 - t0),
                        cfg.topology_times)
    reports = region_slices_admissible(region, times, grid_h=cfg.topology_grid_h)
    for t, rep in zip(times, reports):
        if not rep.unbounded_only:
            raise TopologyError(
                f"complement of the t={t:.4g} slice has a trapped component "
                f"({rep.n_components} components at grid step {rep.grid_h:.3g})")


def _check_caloric(v_fn, region, params, cfg, rng):
    pts, mask = region.validation_grid((9,) * region.dim, 7, shrink=0.0)
    inner = pts[mask]
    if inner.shape[0] == 0:
        return
    take = inner[:: max(1, inner.shape[0] // 60)]
    res = heat_residual(v_fn, take, 2e-3, params)
    scale = max(float(np.max(np.abs(v_fn(take)))), 1.0)
    worst = float(np.max(np.abs(res)))
    if worst > cfg.residual_tol * scale * 50:
        raise NotCaloricError(
            f"input field has equation residual {worst:.3e} "
            f"(scale {scale:.3g}); it must solve the equation near the region")


def _collar_source(v_fn, region, params, cfg):
    """Source density phi = (d_t - Lap - c0)(chi v) sampled on a lattice."""
    chi = region.cutoff_profile(cfg.inner_margin, cfg.outer_margin)

    def extended(pts):
        x, t = pts[..., :-1], pts[..., -1]
        return chi(x, t) * np.asarray(v_fn(pts))

    grown = region.grow(cfg.outer_margin * 1.05, cfg.outer_margin * 1.05)
    lo, hi, t0, t1 = grown.bbox()
    h = cfg.collar_h
    shape = tuple(max(8, int(np.ceil((hi[i] - lo[i]) / h)) + 1)
                  for i in range(region.dim))
    nt = max(8, int(np.ceil((t1 - t0) / h)) + 1)

    fd = cfg.fd_step
    n = region.dim

    def phi(pts):
        out = (extended(_shift(pts, n, fd)) - extended(_shift(pts, n, -fd))) / (2 * fd)
        base = extended(pts)
        for i in range(n):
            out -= (extended(_shift(pts, i, fd)) - 2 * base
                    + extended(_shift(pts, i, -fd))) / fd**2
        out -= params.c0 * base
        return out

    src = GridField.from_callable(phi, lo, hi, shape, t0, t1, nt,
                                  meta="cutoff source density")
    return src, chi


def _shift(pts, axis, delta):
    out = np.array(pts, copy=True)
    out[:, axis] += delta
    return out


def _cluster_indices(poles, center, n_clusters, dim):
    """Deterministic angular-sector partition of the collar poles."""
    rel = poles[:, :-1] - center
    if dim == 2:
        ang = np.arctan2(rel[:, 1], rel[:, 0])
        bins = np.floor((ang + np.pi) / (2 * np.pi) * n_clusters).astype(int)
        bins = np.clip(bins, 0, n_clusters - 1)
    else:
        ang = np.arctan2(rel[:, 1], rel[:, 0])
        k_phi = max(2, n_clusters // 2)
        b_phi = np.clip(np.floor((ang + np.pi) / (2 * np.pi) * k_phi).astype(int),
                        0, k_phi - 1)
        b_z = (rel[:, 2] > 0).astype(int)
        bins = b_phi * 2 + b_z
    return [np.nonzero(bins == c)[0] for c in np.unique(bins)]


def _cluster_path(cluster_poles, center, escape_radius, far_set, cfg):
    centroid = cluster_poles[:, :-1].mean(axis=0)
    d = centroid - center
    dist = np.linalg.norm(d)
    direction = d / dist if dist > 1e-9 else np.eye(center.size)[0]
    if far_set is not None:
        target_r = 0.5 * (far_set.r_lo + far_set.r_hi)
        ring_width = 0.5 * (far_set.r_hi - far_set.r_lo)
        pts = [centroid]
        rho = max(dist, 0.5)
        while rho < target_r / cfg.sweep_growth:
            rho *= cfg.sweep_growth
            pts.append(center + direction * rho)
        pts.append(center + direction * target_r)
        radii = None
        path = SweepPath(np.asarray(pts))
        path.radii[-1] = min(path.radii[-1], max(ring_width * 0.95, 1e-3))
        return path
    return SweepPath.radial_escape(centroid, center, escape_radius,
                                   growth=cfg.sweep_growth)


def approximate_global(v, region, delta, params, far_set=None, cfg=None):
    """Global kernel-sum approximation of v on the region, sup error < delta.

    v is a callable on events (or a KernelSum).  far_set, when given,
    prescribes the annular slab that must contain every final pole;
    otherwise poles are pushed beyond escape_factor times the window size.
    Raises TopologyError / NotCaloricError on violated preconditions and
    GlobalizeError when the tolerance cannot be certified.
    """
    cfg = cfg or GlobalizeConfig()
    if delta <= 0:
        raise GlobalizeError("tolerance must be positive")
    v_fn = _as_callable(v, params)

    _check_topology(region, cfg)
    _check_caloric(v_fn, region, params, cfg, None)

    obs = validation_events(region, cfg)
    v_obs = np.asarray(v_fn(obs))
    report = ApproxReport()
    center = region.spatial_center()
    lo, hi, rt0, rt1 = region.bbox()
    window_diam = region.diameter()
    escape_radius = cfg.escape_factor * window_diam

    # shortcut: a kernel sum whose poles already live outside the enlarged
    # region and beyond the escape radius (or inside the far set) is global
    if isinstance(v, KernelSum) and v.n_poles:
        rr = np.linalg.norm(v.poles[:, :-1] - center, axis=-1)
        if far_set is not None:
            ok = far_set.contains_poles(v.poles, center)
        else:
            ok = np.all(rr >= escape_radius - 1e-9)
        grown = region.grow(cfg.outer_margin, cfg.outer_margin)
        outside = ~grown.contains_events(v.poles)
        if ok and np.all(outside):
            report.sup_error = 0.0
            report.pole_count = v.n_poles
            report.notes["shortcut"] = "input already global with far poles"
            return v, report

    delta_conv = delta * cfg.conv_delta_frac
    delta_sweep = delta - delta_conv

    base_cfg_h = cfg.collar_h
    last_err = np.inf
    collar_sum = None
    for round_ in range(cfg.refine_rounds + 1):
        src, chi = _collar_source(v_fn, region, params, cfg)
        ks0, conv_rep = discretize_convolution(src, obs, delta_conv * 0.5,
                                               params,
                                               cell_budget=cfg.conv_cell_budget)
        err0 = float(np.max(np.abs(ks0.eval(obs) - v_obs), initial=0.0))
        if err0 < delta_conv or round_ == cfg.refine_rounds:
            collar_sum = ks0
            report.add_stage("collar_reconstruction", err0,
                             tolerance=delta_conv,
                             collar_h=cfg.collar_h, poles=ks0.n_poles,
                             conv_internal=conv_rep.sup_error)
            last_err = err0
            break
        cfg = _with_finer_collar(cfg)
    if last_err >= delta_conv:
        msg = (f"collar reconstruction reached {last_err:.3e}, "
               f"needed {delta_conv:.3e}")
        if cfg.strict:
            raise GlobalizeError(msg)
        report.flags.append("collar_tolerance_missed")

    # poles at or after the window's last time cannot influence it
    keep = collar_sum.poles[:, -1] < rt1
    dropped = int(np.count_nonzero(~keep))
    if dropped:
        collar_sum = KernelSum(collar_sum.poles[keep],
                               collar_sum.coeffs[keep], params)
        report.notes["acausal_poles_dropped"] = dropped

    clusters = _cluster_indices(collar_sum.poles, center, cfg.n_clusters,
                                region.dim)
    delta_c = delta_sweep / max(len(clusters), 1)
    swept_parts = []
    for ci, idx in enumerate(clusters):
        part = KernelSum(collar_sum.poles[idx], collar_sum.coeffs[idx], params)
        path = _cluster_path(part.poles, center, escape_radius, far_set, cfg)
        if far_set is not None:
            path.time_slab = (far_set.t_lo, far_set.t_hi)
        try:
            swept, srep = sweep_to_infinity(part, path, obs, delta_c,
                                            cfg=cfg.sweep)
        except Exception as exc:
            raise GlobalizeError(f"cluster {ci} sweep failed: {exc}") from exc
        swept_parts.append(swept)
        for s in srep.stages:
            report.add_stage(f"cluster_{ci}_{s.label}", s.error,
                             tolerance=s.tolerance, **s.meta)

    result = swept_parts[0]
    for part in swept_parts[1:]:
        result = result + part

    report.sup_error = float(np.max(np.abs(result.eval(obs) - v_obs),
                                    initial=0.0))
    report.pole_count = result.n_poles
    report.notes["validation_points"] = int(obs.shape[0])
    if report.sup_error >= delta and cfg.strict:
        raise GlobalizeError(
            f"validated error {report.sup_error:.3e} exceeds delta {delta:.3e}")
    if report.sup_error >= delta:
        report.flags.append("tolerance_missed")
    return result, report


def _with_finer_collar(cfg):
    import dataclasses
    return dataclasses.replace(cfg, collar_h=cfg.collar_h / 1.6,
                               fd_step=cfg.fd_step / 1.6,
                               conv_cell_budget=int(cfg.conv_cell_budget * 2.5))
