"""Spacetime sets for heat-flow experiments.

A region lives in R^n x R (space x time) and is a finite union of primitive
sets: balls and boxes crossed with time intervals, and tubes following a
moving curve.  Regions support time slicing, membership tests on point
clouds, smooth cutoff profiles (needed to extend a local solution by a
compactly supported function) and a grid check that the complement of every
time slice has no trapped bounded component -- the topological hypothesis
behind every global approximation run.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import make_interp_spline
from scipy import ndimage


class GeometryError(ValueError):
    """Invalid geometric input (bad interval, curve domain, dimensions)."""


class ResolutionWarning(UserWarning):
    """A connectivity verdict may be unreliable at the chosen grid step."""


def quintic_step(u):
    """C^2 ramp: 1 for u <= 0, 0 for u >= 1, quintic polynomial between."""
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    return 1.0 - u**3 * (10.0 - 15.0 * u + 6.0 * u**2)


# ---------------------------------------------------------------------------
# curves


class SpaceCurve:
    """Spline interpolant of time-stamped points t -> gamma(t) in R^n.

    Sample times must be strictly increasing; evaluation is restricted to
    [t_min, t_max].  Cubic pieces where enough samples exist, so gamma is C^1
    (a merely continuous prescription is always smoothed before use).
    """

    def __init__(self, times, points):
        times = np.asarray(times, dtype=float)
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[0] != times.shape[0]:
            raise GeometryError("curve needs one spatial sample per time")
        if times.ndim != 1 or times.size < 2:
            raise GeometryError("curve needs at least two samples")
        if not np.all(np.diff(times) > 0):
            raise GeometryError("curve sample times must be strictly increasing")
        self.times = times
        self.points = points
        self.dim = points.shape[1]
        k = min(3, times.size - 1)
        self._spline = make_interp_spline(times, points, k=k)
        self._dspline = self._spline.derivative()

    @property
    def domain(self):
        return float(self.times[0]), float(self.times[-1])

    def _check(self, t):
        t = np.asarray(t, dtype=float)
        lo, hi = self.domain
        eps = 1e-12 * max(1.0, abs(lo), abs(hi))
        if np.any(t < lo - eps) or np.any(t > hi + eps):
            raise GeometryError(f"curve evaluated outside domain [{lo}, {hi}]")
        return np.clip(t, lo, hi)

    def __call__(self, t):
        return self._spline(self._check(t))

    def velocity(self, t):
        return self._dspline(self._check(t))

    @classmethod
    def constant(cls, point, t0, t1):
        point = np.asarray(point, dtype=float)
        return cls([t0, t1], np.stack([point, point]))


# ---------------------------------------------------------------------------
# primitives


def _as_interval(t0, t1):
    t0, t1 = float(t0), float(t1)
    if not t0 < t1:
        raise GeometryError(f"time interval needs t0 < t1, got ({t0}, {t1})")
    return t0, t1


@dataclass(frozen=True)
class SpatialBall:
    center: np.ndarray
    radius: float

    def contains(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.linalg.norm(x - self.center, axis=-1) < self.radius


@dataclass(frozen=True)
class SpatialBox:
    lo: np.ndarray
    hi: np.ndarray

    def contains(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.all((x > self.lo) & (x < self.hi), axis=-1)


class BallPrimitive:
    """Ball B(center, radius) x (t0, t1)."""

    def __init__(self, center, radius, t0, t1):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        if self.radius <= 0:
            raise GeometryError("ball radius must be positive")
        self.t0, self.t1 = _as_interval(t0, t1)
        self.dim = self.center.size

    def spatial_center(self, t):
        t = np.asarray(t, dtype=float)
        return np.broadcast_to(self.center, t.shape + (self.dim,)).copy()

    def contains(self, x, t):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        t = np.asarray(t, dtype=float)
        in_time = (t > self.t0) & (t < self.t1)
        return in_time & (np.linalg.norm(x - self.center, axis=-1) < self.radius)

    def slice_at(self, t):
        if self.t0 < t < self.t1:
            return SpatialBall(self.center, self.radius)
        return None

    def bbox(self):
        return (self.center - self.radius, self.center + self.radius,
                self.t0, self.t1)


class BoxPrimitive:
    """Axis box [lo, hi] x (t0, t1)."""

    def __init__(self, lo, hi, t0, t1):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        if not np.all(self.hi > self.lo):
            raise GeometryError("box needs hi > lo in every axis")
        self.t0, self.t1 = _as_interval(t0, t1)
        self.dim = self.lo.size

    def contains(self, x, t):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        t = np.asarray(t, dtype=float)
        in_time = (t > self.t0) & (t < self.t1)
        return in_time & np.all((x > self.lo) & (x < self.hi), axis=-1)

    def slice_at(self, t):
        if self.t0 < t < self.t1:
            return SpatialBox(self.lo, self.hi)
        return None

    def bbox(self):
        return self.lo.copy(), self.hi.copy(), self.t0, self.t1


class TubePrimitive:
    """Moving ball |x - gamma(t) - offset| < radius for t in (t0, t1)."""

    def __init__(self, curve, radius, offset, t0, t1):
        self.curve = curve
        self.radius = float(radius)
        if self.radius <= 0:
            raise GeometryError("tube radius must be positive")
        self.offset = np.asarray(offset, dtype=float)
        self.t0, self.t1 = _as_interval(t0, t1)
        lo, hi = curve.domain
        if t0 < lo - 1e-12 or t1 > hi + 1e-12:
            raise GeometryError(
                f"tube interval ({t0}, {t1}) outside curve domain [{lo}, {hi}]")
        self.dim = curve.dim

    def spatial_center(self, t):
        return self.curve(np.clip(t, self.t0, self.t1)) + self.offset

    def contains(self, x, t):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        t = np.asarray(t, dtype=float)
        in_time = (t > self.t0) & (t < self.t1)
        centers = self.spatial_center(t)
        return in_time & (np.linalg.norm(x - centers, axis=-1) < self.radius)

    def slice_at(self, t):
        if self.t0 < t < self.t1:
            return SpatialBall(self.curve(t) + self.offset, self.radius)
        return None

    def bbox(self):
        ts = np.linspace(self.t0, self.t1, 129)
        centers = self.curve(ts) + self.offset
        return (centers.min(axis=0) - self.radius,
                centers.max(axis=0) + self.radius, self.t0, self.t1)


_PRIMITIVES = (BallPrimitive, BoxPrimitive, TubePrimitive)


# ---------------------------------------------------------------------------
# regions


class SpacetimeRegion:
    """Finite union of primitives; a point is inside iff some primitive holds it."""

    def __init__(self, primitives, dim=None):
        primitives = list(primitives)
        if not primitives:
            raise GeometryError("region needs at least one primitive")
        for p in primitives:
            if not isinstance(p, _PRIMITIVES):
                raise GeometryError(f"unknown primitive {type(p).__name__}")
        dims = {p.dim for p in primitives}
        if len(dims) != 1:
            raise GeometryError(f"mixed spatial dimensions {dims}")
        self.dim = dims.pop()
        if dim is not None and dim != self.dim:
            raise GeometryError("declared dimension disagrees with primitives")
        if self.dim < 2:
            raise GeometryError("spatial dimension must be at least 2")
        self.primitives = primitives

    def contains(self, x, t):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        t = np.broadcast_to(np.asarray(t, dtype=float), x.shape[:-1])
        inside = np.zeros(x.shape[:-1], dtype=bool)
        for p in self.primitives:
            inside |= p.contains(x, t)
        return inside

    def contains_events(self, pts):
        """Membership for stacked events [(x..., t)] of shape (..., dim+1)."""
        pts = np.asarray(pts, dtype=float)
        return self.contains(pts[..., :-1], pts[..., -1])

    def slice_at(self, t):
        """Primitive descriptions of the time-t slice (possibly empty)."""
        out = []
        for p in self.primitives:
            s = p.slice_at(float(t))
            if s is not None:
                out.append(s)
        return out

    def bbox(self):
        los, his, t0s, t1s = zip(*(p.bbox() for p in self.primitives))
        return (np.min(los, axis=0), np.max(his, axis=0),
                min(t0s), max(t1s))

    @property
    def time_interval(self):
        _, _, t0, t1 = self.bbox()
        return t0, t1

    def diameter(self):
        lo, hi, t0, t1 = self.bbox()
        return float(np.sqrt(np.sum((hi - lo) ** 2) + (t1 - t0) ** 2))

    def spatial_center(self):
        lo, hi, _, _ = self.bbox()
        return 0.5 * (lo + hi)

    def grow(self, margin_x, margin_t):
        """Region enlarged by margins (balls/tubes widen, boxes pad)."""
        out = []
        for p in self.primitives:
            if isinstance(p, BallPrimitive):
                out.append(BallPrimitive(p.center, p.radius + margin_x,
                                         p.t0 - margin_t, p.t1 + margin_t))
            elif isinstance(p, BoxPrimitive):
                out.append(BoxPrimitive(p.lo - margin_x, p.hi + margin_x,
                                        p.t0 - margin_t, p.t1 + margin_t))
            else:
                lo, hi = p.curve.domain
                out.append(TubePrimitive(p.curve, p.radius + margin_x,
                                         p.offset,
                                         max(p.t0 - margin_t, lo),
                                         min(p.t1 + margin_t, hi)))
        return SpacetimeRegion(out)

    def cutoff_profile(self, inner, outer):
        """Smooth chi(x, t): 1 within margin `inner` of the region, 0 beyond
        `outer`.  Built as a smooth union of per-primitive separable bumps, so
        it is C^2 wherever it is not locally constant."""
        if not 0 <= inner < outer:
            raise GeometryError("need 0 <= inner < outer for a cutoff")
        prims = self.primitives

        def chi(x, t):
            x = np.atleast_2d(np.asarray(x, dtype=float))
            t = np.broadcast_to(np.asarray(t, dtype=float), x.shape[:-1])
            one_minus = np.ones(x.shape[:-1])
            for p in prims:
                if isinstance(p, BoxPrimitive):
                    mid = 0.5 * (p.lo + p.hi)
                    half = 0.5 * (p.hi - p.lo)
                    s = np.abs(x - mid) - half
                    bump = np.prod(quintic_step((s - inner) / (outer - inner)),
                                   axis=-1)
                else:
                    centers = p.spatial_center(t)
                    s = np.linalg.norm(x - centers, axis=-1) - p.radius
                    bump = quintic_step((s - inner) / (outer - inner))
                gap_t = np.maximum(p.t0 - t, t - p.t1)
                bump = bump * quintic_step((gap_t - inner) / (outer - inner))
                one_minus *= 1.0 - bump
            return 1.0 - one_minus

        return chi

    def validation_grid(self, shape_space, nt, shrink=0.0):
        """Regular lattice of events covering the region's bounding box.

        Returns (points, mask) where mask flags events inside the region.
        """
        lo, hi, t0, t1 = self.bbox()
        lo = lo + shrink
        hi = hi - shrink
        axes = [np.linspace(lo[i], hi[i], shape_space[i]) for i in range(self.dim)]
        taxis = np.linspace(t0 + shrink, t1 - shrink, nt)
        mesh = np.meshgrid(*axes, taxis, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        mask = self.contains_events(pts)
        return pts, mask


def tube_around_curve(curve, radius, offset, interval):
    """Single-tube region around a moving center gamma(t) + offset."""
    t0, t1 = interval
    return SpacetimeRegion([TubePrimitive(curve, radius, offset, t0, t1)])


# ---------------------------------------------------------------------------
# slice-complement connectivity


@dataclass
class ConnectivityReport:
    unbounded_only: bool
    n_components: int
    grid_h: float
    warnings: list = field(default_factory=list)


def complement_slice_connected(region, t, probe_lo, probe_hi, grid_h):
    """Check that the complement of the time-t slice has no trapped component.

    Flood-fills the complement of the slice on a grid inside the probe box and
    reports True iff every complement component touches the probe boundary.
    Thin components (under 3 cells across) trigger a ResolutionWarning since
    the verdict may flip under refinement.
    """
    probe_lo = np.asarray(probe_lo, dtype=float)
    probe_hi = np.asarray(probe_hi, dtype=float)
    dim = region.dim
    if probe_lo.size != dim or probe_hi.size != dim:
        raise GeometryError("probe box dimension mismatch")
    ns = [max(int(np.ceil((probe_hi[i] - probe_lo[i]) / grid_h)) + 1, 4)
          for i in range(dim)]
    axes = [np.linspace(probe_lo[i], probe_hi[i], ns[i]) for i in range(dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)

    slice_prims = region.slice_at(t)
    inside = np.zeros(pts.shape[0], dtype=bool)
    for s in slice_prims:
        inside |= s.contains(pts)
    comp = (~inside).reshape(ns)

    structure = ndimage.generate_binary_structure(dim, 1)
    labels, n_comp = ndimage.label(comp, structure=structure)

    border = np.zeros(ns, dtype=bool)
    for axis in range(dim):
        sl = [slice(None)] * dim
        sl[axis] = 0
        border[tuple(sl)] = True
        sl[axis] = -1
        border[tuple(sl)] = True
    touching = set(np.unique(labels[border & comp]))
    touching.discard(0)

    notes = []
    for lab in range(1, n_comp + 1):
        idx = np.argwhere(labels == lab)
        extent = idx.max(axis=0) - idx.min(axis=0) + 1
        if extent.min() < 3:
            msg = (f"complement component {lab} is under 3 cells across; "
                   f"grid step {grid_h} may be too coarse")
            notes.append(msg)
            warnings.warn(msg, ResolutionWarning)

    unbounded_only = all(lab in touching for lab in range(1, n_comp + 1))
    return ConnectivityReport(unbounded_only, int(n_comp), float(grid_h), notes)


def region_slices_admissible(region, times, probe_margin=1.5, grid_h=None):
    """Convenience sweep of complement_slice_connected over several times."""
    lo, hi, _, _ = region.bbox()
    pad = probe_margin * max(1.0, float(np.max(hi - lo)))
    probe_lo = lo - pad
    probe_hi = hi + pad
    if grid_h is None:
        grid_h = float(np.max(probe_hi - probe_lo)) / 160.0
    reports = []
    for t in times:
        reports.append(complement_slice_connected(region, t, probe_lo,
                                                  probe_hi, grid_h))
    return reports


# ---------------------------------------------------------------------------
# exhaustions


class Exhaustion:
    """Nested spacetime sets B_m x (-m, m) sweeping out all of spacetime."""

    def __init__(self, dim=2, radii=None, max_index=8):
        if radii is None:
            radii = [float(m) for m in range(1, max_index + 1)]
        self.dim = dim
        self.sets = [
            SpacetimeRegion([BallPrimitive(np.zeros(dim), r, -r, r)])
            for r in radii
        ]
        self.radii = [float(r) for r in radii]

    def __len__(self):
        return len(self.sets)

    def __getitem__(self, m):
        return self.sets[m]

    def check_nested(self, rng=None, n_probes=512):
        rng = np.random.default_rng(rng)
        for a, b, ra in zip(self.sets, self.sets[1:], self.radii):
            pts = rng.uniform(-ra, ra, size=(n_probes, self.dim + 1))
            inside_a = a.contains_events(pts)
            inside_b = b.contains_events(pts)
            if np.any(inside_a & ~inside_b):
                return False
        return True

    def index_covering(self, lo, hi, t0, t1):
        """Smallest member containing the given bounding box, if any."""
        corner = max(float(np.max(np.abs(lo))), float(np.max(np.abs(hi))))
        reach = max(corner, abs(t0), abs(t1))
        for m, r in enumerate(self.radii):
            if r > reach + 1e-12:
                return m
        return None
