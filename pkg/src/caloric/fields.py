"""Sampled fields on regular lattices.

GridField holds u(x, t) on a box x time-interval lattice (time-major value
array); SpatialField holds a single-time sample such as an initial datum.
Both serialize to CSV (one row per node, coordinates then value) plus a JSON
sidecar describing the lattice.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator


@dataclass
class SpatialField:
    lo: np.ndarray
    hi: np.ndarray
    values: np.ndarray
    meta: str = ""

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=float)
        self.hi = np.asarray(self.hi, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != self.lo.size:
            raise ValueError("value array rank must match the dimension")

    @property
    def dim(self):
        return self.lo.size

    @property
    def shape(self):
        return self.values.shape

    def axes(self):
        return [np.linspace(self.lo[i], self.hi[i], self.shape[i])
                for i in range(self.dim)]

    def spacing(self):
        return np.array([(self.hi[i] - self.lo[i]) / (self.shape[i] - 1)
                         for i in range(self.dim)])

    def points(self):
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def cell_volume(self):
        return float(np.prod(self.spacing()))

    def integral(self):
        """Trapezoid integral over the box."""
        out = self.values
        for ax in self.axes():
            out = np.trapezoid(out, ax, axis=0)
        return float(out)

    def interpolator(self, method="cubic"):
        return RegularGridInterpolator(tuple(self.axes()), self.values,
                                       method=method, bounds_error=False,
                                       fill_value=0.0)

    @classmethod
    def from_callable(cls, fn, lo, hi, shape, meta=""):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        axes = [np.linspace(lo[i], hi[i], shape[i]) for i in range(lo.size)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        vals = np.asarray(fn(pts), dtype=float).reshape(shape)
        return cls(lo, hi, vals, meta=meta)

    def to_csv(self, path):
        pts = self.points()
        data = np.column_stack([pts, self.values.ravel()])
        header = ",".join([f"x{i}" for i in range(self.dim)] + ["value"])
        np.savetxt(path, data, delimiter=",", header=header, comments="")
        sidecar = {
            "kind": "spatial_field",
            "lo": self.lo.tolist(),
            "hi": self.hi.tolist(),
            "shape": list(self.shape),
            "meta": self.meta,
        }
        with open(str(path) + ".json", "w") as fh:
            json.dump(sidecar, fh, indent=1, sort_keys=True)


@dataclass
class GridField:
    """u sampled on box x interval; values indexed values[it, ix, iy, ...]."""

    space_lo: np.ndarray
    space_hi: np.ndarray
    t0: float
    t1: float
    values: np.ndarray
    meta: str = ""

    def __post_init__(self):
        self.space_lo = np.asarray(self.space_lo, dtype=float)
        self.space_hi = np.asarray(self.space_hi, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != self.space_lo.size + 1:
            raise ValueError("value array rank must be dim + 1 (time major)")

    @property
    def dim(self):
        return self.space_lo.size

    @property
    def nt(self):
        return self.values.shape[0]

    @property
    def space_shape(self):
        return self.values.shape[1:]

    def t_axis(self):
        return np.linspace(self.t0, self.t1, self.nt)

    def space_axes(self):
        return [np.linspace(self.space_lo[i], self.space_hi[i],
                            self.space_shape[i]) for i in range(self.dim)]

    def spacing(self):
        hx = [(self.space_hi[i] - self.space_lo[i]) / (self.space_shape[i] - 1)
              for i in range(self.dim)]
        ht = (self.t1 - self.t0) / max(self.nt - 1, 1)
        return np.asarray(hx), ht

    def events(self):
        """All lattice events as (N, dim+1) rows ordered t-major."""
        mesh = np.meshgrid(self.t_axis(), *self.space_axes(), indexing="ij")
        t = mesh[0].ravel()
        xs = [m.ravel() for m in mesh[1:]]
        return np.stack(xs + [t], axis=-1)

    def slice_values(self, it):
        return self.values[it]

    def argmax_at(self, it, mask=None):
        """Lattice argmax of u(., t_it); lexicographic tie-break.

        mask, if given, restricts the search to True nodes.
        """
        sl = self.values[it]
        if mask is not None:
            masked = np.where(mask, sl, -np.inf)
        else:
            masked = sl
        flat = int(np.argmax(masked))
        idx = np.unravel_index(flat, sl.shape)
        coords = [self.space_axes()[i][idx[i]] for i in range(self.dim)]
        return np.asarray(coords), idx, float(sl[idx])

    @classmethod
    def from_callable(cls, fn, space_lo, space_hi, shape_space, t0, t1, nt,
                      meta="", chunk=500_000):
        space_lo = np.asarray(space_lo, dtype=float)
        space_hi = np.asarray(space_hi, dtype=float)
        axes = [np.linspace(space_lo[i], space_hi[i], shape_space[i])
                for i in range(space_lo.size)]
        taxis = np.linspace(t0, t1, nt)
        mesh = np.meshgrid(taxis, *axes, indexing="ij")
        t = mesh[0].ravel()
        xs = [m.ravel() for m in mesh[1:]]
        pts = np.stack(xs + [t], axis=-1)
        vals = np.empty(pts.shape[0])
        for start in range(0, pts.shape[0], chunk):
            sl = slice(start, start + chunk)
            vals[sl] = fn(pts[sl])
        values = vals.reshape((nt,) + tuple(shape_space))
        return cls(space_lo, space_hi, float(t0), float(t1), values, meta=meta)

    def interpolator(self, method="linear"):
        axes = (self.t_axis(),) + tuple(self.space_axes())
        return RegularGridInterpolator(axes, self.values, method=method,
                                       bounds_error=False, fill_value=0.0)

    def to_csv(self, path):
        pts = self.events()
        data = np.column_stack([pts, self.values.ravel()])
        header = ",".join([f"x{i}" for i in range(self.dim)] + ["t", "value"])
        np.savetxt(path, data, delimiter=",", header=header, comments="")
        sidecar = {
            "kind": "grid_field",
            "space_lo": self.space_lo.tolist(),
            "space_hi": self.space_hi.tolist(),
            "t0": self.t0,
            "t1": self.t1,
            "shape": list(self.values.shape),
            "meta": self.meta,
        }
        with open(str(path) + ".json", "w") as fh:
            json.dump(sidecar, fh, indent=1, sort_keys=True)

    def max_abs_diff(self, fn, chunk=500_000):
        """Sup over the lattice of |self - fn| for a callable on events."""
        pts = self.events()
        worst = 0.0
        vals = self.values.ravel()
        for start in range(0, pts.shape[0], chunk):
            sl = slice(start, start + chunk)
            diff = np.abs(vals[sl] - np.asarray(fn(pts[sl])))
            worst = max(worst, float(diff.max(initial=0.0)))
        return worst
