"""Discretize a kernel-source convolution into a finite pole sum.

Given a compactly supported source density phi on a spacetime lattice, the
field integral K * phi is replaced by one pole per partition cell, holding
the cell's integrated mass and sitting at the cell center.  Cells are
refined uniformly until the measured sup error on the observation set drops
below tolerance or the cell budget runs out.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from caloric.kernels import KernelSum
from caloric.runge.report import ApproxReport


class ConvolutionError(ValueError):
    pass


def _cell_accumulate(node_pts, node_masses, lo, hi, shape):
    """Assign lattice node masses to uniform cells; returns centers, masses."""
    dim = lo.size
    widths = (hi - lo) / np.asarray(shape)
    idx = np.clip(((node_pts - lo) / widths).astype(int), 0,
                  np.asarray(shape) - 1)
    flat = np.ravel_multi_index(tuple(idx.T), shape)
    ncells = int(np.prod(shape))
    masses = np.bincount(flat, weights=node_masses, minlength=ncells)
    centers_first = np.bincount(flat, minlength=ncells)
    live = np.abs(masses) > 0
    centers = np.stack(np.unravel_index(np.nonzero(live)[0], shape), axis=-1)
    centers = lo + (centers + 0.5) * widths
    return centers, masses[live], int(np.count_nonzero(centers_first))


def discretize_convolution(source, obs_points, delta, params,
                           cell_budget=200_000, max_levels=10,
                           mass_floor_rel=1e-11):
    """Pole-sum surrogate of the convolution with the source field.

    source is a GridField holding phi; its lattice sum at full resolution is
    the internal reference the aggregated sums are measured against.  The
    report carries one stage per refinement level, so monotone error decay
    under refinement can be audited.
    """
    obs = np.asarray(obs_points, dtype=float).reshape(-1, params.n + 1)
    phi = source.values
    hx, ht = source.spacing()
    cellvol = float(np.prod(hx)) * ht

    events = source.events()                       # rows (x..., t)
    masses = phi.ravel() * cellvol
    # prune numerical noise: finite differences of a caloric extension leave
    # specks of order eps/h^2 far from the true support of the density
    floor = mass_floor_rel * float(np.max(np.abs(masses), initial=0.0))
    live = np.abs(masses) > floor
    report = ApproxReport()
    report.notes["dropped_mass"] = float(np.sum(np.abs(masses[~live])))
    if not np.any(live):
        report.notes["levels"] = []
        return KernelSum.empty(params), report

    node_pts = events[live]
    node_masses = masses[live]
    lo = node_pts.min(axis=0) - 1e-12
    hi = node_pts.max(axis=0) + 1e-12

    # guard: observation points must stay clear of the support itself
    # (the support's bounding box may legitimately wrap around them)
    from scipy.spatial import cKDTree
    support_pad = float(np.max(np.concatenate([hx, [ht]])))
    dists, _ = cKDTree(node_pts).query(obs)
    if np.any(dists <= support_pad):
        raise ConvolutionError("observation points intersect a neighborhood "
                               "of the source support")

    reference = KernelSum(node_pts, node_masses, params)
    ref_vals = reference.eval(obs)

    dim1 = params.n + 1
    best = None
    levels = []
    for level in range(max_levels):
        shape = tuple(2 ** level for _ in range(dim1))
        ncells = int(np.prod(shape))
        if ncells > cell_budget:
            report.flags.append("cell_budget_exhausted")
            break
        centers, cmasses, used = _cell_accumulate(node_pts, node_masses,
                                                  lo, hi, shape)
        ks = KernelSum(centers, cmasses, params)
        err = float(np.max(np.abs(ks.eval(obs) - ref_vals), initial=0.0))
        levels.append({"level": level, "cells": int(centers.shape[0]),
                       "error": err})
        report.add_stage(f"cells_level_{level}", err, tolerance=delta,
                         cells=int(centers.shape[0]))
        best = (ks, err)
        if err < delta:
            break
    else:
        report.flags.append("refinement_levels_exhausted")

    ks, err = best
    report.sup_error = err
    report.pole_count = ks.n_poles
    report.notes["levels"] = levels
    report.notes["reference_poles"] = int(node_pts.shape[0])
    if err >= delta and "cell_budget_exhausted" not in report.flags:
        if levels and levels[-1]["level"] == max_levels - 1:
            report.flags.append("tolerance_not_reached")
    return ks, report
