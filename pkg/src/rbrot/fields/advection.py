"""Flux-form advection with limited upwind (MUSCL, van Leer) reconstruction.

Carriers are face-normal transport velocities (or mass fluxes) on the MAC
arrangement and are assumed to vanish on the boundary faces, so the schemes
are conservative and exchange nothing with the walls. Reconstruction uses
zero-gradient ghost cells, which makes it invariant under constant shifts.
"""
from __future__ import annotations

import numpy as np


def van_leer(a, b):
    ab = a * b
    out = np.zeros_like(ab)
    np.divide(2.0 * ab, a + b, out=out, where=ab > 0)
    return out


def upwind_interior(q, vel, axis):
    """Upwind-biased limited values of ``q`` at the interior faces along ``axis``.

    ``q`` has ``n`` entries along ``axis``; ``vel`` has ``n - 1`` (one per
    interior face) and selects the upwind side.
    """
    q = np.moveaxis(q, axis, 0)
    v = np.moveaxis(vel, axis, 0)
    qe = np.concatenate([q[:1], q, q[-1:]], axis=0)
    d = np.diff(qe, axis=0)
    slope = van_leer(d[:-1], d[1:])
    left = q[:-1] + 0.5 * slope[:-1]
    right = q[1:] - 0.5 * slope[1:]
    out = np.where(v > 0, left, right)
    return np.moveaxis(out, 0, axis)


def _interior(a, axis):
    idx = [slice(None)] * a.ndim
    idx[axis] = slice(1, -1)
    return tuple(idx)


def _pad_zero(F, axis):
    shp = list(F.shape)
    shp[axis] = 1
    z = np.zeros(shp)
    return np.concatenate([z, F, z], axis=axis)


def _to_faces(v, axis):
    """Average a cell-located array to all faces along ``axis`` (edge values copied)."""
    mid = 0.5 * (np.take(v, range(0, v.shape[axis] - 1), axis=axis)
                 + np.take(v, range(1, v.shape[axis]), axis=axis))
    return np.concatenate([np.take(v, [0], axis=axis), mid, np.take(v, [-1], axis=axis)], axis=axis)


def scalar_flux_divergence(q, carriers, spacing, axes):
    """div(carrier * q) for a cell-centred scalar ``q``."""
    out = np.zeros_like(q, dtype=float)
    for a in axes:
        vi = carriers[a][_interior(carriers[a], a)]
        F = vi * upwind_interior(q, vi, a)
        out += np.diff(_pad_zero(F, a), axis=a) / spacing[a]
    return out


def momentum_flux_divergence(vel, carriers, spacing, axes):
    """div(carrier (x) vel) for MAC velocity components.

    ``vel[c]`` is the transported velocity component on its own faces and
    ``carriers[d]`` the transporting flux on d-faces. Entries on boundary
    faces of a component's own axis are returned as zero.
    """
    out = []
    for c, u in enumerate(vel):
        acc = np.zeros_like(u, dtype=float)
        for d in axes:
            if d == c:
                v = carriers[c]
                vc = 0.5 * (np.take(v, range(1, v.shape[c]), axis=c) + np.take(v, range(0, v.shape[c] - 1), axis=c))
                F = vc * upwind_interior(u, vc, c)
                acc[_interior(acc, c)] += np.diff(F, axis=c) / spacing[c]
            else:
                v = carriers[d]
                if c in axes:
                    v = _to_faces(v, c)
                vi = v[_interior(v, d)]
                F = vi * upwind_interior(u, vi, d)
                acc += np.diff(_pad_zero(F, d), axis=d) / spacing[d]
        if c in axes:
            idx = [slice(None)] * u.ndim
            idx[c] = [0, -1]
            acc[tuple(idx)] = 0.0
        out.append(acc)
    return tuple(out)
