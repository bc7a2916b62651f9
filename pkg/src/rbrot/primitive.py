"""Explicit solver for the scaled compressible rotating Navier-Stokes-Fourier system.

Evolved variables on the MAC grid: density ``rho`` and internal energy
density ``E = rho e`` at cell centres, momentum ``m = rho u`` on faces::

    d rho/dt + div m = 0
    d m/dt + div(m u) + grad p / eps^2 + 2/sqrt(eps) e3 x m = div S + rho/eps grad(G + |x_h|^2/2)
    d E/dt + div(E u) + div q = eps^2 S : D u - p div u

Lateral walls are no-slip, top and bottom are impermeable and stress free,
and the temperature is prescribed on every wall.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import limit
from .errors import CFLError, ConfigError, DomainError, PositivityError, ScalingError
from .fields import GridSpec, ScalarField, boundary_data, domain_average
from .fields.poisson import SeparableOperator, pcg
from .fields.advection import momentum_flux_divergence, scalar_flux_divergence
from .thermo import BackgroundState, EosSpec

DIFFUSIVE_SAFETY = 0.2


@dataclass(frozen=True)
class PrimitiveParams:
    eps: float
    eos: EosSpec
    background: BackgroundState
    grid: GridSpec
    g_vec: tuple = (0.0, 0.0, -1.0)
    theta_boundary: object = 0.0
    cfl: float = 0.4
    t_final: float = 0.0
    centrifugal: bool = True
    coriolis: bool = True

    def __post_init__(self):
        if not (0.0 < self.eps <= 1.0):
            raise ConfigError("eps must lie in (0, 1]")
        if not (0.0 < self.cfl < 1.0):
            raise ConfigError("cfl must lie in (0, 1)")

    @cached_property
    def vartheta(self) -> dict:
        return boundary_data(self.grid, self.theta_boundary)

    @cached_property
    def wall_theta(self) -> dict:
        b = self.background
        return {f: b.theta_bar + self.eps * v for f, v in self.vartheta.items()}

    @cached_property
    def potential(self) -> ScalarField:
        return build_potential(self.grid, self.g_vec, self.centrifugal)

    @cached_property
    def potential_gradient(self):
        """d_c(G + |x_h|^2/2) on the faces of each axis."""
        g = self.grid
        k = 1.0 if self.centrifugal else 0.0
        out = []
        for a in range(3):
            x = g.face_coords(a)[a]
            val = float(self.g_vec[a]) + (k * x if a < 2 else 0.0 * x)
            out.append(np.broadcast_to(val, g.face_shape(a)).copy())
        return tuple(out)


def build_potential(grid: GridSpec, g_vec, centrifugal: bool = True) -> ScalarField:
    if centrifugal:
        return limit.build_potential(grid, g_vec)
    x1, x2, x3 = grid.cell_coords()
    vals = np.broadcast_to(g_vec[0] * x1 + (0.0 if grid.slab else g_vec[1]) * x2 + g_vec[2] * x3, grid.shape)
    return ScalarField(grid, vals - np.mean(vals))


@dataclass
class PrimitiveState:
    rho: np.ndarray
    mom: tuple
    E: np.ndarray
    theta: np.ndarray
    t: float = 0.0

    def copy(self):
        return PrimitiveState(self.rho.copy(), tuple(m.copy() for m in self.mom), self.E.copy(),
                              self.theta.copy(), self.t)


# -- staggering helpers ---------------------------------------------------------

def face_density(rho: np.ndarray, grid: GridSpec, axis: int) -> np.ndarray:
    """Density on faces of ``axis``; boundary faces copy the adjacent cell."""
    if axis not in grid.active:
        return rho
    mid = 0.5 * (np.take(rho, range(1, rho.shape[axis]), axis=axis)
                 + np.take(rho, range(0, rho.shape[axis] - 1), axis=axis))
    return np.concatenate([np.take(rho, [0], axis=axis), mid, np.take(rho, [-1], axis=axis)], axis=axis)


def velocity(state: PrimitiveState, grid: GridSpec):
    return tuple(state.mom[a] / face_density(state.rho, grid, a) for a in range(3))


def coriolis_map(w2: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Average a y-located array to the x-faces (zero on the x walls)."""
    out = np.zeros(grid.face_shape(0))
    if grid.slab:
        out[1:-1] = 0.5 * (w2[1:] + w2[:-1])
    else:
        s = w2[:, 1:] + w2[:, :-1]
        out[1:-1] = 0.25 * (s[1:] + s[:-1])
    return out


def coriolis_map_adjoint(w1: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Transpose of :func:`coriolis_map`, zeroed on the y walls."""
    inner = w1[1:-1]
    if grid.slab:
        out = np.zeros(grid.face_shape(1))
        out[1:] += 0.5 * inner
        out[:-1] += 0.5 * inner
        return out
    cell = np.zeros((grid.nx, grid.ny, grid.nz))
    cell[1:] += 0.25 * inner
    cell[:-1] += 0.25 * inner
    out = np.zeros(grid.face_shape(1))
    out[:, 1:] += cell
    out[:, :-1] += cell
    out[:, [0, -1]] = 0.0
    return out


def coriolis_force(state: PrimitiveState, params: PrimitiveParams):
    """-(2/sqrt(eps)) e3 x m, discretised so that it does no work on the kinetic energy."""
    g = params.grid
    rx = face_density(state.rho, g, 0)
    ry = face_density(state.rho, g, 1)
    sx, sy = np.sqrt(rx), np.sqrt(ry)
    c = 2.0 / np.sqrt(params.eps)
    f1 = c * sx * coriolis_map(state.mom[1] / sy, g)
    f2 = -c * sy * coriolis_map_adjoint(state.mom[0] / sx, g)
    return f1, f2, np.zeros_like(state.mom[2])


def kinetic_energy(state: PrimitiveState, grid: GridSpec) -> float:
    """sum over faces of |m|^2 / (2 rho_face) times the cell volume."""
    total = 0.0
    for a in range(3):
        total += float(np.sum(state.mom[a] ** 2 / face_density(state.rho, grid, a)))
    return 0.5 * total * grid.cell_volume


# -- viscous and thermal fluxes ------------------------------------------------

def _pad_ghost(u, axis, sign):
    lo = sign * np.take(u, [0], axis=axis)
    hi = sign * np.take(u, [-1], axis=axis)
    return np.concatenate([lo, u, hi], axis=axis)


def _to_nodes(v, axis):
    mid = 0.5 * (np.take(v, range(1, v.shape[axis]), axis=axis) + np.take(v, range(0, v.shape[axis] - 1), axis=axis))
    return np.concatenate([np.take(v, [0], axis=axis), mid, np.take(v, [-1], axis=axis)], axis=axis)


def _edge_to_cells(S, axes):
    for a in axes:
        S = 0.5 * (np.take(S, range(1, S.shape[a]), axis=a) + np.take(S, range(0, S.shape[a] - 1), axis=a))
    return S


def shear_stress(u, mu, grid: GridSpec, c: int, d: int):
    """Off-diagonal stress S_cd = mu (d_d u_c + d_c u_d) on the (c, d) edges.

    Returns ``(S, rate)`` where ``rate`` is the bracketed strain sum.
    Lateral walls are no-slip (ghost = -u); edges on the top and bottom
    walls carry zero stress.
    """
    active = grid.active
    h = grid.spacing
    rate = 0.0
    if d in active:
        sign = 1.0 if d == 2 else -1.0
        rate = rate + np.diff(_pad_ghost(u[c], d, sign), axis=d) / h[d]
    if c in active:
        sign = 1.0 if c == 2 else -1.0
        rate = rate + np.diff(_pad_ghost(u[d], c, sign), axis=c) / h[c]
    mu_e = mu
    for a in (c, d):
        if a in active:
            mu_e = _to_nodes(mu_e, a)
    S = mu_e * rate
    for a in (c, d):
        if a == 2:
            idx = [slice(None)] * 3
            idx[2] = [0, -1]
            S[tuple(idx)] = 0.0
    return S, rate


def viscous_terms(u, theta, eos: EosSpec, grid: GridSpec):
    """Returns (div S on faces, S : grad u at cells, div u at cells)."""
    mu, eta, _ = eos.transport(theta)
    h = grid.spacing
    active = grid.active
    div = sum(np.diff(u[a], axis=a) / h[a] for a in active)
    force = [np.zeros(grid.face_shape(a)) for a in range(3)]
    diss = np.zeros(grid.shape)
    lam2 = eta - 2.0 / 3.0 * mu
    for c in active:
        dcu = np.diff(u[c], axis=c) / h[c]
        Scc = 2.0 * mu * dcu + lam2 * div
        force[c][_inner(c)] += np.diff(Scc, axis=c) / h[c]
        diss += Scc * dcu
    for c, d in ((0, 1), (0, 2), (1, 2)):
        if c not in active and d not in active:
            continue
        S, rate = shear_stress(u, mu, grid, c, d)
        if d in active:
            contrib = np.diff(S, axis=d) / h[d]
            if c in active:
                force[c][_inner(c)] += contrib[_inner(c)]
            else:
                force[c] += contrib
        if c in active:
            contrib = np.diff(S, axis=c) / h[c]
            if d in active:
                force[d][_inner(d)] += contrib[_inner(d)]
            else:
                force[d] += contrib
        diss += _edge_to_cells(S * rate, [a for a in (c, d) if a in active])
    return force, diss, div


def _inner(axis):
    idx = [slice(None)] * 3
    idx[axis] = slice(1, -1)
    return tuple(idx)


def heat_flux(theta, eos: EosSpec, grid: GridSpec, wall_theta: dict):
    """Fourier flux q = -kappa grad theta on faces, Dirichlet walls through linear ghosts."""
    kappa = eos.transport(theta)[2]
    h = grid.spacing
    q = []
    for a in range(3):
        if a not in grid.active:
            q.append(None)
            continue
        name = "xyz"[a]
        kf = 0.5 * (np.take(kappa, range(1, theta.shape[a]), axis=a)
                    + np.take(kappa, range(0, theta.shape[a] - 1), axis=a))
        inner = -kf * np.diff(theta, axis=a) / h[a]
        tlo = np.expand_dims(wall_theta[f"{name}-"], a)
        thi = np.expand_dims(wall_theta[f"{name}+"], a)
        klo = eos.transport(tlo)[2]
        khi = eos.transport(thi)[2]
        lo = -klo * 2.0 * (np.take(theta, [0], axis=a) - tlo) / h[a]
        hi = -khi * 2.0 * (thi - np.take(theta, [-1], axis=a)) / h[a]
        q.append(np.concatenate([lo, inner, hi], axis=a))
    return q


def rhs(state: PrimitiveState, params: PrimitiveParams):
    """Time derivatives ``(drho, dmom, dE)`` of the conservative variables."""
    g = params.grid
    eps = params.eps
    eos = params.eos
    h = g.spacing
    active = g.active
    rho, theta, mom = state.rho, state.theta, state.mom
    u = velocity(state, g)
    p_bar = float(eos.pressure(params.background.rho_bar, params.background.theta_bar))
    p = eos.pressure(rho, theta) - p_bar

    drho = -sum(np.diff(mom[a], axis=a) / h[a] for a in active)

    adv = momentum_flux_divergence(u, mom, h, active)
    visc, diss, div = viscous_terms(u, theta, eos, g)
    grad_phi = params.potential_gradient
    dmom = []
    for a in range(3):
        d = -adv[a] + visc[a]
        rf = face_density(rho, g, a)
        if a in active:
            dp = np.zeros(g.face_shape(a))
            dp[_inner(a)] = np.diff(p, axis=a) / h[a]
            d = d - dp / eps**2
        d = d + rf * grad_phi[a] / eps
        if a in active:
            idx = [slice(None)] * 3
            idx[a] = [0, -1]
            d[tuple(idx)] = 0.0
        dmom.append(d)
    if params.coriolis:
        cf = coriolis_force(state, params)
        dmom = [dmom[a] + cf[a] for a in range(3)]

    e = state.E / rho
    q = heat_flux(theta, eos, g, params.wall_theta)
    dE = -scalar_flux_divergence(e, mom, h, active)
    dE -= sum(np.diff(q[a], axis=a) / h[a] for a in active)
    dE += eps**2 * diss - (p + p_bar) * div
    return drho, tuple(dmom), dE


# -- time integration ------------------------------------------------------------

def recover_theta(rho, E, eos: EosSpec, guess):
    if np.any(rho <= 0) or not np.all(np.isfinite(rho)):
        raise PositivityError("density lost positivity")
    if np.any(E <= 0) or not np.all(np.isfinite(E)):
        raise PositivityError("internal energy lost positivity")
    try:
        theta = eos.temperature_from_energy(rho, E / rho, guess)
    except DomainError as exc:
        raise PositivityError(f"temperature recovery failed: {exc}") from exc
    if np.any(theta <= 0):
        raise PositivityError("temperature lost positivity")
    return theta


def stable_dt(state: PrimitiveState, params: PrimitiveParams) -> float:
    """Acoustic step cfl*eps*h/(c_max + eps |u|_max), limited by explicit diffusion."""
    g = params.grid
    eos = params.eos
    hmin = min(g.spacing[a] for a in g.active)
    c = float(np.sqrt(np.max(eos.sound_speed_sq(state.rho, state.theta))))
    umax = max(float(np.max(np.abs(v))) for v in velocity(state, g))
    dt = params.cfl * params.eps * hmin / (c + params.eps * umax)
    mu, eta, kappa = eos.transport(state.theta)
    rmin = float(np.min(state.rho))
    visc = float(np.max(2.0 * mu + np.abs(eta)))
    if visc > 0:
        dt = min(dt, DIFFUSIVE_SAFETY * hmin**2 * rmin / visc)
    cv = float(np.min(state.rho * eos.energy_theta(state.rho, state.theta)))
    dt = min(dt, DIFFUSIVE_SAFETY * hmin**2 * cv / float(np.max(kappa)))
    return dt


def _combine(a: PrimitiveState, ca, b: PrimitiveState, cb, k, dt, params):
    rho = ca * a.rho + cb * (b.rho + dt * k[0])
    mom = tuple(ca * a.mom[i] + cb * (b.mom[i] + dt * k[1][i]) for i in range(3))
    E = ca * a.E + cb * (b.E + dt * k[2])
    theta = recover_theta(rho, E, params.eos, b.theta)
    return PrimitiveState(rho, mom, E, theta, a.t)


def time_step(state: PrimitiveState, params: PrimitiveParams, dt: float | None = None) -> PrimitiveState:
    """Three-stage strong-stability-preserving Runge-Kutta step."""
    if dt is None:
        dt = stable_dt(state, params)
    if not dt > 0:
        raise CFLError("time step must be positive")
    try:
        s1 = _combine(state, 0.0, state, 1.0, rhs(state, params), dt, params)
        s2 = _combine(state, 0.75, s1, 0.25, rhs(s1, params), dt, params)
        s3 = _combine(state, 1.0 / 3.0, s2, 2.0 / 3.0, rhs(s2, params), dt, params)
    except PositivityError as exc:
        exc.state = state
        raise
    s3.t = state.t + dt
    return s3


# -- initial data ----------------------------------------------------------------

def assemble(rho, u, theta, eos: EosSpec, grid: GridSpec, t=0.0) -> PrimitiveState:
    """Conservative variables from density, face velocities and temperature."""
    mom = []
    for a in range(3):
        m = face_density(rho, grid, a) * u[a]
        if a in grid.active:
            idx = [slice(None)] * 3
            idx[a] = [0, -1]
            m[tuple(idx)] = 0.0
        mom.append(m)
    E = rho * eos.internal_energy(rho, theta)
    return PrimitiveState(np.asarray(rho, float), tuple(mom), E, np.asarray(theta, float), t)


def lift_horizontal(u0h, grid: GridSpec):
    """3D face velocities (u1, u2, 0) from x3-independent horizontal components."""
    nz = grid.nz
    return (np.repeat(np.asarray(u0h[0])[:, :, None], nz, axis=2),
            np.repeat(np.asarray(u0h[1])[:, :, None], nz, axis=2),
            np.zeros(grid.face_shape(2)))


def well_prepared_init(params: PrimitiveParams, T0: ScalarField, u0h=None) -> PrimitiveState:
    """rho = rho_bar + eps R0, theta = theta_bar + eps T0, u = (u0h, 0).

    With rotation on and a nonzero u0h the density also receives the
    O(eps^{3/2}) geostrophic correction of :func:`geostrophic_density`.
    """
    g = params.grid
    b = params.background
    if u0h is None:
        u0h = (np.zeros((g.nx + 1, g.ny)), np.zeros((g.nx, g.ny + (0 if g.slab else 1))))
    R0 = limit.recover_R(T0, b, params.potential)
    rho = b.rho_bar + params.eps * R0.values
    theta = b.theta_bar + params.eps * T0.values
    if np.any(rho <= 0) or np.any(theta <= 0):
        raise ScalingError("eps too large: initial density or temperature not positive")
    u = lift_horizontal(u0h, g)
    if params.coriolis and any(np.any(c) for c in u0h):
        rho = geostrophic_density(rho, u, theta, params)
        if np.any(rho <= 0):
            raise ScalingError("eps too large: balanced initial density not positive")
    return assemble(rho, u, theta, params.eos, g)


def geostrophic_density(rho, u, theta, params: PrimitiveParams, iterations: int = 3):
    """Adjust rho at fixed theta so that grad p / eps^2 absorbs the gradient part
    of the Coriolis force.

    The correction to p is O(eps^{3/2}), so the data stay well prepared while
    the O(eps^{-1/2}) initial momentum tendency is removed. Mass is unchanged.
    """
    g = params.grid
    kinds = tuple("neumann_cell" if a in g.active else "inert" for a in range(3))
    op = SeparableOperator(g.shape, g.spacing, kinds, alpha=0.0, beta=1.0)
    p_base = params.eos.pressure(rho, theta)
    for _ in range(iterations):
        cf = coriolis_force(assemble(rho, u, theta, params.eos, g), params)
        div = sum(np.diff(cf[a], axis=a) / g.spacing[a] for a in g.active)
        pi, _ = pcg(op, -div, tol=1e-12)
        dp = p_base + params.eps**2 * pi - params.eos.pressure(rho, theta)
        drho = dp / params.eos.pressure_derivatives(rho, theta)[0]
        rho = rho + drho - np.mean(drho)
    return rho


def total_mass(state: PrimitiveState, grid: GridSpec) -> float:
    return float(np.sum(state.rho)) * grid.cell_volume


def run(params: PrimitiveParams, state: PrimitiveState, times=None, callback=None) -> PrimitiveState:
    """Integrate to each output time in ``times`` (default ``[t_final]``).

    Steps are shortened so that every output time is hit exactly;
    ``callback(state)`` is called at t = state.t and at each output time.
    """
    if times is None:
        times = [params.t_final]
    if callback is not None:
        callback(state)
    for t_out in times:
        while state.t < t_out - 1e-14 * max(1.0, t_out):
            dt = min(stable_dt(state, params), t_out - state.t)
            state = time_step(state, params, dt)
            if abs(state.t - t_out) < 1e-14 * max(1.0, t_out):
                state.t = t_out
        if callback is not None and t_out > 0:
            callback(state)
    return state


def mean_temperature(state: PrimitiveState) -> float:
    return domain_average(state.theta)
