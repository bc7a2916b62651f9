"""Integrator for the planar low-Mach limit system.

Unknowns are a horizontal, x3-independent velocity ``u_h`` on a 2D MAC grid,
the temperature deviation ``T`` on the 3D grid with plain Dirichlet data, and
the density deviation ``R`` recovered algebraically from ``T``::

    rho (du/dt + div(u u)) + grad Pi = mu lap u - 2 beta_slip u + <R> grad(G + |x_h|^2/2)
    rho c_p (dT/dt + u . grad T) - rho theta alpha u . grad(G + |x_h|^2/2) = kappa lap T + xi(t)
    R = (rho Phi + chi - p_theta T) / p_rho

``xi`` is the spatially uniform source that keeps the mean of ``T``
consistent with the nonlocal boundary condition of the equivalent
formulation in ``Theta = T - lambda avg(T)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable

import numpy as np

from .errors import CFLError, ConfigError, StabilityError
from .fields import (
    GridSpec,
    ScalarField,
    SeparableOperator,
    boundary_data,
    boundary_normal_flux,
    dirichlet_lift,
    domain_average,
    pcg,
    vertical_average,
)
from .fields.advection import momentum_flux_divergence, scalar_flux_divergence
from .fields.operators import interior_slice, velocity_kinds
from .thermo import BackgroundState, EosSpec

ADVECTIVE_CFL = 0.5
DIFFUSIVE_CFL = 0.25


def potential_function(grid: GridSpec, g_vec) -> Callable:
    """Continuous G(x) + |x_h|^2/2 (x2 is identically zero in slab mode)."""
    g1, g2, g3 = (float(v) for v in g_vec)
    slab = grid.slab

    def phi(x1, x2, x3):
        y = 0.0 * x2 if slab else x2
        return g1 * x1 + g2 * y + g3 * x3 + 0.5 * (x1**2 + y**2)

    return phi


def build_potential(grid: GridSpec, g_vec=(0.0, 0.0, -1.0)) -> ScalarField:
    """Cell samples of G + |x_h|^2/2 shifted to zero discrete mean."""
    phi = potential_function(grid, g_vec)
    vals = np.broadcast_to(phi(*grid.cell_coords()), grid.shape)
    return ScalarField(grid, vals - np.mean(vals))


def recover_R(T: ScalarField, background: BackgroundState, potential: ScalarField) -> ScalarField:
    b = background
    chi = b.p_theta * domain_average(T)
    vals = (b.rho_bar * potential.values + chi - b.p_theta * T.values) / b.p_rho
    return ScalarField(T.grid, vals)


def xi_bracket(background: BackgroundState) -> float:
    b = background
    bracket = 1.0 / (b.theta_bar * b.alpha * b.p_theta) - 1.0 / (b.rho_bar * b.c_p)
    if not bracket > 0:
        raise StabilityError("nonlocal source bracket must be positive")
    return bracket


def compute_xi(T: ScalarField, background: BackgroundState, eos: EosSpec,
               scheme: str = "conservative") -> float:
    """Uniform heat source equal to lambda/(1-lambda) * kappa * mean boundary flux."""
    b = background
    kappa = float(eos.transport(b.theta_bar)[2])
    flux = boundary_normal_flux(T, kappa / (b.rho_bar * b.c_p), scheme=scheme)
    return flux / T.grid.volume / xi_bracket(b)


def theta_from_T(T: ScalarField, background: BackgroundState) -> ScalarField:
    return T.with_values(T.values - background.lam * domain_average(T))


def T_from_theta(Theta: ScalarField, background: BackgroundState) -> ScalarField:
    lam = background.lam
    return Theta.with_values(Theta.values + lam / (1.0 - lam) * domain_average(Theta))


@dataclass(frozen=True)
class LimitParams:
    background: BackgroundState
    eos: EosSpec
    grid: GridSpec
    dt: float
    t_final: float = 0.0
    g_vec: tuple = (0.0, 0.0, -1.0)
    beta_slip: float = 0.0
    theta_boundary: object = 0.0
    precond: str = "spectral"

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if self.beta_slip < 0:
            raise ConfigError("beta_slip must be >= 0")
        if not self.kappa > 0:
            raise ConfigError("conductivity at the background temperature must be positive")
        g = self.grid
        limit = DIFFUSIVE_CFL * min(g.dx**2, g.dz**2) * self.background.rho_bar * self.background.c_p / self.kappa
        if self.dt > limit:
            raise CFLError(f"dt = {self.dt} exceeds diffusive limit {limit:.3e}")

    @cached_property
    def kappa(self) -> float:
        return float(self.eos.transport(self.background.theta_bar)[2])

    @cached_property
    def mu(self) -> float:
        return float(self.eos.transport(self.background.theta_bar)[0])

    @cached_property
    def boundary(self) -> dict:
        return boundary_data(self.grid, self.theta_boundary)

    @cached_property
    def potential(self) -> ScalarField:
        return build_potential(self.grid, self.g_vec)

    @cached_property
    def dims(self):
        return (0,) if self.grid.slab else (0, 1)

    @cached_property
    def hspacing(self):
        return self.grid.spacing[:2]

    @cached_property
    def potential_gradient(self):
        """Horizontal gradient of G + |x_h|^2/2 on the 2D velocity faces."""
        g = self.grid
        g1, g2, _ = (float(v) for v in self.g_vec)
        x_face = g.nodes(0)[:, None] * np.ones((1, g.ny))
        grad1 = g1 + x_face
        if g.slab:
            grad2 = np.full((g.nx, 1), g2)
        else:
            grad2 = g2 + g.nodes(1)[None, :] * np.ones((g.nx, 1))
        return grad1, grad2

    def hfaces(self, c):
        g = self.grid
        if c == 0:
            return (g.nx + 1, g.ny)
        return (g.nx, g.ny + (0 if g.slab else 1))

    @cached_property
    def temperature_operator(self):
        g = self.grid
        D = self.kappa / (self.background.rho_bar * self.background.c_p)
        kinds = tuple("dirichlet_cell" if a in g.active else "inert" for a in range(3))
        return SeparableOperator(g.shape, g.spacing, kinds, alpha=1.0, beta=self.dt * D)

    @cached_property
    def momentum_operators(self):
        g = self.grid
        alpha = self.background.rho_bar / self.dt + 2.0 * self.beta_slip
        ops = []
        for c in range(2):
            sl = interior_slice(g, c, 2)
            shape = np.empty(self.hfaces(c))[sl].shape
            ops.append(SeparableOperator(shape, self.hspacing, velocity_kinds(g, c, 2),
                                         alpha=alpha, beta=self.mu))
        return tuple(ops)

    @cached_property
    def pressure_operator(self):
        g = self.grid
        kinds = ("neumann_cell", "inert" if g.slab else "neumann_cell")
        return SeparableOperator(g.horizontal(), self.hspacing, kinds, alpha=0.0, beta=1.0)


@dataclass
class LimitState:
    u_h: tuple
    T_dev: ScalarField
    R_dev: ScalarField
    Pi: np.ndarray
    t: float = 0.0
    xi: float = 0.0

    def copy(self):
        return LimitState(tuple(u.copy() for u in self.u_h),
                          self.T_dev.with_values(self.T_dev.values.copy()),
                          self.R_dev.with_values(self.R_dev.values.copy()),
                          self.Pi.copy(), self.t, self.xi)


# -- horizontal MAC helpers -----------------------------------------------------

def horizontal_divergence(u_h, grid: GridSpec) -> np.ndarray:
    div = np.diff(u_h[0], axis=0) / grid.dx
    if not grid.slab:
        div = div + np.diff(u_h[1], axis=1) / grid.dy
    return div


def horizontal_gradient(p: np.ndarray, grid: GridSpec):
    g1 = np.zeros((grid.nx + 1, grid.ny))
    g1[1:-1] = np.diff(p, axis=0) / grid.dx
    if grid.slab:
        g2 = np.zeros((grid.nx, 1))
    else:
        g2 = np.zeros((grid.nx, grid.ny + 1))
        g2[:, 1:-1] = np.diff(p, axis=1) / grid.dy
    return g1, g2


def project(u_h, params: LimitParams):
    """Discrete Leray projection with zero normal velocity on the walls.

    Returns the projected velocity and ``phi`` with ``u_new = u - grad phi``.
    """
    g = params.grid
    div = horizontal_divergence(u_h, g)
    phi, _ = pcg(params.pressure_operator, -div, precond=params.precond)
    g1, g2 = horizontal_gradient(phi, g)
    return (u_h[0] - g1, u_h[1] - g2), phi


def _h_to_cells(u_h, grid: GridSpec, weights):
    """Cell average of sum_c u_c * w_c with both on the 2D velocity faces."""
    out = 0.5 * (u_h[0][1:] * weights[0][1:] + u_h[0][:-1] * weights[0][:-1])
    if grid.slab:
        out = out + u_h[1] * weights[1]
    else:
        out = out + 0.5 * (u_h[1][:, 1:] * weights[1][:, 1:] + u_h[1][:, :-1] * weights[1][:, :-1])
    return out


def _lift_velocity(u_h, grid: GridSpec):
    """3D carriers (u1, u2, 0) for horizontal advection of cell scalars."""
    nz = grid.nz
    u1 = np.repeat(u_h[0][:, :, None], nz, axis=2)
    u2 = np.repeat(u_h[1][:, :, None], nz, axis=2)
    u3 = np.zeros((grid.nx, grid.ny, nz + 1))
    return u1, u2, u3


def check_advective_cfl(u_h, params: LimitParams):
    g = params.grid
    umax = max(float(np.max(np.abs(u))) for u in u_h)
    h = g.dx if g.slab else min(g.dx, g.dy)
    if params.dt * umax / h > ADVECTIVE_CFL:
        raise CFLError(f"advective CFL {params.dt * umax / h:.3f} exceeds {ADVECTIVE_CFL}")


# -- the three sub-steps --------------------------------------------------------

def temperature_step(state: LimitState, params: LimitParams, xi: float | None = None):
    """Advance T by one step; returns ``(T_new, xi_used)``.

    Advection and forcing are explicit, diffusion implicit with the Dirichlet
    data applied. When ``xi`` is None the uniform source is evaluated from the
    boundary flux of the diffused field and added as a uniform shift, which
    keeps the scheme exactly equivalent to advancing Theta with its nonlocal
    boundary condition lagged by one step.
    """
    b = params.background
    g = params.grid
    dt = params.dt
    T = state.T_dev
    axes = (0,) if g.slab else (0, 1)
    adv = scalar_flux_divergence(T.values, _lift_velocity(state.u_h, g), g.spacing, axes)
    work = _h_to_cells(state.u_h, g, params.potential_gradient)
    forcing = b.theta_bar * b.alpha / b.c_p * work[:, :, None]
    rhs = T.values + dt * (forcing - adv)
    D = params.kappa / (b.rho_bar * b.c_p)
    rhs = rhs + dt * D * dirichlet_lift(g, params.boundary)
    if xi is not None:
        rhs = rhs + dt * xi / (b.rho_bar * b.c_p)
    W, _ = pcg(params.temperature_operator, rhs, precond=params.precond)
    Wf = ScalarField(g, W, "dirichlet", params.boundary)
    if xi is None:
        xi = compute_xi(Wf, b, params.eos)
        W = W + dt * xi / (b.rho_bar * b.c_p)
    return ScalarField(g, W, "dirichlet", params.boundary), xi


def momentum_step(state: LimitState, params: LimitParams):
    """Advance u_h with explicit advection/forcing, implicit viscosity, then project.

    The buoyancy forcing is split into its solenoidal part, which drives the
    flow, and a gradient, which is added to Pi.
    """
    b = params.background
    g = params.grid
    dt = params.dt
    check_advective_cfl(state.u_h, params)
    adv = momentum_flux_divergence(state.u_h, state.u_h, params.hspacing, params.dims)
    Rbar = vertical_average(state.R_dev)
    grad = params.potential_gradient
    force = [np.zeros(params.hfaces(0)), np.zeros(params.hfaces(1))]
    force[0][1:-1] = 0.5 * (Rbar[1:] + Rbar[:-1]) * grad[0][1:-1]
    if g.slab:
        force[1] = Rbar * grad[1]
    else:
        force[1][:, 1:-1] = 0.5 * (Rbar[:, 1:] + Rbar[:, :-1]) * grad[1][:, 1:-1]
    # the gradient part of the forcing is balanced by the pressure directly
    accel, q = project((force[0] / b.rho_bar, force[1] / b.rho_bar), params)
    new = []
    for c in range(2):
        star = state.u_h[c] - dt * adv[c] + dt * accel[c]
        sl = interior_slice(g, c, 2)
        u = np.zeros_like(star)
        u[sl], _ = pcg(params.momentum_operators[c], star[sl] * b.rho_bar / dt, precond=params.precond)
        new.append(u)
    u_new, phi = project(tuple(new), params)
    Pi = b.rho_bar * (phi / dt + q)
    return u_new, Pi - Pi.mean()


def step(state: LimitState, params: LimitParams) -> LimitState:
    T, xi = temperature_step(state, params)
    R = recover_R(T, params.background, params.potential)
    mid = LimitState(state.u_h, T, R, state.Pi, state.t, xi)
    u, Pi = momentum_step(mid, params)
    return LimitState(u, T, R, Pi, state.t + params.dt, xi)


# -- initialisation -------------------------------------------------------------

def _trace_mismatch(T0, params: LimitParams) -> float:
    data = params.boundary
    if callable(T0):
        other = boundary_data(params.grid, T0)
    elif isinstance(T0, ScalarField):
        if any(T0.boundary[f] != "dirichlet" for f in params.grid.faces):
            return float("inf")
        other = T0.data
    else:
        raise ConfigError("T0 must be a callable or a ScalarField carrying boundary data")
    return max(float(np.max(np.abs(other[f] - data[f]))) for f in params.grid.faces)


def init_limit(params: LimitParams, u0h=None, T0=None, trace_tol: float = 1e-10) -> LimitState:
    """Initial state; u0h is projected, T0 must carry the boundary trace of theta_boundary."""
    g = params.grid
    if u0h is None:
        u0h = (np.zeros(params.hfaces(0)), np.zeros(params.hfaces(1)))
    u0h = tuple(np.array(u, dtype=float) for u in u0h)
    for c in range(2):
        if u0h[c].shape != params.hfaces(c):
            raise ConfigError(f"u0h component {c} has shape {u0h[c].shape}, expected {params.hfaces(c)}")
    u0h[0][[0, -1], :] = 0.0
    if not g.slab:
        u0h[1][:, [0, -1]] = 0.0
    u0h, _ = project(u0h, params)
    if T0 is None:
        from .fields import harmonic_extension
        T0 = harmonic_extension(g, params.theta_boundary, precond=params.precond)
    if _trace_mismatch(T0, params) > trace_tol:
        raise ConfigError("T0 does not match the boundary temperature data")
    if callable(T0):
        vals = np.broadcast_to(T0(*g.cell_coords()), g.shape)
        T0 = ScalarField(g, vals, "dirichlet", params.boundary)
    else:
        T0 = ScalarField(g, T0.values, "dirichlet", params.boundary)
    R0 = recover_R(T0, params.background, params.potential)
    return LimitState(u0h, T0, R0, np.zeros(g.horizontal()), 0.0, 0.0)


def run(params: LimitParams, state: LimitState, t_final: float | None = None,
        callback=None, every: int = 1):
    """Step until ``t_final`` (default ``params.t_final``); ``callback(state)`` every ``every`` steps."""
    t_final = params.t_final if t_final is None else t_final
    nsteps = int(round(t_final / params.dt))
    if callback is not None:
        callback(state)
    for n in range(1, nsteps + 1):
        state = step(state, params)
        if callback is not None and n % every == 0:
            callback(state)
    return state


# -- independent Theta-formulation integrator (cross-check) ---------------------

@dataclass
class ThetaState:
    u_h: tuple
    Theta: np.ndarray
    t: float = 0.0


def theta_step(state: ThetaState, params: LimitParams, iterations: int = 1) -> ThetaState:
    """Advance Theta with boundary values theta_B - lambda/(1-lambda) avg(Theta).

    The nonlocal boundary value is resolved by ``iterations`` fixed-point
    sweeps starting from the previous step's average. The velocity is taken
    as given (momentum is shared with the T formulation).
    """
    b = params.background
    g = params.grid
    dt = params.dt
    lam = b.lam
    axes = (0,) if g.slab else (0, 1)
    adv = scalar_flux_divergence(state.Theta, _lift_velocity(state.u_h, g), g.spacing, axes)
    work = _h_to_cells(state.u_h, g, params.potential_gradient)
    base = state.Theta + dt * (b.theta_bar * b.alpha / b.c_p * work[:, :, None] - adv)
    D = params.kappa / (b.rho_bar * b.c_p)
    shift = lam / (1.0 - lam) * float(np.mean(state.Theta))
    Theta = state.Theta
    for _ in range(iterations):
        data = {f: v - shift for f, v in params.boundary.items()}
        rhs = base + dt * D * dirichlet_lift(g, data)
        Theta, _ = pcg(params.temperature_operator, rhs, precond=params.precond)
        shift = lam / (1.0 - lam) * float(np.mean(Theta))
    return ThetaState(state.u_h, Theta, state.t + dt)
