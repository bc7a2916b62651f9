"""Initial and boundary data used by the harness."""
from __future__ import annotations

import ast
import math

import numpy as np

from .errors import ConfigError
from .fields import GridSpec, ScalarField, harmonic_extension


def _bump(x, r):
    """sin^2 bump on the nodes, pinned to exactly zero at the two walls."""
    out = np.sin(np.pi * (x + r) / (2.0 * r)) ** 2
    out[[0, -1]] = 0.0
    return out


def stream_velocity(grid: GridSpec, amplitude: float):
    """Discretely divergence-free u_h from the nodal stream function A s(x1) s(x2).

    In slab mode the stream function is A s(x1) and only u2 = -d psi/dx1 is
    nonzero (a planar shear flow in x2).
    """
    r = grid.r
    xn = grid.nodes(0)
    if grid.slab:
        psi = amplitude * _bump(xn, r)
        u1 = np.zeros((grid.nx + 1, 1))
        u2 = -(np.diff(psi) / grid.dx)[:, None]
        return u1, u2
    yn = grid.nodes(1)
    psi = amplitude * _bump(xn, r)[:, None] * _bump(yn, r)[None, :]
    u1 = np.diff(psi, axis=1) / grid.dy
    u2 = -np.diff(psi, axis=0) / grid.dx
    return u1, u2


_ALLOWED_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "tanh": np.tanh,
                  "sqrt": np.sqrt, "abs": np.abs, "pi": math.pi}
_ALLOWED_NODES = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load,
                  ast.Constant, ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd)


def compile_expression(text: str):
    """Compile a restricted arithmetic expression in x1, x2, x3 into a callable."""
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"invalid boundary expression {text!r}: {exc.msg}") from exc
    names = set(_ALLOWED_FUNCS) | {"x1", "x2", "x3"}
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED_NODES):
            raise ConfigError(f"disallowed syntax {type(node).__name__} in {text!r}")
        if isinstance(node, ast.Name) and node.id not in names:
            raise ConfigError(f"unknown name {node.id!r} in {text!r}")
    code = compile(tree, "<theta_boundary>", "eval")

    def f(x1, x2, x3):
        env = dict(_ALLOWED_FUNCS, x1=x1, x2=x2, x3=x3)
        return eval(code, {"__builtins__": {}}, env) + 0.0 * (x1 + x2 + x3)

    return f


def linear_profile(t_bot: float, t_top: float):
    """Boundary deviation t_bot + x3 (t_top - t_bot)."""

    def f(x1, x2, x3):
        return t_bot + x3 * (t_top - t_bot) + 0.0 * (x1 + x2)

    return f


def initial_temperature(grid: GridSpec, theta_boundary, perturbation: float = 0.0) -> ScalarField:
    """Harmonic extension of the boundary data plus a smooth interior bump.

    The bump sin(pi x3) cos(pi x1/(2r)) [cos(pi x2/(2r))] vanishes on the
    boundary, so the trace is unchanged.
    """
    T = harmonic_extension(grid, theta_boundary)
    if perturbation:
        x1, x2, x3 = grid.cell_coords()
        bump = np.sin(np.pi * x3) * np.cos(np.pi * x1 / (2 * grid.r))
        if not grid.slab:
            bump = bump * np.cos(np.pi * x2 / (2 * grid.r))
        T = T.with_values(T.values + perturbation * np.broadcast_to(bump, grid.shape))
    return T
