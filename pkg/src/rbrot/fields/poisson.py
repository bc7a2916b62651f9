"""Constant-coefficient Helmholtz/Poisson solves on tensor-product grids.

The operator is ``A u = alpha u - beta L u`` where ``L`` is the standard
second-difference Laplacian with a boundary treatment per axis:

* ``dirichlet_cell``: cell-centred unknowns, zero value on the boundary face
  (ghost = -u).
* ``neumann_cell``: cell-centred unknowns, zero normal derivative
  (ghost = u).
* ``dirichlet_node``: node-located unknowns strictly inside the interval,
  zero at both end nodes.
* ``inert``: no derivative along this axis.

Systems are solved by preconditioned conjugate gradients. The default
preconditioner is the exact inverse obtained by fast sine/cosine transforms,
so CG typically terminates after one or two iterations; a Jacobi
preconditioner is provided for testing the iteration itself.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from ..errors import SolverError

AXIS_KINDS = ("dirichlet_cell", "neumann_cell", "dirichlet_node", "inert")
CG_TOL = 1e-10


def eigenvalues(kind: str, n: int, h: float) -> np.ndarray:
    k = np.arange(n)
    if kind == "dirichlet_cell":
        return -4.0 * np.sin(np.pi * (k + 1) / (2 * n)) ** 2 / h**2
    if kind == "neumann_cell":
        return -4.0 * np.sin(np.pi * k / (2 * n)) ** 2 / h**2
    if kind == "dirichlet_node":
        return -4.0 * np.sin(np.pi * (k + 1) / (2 * (n + 1))) ** 2 / h**2
    if kind == "inert":
        return np.zeros(n)
    raise ValueError(f"unknown axis kind {kind!r}")


def _forward(x, kind, axis):
    if kind == "dirichlet_cell":
        return sfft.dst(x, type=2, axis=axis, norm="ortho")
    if kind == "neumann_cell":
        return sfft.dct(x, type=2, axis=axis, norm="ortho")
    if kind == "dirichlet_node":
        return sfft.dst(x, type=1, axis=axis, norm="ortho")
    return x


def _inverse(x, kind, axis):
    if kind == "dirichlet_cell":
        return sfft.idst(x, type=2, axis=axis, norm="ortho")
    if kind == "neumann_cell":
        return sfft.idct(x, type=2, axis=axis, norm="ortho")
    if kind == "dirichlet_node":
        return sfft.idst(x, type=1, axis=axis, norm="ortho")
    return x


def second_difference(u: np.ndarray, h: float, kind: str, axis: int) -> np.ndarray:
    if kind == "inert":
        return np.zeros_like(u)
    first = np.take(u, [0], axis=axis)
    last = np.take(u, [-1], axis=axis)
    if kind == "dirichlet_cell":
        lo, hi = -first, -last
    elif kind == "neumann_cell":
        lo, hi = first, last
    elif kind == "dirichlet_node":
        lo, hi = np.zeros_like(first), np.zeros_like(last)
    else:
        raise ValueError(f"unknown axis kind {kind!r}")
    p = np.concatenate([lo, u, hi], axis=axis)
    n = u.shape[axis]
    a = np.take(p, range(0, n), axis=axis)
    c = np.take(p, range(2, n + 2), axis=axis)
    return (a - 2.0 * u + c) / h**2


@dataclass(frozen=True)
class SeparableOperator:
    """``alpha u - beta L u`` on an array of shape ``shape``."""

    shape: tuple
    spacing: tuple
    kinds: tuple
    alpha: float = 0.0
    beta: float = 1.0

    def __post_init__(self):
        if len(self.shape) != len(self.spacing) or len(self.shape) != len(self.kinds):
            raise ValueError("shape, spacing and kinds must have equal length")
        for k in self.kinds:
            if k not in AXIS_KINDS:
                raise ValueError(f"unknown axis kind {k!r}")
        if self.alpha < 0 or self.beta <= 0:
            raise ValueError("need alpha >= 0 and beta > 0")

    @property
    def singular(self) -> bool:
        return self.alpha == 0.0 and all(k in ("neumann_cell", "inert") for k in self.kinds)

    def laplacian(self, u):
        out = np.zeros_like(u)
        for ax, (h, k) in enumerate(zip(self.spacing, self.kinds)):
            if k != "inert":
                out += second_difference(u, h, k, ax)
        return out

    def apply(self, u):
        return self.alpha * u - self.beta * self.laplacian(u)

    def symbol(self):
        lam = np.zeros(self.shape)
        for ax, (n, h, k) in enumerate(zip(self.shape, self.spacing, self.kinds)):
            shp = [1] * len(self.shape)
            shp[ax] = n
            lam = lam + eigenvalues(k, n, h).reshape(shp)
        sym = self.alpha - self.beta * lam
        if self.singular:
            sym = sym.copy()
            sym.flat[0] = np.inf
        return sym

    def spectral_inverse(self, r):
        x = r
        for ax, k in enumerate(self.kinds):
            x = _forward(x, k, ax)
        x = x / self._symbol
        for ax, k in enumerate(self.kinds):
            x = _inverse(x, k, ax)
        return x

    def diagonal(self):
        d = np.full(self.shape, self.alpha, dtype=float)
        for ax, (n, h, k) in enumerate(zip(self.shape, self.spacing, self.kinds)):
            if k == "inert":
                continue
            row = np.full(n, 2.0 / h**2)
            if k == "dirichlet_cell":
                row[0] = row[-1] = 3.0 / h**2
            elif k == "neumann_cell":
                row[0] = row[-1] = 1.0 / h**2
                if n == 1:
                    row[0] = 0.0
            shp = [1] * len(self.shape)
            shp[ax] = n
            d = d + self.beta * row.reshape(shp)
        return d

    @property
    def _symbol(self):
        sym = self.__dict__.get("_sym")
        if sym is None:
            sym = self.symbol()
            object.__setattr__(self, "_sym", sym)
        return sym


@dataclass
class SolveInfo:
    iterations: int
    residual: float
    converged: bool


def pcg(op: SeparableOperator, b: np.ndarray, tol: float = CG_TOL, maxiter: int | None = None,
        precond: str = "spectral", x0: np.ndarray | None = None):
    """Solve ``op.apply(x) = b`` by preconditioned conjugate gradients.

    For singular (pure Neumann) operators the right-hand side is projected
    onto zero mean and the returned solution has zero mean.

    Returns ``(x, SolveInfo)``; raises SolverError if the relative residual
    ``|r| / |b|`` does not reach ``tol`` within ``maxiter`` iterations
    (default ``10 * sum(shape)``).
    """
    if maxiter is None:
        maxiter = 10 * int(sum(op.shape))
    b = np.asarray(b, dtype=float)
    if op.singular:
        b = b - b.mean()
    if precond == "spectral":
        M = op.spectral_inverse
    elif precond == "jacobi":
        d = op.diagonal()
        d = np.where(d == 0, 1.0, d)
        M = lambda r: r / d  # noqa: E731
    elif precond == "none":
        M = lambda r: r  # noqa: E731
    else:
        raise ValueError(f"unknown preconditioner {precond!r}")

    bnorm = float(np.sqrt(np.sum(b * b)))
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    if bnorm == 0.0:
        return x * 0.0, SolveInfo(0, 0.0, True)
    r = b - op.apply(x)
    if op.singular:
        r -= r.mean()
    z = M(r)
    p = z.copy()
    rz = float(np.sum(r * z))
    res = float(np.sqrt(np.sum(r * r))) / bnorm
    it = 0
    while res > tol:
        if it >= maxiter:
            raise SolverError(f"CG did not converge in {maxiter} iterations (residual {res:.3e})")
        Ap = op.apply(p)
        alpha = rz / float(np.sum(p * Ap))
        x += alpha * p
        r -= alpha * Ap
        if op.singular:
            r -= r.mean()
        z = M(r)
        rz_new = float(np.sum(r * z))
        p = z + (rz_new / rz) * p
        rz = rz_new
        res = float(np.sqrt(np.sum(r * r))) / bnorm
        it += 1
    if op.singular:
        x -= x.mean()
    return x, SolveInfo(it, res, True)
