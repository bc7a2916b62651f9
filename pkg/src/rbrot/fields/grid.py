"""Cell-centred structured grid over [-r, r]^2 x (0, 1)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError

GEOMETRIES = ("box", "slab")
FACES = ("x-", "x+", "y-", "y+", "z-", "z+")
SLAB_DEPTH = 1.0


@dataclass(frozen=True)
class GridSpec:
    """Grid geometry.

    In ``slab`` mode fields are invariant in x2: ``ny`` must be 1, the y
    direction has unit depth and carries no derivatives, and all three
    velocity components are still stored.
    """

    nx: int
    ny: int
    nz: int
    r: float = 1.0
    geometry: str = "box"

    def __post_init__(self):
        if self.geometry not in GEOMETRIES:
            raise ConfigError(f"geometry must be one of {GEOMETRIES}")
        if self.nx < 4 or self.nz < 4:
            raise ConfigError("nx and nz must be >= 4")
        if self.geometry == "slab" and self.ny != 1:
            raise ConfigError("slab geometry requires ny = 1")
        if self.geometry == "box" and self.ny < 4:
            raise ConfigError("box geometry requires ny >= 4")
        if not self.r > 0:
            raise ConfigError("r must be positive")

    @property
    def slab(self) -> bool:
        return self.geometry == "slab"

    @property
    def shape(self):
        return (self.nx, self.ny, self.nz)

    @property
    def dx(self) -> float:
        return 2.0 * self.r / self.nx

    @property
    def dy(self) -> float:
        return SLAB_DEPTH if self.slab else 2.0 * self.r / self.ny

    @property
    def dz(self) -> float:
        return 1.0 / self.nz

    @property
    def spacing(self):
        return (self.dx, self.dy, self.dz)

    @property
    def active(self):
        """Axes that carry derivatives."""
        return (0, 2) if self.slab else (0, 1, 2)

    @property
    def faces(self):
        return ("x-", "x+", "z-", "z+") if self.slab else FACES

    @property
    def cell_volume(self) -> float:
        return self.dx * self.dy * self.dz

    @property
    def volume(self) -> float:
        return self.cell_volume * self.nx * self.ny * self.nz

    def horizontal(self):
        """Shape of 2D horizontal cell arrays."""
        return (self.nx, self.ny)

    def face_shape(self, axis: int):
        """Shape of the array holding normal components on faces of ``axis``."""
        s = list(self.shape)
        if axis in self.active:
            s[axis] += 1
        return tuple(s)

    def centers(self, axis: int) -> np.ndarray:
        if axis == 1 and self.slab:
            return np.zeros(1)
        lo = 0.0 if axis == 2 else -self.r
        n = self.shape[axis]
        h = self.spacing[axis]
        return lo + h * (np.arange(n) + 0.5)

    def nodes(self, axis: int) -> np.ndarray:
        if axis == 1 and self.slab:
            return np.zeros(1)
        lo = 0.0 if axis == 2 else -self.r
        n = self.shape[axis]
        return lo + self.spacing[axis] * np.arange(n + 1)

    def cell_coords(self):
        """Broadcastable (x1, x2, x3) cell-centre coordinates."""
        x = self.centers(0)[:, None, None]
        y = self.centers(1)[None, :, None]
        z = self.centers(2)[None, None, :]
        return x, y, z

    def face_coords(self, axis: int):
        """Broadcastable coordinates of the faces normal to ``axis``."""
        c = [self.centers(a) for a in range(3)]
        if axis in self.active:
            c[axis] = self.nodes(axis)
        return c[0][:, None, None], c[1][None, :, None], c[2][None, None, :]

    def boundary_coords(self, face: str):
        """Coordinates of face centres on a boundary face, as full arrays.

        The array shape is the cell shape with the normal axis removed.
        """
        axis = "xyz".index(face[0])
        lo = face[1] == "-"
        pts = []
        for a in range(3):
            if a == axis:
                pts.append(np.array([self.nodes(a)[0 if lo else -1]]))
            else:
                pts.append(self.centers(a))
        X = np.meshgrid(*pts, indexing="ij")
        return tuple(np.take(x, 0, axis=axis) for x in X)

    def face_area(self, face: str) -> float:
        axis = "xyz".index(face[0])
        h = list(self.spacing)
        n = list(self.shape)
        area = 1.0
        for a in range(3):
            if a != axis:
                area *= h[a] * n[a]
        return area
