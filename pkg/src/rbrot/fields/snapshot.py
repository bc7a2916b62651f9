"""RBROT1 binary snapshots and CSV export of 2D slices.

Layout (all little-endian)::

    b"RBROT1\\0"  u32 nx  u32 ny  u32 nz  u32 nfields
    repeated nfields times: 16-byte NUL-padded ASCII name, float64 values

Values are written x-fastest (Fortran order). Names carry the staggering
location after an ``@``: ``c`` cells, ``x``/``y``/``z`` faces of that axis,
``ch`` horizontal cells and ``xh``/``yh`` horizontal faces; the array shape
follows from the location and the grid counts (``ny == 1`` means slab).
"""
from __future__ import annotations

import struct

import numpy as np

MAGIC = b"RBROT1\0"
NAME_LEN = 16
LOCATIONS = ("c", "x", "y", "z", "ch", "xh", "yh")


def location_shape(loc: str, nx: int, ny: int, nz: int):
    slab = ny == 1
    ey = 0 if slab else 1
    shapes = {
        "c": (nx, ny, nz),
        "x": (nx + 1, ny, nz),
        "y": (nx, ny + ey, nz),
        "z": (nx, ny, nz + 1),
        "ch": (nx, ny),
        "xh": (nx + 1, ny),
        "yh": (nx, ny + ey),
    }
    return shapes[loc]


def write_snapshot(path, shape, fields: dict) -> None:
    """Write ``{"name@loc": array}`` to ``path``."""
    nx, ny, nz = shape
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<4I", nx, ny, nz, len(fields)))
        for key, arr in fields.items():
            name, _, loc = key.partition("@")
            if loc not in LOCATIONS:
                raise ValueError(f"field {key!r} needs a location suffix from {LOCATIONS}")
            raw = key.encode("ascii")
            if len(raw) > NAME_LEN:
                raise ValueError(f"field name {key!r} longer than {NAME_LEN} bytes")
            arr = np.asarray(arr, dtype="<f8")
            if arr.shape != location_shape(loc, nx, ny, nz):
                raise ValueError(f"field {key!r} has shape {arr.shape}")
            fh.write(raw.ljust(NAME_LEN, b"\0"))
            fh.write(arr.tobytes(order="F"))


def read_snapshot(path):
    """Return ``(shape, {name@loc: array})``."""
    with open(path, "rb") as fh:
        buf = fh.read()
    if not buf.startswith(MAGIC):
        raise ValueError("not an RBROT1 snapshot")
    pos = len(MAGIC)
    nx, ny, nz, nf = struct.unpack_from("<4I", buf, pos)
    pos += 16
    out = {}
    for _ in range(nf):
        key = buf[pos:pos + NAME_LEN].rstrip(b"\0").decode("ascii")
        pos += NAME_LEN
        shp = location_shape(key.partition("@")[2], nx, ny, nz)
        n = int(np.prod(shp))
        arr = np.frombuffer(buf, dtype="<f8", count=n, offset=pos).reshape(shp, order="F")
        out[key] = arr.copy()
        pos += 8 * n
    if pos != len(buf):
        raise ValueError("trailing bytes in snapshot")
    return (nx, ny, nz), out


def write_slice_csv(path, values, x, y, names=("x", "y", "value")) -> None:
    """Write a 2D array as ``x,y,value`` rows."""
    values = np.asarray(values)
    X, Y = np.meshgrid(x, y, indexing="ij")
    rows = np.column_stack([X.ravel(), Y.ravel(), values.ravel()])
    np.savetxt(path, rows, delimiter=",", header=",".join(names), comments="", fmt="%.17g")
