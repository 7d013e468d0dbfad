"""Cell masks for arbitrary domains inside the unpadded part of the box.

Shapes are nested JSON-style expressions in physical coordinates:

    {"ball": {"center": [0, 0], "radius": 0.15}}
    {"box": {"lo": [-0.2, -0.2], "hi": [0.2, 0.2]}}
    {"halfspace": {"normal": [1, 0], "offset": 0.0}}      # x . normal <= offset
    {"bitmap": {"path": "blob.u8", "shape": [32, 32], "lo": [...], "hi": [...]}}
    {"union": [...]}, {"intersection": [...]}, {"difference": [a, b]}, {"complement": a}

A cell belongs to the mask when its centre lies in the shape.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .grid import BoxGrid

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")


class DomainError(ValueError):
    """Empty mask, mask in the padding, or malformed shape expression."""


@dataclass(frozen=True, eq=False)
class DomainMask:
    grid: BoxGrid
    cells: np.ndarray
    shape_expr: dict | None = None
    _margins: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        c = np.array(self.cells, dtype=bool)
        if c.shape != self.grid.sizes:
            raise DomainError(f"mask shape {c.shape} does not match grid {self.grid.sizes}")
        if not c.any():
            raise DomainError("mask is empty")
        if np.any(c & ~self.grid.unpadded()):
            raise DomainError("mask touches the padding region")
        c.setflags(write=False)
        object.__setattr__(self, "cells", c)

    @property
    def count(self) -> int:
        return int(self.cells.sum())

    @property
    def area(self) -> float:
        return self.count * self.grid.cell_volume

    def centroid(self) -> np.ndarray:
        x = self.grid.coords()
        idx = np.nonzero(self.cells)
        return np.array([x[i].mean() for i in idx])

    def components(self) -> int:
        _, k = ndimage.label(self.cells)
        return int(k)

    def interior(self, reach) -> np.ndarray:
        """Cells whose stencil footprint lies in the mask.

        ``reach`` is an int (cube of that half-width), a tuple of per-axis
        half-widths (a box), or a tuple of such tuples (a union of boxes).
        """
        if isinstance(reach, (int, np.integer)):
            reach = (int(reach),) * self.grid.n
        boxes = reach if reach and isinstance(reach[0], tuple) else (reach,)
        boxes = tuple(sorted({tuple(int(r) for r in b) for b in boxes}))
        if boxes not in self._margins:
            width = [max(b[j] for b in boxes) for j in range(self.grid.n)]
            if max(width) == 0:
                out = self.cells
            else:
                st = np.zeros(tuple(2 * w + 1 for w in width), dtype=bool)
                for b in boxes:
                    st[tuple(slice(w - r, w + r + 1) for w, r in zip(width, b))] = True
                out = ndimage.binary_erosion(self.cells, structure=st, border_value=0)
            out = np.asarray(out)
            out.setflags(write=False)
            self._margins[boxes] = out
        return self._margins[boxes]


def _coords(grid: BoxGrid) -> list[np.ndarray]:
    return grid.mesh(sparse=True)


def _eval(expr, grid: BoxGrid, base_dir: str) -> np.ndarray:
    if not isinstance(expr, dict) or len(expr) != 1:
        raise DomainError(f"shape expression must be a one-key object, got {expr!r}")
    (kind, arg), = expr.items()
    X = _coords(grid)
    n = grid.n
    full = np.zeros(grid.sizes, dtype=bool)
    if kind == "ball":
        c = np.asarray(arg["center"], float)
        if c.shape != (n,):
            raise DomainError("ball centre has wrong dimension")
        r2 = sum((X[j] - c[j]) ** 2 for j in range(n))
        return full | (r2 < float(arg["radius"]) ** 2)
    if kind == "box":
        lo, hi = np.asarray(arg["lo"], float), np.asarray(arg["hi"], float)
        if lo.shape != (n,) or hi.shape != (n,):
            raise DomainError("box bounds have wrong dimension")
        out = ~full
        for j in range(n):
            out = out & (X[j] > lo[j]) & (X[j] < hi[j])
        return out
    if kind == "halfspace":
        nv = np.asarray(arg["normal"], float)
        if nv.shape != (n,):
            raise DomainError("half-space normal has wrong dimension")
        return full | (sum(X[j] * nv[j] for j in range(n)) <= float(arg.get("offset", 0.0)))
    if kind == "bitmap":
        return _bitmap(arg, grid, base_dir)
    if kind == "union":
        out = full.copy()
        for e in arg:
            out |= _eval(e, grid, base_dir)
        return out
    if kind == "intersection":
        out = ~full
        for e in arg:
            out &= _eval(e, grid, base_dir)
        return out
    if kind == "difference":
        if len(arg) != 2:
            raise DomainError("difference takes exactly two shapes")
        return _eval(arg[0], grid, base_dir) & ~_eval(arg[1], grid, base_dir)
    if kind == "complement":
        return ~_eval(arg, grid, base_dir)
    raise DomainError(f"unknown shape primitive {kind!r}")


def _bitmap(arg: dict, grid: BoxGrid, base_dir: str) -> np.ndarray:
    shape = tuple(int(s) for s in arg["shape"])
    if len(shape) != grid.n:
        raise DomainError("bitmap dimension differs from grid dimension")
    if "data" in arg:
        raw = np.asarray(arg["data"], dtype=np.uint8).ravel()
    else:
        path = arg["path"]
        if not os.path.isabs(path):
            cand = os.path.join(base_dir, path)
            path = cand if os.path.exists(cand) else os.path.join(DATA_DIR, path)
        raw = np.fromfile(path, dtype=np.uint8)
    if raw.size != int(np.prod(shape)):
        raise DomainError(f"bitmap has {raw.size} bytes, expected {int(np.prod(shape))}")
    bits = raw.reshape(shape) != 0
    half = grid.L / (2 * grid.pad)
    lo = np.asarray(arg.get("lo", [-half] * grid.n), float)
    hi = np.asarray(arg.get("hi", [half] * grid.n), float)
    x = grid.coords()
    idx = []
    inside = np.ones(grid.sizes, dtype=bool)
    for j in range(grid.n):
        t = np.floor((x - lo[j]) / (hi[j] - lo[j]) * shape[j]).astype(int)
        ok = (t >= 0) & (t < shape[j])
        sh = [1] * grid.n
        sh[j] = grid.size
        inside = inside & ok.reshape(sh)
        idx.append(np.clip(t, 0, shape[j] - 1).reshape(sh))
    return inside & bits[tuple(idx)]


def make_domain(grid: BoxGrid, shape: dict, clip: bool = False, base_dir: str = ".") -> DomainMask:
    """Rasterize a shape expression by cell centres."""
    cells = _eval(shape, grid, base_dir)
    inside = grid.unpadded()
    if clip:
        cells = cells & inside
    elif np.any(cells & ~inside):
        raise DomainError("shape extends into the padding region (pass clip=True to clip it)")
    if not cells.any():
        raise DomainError("mask is empty")
    return DomainMask(grid, cells, shape)


# ----------------------------------------------------------- mask families

MASK_FAMILIES = ("disk", "square", "two_ball", "blob")


def family_shape(name: str, n: int = 2, L: float = 1.0) -> dict:
    """Standard test domains, in units of the box length."""
    z = [0.0] * n
    if name == "disk":
        return {"ball": {"center": z, "radius": 0.15 * L}}
    if name == "square":
        return {"box": {"lo": [-0.2 * L] * n, "hi": [0.2 * L] * n}}
    if name == "full":
        return {"box": {"lo": [-0.25 * L] * n, "hi": [0.25 * L] * n}}
    if name == "two_ball":
        c1 = [-0.12 * L] + [0.0] * (n - 1)
        c2 = [0.12 * L] + [0.0] * (n - 1)
        return {"union": [{"ball": {"center": c1, "radius": 0.08 * L}},
                          {"ball": {"center": c2, "radius": 0.08 * L}}]}
    if name == "annulus":
        return {"difference": [{"box": {"lo": [-0.2 * L] * n, "hi": [0.2 * L] * n}},
                               {"ball": {"center": z, "radius": 0.1 * L}}]}
    if name == "blob":
        if n != 2:
            raise DomainError("the blob bitmap is two-dimensional")
        return {"bitmap": {"path": "blob.u8", "shape": [BLOB_SIZE, BLOB_SIZE],
                           "lo": [-0.25 * L, -0.25 * L], "hi": [0.25 * L, 0.25 * L]}}
    raise DomainError(f"unknown mask family {name!r}")


def family_mask(name: str, grid: BoxGrid) -> DomainMask:
    return make_domain(grid, family_shape(name, grid.n, grid.L))


BLOB_SIZE = 32


def make_blob_bitmap(size: int = BLOB_SIZE, seed: int = 7) -> np.ndarray:
    """Irregular blob with a hole and a thin appendage, as a 0/1 uint8 array."""
    rng = np.random.default_rng(seed)
    t = (np.arange(size) + 0.5) / size * 2 - 1
    x, y = np.meshgrid(t, t, indexing="ij")
    f = np.zeros_like(x)
    for _ in range(7):
        c = rng.uniform(-0.45, 0.45, 2)
        w = rng.uniform(0.18, 0.32)
        f += np.exp(-((x - c[0]) ** 2 + (y - c[1]) ** 2) / (2 * w * w))
    bits = f > 0.9 * np.median(f[f > 0.3]) if np.any(f > 0.3) else f > 0.5
    bits &= (x ** 2 + y ** 2) > 0.02
    bits &= (np.abs(x) < 0.85) & (np.abs(y) < 0.85)
    return bits.astype(np.uint8)


def mask_to_json(mask: DomainMask) -> str:
    return json.dumps({"n": mask.grid.n, "sizes": list(mask.grid.sizes), "L": mask.grid.L,
                       "pad": mask.grid.pad, "shape": mask.shape_expr}, indent=1)
