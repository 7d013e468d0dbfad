"""Binary field and mask files, bitmap import and operator spec files.

Field file (little-endian)::

    b"MRGF" | u32 version | u32 n | u32 sizes[n] | f64 L | u32 pad | u32 dim | u8 complex
    followed by dim*prod(sizes) float64 values (row-major), or interleaved
    (re, im) pairs when the complex flag is set.

Mask file::

    b"MRMK" | u32 version | u32 n | u32 sizes[n] | f64 L | u32 pad
    followed by the row-major cell bits packed with ``numpy.packbits``.

A mask is accompanied by ``<path>.json`` holding the shape expression.
"""
from __future__ import annotations

import json
import os
import struct

import numpy as np

from .domains import DomainError, DomainMask, make_domain, mask_to_json
from .grid import BoxGrid, GridError, GridField
from .symbols import OperatorSpec, SpecError, spec_from_json, spec_to_json

FIELD_MAGIC = b"MRGF"
MASK_MAGIC = b"MRMK"
VERSION = 1


class FileFormatError(ValueError):
    pass


def _header(magic: bytes, grid: BoxGrid) -> bytes:
    return (magic + struct.pack("<II", VERSION, grid.n) + struct.pack(f"<{grid.n}I", *grid.sizes)
            + struct.pack("<dI", grid.L, grid.pad))


def _read_header(buf: bytes, magic: bytes, what: str) -> tuple[BoxGrid, int]:
    if len(buf) < 12 or buf[:4] != magic:
        raise FileFormatError(f"not a {what} file (bad magic)")
    version, n = struct.unpack_from("<II", buf, 4)
    if version != VERSION:
        raise FileFormatError(f"unsupported {what} file version {version}")
    off = 12
    try:
        sizes = struct.unpack_from(f"<{n}I", buf, off)
        off += 4 * n
        L, pad = struct.unpack_from("<dI", buf, off)
    except struct.error:
        raise FileFormatError(f"truncated {what} header") from None
    off += 12
    if len(set(sizes)) != 1:
        raise FileFormatError("only isotropic grids are supported")
    try:
        grid = BoxGrid(n, sizes[0], L, pad)
    except GridError as exc:
        raise FileFormatError(str(exc)) from None
    return grid, off


def write_field(path: str, u: GridField) -> None:
    cplx = not u.is_real
    head = _header(FIELD_MAGIC, u.grid) + struct.pack("<IB", u.dim, int(cplx))
    body = np.ascontiguousarray(u.data, dtype="<c16" if cplx else "<f8")
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(body.tobytes())


def read_field(path: str) -> GridField:
    with open(path, "rb") as fh:
        buf = fh.read()
    grid, off = _read_header(buf, FIELD_MAGIC, "field")
    try:
        dim, cplx = struct.unpack_from("<IB", buf, off)
    except struct.error:
        raise FileFormatError("truncated field header") from None
    off += 5
    dt = np.dtype("<c16" if cplx else "<f8")
    count = dim * grid.size ** grid.n
    if len(buf) - off != count * dt.itemsize:
        raise FileFormatError(f"field body has {len(buf) - off} bytes, expected {count * dt.itemsize}")
    data = np.frombuffer(buf, dtype=dt, offset=off).reshape((dim,) + grid.sizes)
    return GridField(grid, data)


def write_mask(path: str, mask: DomainMask) -> None:
    with open(path, "wb") as fh:
        fh.write(_header(MASK_MAGIC, mask.grid))
        fh.write(np.packbits(mask.cells.ravel()).tobytes())
    with open(os.fspath(path) + ".json", "w") as fh:
        fh.write(mask_to_json(mask))


def read_mask(path: str) -> DomainMask:
    with open(path, "rb") as fh:
        buf = fh.read()
    grid, off = _read_header(buf, MASK_MAGIC, "mask")
    nn = grid.size ** grid.n
    if len(buf) - off != (nn + 7) // 8:
        raise FileFormatError("mask body has the wrong length")
    bits = np.unpackbits(np.frombuffer(buf, np.uint8, offset=off))[:nn].astype(bool)
    shape = None
    side = os.fspath(path) + ".json"
    if os.path.exists(side):
        with open(side) as fh:
            shape = json.load(fh).get("shape")
    try:
        return DomainMask(grid, bits.reshape(grid.sizes), shape)
    except DomainError as exc:
        raise FileFormatError(str(exc)) from None


def import_bitmap(path: str, shape, grid: BoxGrid, lo=None, hi=None) -> DomainMask:
    """One byte per cell, nonzero = inside, mapped onto ``[lo, hi]`` (default: the unpadded region)."""
    arg = {"path": os.path.abspath(path), "shape": list(shape)}
    if lo is not None:
        arg["lo"] = list(lo)
    if hi is not None:
        arg["hi"] = list(hi)
    return make_domain(grid, {"bitmap": arg})


def load_mask(path_or_shape, grid: BoxGrid, base_dir: str = ".") -> DomainMask:
    """A mask from a binary mask file, a JSON shape file or an inline shape dict."""
    if isinstance(path_or_shape, dict):
        return make_domain(grid, path_or_shape, base_dir=base_dir)
    with open(path_or_shape, "rb") as fh:
        head = fh.read(4)
    if head == MASK_MAGIC:
        m = read_mask(path_or_shape)
        if m.grid != grid:
            raise FileFormatError(f"mask file grid {m.grid} differs from requested {grid}")
        return m
    with open(path_or_shape) as fh:
        text = fh.read()
    try:
        shape = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"{path_or_shape}: JSON parse error at line {exc.lineno}, "
                              f"column {exc.colno}: {exc.msg}") from None
    return make_domain(grid, shape, base_dir=os.path.dirname(os.path.abspath(path_or_shape)))


def read_spec(path: str) -> OperatorSpec:
    with open(path) as fh:
        text = fh.read()
    try:
        return spec_from_json(text, name=os.path.basename(path))
    except SpecError as exc:
        raise SpecError(f"{path}: {exc}") from None


def write_spec(path: str, spec: OperatorSpec) -> None:
    with open(path, "w") as fh:
        fh.write(spec_to_json(spec))
