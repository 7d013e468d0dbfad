"""Discrete norms on masked domains."""
from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .domains import DomainMask
from .grid import GridError, GridField, Scheme, SPECTRAL, stencil_halfwidth, stencil_weights
from .spectral import derivatives, fft_field
from .symbols import OperatorSpec


class NormError(ValueError):
    pass


@dataclass(frozen=True)
class NormReport:
    which: str
    p: float
    order: int
    value: float
    cells_used: int
    dc: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def _values(u) -> np.ndarray:
    return u.data if isinstance(u, GridField) else np.asarray(u)


def _pointwise(a: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(np.abs(a) ** 2, axis=0))


def _lp(mag: np.ndarray, p: float, h_n: float) -> float:
    if p == np.inf:
        return float(mag.max(initial=0.0))
    return float((np.sum(mag ** p) * h_n) ** (1.0 / p))


def lp_norm(u, mask: DomainMask, p: float = 2.0) -> NormReport:
    """``(sum_cells |u|^p h^n)^(1/p)`` with the Euclidean norm on values."""
    if p < 1:
        raise NormError("p must be >= 1")
    a = _values(u)
    if a.shape[1:] != mask.grid.sizes:
        raise GridError("field and mask shapes differ")
    mag = _pointwise(a)[mask.cells]
    return NormReport("lp", float(p), 0, _lp(mag, p, mask.grid.cell_volume), mask.count)


def sobolev_norm(u_box: GridField, mask: DomainMask, k: int, p: float = 2.0,
                 scheme: Scheme | str = SPECTRAL) -> NormReport:
    """``(sum_{|alpha|<=k} ||D^alpha u||^p_{L^p(mask)})^(1/p)`` with box derivatives."""
    if k < 0:
        raise NormError("Sobolev order must be >= 0")
    if u_box.grid != mask.grid:
        raise GridError("field and mask live on different grids")
    hn = mask.grid.cell_volume
    if p == np.inf:
        vals = [_lp(_pointwise(d)[mask.cells], p, hn) for d in derivatives(u_box, k, scheme).values()]
        return NormReport("sobolev", p, k, max(vals), mask.count)
    total = 0.0
    for d in derivatives(u_box, k, scheme).values():
        total += np.sum(_pointwise(d)[mask.cells] ** p) * hn
    return NormReport("sobolev", float(p), k, float(total ** (1.0 / p)), mask.count)


def stencil_reach(spec: OperatorSpec, q: int) -> tuple[tuple[int, ...], ...]:
    """Footprint of the order-q stencils: one box of half-widths per monomial."""
    return tuple(tuple(stencil_halfwidth(a, q) for a in alpha) for alpha in spec.coeffs)


def fd_apply(spec: OperatorSpec, a: np.ndarray, q: int, h: float) -> np.ndarray:
    """Order-q central differences on a box array (periodic wrap, use on interior cells only).

    ``D^alpha`` is the product over axes of the direct stencil for ``d^{alpha_j}/dx_j^{alpha_j}``.
    """
    def dd(x, axis, d):
        w = stencil_weights(d, q)
        r = (len(w) - 1) // 2
        out = np.zeros_like(x)
        for s, ws in zip(range(-r, r + 1), w):
            if ws:
                out += float(ws) * np.roll(x, -s, axis=axis)
        return out / h ** d

    out = np.zeros((spec.dim_w,) + a.shape[1:], dtype=a.dtype)
    for alpha, mat in spec.coeffs.items():
        d = a
        for j, aj in enumerate(alpha):
            if aj:
                d = dd(d, j + 1, aj)
        out += np.einsum("ij,j...->i...", mat, d)
    return out


def refine_cells(cells: np.ndarray, factor: int) -> np.ndarray:
    """Each cell becomes a ``factor^n`` block (same physical region on a finer grid)."""
    out = cells
    for ax in range(cells.ndim):
        out = np.repeat(out, factor, axis=ax)
    return out


def interior_residual(spec: OperatorSpec, u_on_mask, mask: DomainMask, q: int = 4,
                      rhs=None, region: np.ndarray | None = None) -> NormReport:
    """L2 norm over interior cells of the order-q difference evaluation of ``A u (- rhs)``.

    ``region`` optionally restricts the evaluation to a subset of the interior,
    e.g. a fixed physical region when comparing grids.
    """
    a = np.asarray(_values(u_on_mask)) * mask.cells
    if a.shape[0] != spec.dim_v:
        raise GridError("field dimension differs from operator dim_v")
    inner = mask.interior(stencil_reach(spec, q))
    if region is not None:
        if np.any(region & ~inner):
            raise NormError("evaluation region leaves the stencil interior")
        inner = region
    if not inner.any():
        raise NormError(f"empty interior margin for stencil order {q}")
    r = fd_apply(spec, a, q, mask.grid.h)
    if rhs is not None:
        r = r - _values(rhs)
    mag = _pointwise(r)[inner]
    return NormReport("sobolev_interior", 2.0, spec.order,
                      _lp(mag, 2.0, mask.grid.cell_volume), int(inner.sum()))


def neg_sobolev_norm_2(f_box, r: int, scheme: Scheme | str = SPECTRAL, grid=None) -> NormReport:
    """``(sum_{m != 0} |xi(m)|^{-2r} |f_hat(m)|^2 * h^n / N)^(1/2)``; at ``r = 0`` the DC term is kept."""
    scheme = Scheme.parse(scheme)
    if isinstance(f_box, GridField):
        grid, a = f_box.grid, f_box.data
    else:
        a = np.asarray(f_box)
    if r < 0:
        raise NormError("r must be >= 0")
    fh = fft_field(a, grid)
    nn = grid.size ** grid.n
    k1 = scheme.wavenumbers(grid)
    mesh = np.meshgrid(*([k1] * grid.n), indexing="ij")
    kk = np.sqrt(sum(x ** 2 for x in mesh))
    power = np.sum(np.abs(fh) ** 2, axis=0)
    norm_fac = grid.cell_volume / nn
    dc = float(np.sqrt(power[(0,) * grid.n] * norm_fac))
    if r == 0:
        return NormReport("neg_sobolev_2", 2.0, 0, float(np.sqrt(power.sum() * norm_fac)), nn, dc)
    nz = kk > 0
    val = np.sqrt(np.sum(power[nz] * kk[nz] ** (-2.0 * r)) * norm_fac)
    return NormReport("neg_sobolev_2", 2.0, -r, float(val), nn, dc)
