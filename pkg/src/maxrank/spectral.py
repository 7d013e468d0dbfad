"""Pseudo-inverse Fourier multipliers and the masked-domain solver.

The solver zero-extends data from the mask to the periodic box, inverts the
discrete symbol with its pseudo-inverse, and repairs the modes where that
symbol loses rank (the mean, and for difference schemes possibly some
``theta = pi`` corners) with polynomial particular solutions. The result satisfies ``A v = f`` on the whole box for the
chosen discretization, so in particular on the mask.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from .domains import DomainMask
from .grid import BoxGrid, GridError, GridField, ModulatedPolynomial, Scheme, SPECTRAL
from .linalg import DEFAULT_RANK_TOL, pinv, numerical_rank
from .symbols import OperatorSpec, classify, factorial_of, multi_indices


class SolveError(RuntimeError):
    """Solver precondition or consistency failure."""


def _axes(grid: BoxGrid) -> tuple[int, ...]:
    return tuple(range(1, grid.n + 1))


def fft_field(a: np.ndarray, grid: BoxGrid) -> np.ndarray:
    return sfft.fftn(a, axes=_axes(grid))


def ifft_field(a: np.ndarray, grid: BoxGrid) -> np.ndarray:
    return sfft.ifftn(a, axes=_axes(grid))


@dataclass(frozen=True, eq=False)
class MultiplierTable:
    """Per-frequency complex matrices, ``values`` of shape ``(rows, cols, *sizes)`` in FFT order."""

    grid: BoxGrid
    values: np.ndarray
    scheme: Scheme = SPECTRAL
    kind: str = "pinv"

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape[:2]

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @property
    def dc_value(self) -> np.ndarray:
        return self.values[(slice(None), slice(None)) + (0,) * self.grid.n]

    def at(self, m) -> np.ndarray:
        """Matrix at integer frequency ``m`` (negative entries allowed)."""
        idx = tuple(int(x) % self.grid.size for x in m)
        return self.values[(slice(None), slice(None)) + idx]


def lattice_wavevectors(grid: BoxGrid, scheme: Scheme = SPECTRAL) -> np.ndarray:
    """``xi(m)`` for every lattice frequency, shape ``(*sizes, n)``."""
    k1 = scheme.wavenumbers(grid)
    mesh = np.meshgrid(*([k1] * grid.n), indexing="ij")
    return np.stack(mesh, axis=-1)


def _monomial_multiplier(grid: BoxGrid, scheme: Scheme, alpha) -> np.ndarray:
    """``prod_j s_{alpha_j}(m_j)`` on the lattice."""
    out = np.ones(grid.sizes, dtype=complex)
    for j, a in enumerate(alpha):
        if a:
            sh = [1] * grid.n
            sh[j] = grid.size
            out = out * scheme.derivative_symbol(grid, a).reshape(sh)
    return out


@lru_cache(maxsize=32)
def _symbol_table(spec: OperatorSpec, grid: BoxGrid, scheme: Scheme) -> np.ndarray:
    """Discrete symbol ``sum_alpha A_alpha prod_j s_{alpha_j}(m_j)``, shape ``(*sizes, N, M)``."""
    out = np.zeros(grid.sizes + (spec.dim_w, spec.dim_v), dtype=complex)
    for alpha, mat in spec.coeffs.items():
        out += _monomial_multiplier(grid, scheme, alpha)[..., None, None] * mat
    out.setflags(write=False)
    return out


@lru_cache(maxsize=256)
def _expected_rank(spec: OperatorSpec) -> int:
    return classify(spec).rank_max


def singular_modes(grid: BoxGrid, scheme: Scheme = SPECTRAL,
                   spec: OperatorSpec | None = None) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    """``(index, parity)`` of the lattice modes where the discrete symbol loses rank.

    Only the mean and (for difference schemes) the ``theta = pi`` corners can
    be singular. Without ``spec`` every candidate is returned.
    """
    table = _symbol_table(spec, grid, scheme) if spec is not None else None
    want = _expected_rank(spec) if spec is not None else None
    out = []
    for par in itertools.product(*([scheme.singular_parities()] * grid.n)):
        parity = tuple(p[0] for p in par)
        idx = tuple(grid.size // 2 if p else 0 for p in parity)
        if table is not None and any(parity) and int(numerical_rank(table[idx])) >= want:
            continue
        out.append((idx, parity))
    return out


def _operator_values(spec: OperatorSpec, grid: BoxGrid, scheme: Scheme) -> np.ndarray:
    vals = np.moveaxis(_symbol_table(spec, grid, scheme), (-2, -1), (0, 1))
    return vals


def operator_multiplier(spec: OperatorSpec, grid: BoxGrid, scheme: Scheme | str = SPECTRAL) -> MultiplierTable:
    """Discrete operator ``A_hat(m)``; for the spectral scheme ``(2 pi i / L)^k A(m)``."""
    scheme = Scheme.parse(scheme)
    if spec.n != grid.n:
        raise GridError("operator and grid dimensions differ")
    return MultiplierTable(grid, _operator_values(spec, grid, scheme), scheme, "operator")


@lru_cache(maxsize=32)
def _pinv_values(spec: OperatorSpec, grid: BoxGrid, scheme: Scheme, tol: float) -> np.ndarray:
    sym = _symbol_table(spec, grid, scheme)
    inv = pinv(sym, tol)
    ranks = numerical_rank(sym, tol)
    sing = np.zeros(grid.sizes, dtype=bool)
    for idx, _ in singular_modes(grid, scheme, spec):
        sing[idx] = True
    expected = _expected_rank(spec)
    bad = (ranks != expected) & ~sing
    if bad.any():
        first = np.argwhere(bad)[0]
        m = [int(grid.frequencies()[i]) for i in first]
        raise SolveError(f"symbol rank {int(ranks[tuple(first)])} != {expected} at lattice frequency m={m}")
    vals = np.moveaxis(inv, (-2, -1), (0, 1))
    vals.setflags(write=False)
    return vals


def build_pinv_multiplier(spec: OperatorSpec, grid: BoxGrid, scheme: Scheme | str = SPECTRAL,
                          tol: float = DEFAULT_RANK_TOL) -> MultiplierTable:
    """``value(m) = A_hat(m)^+``; zero at the mean, partial at rank-deficient corners."""
    scheme = Scheme.parse(scheme)
    if spec.n != grid.n:
        raise GridError("operator and grid dimensions differ")
    if not classify(spec).is_maximal_rank:
        warnings.warn(f"operator {spec.name or '<spec>'} is not maximal rank; "
                      "the pseudo-inverse multiplier only solves onto the symbol image", stacklevel=2)
    return MultiplierTable(grid, _pinv_values(spec, grid, scheme, tol), scheme, "pinv")


def apply_multiplier(f: GridField, table: MultiplierTable) -> GridField:
    """FFT each component, multiply per frequency, inverse FFT."""
    if f.grid != table.grid:
        raise GridError("field and multiplier live on different grids")
    if f.dim != table.cols:
        raise GridError(f"field dimension {f.dim} != multiplier columns {table.cols}")
    fh = fft_field(f.data, f.grid)
    out = np.einsum("ij...,j...->i...", table.values, fh)
    res = ifft_field(out, f.grid)
    if f.is_real and _conjugate_symmetric(table):
        res = res.real
    return GridField(f.grid, res)


def _conjugate_symmetric(table: MultiplierTable) -> bool:
    v = table.values
    flipped = np.conj(v)
    for ax in range(2, v.ndim):
        flipped = np.roll(np.flip(flipped, axis=ax), 1, axis=ax)
    return bool(np.allclose(v, flipped, atol=1e-12 * max(1.0, np.abs(v).max())))


def apply_operator(spec: OperatorSpec, u: GridField, scheme: Scheme | str = SPECTRAL) -> GridField:
    """``A u`` with the scheme's derivatives; polynomial pieces are differentiated exactly."""
    scheme = Scheme.parse(scheme)
    if u.dim != spec.dim_v:
        raise GridError(f"field dimension {u.dim} != operator dim_v {spec.dim_v}")
    table = operator_multiplier(spec, u.grid, scheme)
    per = u.periodic_part() if u.polys else u.data
    out = ifft_field(np.einsum("ij...,j...->i...", table.values, fft_field(per, u.grid)), u.grid)
    if np.isrealobj(per) and _conjugate_symmetric(table):
        out = out.real
    polys = tuple(p.apply(spec, scheme, u.grid) for p in u.polys)
    for p in polys:
        out = out + p.evaluate(u.grid)
    return GridField(u.grid, out, polys)


def derivatives(u: GridField, k: int, scheme: Scheme | str = SPECTRAL) -> dict:
    """All ``D^alpha u`` with ``|alpha| <= k`` as arrays of shape ``(dim, *sizes)``."""
    scheme = Scheme.parse(scheme)
    grid = u.grid
    per = u.periodic_part() if u.polys else u.data
    fh = fft_field(per, grid)
    out = {}
    for order in range(k + 1):
        for alpha in multi_indices(grid.n, order):
            d = ifft_field(fh * _monomial_multiplier(grid, scheme, alpha), grid)
            # odd powers see the one-sided Nyquist wavenumber of the spectral scheme
            if np.isrealobj(per) and (scheme.kind == "fd" or all(a % 2 == 0 for a in alpha)):
                d = d.real
            for p in u.polys:
                d = d + p.derivative(alpha, scheme, grid).evaluate(grid)
            out[alpha] = d
    return out


def particular_polynomial(spec: OperatorSpec, c, center=None) -> ModulatedPolynomial:
    """Minimum-norm homogeneous degree-k polynomial ``q`` with ``A q = c``."""
    c = np.asarray(c)
    if c.shape != (spec.dim_w,):
        raise SolveError(f"constant must be a vector of length {spec.dim_w}")
    n = spec.n
    center = tuple(float(x) for x in (np.zeros(n) if center is None else center))
    alphas = multi_indices(n, spec.order)
    zero = np.zeros((spec.dim_w, spec.dim_v))
    g = np.concatenate([factorial_of(a) * spec.coeffs.get(a, zero) for a in alphas], axis=1)
    q = pinv(g) @ c
    resid = np.linalg.norm(g @ q - c)
    if resid > 1e-10 * max(np.linalg.norm(c), 1e-300):
        raise SolveError(f"constant is not in the symbol image; residual {resid:.3e}")
    m = spec.dim_v
    coeffs = {a: q[i * m:(i + 1) * m] for i, a in enumerate(alphas) if np.any(q[i * m:(i + 1) * m])}
    return ModulatedPolynomial(m, center, coeffs, (0,) * n)


@lru_cache(maxsize=64)
def _modulated_system(spec: OperatorSpec, grid: BoxGrid, scheme: Scheme, parity: tuple, degree: int):
    """Matrix of the discrete operator on modulated polynomials of degree <= ``degree``."""
    n = spec.n
    basis = [a for d in range(degree + 1) for a in multi_indices(n, d)]
    rows = {a: i for i, a in enumerate(basis)}
    mat = np.zeros((len(basis) * spec.dim_w, len(basis) * spec.dim_v))
    for col, beta in enumerate(basis):
        for e in range(spec.dim_v):
            v = np.zeros(spec.dim_v)
            v[e] = 1.0
            img = ModulatedPolynomial(spec.dim_v, (0.0,) * n, {beta: v}, parity).apply(spec, scheme, grid)
            for gamma, w in img.coeffs.items():
                r = rows[gamma]
                mat[r * spec.dim_w:(r + 1) * spec.dim_w, col * spec.dim_v + e] = np.real(w)
    mat.setflags(write=False)
    return basis, mat, pinv(mat)


def modulated_particular(spec: OperatorSpec, c, center, parity, scheme: Scheme,
                         grid: BoxGrid) -> ModulatedPolynomial:
    """``(-1)^{parity . i} q(x - center)`` whose discrete image is the constant ``c``
    times the same modulation; ``q`` has minimum coefficient norm and the
    lowest degree (from ``k`` to ``k + 2``) that admits a solution."""
    c = np.asarray(c)
    if not any(parity):
        # at theta = 0 every stencil differentiates degree-k polynomials exactly
        return particular_polynomial(spec, c, center)
    last = None
    for degree in range(spec.order, spec.order + 3):
        basis, mat, mp = _modulated_system(spec, grid, scheme, tuple(parity), degree)
        rhs = np.zeros(mat.shape[0], dtype=c.dtype)
        rhs[:spec.dim_w] = c
        q = mp @ rhs
        last = np.linalg.norm(mat @ q - rhs)
        if last <= 1e-10 * max(np.linalg.norm(c), 1e-300):
            m = spec.dim_v
            coeffs = {a: q[i * m:(i + 1) * m] for i, a in enumerate(basis)
                      if np.any(q[i * m:(i + 1) * m])}
            return ModulatedPolynomial(m, tuple(float(x) for x in center), coeffs, tuple(parity))
    raise SolveError(f"no polynomial particular solution at parity {parity}; residual {last:.3e}")


@lru_cache(maxsize=256)
def _is_maximal(spec: OperatorSpec) -> bool:
    return classify(spec).is_maximal_rank


def solve(spec: OperatorSpec, f: GridField, mask: DomainMask, scheme: Scheme | str = SPECTRAL,
          tol: float = DEFAULT_RANK_TOL) -> GridField:
    """Solve ``A v = f~`` where ``f~`` is ``f`` on the mask and zero elsewhere.

    Returns ``v`` on the whole box, including its polynomial pieces.
    """
    scheme = Scheme.parse(scheme)
    grid = f.grid
    if mask.grid != grid:
        raise GridError("mask and field live on different grids")
    if f.dim != spec.dim_w:
        raise GridError(f"data dimension {f.dim} != operator dim_w {spec.dim_w}")
    if not _is_maximal(spec):
        raise SolveError(f"operator {spec.name or '<spec>'} is not maximal rank")
    if np.any(mask.cells & ~grid.unpadded()):
        raise SolveError("mask lies outside the unpadded region")
    table = build_pinv_multiplier(spec, grid, scheme, tol)
    ft = f.data * mask.cells
    fh = fft_field(ft, grid)
    center = mask.centroid()
    polys = []
    nn = grid.size ** grid.n
    sym = _symbol_table(spec, grid, scheme)
    for idx, parity in singular_modes(grid, scheme, spec):
        sl = (slice(None),) + idx
        cbar = fh[sl] / nn
        if f.is_real:
            cbar = cbar.real
        # the part inside the image of the corner symbol is inverted directly
        inside = sym[idx] @ (pinv(sym[idx]) @ cbar)
        fh[sl] = inside * nn
        rest = cbar - inside
        if np.abs(rest).max() <= 1e-14 * max(np.abs(cbar).max(), 1e-300):
            continue
        polys.append(modulated_particular(spec, rest, center, parity, scheme, grid))
    out = ifft_field(np.einsum("ij...,j...->i...", table.values, fh), grid)
    if f.is_real and _conjugate_symmetric(table):
        out = out.real
    for p in polys:
        out = out + p.evaluate(grid)
    return GridField(grid, out, tuple(polys))


def solve_residual(spec: OperatorSpec, v: GridField, f: GridField, mask: DomainMask,
                   scheme: Scheme | str = SPECTRAL) -> float:
    """``||A v - f||_2 / ||f||_2`` over the mask cells."""
    av = apply_operator(spec, v, scheme)
    diff = (av.data - f.data) * mask.cells
    den = np.sqrt(np.sum(np.abs(f.data * mask.cells) ** 2))
    num = np.sqrt(np.sum(np.abs(diff) ** 2))
    return float(num / den) if den > 0 else float(num)


def multiplier_norms(spec: OperatorSpec, grid: BoxGrid, scheme: Scheme | str = SPECTRAL) -> dict:
    """Sup of ``||A_hat P||`` and of ``|m|^k ||P(m)||`` over nonzero lattice modes."""
    scheme = Scheme.parse(scheme)
    p = build_pinv_multiplier(spec, grid, scheme).values
    a = operator_multiplier(spec, grid, scheme).values
    pm = np.moveaxis(p, (0, 1), (-2, -1))
    am = np.moveaxis(a, (0, 1), (-2, -1))
    prod_norm = np.linalg.norm(am @ pm, ord=2, axis=(-2, -1))
    p_norm = np.linalg.norm(pm, ord=2, axis=(-2, -1))
    m = grid.frequencies()
    mm = np.sqrt(sum(x ** 2 for x in np.meshgrid(*([m] * grid.n), indexing="ij")))
    nz = mm > 0
    for idx, _ in singular_modes(grid, scheme, spec):
        nz[idx] = False
    return {
        "sup_A_pinv": float(prod_norm[nz].max()),
        "sup_mk_pinv": float((mm[nz] ** spec.order * p_norm[nz]).max()),
    }
