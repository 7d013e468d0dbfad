"""Periodic box grids, sampled fields and the discrete derivative schemes.

Two ways of realizing ``D_j`` on the box are supported:

* ``spectral``: the exact Fourier multiplier ``i 2 pi m / L`` with
  ``m`` in ``{-s/2, ..., s/2 - 1}``;
* ``fd<q>``: ``D^alpha`` is the product over axes of the order-q central
  stencil for the ``alpha_j``-th derivative, with multiplier
  ``sum_s w_s e^{i s theta} / h^{alpha_j}`` per axis.

Solver outputs are periodic fields plus polynomial pieces. A polynomial piece
may carry a checkerboard modulation ``(-1)^{i_j}`` along some axes; this is
how the difference scheme repairs its extra zero modes at ``theta = pi``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .symbols import MultiIndex, OperatorSpec


class GridError(ValueError):
    """Invalid grid, field shape or grid mismatch."""


@dataclass(frozen=True)
class BoxGrid:
    """Isotropic periodic grid on ``[-L/2, L/2)^n`` with cell-centred samples."""

    n: int
    size: int
    L: float = 1.0
    pad: int = 2

    def __post_init__(self):
        if self.n < 1:
            raise GridError("grid dimension must be >= 1")
        s = self.size
        if s < 4 or s & (s - 1):
            raise GridError(f"grid size must be a power of two >= 4, got {s}")
        if not (isinstance(self.pad, (int, np.integer)) and self.pad >= 2):
            raise GridError(f"padding factor must be an integer >= 2, got {self.pad}")
        if not self.L > 0:
            raise GridError("box length must be positive")

    @property
    def sizes(self) -> tuple[int, ...]:
        return (self.size,) * self.n

    @property
    def h(self) -> float:
        return self.L / self.size

    @property
    def cell_volume(self) -> float:
        return self.h ** self.n

    def coords(self) -> np.ndarray:
        """1-D cell-centre coordinates."""
        return (np.arange(self.size) + 0.5) * self.h - self.L / 2

    def mesh(self, sparse: bool = True) -> list[np.ndarray]:
        x = self.coords()
        return np.meshgrid(*([x] * self.n), indexing="ij", sparse=sparse)

    def frequencies(self) -> np.ndarray:
        """Integer frequencies in FFT order."""
        return np.fft.fftfreq(self.size, 1.0 / self.size).astype(int)

    def unpadded(self) -> np.ndarray:
        x = np.abs(self.coords()) < self.L / (2 * self.pad)
        out = np.ones(self.sizes, dtype=bool)
        for j in range(self.n):
            shape = [1] * self.n
            shape[j] = self.size
            out = out & x.reshape(shape)
        return out

    def parity(self, pattern: Sequence[int]) -> np.ndarray:
        """``(-1)^{sum_j pattern_j i_j}`` on the grid."""
        out = np.ones(self.sizes)
        sign = 1.0 - 2.0 * (np.arange(self.size) % 2)
        for j, p in enumerate(pattern):
            if p:
                shape = [1] * self.n
                shape[j] = self.size
                out = out * sign.reshape(shape)
        return out


# ------------------------------------------------------------------ schemes

def _solve_exact(a: list[list[Fraction]], b: list[Fraction]) -> list[Fraction]:
    m = len(b)
    a = [row[:] for row in a]
    b = b[:]
    for col in range(m):
        piv = next(i for i in range(col, m) if a[i][col] != 0)
        a[col], a[piv] = a[piv], a[col]
        b[col], b[piv] = b[piv], b[col]
        for i in range(m):
            if i != col and a[i][col] != 0:
                f = a[i][col] / a[col][col]
                a[i] = [x - f * y for x, y in zip(a[i], a[col])]
                b[i] -= f * b[col]
    return [b[i] / a[i][i] for i in range(m)]


def stencil_halfwidth(d: int, q: int) -> int:
    """Half-width of the order-q central stencil for the d-th derivative."""
    return 0 if d == 0 else (d + 1) // 2 - 1 + q // 2


@lru_cache(maxsize=64)
def stencil_weights(d: int, q: int) -> tuple[Fraction, ...]:
    """Weights ``w_{-R..R}`` of the order-q central stencil for ``d^d/dx^d`` (unit spacing)."""
    if q < 2 or q % 2:
        raise GridError(f"stencil order must be an even integer >= 2, got {q}")
    if d < 0:
        raise GridError("derivative order must be >= 0")
    if d == 0:
        return (Fraction(1),)
    r = stencil_halfwidth(d, q)
    offs = range(-r, r + 1)
    # sum_s w_s s^t / t! = [t == d], t = 0..2r
    a = [[Fraction(s) ** t / math.factorial(t) for s in offs] for t in range(2 * r + 1)]
    b = [Fraction(1 if t == d else 0) for t in range(2 * r + 1)]
    return tuple(_solve_exact(a, b))


def central_weights(q: int) -> tuple[Fraction, ...]:
    """Weights ``c_1..c_{q/2}`` of the order-q central first derivative (``c_{-r} = -c_r``)."""
    w = stencil_weights(1, q)
    return w[q // 2 + 1:]


@dataclass(frozen=True)
class Scheme:
    kind: str = "spectral"
    order: int = 0

    def __post_init__(self):
        if self.kind not in ("spectral", "fd"):
            raise GridError(f"unknown scheme kind {self.kind!r}")
        if self.kind == "fd":
            stencil_weights(1, self.order)

    @classmethod
    def parse(cls, s: "str | Scheme") -> "Scheme":
        if isinstance(s, Scheme):
            return s
        s = str(s).strip().lower()
        if s == "spectral":
            return cls("spectral", 0)
        if s.startswith("fd") and s[2:].isdigit():
            return cls("fd", int(s[2:]))
        raise GridError(f"unknown scheme {s!r}; use 'spectral' or 'fd<q>'")

    def __str__(self):
        return "spectral" if self.kind == "spectral" else f"fd{self.order}"

    def derivative_symbol(self, grid: BoxGrid, d: int) -> np.ndarray:
        """Multiplier of the 1-D ``d``-th derivative at every frequency ``m``."""
        return _derivative_symbol(self, grid, d)

    def wavenumbers(self, grid: BoxGrid) -> np.ndarray:
        """Real ``xi(m)`` per axis such that ``D_j`` has multiplier ``i xi(m_j)``."""
        return self.derivative_symbol(grid, 1).imag.copy()

    def singular_parities(self) -> list[tuple[int, ...]]:
        """Per-axis parities (0 for theta=0, 1 for theta=pi) where symbols may vanish."""
        return [(0,), (1,)] if self.kind == "fd" else [(0,)]

    def taylor(self, grid: BoxGrid, parity: int, d: int = 1) -> np.ndarray:
        """Coefficients ``b_t`` with ``D^d (mod * g) = mod * sum_t b_t d^t g`` on polynomials."""
        return _taylor(self, grid, parity, d)


@lru_cache(maxsize=256)
def _derivative_symbol(scheme: Scheme, grid: BoxGrid, d: int) -> np.ndarray:
    m = grid.frequencies()
    if scheme.kind == "spectral":
        out = (1j * 2 * np.pi * m / grid.L) ** d
    else:
        theta = 2 * np.pi * m / grid.size
        w = stencil_weights(d, scheme.order)
        r = (len(w) - 1) // 2
        out = sum(float(ws) * np.exp(1j * s * theta) for s, ws in zip(range(-r, r + 1), w))
        out = np.asarray(out, dtype=complex) / grid.h ** d
        # symmetric stencils have real symbols, antisymmetric ones imaginary
        out = out.real + 0j if d % 2 == 0 else 1j * out.imag
        scale = np.abs(out).max(initial=0.0)
        out[np.abs(out) < 1e-14 * scale] = 0.0
    out = np.asarray(out, dtype=complex)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=256)
def _taylor(scheme: Scheme, grid: BoxGrid, parity: int, d: int) -> np.ndarray:
    if scheme.kind == "spectral":
        if parity:
            raise GridError("spectral scheme has no modulated polynomial parts")
        b = np.zeros(d + 1)
        b[d] = 1.0
        return b
    w = stencil_weights(d, scheme.order)
    r = (len(w) - 1) // 2
    tmax = 2 * r + d + 8
    b = np.zeros(tmax + 1)
    h = grid.h
    for s, ws in zip(range(-r, r + 1), w):
        if ws == 0:
            continue
        c = float(ws) / h ** d * ((-1) ** s if parity else 1)
        for t in range(tmax + 1):
            b[t] += c * (s * h) ** t / math.factorial(t)
    b[np.abs(b) < 1e-12 * np.abs(b).max()] = 0.0
    b.setflags(write=False)
    return b


SPECTRAL = Scheme("spectral")
FD4 = Scheme("fd", 4)


# -------------------------------------------------------------- polynomials

@dataclass(frozen=True)
class ModulatedPolynomial:
    """``(-1)^{parity . i} * sum_alpha c_alpha (x - center)^alpha`` with vector coefficients."""

    dim: int
    center: tuple[float, ...]
    coeffs: Mapping[MultiIndex, np.ndarray]
    parity: tuple[int, ...]

    @property
    def n(self) -> int:
        return len(self.center)

    @property
    def degree(self) -> int:
        return max((sum(a) for a in self.coeffs), default=-1)

    def is_zero(self) -> bool:
        return all(not np.any(c) for c in self.coeffs.values())

    def evaluate(self, grid: BoxGrid) -> np.ndarray:
        x = grid.coords()
        dtype = np.result_type(*[np.asarray(c).dtype for c in self.coeffs.values()], float) \
            if self.coeffs else float
        out = np.zeros((self.dim,) + grid.sizes, dtype=dtype)
        powers = []
        for j in range(self.n):
            shape = [1] * grid.n
            shape[j] = grid.size
            dx = (x - self.center[j]).reshape(shape)
            powers.append([dx ** e for e in range(self.degree + 1)])
        for alpha, c in self.coeffs.items():
            mono = np.ones(grid.sizes)
            for j, a in enumerate(alpha):
                if a:
                    mono = mono * powers[j][a]
            out += np.asarray(c).reshape((self.dim,) + (1,) * grid.n) * mono
        if any(self.parity):
            out = out * grid.parity(self.parity)
        return out

    def scaled(self, c) -> "ModulatedPolynomial":
        return ModulatedPolynomial(self.dim, self.center,
                                   {a: c * v for a, v in self.coeffs.items()}, self.parity)

    def apply(self, spec: OperatorSpec, scheme: Scheme, grid: BoxGrid) -> "ModulatedPolynomial":
        """Exact action of the discrete operator on this piece."""
        if spec.dim_v != self.dim:
            raise GridError("operator and polynomial dimensions differ")
        out: dict[MultiIndex, np.ndarray] = {}
        for beta, mat in spec.coeffs.items():
            terms = self.derivative(beta, scheme, grid).coeffs
            for a, v in terms.items():
                out[a] = out.get(a, 0) + mat @ v
        return ModulatedPolynomial(spec.dim_w, self.center, out, self.parity)

    def derivative(self, alpha: MultiIndex, scheme: Scheme, grid: BoxGrid) -> "ModulatedPolynomial":
        terms = dict(self.coeffs)
        for j, aj in enumerate(alpha):
            if aj:
                terms = _diff_series(terms, j, scheme.taylor(grid, self.parity[j], aj))
        return ModulatedPolynomial(self.dim, self.center, terms, self.parity)


def _diff_series(terms: Mapping[MultiIndex, np.ndarray], j: int, b: np.ndarray) -> dict:
    out: dict[MultiIndex, np.ndarray] = {}
    for alpha, v in terms.items():
        for t in range(1, min(len(b) - 1, alpha[j]) + 1):
            if b[t] == 0:
                continue
            new = list(alpha)
            new[j] -= t
            fac = math.factorial(alpha[j]) / math.factorial(alpha[j] - t)
            key = tuple(new)
            out[key] = out.get(key, 0) + b[t] * fac * v
        if b[0] != 0:
            out[alpha] = out.get(alpha, 0) + b[0] * v
    return out


# ------------------------------------------------------------------- fields

@dataclass(frozen=True, eq=False)
class GridField:
    """Vector-valued samples on a box grid; ``data`` has shape ``(dim, *sizes)``.

    ``polys`` records the non-periodic polynomial pieces already included in
    ``data``, so that operators can act on them exactly.
    """

    grid: BoxGrid
    data: np.ndarray
    polys: tuple[ModulatedPolynomial, ...] = field(default=())

    def __post_init__(self):
        d = np.asarray(self.data)
        if d.ndim != self.grid.n + 1 or d.shape[1:] != self.grid.sizes:
            raise GridError(f"field data must have shape (dim, {self.grid.sizes}), got {d.shape}")
        if np.iscomplexobj(d):
            scale_ = max(1.0, float(np.abs(d.real).max(initial=0.0)))
            if float(np.abs(d.imag).max(initial=0.0)) <= 1e-12 * scale_:
                d = d.real
        d = np.array(d, dtype=np.result_type(d.dtype, float), copy=True)
        d.setflags(write=False)
        object.__setattr__(self, "data", d)
        object.__setattr__(self, "polys", tuple(self.polys))

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.data)

    @classmethod
    def zeros(cls, grid: BoxGrid, dim: int) -> "GridField":
        return cls(grid, np.zeros((dim,) + grid.sizes))

    def periodic_part(self) -> np.ndarray:
        out = np.array(self.data, dtype=np.result_type(self.data.dtype, float))
        for p in self.polys:
            out = out - p.evaluate(self.grid)
        return out

    def masked(self, cells: np.ndarray) -> "GridField":
        """Zero outside ``cells``; polynomial bookkeeping is dropped."""
        return GridField(self.grid, self.data * cells)

    def __add__(self, other: "GridField") -> "GridField":
        _same(self, other)
        return GridField(self.grid, self.data + other.data, self.polys + other.polys)

    def __sub__(self, other: "GridField") -> "GridField":
        _same(self, other)
        return GridField(self.grid, self.data - other.data,
                         self.polys + tuple(p.scaled(-1.0) for p in other.polys))

    def scaled(self, c) -> "GridField":
        return GridField(self.grid, c * self.data, tuple(p.scaled(c) for p in self.polys))


def _same(a: GridField, b: GridField):
    if a.grid != b.grid or a.dim != b.dim:
        raise GridError("fields live on different grids or have different dimensions")
