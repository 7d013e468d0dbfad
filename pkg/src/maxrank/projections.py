"""Korn projection ``T u = u - A^{-1}[A u]``, the Helmholtz-type split and
the weak-Korn projection through the W-Laplacian, plus ensemble estimates of
the constants in the associated inequalities."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .domains import DomainMask
from .grid import BoxGrid, GridError, GridField, Scheme, SPECTRAL
from .norms import NormReport, interior_residual, lp_norm, neg_sobolev_norm_2, _pointwise
from .spectral import apply_operator, derivatives, operator_multiplier, solve, MultiplierTable
from .symbols import (AnnihilatorPair, OperatorSpec, SpecError, adjoint, compose, delta_W_true,
                      generalized_laplacian, power)

DEFAULT_SCHEME = Scheme("fd", 4)


class ProjectionError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class ProjectionResult:
    t_u: GridField
    w: GridField
    kernel_residual: NormReport
    norms: dict = field(default_factory=dict)

    def report(self) -> dict:
        return {"kernel_residual": self.kernel_residual.to_dict(),
                "norms": {k: (v.to_dict() if isinstance(v, NormReport) else v)
                          for k, v in self.norms.items()}}


def _stencil_order(scheme: Scheme, q: int | None) -> int:
    if q is not None:
        return q
    return scheme.order if scheme.kind == "fd" else 4


def korn_project(spec: OperatorSpec, u: GridField, au: GridField, mask: DomainMask, *,
                 p: float = 2.0, scheme: Scheme | str = DEFAULT_SCHEME, q: int | None = None,
                 u_box: GridField | None = None, consistency_tol: float = 1e-6) -> ProjectionResult:
    """``t_u = u - w`` on the mask with ``w = A^{-1}[au]``.

    ``u_box``, when given, is a box extension of ``u`` used only to check that
    ``au`` is plausibly ``A u`` (spectral comparison on the mask).
    """
    scheme = Scheme.parse(scheme)
    q = _stencil_order(scheme, q)
    if u.dim != spec.dim_v or au.dim != spec.dim_w:
        raise GridError("u/au dimensions do not match the operator")
    if u_box is not None:
        ref = apply_operator(spec, u_box, SPECTRAL).data * mask.cells
        den = max(np.linalg.norm(ref), np.linalg.norm(au.data * mask.cells), 1e-300)
        if np.linalg.norm(ref - au.data * mask.cells) > consistency_tol * den:
            raise ProjectionError("inconsistent data: au differs from A u on the mask")
    f = au.masked(mask.cells)
    w = solve(spec, f, mask, scheme)
    t_data = (u.data - w.data) * mask.cells
    t_u = GridField(u.grid, t_data)
    kres = interior_residual(spec, t_u, mask, q)
    k = spec.order
    n_u = lp_norm(u, mask, p)
    n_t = lp_norm(t_u, mask, p)
    n_au = lp_norm(f, mask, p)
    n_w = _sobolev_of(w, mask, k, p, scheme)
    norms = {"u_lp": n_u, "t_u_lp": n_t, "au_lp": n_au, "w_sobolev": n_w}
    if n_au.value > 0:
        norms["C_t_bound"] = max(n_t.value - n_u.value, 0.0) / n_au.value
        norms["C_sobolev"] = n_w.value / n_au.value
    return ProjectionResult(t_u, w, kres, norms)


def _sobolev_of(w: GridField, mask: DomainMask, k: int, p: float, scheme: Scheme,
                derivs: dict | None = None) -> NormReport:
    d = derivs if derivs is not None else derivatives(w, k, scheme)
    hn = mask.grid.cell_volume
    total = sum(np.sum(_pointwise(v)[mask.cells] ** p) for a, v in d.items() if sum(a) <= k) * hn
    return NormReport("sobolev", float(p), k, float(total ** (1.0 / p)), mask.count)


def helmholtz_decompose(spec: OperatorSpec, u: GridField, au: GridField, mask: DomainMask, *,
                        scheme: Scheme | str = DEFAULT_SCHEME) -> tuple[GridField, GridField]:
    """``u = v + w`` on the mask with ``v`` A-free and ``w = A^{-1}[au]``."""
    res = korn_project(spec, u, au, mask, scheme=scheme)
    return res.t_u, res.w


def interior_fd_data(spec: OperatorSpec, t: GridField, mask: DomainMask, q: int = 4) -> GridField:
    """Difference evaluation of ``A t`` on interior cells, zero elsewhere."""
    from .norms import fd_apply, stencil_reach
    inner = mask.interior(stencil_reach(spec, q))
    r = fd_apply(spec, np.asarray(t.data) * mask.cells, q, mask.grid.h) * inner
    return GridField(t.grid, r)


# --------------------------------------------------------------- weak Korn

def _weak_korn_operators(pair: AnnihilatorPair):
    if not pair.verified_exact:
        raise SpecError("weak Korn projection needs a verified annihilator pair")
    a = pair.a
    a_star = adjoint(a)
    kq = pair.q.order
    back = a_star if kq == 1 else compose(a_star, power(compose(a, a_star), kq - 1))
    return delta_W_true(pair), back


def delta_w_multiplier(pair: AnnihilatorPair, grid: BoxGrid,
                       scheme: Scheme | str = SPECTRAL) -> MultiplierTable:
    """Discrete multiplier of ``(A A*)^{k_Q} + (Q* Q)^k``."""
    dw, _ = _weak_korn_operators(pair)
    return operator_multiplier(dw, grid, scheme)


def weak_korn_project(pair: AnnihilatorPair, u_box: GridField, mask: DomainMask, *,
                      p: float = 2.0, scheme: Scheme | str = DEFAULT_SCHEME,
                      q: int | None = None) -> ProjectionResult:
    """``Pi u = u - A*(A A*)^{k_Q - 1} S_W[A u]`` restricted to the mask."""
    scheme = Scheme.parse(scheme)
    q = _stencil_order(scheme, q)
    dw, back = _weak_korn_operators(pair)
    a = pair.a
    if u_box.dim != a.dim_v:
        raise GridError("u has the wrong dimension for the pair")
    au = apply_operator(a, u_box, SPECTRAL).masked(mask.cells)
    s = solve(dw, au, mask, scheme)
    z = apply_operator(back, s, scheme)
    t_u = GridField(u_box.grid, (u_box.data - z.data) * mask.cells)
    lap = generalized_laplacian(a)
    kres = interior_residual(lap, t_u, mask, q)
    norms = {
        "u_lp": lp_norm(u_box, mask, p),
        "t_u_lp": lp_norm(t_u, mask, p),
        "au_lp": lp_norm(au, mask, p),
        "w_lp": lp_norm(z, mask, p),
        "w_sobolev": _sobolev_of(z, mask, a.order, p, scheme),
    }
    if p == 2:
        norms["au_neg_k"] = neg_sobolev_norm_2(au, a.order)
    return ProjectionResult(t_u, z, kres, norms)


# ---------------------------------------------------------- ensembles

@dataclass(frozen=True)
class EnsembleConfig:
    seed: int = 0
    samples: int = 64
    band_limit: int = 8


def random_band_limited(grid: BoxGrid, dim: int, band_limit: int, seed: int, index: int = 0) -> GridField:
    """Real field with Gaussian Fourier coefficients on ``|m_j| <= B``.

    The coefficients depend on ``(seed, index, B, dim, n)`` only, so the same
    field is obtained on every grid with ``size > 2B``.
    """
    b = int(band_limit)
    if 2 * b >= grid.size:
        raise GridError(f"band limit {b} not resolved on grid of size {grid.size}")
    rng = np.random.default_rng([int(seed), int(index), b, dim, grid.n])
    shape = (dim,) + (2 * b + 1,) * grid.n
    c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    flip = c[(slice(None),) + (slice(None, None, -1),) * grid.n]
    c = (c + np.conj(flip)) / 2
    idx = np.arange(-b, b + 1) % grid.size
    full = np.zeros((dim,) + grid.sizes, dtype=complex)
    full[np.ix_(range(dim), *([idx] * grid.n))] = c
    vals = np.fft.ifftn(full, axes=tuple(range(1, grid.n + 1))).real * grid.size ** grid.n
    return GridField(grid, vals / np.sqrt(c[0].size))


def measure_exponent(n: int) -> float:
    """A fixed exponent strictly between 1 and n/(n-1)."""
    return 1.5 if n <= 2 else 0.5 * (1.0 + n / (n - 1.0))


@dataclass
class ConstantReport:
    """Per-sample ratios keyed by ``(kind, p, r)``."""

    ratios: dict
    kernel_hits: int
    samples: int
    grid_size: int

    def summary(self, key) -> dict:
        r = np.asarray(self.ratios[key])
        if r.size == 0:
            return {"max": float("nan"), "median": float("nan"), "max_half": float("nan"),
                    "running_change": float("nan")}
        half = r[: max(1, r.size // 2)]
        mx = float(r.max())
        return {"max": mx, "median": float(np.median(r)), "max_half": float(half.max()),
                "running_change": float(abs(mx - half.max()) / mx) if mx > 0 else 0.0}


def empirical_constant(spec: OperatorSpec, grid: BoxGrid, mask: DomainMask, ps=(1.5, 2.0, 3.0),
                       ensemble: EnsembleConfig = EnsembleConfig(), *,
                       scheme: Scheme | str = DEFAULT_SCHEME, measure: bool = True) -> ConstantReport:
    """Ratios ``||u - Tu||_{W^{k,p}} / ||Au||_{L^p}`` and friends over a random ensemble."""
    scheme = Scheme.parse(scheme)
    if ensemble.samples < 1:
        raise ProjectionError("empty ensemble")
    k = spec.order
    qm = measure_exponent(grid.n)
    keys = [("sobolev", float(p), 0) for p in ps]
    keys.append(("neg", 2.0, k))
    if measure:
        keys.append(("measure", qm, 0))
    ratios = {key: [] for key in keys}
    hits = 0
    hn = grid.cell_volume
    for i in range(ensemble.samples):
        u = random_band_limited(grid, spec.dim_v, ensemble.band_limit, ensemble.seed, i)
        au = apply_operator(spec, u, SPECTRAL)
        f = au.masked(mask.cells)
        mag_f = _pointwise(f.data)[mask.cells]
        mag_u = _pointwise(u.data)[mask.cells]
        if np.sqrt(np.sum(mag_f ** 2)) <= 1e-12 * max(np.sqrt(np.sum(mag_u ** 2)), 1e-300):
            hits += 1
            continue
        w = solve(spec, f, mask, scheme)
        d = derivatives(w, k, scheme)
        mags = {a: _pointwise(v)[mask.cells] for a, v in d.items()}
        for p in ps:
            num = (sum(np.sum(m ** p) for m in mags.values()) * hn) ** (1 / p)
            den = (np.sum(mag_f ** p) * hn) ** (1 / p)
            ratios[("sobolev", float(p), 0)].append(num / den)
        l2 = np.sqrt(np.sum(mags[(0,) * grid.n] ** 2) * hn)
        ratios[("neg", 2.0, k)].append(l2 / neg_sobolev_norm_2(f, k).value)
        if measure:
            num = (sum(np.sum(m ** qm) for a, m in mags.items() if sum(a) <= k - 1) * hn) ** (1 / qm)
            ratios[("measure", qm, 0)].append(num / (np.sum(mag_f) * hn))
    return ConstantReport({k_: np.array(v) for k_, v in ratios.items()}, hits,
                          ensemble.samples, grid.size)


def drift(coarse: float, fine: float) -> float:
    return float(abs(fine - coarse) / max(abs(fine), 1e-300))
