"""Principal symbols of homogeneous constant-coefficient operators.

An operator ``A u = sum_{|alpha|=k} A_alpha D^alpha u`` is stored through its
coefficient matrices. Its principal symbol is ``A(xi) = sum A_alpha xi^alpha``;
the Fourier factor ``i^k`` is never folded into the coefficients, the spectral
layer applies it.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping

import numpy as np
from scipy.stats import qmc, norm as normal_dist

from .linalg import DEFAULT_RANK_TOL, null_basis, numerical_rank

MultiIndex = tuple[int, ...]


class SpecError(ValueError):
    """Invalid operator specification or spec file."""


def multi_indices(n: int, k: int) -> list[MultiIndex]:
    """All multi-indices of length ``n`` and order ``k``, lexicographically descending."""
    if n < 1 or k < 0:
        raise ValueError("need n >= 1 and k >= 0")
    if n == 1:
        return [(k,)]
    out = []
    for first in range(k, -1, -1):
        for rest in multi_indices(n - 1, k - first):
            out.append((first,) + rest)
    return out


def factorial_of(alpha: Iterable[int]) -> int:
    return math.prod(math.factorial(a) for a in alpha)


def monomials(xi: np.ndarray, alpha: MultiIndex) -> np.ndarray:
    """``xi^alpha`` along the last axis of ``xi``."""
    out = np.ones(xi.shape[:-1], dtype=xi.dtype)
    for j, a in enumerate(alpha):
        if a:
            out = out * xi[..., j] ** a
    return out


@dataclass(frozen=True, eq=False)
class OperatorSpec:
    """Homogeneous order-k operator from ``R^dim_v`` to ``R^dim_w`` in ``n`` variables."""

    n: int
    dim_v: int
    dim_w: int
    order: int
    coeffs: Mapping[MultiIndex, np.ndarray]
    name: str = ""
    allow_zero: bool = field(default=False, repr=False)

    def __post_init__(self):
        if self.n < 1 or self.dim_v < 1 or self.dim_w < 1:
            raise SpecError("n, dim_v and dim_w must be positive")
        if self.order < 1:
            raise SpecError("order must be at least 1")
        clean: dict[MultiIndex, np.ndarray] = {}
        for alpha, mat in self.coeffs.items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != self.n or min(alpha) < 0:
                raise SpecError(f"bad multi-index {alpha} for n={self.n}")
            if sum(alpha) != self.order:
                raise SpecError(f"multi-index {alpha} has order {sum(alpha)}, expected {self.order}")
            m = np.array(mat, dtype=float)
            if m.shape != (self.dim_w, self.dim_v):
                raise SpecError(f"coefficient at {alpha} must have shape ({self.dim_w}, {self.dim_v})")
            if alpha in clean:
                m = m + clean[alpha]
            clean[alpha] = m
        clean = {a: m for a, m in sorted(clean.items(), reverse=True) if np.any(m != 0)}
        if not clean and not self.allow_zero:
            raise SpecError("operator has no nonzero coefficient")
        for m in clean.values():
            m.setflags(write=False)
        object.__setattr__(self, "coeffs", clean)

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    def key(self) -> str:
        return json.dumps(spec_to_dict(self), sort_keys=True)

    def __eq__(self, other):
        if not isinstance(other, OperatorSpec):
            return NotImplemented
        return self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def allclose(self, other: "OperatorSpec", atol: float = 1e-12) -> bool:
        if (self.n, self.dim_v, self.dim_w, self.order) != (other.n, other.dim_v, other.dim_w, other.order):
            return False
        zero = np.zeros((self.dim_w, self.dim_v))
        keys = set(self.coeffs) | set(other.coeffs)
        return all(np.allclose(self.coeffs.get(a, zero), other.coeffs.get(a, zero), atol=atol)
                   for a in keys)


def _new(n, dim_v, dim_w, order, coeffs, name="", allow_zero=True) -> OperatorSpec:
    return OperatorSpec(n, dim_v, dim_w, order, coeffs, name=name, allow_zero=allow_zero)


def eval_symbol(spec: OperatorSpec, xi) -> np.ndarray:
    """Evaluate ``A(xi)``; ``xi`` may carry leading batch axes, the last has length n."""
    xi = np.asarray(xi)
    if xi.shape[-1:] != (spec.n,):
        raise SpecError(f"xi must have trailing length {spec.n}, got shape {xi.shape}")
    dtype = np.result_type(xi.dtype, float)
    out = np.zeros(xi.shape[:-1] + (spec.dim_w, spec.dim_v), dtype=dtype)
    for alpha, mat in spec.coeffs.items():
        out += monomials(xi, alpha)[..., None, None] * mat
    return out


def scale(spec: OperatorSpec, c: float) -> OperatorSpec:
    return _new(spec.n, spec.dim_v, spec.dim_w, spec.order,
                {a: c * m for a, m in spec.coeffs.items()}, spec.name)


def transpose(spec: OperatorSpec) -> OperatorSpec:
    """Coefficient-wise transpose: symbol ``A(xi)^T`` (no sign)."""
    return _new(spec.n, spec.dim_w, spec.dim_v, spec.order,
                {a: m.T for a, m in spec.coeffs.items()})


def adjoint(spec: OperatorSpec) -> OperatorSpec:
    """Formal L2 adjoint: coefficients ``(-1)^k A_alpha^T``."""
    sign = (-1) ** spec.order
    name = f"adjoint({spec.name})" if spec.name else ""
    return _new(spec.n, spec.dim_w, spec.dim_v, spec.order,
                {a: sign * m.T for a, m in spec.coeffs.items()}, name)


def compose(outer: OperatorSpec, inner: OperatorSpec) -> OperatorSpec:
    """``outer o inner``; the symbol is the matrix-polynomial product."""
    if outer.n != inner.n or outer.dim_v != inner.dim_w:
        raise SpecError("compose: dimension mismatch "
                        f"(outer n={outer.n}, dim_v={outer.dim_v}; inner n={inner.n}, dim_w={inner.dim_w})")
    out: dict[MultiIndex, np.ndarray] = {}
    for b, mb in outer.coeffs.items():
        for c, mc in inner.coeffs.items():
            a = tuple(x + y for x, y in zip(b, c))
            out[a] = out.get(a, 0) + mb @ mc
    return _new(outer.n, inner.dim_v, outer.dim_w, outer.order + inner.order, out)


def add(a: OperatorSpec, b: OperatorSpec) -> OperatorSpec:
    if (a.n, a.dim_v, a.dim_w, a.order) != (b.n, b.dim_v, b.dim_w, b.order):
        raise SpecError("add: operators differ in shape or order")
    out = {k: m.copy() for k, m in a.coeffs.items()}
    for k, m in b.coeffs.items():
        out[k] = out.get(k, 0) + m
    return _new(a.n, a.dim_v, a.dim_w, a.order, out)


def power(spec: OperatorSpec, p: int) -> OperatorSpec:
    if spec.dim_v != spec.dim_w or p < 1:
        raise SpecError("power needs a square operator and p >= 1")
    out = spec
    for _ in range(p - 1):
        out = compose(out, spec)
    return out


def identity_derivative(n: int, dim: int, alpha: MultiIndex) -> OperatorSpec:
    """``D^alpha`` acting componentwise on ``R^dim``-valued fields."""
    return _new(n, dim, dim, sum(alpha), {tuple(alpha): np.eye(dim)})


def generalized_laplacian(spec: OperatorSpec) -> OperatorSpec:
    """Order-2k operator with symbol ``A(xi)^T A(xi)``.

    This is ``(-1)^k A* A``: the sign is chosen so that the symbol is positive
    semidefinite. Kernels and classification are unaffected by the sign.
    """
    out = compose(transpose(spec), spec)
    name = f"laplacian_of({spec.name})" if spec.name else ""
    return _new(out.n, out.dim_v, out.dim_w, out.order, out.coeffs, name)


# ---------------------------------------------------------------- sampling

@dataclass(frozen=True)
class SamplingConfig:
    n_quasi: int = 512
    n_random: int = 512
    seed: int = 20240611
    rank_tol: float = DEFAULT_RANK_TOL
    subspace_tol: float = 1e-8
    stable_run: int = 32


@lru_cache(maxsize=64)
def _sphere_cached(n: int, n_quasi: int, n_random: int, seed: int) -> np.ndarray:
    if n == 1:
        quasi = np.array([[1.0], [-1.0]] * max(1, n_quasi // 2))[:n_quasi]
    elif n == 2:
        t = 2 * np.pi * (np.arange(n_quasi) + 0.5) / n_quasi
        quasi = np.stack([np.cos(t), np.sin(t)], axis=1)
    else:
        pts = qmc.Halton(d=n, scramble=False).random(n_quasi + 1)[1:]
        quasi = normal_dist.ppf(np.clip(pts, 1e-12, 1 - 1e-12))
        quasi /= np.linalg.norm(quasi, axis=1, keepdims=True)
    rng = np.random.default_rng(seed)
    rand = rng.standard_normal((n_random, n))
    rand /= np.linalg.norm(rand, axis=1, keepdims=True)
    # interleave so that early stopping sees both families
    out = np.empty((n_quasi + n_random, n))
    k = min(n_quasi, n_random)
    out[0:2 * k:2] = quasi[:k]
    out[1:2 * k:2] = rand[:k]
    out[2 * k:] = quasi[k:] if n_quasi > k else rand[k:]
    out.setflags(write=False)
    return out


def sphere_samples(n: int, cfg: SamplingConfig = SamplingConfig()) -> np.ndarray:
    """Quasi-uniform and seeded random unit vectors, interleaved."""
    return _sphere_cached(n, cfg.n_quasi, cfg.n_random, cfg.seed)


@dataclass(frozen=True)
class Classification:
    rank_min: int
    rank_max: int
    is_constant_rank: bool
    is_elliptic: bool
    is_elliptic_system: bool
    is_maximal_rank: bool
    is_canceling: bool
    essential_range_dim: int
    cancellation_dim: int
    min_singular_on_sphere: float
    samples_used: int
    tolerance: float = DEFAULT_RANK_TOL
    seed: int = 0
    verdict: str = "sampled"

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _image_bases(mats: np.ndarray, tol: float):
    u, s, _ = np.linalg.svd(mats, full_matrices=False)
    smax = s[:, :1]
    ranks = np.where(smax[:, 0] > 0, np.sum(s > tol * smax, axis=1), 0)
    return u, s, ranks


def classify(spec: OperatorSpec, cfg: SamplingConfig = SamplingConfig()) -> Classification:
    """Sampled rank classification of the principal symbol."""
    if spec.is_zero:
        raise SpecError("degenerate spec: all coefficients vanish")
    return _classify_cached(spec, cfg)


@lru_cache(maxsize=256)
def _classify_cached(spec: OperatorSpec, cfg: SamplingConfig) -> Classification:
    xis = sphere_samples(spec.n, cfg)
    mats = eval_symbol(spec, xis)
    u, s, ranks = _image_bases(mats, cfg.rank_tol)
    scale_ = float(s[:, 0].max())
    if scale_ == 0:
        raise SpecError("degenerate spec: symbol vanishes on all samples")
    rmin, rmax = int(ranks.min()), int(ranks.max())
    n_w = spec.dim_w

    stacked = np.concatenate([u[i, :, :ranks[i]] for i in range(len(xis))], axis=1)
    sv = np.linalg.svd(stacked, compute_uv=False) if stacked.shape[1] else np.zeros(0)
    ess = int(np.sum(sv > cfg.subspace_tol * sv[0])) if sv.size and sv[0] > 0 else 0

    projs = np.einsum("sik,sjk->sij", u * (np.arange(u.shape[2]) < ranks[:, None])[:, None, :], u)
    constant = rmin == rmax
    maximal = constant and bool(np.max(np.abs(projs - projs[0])) <= 1e2 * cfg.subspace_tol)

    basis = u[0, :, :ranks[0]]
    stable = 0
    for i in range(1, len(xis)):
        if basis.shape[1] == 0:
            break
        resid = (np.eye(n_w) - projs[i]) @ basis
        nb = null_basis(resid, tol=cfg.subspace_tol, scale=1.0)
        new = basis @ nb
        if new.shape[1] == basis.shape[1]:
            stable += 1
        else:
            stable = 0
        basis = np.linalg.qr(new)[0] if new.shape[1] else new
        if stable >= cfg.stable_run:
            break
    canc = basis.shape[1]

    if spec.dim_v <= spec.dim_w:
        min_sing = float(s[:, spec.dim_v - 1].min())
    else:
        min_sing = 0.0
    elliptic = rmin == spec.dim_v and min_sing > cfg.rank_tol * scale_
    return Classification(
        rank_min=rmin, rank_max=rmax, is_constant_rank=constant,
        is_elliptic=bool(elliptic), is_elliptic_system=bool(elliptic and spec.dim_v == spec.dim_w),
        is_maximal_rank=bool(maximal), is_canceling=canc == 0,
        essential_range_dim=ess, cancellation_dim=int(canc),
        min_singular_on_sphere=min_sing, samples_used=len(xis),
        tolerance=cfg.rank_tol, seed=cfg.seed)


# ------------------------------------------------------------- annihilators

@dataclass(frozen=True)
class AnnihilatorPair:
    a: OperatorSpec
    q: OperatorSpec
    verified_exact: bool = False
    detail: str = ""

    def __post_init__(self):
        if self.a.dim_w != self.q.dim_v or self.a.n != self.q.n:
            raise SpecError("annihilator pair: a.dim_w must equal q.dim_v")


def verify_annihilator(pair: AnnihilatorPair, cfg: SamplingConfig = SamplingConfig()) -> AnnihilatorPair:
    """Check ``Q(xi) A(xi) = 0`` and ``rank A + rank Q = dim W`` on the sphere sample."""
    xis = sphere_samples(pair.a.n, cfg)
    am = eval_symbol(pair.a, xis)
    qm = eval_symbol(pair.q, xis)
    prod = qm @ am
    na = np.linalg.norm(am, axis=(1, 2))
    nq = np.linalg.norm(qm, axis=(1, 2))
    ra = numerical_rank(am, cfg.rank_tol)
    rq = numerical_rank(qm, cfg.rank_tol)
    err = np.linalg.norm(prod, axis=(1, 2)) / np.maximum(na * nq, 1e-300)
    for i in range(len(xis)):
        if err[i] > 1e-10:
            return AnnihilatorPair(pair.a, pair.q, False,
                                   f"Q(xi)A(xi) != 0 at sample {i}, xi={xis[i].tolist()}, rel={err[i]:.3e}")
        if ra[i] + rq[i] != pair.a.dim_w:
            return AnnihilatorPair(pair.a, pair.q, False,
                                   f"rank A + rank Q = {ra[i] + rq[i]} != dim W = {pair.a.dim_w} "
                                   f"at sample {i}, xi={xis[i].tolist()}")
    return AnnihilatorPair(pair.a, pair.q, True, "")


def delta_W(pair: AnnihilatorPair) -> OperatorSpec:
    """Operator on W with symbol ``(A A^T)^{k_Q} + (Q^T Q)^k``.

    Equals ``(-1)^{k k_Q}`` times ``(A A*)^{k_Q} + (Q* Q)^k``; see
    :func:`delta_W_true` for the operator itself.
    """
    if not pair.verified_exact:
        raise SpecError("delta_W needs a verified annihilator pair")
    k, kq = pair.a.order, pair.q.order
    aat = power(compose(pair.a, transpose(pair.a)), kq)
    qtq = power(compose(transpose(pair.q), pair.q), k)
    out = add(aat, qtq)
    return _new(out.n, out.dim_v, out.dim_w, out.order, out.coeffs, "delta_W")


def delta_W_true(pair: AnnihilatorPair) -> OperatorSpec:
    """``(A A*)^{k_Q} + (Q* Q)^k`` with genuine adjoints."""
    return scale(delta_W(pair), (-1) ** (pair.a.order * pair.q.order))


# ------------------------------------------------------------------ JSON io

def spec_to_dict(spec: OperatorSpec) -> dict:
    return {
        "n": spec.n, "dim_v": spec.dim_v, "dim_w": spec.dim_w, "order": spec.order,
        "coeffs": [{"alpha": list(a), "matrix": m.tolist()} for a, m in spec.coeffs.items()],
    }


def spec_from_dict(d: dict, name: str = "") -> OperatorSpec:
    try:
        coeffs = {}
        for entry in d["coeffs"]:
            alpha = tuple(int(a) for a in entry["alpha"])
            mat = np.array(entry["matrix"], dtype=float)
            if alpha in coeffs:
                raise SpecError(f"duplicate multi-index {alpha}")
            coeffs[alpha] = mat
        return OperatorSpec(int(d["n"]), int(d["dim_v"]), int(d["dim_w"]), int(d["order"]),
                            coeffs, name=name)
    except KeyError as exc:
        raise SpecError(f"missing field {exc}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, SpecError):
            raise
        raise SpecError(f"malformed operator spec: {exc}") from None


def spec_to_json(spec: OperatorSpec) -> str:
    return json.dumps(spec_to_dict(spec), indent=1)


def spec_from_json(text: str, name: str = "") -> OperatorSpec:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"JSON parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(d, dict):
        raise SpecError("operator spec must be a JSON object")
    return spec_from_dict(d, name)


def all_multi_indices_upto(n: int, k: int) -> list[MultiIndex]:
    return [a for j in range(k + 1) for a in multi_indices(n, j)]

