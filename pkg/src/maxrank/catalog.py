"""Constructors for the standard operators, with their expected rank flags."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .symbols import (AnnihilatorPair, Classification, OperatorSpec, SpecError,
                      adjoint, compose, add, multi_indices, verify_annihilator)


class CatalogError(SpecError):
    """Unknown catalog name or invalid parameters."""


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    params: dict
    spec: OperatorSpec
    expected: dict = field(default_factory=dict)
    partner: AnnihilatorPair | None = None

    def label(self) -> str:
        if not self.params:
            return self.name
        inner = ",".join(f"{k}={v}" for k, v in self.params.items())
        return f"{self.name}({inner})"

    def mismatches(self, got: Classification) -> list[str]:
        out = []
        for key, want in self.expected.items():
            have = getattr(got, key)
            if have != want:
                out.append(f"{self.label()}: {key} expected {want}, got {have}")
        return out


# ------------------------------------------------------------------ bases

def form_basis(n: int, l: int) -> list[tuple[int, ...]]:
    """Strictly increasing index sets of size ``l``, lexicographic."""
    return list(itertools.combinations(range(n), l))


def sym_basis(n: int, trace_free: bool = False) -> list[np.ndarray]:
    """Orthonormal basis of Sym(n) (Frobenius product), or of its trace-free part."""
    out = []
    if trace_free:
        for k in range(1, n):
            d = np.zeros(n)
            d[:k] = 1.0
            d[k] = -k
            out.append(np.diag(d / math.sqrt(k * (k + 1))))
    else:
        for i in range(n):
            e = np.zeros((n, n))
            e[i, i] = 1.0
            out.append(e)
    for i in range(n):
        for j in range(i + 1, n):
            e = np.zeros((n, n))
            e[i, j] = e[j, i] = 1.0 / math.sqrt(2.0)
            out.append(e)
    return out


def _unit(n, j):
    a = [0] * n
    a[j] = 1
    return tuple(a)


def _check_n(n, lo=1):
    if not isinstance(n, (int, np.integer)) or n < lo:
        raise CatalogError(f"dimension n must be an integer >= {lo}, got {n!r}")


# ------------------------------------------------------------ constructors

def divergence(n: int, N: int = 1) -> OperatorSpec:
    """Row-wise divergence of an N x n matrix field flattened row-major."""
    _check_n(n)
    _check_n(N)
    coeffs = {}
    for j in range(n):
        m = np.zeros((N, N * n))
        for i in range(N):
            m[i, i * n + j] = 1.0
        coeffs[_unit(n, j)] = m
    return OperatorSpec(n, N * n, N, 1, coeffs, name=f"divergence(n={n},N={N})")


def div_k(n: int, k: int) -> OperatorSpec:
    """``sum_{|beta|=k} D^beta F_beta`` over symmetric tensors indexed by multi-indices."""
    _check_n(n)
    _check_n(k)
    betas = multi_indices(n, k)
    coeffs = {}
    for i, b in enumerate(betas):
        m = np.zeros((1, len(betas)))
        m[0, i] = 1.0
        coeffs[b] = m
    return OperatorSpec(n, len(betas), 1, k, coeffs, name=f"div_k(n={n},k={k})")


def gradient(n: int) -> OperatorSpec:
    _check_n(n)
    coeffs = {_unit(n, j): np.eye(n)[:, [j]] for j in range(n)}
    return OperatorSpec(n, 1, n, 1, coeffs, name=f"gradient(n={n})")


def grad_k(n: int, k: int) -> OperatorSpec:
    """All order-k partial derivatives, one row per multi-index."""
    _check_n(n)
    _check_n(k)
    betas = multi_indices(n, k)
    coeffs = {}
    for i, b in enumerate(betas):
        m = np.zeros((len(betas), 1))
        m[i, 0] = 1.0
        coeffs[b] = m
    return OperatorSpec(n, 1, len(betas), k, coeffs, name=f"grad_k(n={n},k={k})")


def laplacian(n: int) -> OperatorSpec:
    _check_n(n)
    coeffs = {tuple(2 * x for x in _unit(n, j)): np.ones((1, 1)) for j in range(n)}
    return OperatorSpec(n, 1, 1, 2, coeffs, name=f"laplacian(n={n})")


def bilaplacian(n: int) -> OperatorSpec:
    _check_n(n)
    coeffs = {}
    for i in range(n):
        for j in range(n):
            a = [0] * n
            a[i] += 2
            a[j] += 2
            coeffs[tuple(a)] = coeffs.get(tuple(a), 0) + np.ones((1, 1))
    return OperatorSpec(n, 1, 1, 4, coeffs, name=f"bilaplacian(n={n})")


def cauchy_riemann() -> OperatorSpec:
    """Real form of ``2 d/dzbar``: symbol [[x1, -x2], [x2, x1]]."""
    coeffs = {(1, 0): np.eye(2), (0, 1): np.array([[0.0, -1.0], [1.0, 0.0]])}
    return OperatorSpec(2, 2, 2, 1, coeffs, name="cauchy_riemann")


def _sym_part_operator(n: int, basis: list[np.ndarray], name: str) -> OperatorSpec:
    # coordinate b of sym(v x xi) is v^T B_b xi
    coeffs = {}
    for l in range(n):
        m = np.array([[b[i, l] for i in range(n)] for b in basis])
        coeffs[_unit(n, l)] = m
    return OperatorSpec(n, n, len(basis), 1, coeffs, name=name)


def sym_gradient(n: int) -> OperatorSpec:
    _check_n(n, 2)
    return _sym_part_operator(n, sym_basis(n), f"sym_gradient(n={n})")


def deviatoric(n: int) -> OperatorSpec:
    """Trace-free symmetric gradient."""
    _check_n(n, 2)
    return _sym_part_operator(n, sym_basis(n, trace_free=True), f"deviatoric(n={n})")


def _wedge_matrix(n: int, l: int, j: int) -> np.ndarray:
    """Matrix of ``e_j wedge .`` from l-forms to (l+1)-forms."""
    src = form_basis(n, l)
    dst = {s: i for i, s in enumerate(form_basis(n, l + 1))}
    m = np.zeros((len(dst), len(src)))
    for c, idx in enumerate(src):
        if j in idx:
            continue
        sign = (-1) ** sum(1 for x in idx if x < j)
        m[dst[tuple(sorted(idx + (j,)))], c] = sign
    return m


def _ext_derivative(n: int, l: int) -> OperatorSpec:
    coeffs = {_unit(n, j): _wedge_matrix(n, l, j) for j in range(n)}
    return OperatorSpec(n, math.comb(n, l), math.comb(n, l + 1), 1, coeffs,
                        name=f"ext_derivative(n={n},l={l})")


def _codifferential(n: int, l: int) -> OperatorSpec:
    """From (l+1)-forms to l-forms, symbol ``d_l(xi)^T``."""
    d = _ext_derivative(n, l)
    coeffs = {a: m.T for a, m in d.coeffs.items()}
    return OperatorSpec(n, d.dim_w, d.dim_v, 1, coeffs, name=f"codifferential(n={n},l={l})")


def ext_derivative(n: int, l: int) -> OperatorSpec:
    """``d`` on l-forms, ``0 <= l <= n-1``; symbol ``xi wedge v``."""
    _check_n(n)
    if not 0 <= l <= n - 1:
        raise CatalogError(f"ext_derivative needs 0 <= l <= n-1, got l={l}, n={n}")
    return _ext_derivative(n, l)


def codifferential(n: int, l: int) -> OperatorSpec:
    """``delta`` from (l+1)-forms to l-forms, ``1 <= l <= n-1``; the adjoint symbol of ``d``."""
    _check_n(n, 2)
    if not 1 <= l <= n - 1:
        raise CatalogError(f"codifferential needs 1 <= l <= n-1, got l={l}, n={n}")
    return _codifferential(n, l)


def hodge_star(n: int, l: int) -> np.ndarray:
    """Matrix of the Hodge star from l-forms to (n-l)-forms (standard orientation)."""
    src = form_basis(n, l)
    dst = {s: i for i, s in enumerate(form_basis(n, n - l))}
    m = np.zeros((len(dst), len(src)))
    for c, idx in enumerate(src):
        comp = tuple(x for x in range(n) if x not in idx)
        perm = list(idx) + list(comp)
        inv = sum(1 for a in range(n) for b in range(a + 1, n) if perm[a] > perm[b])
        m[dst[comp], c] = (-1) ** inv
    return m


def laplace_beltrami(n: int, l: int) -> OperatorSpec:
    """``delta d + d delta`` on l-forms; symbol ``|xi|^2 I``."""
    _check_n(n, 2)
    if not 1 <= l <= n - 1:
        raise CatalogError(f"laplace_beltrami needs 1 <= l <= n-1, got l={l}, n={n}")
    dd = compose(_codifferential(n, l), _ext_derivative(n, l))
    ddelta = compose(_ext_derivative(n, l - 1), _codifferential(n, l - 1))
    out = add(dd, ddelta)
    return OperatorSpec(n, out.dim_v, out.dim_w, 2, out.coeffs, name=f"laplace_beltrami(n={n},l={l})")


def curl(n: int) -> OperatorSpec:
    """Scalar rotation for n=2, vector curl for n=3."""
    if n == 2:
        coeffs = {(1, 0): np.array([[0.0, 1.0]]), (0, 1): np.array([[-1.0, 0.0]])}
        return OperatorSpec(2, 2, 1, 1, coeffs, name="curl(n=2)")
    if n == 3:
        coeffs = {}
        for j in range(3):
            e = np.zeros(3)
            e[j] = 1.0
            # (xi x v) = [xi]_x v; coefficient of xi_j is [e_j]_x
            m = np.array([[0, -e[2], e[1]], [e[2], 0, -e[0]], [-e[1], e[0], 0]])
            coeffs[_unit(3, j)] = m
        return OperatorSpec(3, 3, 3, 1, coeffs, name="curl(n=3)")
    raise CatalogError(f"curl is defined for n in (2, 3), got {n}")


# ---------------------------------------------------------------- registry

_MAXIMAL = {"is_constant_rank": True, "is_maximal_rank": True}
_ELLIPTIC_NOT_MAXIMAL = {"is_constant_rank": True, "is_elliptic": True, "is_maximal_rank": False}


def _expected(name: str, p: dict, spec: OperatorSpec) -> dict:
    if name == "divergence":
        return {**_MAXIMAL, "rank_min": p["N"], "is_elliptic": False, "is_canceling": False}
    if name == "div_k":
        return {**_MAXIMAL, "rank_min": 1, "is_canceling": False}
    if name in ("laplacian", "bilaplacian", "laplace_beltrami"):
        return {**_MAXIMAL, "is_elliptic_system": True, "is_canceling": False}
    if name == "cauchy_riemann":
        return {**_MAXIMAL, "is_elliptic_system": True, "is_canceling": False}
    if name == "gradient":
        return {**_ELLIPTIC_NOT_MAXIMAL, "rank_min": 1, "is_canceling": True}
    if name == "grad_k":
        return {**_ELLIPTIC_NOT_MAXIMAL, "rank_min": 1, "is_canceling": True}
    if name == "sym_gradient":
        return {**_ELLIPTIC_NOT_MAXIMAL, "rank_min": p["n"], "is_canceling": True}
    if name == "deviatoric":
        if p["n"] == 2:
            return {**_MAXIMAL, "is_elliptic_system": True, "is_canceling": False}
        out = {**_ELLIPTIC_NOT_MAXIMAL, "rank_min": p["n"]}
        if p["n"] == 3:
            out["is_canceling"] = True
        return out
    if name == "ext_derivative":
        n, l = p["n"], p["l"]
        out = {"is_constant_rank": True, "rank_min": math.comb(n - 1, l)}
        if l == n - 1:
            out["is_maximal_rank"] = True
        elif l == 0:
            out.update(is_elliptic=True, is_maximal_rank=False)
        else:
            out.update(is_elliptic=False, is_maximal_rank=False)
        return out
    if name == "codifferential":
        n, l = p["n"], p["l"]
        out = {"is_constant_rank": True, "rank_min": math.comb(n - 1, l), "is_maximal_rank": False}
        out["is_elliptic"] = l == n - 1
        return out
    return {}


_BUILDERS = {
    "divergence": (divergence, ("n", "N"), {"N": 1}),
    "div_k": (div_k, ("n", "k"), {}),
    "gradient": (gradient, ("n",), {}),
    "grad_k": (grad_k, ("n", "k"), {}),
    "laplacian": (laplacian, ("n",), {}),
    "bilaplacian": (bilaplacian, ("n",), {}),
    "cauchy_riemann": (cauchy_riemann, (), {}),
    "sym_gradient": (sym_gradient, ("n",), {}),
    "deviatoric": (deviatoric, ("n",), {}),
    "ext_derivative": (ext_derivative, ("n", "l"), {}),
    "codifferential": (codifferential, ("n", "l"), {}),
    "laplace_beltrami": (laplace_beltrami, ("n", "l"), {}),
}

ELLIPTIC_NAMES = ("gradient", "grad_k", "laplacian", "bilaplacian", "cauchy_riemann",
                  "sym_gradient", "deviatoric", "laplace_beltrami")


def catalog_names() -> list[str]:
    return list(_BUILDERS) + ["adjoint_of"]


def catalog_params(name: str) -> tuple[str, ...]:
    if name == "adjoint_of":
        return ("base",)
    if name not in _BUILDERS:
        raise CatalogError(f"unknown catalog operator {name!r}")
    return _BUILDERS[name][1]


def make_catalog_operator(name: str, **params: Any) -> CatalogEntry:
    """Build a catalog entry; ``adjoint_of`` takes ``base=<name or entry>`` plus the base params."""
    if name == "adjoint_of":
        base = params.pop("base", None)
        if base is None:
            raise CatalogError("adjoint_of needs base=<catalog name or entry>")
        entry = base if isinstance(base, CatalogEntry) else make_catalog_operator(base, **params)
        return adjoint_entry(entry)
    if name not in _BUILDERS:
        raise CatalogError(f"unknown catalog operator {name!r}")
    fn, keys, defaults = _BUILDERS[name]
    p = {**defaults, **params}
    extra = set(p) - set(keys)
    if extra:
        raise CatalogError(f"{name} takes parameters {keys}, got unexpected {sorted(extra)}")
    missing = [k for k in keys if k not in p]
    if missing:
        raise CatalogError(f"{name} needs parameters {missing}")
    try:
        p = {k: int(p[k]) for k in keys}
    except (TypeError, ValueError):
        raise CatalogError(f"{name}: parameters must be integers") from None
    spec = fn(**p)
    return CatalogEntry(name, p, spec, _expected(name, p, spec))


def adjoint_entry(entry: CatalogEntry) -> CatalogEntry:
    spec = adjoint(entry.spec)
    expected = {}
    if entry.expected.get("is_elliptic") or entry.expected.get("is_elliptic_system"):
        expected = dict(_MAXIMAL)
    return CatalogEntry("adjoint_of", {"base": entry.label()}, spec, expected)


def catalog_annihilator(name: str, **params: Any) -> AnnihilatorPair:
    if name == "grad_curl":
        n = int(params.get("n", 2))
        if n not in (2, 3):
            raise CatalogError("grad_curl needs n in (2, 3)")
        pair = AnnihilatorPair(gradient(n), curl(n))
    elif name == "d_d":
        n, l = int(params["n"]), int(params["l"])
        if not 0 <= l <= n - 2:
            raise CatalogError(f"d_d needs 0 <= l <= n-2, got l={l}, n={n}")
        pair = AnnihilatorPair(_ext_derivative(n, l), _ext_derivative(n, l + 1))
    else:
        raise CatalogError(f"unknown annihilator pair {name!r}")
    checked = verify_annihilator(pair)
    if not checked.verified_exact:
        raise AssertionError(f"catalog pair {name} failed verification: {checked.detail}")
    return checked


def golden_entries() -> list[CatalogEntry]:
    """The catalog instances covered by the classification table."""
    out = []
    for n in (2, 3):
        for N in (1, 2, 3):
            out.append(make_catalog_operator("divergence", n=n, N=N))
        for k in (1, 2, 3):
            out.append(make_catalog_operator("div_k", n=n, k=k))
            out.append(make_catalog_operator("grad_k", n=n, k=k))
        out.append(make_catalog_operator("gradient", n=n))
        out.append(make_catalog_operator("laplacian", n=n))
        out.append(make_catalog_operator("bilaplacian", n=n))
        out.append(make_catalog_operator("sym_gradient", n=n))
        out.append(make_catalog_operator("deviatoric", n=n))
    out.append(make_catalog_operator("divergence", n=4, N=1))
    out.append(make_catalog_operator("cauchy_riemann"))
    for n in (2, 3, 4):
        for l in range(n):
            out.append(make_catalog_operator("ext_derivative", n=n, l=l))
        for l in range(1, n):
            out.append(make_catalog_operator("codifferential", n=n, l=l))
            out.append(make_catalog_operator("laplace_beltrami", n=n, l=l))
    elliptic = [e for e in out if e.expected.get("is_elliptic") or e.expected.get("is_elliptic_system")]
    out.extend(adjoint_entry(e) for e in elliptic)
    return out


def maximal_rank_entries_2d() -> list[CatalogEntry]:
    """Two-dimensional instance of every maximal-rank family, used by the bench."""
    return [
        make_catalog_operator("divergence", n=2, N=1),
        make_catalog_operator("divergence", n=2, N=2),
        make_catalog_operator("div_k", n=2, k=2),
        make_catalog_operator("laplacian", n=2),
        make_catalog_operator("bilaplacian", n=2),
        make_catalog_operator("cauchy_riemann"),
        make_catalog_operator("deviatoric", n=2),
        make_catalog_operator("laplace_beltrami", n=2, l=1),
        make_catalog_operator("adjoint_of", base="sym_gradient", n=2),
    ]
