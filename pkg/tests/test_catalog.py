import numpy as np
import pytest

from maxrank.catalog import (CatalogError, catalog_annihilator, catalog_names, golden_entries,
                             hodge_star, make_catalog_operator, maximal_rank_entries_2d, sym_basis)
from maxrank.symbols import classify, compose, eval_symbol


def test_golden_table_has_no_mismatches():
    bad = []
    for e in golden_entries():
        bad += e.mismatches(classify(e.spec))
    assert bad == []


def test_divergence_n3():
    e = make_catalog_operator("divergence", n=3, N=1)
    c = classify(e.spec)
    assert c.is_maximal_rank and c.rank_min == 1
    assert e.expected["is_maximal_rank"]


def test_deviatoric_flags():
    assert classify(make_catalog_operator("deviatoric", n=2).spec).is_elliptic_system
    c = classify(make_catalog_operator("deviatoric", n=3).spec)
    assert c.is_elliptic and not c.is_maximal_rank and c.is_canceling


def test_sym_gradient_not_maximal():
    c = classify(make_catalog_operator("sym_gradient", n=3).spec)
    assert c.is_elliptic and not c.is_maximal_rank


def test_annihilator_pairs():
    p = catalog_annihilator("grad_curl", n=2)
    assert p.verified_exact and p.a.order == p.q.order == 1
    assert catalog_annihilator("grad_curl", n=3).verified_exact
    p = catalog_annihilator("d_d", n=3, l=0)
    assert p.verified_exact and p.a.dim_v == 1 and p.a.dim_w == 3
    assert compose(p.q, p.a).is_zero


@pytest.mark.parametrize("n", [2, 3, 4])
def test_exterior_derivative_is_a_complex(n):
    for l in range(n - 1):
        d0 = make_catalog_operator("ext_derivative", n=n, l=l).spec
        d1 = make_catalog_operator("ext_derivative", n=n, l=l + 1).spec
        assert compose(d1, d0).is_zero


@pytest.mark.parametrize("n,l", [(2, 1), (3, 1), (3, 2), (4, 2)])
def test_laplace_beltrami_symbol(n, l):
    spec = make_catalog_operator("laplace_beltrami", n=n, l=l).spec
    xi = np.random.default_rng(n + l).standard_normal(n)
    m = eval_symbol(spec, xi)
    assert np.allclose(m, (xi @ xi) * np.eye(m.shape[0]))


def test_hodge_star_squares_to_sign():
    for n in (2, 3, 4):
        for l in range(n + 1):
            s = hodge_star(n, l) @ hodge_star(n, n - l)
            assert np.allclose(s, (-1) ** (l * (n - l)) * np.eye(s.shape[0]))


def test_trace_free_basis_orthonormal():
    b = sym_basis(3, trace_free=True)
    g = np.array([[np.sum(x * y) for y in b] for x in b])
    assert len(b) == 5 and np.allclose(g, np.eye(5))
    assert all(abs(np.trace(x)) < 1e-15 for x in b)


def test_maximal_2d_entries_are_maximal():
    for e in maximal_rank_entries_2d():
        assert classify(e.spec).is_maximal_rank, e.label()


def test_adjoint_of():
    e = make_catalog_operator("adjoint_of", base="cauchy_riemann")
    assert classify(e.spec).is_maximal_rank
    assert e.params == {"base": "cauchy_riemann"}


def test_errors():
    with pytest.raises(CatalogError):
        make_catalog_operator("nope")
    with pytest.raises(CatalogError):
        make_catalog_operator("laplacian")
    with pytest.raises(CatalogError):
        make_catalog_operator("laplacian", n=2, k=3)
    with pytest.raises(CatalogError):
        catalog_annihilator("d_d", n=2, l=1)
    assert "adjoint_of" in catalog_names()


def test_deviatoric_2d_is_scaled_cauchy_riemann():
    from maxrank.symbols import scale
    dev = make_catalog_operator("deviatoric", n=2).spec
    cr = make_catalog_operator("cauchy_riemann").spec
    assert dev.allclose(scale(cr, 1 / np.sqrt(2)))
    a, b = classify(dev), classify(cr)
    assert (a.is_maximal_rank, a.is_elliptic_system, a.is_canceling) == \
        (b.is_maximal_rank, b.is_elliptic_system, b.is_canceling)
