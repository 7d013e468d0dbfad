import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from maxrank.catalog import cauchy_riemann, laplacian
from maxrank.domains import family_mask, make_domain
from maxrank.grid import BoxGrid, GridField
from maxrank.norms import NormError, interior_residual, lp_norm, neg_sobolev_norm_2, sobolev_norm
from maxrank.projections import random_band_limited
from maxrank.spectral import apply_operator

G = BoxGrid(2, 128)


def _field(a):
    return GridField(G, np.broadcast_to(a, (1,) + G.sizes))


def test_lp_of_constant():
    m = family_mask("disk", G)
    for p in (1.0, 1.5, 2.0, 3.0):
        assert lp_norm(_field(1.0), m, p).value == pytest.approx(m.area ** (1 / p), rel=1e-12)
    assert m.area == pytest.approx(np.pi * 0.15 ** 2, rel=0.01)
    assert lp_norm(_field(0.0), m).value == 0


def test_lp_parseval_on_sub_box():
    m = family_mask("full", G)
    x, y = G.mesh()
    # one full period on the [-L/4, L/4) sub-box
    u = _field(np.sin(2 * np.pi * x / 0.5))
    assert lp_norm(u, m).value ** 2 == pytest.approx(0.25 * 0.5, rel=1e-10)


def test_sobolev_closed_form():
    m = family_mask("full", G)
    x, _ = G.mesh()
    u = _field(np.sin(2 * np.pi * x))
    l2 = lp_norm(u, m).value ** 2
    cos2 = lp_norm(_field(np.cos(2 * np.pi * x)), m).value ** 2
    assert sobolev_norm(u, m, 1).value == pytest.approx(np.sqrt(l2 + (2 * np.pi) ** 2 * cos2), rel=1e-8)
    assert sobolev_norm(_field(3.0), m, 1).value == pytest.approx(lp_norm(_field(3.0), m).value)


def test_sobolev_homogeneity():
    m = family_mask("disk", G)
    u = random_band_limited(G, 2, 8, 1)
    assert sobolev_norm(u.scaled(-2.5), m, 2, 3.0).value == pytest.approx(2.5 * sobolev_norm(u, m, 2, 3.0).value)


def test_interior_residual_exact_on_polynomials():
    m = family_mask("disk", G)
    x, y = G.mesh()
    assert interior_residual(laplacian(2), _field(x ** 2 - y ** 2), m).value <= 1e-10
    z2 = GridField(G, np.stack(np.broadcast_arrays(x ** 2 - y ** 2, 2 * x * y)))
    assert interior_residual(cauchy_riemann(), z2, m).value <= 1e-10


def test_interior_residual_anti_holomorphic():
    m = family_mask("disk", G)
    x, y = G.mesh()
    zbar = GridField(G, np.stack(np.broadcast_arrays(x, -y)).astype(float))
    rep = interior_residual(cauchy_riemann(), zbar, m)
    area = rep.cells_used * G.cell_volume
    assert rep.value == pytest.approx(2 * np.sqrt(area), rel=1e-10)


def test_interior_residual_region_check():
    m = family_mask("disk", G)
    with pytest.raises(NormError):
        interior_residual(laplacian(2), _field(0.0), m, region=m.cells)


def test_neg_sobolev_single_mode():
    x, _ = G.mesh()
    u = _field(np.sin(2 * np.pi * 3 * x))
    s = neg_sobolev_norm_2(u, 0).value
    assert s == pytest.approx(np.sqrt(0.5), rel=1e-12)
    assert neg_sobolev_norm_2(u, 2).value == pytest.approx((2 * np.pi * 3) ** -2 * s, rel=1e-12)
    assert neg_sobolev_norm_2(_field(0.0), 1).value == 0


def test_neg_sobolev_cancels_laplacian():
    u = random_band_limited(G, 1, 10, 4)
    u = GridField(G, u.data - u.data.mean())
    f = apply_operator(laplacian(2), u)
    assert neg_sobolev_norm_2(f, 2).value == pytest.approx(neg_sobolev_norm_2(u, 0).value, rel=1e-10)


def test_bad_p():
    with pytest.raises(NormError):
        lp_norm(_field(1.0), family_mask("disk", G), 0.5)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.floats(1.0, 4.0))
def test_lp_triangle_inequality(seed, p):
    m = family_mask("two_ball", G)
    rng = np.random.default_rng(seed)
    a = GridField(G, rng.standard_normal((2,) + G.sizes))
    b = GridField(G, rng.standard_normal((2,) + G.sizes))
    assert lp_norm(a + b, m, p).value <= lp_norm(a, m, p).value + lp_norm(b, m, p).value + 1e-12
