import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from scipy import integrate as spi

from gradterm.bundle import (
    MetricError, MetricField, chern_curvature, covariant_derivative, curvature_budget, curvature_form,
    curvature_pointwise_norm, inner, lp_norm, pointwise_norm2,
)
from gradterm.catalog import make_metric, make_section
from gradterm.grids import build_disk_grid, product_grid, wirtinger_derivatives


def bidisk(s1, s2=0.2):
    return product_grid([build_disk_grid(1.0, s1), build_disk_grid(1.0, s2)], bound_radius=1.1)


def interior(G, cells=2):
    """Nodes at least ``cells`` lattice steps inside every rim (composed stencils reach two cells)."""
    m = np.ones(G.shape, dtype=bool)
    for k, plane in enumerate(G.factors):
        r = np.abs(np.broadcast_to(G.coordinate(k), G.shape))
        m &= r < plane.outer - cells * plane.spacing
    return m


def scalar_metric(G, w):
    return MetricField(np.asarray(w)[..., None, None] * np.ones((1, 1)), G)


def test_identity_metric_is_flat():
    G = bidisk(0.1)
    th = chern_curvature(make_metric("identity", G, rank=2))
    assert np.all(th.values == 0)
    assert np.all(curvature_pointwise_norm(th) == 0)
    assert curvature_budget(curvature_pointwise_norm(th), 4, G) == 0


@pytest.mark.parametrize("K", [0.5, 2.0])
def test_gaussian_line_bundle_curvature(K):
    errs = []
    for s in (0.1, 0.05):
        G = bidisk(s, s * 2)
        h = make_metric("gaussian", G, K=K)
        th = chern_curvature(h)
        m = interior(G)
        w = h.values[..., 0, 0].real
        for j in range(2):
            for k in range(2):
                T = th.component(j, k)[..., 0, 0] / w
                want = K if j == k else 0.0
                errs.append((s, float(np.max(np.abs(T - want)[m]))))
    coarse = max(e for s, e in errs if s == 0.1)
    fine = max(e for s, e in errs if s == 0.05)
    assert fine <= 0.05 * K
    assert coarse / fine >= 3.0


def test_quartic_weight_curvature():
    # the steep rim of exp(-|z|^4) is pre-asymptotic at 0.1
    out = []
    for s in (0.05, 0.025):
        G = bidisk(s)
        z1 = np.broadcast_to(G.coordinate(0), G.shape)
        h = scalar_metric(G, np.exp(-np.abs(z1) ** 4))
        th = chern_curvature(h, directions=(0,))
        T = th.component(0, 0)[..., 0, 0] / h.values[..., 0, 0]
        out.append(float(np.max(np.abs(T - 4 * np.abs(z1) ** 2)[interior(G)])))
    assert out[1] <= 0.05
    assert out[0] / out[1] >= 3.0


def test_covariant_derivative_flat_is_plain_derivative():
    G = bidisk(0.1)
    f = make_section("random", G, rank=2, rng=np.random.default_rng(0))
    h = make_metric("identity", G, rank=2)
    d = wirtinger_derivatives(f, G, 0)[0]
    assert np.array_equal(covariant_derivative(f, h, 0), d)


def test_holomorphic_section_has_zero_antiholomorphic_derivative():
    G = bidisk(0.1)
    z1, z2 = G.coordinates()
    f = np.stack([z1 ** 2 - 3 * z2, 1j * z1 * z2], axis=-1)
    h = make_metric("rank2", G, rank=2)
    assert np.max(np.abs(covariant_derivative(f, h, 0, holomorphic=False))) <= 1e-12


def test_connection_of_gaussian_on_constant_section():
    out = []
    for s in (0.1, 0.05):
        G = bidisk(s)
        z1 = np.broadcast_to(G.coordinate(0), G.shape)
        h = scalar_metric(G, np.exp(-np.abs(z1) ** 2))
        d = covariant_derivative(np.ones(G.shape + (1,)), h, 0)[..., 0]
        out.append(float(np.max(np.abs(d + np.conj(z1))[interior(G)])))
    assert out[1] <= 0.01


def test_lp_norm_of_unit_section():
    G = bidisk(0.05, 0.05)
    f = np.zeros(G.shape + (2,))
    f[..., 0] = 1
    assert lp_norm(f, make_metric("identity", G, rank=2), 2, G) == pytest.approx(np.pi, rel=0.03)


def test_lp_norm_p4_gaussian_section():
    G = bidisk(0.05, 0.05)
    z1, z2 = G.coordinates()
    f = np.exp(-np.abs(z1) ** 2 - np.abs(z2) ** 2)[..., None]
    got = lp_norm(f, make_metric("identity", G), 4, G)
    radial = spi.quad(lambda r: 2 * np.pi * r * np.exp(-4 * r * r), 0, 1, epsabs=1e-13)[0]
    assert got == pytest.approx((radial ** 2) ** 0.25, rel=0.05)


@given(st.floats(-5, 5), st.floats(-5, 5), st.sampled_from([1.0, 2.0, 3.5, 6.0]))
@settings(max_examples=25, deadline=None)
def test_lp_norm_scaling(a, b, p):
    assume(abs(complex(a, b)) > 1e-6)
    G = bidisk(0.2, 0.2)
    h = make_metric("rank2", G, rank=2)
    f = make_section("bump_poly", G, rank=2)
    c = complex(a, b)
    assert lp_norm(c * f, h, p, G) == pytest.approx(abs(c) * lp_norm(f, h, p, G), rel=1e-12, abs=1e-300)


def test_rank_one_norm_reduces_to_scalar_curvature():
    G = bidisk(0.1)
    h = make_metric("gaussian", G, K=1.5)
    th = chern_curvature(h)
    n11 = curvature_pointwise_norm(th, component=(0, 0))
    want = np.abs(th.component(0, 0)[..., 0, 0]) / h.values[..., 0, 0].real
    assert np.allclose(n11, want, rtol=1e-12, atol=0)


def _random_gauge(rng, shape, r):
    g = rng.normal(size=shape + (r, r)) + 1j * rng.normal(size=shape + (r, r))
    return g + 3 * np.eye(r)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=15, deadline=None)
def test_curvature_norm_frame_invariance(seed):
    G = bidisk(0.15, 0.2)
    h = make_metric("rank2", G, rank=2)
    th = chern_curvature(h)
    g = _random_gauge(np.random.default_rng(seed), G.shape, 2)
    gh = np.conj(np.swapaxes(g, -1, -2))
    h2 = MetricField(gh @ h.values @ g, G)
    T2 = gh[..., None, None, :, :] @ th.values @ g[..., None, None, :, :]
    th2 = type(th)(T2, th.directions, h2)
    assert np.allclose(curvature_pointwise_norm(th2), curvature_pointwise_norm(th), rtol=1e-8, atol=1e-12)
    assert np.allclose(curvature_pointwise_norm(th2, component=(0, 0)),
                       curvature_pointwise_norm(th, component=(0, 0)), rtol=1e-8, atol=1e-12)


def test_constant_holomorphic_gauge_change_commutes_with_curvature():
    G = bidisk(0.1)
    h = make_metric("rank2", G, rank=2)
    g = _random_gauge(np.random.default_rng(1), (), 2)
    gh = np.conj(g.T)
    h2 = MetricField(gh @ h.values @ g, G)
    a = curvature_pointwise_norm(chern_curvature(h))
    b = curvature_pointwise_norm(chern_curvature(h2))
    assert np.allclose(a, b, rtol=1e-8, atol=1e-10)


@given(st.integers(0, 2**32 - 1), st.sampled_from(["gaussian", "rank2", "singular"]))
@settings(max_examples=20, deadline=None)
def test_curvature_cauchy_schwarz(seed, name):
    G = bidisk(0.1, 0.2)
    rank = 2 if name == "rank2" else 1
    h = make_metric(name, G, rank=rank)
    rng = np.random.default_rng(seed)
    f = rng.normal(size=G.shape + (rank,)) + 1j * rng.normal(size=G.shape + (rank,))
    th = chern_curvature(h, directions=(0,))
    lhs = np.abs(curvature_form(th, f))
    rhs = curvature_pointwise_norm(th, component=(0, 0)) * pointwise_norm2(f, h)
    assert np.all(lhs <= rhs * (1 + 1e-10) + 1e-14)


def test_leibniz_compatibility():
    errs = []
    for s in (0.05, 0.025):
        G = bidisk(s)
        h = make_metric("rank2", G, rank=2)
        f = make_section("bump_poly", G, rank=2, cutoff=False)
        z1, z2 = G.coordinates()
        g = np.stack([np.exp(0.5 * np.conj(z1)) * np.cos(z2.real), np.sin(z1.real + 2 * z1.imag) + 0j * z2], axis=-1)
        lhs = wirtinger_derivatives(inner(f, g, h.values), G, 0)[0]
        rhs = inner(covariant_derivative(f, h, 0), g, h.values) + \
            inner(f, covariant_derivative(g, h, 0, holomorphic=False), h.values)
        errs.append(float(np.max(np.abs(lhs - rhs)[interior(G)])))
    assert errs[0] / errs[1] >= 3.0


def test_metric_validation():
    G = bidisk(0.2, 0.2)
    with pytest.raises(MetricError):
        MetricField(np.broadcast_to(np.array([[1, 1j], [0, 1]]), G.shape + (2, 2)), G)
    with pytest.raises(MetricError):
        MetricField(-np.ones(G.shape + (1, 1)), G)
    with pytest.raises(MetricError):
        MetricField(np.ones(G.shape + (1, 1)), G, twist=-1.0)
