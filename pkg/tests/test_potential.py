import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate as spi

from gradterm.grids import build_disk_grid, product_grid
from gradterm.potential import (
    KernelSpec, analytic_young_bound, apply_potential, conjugate_exponent, random_smooth_field,
    refinement_ratio, verify_potential_estimate, young_constant,
)

DISK = build_disk_grid(1.0, 0.1)
PROD = product_grid([build_disk_grid(1.0, 0.15), build_disk_grid(1.0, 0.2)], bound_radius=1.1)
GAUSS = KernelSpec("custom", lambda x, y: np.exp(-np.abs(x - y) ** 2))


def test_constant_kernel_on_constant_field():
    g = build_disk_grid(1.0, 0.05)
    out = apply_potential(KernelSpec.constant(), np.ones(g.size), g)
    assert np.allclose(out, out[0], rtol=0, atol=1e-12)
    assert abs(out[0] - np.pi) <= 3 * 0.05 * np.pi


def test_cauchy_slice_at_center():
    # (1/pi) int_D dA/|w| = 2 in polar coordinates
    g = build_disk_grid(1.0, 0.05)
    out = apply_potential(KernelSpec(), np.ones(g.size), g)
    i = int(np.argmin(np.abs(g.nodes)))
    assert abs(out[i] - 2.0) <= 0.05 * 2.0


@pytest.mark.parametrize("grid", [DISK, PROD], ids=["disk", "product"])
@pytest.mark.parametrize("kernel", [KernelSpec(), KernelSpec.constant(2.0)], ids=["cauchy", "const"])
def test_zero_field_maps_to_zero(grid, kernel):
    shape = (grid.size,) if grid is DISK else grid.shape
    assert np.all(apply_potential(kernel, np.zeros(shape), grid) == 0)


def test_young_constant_of_constant_kernel():
    yc = young_constant(KernelSpec.constant(3.0), 1.0, DISK)
    assert yc["A"] == pytest.approx(3.0 * DISK.size * DISK.cell_area, rel=1e-12)
    assert yc["analytic_bound"] is None


def radial_oracle(r, n, R):
    disk = spi.quad(lambda s: 2 * np.pi * s * (np.pi * s) ** (-r), 0, 2 * R)[0]
    return (np.pi * R) ** (n - 1) * disk


@pytest.mark.parametrize("r", [1.0, 1.25, 1.5, 1.8])
def test_analytic_bound_closed_form(r):
    assert analytic_young_bound(r, 2, 1.1) == pytest.approx(radial_oracle(r, 2, 1.1), rel=1e-8)


def test_analytic_bound_infinite_for_nonintegrable_power():
    assert analytic_young_bound(2.0, 2, 1.1) == np.inf


def test_cauchy_slice_constant_below_analytic_bound():
    yc = young_constant(KernelSpec(), 1.5, PROD)
    assert np.isfinite(yc["A"])
    assert yc["A"] <= yc["analytic_bound"]


def test_refinement_flags_nonintegrable_power():
    coarse, fine = build_disk_grid(1.0, 0.1), build_disk_grid(1.0, 0.05)
    assert refinement_ratio(KernelSpec(), 3.0, coarse, fine) > 1.5
    assert refinement_ratio(KernelSpec(), 1.5, coarse, fine) < 1.5


def test_conjugate_exponent():
    assert conjugate_exponent(1.0, 1.5) == pytest.approx(1.5)
    assert conjugate_exponent(2.0, 2.0) == pytest.approx(1.0)
    assert conjugate_exponent(2.0, np.inf) == pytest.approx(2.0)


def test_estimate_zero_field():
    rep = verify_potential_estimate(KernelSpec(), np.zeros(DISK.size), 1.0, 1.5, DISK)
    c = rep.checks[0]
    assert rep.passed and c.lhs == 0 and c.rhs == 0


def test_estimate_constant_kernel_p_equals_q():
    f = random_smooth_field(np.random.default_rng(3), DISK)
    rep = verify_potential_estimate(KernelSpec.constant(), f, 2.0, 2.0, DISK)
    assert rep.passed and rep.checks[0].slack >= 0


def test_estimate_cauchy_slice_instantiation():
    eta = 0.5
    f = random_smooth_field(np.random.default_rng(4), PROD)
    rep = verify_potential_estimate(KernelSpec(), f, 1.0, 2 - eta, PROD)
    assert rep.config["r"] == pytest.approx(2 - eta)
    assert rep.passed


def test_estimate_rejects_p_above_q():
    with pytest.raises(ValueError):
        verify_potential_estimate(KernelSpec(), np.ones(DISK.size), 3.0, 2.0, DISK)


@given(seed=st.integers(0, 2**32 - 1), on_prod=st.booleans(), kind=st.sampled_from(["cauchy", "const", "gauss"]),
       p=st.floats(1.0, 3.0), extra=st.floats(0.0, 5.0), q_inf=st.booleans())
@settings(max_examples=120, deadline=None)
def test_potential_estimate_property(seed, on_prod, kind, p, extra, q_inf):
    grid = PROD if on_prod else DISK
    kernel = {"cauchy": KernelSpec(), "const": KernelSpec.constant(1.7), "gauss": GAUSS}[kind]
    if on_prod and kind != "cauchy":
        kernel = KernelSpec()
        kind = "cauchy"
    q = np.inf if q_inf else p + extra
    if kind == "cauchy" and conjugate_exponent(p, q) >= 2:
        q = p + extra * 0.1 if p >= 2 else min(q, p + (2 * p / (2 - p) - p) * 0.9)
        if conjugate_exponent(p, q) >= 2:
            q = p
    rng = np.random.default_rng(seed)
    f = random_smooth_field(rng, grid, nonnegative=bool(rng.random() < 0.5))
    rep = verify_potential_estimate(kernel, f, p, q, grid)
    c = rep.checks[0]
    assert c.rhs - c.lhs >= -1e-9 * c.rhs


@given(seed=st.integers(0, 2**32 - 1), k=st.integers(-4, 4))
@settings(max_examples=30, deadline=None)
def test_monotone_and_homogeneous(seed, k):
    rng = np.random.default_rng(seed)
    f = random_smooth_field(rng, DISK)
    g = f + np.abs(random_smooth_field(rng, DISK))
    for kernel in (KernelSpec(), GAUSS):
        vf, vg = apply_potential(kernel, f, DISK), apply_potential(kernel, g, DISK)
        assert np.all(vf <= vg)
        c = 2.0 ** k
        assert np.array_equal(apply_potential(kernel, c * f, DISK), c * vf)
    c = float(rng.uniform(0, 5))
    assert np.allclose(apply_potential(KernelSpec(), c * f, DISK), c * apply_potential(KernelSpec(), f, DISK),
                       rtol=1e-13, atol=0)


def test_infinite_r_uses_kernel_supremum():
    f = random_smooth_field(np.random.default_rng(5), DISK)
    rep = verify_potential_estimate(KernelSpec.constant(2.0), f, 1.0, np.inf, DISK)
    assert rep.data["A^(1/r)"] == 2.0
    assert rep.passed
    with pytest.raises(ValueError):
        young_constant(KernelSpec(), np.inf, DISK)
