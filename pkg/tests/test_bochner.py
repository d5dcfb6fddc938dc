import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gradterm.bochner import BoundaryConditionError, check_rim_vanishing, refinement_table, verify_gradient_identity
from gradterm.catalog import make_metric, make_section
from gradterm.grids import build_disk_grid, product_grid


def bidisk(s, w=0.1):
    return product_grid([build_disk_grid(1.0, s), build_disk_grid(1.0, w)], bound_radius=1.1)


def test_zero_section_has_zero_residual():
    G = bidisk(0.1, 0.2)
    rep = verify_gradient_identity(np.zeros(G.shape + (1,)), make_metric("gaussian", G))
    assert rep.data["residual"] == 0 and rep.passed


@pytest.mark.parametrize("s", [0.05, 0.025])
def test_flat_bump_matches_closed_form(s):
    # dbar f = -z1 v and nabla f = -conj(z1) v: both sides tend to (pi/2) * pi |v|^2
    G = bidisk(s)
    f = make_section("bump", G, cutoff=False)
    rep = verify_gradient_identity(f, make_metric("identity", G))
    exact = np.pi ** 2 / 2
    assert rep.data["relative_residual"] <= 0.05
    # the excluded collar costs about 4 s of the z1 integral
    assert abs(rep.data["lhs"] - exact) <= 5 * s * exact
    assert abs(rep.data["rhs"] - exact) <= 5 * s * exact


def test_gaussian_bump_identity():
    G = bidisk(0.05)
    f = make_section("bump", G, cutoff=False)
    h = make_metric("gaussian", G, K=1.0)
    rep = verify_gradient_identity(f, h)
    assert rep.data["relative_residual"] <= 0.05
    # the curvature term is K ||f||^2 for the Gaussian weight
    from gradterm.bochner import gradient_terms
    t = gradient_terms(f, h)
    assert t["curv"] == pytest.approx(t["f2"], rel=0.02)


@pytest.mark.parametrize("metric, section, rank", [
    ("identity", "bump_poly", 1), ("gaussian", "bump", 1), ("rank2", "bump_poly", 2), ("gaussian", "bump_poly", 1),
])
def test_residual_halves_under_refinement(metric, section, rank):
    def build(s):
        G = bidisk(s, 0.2)
        return make_section(section, G, rank=rank), make_metric(metric, G, rank=rank)

    rows = refinement_table(build, [0.1, 0.05])
    assert rows[0]["ratio"] is None
    assert rows[1]["ratio"] >= 1.8


@given(st.integers(0, 2**32 - 1), st.floats(0.2, 3.0))
@settings(max_examples=15, deadline=None)
def test_positive_curvature_sign_sanity(seed, K):
    G = bidisk(0.1, 0.2)
    f = make_section("random", G, rng=np.random.default_rng(seed))
    rep = verify_gradient_identity(f, make_metric("gaussian", G, K=K))
    assert rep.data["lhs"] <= rep.data["nabla2"] * (1 + 1e-9)
    assert any(c.label.startswith("dbar gradient") and c.passed for c in rep.checks)


def test_rejects_section_not_vanishing_on_rim():
    G = bidisk(0.1, 0.2)
    f = np.ones(G.shape + (1,), dtype=complex)
    with pytest.raises(BoundaryConditionError, match="node"):
        verify_gradient_identity(f, make_metric("identity", G))


def test_accepts_catalog_sections():
    G = bidisk(0.1, 0.2)
    for name in ("bump", "bump_poly", "random"):
        check_rim_vanishing(make_section(name, G, rng=np.random.default_rng(0)), G)
