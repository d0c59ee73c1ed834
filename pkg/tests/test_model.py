import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cluster_boundary.model import (
    HALF_PI,
    AngleError,
    SiteTensor,
    build_bulk_mpo,
    build_bulk_tensor,
    build_lower_boundary_imps,
    build_lower_boundary_tensor,
    build_projector,
    build_site_tensor,
    build_upper_boundary_map,
    cz_signs,
    finite_row_matrix,
)
from cluster_boundary.oracle import exact_boundary_state, lower_boundary_chain

angles = st.floats(0.0, HALF_PI, allow_nan=False)


@given(angles)
def test_projector_is_rank_one_orthogonal_projector(theta):
    p = build_projector(theta)
    np.testing.assert_allclose(p.matrix @ p.matrix, p.matrix, atol=1e-14)
    np.testing.assert_allclose(p.matrix, p.matrix.T, atol=0)
    assert np.trace(p.matrix) == pytest.approx(1.0)
    np.testing.assert_allclose(p.matrix @ p.direction, p.direction, atol=1e-14)
    np.testing.assert_allclose(np.outer(p.direction, p.direction), p.matrix, atol=1e-14)


@pytest.mark.parametrize("theta", [-0.1, HALF_PI + 1e-6, np.nan, np.inf])
def test_angle_out_of_range(theta):
    with pytest.raises(AngleError):
        build_projector(theta)
    with pytest.raises(AngleError):
        build_bulk_mpo(theta)


def test_projector_end_points():
    np.testing.assert_allclose(build_projector(0.0).direction, [1.0, 0.0])
    np.testing.assert_allclose(build_projector(HALF_PI).direction, np.array([1.0, 1.0]) / np.sqrt(2))


def test_site_tensor_structure():
    t = build_site_tensor().tensor
    assert t.shape == (2, 2, 2, 2, 2)
    # physical index copied to the broadcasting legs
    for l, r, u, d, s in np.ndindex(t.shape):
        if r != s or u != s:
            assert t[l, r, u, d, s] == 0.0
        else:
            assert abs(t[l, r, u, d, s]) == pytest.approx(2**-0.5)


def test_site_tensor_role_checked():
    with pytest.raises(ValueError):
        SiteTensor("nonsense", np.zeros(2))


@given(angles)
def test_tensor_shapes_and_reality(theta):
    assert build_bulk_tensor(theta).tensor.shape == (2, 2, 2, 2)
    assert build_lower_boundary_tensor(theta).tensor.shape == (2, 2, 2)
    h = build_bulk_mpo(theta)
    assert h.w.shape == (2, 2, 2, 2) and h.bond == 2
    assert not np.iscomplexobj(h.w)
    psi = build_lower_boundary_imps(theta)
    assert psi.chi == 2 and psi.d == 2
    assert h.apply(psi).chi == 4


def test_upper_boundary_map_is_unitary_cz_chain():
    bm = build_upper_boundary_map()
    u = bm.site_unitary
    np.testing.assert_allclose(u.T @ u, np.eye(2), atol=1e-14)
    vec = np.random.default_rng(0).standard_normal(8)
    out = bm.apply_dense(vec, 3)
    assert np.linalg.norm(out) == pytest.approx(np.linalg.norm(vec))


def test_cz_signs():
    # |11> picks up a sign, and periodic closing adds the (n-1, 0) pair
    np.testing.assert_array_equal(cz_signs(2), [1, 1, 1, -1])
    s_open = cz_signs(3)
    s_per = cz_signs(3, periodic=True)
    assert s_open[0b101] == 1 and s_per[0b101] == -1


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_row_matrix_unitary_at_half_pi(n):
    h = finite_row_matrix(HALF_PI, n, "periodic")
    assert np.max(np.abs(h.T @ h - np.eye(2**n))) <= 1e-10


def test_row_matrix_not_unitary_below_half_pi():
    h = finite_row_matrix(1.2, 4, "periodic")
    assert np.max(np.abs(h.T @ h - np.eye(16))) > 1e-2


@given(angles, st.integers(3, 6))
def test_periodic_row_matrix_translation_invariant(theta, n):
    h = finite_row_matrix(theta, n, "periodic")
    idx = np.arange(2**n)
    # cyclic shift of the bit string by one site
    shifted = ((idx << 1) | (idx >> (n - 1))) & (2**n - 1)
    perm = np.eye(2**n)[shifted]
    np.testing.assert_allclose(perm @ h @ perm.T, h, atol=1e-12)


@pytest.mark.parametrize("theta", [0.0, 0.7, 1.37, HALF_PI])
@pytest.mark.parametrize("n", [2, 3, 4])
def test_open_row_matrix_against_post_selection(theta, n):
    # three rows: lower boundary, one bulk row, top row left unmeasured
    vec = finite_row_matrix(theta, n, "open") @ lower_boundary_chain(theta, n).to_dense()
    top = build_upper_boundary_map().apply_dense(vec, n)
    exact, _ = exact_boundary_state(n, 3, theta)
    fid = abs(np.vdot(exact.amplitudes, top)) ** 2 / np.vdot(top, top).real
    assert fid == pytest.approx(1.0, abs=1e-12)


def test_row_matrix_argument_checks():
    with pytest.raises(ValueError):
        finite_row_matrix(1.0, 13)
    with pytest.raises(ValueError):
        finite_row_matrix(1.0, 0)
    with pytest.raises(ValueError):
        finite_row_matrix(1.0, 3, "twisted")
