import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cluster_boundary.model import build_bulk_mpo, build_lower_boundary_imps
from cluster_boundary.umps import (
    NotCatStateError,
    UniformMPS,
    canonicalize,
    canonicalize_with_report,
    cat_decompose,
    correlator,
    entanglement_spectrum,
    fidelity_per_site,
    schmidt_spectrum,
    transfer_spectrum,
    truncate_to,
)


def random_umps(chi, d, seed, complex_=False):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((chi, d, chi))
    if complex_:
        a = a + 1j * rng.standard_normal((chi, d, chi))
    return UniformMPS(a)


def cat_umps(alpha, beta):
    a = np.zeros((2, 2, 2))
    a[0, :, 1] = alpha
    a[1, :, 0] = beta
    return UniformMPS(a)


@given(chi=st.integers(1, 8), d=st.integers(2, 3), seed=st.integers(0, 10_000), cplx=st.booleans())
def test_canonical_form_isometries(chi, d, seed, cplx):
    cf = canonicalize(random_umps(chi, d, seed, cplx))
    assert max(cf.isometry_errors()) <= 1e-10
    s = np.diag(cf.c).real
    assert np.all(np.diff(s) <= 1e-12) and np.sum(s**2) == pytest.approx(1.0)


@given(chi=st.integers(2, 6), seed=st.integers(0, 10_000))
def test_canonical_form_represents_same_state(chi, seed):
    psi = random_umps(chi, 2, seed)
    cf = canonicalize(psi)
    assert fidelity_per_site(psi, UniformMPS(cf.ar)) == pytest.approx(1.0, abs=1e-10)
    assert fidelity_per_site(psi, UniformMPS(cf.al)) == pytest.approx(1.0, abs=1e-10)


@given(chi=st.integers(2, 6), seed=st.integers(0, 10_000))
def test_schmidt_values_gauge_invariant(chi, seed):
    psi = random_umps(chi, 2, seed)
    g = np.random.default_rng(seed + 1).standard_normal((chi, chi)) + 3 * np.eye(chi)
    a2 = np.einsum("xa,asb,by->xsy", g, psi.a, np.linalg.inv(g))
    s1 = entanglement_spectrum(canonicalize(psi)).values
    s2 = entanglement_spectrum(canonicalize(UniformMPS(a2))).values
    np.testing.assert_allclose(s1, s2, atol=1e-8)


def test_truncation_report_and_truncate_to():
    psi = random_umps(6, 2, 3)
    cf, rep = canonicalize_with_report(psi, chi_max=3)
    assert rep.kept == 3 == cf.chi
    assert rep.discarded_weight > 0
    assert truncate_to(psi, 2).chi == 2
    with pytest.raises(ValueError):
        truncate_to(psi, 0)


def test_uniform_mps_validation():
    with pytest.raises(ValueError):
        UniformMPS(np.ones((2, 2, 3)))
    with pytest.raises(ValueError):
        UniformMPS(np.full((2, 2, 2), np.nan))


@given(st.lists(st.floats(1e-6, 1.0), min_size=1, max_size=12))
def test_schmidt_spectrum_properties(vals):
    sp = schmidt_spectrum(np.array(vals))
    assert sp.ee >= 0.0
    assert np.sum(sp.probabilities) == pytest.approx(1.0)
    assert sp.ee <= np.log(len(vals)) + 1e-12
    assert 0.0 <= sp.gap_ratio <= 1.0


def test_schmidt_spectrum_pairs():
    sp = schmidt_spectrum(np.array([0.8, 0.8, 0.3, 0.3]))
    assert sp.pair_degeneracy == pytest.approx(0.0)
    assert sp.gap_ratio == pytest.approx(1.0)
    assert sp.ee == pytest.approx(-np.sum(sp.probabilities * np.log(sp.probabilities)))
    single = schmidt_spectrum(np.array([1.0]))
    assert single.ee == 0.0 and single.gap_ratio == 0.0


def test_product_state_diagnostics():
    psi = UniformMPS(np.array([1.0, 0.0]).reshape(1, 2, 1))
    ts = transfer_spectrum(psi)
    assert ts.eigenvalues[0] == pytest.approx(1.0) and ts.xi_x == 0.0
    c = correlator(psi, "X", 10)
    np.testing.assert_allclose(c.values, 0.0, atol=1e-15)
    assert c.inf_magnitude == 0.0


def test_injective_transfer_spectrum_normalised():
    psi = random_umps(4, 2, 11)
    ts = transfer_spectrum(psi)
    assert abs(ts.eigenvalues[0]) == pytest.approx(1.0)
    assert np.all(np.abs(ts.eigenvalues) <= 1 + 1e-10)
    assert 0 < ts.xi_x < np.inf
    assert not ts.paired


def test_cat_state_structure():
    plus = np.array([1.0, 1.0]) / np.sqrt(2)
    psi = cat_umps(np.array([1.0, 0.0]), plus)
    ts = transfer_spectrum(psi)
    assert ts.paired and ts.xi_x == np.inf
    np.testing.assert_allclose(sorted(ts.eigenvalues.real), [-1, -np.sqrt(0.5), np.sqrt(0.5), 1], atol=1e-12)
    cat = cat_decompose(psi)
    assert abs(cat.alpha[0]) ** 2 == pytest.approx(1.0)
    assert abs(np.vdot(cat.beta, plus)) ** 2 == pytest.approx(1.0)
    assert cat.residual_t <= 1e-12
    assert cat.translation_related and cat.parity_related
    assert cat.fidelity_per_site == pytest.approx(1.0)


def test_cat_correlator_long_range_and_alternating():
    psi = cat_umps(np.array([1.0, 0.0]), np.array([1.0, 1.0]) / np.sqrt(2))
    c = correlator(psi, "Z", 60)
    # <Z> alternates 1, 0: connected correlator +-1/4 at every distance
    np.testing.assert_allclose(np.abs(c.values), 0.25, atol=1e-12)
    assert np.all(np.sign(c.values[::2]) != np.sign(c.values[1::2]))
    assert c.inf_magnitude == pytest.approx(0.25)
    assert np.isnan(correlator(psi, "Z", 5, infinite=False).inf_magnitude)


def test_cat_decompose_rejects_injective():
    with pytest.raises(NotCatStateError):
        cat_decompose(random_umps(3, 2, 5))


def test_correlator_decays_for_injective_state():
    psi = random_umps(4, 2, 7)
    c = correlator(psi, "Z", 80)
    assert abs(c.values[-1]) < 1e-8
    assert c.inf_magnitude == pytest.approx(0.0, abs=1e-10)


def test_correlator_against_brute_force():
    # small chi: compare with an explicit transfer-matrix sum
    psi = random_umps(3, 2, 21)
    cf = canonicalize(psi)
    z = np.diag([1.0, -1.0])
    ar = cf.ar
    c = cf.c
    rho = c @ c.T
    def e_op(o):
        return np.einsum("asb,st,ctd->acbd", ar, o, ar).reshape(9, 9)
    e = e_op(np.eye(2))
    left = rho.reshape(-1) @ e_op(z)  # C^2 on the left bond of site 0
    right_id = np.eye(3).reshape(-1)
    mean = left @ right_id
    vals = []
    v = left
    for _ in range(5):
        vals.append(v @ e_op(z) @ right_id - mean**2)
        v = v @ e
    np.testing.assert_allclose(correlator(cf, "Z", 5).values, vals, atol=1e-12)


def test_lower_boundary_state_is_normalisable():
    for theta in (0.0, 0.6, 1.2, np.pi / 2):
        psi = build_lower_boundary_imps(theta)
        cf = canonicalize(build_bulk_mpo(theta).apply(psi))
        assert max(cf.isometry_errors()) <= 1e-10
