import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cluster_boundary.finite import (
    FiniteMPS,
    SpectrumPair,
    apply_chain_mpo,
    branch_of,
    chain_mpo,
    compress,
    dense_spectrum,
    excited_state,
    gap_scan,
    ground_state,
    level_crossings,
    mid_chain_ee,
    overlap,
    random_mps,
    ring_expectation,
    ring_from_uniform,
    uniform_ring_pair,
)
from cluster_boundary.model import HALF_PI, finite_row_matrix


def mpo_to_dense(mpo):
    m = mpo[0]  # l r u d
    m = m.sum(axis=0)  # open left end has size 1
    for w in mpo[1:]:
        t = np.tensordot(m, w, axes=(0, 0))  # U D r u d
        u, d = t.shape[0], t.shape[1]
        m = t.transpose(2, 0, 3, 1, 4).reshape(w.shape[1], u * w.shape[2], d * w.shape[3])
    return m.sum(axis=0)


@pytest.mark.parametrize("bc", ["open", "periodic"])
@pytest.mark.parametrize("n", [3, 4, 5])
@pytest.mark.parametrize("theta", [0.0, 0.9, 1.4, HALF_PI])
def test_chain_mpo_matches_row_matrix(bc, n, theta):
    np.testing.assert_allclose(mpo_to_dense(chain_mpo(theta, n, bc)), finite_row_matrix(theta, n, bc), atol=1e-12)


@given(n=st.integers(2, 7), chi=st.integers(1, 6), seed=st.integers(0, 1000))
def test_random_mps_normalised_and_schmidt(n, chi, seed):
    psi = random_mps(n, chi, seed=seed)
    v = psi.to_dense()
    assert np.linalg.norm(v) == pytest.approx(1.0)
    for bond in range(1, n):
        s = psi.schmidt_values(bond)
        ref = np.linalg.svd(v.reshape(2**bond, -1), compute_uv=False)
        np.testing.assert_allclose(np.sort(s)[::-1][: len(ref)], ref[: len(s)], atol=1e-10)


def test_overlap_and_compress(rng):
    a = random_mps(7, 4, seed=1)
    b = random_mps(7, 4, seed=2)
    assert overlap(a, b) == pytest.approx(np.vdot(a.to_dense(), b.to_dense()))
    big = apply_chain_mpo(chain_mpo(1.1, 7, "open"), a)
    exact = compress(big, 64)
    np.testing.assert_allclose(exact.to_dense(), big.to_dense(), atol=1e-12)
    small = compress(big, 2)
    assert max(t.shape[2] for t in small.tensors) <= 2


def test_ring_from_uniform_is_trace(rng):
    a = rng.standard_normal((2, 2, 2))
    ring = ring_from_uniform(a, 4, "periodic").to_dense()
    ref = np.array([np.trace(a[:, i] @ a[:, j] @ a[:, k] @ a[:, l]) for i, j, k, l in np.ndindex(2, 2, 2, 2)])
    ref = ref / np.linalg.norm(ref)
    assert abs(np.vdot(ring, ref)) == pytest.approx(1.0)


@pytest.mark.parametrize("bc", ["open", "periodic"])
@pytest.mark.parametrize("theta", [0.5, 1.3, 1.45])
def test_ground_and_excited_against_dense(bc, theta):
    n = 6
    w, v = dense_spectrum(theta, n, bc, k=2)
    e0, psi0 = ground_state(theta, n, bc, chi=8)
    e1, psi1 = excited_state(theta, n, bc, 8, psi0, e0)
    got = sorted([abs(e0), abs(e1)])
    np.testing.assert_allclose(got, sorted(np.abs(w)), rtol=1e-8)
    assert abs(overlap(psi0, psi1)) <= 1e-6
    # psi0 is an eigenvector
    h = finite_row_matrix(theta, n, bc)
    x = psi0.to_dense()
    assert np.linalg.norm(h @ x - e0 * x) <= 1e-6 * abs(e0)


def test_theta_zero_degenerate_null_space():
    # rank-one row operator: one non-zero eigenvalue, the rest vanish
    e0, psi0 = ground_state(0.0, 5, "open", chi=4)
    e1, psi1 = excited_state(0.0, 5, "open", 4, psi0, e0)
    w, _ = dense_spectrum(0.0, 5, "open", k=2)
    assert abs(e0) == pytest.approx(abs(w[0]))
    assert abs(e1) == pytest.approx(0.0, abs=1e-8)


def test_short_chain_rejected():
    with pytest.raises(ValueError):
        ground_state(1.0, 3, "open", chi=4)


def test_branch_labels():
    product = FiniteMPS([np.array([1.0, 0.0]).reshape(1, 2, 1)] * 6, "open", 1)
    assert branch_of(product) == "trivial"
    assert mid_chain_ee(product) == pytest.approx(0.0)
    a = np.zeros((2, 2, 2))
    a[0, :, 1] = [1.0, 0.0]
    a[1, :, 0] = [0.0, 1.0]
    cat = ring_from_uniform(a, 8, "periodic")
    assert branch_of(cat) == "two-fold"


def _pair(theta, b0, n=10):
    return SpectrumPair(theta=theta, n=n, bc="periodic", e0=1.0, e1=0.5, gap=0.5, psi0=None, psi1=None,
                        branch0=b0, branch1="trivial" if b0 == "two-fold" else "two-fold")


def test_level_crossings():
    pairs = [_pair(1.3, "trivial"), _pair(1.4, "two-fold"), _pair(1.35, "trivial"), _pair(1.3, "trivial", n=12)]
    assert level_crossings(pairs) == [(1.35, 1.4)]


def test_gap_scan_requires_grid():
    with pytest.raises(ValueError):
        gap_scan([], [10])
    with pytest.raises(ValueError):
        gap_scan([1.0], [])


def test_gap_sign_follows_branch():
    (p,) = gap_scan([1.2], [8], "periodic", chi=8)
    assert p.branch0 == "trivial" and p.gap > 0
    # short rings still favour the trivial branch at 1.5; the cat branch is
    # the negative subdominant eigenvalue
    (q,) = gap_scan([1.5], [12], "periodic", chi=16)
    assert (q.branch0, q.branch1) == ("trivial", "two-fold")
    assert q.gap > 0 and np.real(q.e1) < 0
    w, _ = dense_spectrum(1.5, 12, "periodic", k=2)
    np.testing.assert_allclose([q.e0, q.e1], w.real, rtol=1e-3)


@given(n=st.integers(3, 8), chi=st.integers(1, 3), theta=st.floats(0.0, HALF_PI), seed=st.integers(0, 1000))
def test_ring_expectation_is_rayleigh_quotient(n, chi, theta, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((chi, 2, chi))
    v = ring_from_uniform(a, n).to_dense()
    if np.linalg.norm(v) < 1e-8:
        return
    h = finite_row_matrix(theta, n, "periodic")
    expected = np.vdot(v, h @ v) / np.vdot(v, v)
    assert abs(ring_expectation(a, theta, n) - expected) <= 1e-9 * max(1.0, abs(expected))


def test_uniform_ring_pair_close_to_dense():
    # trial states from the infinite chain, so agreement improves with n
    errs = []
    for n in (8, 12):
        p = uniform_ring_pair(1.2, n, 8)
        e_dense = dense_spectrum(1.2, n, "periodic", k=1)[0][0].real
        errs.append(abs(p.e0 - e_dense) / e_dense)
        assert p.branch0 == "trivial"
    assert errs[1] < errs[0] < 5e-3


def test_uniform_ring_pair_branches_swap():
    lo = uniform_ring_pair(1.33, 100, 8)
    hi = uniform_ring_pair(1.43, 100, 8)
    assert lo.branch0 == "trivial" and hi.branch0 == "two-fold"
    if hi.cross_gap is not None:
        assert hi.cross_gap < 0 and hi.gap < 0


def test_uniform_method_needs_periodic():
    with pytest.raises(ValueError):
        gap_scan([1.3], [20], "open", 8, method="uniform")
    with pytest.raises(ValueError):
        gap_scan([1.3], [20], "periodic", 8, method="exact")
