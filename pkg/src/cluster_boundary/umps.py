"""Translation-invariant MPS: canonical forms and entanglement diagnostics.

Site tensors are stored with legs (left, physical, right). Transfer-matrix
fixed points are taken from the eigenvalue on the positive real axis, which
exists for every completely positive map; this also covers the non-injective
(period-2) states of the two-fold degenerate phase, whose transfer matrices
carry a second eigenvalue of equal modulus on the negative axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .tensor_core import (
    ConvergenceError,
    TruncationReport,
    check_finite,
    dominant_eigs,
    fix_phase,
    polar_isometry,
)

PAULI = {
    "X": np.array([[0.0, 1.0], [1.0, 0.0]]),
    "Z": np.array([[1.0, 0.0], [0.0, -1.0]]),
}

# Schmidt values below this fraction of the largest one are numerically
# indistinguishable from zero when obtained from transfer-matrix fixed points.
SCHMIDT_CUTOFF = 1e-7


class NotCatStateError(ValueError):
    """The state is injective, so it has no two-component decomposition."""


@dataclass(frozen=True)
class UniformMPS:
    a: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a)
        if a.ndim != 3 or a.shape[0] != a.shape[2]:
            raise ValueError(f"uniform MPS tensor must be (chi, d, chi), got {a.shape}")
        check_finite(a, "MPS tensor")
        object.__setattr__(self, "a", a)

    @property
    def chi(self) -> int:
        return self.a.shape[0]

    @property
    def d(self) -> int:
        return self.a.shape[1]

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.a)


@dataclass(frozen=True)
class CanonicalForm:
    al: np.ndarray
    ar: np.ndarray
    c: np.ndarray
    scale: float = 1.0  # norm per site of the input, sqrt of the transfer-matrix spectral radius

    @property
    def chi(self) -> int:
        return self.c.shape[0]

    @property
    def ac(self) -> np.ndarray:
        return np.tensordot(self.al, self.c, axes=(2, 0))

    def isometry_errors(self) -> tuple[float, float, float]:
        """(left isometry, right isometry, al c - c ar) residuals."""
        k = self.chi
        d = self.al.shape[1]
        lm = self.al.reshape(k * d, k)
        rm = self.ar.reshape(k, d * k)
        e_l = np.max(np.abs(lm.conj().T @ lm - np.eye(k)))
        e_r = np.max(np.abs(rm @ rm.conj().T - np.eye(k)))
        lhs = np.tensordot(self.al, self.c, axes=(2, 0))
        rhs = np.tensordot(self.c, self.ar, axes=(1, 0))
        return float(e_l), float(e_r), float(np.max(np.abs(lhs - rhs)))


@dataclass(frozen=True)
class SchmidtSpectrum:
    values: np.ndarray
    ee: float
    gap_ratio: float
    pair_degeneracy: float

    @property
    def probabilities(self) -> np.ndarray:
        return self.values**2


@dataclass(frozen=True)
class TransferSpectrum:
    eigenvalues: np.ndarray
    xi_x: float
    paired: bool


@dataclass(frozen=True)
class CatDecomposition:
    alpha: np.ndarray
    beta: np.ndarray
    residual_t: float
    translation_related: bool
    parity_related: bool
    fidelity_per_site: float


@dataclass(frozen=True)
class CorrelationSeries:
    operator: str
    distances: np.ndarray
    values: np.ndarray
    inf_magnitude: float


# --------------------------------------------------------------------------
# transfer maps


def transfer_right(a: np.ndarray, b: np.ndarray, r: np.ndarray) -> np.ndarray:
    """``sum_s a^s r b^s^dagger``."""
    t = np.tensordot(a, r, axes=(2, 0))
    return np.tensordot(t, b.conj(), axes=((1, 2), (1, 2)))


def transfer_left(a: np.ndarray, b: np.ndarray, l: np.ndarray) -> np.ndarray:
    """``sum_s a^s^dagger l b^s``."""
    t = np.tensordot(l, b, axes=(1, 0))
    return np.tensordot(a.conj(), t, axes=((0, 1), (0, 1)))


def transfer_matrix(a: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    """Dense double tensor ``E[(x, y), (x', y')] = sum_s a^s_{x x'} conj(b^s_{y y'})``."""
    b = a if b is None else b
    e = np.einsum("xsp,ysq->xypq", a, b.conj())
    return e.reshape(a.shape[0] * b.shape[0], a.shape[2] * b.shape[2])


def _perron(apply, chi: int, real: bool, seed: int = 0) -> tuple[complex, np.ndarray]:
    """Fixed point of a CP transfer map on the positive real axis.

    The spectral radius ``rho`` of a CP map is itself an eigenvalue. The map
    is shifted by ``c > 0`` (the identity's Rayleigh quotient) before the
    Krylov solve: ``|lambda + c| < rho + c`` for every other eigenvalue, so
    ``+rho`` becomes the unique largest one in modulus even when the
    peripheral spectrum is a nearly degenerate ring (close to theta = pi/2)
    or a ``(+rho, -rho)`` pair. For a reducible state the eigenvector of the
    largest ``+rho`` selects the dominant sector, which carries all of the
    norm in the thermodynamic limit.
    """
    dim = chi * chi
    eye = np.eye(chi).ravel()
    flat = lambda v: apply(v.reshape(chi, chi)).ravel()  # noqa: E731
    c = float(np.real(np.vdot(eye, flat(eye)))) / chi
    if not c > 0:
        raise ConvergenceError("transfer map annihilates the identity", c)
    # the peripheral spectrum can be crowded (several eigenvalues within
    # 1e-3 of rho), where a small Krylov space converges to the wrong one
    for ncv in (40, 120):
        pairs = dominant_eigs(lambda v: flat(v) + c * v, dim, k=min(2, dim), seed=seed, v0=eye,
                              real=real, ncv=ncv)
        mu = pairs[0][0]
        lam = mu - c
        if lam.real > 0 and abs(lam.imag) <= 1e-6 * abs(mu):
            break
    else:
        raise ConvergenceError("no positive dominant transfer-matrix eigenvalue found", abs(lam))
    vec = pairs[0][1]
    m = vec.reshape(chi, chi)
    m = m / np.trace(m)
    m = 0.5 * (m + m.conj().T)
    if real:
        m = m.real
    return lam.real, m


def fixed_points(a: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """(spectral radius, left fixed point, right fixed point) of the transfer map of ``a``."""
    real = not np.iscomplexobj(a)
    chi = a.shape[0]
    lam, r = _perron(lambda m: transfer_right(a, a, m), chi, real)
    _, l = _perron(lambda m: transfer_left(a, a, m), chi, real)
    return lam, l, r


def _psd_factor(m: np.ndarray, rel_tol: float = 1e-14) -> np.ndarray:
    """Rectangular ``x`` with ``m = x x^dagger`` restricted to the numerically non-zero part."""
    w, v = np.linalg.eigh(m)
    if w[-1] <= 0:
        raise ConvergenceError("fixed point is not positive semidefinite", float(w[-1]))
    keep = w > rel_tol * w[-1]
    return v[:, keep] * np.sqrt(w[keep])


def canonicalize_with_report(
    psi: UniformMPS, chi_max: int | None = None, cutoff: float = SCHMIDT_CUTOFF
) -> tuple[CanonicalForm, TruncationReport]:
    """Mixed canonical form, optionally truncated to ``chi_max`` Schmidt values."""
    a = psi.a
    lam, l, r = fixed_points(a)
    x = _psd_factor(r)
    y = _psd_factor(l).conj().T
    u, s_raw, vh = scipy.linalg.svd(y @ x, full_matrices=False)
    s = s_raw / np.linalg.norm(s_raw)
    keep = int(np.count_nonzero(s > cutoff * s[0]))
    if chi_max is not None:
        keep = min(keep, int(chi_max))
    keep = max(keep, 1)
    # gauge g a g_inv with g g_inv = 1 on the kept subspace
    g = (u[:, :keep].conj().T @ y) / s_raw[:keep, None]
    g_inv = x @ vh[:keep].conj().T
    b = np.tensordot(np.tensordot(g, a, axes=(1, 0)), g_inv, axes=(2, 0)) / np.sqrt(lam)
    d = a.shape[1]
    kept = s[:keep] / np.linalg.norm(s[:keep])
    ar = polar_isometry(b.reshape(keep, d * keep).conj().T).conj().T.reshape(keep, d, keep)
    c = np.diag(kept).astype(ar.dtype)
    al = polar_isometry(np.tensordot(c, ar, axes=(1, 0)).reshape(keep * d, keep)).reshape(keep, d, keep)
    report = TruncationReport(kept=keep, discarded_weight=float(np.sum(s[keep:] ** 2)), spectrum=kept)
    return CanonicalForm(al=al, ar=ar, c=c, scale=float(np.sqrt(lam))), report


def canonicalize(psi: UniformMPS, chi_max: int | None = None) -> CanonicalForm:
    return canonicalize_with_report(psi, chi_max)[0]


def canonical_from_vumps(al: np.ndarray, ar: np.ndarray, c: np.ndarray) -> CanonicalForm:
    """Rotate a variational (al, ar, c) triple so that ``c`` is diagonal and normalised."""
    u, s, vh = scipy.linalg.svd(c)
    s = s / np.linalg.norm(s)
    al = np.tensordot(np.tensordot(u.conj().T, al, axes=(1, 0)), u, axes=(2, 0))
    ar = np.tensordot(np.tensordot(vh, ar, axes=(1, 0)), vh.conj().T, axes=(2, 0))
    keep = int(np.count_nonzero(s > SCHMIDT_CUTOFF * s[0]))
    if keep < len(s):
        # drop numerically empty directions and restore the exact gauge
        return canonicalize(UniformMPS(ar[:keep, :, :keep]))
    return CanonicalForm(al=al, ar=ar, c=np.diag(s).astype(al.dtype))


# --------------------------------------------------------------------------
# diagnostics


def schmidt_spectrum(values: np.ndarray) -> SchmidtSpectrum:
    values = np.sort(np.abs(np.asarray(values, dtype=float)))[::-1]
    values = values / np.linalg.norm(values)
    p = values**2
    nz = p[p > 0]
    ee = float(max(0.0, -np.sum(nz * np.log(nz))))
    gap_ratio = float(values[1] / values[0]) if len(values) > 1 else 0.0
    padded = np.append(values, 0.0) if len(values) % 2 else values
    pairs = padded.reshape(-1, 2)
    pair_deg = float(np.max(np.abs(pairs[:, 1] / pairs[:, 0] - 1.0)))
    return SchmidtSpectrum(values=values, ee=ee, gap_ratio=gap_ratio, pair_degeneracy=pair_deg)


def entanglement_spectrum(cf: CanonicalForm) -> SchmidtSpectrum:
    return schmidt_spectrum(scipy.linalg.svdvals(cf.c))


def _is_paired(ev: np.ndarray, tol: float, floor: float, complete_above: float) -> bool:
    for lam in ev:
        if abs(lam) <= floor or abs(lam) <= complete_above:
            continue
        if np.min(np.abs(ev + lam)) > tol:
            return False
    return True


DENSE_TRANSFER_MAX = 1024


def transfer_spectrum(
    psi: UniformMPS, k: int | None = None, tol: float = 1e-2, floor: float | None = None
) -> TransferSpectrum:
    """Leading eigenvalues of the double tensor, normalised so that ``|lambda_1| = 1``.

    ``paired`` holds when every eigenvalue of modulus above ``floor``
    (default ``tol``) has a partner ``-lambda`` within ``tol``.
    """
    a = psi.a
    dim = psi.chi**2
    if k is None:
        k = dim if dim <= DENSE_TRANSFER_MAX else 8
    if k > dim:
        raise ValueError(f"k={k} exceeds transfer-matrix dimension {dim}")
    if dim <= DENSE_TRANSFER_MAX:
        ev = scipy.linalg.eigvals(transfer_matrix(a))
        ev = ev[np.lexsort((-ev.real, -np.round(np.abs(ev), 10)))][:k]
        complete_above = 0.0 if k == dim else abs(ev[-1])
    else:
        pairs = dominant_eigs(
            lambda v: transfer_right(a, a, v.reshape(psi.chi, psi.chi)).ravel(),
            dim, k=k, real=psi.is_real, v0=np.eye(psi.chi).ravel(),
        )
        ev = np.array([p[0] for p in pairs])
        ev = ev[np.lexsort((-ev.real, -np.round(np.abs(ev), 10)))]
        complete_above = abs(ev[-1])
    ev = ev / abs(ev[0])
    floor = tol if floor is None else floor
    if len(ev) > 1 and abs(ev[1]) < 1 - tol:
        xi = float(-1.0 / np.log(abs(ev[1]))) if abs(ev[1]) > 0 else 0.0
    elif len(ev) > 1:
        xi = float("inf")
    else:
        xi = 0.0
    paired = len(ev) > 1 and _is_paired(ev, tol, floor, complete_above + tol)
    return TransferSpectrum(eigenvalues=ev, xi_x=xi, paired=bool(paired))


def _site_operator(op) -> tuple[str, np.ndarray]:
    if isinstance(op, str):
        return op, PAULI[op.upper()]
    return "custom", np.asarray(op)


def correlator(
    psi: UniformMPS | CanonicalForm,
    op="X",
    l_max: int = 100,
    peripheral_tol: float = 1e-6,
    infinite: bool = True,
) -> CorrelationSeries:
    """Connected two-point function ``<O_0 O_L> - <O_0><O_L>`` for ``L = 1..l_max``.

    ``inf_magnitude`` is the ``L -> infinity`` amplitude, obtained from the
    transfer-matrix eigenvalues of unit modulus other than ``+1``; it is zero
    for injective states. ``infinite=False`` skips it (reported as nan).
    """
    name, o = _site_operator(op)
    cf = psi if isinstance(psi, CanonicalForm) else canonicalize(psi)
    al, ac = cf.al, cf.ac
    o = o.astype(np.result_type(o, al))
    # left block: sum_{s s'} O[s, s'] conj(al[a, s, b]) al[a, s', c]
    oal = np.tensordot(al, o, axes=(1, 1)).transpose(0, 2, 1)  # a s c (O applied)
    v0 = np.tensordot(al.conj(), oal, axes=((0, 1), (0, 1)))
    oac = np.tensordot(ac, o, axes=(1, 1)).transpose(0, 2, 1)
    # right closing vector e_end[b, c] = sum O conj(ac[b, s, e]) ac[c, s', e]
    e_end = np.tensordot(ac.conj(), oac, axes=((1, 2), (1, 2)))
    mean = np.tensordot(ac.conj(), oac, axes=((0, 1, 2), (0, 1, 2)))
    vals = np.empty(l_max, dtype=complex)
    v = v0
    for n in range(l_max):
        vals[n] = np.sum(v * e_end) - mean * mean
        v = transfer_left(al, al, v)
    if np.max(np.abs(vals.imag), initial=0.0) > 1e-8:
        raise ValueError("correlator has a non-negligible imaginary part")
    inf_mag = _infinite_distance_amplitude(al, v0, e_end, peripheral_tol) if infinite else float("nan")
    return CorrelationSeries(
        operator=name,
        distances=np.arange(1, l_max + 1),
        values=vals.real,
        inf_magnitude=inf_mag,
    )


def _infinite_distance_amplitude(al, v0, e_end, peripheral_tol) -> float:
    chi = al.shape[0]
    if chi * chi > DENSE_TRANSFER_MAX * 4:
        raise ValueError("bond dimension too large for the dense spectral projection")
    # row-vector convention: v -> transfer_left(al, al, v) corresponds to v E
    e = transfer_matrix(al)
    w, vl, vr = scipy.linalg.eig(e, left=True, right=True)
    total = 0.0 + 0.0j
    for j in range(len(w)):
        if abs(abs(w[j]) - 1.0) > peripheral_tol or abs(w[j] - 1.0) <= peripheral_tol:
            continue
        left = vl[:, j].conj()  # left eigenvector: left @ e = w left
        right = vr[:, j]
        norm = left @ right
        # v0 as a row vector in the (a, a') double index; e_end as a column
        total += (v0.ravel() @ right) * (left @ e_end.ravel()) / norm
    return float(abs(total))


def truncate_to(psi: UniformMPS, chi: int) -> UniformMPS:
    if chi < 1:
        raise ValueError("chi must be >= 1")
    cf = canonicalize(psi, chi_max=chi)
    return UniformMPS(cf.ar)


def fidelity_per_site(a: UniformMPS, b: UniformMPS) -> float:
    """Per-site overlap ``|<a|b>|^(1/N) / (<a|a><b|b>)^(1/2N)`` in the thermodynamic limit."""
    def radius(x, y):
        dim = x.shape[0] * y.shape[0]
        if dim <= DENSE_TRANSFER_MAX:
            return float(np.max(np.abs(scipy.linalg.eigvals(transfer_matrix(x, y)))))
        pairs = dominant_eigs(
            lambda v: transfer_right(x, y, v.reshape(x.shape[0], y.shape[0])).ravel(), dim, k=1
        )
        return abs(pairs[0][0])

    return radius(a.a, b.a) / np.sqrt(radius(a.a, a.a) * radius(b.a, b.a))


# --------------------------------------------------------------------------
# cat-state structure


def _product_chain(states: list[np.ndarray]) -> np.ndarray:
    out = np.ones(1)
    for s in states:
        out = np.kron(out, s)
    return out


def cat_decompose(psi: UniformMPS, window: int = 4) -> CatDecomposition:
    """Split a two-fold degenerate state into two period-2 product components.

    The state is truncated to bond dimension 2 and the virtual basis chosen so
    that the site tensor is off-diagonal, ``A^{01} = |alpha>``,
    ``A^{10} = |beta>``. The two basis vectors are ordered so that ``alpha``
    has the larger ``<Z>``.
    """
    ts = transfer_spectrum(psi, tol=1e-3)
    if len(ts.eigenvalues) < 2 or abs(ts.eigenvalues[0] + ts.eigenvalues[1]) > 1e-3:
        raise NotCatStateError("transfer spectrum has a unique dominant eigenvalue (injective state)")
    t = truncate_to(psi, 2)
    a = t.a.astype(complex)
    if a.shape[0] != 2:
        raise NotCatStateError("state has a single non-zero Schmidt value")
    # grading z with z a^s + a^s z = 0 for all s
    rows = []
    eye = np.eye(2)
    for s in range(a.shape[1]):
        m = a[:, s, :]
        rows.append(np.kron(m.T, eye) + np.kron(eye, m))  # vec(z m + m z), column-major
    lin = np.vstack(rows)
    _, sv, vh = scipy.linalg.svd(lin)
    z = vh[-1].conj().reshape(2, 2, order="F")
    wz, g_inv = scipy.linalg.eig(z)
    if abs(wz[0] + wz[1]) > 1e-6 * max(abs(wz).max(), 1e-300) or abs(np.linalg.det(g_inv)) < 1e-10:
        raise ConvergenceError("no grading found that makes the site tensor off-diagonal", float(sv[-1]))
    g = np.linalg.inv(g_inv)
    b = np.einsum("xa,asb,by->xsy", g, a, g_inv)
    alpha = b[0, :, 1]
    beta = b[1, :, 0]
    diag = np.concatenate([b[0, :, 0], b[1, :, 1]])
    balance = np.linalg.norm(alpha) * np.linalg.norm(beta)
    residual = float(np.sqrt(np.sum(np.abs(diag) ** 2) / (np.sum(np.abs(diag) ** 2) + 2 * balance)))
    alpha = fix_phase(alpha / np.linalg.norm(alpha))
    beta = fix_phase(beta / np.linalg.norm(beta))
    zop = PAULI["Z"]
    if np.real(alpha.conj() @ zop @ alpha) < np.real(beta.conj() @ zop @ beta):
        alpha, beta = beta, alpha

    psi0 = _product_chain([alpha, beta] * window)
    psi1 = _product_chain([beta, alpha] * window)
    n = 2 * window
    shifted = np.moveaxis(psi0.reshape([2] * n), 0, -1).ravel()
    translation = abs(np.vdot(psi1, shifted)) >= 1 - 1e-10
    # reflection about the bond between sites 0 and 1 maps site j to 1 - j (mod n);
    # per-site phases are allowed, so compare site by site
    sites0 = [alpha, beta] * window
    sites1 = [beta, alpha] * window
    reflected = [sites0[(1 - j) % n] for j in range(n)]
    parity = all(abs(np.vdot(x, y)) >= 1 - 1e-10 for x, y in zip(reflected, sites1))

    rebuilt = np.zeros((2, a.shape[1], 2), dtype=complex)
    rebuilt[0, :, 1] = alpha
    rebuilt[1, :, 0] = beta
    fid = fidelity_per_site(UniformMPS(rebuilt), t)
    return CatDecomposition(
        alpha=alpha,
        beta=beta,
        residual_t=residual,
        translation_related=bool(translation),
        parity_related=bool(parity),
        fidelity_per_site=float(fid),
    )
