"""Dominant eigenstates of the row operator on finite chains.

The finite row operator is written as an MPO with open ends. A periodic
chain is handled with the same open-boundary MPS ansatz and an MPO of bond
dimension 4 that carries the value broadcast by the last site back to the
first one. Eigenstates are found by two-site sweeps in which every local
problem is the largest-modulus eigenpair of the projected (non-Hermitian)
operator. Excited states are found with the dominant state projected out.

Long periodic rings can instead be treated with translation-invariant
states ``sum tr(A^s1 ... A^sn)`` built from the uniform fixed point of each
phase (``method="uniform"`` in :func:`gap_scan`).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import defaults
from .model import build_bulk_mpo, finite_row_matrix
from .tensor_core import ConvergenceError, dominant_eigs, fix_phase, svd_truncate
from .umps import UniformMPS, schmidt_spectrum

log = logging.getLogger(__name__)

td = np.tensordot

BRANCHES = ("trivial", "two-fold")
# leading Schmidt pairs count as degenerate below this relative splitting
BRANCH_PAIR_TOL = 0.05


@dataclass
class FiniteMPS:
    tensors: list
    bc: str = "open"
    chi: int = 16

    @property
    def n(self) -> int:
        return len(self.tensors)

    def copy(self) -> "FiniteMPS":
        return FiniteMPS([t.copy() for t in self.tensors], self.bc, self.chi)

    def norm(self) -> float:
        return float(np.sqrt(abs(overlap(self, self))))

    def normalize(self) -> "FiniteMPS":
        nrm = self.norm()
        self.tensors[0] = self.tensors[0] / nrm
        return self

    def to_dense(self) -> np.ndarray:
        if self.n > 20:
            raise ValueError("state too large for a dense vector")
        v = self.tensors[0]
        for t in self.tensors[1:]:
            v = td(v, t, axes=(v.ndim - 1, 0))
        return v.reshape(-1)

    def schmidt_values(self, bond: int | None = None) -> np.ndarray:
        """Schmidt values across the cut between sites ``bond - 1`` and ``bond``."""
        bond = self.n // 2 if bond is None else bond
        if not 0 < bond < self.n:
            raise ValueError("bond must cut the chain into two non-empty parts")
        ts = [t.copy() for t in self.tensors]
        # right-orthonormalise everything right of the cut, left-orthonormalise the rest
        for i in range(self.n - 1, bond - 1, -1):
            cl, d, cr = ts[i].shape
            q, r = scipy.linalg.qr(ts[i].reshape(cl, d * cr).T, mode="economic")
            ts[i] = q.T.reshape(-1, d, cr)
            ts[i - 1] = td(ts[i - 1], r.T, axes=(2, 0))
        for i in range(bond - 1):
            cl, d, cr = ts[i].shape
            q, r = scipy.linalg.qr(ts[i].reshape(cl * d, cr), mode="economic")
            ts[i] = q.reshape(cl, d, -1)
            ts[i + 1] = td(r, ts[i + 1], axes=(1, 0))
        cl, d, cr = ts[bond - 1].shape
        s = scipy.linalg.svdvals(ts[bond - 1].reshape(cl * d, cr))
        return s / np.linalg.norm(s)


def overlap(a: FiniteMPS, b: FiniteMPS) -> complex:
    """``<a|b>``."""
    e = np.ones((1, 1))
    for x, y in zip(a.tensors, b.tensors):
        t = td(e, y, axes=(1, 0))  # xa d yb
        e = td(x.conj(), t, axes=((0, 1), (0, 1)))
    return complex(e[0, 0])


def random_mps(n: int, chi: int, bc: str = "open", seed: int = 0, d: int = 2) -> FiniteMPS:
    rng = np.random.default_rng(seed)
    dims = [1]
    for i in range(1, n):
        dims.append(min(chi, d**i, d ** (n - i)))
    dims.append(1)
    ts = [rng.standard_normal((dims[i], d, dims[i + 1])) for i in range(n)]
    return FiniteMPS(ts, bc, chi).normalize()


def ring_from_uniform(a: np.ndarray, n: int, bc: str = "periodic") -> FiniteMPS:
    """Finite MPS of ``sum tr(A^s1 ... A^sn)`` (periodic) or of the open chain with unit boundary vectors.

    The periodic form carries the trace index along the chain, so its bond
    dimension is ``chi**2``.
    """
    chi = a.shape[0]
    if bc == "open":
        first = a.sum(axis=0, keepdims=True)
        last = a.sum(axis=2, keepdims=True)
        return FiniteMPS([first] + [a] * (n - 2) + [last], bc, chi).normalize()
    eye = np.eye(chi)
    first = a.transpose(1, 2, 0).reshape(1, a.shape[1], chi * chi)  # [1, s, (b, c)]
    mid = np.einsum("asb,ce->acsbe", a, eye).reshape(chi * chi, a.shape[1], chi * chi)
    last = a.transpose(0, 2, 1).reshape(chi * chi, a.shape[1], 1)  # [(a, c), s, 1]
    return FiniteMPS([first] + [mid] * (n - 2) + [last], bc, chi * chi).normalize()


def chain_mpo(theta: float, n: int, bc: str = "open") -> list[np.ndarray]:
    """Row operator on ``n`` sites as a list of MPO tensors with legs (left, right, out, in)."""
    if bc not in ("open", "periodic"):
        raise ValueError(f"unknown boundary condition {bc!r}")
    w = build_bulk_mpo(theta).w
    if bc == "open":
        first = w[:1]  # receiving leg of the first site pinned to 0
        last = w.sum(axis=1, keepdims=True)  # broadcasting leg of the last site summed
        return [first] + [w] * (n - 2) + [last]
    eye = np.eye(2)
    # bond index (c, l): c is the first site's left value, carried along the chain
    first = w.reshape(1, 2 * 2, 2, 2)  # [1, (c=l, r), u, d]
    mid = np.einsum("ce,lrud->clerud", eye, w).reshape(4, 4, 2, 2)
    last = np.einsum("lcud->clud", w).reshape(4, 1, 2, 2)  # r = c
    return [first] + [mid] * (n - 2) + [last]


def apply_chain_mpo(mpo: list[np.ndarray], psi: FiniteMPS) -> FiniteMPS:
    out = []
    for w, a in zip(mpo, psi.tensors):
        t = td(a, w, axes=(1, 3))  # x y l r u
        x, y, l, r, u = t.shape
        out.append(t.transpose(0, 2, 4, 1, 3).reshape(x * l, u, y * r))
    return FiniteMPS(out, psi.bc, psi.chi)


def compress(psi: FiniteMPS, chi: int) -> FiniteMPS:
    """SVD compression to bond dimension ``chi`` (left QR sweep, then truncating right-to-left sweep)."""
    ts = [t.copy() for t in psi.tensors]
    n = len(ts)
    for i in range(n - 1):
        cl, d, cr = ts[i].shape
        q, r = scipy.linalg.qr(ts[i].reshape(cl * d, cr), mode="economic")
        ts[i] = q.reshape(cl, d, -1)
        ts[i + 1] = td(r, ts[i + 1], axes=(1, 0))
    for i in range(n - 1, 0, -1):
        cl, d, cr = ts[i].shape
        u, s, vh, _ = svd_truncate(ts[i].reshape(cl, d * cr), chi)
        ts[i] = vh.reshape(-1, d, cr)
        ts[i - 1] = td(ts[i - 1], u * s, axes=(2, 0))
    return FiniteMPS(ts, psi.bc, chi)


# --------------------------------------------------------------------------
# environments


def _grow_left(env, a, w):
    t = td(env, a, axes=(0, 0))  # l x d b
    t = td(t, w, axes=((0, 2), (0, 3)))  # x b r u
    return td(t, a.conj(), axes=((0, 3), (0, 1)))  # b r y


def _grow_right(env, a, w):
    t = td(a, env, axes=(2, 0))  # a d r y
    t = td(t, w, axes=((1, 2), (3, 1)))  # a y l u
    return td(t, a.conj(), axes=((1, 3), (2, 1)))  # a l x


def _ov_left(env, ket, bra):
    t = td(env, ket, axes=(0, 0))  # x d b
    return td(t, bra.conj(), axes=((0, 1), (0, 1)))  # b y


def _ov_right(env, ket, bra):
    t = td(ket, env, axes=(2, 0))  # a d y
    return td(t, bra.conj(), axes=((1, 2), (1, 2)))  # a x


class _Sweeper:
    """Two-site sweeps for the largest-modulus eigenpair of an MPO.

    ``deflate`` holds orthonormal states ``q_j`` spanning an invariant
    subspace already found; the sweeps then target ``Q H Q`` with
    ``Q = 1 - sum_j |q_j><q_j|``, whose non-zero spectrum is that of ``H``
    without the deflated eigenvalues.
    """

    def __init__(self, mpo, psi: FiniteMPS, chi: int, deflate=()):
        self.mpo = mpo
        self.psi = psi
        self.chi = chi
        self.n = psi.n
        qs = [q.copy().normalize() for q in deflate]
        mpo_dag = [w.transpose(0, 1, 3, 2).conj() for w in mpo]
        # auxiliary kets: q_j, H^dagger q_j, H q_j
        self.aux = []
        for q in qs:
            self.aux += [q, apply_chain_mpo(mpo_dag, q), apply_chain_mpo(mpo, q)]
        nq = len(qs)
        self.coef = np.array([[overlap(qs[j], self.aux[3 * k + 2]) for k in range(nq)] for j in range(nq)])
        self._right_canonicalize()
        n = self.n
        one = np.ones((1, 1, 1))
        self.lenv = [None] * (n + 1)
        self.renv = [None] * (n + 1)
        self.lenv[0] = one
        self.renv[n] = one
        self.lov = [[np.ones((1, 1))] + [None] * n for _ in self.aux]
        self.rov = [[None] * n + [np.ones((1, 1))] for _ in self.aux]
        for i in range(n - 1, 1, -1):
            self._update_right(i)

    def _right_canonicalize(self):
        ts = self.psi.tensors
        for i in range(self.n - 1, 0, -1):
            cl, d, cr = ts[i].shape
            q, r = scipy.linalg.qr(ts[i].reshape(cl, d * cr).T, mode="economic")
            ts[i] = q.T.reshape(-1, d, cr)
            ts[i - 1] = td(ts[i - 1], r.T, axes=(2, 0))
        ts[0] = ts[0] / np.linalg.norm(ts[0])

    def _update_left(self, i):
        a = self.psi.tensors[i]
        self.lenv[i + 1] = _grow_left(self.lenv[i], a, self.mpo[i])
        for k, x in enumerate(self.aux):
            self.lov[k][i + 1] = _ov_left(self.lov[k][i], x.tensors[i], a)

    def _update_right(self, i):
        a = self.psi.tensors[i]
        self.renv[i] = _grow_right(self.renv[i + 1], a, self.mpo[i])
        for k, x in enumerate(self.aux):
            self.rov[k][i] = _ov_right(self.rov[k][i + 1], x.tensors[i], a)

    def _project(self, k, i):
        """Local two-site image ``P^dagger |aux_k>`` of an auxiliary state."""
        x = self.aux[k]
        t = td(self.lov[k][i], x.tensors[i], axes=(0, 0))  # x d b
        t = td(t, x.tensors[i + 1], axes=(2, 0))  # x d1 d2 c
        return td(t, self.rov[k][i + 2], axes=(3, 0)).ravel()  # x d1 d2 z

    def _local(self, i):
        le, re = self.lenv[i], self.renv[i + 2]
        w1, w2 = self.mpo[i], self.mpo[i + 1]
        a1, a2 = self.psi.tensors[i], self.psi.tensors[i + 1]
        shape = (a1.shape[0], a1.shape[1], a2.shape[1], a2.shape[2])
        loc = [self._project(k, i) for k in range(len(self.aux))]
        p = loc[0::3]
        f = loc[1::3]
        h = loc[2::3]
        coef = self.coef

        def matvec(v):
            t = td(le, v.reshape(shape), axes=(0, 0))  # l x d1 d2 c
            t = td(t, w1, axes=((0, 2), (0, 3)))  # x d2 c m u1
            t = td(t, w2, axes=((3, 1), (0, 3)))  # x c u1 r u2
            t = td(t, re, axes=((1, 3), (0, 1)))  # x u1 u2 z
            out = t.ravel()
            if p:
                pv = np.array([np.vdot(x, v) for x in p])
                for j in range(len(p)):
                    out = out - p[j] * np.vdot(f[j], v) - h[j] * pv[j]
                    out = out + p[j] * (coef[j] @ pv)
            return out

        real = not any(np.iscomplexobj(x) for x in [le, re, a1, a2, coef, *loc])
        v0 = td(a1, a2, axes=(2, 0)).ravel()
        dim = v0.size
        base = op = matvec
        if p:
            # keep the local problem inside the complement of the deflated directions,
            # which also fixes the choice inside a degenerate zero eigenspace
            pm = np.stack(p, axis=1)
            pinv = np.linalg.pinv(pm, rcond=1e-10)

            def proj(v):
                return v - pm @ (pinv @ v)

            def op(v):
                return proj(base(proj(v)))

            v0 = proj(v0)
            if np.linalg.norm(v0) < 1e-8:
                v0 = proj(np.random.default_rng(i).standard_normal(dim))
        pairs = dominant_eigs(op, dim, k=min(2, dim), v0=v0, real=real, tol=1e-12)
        top = abs(pairs[0][0])
        cands = [q for q in pairs if abs(q[0]) >= top * (1 - 1e-10)]
        if p:
            # a degenerate group may contain vectors of the deflated span; avoid them
            cands = [(lam, proj(v)) for lam, v in cands]
            lam, vec = max(cands, key=lambda q: (round(np.linalg.norm(q[1]), 8), q[0].real))
            nrm = np.linalg.norm(vec)
            if nrm < 1e-8:
                vec = v0 / np.linalg.norm(v0)
                lam = np.vdot(vec, op(vec))
            else:
                vec = vec / nrm
        else:
            lam, vec = max(cands, key=lambda q: q[0].real)
        if real and np.iscomplexobj(vec):
            # a complex pair: stay real inside its two-dimensional invariant subspace
            part = vec.real if np.linalg.norm(vec.real) >= np.linalg.norm(vec.imag) else vec.imag
            vec = part / np.linalg.norm(part)
            lam = np.vdot(vec, op(vec))
        resid = float(np.linalg.norm(op(vec) - lam * vec))
        return lam, vec.reshape(shape), resid

    def sweep(self):
        n = self.n
        lam = 0.0
        resid = 0.0
        for i in range(n - 1):  # left to right
            lam, theta, r = self._local(i)
            resid = max(resid, r / max(abs(lam), 1e-300))
            cl, d1, d2, cr = theta.shape
            u, s, vh, _ = svd_truncate(theta.reshape(cl * d1, d2 * cr), self.chi)
            self.psi.tensors[i] = u.reshape(cl, d1, -1)
            self.psi.tensors[i + 1] = (s[:, None] * vh).reshape(-1, d2, cr)
            self._update_left(i)
        for i in range(n - 2, -1, -1):  # right to left
            lam, theta, r = self._local(i)
            resid = max(resid, r / max(abs(lam), 1e-300))
            cl, d1, d2, cr = theta.shape
            u, s, vh, _ = svd_truncate(theta.reshape(cl * d1, d2 * cr), self.chi)
            self.psi.tensors[i + 1] = vh.reshape(-1, d2, cr)
            self.psi.tensors[i] = (u * s).reshape(cl, d1, -1)
            self._update_right(i + 1)
        self.psi.tensors[0] = self.psi.tensors[0] / np.linalg.norm(self.psi.tensors[0])
        return lam, resid


def _as_scalar(z: complex):
    z = complex(z)
    return z.real if abs(z.imag) <= 1e-10 * max(abs(z), 1e-300) else z


def _solve(theta, n, bc, chi, deflate=(), sweeps=None, tol=None, seed=0, psi_init=None):
    if n < 4:
        raise ValueError("finite chains need n >= 4")
    sweeps = defaults.get("finite_sweeps") if sweeps is None else sweeps
    tol = defaults.get("finite_tol") if tol is None else tol
    mpo = chain_mpo(theta, n, bc)
    psi = random_mps(n, chi, bc, seed) if psi_init is None else psi_init.copy()
    psi.chi = chi
    sw = _Sweeper(mpo, psi, chi, deflate)
    prev = None
    lam, resid = 0.0, float("inf")
    for _ in range(sweeps):
        lam, resid = sw.sweep()
        # compare moduli: within a near-degenerate (+E, -E) pair the local
        # solver may land on either sign
        if prev is not None and abs(abs(lam) - abs(prev)) <= tol * abs(lam) and resid <= max(tol, 1e-6):
            break
        prev = lam
    else:
        log.warning("finite sweeps stopped at theta=%.4f n=%d (residual %.2e)", theta, n, resid)
    psi = sw.psi
    # eigenvalue as the Rayleigh quotient of the undeflated operator; for a
    # deflated solve it coincides with the local eigenvalue of Q H Q
    e = overlap(psi, apply_chain_mpo(mpo, psi)) / overlap(psi, psi)
    return _as_scalar(e), psi, resid


def ground_state(theta: float, n: int, bc: str = "open", chi: int | None = None, *, seed: int = 0,
                 sweeps: int | None = None, tol: float | None = None):
    """Largest-modulus eigenpair ``(e0, psi0)`` of the ``n``-site row operator."""
    chi = defaults.get("finite_chi") if chi is None else chi
    e, psi, _ = _solve(theta, n, bc, chi, seed=seed, sweeps=sweeps, tol=tol)
    return e, psi


class DeflationLeakError(ConvergenceError):
    pass


def excited_state(theta: float, n: int, bc: str, chi: int | None, psi0: FiniteMPS, e0=None,
                  *, others=(), seed: int = 1, sweeps: int | None = None, tol: float | None = None,
                  leak_tol: float = 1e-6):
    """Largest-modulus eigenpair of ``H`` once ``psi0`` (and ``others``) are deflated.

    The deflated operator is ``Q H Q`` with ``Q`` projecting out the given
    states; for an eigenvector ``psi0`` its non-zero eigenvalues are those of
    ``H`` other than ``e0``, and its eigenvectors are orthogonal to ``psi0``.
    Raises :class:`DeflationLeakError` when the result overlaps a deflated state
    by more than ``leak_tol``.
    """
    chi = defaults.get("finite_chi") if chi is None else chi
    defl = [psi0] + list(others)
    e, psi, _ = _solve(theta, n, bc, chi, deflate=defl, seed=seed, sweeps=sweeps, tol=tol)
    leak = max(abs(overlap(p, psi)) / p.norm() for p in defl)
    if leak > leak_tol:
        raise DeflationLeakError("excited state overlaps a deflated state", leak)
    return e, psi


def branch_of(psi: FiniteMPS) -> str:
    s = psi.schmidt_values()
    lead = s[s >= 0.1 * s[0]]
    if len(lead) < 2:
        return "trivial"
    spec = schmidt_spectrum(lead)
    return "two-fold" if spec.pair_degeneracy <= BRANCH_PAIR_TOL else "trivial"


def mid_chain_ee(psi: FiniteMPS) -> float:
    return schmidt_spectrum(psi.schmidt_values()).ee


@dataclass(frozen=True)
class SpectrumPair:
    theta: float
    n: int
    bc: str
    e0: complex
    e1: complex
    gap: float
    psi0: FiniteMPS | UniformMPS
    psi1: FiniteMPS | UniformMPS | None
    branch0: str
    branch1: str
    cross_gap: float | None = None  # |E| of the best trivial state minus that of the best two-fold one


def spectrum_pair(theta: float, n: int, bc: str, chi: int, *, seed: int = 0,
                  cross_branch: bool = False, max_states: int = 3) -> SpectrumPair:
    """Dominant and subdominant eigenpairs with branch labels.

    ``gap = |e0| - |e1|``, taken positive when ``psi0`` is in the trivial branch
    and negative otherwise. With ``cross_branch`` further states are deflated
    until both branches have been seen, and ``cross_gap`` compares the best
    state of each.
    """
    e0, psi0 = ground_state(theta, n, bc, chi, seed=seed)
    e1, psi1 = excited_state(theta, n, bc, chi, psi0, e0, seed=seed + 1)
    if abs(e1) > abs(e0):
        # the first search settled on a subdominant eigenvector; the deflated one dominates
        (e0, psi0), (e1, psi1) = (e1, psi1), (e0, psi0)
    b0, b1 = branch_of(psi0), branch_of(psi1)
    sign = 1.0 if b0 == "trivial" else -1.0
    gap = sign * (abs(e0) - abs(e1))
    cross = None
    if cross_branch:
        found = [(e0, psi0, b0), (e1, psi1, b1)]
        while len({b for _, _, b in found}) < 2 and len(found) < max_states:
            e, p = excited_state(theta, n, bc, chi, psi0, e0, others=[q for _, q, _ in found[1:]],
                                 seed=seed + len(found))
            found.append((e, p, branch_of(p)))
        best = {}
        for e, _, b in found:
            best.setdefault(b, abs(e))
        if len(best) == 2:
            cross = best["trivial"] - best["two-fold"]
    return SpectrumPair(theta=float(theta), n=n, bc=bc, e0=e0, e1=e1, gap=float(gap), psi0=psi0,
                        psi1=psi1, branch0=b0, branch1=b1, cross_gap=cross)


def ring_expectation(a: np.ndarray, theta: float, n: int) -> complex:
    """``<psi|H|psi> / <psi|psi>`` on a periodic ring for ``psi = sum tr(A^s1 ... A^sn)``.

    Both traces are powers of ``chi^2``-sized transfer matrices (``2 chi^2``
    with the row operator inserted), so the cost does not grow with ``n``.
    """
    a = np.asarray(a)
    chi = a.shape[0]
    w = build_bulk_mpo(theta).w  # l r u d
    t_h = np.einsum("xdy,lrud,aub->xlayrb", a, w, a.conj()).reshape(2 * chi * chi, -1)
    t = np.einsum("xsy,asb->xayb", a, a.conj()).reshape(chi * chi, -1)

    def log_trace_power(m):
        # scale by the spectral radius so that the n-th power stays finite
        rho = float(np.max(np.abs(np.linalg.eigvals(m))))
        return np.trace(np.linalg.matrix_power(m / rho, n)), np.log(rho)

    num, log_h = log_trace_power(t_h)
    den, log_n = log_trace_power(t)
    return _as_scalar(num / den * np.exp(n * (log_h - log_n)))


_BRANCH_SEEDS = {}


def _branch_seeds(chi: int) -> list[UniformMPS]:
    from .solvers import vumps_fixed_point

    if chi not in _BRANCH_SEEDS:
        _BRANCH_SEEDS[chi] = [vumps_fixed_point(t, chi).psi for t in (1.2, 1.45)]
    return _BRANCH_SEEDS[chi]


def uniform_ring_pair(theta: float, n: int, chi: int, seeds=None) -> SpectrumPair:
    """Dominant branch of a periodic ring from translation-invariant trial states.

    Every seed (by default one uniform fixed point from each phase) is relaxed
    with VUMPS at ``theta``; each distinct branch found gives the ring state
    ``sum tr(A ... A)`` and its :func:`ring_expectation`. ``e0`` and ``psi0``
    belong to the branch of largest modulus, ``e1`` and ``psi1`` to the other
    one (``nan`` and ``None`` when only one branch survives). The states are
    returned as :class:`UniformMPS`.
    """
    from .solvers import state_is_two_fold, vumps_fixed_point

    seeds = _branch_seeds(chi) if seeds is None else seeds
    found = {}
    for s in seeds:
        fp = vumps_fixed_point(theta, chi, psi0=s)
        label = "two-fold" if state_is_two_fold(fp.psi, fp.canonical) else "trivial"
        e = ring_expectation(fp.psi.a, theta, n)
        if label not in found or abs(e) > abs(found[label][0]):
            found[label] = (e, fp.psi)
    ranked = sorted(found.items(), key=lambda kv: -abs(kv[1][0]))
    b0, (e0, psi0) = ranked[0]
    if len(ranked) > 1:
        b1, (e1, psi1) = ranked[1]
        sign = 1.0 if b0 == "trivial" else -1.0
        gap = sign * (abs(e0) - abs(e1))
        cross = abs(found["trivial"][0]) - abs(found["two-fold"][0])
    else:
        b1, e1, psi1, gap, cross = b0, float("nan"), None, float("nan"), None
    return SpectrumPair(theta=float(theta), n=n, bc="periodic", e0=e0, e1=e1, gap=float(gap),
                        psi0=psi0, psi1=psi1, branch0=b0, branch1=b1, cross_gap=cross)


def gap_scan(theta_grid, n_list, bc: str = "periodic", chi: int | None = None, *,
             cross_branch: bool = False, seed: int = 0, method: str = "sweep") -> list[SpectrumPair]:
    """:func:`spectrum_pair` (``method="sweep"``) or :func:`uniform_ring_pair` on a grid.

    The uniform method needs a periodic chain; it ignores ``cross_branch``
    and ``seed`` since both branches are always tried.
    """
    chi = defaults.get("finite_chi") if chi is None else chi
    theta_grid = list(theta_grid)
    n_list = list(n_list)
    if not theta_grid or not n_list:
        raise ValueError("theta grid and n list must be non-empty")
    if method == "uniform":
        if bc != "periodic":
            raise ValueError("the uniform ring method needs periodic boundary conditions")
        return [uniform_ring_pair(t, n, chi) for n in n_list for t in theta_grid]
    if method != "sweep":
        raise ValueError(f"unknown method {method!r}")
    return [spectrum_pair(t, n, bc, chi, seed=seed, cross_branch=cross_branch)
            for n in n_list for t in theta_grid]


def level_crossings(pairs: list[SpectrumPair]) -> list[tuple[float, float]]:
    """Intervals of consecutive angles (same ``n``) across which ``branch0`` changes."""
    out = []
    by_n = {}
    for p in pairs:
        by_n.setdefault(p.n, []).append(p)
    for ps in by_n.values():
        ps = sorted(ps, key=lambda p: p.theta)
        for a, b in zip(ps, ps[1:]):
            if a.branch0 != b.branch0:
                out.append((a.theta, b.theta))
    return out


def dense_spectrum(theta: float, n: int, bc: str = "open", k: int = 2):
    """Leading eigenvalues and eigenvectors of the dense row matrix, by modulus."""
    h = finite_row_matrix(theta, n, bc)
    w, v = np.linalg.eig(h)
    order = np.lexsort((-w.real, -np.round(np.abs(w), 10)))[:k]
    return w[order], np.stack([fix_phase(v[:, j]) for j in order], axis=1)
