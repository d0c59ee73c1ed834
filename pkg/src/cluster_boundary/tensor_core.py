"""Dense tensor primitives shared by the rest of the package.

Tensors are plain ``numpy.ndarray`` objects (C order). Real inputs stay real
wherever the operation allows it; complex inputs are handled throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla


class TensorError(ValueError):
    """Raised for malformed tensor operations (shape/axis problems)."""


class ConvergenceError(RuntimeError):
    """Raised when an iterative eigensolver fails to converge."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class TruncationReport:
    kept: int
    discarded_weight: float
    spectrum: np.ndarray

    def __post_init__(self):
        if self.discarded_weight < 0:
            raise TensorError("discarded weight must be non-negative")


def check_finite(t: np.ndarray, what: str = "tensor") -> np.ndarray:
    if not np.all(np.isfinite(t)):
        raise TensorError(f"{what} contains non-finite entries")
    return t


def contract(a: np.ndarray, b: np.ndarray, pairs: Sequence[tuple[int, int]]) -> np.ndarray:
    """Sum over paired axes of ``a`` and ``b``.

    The result carries the free axes of ``a`` followed by the free axes of
    ``b``, each in their original order.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    axes_a = [int(p[0]) for p in pairs]
    axes_b = [int(p[1]) for p in pairs]
    for ax, t, name in ((axes_a, a, "a"), (axes_b, b, "b")):
        if len(set(ax)) != len(ax):
            raise TensorError(f"axis of {name} listed twice: {ax}")
        for i in ax:
            if not -t.ndim <= i < t.ndim:
                raise TensorError(f"axis {i} out of range for {name} with ndim {t.ndim}")
    for i, j in zip(axes_a, axes_b):
        if a.shape[i] != b.shape[j]:
            raise TensorError(
                f"dimension mismatch: a axis {i} has {a.shape[i]}, b axis {j} has {b.shape[j]}"
            )
    return np.tensordot(a, b, axes=(axes_a, axes_b))


def svd_truncate(
    m: np.ndarray, chi_max: int, weight_tol: float = 0.0
) -> tuple[np.ndarray, np.ndarray, np.ndarray, TruncationReport]:
    """Truncated SVD ``m ~ U @ diag(S) @ V``.

    Keeps at most ``chi_max`` singular values and drops those below
    ``weight_tol * S[0]``. The report's ``discarded_weight`` is the squared
    Frobenius norm of the dropped part.
    """
    m = np.asarray(m)
    if m.ndim != 2:
        raise TensorError(f"svd_truncate expects a matrix, got ndim={m.ndim}")
    if chi_max < 1:
        raise TensorError("chi_max must be >= 1")
    check_finite(m, "matrix")
    try:
        u, s, vh = scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        u, s, vh = scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesvd")
    keep = min(chi_max, len(s))
    if len(s) and weight_tol > 0:
        keep = min(keep, max(1, int(np.count_nonzero(s > weight_tol * s[0]))))
    keep = max(keep, 1) if len(s) else 0
    discarded = float(np.sum(s[keep:] ** 2))
    report = TruncationReport(kept=keep, discarded_weight=discarded, spectrum=s[:keep].copy())
    return u[:, :keep], s[:keep], vh[:keep], report


def _pick_order(w: np.ndarray, which: str) -> np.ndarray:
    if which == "LM":
        # modulus, ties broken towards the positive real axis
        return np.lexsort((-w.real, -np.round(np.abs(w), 12)))
    if which == "LR":
        return np.lexsort((-np.abs(w), -w.real))
    raise ValueError(f"unknown selection rule {which!r}")


DENSE_FALLBACK_MAX = 4096


def _no_convergence(exc, apply) -> ConvergenceError:
    res = float("nan")
    if getattr(exc, "eigenvalues", None) is not None and len(exc.eigenvalues):
        v = exc.eigenvectors[:, 0]
        res = float(np.linalg.norm(apply(v) - exc.eigenvalues[0] * v))
    return ConvergenceError(f"Arnoldi iteration failed: {exc}", res)


def dominant_eigs(
    apply: Callable[[np.ndarray], np.ndarray],
    dim: int,
    k: int = 1,
    seed: int = 0,
    *,
    v0: np.ndarray | None = None,
    real: bool = False,
    which: str = "LM",
    tol: float = 0.0,
    ncv: int | None = None,
    max_restarts: int = 500,
    dense_below: int = 64,
) -> list[tuple[complex, np.ndarray]]:
    """Leading eigenpairs of a (generally non-Hermitian) linear map.

    Uses implicitly restarted Arnoldi (ARPACK) with a Krylov space of at
    least ``3k + 10`` vectors; small problems are diagonalised densely.
    Pairs are sorted by modulus (``which="LM"``) or real part (``"LR"``);
    equal-modulus eigenvalues are all returned. Eigenvectors have unit norm
    and their largest component made real positive.

    ``real=True`` declares that ``apply`` maps real vectors to real vectors,
    which lets ARPACK run in real arithmetic.
    """
    if k < 1 or k > dim:
        raise ValueError(f"need 1 <= k <= dim, got k={k}, dim={dim}")
    dtype = np.float64 if real else np.complex128
    if dim <= max(dense_below, k + 2):
        mat = np.empty((dim, dim), dtype=dtype)
        eye = np.eye(dim, dtype=dtype)
        for j in range(dim):
            mat[:, j] = apply(eye[:, j])
        w, vecs = np.linalg.eig(check_finite(mat, "operator"))
    else:
        if v0 is None or not np.any(v0):
            rng = np.random.default_rng(seed)
            v0 = rng.standard_normal(dim)
            if not real:
                v0 = v0 + 1j * rng.standard_normal(dim)
        v0 = np.asarray(v0, dtype=dtype).ravel()
        if ncv is None:
            ncv = 3 * k + 10
        ncv = min(max(ncv, 2 * k + 2), dim)
        op = spla.LinearOperator((dim, dim), matvec=lambda v: check_finite(apply(v), "operator image"),
                                 dtype=dtype)
        try:
            w, vecs = spla.eigs(op, k=k, which=which, v0=v0, tol=tol, ncv=ncv, maxiter=max_restarts)
        except spla.ArpackError as exc:
            # Krylov breakdown, e.g. for an operator of very low rank
            # or clustered spectra near the unit circle; small problems go dense
            if dim > DENSE_FALLBACK_MAX:
                raise _no_convergence(exc, apply) from exc
            eye = np.eye(dim, dtype=dtype)
            w, vecs = np.linalg.eig(np.stack([apply(eye[:, j]) for j in range(dim)], axis=1))
    order = _pick_order(w, which)
    w = w[order]
    vecs = vecs[:, order]
    keep = k
    if len(w) > k:
        # keep the whole group of eigenvalues tied with the k-th one in modulus
        ref = abs(w[k - 1])
        while keep < len(w) and abs(abs(w[keep]) - ref) <= 1e-12 * max(ref, 1e-300):
            keep += 1
    out = []
    for i in range(min(keep, len(w))):
        v = vecs[:, i]
        v = v / np.linalg.norm(v)
        j = int(np.argmax(np.abs(v)))
        v = v * (abs(v[j]) / v[j])
        out.append((complex(w[i]), v))
    return out


def fix_phase(v: np.ndarray) -> np.ndarray:
    """Rotate ``v`` so that its largest-magnitude entry is real positive."""
    flat = v.ravel()
    j = int(np.argmax(np.abs(flat)))
    if flat[j] == 0:
        return v
    return v * (abs(flat[j]) / flat[j])


def realify(v: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Return ``v`` as a real array if its phase-fixed form is real within ``tol``."""
    v = fix_phase(np.asarray(v))
    if np.iscomplexobj(v) and np.max(np.abs(v.imag), initial=0.0) <= tol * max(
        np.max(np.abs(v)), 1e-300
    ):
        return v.real.copy()
    return v


def polar_isometry(m: np.ndarray) -> np.ndarray:
    """Closest isometry (in Frobenius norm) to a tall matrix ``m``."""
    u, _, vh = scipy.linalg.svd(m, full_matrices=False)
    return u @ vh
