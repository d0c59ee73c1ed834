"""Cluster-state PEPS tensors and the row operators built from them.

Gauge: every site broadcasts its computational-basis value to the right and
upward virtual legs and picks up a controlled-Z sign against the values it
receives from the left and from below::

    T[l, r, u, d, s] = delta(s, r) delta(s, u) (-1)**(s*(l + d)) / sqrt(2)

Dangling receiving legs are pinned to 0 and dangling broadcasting legs are
summed, which reproduces ``prod CZ |+>^N`` on any finite patch.

Measured tensors are stored with the Born factor of an unbiased outcome
removed (one factor ``sqrt(2)`` per measured site), so that the row operator
at theta = pi/2 is exactly unitary. The removed factor is kept on
:class:`RowOperator` as ``site_scale``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .umps import UniformMPS

HALF_PI = np.pi / 2
SQRT_HALF = 1 / np.sqrt(2.0)

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]])
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]])
HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]]) * SQRT_HALF

ROLES = (
    "bulk-unmeasured",
    "bulk-measured",
    "lower-boundary-measured",
    "upper-boundary-unmeasured",
)


class AngleError(ValueError):
    pass


def check_theta(theta: float) -> float:
    theta = float(theta)
    if not np.isfinite(theta) or theta < 0.0 or theta > HALF_PI + 1e-12:
        raise AngleError(f"measurement angle {theta!r} outside [0, pi/2]")
    return min(theta, HALF_PI)


@dataclass(frozen=True)
class Projector:
    theta: float
    matrix: np.ndarray
    direction: np.ndarray


@dataclass(frozen=True)
class SiteTensor:
    role: str
    tensor: np.ndarray

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")


@dataclass(frozen=True)
class RowOperator:
    """One measured bulk row as a uniform MPO.

    ``w`` has legs (left, right, out, in); out is the upward virtual leg and
    in is the downward one.
    """

    theta: float
    w: np.ndarray
    site_scale: float = SQRT_HALF

    @property
    def bond(self) -> int:
        return self.w.shape[0]

    def apply(self, psi: UniformMPS) -> UniformMPS:
        """Row operator applied to a uniform MPS (bond dimension multiplies by 2)."""
        return apply_mpo(psi, self.w)


@dataclass(frozen=True)
class BoundaryMap:
    """Map from the fixed-point virtual state to the physical top-row state.

    Acts as ``site_unitary`` on every site, followed by CZ on every
    neighbouring pair when ``cz_chain`` is set.
    """

    site_unitary: np.ndarray
    cz_chain: bool = True
    mpo: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        u = self.site_unitary
        if np.max(np.abs(u.conj().T @ u - np.eye(len(u)))) > 1e-12:
            raise ValueError("site_unitary is not unitary")

    def apply_local(self, psi: UniformMPS) -> UniformMPS:
        """Per-site unitary only."""
        a = np.tensordot(psi.a, self.site_unitary, axes=(1, 1)).transpose(0, 2, 1)
        return UniformMPS(a)

    def apply(self, psi: UniformMPS) -> UniformMPS:
        """Full map, as an MPO of bond dimension 2."""
        return apply_mpo(psi, self.mpo)

    def apply_dense(self, vec: np.ndarray, n: int, periodic: bool = False) -> np.ndarray:
        """Full map on an ``n``-site state vector (site 0 most significant)."""
        t = np.asarray(vec).reshape([2] * n)
        for i in range(n):
            t = np.moveaxis(np.tensordot(self.site_unitary, t, axes=(1, i)), 0, i)
        out = t.reshape(-1)
        if self.cz_chain:
            out = out * cz_signs(n, periodic)
        return out


def apply_mpo(psi: UniformMPS, w: np.ndarray) -> UniformMPS:
    """Uniform MPO with legs (left, right, out, in) applied to a uniform MPS."""
    a = psi.a
    chi, _, _ = a.shape
    wl, wr, dout, din = w.shape
    if din != psi.d:
        raise ValueError(f"MPO input dimension {din} does not match MPS physical dimension {psi.d}")
    # a[x, d, y] w[l, r, u, d] -> [x, l, u, y, r]
    t = np.tensordot(a, w, axes=(1, 3))  # x y l r u
    t = t.transpose(0, 2, 4, 1, 3).reshape(chi * wl, dout, chi * wr)
    return UniformMPS(t)


def cz_signs(n: int, periodic: bool = False) -> np.ndarray:
    """Diagonal of the CZ chain on ``n`` qubits, site 0 most significant."""
    idx = np.arange(2**n, dtype=np.int64)
    bits = (idx[:, None] >> (n - 1 - np.arange(n))) & 1
    parity = np.sum(bits[:, :-1] & bits[:, 1:], axis=1)
    if periodic and n > 2:
        parity = parity + (bits[:, -1] & bits[:, 0])
    return np.where(parity % 2 == 0, 1.0, -1.0)


def build_projector(theta: float) -> Projector:
    """Post-selection onto the +1 eigenstate of cos(theta) Z + sin(theta) X."""
    theta = check_theta(theta)
    mat = 0.5 * (np.eye(2) + np.cos(theta) * PAULI_Z + np.sin(theta) * PAULI_X)
    direction = np.array([np.cos(theta / 2), np.sin(theta / 2)])
    return Projector(theta=theta, matrix=mat, direction=direction)


def build_site_tensor() -> SiteTensor:
    """Unmeasured bulk tensor, legs (left, right, up, down, physical)."""
    t = np.zeros((2, 2, 2, 2, 2))
    for s in range(2):
        for l in range(2):
            for d in range(2):
                t[l, s, s, d, s] = (-1) ** (s * (l + d)) * SQRT_HALF
    return SiteTensor("bulk-unmeasured", t)


def build_bulk_tensor(theta: float) -> SiteTensor:
    """Measured bulk tensor ``<m|T`` with legs (left, right, up, down), unscaled."""
    m = build_projector(theta).direction
    t = np.tensordot(build_site_tensor().tensor, m, axes=(4, 0))
    return SiteTensor("bulk-measured", t)


def build_lower_boundary_tensor(theta: float) -> SiteTensor:
    """Measured bottom-row tensor with the down leg pinned, legs (left, right, up)."""
    t = build_bulk_tensor(theta).tensor[:, :, :, 0]
    return SiteTensor("lower-boundary-measured", t)


def build_upper_boundary_tensor() -> SiteTensor:
    """Unmeasured top-row tensor with the up leg summed, legs (left, right, down, physical)."""
    t = build_site_tensor().tensor.sum(axis=2)
    return SiteTensor("upper-boundary-unmeasured", t)


def build_bulk_mpo(theta: float) -> RowOperator:
    theta = check_theta(theta)
    w = build_bulk_tensor(theta).tensor / SQRT_HALF
    return RowOperator(theta=theta, w=w, site_scale=SQRT_HALF)


def build_lower_boundary_imps(theta: float) -> UniformMPS:
    """Initial boundary state ``A[l, u, r] = m_u delta(u, r) (-1)**(u l) / sqrt(2)``."""
    t = build_lower_boundary_tensor(theta).tensor  # l r u
    return UniformMPS(t.transpose(0, 2, 1).copy())


def build_upper_boundary_map() -> BoundaryMap:
    t = build_upper_boundary_tensor().tensor  # l r d s
    # per-site part: left leg pinned, right leg summed
    unitary = t[0].sum(axis=0).T  # [s, d]
    mpo = t.transpose(0, 1, 3, 2).copy()  # l r out in
    # the remaining dependence on the left leg must be a CZ sign with the left neighbour
    for l in range(2):
        for s in range(2):
            expect = (-1) ** (l * s) * unitary[s]
            if not np.allclose(mpo[l, s, s], expect):
                raise AssertionError("upper boundary tensor is not CZ-chain form")
    return BoundaryMap(site_unitary=unitary, cz_chain=True, mpo=mpo)


MAX_DENSE_SITES = 12


def finite_row_matrix(theta: float, n: int, bc: str = "open") -> np.ndarray:
    """Dense ``2**n x 2**n`` matrix of the row operator on ``n`` sites.

    Rows index the output (upward) legs, columns the input legs, site 0 most
    significant. Open chains pin the leftmost receiving leg to 0 and sum the
    rightmost broadcasting leg; periodic chains trace the horizontal bond.
    """
    if n > MAX_DENSE_SITES:
        raise ValueError(f"n={n} too large for a dense row matrix (max {MAX_DENSE_SITES})")
    if n < 1:
        raise ValueError("n must be >= 1")
    if bc not in ("open", "periodic"):
        raise ValueError(f"unknown boundary condition {bc!r}")
    w = build_bulk_mpo(theta).w  # l r u d
    starts = [0] if bc == "open" else [0, 1]
    total = np.zeros((2**n, 2**n), dtype=w.dtype)
    for l0 in starts:
        m = w[l0][:, :, :]  # r u d
        m = m.reshape(2, 2, 2)
        # m[r, U, D]
        for _ in range(n - 1):
            # m[x, U, D] w[x, r, u, d] -> [U, D, r, u, d]
            t = np.tensordot(m, w, axes=(0, 0))
            big_u, big_d = t.shape[0], t.shape[1]
            m = t.transpose(2, 0, 3, 1, 4).reshape(2, big_u * 2, big_d * 2)
        if bc == "open":
            total += m.sum(axis=0)
        else:
            total += m[l0]
    return total
