"""Brute-force state vectors on small lattices.

Qubits of an ``lx x ly`` patch are numbered row by row from the bottom,
``i = y * lx + x``, and qubit 0 is the most significant bit of the amplitude
index. Everything here works with dense vectors (at most 24 qubits).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import defaults
from .finite import FiniteMPS, apply_chain_mpo, chain_mpo, compress
from .model import (
    build_lower_boundary_tensor,
    build_projector,
    build_site_tensor,
    build_upper_boundary_map,
)

PLUS = np.array([1.0, 1.0]) / np.sqrt(2.0)


class SizeError(ValueError):
    pass


class ZeroProbabilityError(ValueError):
    pass


@dataclass(frozen=True)
class PureState:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.amplitudes.shape != (2**self.n_qubits,):
            raise ValueError("amplitude vector has the wrong length")

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "PureState":
        return PureState(self.n_qubits, self.amplitudes / self.norm())

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape([2] * self.n_qubits)


def _bits(n: int) -> np.ndarray:
    idx = np.arange(2**n, dtype=np.int64)
    return ((idx[:, None] >> (n - 1 - np.arange(n))) & 1).astype(np.int8)


def lattice_links(lx: int, ly: int) -> list[tuple[int, int]]:
    links = []
    for y in range(ly):
        for x in range(lx):
            i = y * lx + x
            if x + 1 < lx:
                links.append((i, i + 1))
            if y + 1 < ly:
                links.append((i, i + lx))
    return links


def exact_cluster_state(lx: int, ly: int) -> PureState:
    """``prod CZ |+>^N`` with one CZ per nearest-neighbour link."""
    n = lx * ly
    if n > defaults.get("oracle_max_qubits"):
        raise SizeError(f"{lx}x{ly} lattice exceeds {defaults.get('oracle_max_qubits')} qubits")
    if lx < 1 or ly < 1:
        raise SizeError("lattice sides must be positive")
    bits = _bits(n)
    parity = np.zeros(2**n, dtype=np.int64)
    for i, j in lattice_links(lx, ly):
        parity += bits[:, i] & bits[:, j]
    amps = np.where(parity % 2 == 0, 1.0, -1.0) / np.sqrt(2.0**n)
    return PureState(n, amps)


def stabilizer_expectations(state: PureState, lx: int, ly: int) -> np.ndarray:
    """``<X_i prod_{j ~ i} Z_j>`` for every site."""
    n = state.n_qubits
    bits = _bits(n)
    nbrs = {i: [] for i in range(n)}
    for i, j in lattice_links(lx, ly):
        nbrs[i].append(j)
        nbrs[j].append(i)
    idx = np.arange(2**n)
    out = np.empty(n)
    for i in range(n):
        sign = np.ones(2**n)
        for j in nbrs[i]:
            sign = sign * (1 - 2 * bits[:, j])
        flipped = idx ^ (1 << (n - 1 - i))
        kpsi = sign[flipped] * state.amplitudes[flipped]
        out[i] = float(np.real(np.vdot(state.amplitudes, kpsi)))
    return out


def apply_measurements(state: PureState, theta: float, sites) -> tuple[PureState, float]:
    """Post-select ``sites`` on the +1 outcome of ``cos(theta) Z + sin(theta) X``.

    Returns the normalised state of the remaining qubits (in their original
    order) and the probability of the selected outcome.
    """
    sites = list(sites)
    if len(set(sites)) != len(sites):
        raise ValueError("measured sites must be distinct")
    n = state.n_qubits
    m = build_projector(theta).direction
    t = state.amplitudes.reshape([2] * n)
    for k, s in enumerate(sorted(sites, reverse=True)):
        if not 0 <= s < n:
            raise ValueError(f"site {s} out of range")
        t = np.tensordot(t, m.conj(), axes=(s, 0))
    rest = n - len(sites)
    vec = t.reshape(2**rest)
    prob = float(np.vdot(vec, vec).real) / state.norm() ** 2
    if prob <= 1e-300:
        raise ZeroProbabilityError("post-selected outcome has zero probability")
    return PureState(rest, vec / np.linalg.norm(vec)), prob


def site_probability(state: PureState, theta: float, site: int, method: str = "projector") -> float:
    """Probability of the +1 outcome on one site, via the projector or by filtering amplitudes."""
    n = state.n_qubits
    t = state.tensor()
    if method == "projector":
        p = build_projector(theta).matrix
        pt = np.moveaxis(np.tensordot(p, t, axes=(1, site)), 0, site)
        return float(np.vdot(t, pt).real) / state.norm() ** 2
    if method == "amplitudes":
        _, prob = apply_measurements(state, theta, [site])
        return prob
    raise ValueError(f"unknown method {method!r}")


def entanglement_entropy(state: PureState, cut: int) -> float:
    """Von Neumann entropy (nats) between the first ``cut`` qubits and the rest."""
    m = state.amplitudes.reshape(2**cut, -1)
    s = np.linalg.svd(m, compute_uv=False)
    p = s**2 / np.sum(s**2)
    p = p[p > 1e-300]
    return float(max(0.0, -np.sum(p * np.log(p))))


def peps_patch_state(lx: int, ly: int, tensor: np.ndarray | None = None) -> PureState:
    """Contract a patch of site tensors (legs left, right, up, down, physical).

    Receiving legs (left, down) on the patch edge are pinned to 0 and
    broadcasting legs (right, up) are summed. The contraction runs along the
    shorter side to keep the frontier small.
    """
    t = build_site_tensor().tensor if tensor is None else np.asarray(tensor)
    n = lx * ly
    if n > defaults.get("oracle_max_qubits"):
        raise SizeError("patch too large")
    transpose = lx > ly
    if transpose:
        # swap roles: columns become rows; left<->down and right<->up
        t = t.transpose(3, 2, 1, 0, 4)
        lx, ly = ly, lx
    d = t.shape[0]
    # psi[phys, f_0 .. f_{lx-1}, h]
    psi = np.zeros((1,) + (d,) * (lx + 1), dtype=t.dtype)
    psi[(0,) * (lx + 2)] = 1.0
    tt = t.transpose(3, 0, 4, 2, 1)  # d l s u r
    for y in range(ly):
        for x in range(lx):
            # contract frontier leg x (down) and h (left)
            nf = psi.ndim
            psi = np.tensordot(psi, tt, axes=((1 + x, nf - 1), (0, 1)))  # phys, f\x, s, u, r
            # move s next to phys, u back into frontier slot x
            psi = np.moveaxis(psi, -3, 1)  # phys, s, f\x, u, r
            psi = np.moveaxis(psi, -2, 2 + x)  # phys, s, f.., r
            shp = psi.shape
            psi = psi.reshape((shp[0] * shp[1],) + shp[2:])
        # end of row: sum the right edge, re-pin the left edge
        summed = psi.sum(axis=-1)
        psi = np.zeros(summed.shape + (d,), dtype=psi.dtype)
        psi[..., 0] = summed
    amps = psi.sum(axis=tuple(range(1, psi.ndim)))
    if transpose:
        # sites were visited column by column: original qubit (x, y) sits at
        # axis x * (original ly) + y, and the original ly is now called lx
        amps = amps.reshape([2] * n)
        order = [x * lx + y for y in range(lx) for x in range(ly)]
        amps = np.transpose(amps, order).reshape(-1)
    return PureState(n, amps)


def validate_peps(lx: int, ly: int, tensor: np.ndarray | None = None) -> float:
    """Fidelity between the contracted PEPS patch and the circuit cluster state."""
    if lx * ly > 20:
        raise SizeError("validate_peps is limited to 20 qubits")
    a = exact_cluster_state(lx, ly).amplitudes
    b = peps_patch_state(lx, ly, tensor).amplitudes
    return float(abs(np.vdot(a, b)) ** 2 / (np.vdot(a, a).real * np.vdot(b, b).real))


def exact_boundary_state(lx: int, ly: int, theta: float) -> tuple[PureState, float]:
    """Top-row state after post-selecting every lower row at angle ``theta``."""
    psi = exact_cluster_state(lx, ly)
    return apply_measurements(psi, theta, range(lx * (ly - 1)))


def lower_boundary_chain(theta: float, n: int) -> FiniteMPS:
    t = build_lower_boundary_tensor(theta).tensor.transpose(0, 2, 1)  # l u r
    first = t[:1]
    last = t.sum(axis=2, keepdims=True)
    return FiniteMPS([first] + [t] * (n - 2) + [last], "open", 2)


def mpo_boundary_state(lx: int, ly: int, theta: float, chi: int | None = None) -> np.ndarray:
    """Top-row state from the row-operator route: lower boundary, ``ly - 2`` rows, boundary map."""
    if ly < 2 or lx < 2:
        raise SizeError("need at least a 2x2 patch")
    psi = lower_boundary_chain(theta, lx)
    mpo = chain_mpo(theta, lx, "open")
    for _ in range(ly - 2):
        psi = apply_chain_mpo(mpo, psi)
        if chi is not None:
            psi = compress(psi, chi)
    vec = psi.to_dense()
    return build_upper_boundary_map().apply_dense(vec, lx, periodic=False)


def validate_mpo_evolution(lx: int, ly: int, theta: float, chi: int | None = None) -> float:
    """Fidelity of the row-operator boundary state against direct post-selection."""
    if lx > 10:
        raise SizeError("validate_mpo_evolution is limited to lx <= 10")
    exact, _ = exact_boundary_state(lx, ly, theta)
    b = mpo_boundary_state(lx, ly, theta, chi)
    a = exact.amplitudes
    return float(abs(np.vdot(a, b)) ** 2 / (np.vdot(a, a).real * np.vdot(b, b).real))


def cat_window_state(alpha: np.ndarray, beta: np.ndarray, n: int) -> np.ndarray:
    """``|alpha beta alpha ...> + |beta alpha beta ...>`` on ``n`` sites, normalised."""
    def chain(first, second):
        v = np.ones(1)
        for j in range(n):
            v = np.kron(v, first if j % 2 == 0 else second)
        return v

    v = chain(alpha, beta) + chain(beta, alpha)
    return v / np.linalg.norm(v)


def layer_entropies(theta: float, layers: int, n: int = 24) -> np.ndarray:
    """Mid-chain entropy of the open boundary chain after 0, 1, ..., ``layers`` exact rows.

    No truncation beyond discarding numerically zero Schmidt values, so the
    cost grows as ``2**layers`` in the bond dimension.
    """
    if layers > 10:
        raise SizeError("exact layer evolution is limited to 10 rows")
    psi = lower_boundary_chain(theta, n)
    mpo = chain_mpo(theta, n, "open")
    cap = 2 ** (layers + 2)
    out = [schmidt_entropy(psi)]
    for _ in range(layers):
        psi = compress(apply_chain_mpo(mpo, psi), cap)
        out.append(schmidt_entropy(psi))
    return np.array(out)


def schmidt_entropy(psi: FiniteMPS) -> float:
    p = psi.schmidt_values() ** 2
    p = p[p > 1e-300]
    return float(max(0.0, -np.sum(p * np.log(p))))
