"""Fixed points of the row operator on uniform MPS.

Two independent routes are provided: repeated application of the row MPO
with truncation (power method), and the variational uniform MPS algorithm
(VUMPS) for the dominant left/right eigenvector of a non-Hermitian MPO.
The critical-angle search and the noisy-measurement trajectories are built
on top of them.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import defaults
from .model import HALF_PI, RowOperator, build_bulk_mpo, build_lower_boundary_imps
from .tensor_core import ConvergenceError, TruncationReport, dominant_eigs, polar_isometry, realify
from .umps import (
    CanonicalForm,
    UniformMPS,
    canonical_from_vumps,
    canonicalize,
    canonicalize_with_report,
    correlator,
    entanglement_spectrum,
    fidelity_per_site,
    transfer_spectrum,
)

log = logging.getLogger(__name__)

td = np.tensordot


@dataclass(frozen=True)
class FixedPoint:
    theta: float
    chi: int
    solver: str
    psi: UniformMPS
    canonical: CanonicalForm
    per_site_eigenvalue: float
    converged: bool
    iterations: int
    residual: float
    wall_time_s: float = 0.0


# --------------------------------------------------------------------------
# power method


def power_step(psi: UniformMPS, h: RowOperator, chi: int) -> tuple[UniformMPS, TruncationReport]:
    """Apply one row and truncate back to bond dimension ``chi``.

    The result is right-canonical and normalised.
    """
    cf, report = canonicalize_with_report(h.apply(psi), chi_max=chi)
    return UniformMPS(cf.ar), report


def per_site_eigenvalue(psi: UniformMPS, h: RowOperator) -> float:
    """``<psi|H|psi>^(1/N)`` for a normalised uniform MPS, in the thermodynamic limit."""
    a = psi.a
    b = h.apply(psi).a
    cb, ca = b.shape[0], a.shape[0]
    real = psi.is_real

    def mixed(v):
        t = td(b, v.reshape(cb, ca), axes=(2, 0))
        return td(t, a.conj(), axes=((1, 2), (1, 2))).ravel()

    pairs = dominant_eigs(mixed, cb * ca, k=2 if cb * ca > 2 else 1, real=real)
    top = abs(pairs[0][0])
    lam = max((p[0] for p in pairs if abs(p[0]) >= top * (1 - 1e-8)), key=lambda z: z.real)
    return float(lam.real) if abs(lam.imag) <= 1e-10 * abs(lam) else float(abs(lam))


def _grow(psi: UniformMPS, h: RowOperator, chi: int, layers: int) -> UniformMPS:
    for _ in range(layers):
        psi, _ = power_step(psi, h, chi)
    return psi


def power_fixed_point(
    theta: float,
    chi: int,
    tol: float | None = None,
    max_layers: int | None = None,
    psi0: UniformMPS | None = None,
) -> FixedPoint:
    """Boundary fixed point by repeated row application.

    Convergence means the per-site infidelity between consecutive layers
    has dropped below ``tol``. At theta = pi/2 the row operator is unitary and
    the entanglement grows without bound, so the iteration ends at
    ``max_layers`` with ``converged=False``.
    """
    tol = defaults.get("power_tol") if tol is None else tol
    max_layers = defaults.get("power_max_layers") if max_layers is None else max_layers
    start = time.perf_counter()
    h = build_bulk_mpo(theta)
    psi = build_lower_boundary_imps(theta) if psi0 is None else psi0
    prev_s = None
    converged = False
    residual = float("nan")
    layer = 0
    for layer in range(1, max_layers + 1):
        new, report = power_step(psi, h, chi)
        s = report.spectrum
        # cheap screen on the Schmidt values before the overlap test
        if prev_s is not None and len(s) == len(prev_s) and np.max(np.abs(s - prev_s)) < 1e-5:
            residual = max(0.0, 1.0 - fidelity_per_site(new, psi))
            if residual <= tol:
                psi = new
                converged = True
                break
        prev_s = s
        psi = new
    cf = canonicalize(psi)
    lam = per_site_eigenvalue(psi, h)
    return FixedPoint(
        theta=float(theta), chi=int(chi), solver="power", psi=psi, canonical=cf,
        per_site_eigenvalue=lam, converged=converged, iterations=layer, residual=residual,
        wall_time_s=time.perf_counter() - start,
    )


# --------------------------------------------------------------------------
# VUMPS


def _fl_map(al, w):
    c, dw = al.shape[0], w.shape[0]

    def f(v):
        t = td(v.reshape(c, dw, c), al, axes=(0, 0))  # l x d b
        t = td(t, w, axes=((0, 2), (0, 3)))  # x b r u
        t = td(t, al.conj(), axes=((0, 3), (0, 1)))  # b r y
        return t.ravel()

    return f


def _fr_map(ar, w):
    c, dw = ar.shape[0], w.shape[0]

    def f(v):
        t = td(ar, v.reshape(c, dw, c), axes=(2, 0))  # a d r y
        t = td(t, w, axes=((1, 2), (3, 1)))  # a y l u
        t = td(t, ar.conj(), axes=((1, 3), (2, 1)))  # a l x
        return t.ravel()

    return f


def _hac_map(fl, fr, w):
    c, dw = fl.shape[0], w.shape[0]

    def f(v):
        t = td(fl, v.reshape(c, w.shape[3], c), axes=(0, 0))  # l x d b
        t = td(t, w, axes=((0, 2), (0, 3)))  # x b r u
        t = td(t, fr, axes=((1, 2), (0, 1)))  # x u y
        return t.ravel()

    return f


def _hc_map(fl, fr):
    c = fl.shape[0]

    def f(v):
        t = td(fl, v.reshape(c, c), axes=(0, 0))  # l x b
        t = td(t, fr, axes=((2, 0), (0, 1)))  # x y
        return t.ravel()

    return f


def _dominant(f, dim, v0, real):
    pairs = dominant_eigs(f, dim, k=2 if dim > 2 else 1, v0=v0, real=real, tol=1e-14)
    top = abs(pairs[0][0])
    lam, vec = max((p for p in pairs if abs(p[0]) >= top * (1 - 1e-8)), key=lambda p: p[0].real)
    if real:
        vec = realify(vec)
        if np.iscomplexobj(vec):
            # complex pair on top (happens far from the fixed point in the cat
            # phase): continue with the larger of the real and imaginary parts
            re, im = vec.real, vec.imag
            vec = re if np.linalg.norm(re) >= np.linalg.norm(im) else im
            vec = vec / np.linalg.norm(vec)
            lam = complex(np.dot(vec, f(vec)))
    return lam, vec


def _initial_state(theta: float, chi: int, seed: int) -> UniformMPS:
    h = build_bulk_mpo(theta)
    psi = _grow(build_lower_boundary_imps(theta), h, chi, defaults.get("power_warmup_layers"))
    if psi.chi < chi:
        # pad the bond with small noise so that VUMPS can use the full bond dimension
        rng = np.random.default_rng(seed)
        a = 1e-3 * rng.standard_normal((chi, psi.d, chi))
        a[: psi.chi, :, : psi.chi] += psi.a
        psi = UniformMPS(a)
    return psi


def vumps_fixed_point(
    theta: float,
    chi: int,
    tol: float | None = None,
    max_iter: int | None = None,
    psi0: UniformMPS | None = None,
    seed: int = 0,
) -> FixedPoint:
    """Dominant eigenvector of the row MPO by the variational uniform MPS algorithm.

    Without ``psi0`` the iteration is seeded from a short power-method
    warm-up at the same angle. The residual is ``|| A_C - A_L C ||`` for
    normalised ``A_C``.
    """
    tol = defaults.get("vumps_tol") if tol is None else tol
    max_iter = defaults.get("vumps_max_iter") if max_iter is None else max_iter
    start = time.perf_counter()
    h = build_bulk_mpo(theta)
    w = h.w
    psi = _initial_state(theta, chi, seed) if psi0 is None else psi0
    real = psi.is_real
    cf, _ = canonicalize_with_report(psi, chi_max=chi)
    al, ar, c = cf.al, cf.ar, cf.c
    k = c.shape[0]
    d = al.shape[1]
    dw = w.shape[0]
    ac = td(al, c, axes=(2, 0))
    fl = fr = None
    lam = float("nan")
    err = float("inf")
    it = 0
    for it in range(1, max_iter + 1):
        _, fl = _dominant(_fl_map(al, w), k * dw * k, fl, real)
        _, fr = _dominant(_fr_map(ar, w), k * dw * k, fr, real)
        flt = fl.reshape(k, dw, k)
        frt = fr.reshape(k, dw, k)
        lac, acv = _dominant(_hac_map(flt, frt, w), k * d * k, ac.ravel(), real)
        lc, cv = _dominant(_hc_map(flt, frt), k * k, c.ravel(), real)
        ac = acv.reshape(k, d, k)
        c = cv.reshape(k, k)
        uc = polar_isometry(c)
        al = (polar_isometry(ac.reshape(k * d, k)) @ uc.conj().T).reshape(k, d, k)
        ar = (uc.conj().T @ polar_isometry(ac.reshape(k, d * k).T).T).reshape(k, d, k)
        x = td(al, c, axes=(2, 0)).ravel()
        y = ac.ravel()
        ov = np.vdot(x, y)
        err = float(np.linalg.norm(y / np.linalg.norm(y) - x * (ov / abs(ov)) / np.linalg.norm(x)))
        lam = lac / lc
        if err < tol:
            break
    converged = err < tol
    if not converged:
        log.warning("VUMPS at theta=%.4f chi=%d stopped at residual %.2e", theta, chi, err)
    cf = canonical_from_vumps(al, ar, c)
    lam = complex(lam)
    return FixedPoint(
        theta=float(theta), chi=int(chi), solver="vumps", psi=UniformMPS(cf.ar), canonical=cf,
        per_site_eigenvalue=float(lam.real), converged=converged, iterations=it, residual=err,
        wall_time_s=time.perf_counter() - start,
    )


# --------------------------------------------------------------------------
# phase indicator and critical angle


def is_two_fold(fp: FixedPoint, tol: float = 1e-3) -> bool:
    """Leading transfer-matrix eigenvalues form a (1, -1) pair and the two largest Schmidt values coincide."""
    return state_is_two_fold(fp.psi, fp.canonical, tol)


def phase_label(psi: UniformMPS, tol: float = 1e-3) -> str:
    """``"two-fold"`` when the two leading transfer-matrix eigenvalues are ``(1, -1)`` within ``tol``.

    Only the transfer spectrum is used, so the label is meaningful for states
    that are still relaxing (e.g. after a fixed number of noisy layers).
    """
    ev = transfer_spectrum(psi, k=min(4, psi.chi**2), tol=tol).eigenvalues
    return "two-fold" if len(ev) > 1 and abs(ev[0] + ev[1]) <= tol else "trivial"


def state_is_two_fold(psi: UniformMPS, cf=None, tol: float = 1e-3) -> bool:
    cf = canonicalize(psi) if cf is None else cf
    ts = transfer_spectrum(psi, k=min(4, psi.chi**2), tol=tol)
    ev = ts.eigenvalues
    lead_pair = len(ev) > 1 and abs(ev[0] + ev[1]) <= tol
    return bool(lead_pair and entanglement_spectrum(cf).gap_ratio >= 1 - 10 * tol)


@dataclass(frozen=True)
class Probe:
    theta: float
    two_fold: bool
    per_site_eigenvalue: float
    ee: float
    branch_eigenvalues: tuple


@dataclass(frozen=True)
class CriticalResult:
    chi: int
    theta_c: float
    bracket: tuple[float, float]
    probes: list = field(default_factory=list)
    solvers_agree: bool = True
    # dominant-branch fixed points at the two bracket ends (lower, upper)
    end_points: tuple = field(default=(), repr=False, compare=False)


class DegenerateBracketError(ValueError):
    pass


def dominant_branch(theta: float, chi: int, seeds: list[UniformMPS], tol: float | None = None):
    """Relax every seed with VUMPS and keep the fixed point with the largest eigenvalue."""
    results = []
    for s in seeds:
        try:
            results.append(vumps_fixed_point(theta, chi, tol=tol, psi0=s))
        except ConvergenceError as exc:
            log.warning("seed failed at theta=%.4f: %s", theta, exc)
    if not results:
        raise ConvergenceError(f"no branch converged at theta={theta}")
    best = max(results, key=lambda r: r.per_site_eigenvalue)
    return best, results


def find_theta_c(
    chi: int,
    bracket: tuple[float, float] | None = None,
    resolution: float | None = None,
    cross_check: bool = True,
) -> CriticalResult:
    """Bisect for the onset of the two-fold degenerate phase.

    Each probe relaxes two seeds (one from each phase, taken from the last
    probe on that side) and keeps the dominant one, so that metastable
    branches of the first-order transition are not mistaken for the
    boundary state. With ``cross_check`` the power method is run at the
    final bracket end points, started from the variational states, and
    ``solvers_agree`` records whether it keeps their phase and eigenvalue.
    """
    lo, hi = defaults.get("critical_bracket") if bracket is None else bracket
    resolution = defaults.get("critical_resolution") if resolution is None else resolution
    if not lo < hi:
        raise DegenerateBracketError("bracket must satisfy lo < hi")
    probes = []

    def probe(theta, seeds):
        best, all_fp = dominant_branch(theta, chi, seeds)
        flag = is_two_fold(best)
        probes.append(Probe(theta, flag, best.per_site_eigenvalue,
                            entanglement_spectrum(best.canonical).ee,
                            tuple(r.per_site_eigenvalue for r in all_fp)))
        return best, flag

    fp_lo, f_lo = probe(lo, [_initial_state(lo, chi, 0)])
    fp_hi, f_hi = probe(hi, [_initial_state(hi, chi, 0)])
    if f_lo == f_hi:
        raise DegenerateBracketError(
            f"indicator equal at both ends of [{lo}, {hi}] (two_fold={f_lo}); no transition bracketed"
        )
    triv, cat = (fp_lo, fp_hi) if not f_lo else (fp_hi, fp_lo)
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        fp, flag = probe(mid, [triv.psi, cat.psi])
        if flag == f_lo:
            lo = mid
        else:
            hi = mid
        if flag:
            cat = fp
        else:
            triv = fp
    agree = True
    if cross_check:
        # a cold-started power run is metastable next to a first-order point, so
        # the layer evolution is started from the variational state instead and
        # must keep both its phase and its eigenvalue
        for theta, flag, fp_v in ((lo, f_lo, triv if not f_lo else cat), (hi, f_hi, cat if f_hi else triv)):
            fp = power_fixed_point(theta, chi, psi0=fp_v.psi)
            same = is_two_fold(fp) == flag
            close = abs(fp.per_site_eigenvalue - fp_v.per_site_eigenvalue) <= 1e-6
            if not (same and close):
                log.warning("power and VUMPS disagree at theta=%.4f (two_fold %s vs %s, eigenvalue %.9f vs %.9f)",
                            theta, is_two_fold(fp), flag, fp.per_site_eigenvalue, fp_v.per_site_eigenvalue)
            agree &= same and close
    ends = (triv, cat) if not f_lo else (cat, triv)
    return CriticalResult(chi=chi, theta_c=0.5 * (lo + hi), bracket=(lo, hi), probes=probes,
                          solvers_agree=bool(agree), end_points=ends)


# --------------------------------------------------------------------------
# noisy measurement angles


@dataclass(frozen=True)
class NoiseSpec:
    theta_mean: float
    epsilon: float
    seed: int
    layers: int

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if self.layers < 1:
            raise ValueError("layers must be positive")


@dataclass(frozen=True)
class TrajectoryRecord:
    layer: int
    cx_100: float
    cz_100: float
    ee: float
    theta_used: float
    clamped: bool = False


def noisy_trajectory(spec: NoiseSpec, chi: int, l_corr: int = 100) -> list[TrajectoryRecord]:
    """Power iteration where every row is measured at its own random angle.

    Angles are drawn from a normal distribution around ``theta_mean`` and
    clamped to [0, pi/2]; clamped rows are flagged.
    """
    return noisy_evolution(spec, chi, l_corr)[0]


def noisy_evolution(spec: NoiseSpec, chi: int, l_corr: int = 100) -> tuple[list[TrajectoryRecord], UniformMPS]:
    """Like :func:`noisy_trajectory`, also returning the final boundary state."""
    rng = np.random.default_rng(spec.seed)
    psi = build_lower_boundary_imps(spec.theta_mean)
    records = []
    for layer in range(1, spec.layers + 1):
        theta = float(rng.normal(spec.theta_mean, spec.epsilon)) if spec.epsilon > 0 else spec.theta_mean
        clamped = not 0.0 <= theta <= HALF_PI
        theta = min(max(theta, 0.0), HALF_PI)
        psi, _ = power_step(psi, build_bulk_mpo(theta), chi)
        cf = canonicalize(psi)
        cx = correlator(cf, "X", l_corr, infinite=False).values[-1]
        cz = correlator(cf, "Z", l_corr, infinite=False).values[-1]
        records.append(TrajectoryRecord(layer, float(cx), float(cz),
                                        entanglement_spectrum(cf).ee, theta, clamped))
    return records, psi
