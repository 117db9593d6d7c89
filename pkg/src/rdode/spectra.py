"""Spectrum of the linearised operator and stability classification.

The spectrum splits into the range of the ODE block ``A*`` (sampled here as
the union of nodewise eigenvalues) and isolated eigenvalues in the
resolvent set of ``A*``.  On a grid the continuous part shows up as a
cluster of eigenvalues smeared over an O(h) neighbourhood of the sampled
range, so eigenvalues of the assembled matrix close to that range are set
aside and the rest are kept as approximations of the isolated ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.spatial import Delaunay, QhullError

from .errors import EigensolveFailure, ResolventSingular, UnsupportedShape
from .linearize import assemble_operator, jacobian_field


@dataclass
class SpectrumReport:
    essential_samples: np.ndarray
    s_A: float
    discrete_eigs: np.ndarray
    essential_cluster_eigs: np.ndarray
    s_inf: float
    s_L: float
    grid_n: int
    tol_ess: float
    flagged_sigma0: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=complex))

    def leading_discrete(self):
        """Kept eigenvalue with the largest real part, or None."""
        if self.discrete_eigs.size == 0:
            return None
        return complex(self.discrete_eigs[np.argmax(self.discrete_eigs.real)])

    def to_rows(self):
        rows = [(z.real, z.imag, "essential") for z in self.essential_samples]
        rows += [(z.real, z.imag, "discrete") for z in self.discrete_eigs]
        rows += [(z.real, z.imag, "discarded") for z in self.essential_cluster_eigs]
        return rows

    def summary(self):
        lead = self.leading_discrete()
        return {
            "s_A": self.s_A,
            "s_inf": self.s_inf if np.isfinite(self.s_inf) else None,
            "s_L": self.s_L,
            "grid_n": self.grid_n,
            "tol_ess": self.tol_ess,
            "n_discrete": int(self.discrete_eigs.size),
            "n_discarded": int(self.essential_cluster_eigs.size),
            "leading_discrete": None if lead is None else [lead.real, lead.imag],
            "flagged_sigma0": [[z.real, z.imag] for z in self.flagged_sigma0],
        }


@dataclass
class Verdict:
    label: str
    reasons: list
    sufficient_condition_passed: bool | None = None
    margin: float = 0.0

    def to_dict(self):
        return {"label": self.label, "reasons": list(self.reasons),
                "sufficient_condition_passed": self.sufficient_condition_passed,
                "margin": self.margin}


@dataclass
class SufficientConditionReport:
    passed: bool
    max_A: float
    max_D: float
    min_det: float

    def __bool__(self):
        return self.passed

    def to_dict(self):
        return {"passed": self.passed, "max_A": self.max_A, "max_D": self.max_D,
                "min_det": self.min_det,
                "conditions": {"A* <= -c": self.max_A <= -1e-10,
                               "D* <= 0": self.max_D <= 1e-12,
                               "A*D* - B*C* > 0": self.min_det > 1e-10}}


def essential_spectrum(jac):
    """Eigenvalues of every nodewise block ``A*(x_i)``, concatenated."""
    if jac.m == 1:
        return jac.A[:, 0, 0].astype(complex)
    return np.linalg.eigvals(jac.A).ravel()


def default_tol_ess(grid, essential):
    essential = np.asarray(essential)
    spread = float(np.ptp(essential.real) + np.ptp(essential.imag)) if essential.size else 0.0
    return max(10.0 * grid.h, 1e-3) * (1.0 + spread)


def _distance_to_set(points, samples):
    """Euclidean distance in C from each point to the nearest sample."""
    if samples.size == 0:
        return np.full(points.size, np.inf)
    samples = np.unique(np.round(samples, 12))
    out = np.empty(points.size)
    for start in range(0, points.size, 512):
        chunk = points[start:start + 512]
        out[start:start + 512] = np.min(np.abs(chunk[:, None] - samples[None, :]), axis=1)
    return out


def operator_eigenvalues(op):
    try:
        eigs = linalg.eigvals(op.matrix, check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        raise EigensolveFailure(f"dense eigensolve failed: {exc}") from exc
    if not np.all(np.isfinite(eigs)):
        raise EigensolveFailure("eigensolver returned non-finite eigenvalues")
    return eigs


def discrete_eigenvalues(op, essential, tol_ess, eigs=None):
    """Split the eigenvalues of ``op`` into (kept, discarded) by distance to ``essential``."""
    if not tol_ess > 0:
        raise ValueError("tol_ess must be positive")
    eigs = operator_eigenvalues(op) if eigs is None else np.asarray(eigs)
    dist = _distance_to_set(eigs, np.asarray(essential, dtype=complex))
    keep = dist > tol_ess
    kept, discarded = eigs[keep], eigs[~keep]
    order = np.argsort(-kept.real, kind="stable")
    return kept[order], discarded[np.argsort(-discarded.real, kind="stable")]


def _flag_sigma0(kept, essential):
    """Kept eigenvalues inside the convex hull of complex essential samples."""
    pts = np.unique(np.round(essential, 12))
    if kept.size == 0 or pts.size < 3 or np.ptp(pts.imag) < 1e-12:
        return np.empty(0, dtype=complex)
    xy = np.column_stack([pts.real, pts.imag])
    try:
        hull = Delaunay(xy)
    except QhullError:
        return np.empty(0, dtype=complex)
    inside = hull.find_simplex(np.column_stack([kept.real, kept.imag])) >= 0
    return kept[inside]


def compute_spectrum(op, jac, tol_ess=None):
    """Full SpectrumReport for the assembled operator and its Jacobian field."""
    essential = essential_spectrum(jac)
    tol = default_tol_ess(op.grid, essential) if tol_ess is None else float(tol_ess)
    kept, discarded = discrete_eigenvalues(op, essential, tol)
    s_A = float(np.max(essential.real))
    s_inf = float(np.max(kept.real)) if kept.size else -np.inf
    flagged = _flag_sigma0(kept, essential) if jac.m >= 2 else np.empty(0, dtype=complex)
    return SpectrumReport(essential, s_A, kept, discarded, s_inf, max(s_A, s_inf),
                          op.grid.n, tol, flagged)


def spectral_bound(report):
    return max(report.s_A, report.s_inf)


def evans_function(jac, grid, diffusion, lam):
    """Neumann shooting mismatch of the reduced scalar eigenvalue problem.

    Eliminating the ODE component leaves
    ``D xi'' + (D* - lam + B* C* / (lam - A*)) xi = 0`` on (0, 1).  The
    coefficients are frozen on each cell; ``xi(0) = 1, xi'(0) = 0`` is
    integrated with RK4 (four steps per cell) and ``xi'(1)`` returned.
    Zeros are eigenvalues.  ``lam`` may be a scalar or an array.
    """
    if jac.m != 1 or jac.k != 1:
        raise UnsupportedShape("evans_function supports m = k = 1 only")
    d = float(np.atleast_1d(diffusion)[0])
    lam_arr = np.atleast_1d(np.asarray(lam, dtype=complex))
    A, B, C, D = jac.A[:, 0, 0], jac.B[:, 0, 0], jac.C[:, 0, 0], jac.D[:, 0, 0]
    gap = np.min(np.abs(lam_arr[:, None] - A[None, :]))
    if gap <= 1e-8:
        raise ResolventSingular(f"lambda within {gap:.2e} of an essential sample")
    # q[cell, lam]
    q = (D[:, None] - lam_arr[None, :] + (B * C)[:, None] / (lam_arr[None, :] - A[:, None])) / d
    xi = np.ones(lam_arr.size, dtype=complex)
    dxi = np.zeros(lam_arr.size, dtype=complex)
    s = grid.h / 4.0
    for cell in range(grid.n):
        qc = q[cell]
        for _ in range(4):
            # y' = (dxi, -qc xi); linear, so the RK4 stages are explicit
            k1x, k1d = dxi, -qc * xi
            k2x, k2d = dxi + 0.5 * s * k1d, -qc * (xi + 0.5 * s * k1x)
            k3x, k3d = dxi + 0.5 * s * k2d, -qc * (xi + 0.5 * s * k2x)
            k4x, k4d = dxi + s * k3d, -qc * (xi + s * k3x)
            xi = xi + s / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
            dxi = dxi + s / 6.0 * (k1d + 2 * k2d + 2 * k3d + k4d)
    return dxi[0] if np.ndim(lam) == 0 else dxi


def evans_sign_changes(jac, grid, diffusion, lo, hi, samples=2001):
    """Real roots of the Evans function on [lo, hi], located by sign changes and bisection."""
    lams = np.linspace(lo, hi, samples)
    A = jac.A[:, 0, 0]
    near = np.min(np.abs(lams[:, None] - A[None, :]), axis=1) <= 1e-8
    lams = lams[~near]
    vals = evans_function(jac, grid, diffusion, lams).real
    roots = []
    for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]:
        a, b, fa = lams[i], lams[i + 1], vals[i]
        # a pole of the coefficient between samples also flips the sign; skip those
        if np.any((A > a) & (A < b)):
            continue
        for _ in range(60):
            mid = 0.5 * (a + b)
            fm = evans_function(jac, grid, diffusion, mid).real
            if np.sign(fm) == np.sign(fa):
                a, fa = mid, fm
            else:
                b = mid
        roots.append(0.5 * (a + b))
    return np.array(roots)


def check_sufficient_stability(jac):
    """Pointwise test of ``A* <= -c``, ``D* <= 0`` and ``A* D* - B* C* > 0``."""
    if jac.m != 1 or jac.k != 1:
        raise UnsupportedShape(f"sufficient condition needs m = k = 1, got m={jac.m}, k={jac.k}")
    A, B, C, D = jac.A[:, 0, 0], jac.B[:, 0, 0], jac.C[:, 0, 0], jac.D[:, 0, 0]
    max_A, max_D = float(np.max(A)), float(np.max(D))
    min_det = float(np.min(A * D - B * C))
    passed = max_A <= -1e-10 and max_D <= 1e-12 and min_det > 1e-10
    return SufficientConditionReport(passed, max_A, max_D, min_det)


def default_margin(report):
    return 1e-4 * max(1.0, abs(report.s_A))


def classify(report, margin=None, sufficient=None):
    """Stable / Unstable / Inconclusive from the sign of the spectral bound."""
    margin = default_margin(report) if margin is None else float(margin)
    if not margin > 0:
        raise ValueError("margin must be positive")
    s_L = spectral_bound(report)
    reasons = []
    if s_L < -margin:
        label = "Stable"
        reasons.append(f"s(L) = {s_L:.6g} < -{margin:.3g}")
    elif s_L > margin:
        label = "Unstable"
        if report.s_A > margin:
            reasons.append("s(A*) > 0")
        if report.s_inf > margin:
            lead = report.leading_discrete()
            reasons.append(f"discrete eigenvalue with positive real part ({lead.real:.6g})")
    else:
        label = "Inconclusive"
        reasons.append(f"|s(L)| = {abs(s_L):.3g} within margin {margin:.3g}; degenerate case not treated")
    passed = None if sufficient is None else bool(sufficient)
    if passed:
        reasons.append("sufficient pointwise stability condition holds")
    return Verdict(label, reasons, passed, margin)


def analyze(model, steady, grid, tol_ess=None, margin=None):
    """Linearise, compute the spectrum and classify in one go.

    Returns ``(op, jac, report, verdict, sufficient)``; ``sufficient`` is
    None for systems that are not m = k = 1.
    """
    jac = jacobian_field(model, steady, grid)
    op = assemble_operator(jac, grid, model.diffusion)
    report = compute_spectrum(op, jac, tol_ess)
    sufficient = check_sufficient_stability(jac) if jac.m == 1 and jac.k == 1 else None
    verdict = classify(report, margin, sufficient)
    return op, jac, report, verdict, sufficient
