"""Time integration of perturbations of a steady state.

Three independent routes are provided:

* ``simulate``: nonlinear Lie splitting.  The deviation ``xi = w - w_bar``
  obeys ``xi_t = D^v Delta xi_v + [F(w_bar + xi) + D^v Delta v_bar]``; the
  heat part is propagated exactly in the cosine basis and the bracket,
  which vanishes at ``xi = 0`` up to the steady residual, by one RK4 step.
* ``simulate_linear``: exact flow of the linearised operator through a
  precomputed matrix exponential.
* ``picard_mild``: fixed-point iteration of the variation-of-constants
  formula with the linear semigroup and the Taylor remainder.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import fft, linalg

from .errors import BlowUp, Divergence, InsufficientData, NonPositiveNorms
from .grid import Grid, StateField, apply_laplacian, laplacian_eigenvalues
from .linearize import nonlinear_remainder
from .steady import steady_residual

BLOWUP_THRESHOLD = 1e6


@dataclass
class SimulationTrace:
    times: np.ndarray
    sup_norms: np.ndarray
    l2_norms: np.ndarray
    scheme: str
    snapshots: list = field(default_factory=list)
    final: StateField | None = None

    def rows(self):
        return list(zip(self.times.tolist(), self.sup_norms.tolist(), self.l2_norms.tolist()))


@dataclass
class RateFit:
    rate: float
    intercept: float
    window: tuple
    residual: float
    samples: int = 0

    def to_dict(self):
        return {"rate": self.rate, "intercept": self.intercept, "window": list(self.window),
                "residual": self.residual, "samples": self.samples}


def _steps(t_end, dt):
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if t_end < dt * (1 - 1e-12):
        raise ValueError(f"t_end={t_end} shorter than one step dt={dt}")
    count = max(1, int(round(t_end / dt)))
    return count, t_end / count


def _record_every(count, max_records):
    return max(1, int(np.ceil(count / max_records))) if max_records else 1


def simulate(model, steady, xi0, t_end, dt, max_records=None, snapshot_every=None):
    """Nonlinear evolution of ``xi0`` about ``steady``; records norms of the deviation.

    ``max_records`` thins the stored trace (the first and last step are
    always kept); ``snapshot_every`` stores full fields every that many steps.
    """
    grid_n = xi0.n
    base = getattr(steady, "field", steady)
    grid = Grid(grid_n)
    base.check_shape(model.m, model.k, grid_n)
    xi0.check_shape(model.m, model.k, grid_n)
    if not np.all(np.isfinite(xi0.as_vector())):
        raise ValueError("initial perturbation is not finite")
    count, dt = _steps(t_end, dt)
    m = model.m
    diff = np.asarray(model.diffusion)
    x = grid.nodes
    w_bar = np.vstack([base.u, base.v])
    # diffusion of the steady v, moved into the reaction half-step
    forcing = np.zeros_like(w_bar)
    forcing[m:] = diff[:, None] * apply_laplacian(grid, base.v)

    def reaction(xi):
        w = w_bar + xi
        f, g = model.reaction(w[:m], w[m:], x)
        out = np.empty_like(w)
        out[:m], out[m:] = f, g
        return out + forcing

    # exact heat factors per diffusing component, applied in the DCT-II basis
    decay = np.exp(np.outer(diff, laplacian_eigenvalues(grid, 1.0)) * dt)
    xi = np.vstack([xi0.u, xi0.v]).astype(float)
    every = _record_every(count, max_records)
    times, sups, l2s, snaps = [0.0], [xi0.sup_norm()], [xi0.l2_norm()], []
    for step in range(1, count + 1):
        xi[m:] = fft.idct(decay * fft.dct(xi[m:], type=2, norm="ortho", axis=-1),
                          type=2, norm="ortho", axis=-1)
        k1 = reaction(xi)
        k2 = reaction(xi + 0.5 * dt * k1)
        k3 = reaction(xi + 0.5 * dt * k2)
        k4 = reaction(xi + dt * k3)
        xi = xi + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        sup = float(np.max(np.abs(xi)))
        if not np.isfinite(sup) or sup > BLOWUP_THRESHOLD:
            raise BlowUp(f"sup norm exceeded {BLOWUP_THRESHOLD:g} at t={step * dt:.6g}", time=step * dt)
        if step % every == 0 or step == count:
            times.append(step * dt)
            sups.append(sup)
            l2s.append(float(np.sqrt(np.sum(xi ** 2) / grid_n)))
        if snapshot_every and step % snapshot_every == 0:
            snaps.append((step * dt, StateField(xi[:m].copy(), xi[m:].copy())))
    return SimulationTrace(np.array(times), np.array(sups), np.array(l2s), "lie-splitting",
                           snaps, StateField(xi[:m].copy(), xi[m:].copy()))


def simulate_linear(op, xi0, t_end, dt, max_records=None):
    """Exact linear flow ``xi(t) = exp(t L_h) xi0`` sampled every ``dt``."""
    count, dt = _steps(t_end, dt)
    step_matrix = linalg.expm(dt * op.matrix)
    z = xi0.as_vector().astype(float)
    n = xi0.n
    every = _record_every(count, max_records)
    times, sups, l2s = [0.0], [xi0.sup_norm()], [xi0.l2_norm()]
    for step in range(1, count + 1):
        z = step_matrix @ z
        if step % every == 0 or step == count:
            times.append(step * dt)
            sups.append(float(np.max(np.abs(z))))
            l2s.append(float(np.sqrt(np.sum(z ** 2) / n)))
    return SimulationTrace(np.array(times), np.array(sups), np.array(l2s), "matrix-exponential",
                           [], StateField.from_vector(z, op.m, op.k))


def picard_mild(op, model, steady, xi0, t_end, n_time=64, n_iter=8, tol=1e-14):
    """Picard iterates of ``xi(t) = T(t) xi0 + int_0^t T(t-s) N(xi(s)) ds``.

    ``T(t) = exp(t L_h)`` on a uniform grid of ``n_time`` intervals; the
    convolution uses the trapezoid rule.  Iteration starts from
    ``xi_1(t) = T(t) xi0`` and stops after ``n_iter`` iterates or once the
    gap drops below ``tol``.  Returns ``(final_state, gaps)`` where
    ``gaps[i] = max_t |xi_{i+2}(t) - xi_{i+1}(t)|_inf``.
    """
    if t_end > 1:
        raise ValueError("picard_mild is a short-horizon oracle (t_end <= 1)")
    if n_time < 8 or n_iter < 2:
        raise ValueError("need n_time >= 8 and n_iter >= 2")
    grid = Grid(xi0.n)
    m, k = op.m, op.k
    dt = t_end / n_time
    E = linalg.expm(dt * op.matrix)
    base = getattr(steady, "field", steady)
    # steady residual enters as a constant forcing; zero for an exact steady state
    forcing = steady_residual(model, base, grid).as_vector()

    free = np.empty((n_time + 1, op.size))
    free[0] = xi0.as_vector()
    for j in range(1, n_time + 1):
        free[j] = E @ free[j - 1]

    def remainder(path):
        out = np.empty_like(path)
        for j, z in enumerate(path):
            out[j] = nonlinear_remainder(model, base, StateField.from_vector(z, m, k), grid).as_vector()
        return out + forcing

    current = free.copy()
    gaps = []
    for _ in range(n_iter - 1):
        source = remainder(current)
        nxt = np.empty_like(current)
        nxt[0] = free[0]
        # acc_j = 1/2 E^j N_0 + sum_{i=1}^{j} E^{j-i} N_i ; integral = dt (acc_j - N_j / 2)
        acc = 0.5 * source[0]
        for j in range(1, n_time + 1):
            acc = E @ acc + source[j]
            nxt[j] = free[j] + dt * (acc - 0.5 * source[j])
        gap = float(np.max(np.abs(nxt - current)))
        gaps.append(gap)
        current = nxt
        if len(gaps) >= 4 and all(gaps[-i] > gaps[-i - 1] for i in range(1, 4)):
            raise Divergence(f"Picard gaps increased three times in a row: {gaps[-4:]}")
        if gap <= tol:
            break
    return StateField.from_vector(current[-1], m, k), gaps


def perturb(kind, grid, m, k, amplitude, op=None, seed=None, interval=(0.25, 0.5),
            components="all"):
    """Initial perturbation of sup norm ``amplitude``.

    ``eigenmode`` needs ``op`` and uses the real part of the eigenvector of
    the rightmost eigenvalue; ``uniform_random`` draws i.i.d. values from
    ``[-amplitude, amplitude]`` with ``numpy.random.default_rng(seed)``;
    ``indicator_bump`` is ``amplitude`` on the nodes inside ``interval``.
    """
    if not amplitude > 0:
        raise ValueError("amplitude must be positive")
    n = grid.n
    if kind == "eigenmode":
        if op is None:
            raise ValueError("eigenmode perturbation needs the assembled operator")
        vals, vecs = linalg.eig(op.matrix)
        vec = vecs[:, np.argmax(vals.real)]
        # rotate the phase so the real part carries the largest entry
        vec = vec * np.exp(-1j * np.angle(vec[np.argmax(np.abs(vec))]))
        z = vec.real
        z = amplitude * z / np.max(np.abs(z))
        return StateField.from_vector(z, m, k)
    if kind == "uniform_random":
        rng = np.random.default_rng(seed)
        return StateField(rng.uniform(-amplitude, amplitude, (m, n)),
                          rng.uniform(-amplitude, amplitude, (k, n)))
    if kind == "indicator_bump":
        lo, hi = interval
        mask = ((grid.nodes >= lo) & (grid.nodes <= hi)).astype(float)
        u = np.zeros((m, n))
        v = np.zeros((k, n))
        if components in ("all", "u"):
            u[:] = amplitude * mask
        if components in ("all", "v"):
            v[:] = amplitude * mask
        return StateField(u, v)
    raise ValueError(f"unknown perturbation kind {kind!r}")


def estimate_rate(trace, fraction=0.5, max_norm=None):
    """Least-squares slope of ``log sup_norm`` against t over the final ``fraction``.

    With ``max_norm`` the trace is first cut at the first sample exceeding
    it, so only the linear regime is fitted.
    """
    times = np.asarray(trace.times, dtype=float)
    norms = np.asarray(trace.sup_norms, dtype=float)
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    if max_norm is not None:
        over = np.nonzero(norms > max_norm)[0]
        if over.size:
            times, norms = times[:over[0]], norms[:over[0]]
    if times.size == 0:
        raise InsufficientData("empty trace")
    t_start = times[-1] - fraction * (times[-1] - times[0])
    sel = times >= t_start - 1e-12 * max(1.0, abs(t_start))
    t, y = times[sel], norms[sel]
    if t.size < 10:
        raise InsufficientData(f"need at least 10 samples in the window, got {t.size}")
    if np.any(y <= 0):
        raise NonPositiveNorms("log-linear fit needs strictly positive norms")
    logy = np.log(y)
    slope, intercept = np.polyfit(t, logy, 1)
    resid = float(np.sqrt(np.mean((logy - (slope * t + intercept)) ** 2)))
    return RateFit(float(slope), float(intercept), (float(t[0]), float(t[-1])), resid, int(t.size))


def default_dt(report=None):
    if report is None or not np.isfinite(report.s_L) or report.s_L == 0:
        return 1e-3
    return min(1e-3, 0.1 / abs(report.s_L))
