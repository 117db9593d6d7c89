"""Stationary solutions: constant states, shooting for jump patterns, Newton.

Jump-discontinuous patterns of an m = k = 1 system are built from two
branches ``u = b(v)`` of ``f(u, v) = 0``.  The diffusing component solves
``D v'' + g(b(v), v) = 0`` with ``v'(0) = v'(1) = 0``; the branch switches
when ``v`` crosses the jump value.  Shooting gives the profile, and a Newton
polish on the discrete equations (branch labels frozen) brings the grid
residual down to rounding level.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg

from .errors import (BranchUndefined, DimensionMismatch, EventNotCrossed, NoConvergence,
                     NoSolution, SingularJacobian)
from .grid import Grid, StateField, apply_laplacian
from .linearize import assemble_operator, jacobian_field
from .model import DdiParams, HysteresisParams, build_hysteresis_model

log = logging.getLogger(__name__)


@dataclass
class SteadyState:
    field: StateField
    residual_sup: float
    branch_labels: list | None = None
    jump_points: list = field(default_factory=list)
    tolerance: float = 1e-10
    iterations: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def u(self):
        return self.field.u

    @property
    def v(self):
        return self.field.v


def steady_residual(model, state, grid):
    """``(f, D^v Delta_h v + g)`` evaluated nodewise.

    Uses the matrix-free Laplacian, so it shares no code with the Newton
    solvers that produce the states it checks.
    """
    state.check_shape(model.m, model.k, grid.n)
    f, g = model.evaluate(state.u, state.v, grid.nodes)
    diff = np.asarray(model.diffusion)[:, None] * apply_laplacian(grid, state.v)
    return StateField(np.array(f), diff + g)


def residual_sup(model, state, grid):
    return steady_residual(model, state, grid).sup_norm()


def holder_constant(state, grid):
    """Max adjacent difference of the v components divided by h."""
    if state.n < 2:
        return 0.0
    return float(np.max(np.abs(np.diff(state.v, axis=1))) / grid.h)


# -- constant states ----------------------------------------------------------

def find_constant_steady(model, guess, grid=None, tol=1e-12, max_iter=50):
    """Newton iteration for a spatially constant root of ``(f, g)``.

    The reaction is evaluated at the midpoint x = 1/2; only meaningful for
    x-independent models.
    """
    grid = grid if grid is not None else Grid(1)
    z = np.asarray(guess, dtype=float).copy()
    m = model.m
    if z.size != m + model.k:
        raise DimensionMismatch(f"guess needs {m + model.k} entries, got {z.size}")
    x = np.array([0.5])

    def residual(z):
        f, g = model.evaluate(z[:m, None], z[m:, None], x)
        return np.concatenate([f[:, 0], g[:, 0]])

    r = residual(z)
    iterations = 0
    while np.max(np.abs(r)) > tol:
        if iterations >= max_iter:
            raise NoConvergence(f"constant Newton stalled at residual {np.max(np.abs(r)):.3e} "
                                f"after {max_iter} iterations")
        jac = model.jacobian(z[:m, None], z[m:, None], x)[0]
        cond = np.linalg.cond(jac)
        if not np.isfinite(cond) or cond > 1e14:
            raise SingularJacobian(f"reaction Jacobian singular at {z.tolist()}", condition=cond)
        z = z - np.linalg.solve(jac, r)
        r = residual(z)
        iterations += 1
    state = StateField.constant(z, m, grid.n)
    res = residual_sup(model, state, grid) if grid.n > 1 else float(np.max(np.abs(r)))
    return SteadyState(state, res, classify_branches(model, state), [], tol, iterations,
                       {"method": "constant"})


# -- branches of f = 0 -----------------------------------------------------

class HysteresisBranches:
    """Branches ``h_H``, ``h_0``, ``h_T`` of ``v = p(u)`` solved for u.

    For a monotone p only ``h`` (stored as ``H``) exists and covers all v.
    Roots come from a bracketed Newton iteration seeded at the turning
    points of p; a warm start ``guess`` skips the bracketing when it is
    already close.  With ``safe=True`` out-of-range values give NaN instead
    of raising.
    """

    def __init__(self, params: HysteresisParams):
        self.params = params
        tp = params.turning_points()
        if tp is None:
            self.u_H = self.u_T = None
            self.v_H, self.v_T = np.inf, -np.inf
        else:
            self.u_H, self.u_T = tp
            self.v_H, self.v_T = float(params.p(self.u_H)), float(params.p(self.u_T))

    def _bracketed(self, v, lo, hi, increasing):
        p = self.params
        lo = np.full_like(v, lo)
        hi = np.full_like(v, hi)
        sign = 1.0 if increasing else -1.0
        # widen open brackets until they enclose the root
        for _ in range(200):
            bad = sign * (p.p(lo) - v) > 0
            if not bad.any():
                break
            lo = np.where(bad, lo - 2.0 * (1.0 + np.abs(lo)), lo)
        for _ in range(200):
            bad = sign * (p.p(hi) - v) < 0
            if not bad.any():
                break
            hi = np.where(bad, hi + 2.0 * (1.0 + np.abs(hi)), hi)
        u = 0.5 * (lo + hi)
        for _ in range(100):
            r = sign * (p.p(u) - v)
            lo = np.where(r < 0, u, lo)
            hi = np.where(r >= 0, u, hi)
            with np.errstate(divide="ignore", invalid="ignore"):
                step = u - r / (sign * p.dp(u))
            inside = (step > lo) & (step < hi) & np.isfinite(step)
            new = np.where(inside, step, 0.5 * (lo + hi))
            if np.all(np.abs(new - u) <= 1e-15 * (1.0 + np.abs(u))):
                return new
            u = new
        return u

    def _solve(self, v, lo, hi, increasing, guess):
        p = self.params
        b_lo = lo if lo is not None else (hi - 1.0 if hi is not None else -1.0)
        b_hi = hi if hi is not None else b_lo + 2.0
        if guess is None:
            return self._bracketed(v, b_lo, b_hi, increasing)
        u = np.array(np.broadcast_to(guess, v.shape), dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            for _ in range(8):
                u = u - (p.p(u) - v) / p.dp(u)
        ok = np.isfinite(u) & (np.abs(p.p(u) - v) <= 1e-13 * (1.0 + np.abs(v)))
        if lo is not None:
            ok &= u >= lo
        if hi is not None:
            ok &= u <= hi
        if not ok.all():
            bad = ~ok
            u[bad] = self._bracketed(v[bad], b_lo, b_hi, increasing)
        return u

    def _domain(self, v, bad, message, safe):
        if not bad.any():
            return v, None
        if not safe:
            raise BranchUndefined(message)
        return np.where(bad, np.nan, v), bad

    def _finish(self, u, bad):
        if bad is not None:
            u = np.where(bad, np.nan, u)
        return u

    def H(self, v, guess=None, safe=False):
        v = np.asarray(v, dtype=float)
        v, bad = self._domain(v, v > self.v_H + 1e-13, f"h_H is defined only for v <= {self.v_H:.6g}", safe)
        vv = np.where(np.isnan(v), self.v_H if np.isfinite(self.v_H) else 0.0, v)
        if self.u_H is None:
            return self._finish(self._solve(vv, None, None, True, guess), bad)
        return self._finish(self._solve(vv, None, self.u_H, True, guess), bad)

    def T(self, v, guess=None, safe=False):
        v = np.asarray(v, dtype=float)
        if self.u_T is None:
            return self.H(v, guess, safe)
        v, bad = self._domain(v, v < self.v_T - 1e-13, f"h_T is defined only for v >= {self.v_T:.6g}", safe)
        vv = np.where(np.isnan(v), self.v_T, v)
        return self._finish(self._solve(vv, self.u_T, None, True, guess), bad)

    def middle(self, v, guess=None, safe=False):
        v = np.asarray(v, dtype=float)
        if self.u_T is None:
            raise BranchUndefined("monotone p has no middle branch")
        v, bad = self._domain(v, (v < self.v_T - 1e-13) | (v > self.v_H + 1e-13),
                              f"h_0 is defined only for {self.v_T:.6g} <= v <= {self.v_H:.6g}", safe)
        vv = np.where(np.isnan(v), 0.5 * (self.v_T + self.v_H), v)
        return self._finish(self._solve(vv, self.u_H, self.u_T, False, guess), bad)

    def slope(self, u):
        """du/dv along any branch: 1 / p'(u)."""
        return 1.0 / self.params.dp(u)

    def label(self, u):
        u = np.asarray(u, dtype=float)
        if self.u_H is None:
            return ["H"] * u.size
        return ["H" if ui < self.u_H else ("T" if ui > self.u_T else "0") for ui in u.ravel()]


@dataclass(frozen=True)
class DdiBranchTable:
    params: DdiParams

    @property
    def v_r(self):
        return self.params.v_r

    def _disc(self, v, safe):
        v = np.asarray(v, dtype=float)
        bad = (v > self.v_r + 1e-12) | (v <= -1.0)
        if bad.any():
            if not safe:
                raise BranchUndefined(f"u_+ and u_- are defined only for 0 <= v <= v_r = {self.v_r:.6g}")
            v = np.where(bad, np.nan, v)
        p = self.params
        return np.sqrt(np.maximum(p.m1 ** 2 - 4.0 * p.kappa * (1.0 + v) ** 2, 0.0)), v

    def u0(self, v, guess=None, safe=False):
        return np.zeros_like(np.asarray(v, dtype=float))

    def u_plus(self, v, guess=None, safe=False):
        root, v = self._disc(v, safe)
        return (self.params.m1 + root) / (2.0 * self.params.kappa * (1.0 + v))

    def u_minus(self, v, guess=None, safe=False):
        root, v = self._disc(v, safe)
        # 2(1 + v)/(m1 + root) equals the minus root without cancellation
        return 2.0 * (1.0 + v) / (self.params.m1 + root)

    def slope(self, u, v):
        """du/dv along u_+ or u_- from implicit differentiation of the bracket in f = 0."""
        k = self.params.kappa
        # F(u, v) = -(1 + v)(1 + k u^2) + m1 u = 0
        F_u = -2.0 * k * u * (1.0 + v) + self.params.m1
        F_v = -(1.0 + k * u ** 2)
        return -F_v / F_u

    def label(self, u, v=None):
        u = np.asarray(u, dtype=float).ravel()
        thresh = 1.0 / np.sqrt(self.params.kappa)
        return ["u0" if abs(ui) < 1e-10 else ("u-" if ui < thresh else "u+") for ui in u]


def ddi_branch_table(params):
    params.validate()
    return DdiBranchTable(params)


def classify_branches(model, state):
    """Per-node branch labels for the built-in m = k = 1 models, else None."""
    params = model.params
    if model.m != 1 or model.k != 1:
        return None
    if isinstance(params, HysteresisParams):
        if params.is_monotone():
            return None
        return HysteresisBranches(params).label(state.u[0])
    if isinstance(params, DdiParams):
        return DdiBranchTable(params).label(state.u[0])
    return None


# -- shooting ------------------------------------------------------------------

@dataclass
class _Branch:
    label: str
    u_of_v: object       # (v, guess=None, safe=False) -> u
    du_dv: object        # (u, v) -> du/dv


def _shoot(model, left, right, v_jump, direction, a, grid, record=False):
    """Integrate ``D v'' = -g(b(v), v)`` from x = 0 for a batch of starts ``v(0) = a``.

    All trajectories in ``a`` advance together with classical RK4 at step
    h/4.  A trajectory switches from ``left`` to ``right`` in the step where
    ``direction * (v - v_jump)`` turns non-negative; the crossing point is
    located by linear interpolation and the step is split there.

    Returns ``(slope_end, jump_x, node_values)``: v'(1) per trajectory, the
    jump location (NaN if never crossed) and, if ``record``, v at the grid
    nodes with shape ``(len(a), n)``.  A trajectory that leaves the domain
    of its branch is frozen, reporting its last slope, whose sign is what
    the bracket search needs.
    """
    d = model.diffusion[0]
    a = np.atleast_1d(np.asarray(a, dtype=float))
    batch = a.size
    x_mid = np.full(batch, 0.5)
    steps_per_cell = 4
    dx = grid.h / steps_per_cell

    v = a.copy()
    w = np.zeros(batch)
    crossed = np.zeros(batch, dtype=bool)
    alive = np.ones(batch, dtype=bool)
    jump_x = np.full(batch, np.nan)
    u_guess = left.u_of_v(v, safe=True)
    nodes = np.full((batch, grid.n), np.nan) if record else None

    def accel(vv, on_right):
        u = np.empty_like(vv)
        lm, rm = ~on_right, on_right
        if lm.any():
            u[lm] = left.u_of_v(vv[lm], guess=u_guess[lm], safe=True)
        if rm.any():
            u[rm] = right.u_of_v(vv[rm], guess=u_guess[rm], safe=True)
        g = model.evaluate(u[None, :], vv[None, :], x_mid[: vv.size])[1][0]
        return -g / d, u

    def rk4(v0, w0, s, on_right):
        a1, u = accel(v0, on_right)
        v2, w2 = v0 + 0.5 * s * w0, w0 + 0.5 * s * a1
        a2, _ = accel(v2, on_right)
        v3, w3 = v0 + 0.5 * s * w2, w0 + 0.5 * s * a2
        a3, _ = accel(v3, on_right)
        v4, w4 = v0 + s * w3, w0 + s * a3
        a4, _ = accel(v4, on_right)
        return (v0 + s / 6.0 * (w0 + 2.0 * w2 + 2.0 * w3 + w4),
                w0 + s / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4), u)

    with np.errstate(invalid="ignore"):
        for step in range(grid.n * steps_per_cell):
            x0 = step * dx
            idx = np.nonzero(alive)[0]
            if idx.size == 0:
                break
            u_guess_all = u_guess
            u_guess = u_guess_all[idx]
            v0, w0, on_right = v[idx], w[idx], crossed[idx]
            v1, w1, u_now = rk4(v0, w0, dx, on_right)
            hit = ~on_right & (direction * (v1 - v_jump) >= 0)
            if hit.any():
                frac = np.clip((v_jump - v0[hit]) / (v1[hit] - v0[hit]), 0.0, 1.0)
                u_guess = u_guess[hit]
                vm, wm, _ = rk4(v0[hit], w0[hit], frac * dx, np.zeros(hit.sum(), dtype=bool))
                u_guess = right.u_of_v(vm, safe=True)
                vr, wr, _ = rk4(vm, wm, (1.0 - frac) * dx, np.ones(hit.sum(), dtype=bool))
                v1[hit], w1[hit] = vr, wr
                jump_x[idx[hit]] = x0 + frac * dx
                crossed[idx[hit]] = True
                u_guess = u_guess_all[idx]
                u_now[hit] = right.u_of_v(vr, safe=True)
            ok = np.isfinite(v1) & np.isfinite(w1) & (np.abs(v1) < 1e6)
            v[idx[ok]], w[idx[ok]] = v1[ok], w1[ok]
            alive[idx[~ok]] = False
            u_guess = u_guess_all
            u_guess[idx[ok]] = np.where(np.isfinite(u_now[ok]), u_now[ok], u_guess[idx[ok]])
            if record and step % steps_per_cell == 1:
                # node i sits two substeps into cell i
                nodes[idx[ok], step // steps_per_cell] = v1[ok]
    slope = np.where(w != 0, w, -direction * 1e-300)
    return slope, jump_x, nodes


def _polish_fixed_labels(model, v, branches, grid, tol=1e-13, max_iter=60):
    """Newton on ``D Delta_h v + g(b_i(v_i), v_i) = 0`` with node branches frozen."""
    d = model.diffusion[0]
    n = grid.n
    x = grid.nodes
    c = d / grid.h ** 2
    v = v.copy()

    def evaluate(v):
        u = np.empty(n)
        slope = np.empty(n)
        for br, idx in branches:
            u[idx] = br.u_of_v(v[idx])
            slope[idx] = br.du_dv(u[idx], v[idx])
        return u, slope

    for _ in range(max_iter):
        u, slope = evaluate(v)
        g = model.evaluate(u[None, :], v[None, :], x)[1][0]
        res = d * apply_laplacian(grid, v) + g
        if np.max(np.abs(res)) <= tol * max(1.0, c):
            break
        jac = model.jacobian(u[None, :], v[None, :], x)
        diag = jac[:, 1, 0] * slope + jac[:, 1, 1] - 2.0 * c
        diag[0] += c
        diag[-1] += c
        ab = np.zeros((3, n))
        ab[0, 1:] = c
        ab[1] = diag
        ab[2, :-1] = c
        delta = linalg.solve_banded((1, 1), ab, -res)
        v = v + delta
        if np.max(np.abs(delta)) < 1e-15 * (1.0 + np.max(np.abs(v))):
            break
    u, _ = evaluate(v)
    return u, v


def solve_branch_pattern(model, left, right, v_jump, grid, a_bounds, direction, scan=64,
                         bisect_tol=1e-10):
    """Single-jump pattern switching from branch ``left`` to ``right`` at ``v_jump``.

    ``direction`` is +1 when v increases through the jump and -1 when it
    decreases; ``a_bounds`` brackets the unknown boundary value v(0).  The
    bracket is scanned at ``scan`` points for a sign change of v'(1), then
    shrunk by repeated ``scan``-point subdivision (a batched bisection).
    """
    if model.m != 1 or model.k != 1:
        raise DimensionMismatch("pattern shooting supports m = k = 1 only")
    lo, hi = a_bounds
    candidates = np.linspace(lo + 1e-8, hi - 1e-8, scan)
    slopes, jumps, _ = _shoot(model, left, right, v_jump, direction, candidates, grid)
    if not np.isfinite(jumps).any():
        raise EventNotCrossed(f"no trajectory with v(0) in ({lo:.6g}, {hi:.6g}) reaches v_jump={v_jump:.6g}")
    signs = np.sign(slopes)
    change = np.nonzero(signs[:-1] * signs[1:] < 0)[0]
    if change.size == 0:
        raise NoSolution(f"no sign change of v'(1) over the shooting scan for D={model.diffusion[0]:g}")
    i = change[0]
    a_lo, a_hi, s_lo = candidates[i], candidates[i + 1], slopes[i]
    a, best = a_lo, abs(s_lo)
    for _ in range(20):
        pts = np.linspace(a_lo, a_hi, scan)
        sl, _, _ = _shoot(model, left, right, v_jump, direction, pts, grid)
        j = int(np.argmin(np.abs(sl)))
        if abs(sl[j]) < best:
            a, best = pts[j], abs(sl[j])
        if best <= bisect_tol:
            break
        flips = np.nonzero(np.sign(sl[:-1]) == np.sign(s_lo))[0]
        flips = flips[np.sign(sl[flips + 1]) != np.sign(s_lo)]
        if flips.size == 0:
            break
        f = flips[0]
        a_lo, a_hi = pts[f], pts[f + 1]
        if a_hi - a_lo <= 4 * np.finfo(float).eps * max(1.0, abs(a_lo)):
            break
    slope, jump_x, v_nodes = _shoot(model, left, right, v_jump, direction, np.array([a]), grid,
                                    record=True)
    slope, jump_x, v_nodes = float(slope[0]), float(jump_x[0]), v_nodes[0]
    if not np.isfinite(jump_x) or not np.all(np.isfinite(v_nodes)):
        raise NoSolution("bracket search converged to a trajectory without a jump")
    if abs(slope) > 1e-6:
        raise NoSolution(f"shooting mismatch v'(1) = {slope:.3e} could not be closed")

    left_idx = grid.nodes < jump_x
    if left_idx.all() or not left_idx.any():
        raise NoSolution(f"jump at x={jump_x:.6g} leaves no grid node on one side")
    branches = [(left, np.nonzero(left_idx)[0]), (right, np.nonzero(~left_idx)[0])]
    try:
        u, v = _polish_fixed_labels(model, v_nodes, branches, grid)
    except BranchUndefined as exc:
        raise NoSolution(f"discrete polish left the branch domain: {exc}") from exc
    state = StateField(u[None, :], v[None, :])
    res = residual_sup(model, state, grid)
    if not np.all(np.isfinite(state.as_vector())) or res > 1e-6:
        raise NoSolution(f"pattern residual {res:.3e} exceeds 1e-6")
    labels = [left.label if flag else right.label for flag in left_idx]
    return SteadyState(state, res, labels, [jump_x], 1e-6, 0,
                       {"method": "shooting", "v_jump": float(v_jump), "v0": float(a),
                        "shooting_mismatch": slope})


def hysteresis_admissible_interval(params):
    """The open interval ``(v_T, min(v_H, v_2))`` of admissible jump values."""
    br = HysteresisBranches(params)
    if br.u_H is None:
        raise NoSolution("the bistable case has no jump patterns")
    v2 = params.ratio * params.intersections()[-1]
    return br.v_T, min(br.v_H, v2)


def solve_hysteresis_pattern(model, v_jump, grid):
    """Monotone increasing pattern jumping from ``h_H`` to ``h_T`` where v = v_jump."""
    params = model.params
    if not isinstance(params, HysteresisParams):
        raise NoSolution("solve_hysteresis_pattern needs a hysteresis model")
    lo, hi = hysteresis_admissible_interval(params)
    if not lo < v_jump < hi:
        raise NoSolution(f"v_jump={v_jump:.6g} outside admissible interval ({lo:.6g}, {hi:.6g})")
    br = HysteresisBranches(params)
    left = _Branch("H", br.H, lambda u, v: br.slope(u))
    right = _Branch("T", br.T, lambda u, v: br.slope(u))
    # S0 has v = 0, the smallest admissible start
    state = solve_branch_pattern(model, left, right, v_jump, grid, (0.0, v_jump), +1)
    if np.any(np.diff(state.v[0]) <= 0):
        raise NoSolution("shooting produced a non-monotone pattern")
    return state


def admissible_midpoint(params):
    lo, hi = hysteresis_admissible_interval(params)
    return 0.5 * (lo + hi)


def find_pattern_diffusion(params, grid, v_jump=None, ladder=None):
    """Scan a diffusion ladder (largest first) and return the first pattern found.

    Returns ``(model, steady)``.
    """
    ladder = ladder if ladder is not None else [1e-1, 5e-2, 2e-2, 1e-2, 5e-3, 2e-3, 1e-3, 5e-4, 2e-4, 1e-4]
    v_jump = admissible_midpoint(params) if v_jump is None else v_jump
    errors = []
    for d in ladder:
        model = build_hysteresis_model(replace(params, diffusion=d))
        try:
            return model, solve_hysteresis_pattern(model, v_jump, grid)
        except (NoSolution, EventNotCrossed) as exc:
            errors.append(f"D={d:g}: {exc}")
            log.debug("diffusion %g failed: %s", d, exc)
    raise NoSolution("no diffusion on the ladder produced a pattern: " + "; ".join(errors))


def solve_ddi_pattern(model, v_jump, grid, branch="u+"):
    """Pattern of class ``branch`` (u+ or u-) near x = 0 and class u0 beyond the jump.

    On the nonzero branch ``g > 0`` so v decreases; the jump happens where v
    falls to ``v_jump``, which must lie in ``(0, v_r)``.
    """
    params = model.params
    if not isinstance(params, DdiParams):
        raise NoSolution("solve_ddi_pattern needs a DDI model")
    table = DdiBranchTable(params)
    if not 0 < v_jump < table.v_r:
        raise NoSolution(f"v_jump={v_jump:.6g} outside (0, v_r={table.v_r:.6g})")
    if branch == "u+":
        left = _Branch("u+", table.u_plus, table.slope)
    elif branch == "u-":
        left = _Branch("u-", table.u_minus, table.slope)
    else:
        raise ValueError(f"branch must be 'u+' or 'u-', got {branch!r}")
    right = _Branch("u0", table.u0, lambda u, v: np.zeros_like(u))
    return solve_branch_pattern(model, left, right, v_jump, grid, (v_jump, table.v_r), -1)


# -- Newton on the full discrete system ------------------------------------------

def solve_newton_steady(model, initial, grid, tol=1e-10, max_iter=100):
    """Damped Newton on ``{f = 0, D^v Delta_h v + g = 0}`` for all nodes at once."""
    initial.check_shape(model.m, model.k, grid.n)
    if not np.all(np.isfinite(initial.as_vector())):
        raise NoConvergence("initial field is not finite")
    m, k = model.m, model.k
    state = initial.copy()
    res = steady_residual(model, state, grid)
    norm = res.sup_norm()
    iterations = 0
    while norm > tol:
        if iterations >= max_iter:
            raise NoConvergence(f"Newton stalled at residual {norm:.3e} after {max_iter} iterations")
        probe = SteadyState(state, norm)
        op = assemble_operator(jacobian_field(model, probe, grid), grid, model.diffusion)
        try:
            lu, piv = linalg.lu_factor(op.matrix, check_finite=True)
        except (ValueError, linalg.LinAlgError) as exc:
            raise SingularJacobian(f"LU factorisation failed: {exc}") from exc
        rcond, _ = linalg.lapack.dgecon(lu, np.linalg.norm(op.matrix, 1), norm="1")
        if not rcond > 1e-15:
            cond = np.inf if rcond == 0 else 1.0 / rcond
            raise SingularJacobian(f"discrete Jacobian singular (condition ~ {cond:.3e})", condition=cond)
        delta = -linalg.lu_solve((lu, piv), res.as_vector())
        # backtracking on the sup norm of the residual
        step = 1.0
        while True:
            trial = StateField.from_vector(state.as_vector() + step * delta, m, k)
            trial_res = steady_residual(model, trial, grid)
            trial_norm = trial_res.sup_norm()
            if np.isfinite(trial_norm) and (trial_norm < (1.0 - 1e-4 * step) * norm or step < 1e-3):
                break
            step *= 0.5
        if not np.isfinite(trial_norm):
            raise NoConvergence("Newton iterate became non-finite")
        state, res, norm = trial, trial_res, trial_norm
        iterations += 1
    labels = classify_branches(model, state)
    jumps = []
    if labels is not None:
        faces = grid.faces()
        jumps = [float(faces[i + 1]) for i in range(len(labels) - 1) if labels[i] != labels[i + 1]]
    return SteadyState(state, norm, labels, jumps, tol, iterations, {"method": "newton"})


def sigmoid_guess(model, grid, low, high, width=0.1, center=0.5):
    """Monotone tanh profile from constant state ``low`` to ``high`` (both length m+k)."""
    low = np.asarray(low, dtype=float)
    high = np.asarray(high, dtype=float)
    s = 0.5 * (1.0 + np.tanh((grid.nodes - center) / width))
    vals = low[:, None] + (high - low)[:, None] * s[None, :]
    return StateField(vals[:model.m], vals[model.m:])
