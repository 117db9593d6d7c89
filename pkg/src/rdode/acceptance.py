"""Acceptance battery: ten end-to-end checks with fixed tolerances.

Each ``criterion_*`` function returns a :class:`CriterionResult`.  The
battery is shared by ``rdode verify`` and the test suite.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .dynamics import (default_dt, estimate_rate, perturb, picard_mild, simulate,
                       simulate_linear)
from .grid import Grid, StateField, cosine_modes, heat_propagate, laplacian_eigenvalues
from .linearize import JacobianField, assemble_operator, nonlinear_remainder
from .model import builtin_model
from .spectra import analyze, check_sufficient_stability, operator_eigenvalues
from .steady import (admissible_midpoint, find_constant_steady, sigmoid_guess,
                     solve_ddi_pattern, solve_hysteresis_pattern, solve_newton_steady)

# grid sizes below this cannot resolve the three-level convergence study
MIN_CONVERGENCE_N = 64
DDI_V_JUMP = 0.35


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    measured: dict
    tolerance: dict
    runtime: float = 0.0
    runtime_limit: float | None = None
    skipped: bool = False
    detail: str = ""

    @property
    def status(self):
        if self.skipped:
            return "SKIP"
        return "PASS" if self.passed else "FAIL"

    def line(self):
        limit = f" (limit {self.runtime_limit:g} s)" if self.runtime_limit else ""
        text = f"[{self.status}] {self.number:2d} {self.name}: runtime {self.runtime:.2f} s{limit}"
        return text + (f"; {self.detail}" if self.detail else "")

    def to_dict(self):
        return {"number": self.number, "name": self.name, "status": self.status,
                "passed": self.passed, "skipped": self.skipped, "measured": self.measured,
                "tolerance": self.tolerance, "runtime": self.runtime,
                "runtime_limit": self.runtime_limit, "detail": self.detail}


def _timed(number, name, limit, fn):
    start = time.perf_counter()
    passed, measured, tolerance, detail = fn()
    runtime = time.perf_counter() - start
    within = limit is None or runtime < limit
    measured = dict(measured, runtime_within_limit=within)
    if not within:
        detail = (detail + "; " if detail else "") + f"runtime {runtime:.1f} s over limit"
    return CriterionResult(number, name, bool(passed and within), measured, tolerance,
                           runtime, limit, False, detail)


# -- shared steady states ------------------------------------------------------

@lru_cache(maxsize=None)
def hysteresis_pattern(n):
    model = builtin_model("hysteresis")
    grid = Grid(n)
    return model, grid, solve_hysteresis_pattern(model, admissible_midpoint(model.params), grid)


@lru_cache(maxsize=None)
def hysteresis_analysis(n):
    model, grid, steady = hysteresis_pattern(n)
    return analyze(model, steady, grid)


@lru_cache(maxsize=None)
def bistable_pattern(n):
    model = builtin_model("bistable")
    grid = Grid(n)
    s0 = find_constant_steady(model, [0.0, 0.0]).field.as_vector()
    s2 = find_constant_steady(model, [1.0, 1.0]).field.as_vector()
    steady = solve_newton_steady(model, sigmoid_guess(model, grid, s0, s2), grid)
    return model, grid, steady


@lru_cache(maxsize=None)
def ddi_pattern(n, branch):
    model = builtin_model("ddi")
    grid = Grid(n)
    return model, grid, solve_ddi_pattern(model, DDI_V_JUMP, grid, branch=branch)


# -- criteria --------------------------------------------------------------------

def criterion_mode_decoupling(n=128):
    def run():
        model = builtin_model("hysteresis")
        grid = Grid(n)
        u2 = model.params.intersections()[-1]
        s2 = find_constant_steady(model, [u2, model.params.ratio * u2], grid)
        op, _, _, _, _ = analyze(model, s2, grid)
        eigs = operator_eigenvalues(op)
        lead = eigs[np.argsort(-eigs.real, kind="stable")][:8]
        J = model.jacobian(s2.u[:, :1], s2.v[:, :1], [0.5])[0]
        d = model.diffusion[0]
        blocks = [J - np.diag([0.0, d * abs(mu)]) for mu in laplacian_eigenvalues(grid, 1.0)]
        modal = np.concatenate([np.linalg.eigvals(b) for b in blocks])
        ref = modal[np.argsort(-modal.real, kind="stable")][:8]
        rel = float(np.max(np.abs(np.sort_complex(lead) - np.sort_complex(ref)) / np.abs(ref)))
        return rel <= 1e-8, {"max_relative_error": rel}, {"max_relative_error": 1e-8}, f"rel err {rel:.2e}"
    return _timed(1, "mode decoupling at S2", 5.0, run)


def criterion_linear_growth(n=128, seed=0):
    def run():
        model, grid, steady = hysteresis_pattern(n)
        op, _, report, _, _ = hysteresis_analysis(n)
        lam = float(np.max(operator_eigenvalues(op).real))
        xi0 = perturb("uniform_random", grid, 1, 1, 1e-3, seed=seed)
        trace = simulate_linear(op, xi0, 20.0 / abs(report.s_L), 0.05)
        fit = estimate_rate(trace, 0.5)
        rel = abs(fit.rate / lam - 1.0)
        return (rel <= 0.02, {"fitted_rate": fit.rate, "max_re_eig": lam, "relative_error": rel},
                {"relative_error": 0.02}, f"rate {fit.rate:.6g} vs {lam:.6g}")
    return _timed(2, "linear growth bound equals spectral bound", 10.0, run)


def criterion_nonlinear_stability(n=128, seed=0):
    def run():
        model, grid, steady = hysteresis_pattern(n)
        op, _, report, verdict, sufficient = hysteresis_analysis(n)
        s_L = report.s_L
        t_end = 15.0 / abs(s_L)
        dt = default_dt(report)
        params = model.params
        K = float(np.min(params.dp(steady.u[0])))
        measured = {"s_L": s_L, "verdict": verdict.label, "K": K, "alpha_over_beta": params.ratio}
        ok = K > params.ratio and verdict.label == "Stable" and s_L < 0
        for kind in ("eigenmode", "uniform_random", "indicator_bump"):
            xi0 = perturb(kind, grid, 1, 1, 1e-3, op=op, seed=seed)
            trace = simulate(model, steady, xi0, t_end, dt, max_records=4000)
            envelope = 10.0 * np.exp((s_L + 0.1 * abs(s_L)) * trace.times) * trace.sup_norms[0]
            worst = float(np.max(trace.sup_norms / envelope))
            final = float(trace.sup_norms[-1] / trace.sup_norms[0])
            measured[kind] = {"max_norm_over_envelope": worst, "final_ratio": final}
            ok = ok and worst <= 1.0 and final < 1e-5
        return (ok, measured, {"max_norm_over_envelope": 1.0, "final_ratio": 1e-5},
                f"s_L {s_L:.6g}")
    return _timed(3, "nonlinear stability of the hysteresis pattern", 60.0, run)


def criterion_bistable_instability(n=128):
    def run():
        model, grid, steady = bistable_pattern(n)
        op, _, report, verdict, _ = analyze(model, steady, grid)
        lead = report.leading_discrete()
        s_L = report.s_L
        measured = {"verdict": verdict.label, "s_L": s_L,
                    "leading_discrete": None if lead is None else lead.real,
                    "v_range": [float(steady.v.min()), float(steady.v.max())]}
        if verdict.label != "Unstable" or lead is None or lead.real <= 0:
            return False, measured, {"relative_rate_error": 0.1}, "classifier did not report instability"
        xi0 = perturb("eigenmode", grid, 1, 1, 1e-6, op=op)
        # grows by 1e4 to reach the 1e-2 cap, plus one e-fold of slack
        t_end = (np.log(1e4) + 1.0) / s_L
        trace = simulate(model, steady, xi0, t_end, default_dt(report), max_records=4000)
        fit = estimate_rate(trace, 0.5, max_norm=1e-2)
        rel = abs(fit.rate / s_L - 1.0)
        measured.update(fitted_rate=fit.rate, relative_rate_error=rel)
        return rel <= 0.1, measured, {"relative_rate_error": 0.1}, f"rate {fit.rate:.6g} vs s_L {s_L:.6g}"
    return _timed(4, "instability of the bistable pattern", 60.0, run)


def criterion_ddi(n=128):
    def run():
        measured = {}
        model, grid, minus = ddi_pattern(n, "u-")
        _, _, rep_m, ver_m, _ = analyze(model, minus, grid)
        ok_a = ("u-" in minus.branch_labels and rep_m.s_A > 0 and ver_m.label == "Unstable"
                and "s(A*) > 0" in ver_m.reasons)
        measured["u-"] = {"s_A": rep_m.s_A, "verdict": ver_m.label, "reasons": ver_m.reasons}
        model, grid, plus = ddi_pattern(n, "u+")
        _, jac, rep_p, ver_p, _ = analyze(model, plus, grid)
        labels = np.array(plus.branch_labels)
        u_s = float(np.min(plus.u[0][labels == "u+"]))
        params = model.params
        suff = check_sufficient_stability(jac)
        ok_b = (set(labels) <= {"u0", "u+"} and u_s > 1.0 / np.sqrt(params.kappa)
                and params.m2 > params.m1 and suff.passed and rep_p.s_L < 0
                and ver_p.label == "Stable")
        measured["u+"] = {"u_s": u_s, "s_L": rep_p.s_L, "verdict": ver_p.label,
                          "sufficient": suff.to_dict()}
        return (ok_a and ok_b, measured, {"s_A(u-)": "> 0", "s_L(u+)": "< 0"},
                f"(a) {'ok' if ok_a else 'failed'}, (b) {'ok' if ok_b else 'failed'}")
    return _timed(5, "DDI pattern classes", 30.0, run)


def random_stable_jacobian(rng, n, c=0.05):
    """m = k = 1 Jacobian field with ``A <= -c``, ``D <= 0`` and ``AD - BC > 0`` everywhere.

    Coefficients are piecewise smooth with a random jump location, the
    situation met at discontinuous patterns.
    """
    x = Grid(n).nodes
    jump = rng.uniform(0.2, 0.8)
    side = x > jump

    def piece(lo, hi):
        a, b = rng.uniform(lo, hi, 2)
        w = rng.uniform(0.5, 3.0)
        return np.where(side, b, a) + 0.2 * (hi - lo) * np.sin(w * np.pi * x) ** 2

    A = -c - piece(0.0, 3.0)
    D = -piece(0.0, 2.0)
    B = piece(-2.0, 2.0)
    # |B C| < A D keeps the determinant positive
    C = rng.uniform(-0.95, 0.95, n) * A * D / np.where(np.abs(B) < 1e-3, 1e-3, B)
    return JacobianField(A.reshape(n, 1, 1), B.reshape(n, 1, 1), C.reshape(n, 1, 1),
                         D.reshape(n, 1, 1))


def criterion_stability_assumption(n=64, samples=20, seed=0):
    def run():
        rng = np.random.default_rng(seed)
        worst = -np.inf
        grid = Grid(n)
        failures = 0
        for _ in range(samples):
            jac = random_stable_jacobian(rng, n)
            if not check_sufficient_stability(jac).passed:
                failures += 1
                continue
            d = rng.uniform(1e-3, 1.0)
            eigs = operator_eigenvalues(assemble_operator(jac, grid, (d,)))
            worst = max(worst, float(np.max(eigs.real)))
        ok = failures == 0 and worst < 1e-8
        return (ok, {"max_real_part": worst, "generator_failures": failures},
                {"max_real_part": 1e-8}, f"max Re {worst:.3e}")
    return _timed(6, "stability assumption implies negative spectrum", 30.0, run)


def builtin_steady_states(n):
    """Named steady states of the built-in models used by the remainder check.

    Constant states at an inflection point of the nullcline have a vanishing
    quadratic Taylor term and are left out.
    """
    states = []
    hyst = builtin_model("hysteresis")
    roots = hyst.params.intersections()
    grid = Grid(n)
    for label, u in (("hysteresis S0", roots[0]), ("hysteresis S2", roots[2])):
        states.append((label, hyst, find_constant_steady(hyst, [u, hyst.params.ratio * u], grid)))
    model, _, steady = hysteresis_pattern(n)
    states.append(("hysteresis pattern", model, steady))
    bist = bistable_pattern(n)
    states.append(("bistable pattern", bist[0], bist[2]))
    ddi = builtin_model("ddi")
    states.append(("ddi origin", ddi, find_constant_steady(ddi, [0.0, 0.0], grid)))
    for branch in ("u+", "u-"):
        model, _, steady = ddi_pattern(n, branch)
        states.append((f"ddi {branch} pattern", model, steady))
    return states


def criterion_quadratic_remainder(n=128, samples=20, seed=0):
    def run():
        rng = np.random.default_rng(seed)
        grid = Grid(n)
        measured = {}
        worst = 0.0
        for label, model, steady in builtin_steady_states(n):
            spread = 0.0
            for _ in range(samples):
                xi = StateField(rng.uniform(-1, 1, (1, n)), rng.uniform(-1, 1, (1, n)))
                xi = xi.scaled(1.0 / xi.sup_norm())
                r3 = nonlinear_remainder(model, steady, xi.scaled(1e-3), grid).sup_norm() / 1e-6
                r4 = nonlinear_remainder(model, steady, xi.scaled(1e-4), grid).sup_norm() / 1e-8
                spread = max(spread, abs(r3 - r4) / max(r3, r4))
            measured[label] = spread
            worst = max(worst, spread)
        return worst < 0.05, {"max_relative_variation": worst, "per_state": measured}, \
            {"max_relative_variation": 0.05}, f"worst variation {worst:.2e}"
    return _timed(7, "quadratic decay of the Taylor remainder", None, run)


def criterion_picard(n=128, seed=0):
    def run():
        model, grid, steady = hysteresis_pattern(n)
        op = hysteresis_analysis(n)[0]
        xi0 = perturb("uniform_random", grid, 1, 1, 1e-2, seed=seed)
        final, gaps = picard_mild(op, model, steady, xi0, 0.1, n_time=32, n_iter=8)
        ref = simulate(model, steady, xi0, 0.1, 1e-4).final
        dist = (final - ref).sup_norm()
        # geometric decrease: each gap below half the previous, until rounding level
        active = [g for g in gaps if g > 1e-13]
        geometric = all(b <= 0.5 * a for a, b in zip(active, active[1:])) and len(active) >= 2
        return (dist <= 1e-4 and geometric, {"sup_distance": dist, "gaps": gaps},
                {"sup_distance": 1e-4, "gap_ratio": 0.5}, f"distance {dist:.2e}")
    return _timed(8, "Picard iteration agrees with time stepping", None, run)


def criterion_heat_exactness(n=64):
    def run():
        grid = Grid(n)
        mode = cosine_modes(grid)[:, 3]
        out = heat_propagate(grid, 1.0, mode, 0.1)
        exact = np.exp(laplacian_eigenvalues(grid, 1.0)[3] * 0.1) * mode
        err = float(np.max(np.abs(out - exact)))
        rand = np.random.default_rng(0).uniform(-1, 1, n)
        drift = abs(float(np.mean(heat_propagate(grid, 1.0, rand, 0.1)) - np.mean(rand)))
        return (err <= 1e-12 and drift <= 1e-12, {"pointwise_error": err, "mean_drift": drift},
                {"pointwise_error": 1e-12, "mean_drift": 1e-12}, f"err {err:.1e}")
    return _timed(9, "heat propagator exactness", None, run)


def criterion_grid_convergence(base_n=128):
    coarse = base_n // 2
    if coarse < MIN_CONVERGENCE_N:
        return CriterionResult(10, "eigenvalue grid convergence", False, {},
                               {"richardson_ratio": [3.5, 4.5]}, 0.0, None, True,
                               f"skipped: grids from {coarse} are below the minimum {MIN_CONVERGENCE_N}")

    def run():
        sizes = (coarse, 2 * coarse, 4 * coarse)
        leads = []
        for size in sizes:
            report = hysteresis_analysis(size)[2]
            leads.append(report.leading_discrete().real)
        ratio = (leads[0] - leads[1]) / (leads[1] - leads[2])
        return (3.5 <= ratio <= 4.5, {"grids": list(sizes), "leading": leads, "richardson_ratio": ratio},
                {"richardson_ratio": [3.5, 4.5]}, f"ratio {ratio:.3f}")
    return _timed(10, "eigenvalue grid convergence", None, run)


CRITERIA = {
    1: criterion_mode_decoupling,
    2: criterion_linear_growth,
    3: criterion_nonlinear_stability,
    4: criterion_bistable_instability,
    5: criterion_ddi,
    6: criterion_stability_assumption,
    7: criterion_quadratic_remainder,
    8: criterion_picard,
    9: criterion_heat_exactness,
    10: criterion_grid_convergence,
}


@dataclass
class BatteryReport:
    results: list = field(default_factory=list)
    runtime: float = 0.0

    @property
    def passed(self):
        return all(r.passed or r.skipped for r in self.results)

    @property
    def failed(self):
        return [r for r in self.results if not (r.passed or r.skipped)]

    def to_dict(self):
        return {"passed": self.passed, "runtime": self.runtime,
                "failed": [r.number for r in self.failed],
                "criteria": [r.to_dict() for r in self.results]}


def run_battery(grid_n=None, seed=0, only=None, echo=None):
    """Run every criterion.

    ``grid_n`` replaces the base grid of the criteria stated at n = 128; the
    fixed-size oracles (heat propagator, random Jacobians) keep their own grids.
    """
    base = 128 if grid_n is None else int(grid_n)
    calls = {
        1: lambda: criterion_mode_decoupling(base),
        2: lambda: criterion_linear_growth(base, seed),
        3: lambda: criterion_nonlinear_stability(base, seed),
        4: lambda: criterion_bistable_instability(base),
        5: lambda: criterion_ddi(base),
        6: lambda: criterion_stability_assumption(64, seed=seed),
        7: lambda: criterion_quadratic_remainder(base, seed=seed),
        8: lambda: criterion_picard(base, seed),
        9: lambda: criterion_heat_exactness(64),
        10: lambda: criterion_grid_convergence(base),
    }
    report = BatteryReport()
    start = time.perf_counter()
    for number in sorted(calls):
        if only and number not in only:
            continue
        try:
            result = calls[number]()
        except Exception as exc:  # a crashing criterion is a failed criterion
            result = CriterionResult(number, CRITERIA[number].__name__.removeprefix("criterion_"),
                                     False, {"error": type(exc).__name__}, {}, 0.0, None, False,
                                     f"{type(exc).__name__}: {exc}")
        report.results.append(result)
        if echo:
            echo(result.line())
    report.runtime = time.perf_counter() - start
    return report
