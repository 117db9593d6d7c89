"""Reaction-diffusion-ODE systems and the two built-in example models.

A system couples ``m`` non-diffusing components ``u`` with ``k`` diffusing
components ``v`` on (0, 1) with zero-flux boundary conditions::

    u_t = f(u, v, x)
    v_t = D^v v_xx + g(u, v, x)

Reaction evaluators are vectorised over nodes: they receive ``u`` of shape
``(m, N)``, ``v`` of shape ``(k, N)`` and ``x`` of shape ``(N,)`` and return
``(f, g)`` with matching shapes.  Jacobian evaluators return an array of
shape ``(N, m+k, m+k)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import DimensionMismatch, InvalidParams
from .grid import StateField


@dataclass(frozen=True)
class ModelSpec:
    m: int
    k: int
    diffusion: tuple
    reaction: Callable
    reaction_jacobian: Callable
    name: str = "custom"
    params: object = field(default=None, compare=False)

    def __post_init__(self):
        if self.m < 1 or self.k < 1:
            raise InvalidParams("need at least one ODE and one diffusing component")
        diffusion = tuple(float(d) for d in np.atleast_1d(self.diffusion))
        if len(diffusion) != self.k:
            raise InvalidParams(f"{self.k} diffusing components but {len(diffusion)} diffusion entries")
        if any(not d > 0 for d in diffusion):
            raise InvalidParams(f"diffusion entries must be strictly positive, got {diffusion}")
        object.__setattr__(self, "diffusion", diffusion)

    def with_diffusion(self, diffusion):
        """Same reaction terms with a different diffusion vector."""
        params = self.params
        if params is not None and hasattr(params, "diffusion") and self.k == 1:
            params = replace(params, diffusion=float(np.atleast_1d(diffusion)[0]))
        return ModelSpec(self.m, self.k, tuple(np.atleast_1d(diffusion)), self.reaction,
                         self.reaction_jacobian, self.name, params)

    def evaluate(self, u, v, x):
        """Reaction terms at arbitrary points, shapes as in the module docstring."""
        u = np.atleast_2d(np.asarray(u, dtype=float))
        v = np.atleast_2d(np.asarray(v, dtype=float))
        x = np.atleast_1d(np.asarray(x, dtype=float))
        f, g = self.reaction(u, v, x)
        return np.broadcast_to(f, u.shape).astype(float), np.broadcast_to(g, v.shape).astype(float)

    def jacobian(self, u, v, x):
        u = np.atleast_2d(np.asarray(u, dtype=float))
        v = np.atleast_2d(np.asarray(v, dtype=float))
        x = np.atleast_1d(np.asarray(x, dtype=float))
        jac = np.asarray(self.reaction_jacobian(u, v, x), dtype=float)
        return np.broadcast_to(jac, (u.shape[1], self.m + self.k, self.m + self.k))


def evaluate_reaction(model, state, grid):
    """Nodewise reaction terms ``(f, g)`` of ``state`` as a new StateField."""
    state.check_shape(model.m, model.k, grid.n)
    f, g = model.evaluate(state.u, state.v, grid.nodes)
    return StateField(np.array(f), np.array(g))


# -- hysteresis model --------------------------------------------------------

@dataclass(frozen=True)
class HysteresisParams:
    """``f = v - p(u)``, ``g = alpha u - beta v`` with ``p(u) = c1 u + c2 u^2 + c3 u^3``."""

    alpha: float
    beta: float
    p_coeffs: tuple
    diffusion: float

    @property
    def ratio(self):
        return self.alpha / self.beta

    def p(self, u):
        c1, c2, c3 = self.p_coeffs
        return u * (c1 + u * (c2 + u * c3))

    def dp(self, u):
        c1, c2, c3 = self.p_coeffs
        return c1 + u * (2.0 * c2 + 3.0 * c3 * u)

    def d2p(self, u):
        _, c2, c3 = self.p_coeffs
        return 2.0 * c2 + 6.0 * c3 * u

    def intersections(self):
        """Sorted ``u`` coordinates of the constant steady states S0, S1, S2."""
        c1, c2, c3 = self.p_coeffs
        # p(u) = r u  <=>  u (c3 u^2 + c2 u + c1 - r) = 0
        roots = np.roots([c3, c2, c1 - self.ratio])
        real = roots[np.abs(roots.imag) < 1e-12].real
        return np.sort(np.concatenate([[0.0], real]))

    def turning_points(self):
        """``(u_H, u_T)``: local maximum and minimum of p, or None if p is monotone."""
        c1, c2, c3 = self.p_coeffs
        disc = 4.0 * c2 ** 2 - 12.0 * c3 * c1
        if disc <= 0:
            return None
        r = np.sort(np.roots([3.0 * c3, 2.0 * c2, c1]).real)
        if c3 > 0:
            return float(r[0]), float(r[1])
        return float(r[1]), float(r[0])

    def is_monotone(self):
        return self.turning_points() is None

    def validate(self):
        problems = []
        c1, c2, c3 = self.p_coeffs
        if not self.alpha > 0:
            problems.append(f"alpha must be positive (got {self.alpha})")
        if not self.beta > 0:
            problems.append(f"beta must be positive (got {self.beta})")
        if not self.diffusion > 0:
            problems.append(f"diffusion must be positive (got {self.diffusion})")
        if c3 == 0:
            problems.append("p must have degree three (c3 = 0)")
        if problems:
            raise InvalidParams("; ".join(problems))
        if c2 ** 2 - 4.0 * c1 * c3 >= 0:
            problems.append("p must have a single real root at u = 0 "
                            f"(discriminant of c1 + c2 u + c3 u^2 is {c2 ** 2 - 4 * c1 * c3:g} >= 0)")
        if not c1 > self.ratio:
            problems.append(f"p'(0) = {c1:g} must exceed alpha/beta = {self.ratio:g}")
        roots = self.intersections()
        if len(roots) != 3 or np.any(roots < -1e-14) or np.min(np.diff(roots)) < 1e-12:
            problems.append("p(u) = (alpha/beta) u must have exactly three distinct "
                            f"non-negative roots (found {np.round(roots, 12).tolist()})")
        if problems:
            raise InvalidParams("; ".join(problems))


def build_hysteresis_model(params):
    params.validate()
    alpha, beta = params.alpha, params.beta

    def reaction(u, v, x):
        return v - params.p(u), alpha * u - beta * v

    def jacobian(u, v, x):
        n = u.shape[1]
        jac = np.empty((n, 2, 2))
        jac[:, 0, 0] = -params.dp(u[0])
        jac[:, 0, 1] = 1.0
        jac[:, 1, 0] = alpha
        jac[:, 1, 1] = -beta
        return jac

    name = "bistable" if params.is_monotone() else "hysteresis"
    return ModelSpec(1, 1, (params.diffusion,), reaction, jacobian, name, params)


# -- DDI-hysteresis model ------------------------------------------------------

@dataclass(frozen=True)
class DdiParams:
    """``f = -u - uv + m1 u^2/(1 + kappa u^2)``, ``g = -mu v - uv + m2 u^2/(1 + kappa u^2)``."""

    kappa: float
    mu: float
    m1: float
    m2: float
    diffusion: float

    @property
    def v_r(self):
        return self.m1 / (2.0 * np.sqrt(self.kappa)) - 1.0

    def validate(self):
        problems = [f"{name} must be positive (got {val})"
                    for name, val in [("kappa", self.kappa), ("mu", self.mu), ("m1", self.m1),
                                      ("m2", self.m2), ("diffusion", self.diffusion)]
                    if not val > 0]
        if problems:
            raise InvalidParams("; ".join(problems))
        if not self.m1 > 2.0 * np.sqrt(self.kappa):
            raise InvalidParams(f"m1 = {self.m1:g} must exceed 2 sqrt(kappa) = {2 * np.sqrt(self.kappa):g}")


def build_ddi_model(params):
    params.validate()
    kappa, mu, m1, m2 = params.kappa, params.mu, params.m1, params.m2

    def reaction(u, v, x):
        hill = u ** 2 / (1.0 + kappa * u ** 2)
        return -u - u * v + m1 * hill, -mu * v - u * v + m2 * hill

    def jacobian(u, v, x):
        u, v = u[0], v[0]
        dhill = 2.0 * u / (1.0 + kappa * u ** 2) ** 2
        jac = np.empty((u.size, 2, 2))
        jac[:, 0, 0] = -(1.0 + v) + m1 * dhill
        jac[:, 0, 1] = -u
        jac[:, 1, 0] = -v + m2 * dhill
        jac[:, 1, 1] = -(mu + u)
        return jac

    return ModelSpec(1, 1, (params.diffusion,), reaction, jacobian, "ddi", params)


# -- presets -----------------------------------------------------------------

DEFAULT_HYSTERESIS = HysteresisParams(alpha=0.5, beta=1.0, p_coeffs=(2.5, -3.0, 1.0), diffusion=0.05)
DEFAULT_BISTABLE = HysteresisParams(alpha=1.0, beta=1.0, p_coeffs=(1.5, -1.5, 1.0), diffusion=0.02)
DEFAULT_DDI = DdiParams(kappa=1.0, mu=1.0, m1=3.0, m2=4.0, diffusion=0.5)

PRESETS = {
    "hysteresis": DEFAULT_HYSTERESIS,
    "bistable": DEFAULT_BISTABLE,
    "ddi": DEFAULT_DDI,
}


def build_model(params):
    if isinstance(params, HysteresisParams):
        return build_hysteresis_model(params)
    if isinstance(params, DdiParams):
        return build_ddi_model(params)
    raise InvalidParams(f"unknown parameter type {type(params).__name__}")


def builtin_model(name, diffusion=None):
    """Model by preset name (``hysteresis``, ``bistable`` or ``ddi``)."""
    try:
        params = PRESETS[name]
    except KeyError:
        raise InvalidParams(f"unknown model {name!r}; choose from {sorted(PRESETS)}") from None
    if diffusion is not None:
        params = replace(params, diffusion=float(diffusion))
    model = build_model(params)
    return ModelSpec(model.m, model.k, model.diffusion, model.reaction,
                     model.reaction_jacobian, name, params)


def affine_model(matrix, diffusion, offset=None, name="affine"):
    """``(f, g) = M (u, v) + b``; handy for checks where the Taylor remainder vanishes."""
    matrix = np.asarray(matrix, dtype=float)
    diffusion = np.atleast_1d(diffusion).astype(float)
    k = diffusion.size
    m = matrix.shape[0] - k
    if matrix.shape != (m + k, m + k) or m < 1:
        raise DimensionMismatch(f"matrix of shape {matrix.shape} incompatible with k={k}")
    offset = np.zeros(m + k) if offset is None else np.asarray(offset, dtype=float)

    def reaction(u, v, x):
        out = matrix @ np.vstack([u, v]) + offset[:, None]
        return out[:m], out[m:]

    def jacobian(u, v, x):
        return np.broadcast_to(matrix, (u.shape[1], m + k, m + k)).copy()

    return ModelSpec(m, k, tuple(diffusion), reaction, jacobian, name)


def check_jacobian(model, u, v, x, step=1e-5):
    """Max relative error between the analytic Jacobian and central differences.

    ``u``, ``v`` are single points (length m and k); ``x`` is a scalar.
    """
    u = np.asarray(u, dtype=float).reshape(model.m, 1)
    v = np.asarray(v, dtype=float).reshape(model.k, 1)
    x = np.atleast_1d(float(x))
    z = np.vstack([u, v])[:, 0]
    size = model.m + model.k
    fd = np.empty((size, size))
    for j in range(size):
        dz = np.zeros(size)
        dz[j] = step
        zp, zm = z + dz, z - dz
        fp = np.concatenate(model.evaluate(zp[:model.m, None], zp[model.m:, None], x))[:, 0]
        fm = np.concatenate(model.evaluate(zm[:model.m, None], zm[model.m:, None], x))[:, 0]
        fd[:, j] = (fp - fm) / (2.0 * step)
    exact = model.jacobian(u, v, x)[0]
    scale = max(1.0, float(np.max(np.abs(exact))))
    return float(np.max(np.abs(fd - exact)) / scale)
