"""Linearisation about a steady state.

The linearised operator acts on perturbations ``xi = (xi_u, xi_v)`` as::

    (L xi)_u = A*(x) xi_u + B*(x) xi_v
    (L xi)_v = C*(x) xi_u + D*(x) xi_v + D^v Delta xi_v

with the four blocks of the reaction Jacobian evaluated along the steady
state.  Only the v rows carry the Laplacian.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, OperatorTooLarge
from .grid import StateField, laplacian_matrix

MAX_OPERATOR_SIZE = 4096


@dataclass(frozen=True)
class JacobianField:
    """Per-node Jacobian blocks; arrays have the node index first."""

    A: np.ndarray   # (n, m, m)
    B: np.ndarray   # (n, m, k)
    C: np.ndarray   # (n, k, m)
    D: np.ndarray   # (n, k, k)

    def __post_init__(self):
        n, m, _ = self.A.shape
        k = self.D.shape[1]
        shapes = {"B": (self.B.shape, (n, m, k)), "C": (self.C.shape, (n, k, m)),
                  "D": (self.D.shape, (n, k, k))}
        for name, (got, want) in shapes.items():
            if got != want:
                raise DimensionMismatch(f"block {name} has shape {got}, expected {want}")
        for name in "ABCD":
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"block {name} has non-finite entries")

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.A.shape[1]

    @property
    def k(self):
        return self.D.shape[1]

    @classmethod
    def from_full(cls, jac, m):
        """Split an ``(n, m+k, m+k)`` stack of Jacobians into blocks."""
        jac = np.asarray(jac, dtype=float)
        return cls(jac[:, :m, :m].copy(), jac[:, :m, m:].copy(),
                   jac[:, m:, :m].copy(), jac[:, m:, m:].copy())

    @classmethod
    def constant(cls, jac, m, n):
        return cls.from_full(np.broadcast_to(np.asarray(jac, dtype=float), (n,) + np.shape(jac)), m)

    def full(self):
        top = np.concatenate([self.A, self.B], axis=2)
        bottom = np.concatenate([self.C, self.D], axis=2)
        return np.concatenate([top, bottom], axis=1)


@dataclass(frozen=True)
class DiscreteOperator:
    matrix: np.ndarray
    grid: object
    diffusion: tuple
    m: int
    k: int

    @property
    def size(self):
        return self.matrix.shape[0]

    def apply(self, xi):
        return StateField.from_vector(self.matrix @ xi.as_vector(), self.m, self.k)


def jacobian_field(model, steady, grid):
    """Reaction Jacobian blocks along ``steady`` (a SteadyState or StateField)."""
    state = getattr(steady, "field", steady)
    state.check_shape(model.m, model.k, grid.n)
    jac = model.jacobian(state.u, state.v, grid.nodes)
    return JacobianField.from_full(jac, model.m)


def assemble_operator(jac, grid, diffusion):
    """Dense ``[[A*, B*], [C*, D* + D^v Delta_h]]`` in component-major ordering."""
    n, m, k = jac.n, jac.m, jac.k
    diffusion = tuple(float(d) for d in np.atleast_1d(diffusion))
    if n != grid.n:
        raise DimensionMismatch(f"Jacobian field has {n} nodes, grid has {grid.n}")
    if len(diffusion) != k:
        raise DimensionMismatch(f"{k} diffusing components but {len(diffusion)} diffusion entries")
    size = (m + k) * n
    if size > MAX_OPERATOR_SIZE:
        raise OperatorTooLarge(f"dense operator of size {size} exceeds {MAX_OPERATOR_SIZE}")
    full = jac.full()
    mat = np.zeros((size, size))
    diag = np.arange(n)
    for a in range(m + k):
        for b in range(m + k):
            mat[a * n + diag, b * n + diag] = full[:, a, b]
    lap = laplacian_matrix(grid, 1.0) if n >= 2 else np.zeros((n, n))
    for c, d in enumerate(diffusion):
        sl = slice((m + c) * n, (m + c + 1) * n)
        mat[sl, sl] += d * lap
    return DiscreteOperator(mat, grid, diffusion, m, k)


def linearize(model, steady, grid):
    return assemble_operator(jacobian_field(model, steady, grid), grid, model.diffusion)


def _reaction_vector(model, state, grid):
    f, g = model.evaluate(state.u, state.v, grid.nodes)
    return np.concatenate([f, g], axis=0)


def nonlinear_remainder(model, steady, xi, grid):
    """Taylor remainder ``F(w + xi) - F(w) - J(w) xi`` of the reaction, nodewise."""
    base = getattr(steady, "field", steady)
    base.check_shape(model.m, model.k, grid.n)
    xi.check_shape(model.m, model.k, grid.n)
    jac = model.jacobian(base.u, base.v, grid.nodes)
    z = np.concatenate([xi.u, xi.v], axis=0)
    lin = np.einsum("nij,jn->in", jac, z)
    rem = _reaction_vector(model, base + xi, grid) - _reaction_vector(model, base, grid) - lin
    return StateField(rem[:model.m], rem[model.m:])


def remainder_constant(model, steady, grid, xis, scales=(1e-2, 1e-3, 1e-4)):
    """Empirical sup of ``|N(s xi)|_inf / |s xi|_inf^2`` over sample directions and scales."""
    worst = 0.0
    for xi in xis:
        norm = xi.sup_norm()
        for s in scales:
            rem = nonlinear_remainder(model, steady, xi.scaled(s), grid).sup_norm()
            worst = max(worst, rem / (s * norm) ** 2)
    return worst
