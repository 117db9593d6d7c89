"""Cell-centred grid on (0, 1), Neumann Laplacian and exact heat propagation.

Nodes sit at cell centres ``(i + 1/2) h``.  With mirrored ghost cells the
discrete Neumann Laplacian is diagonalised exactly by sampled cosines
``cos(j pi x_i)``, which is the DCT-II basis, so heat flow can be advanced
exactly in time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import fft

from .errors import DimensionMismatch, NegativeTime


@dataclass(frozen=True)
class Grid:
    n: int
    h: float = field(init=False)
    nodes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"grid needs a positive number of cells, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "h", 1.0 / self.n)
        nodes = (np.arange(self.n) + 0.5) / self.n
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    def faces(self):
        return np.arange(self.n + 1) / self.n


@dataclass
class StateField:
    """Nodal values of the ODE components ``u`` (m x n) and diffusing ``v`` (k x n)."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.u = np.atleast_2d(np.asarray(self.u, dtype=float))
        self.v = np.atleast_2d(np.asarray(self.v, dtype=float))
        if self.u.shape[1] != self.v.shape[1]:
            raise DimensionMismatch(
                f"u has {self.u.shape[1]} nodes but v has {self.v.shape[1]}")

    @property
    def m(self):
        return self.u.shape[0]

    @property
    def k(self):
        return self.v.shape[0]

    @property
    def n(self):
        return self.u.shape[1]

    def as_vector(self):
        """Component-major flattening: all u nodes, then all v nodes."""
        return np.concatenate([self.u.ravel(), self.v.ravel()])

    @classmethod
    def from_vector(cls, vec, m, k):
        vec = np.asarray(vec, dtype=float)
        if vec.size % (m + k):
            raise DimensionMismatch(f"vector of size {vec.size} does not split into {m}+{k} components")
        n = vec.size // (m + k)
        return cls(vec[: m * n].reshape(m, n), vec[m * n:].reshape(k, n))

    @classmethod
    def constant(cls, values, m, n):
        """Spatially constant field from ``values = (u_1..u_m, v_1..v_k)``."""
        values = np.asarray(values, dtype=float).ravel()
        if values.size <= m:
            raise DimensionMismatch("constant values must include at least one v component")
        return cls(np.repeat(values[:m, None], n, axis=1), np.repeat(values[m:, None], n, axis=1))

    @classmethod
    def zeros(cls, m, k, n):
        return cls(np.zeros((m, n)), np.zeros((k, n)))

    def copy(self):
        return StateField(self.u.copy(), self.v.copy())

    def __add__(self, other):
        return StateField(self.u + other.u, self.v + other.v)

    def __sub__(self, other):
        return StateField(self.u - other.u, self.v - other.v)

    def scaled(self, s):
        return StateField(s * self.u, s * self.v)

    def sup_norm(self):
        return float(max(np.max(np.abs(self.u), initial=0.0), np.max(np.abs(self.v), initial=0.0)))

    def l2_norm(self):
        # discrete L2 on (0, 1), every component counted
        return float(np.sqrt((np.sum(self.u ** 2) + np.sum(self.v ** 2)) / self.n))

    def check_shape(self, m, k, n):
        if self.u.shape != (m, n) or self.v.shape != (k, n):
            raise DimensionMismatch(
                f"expected u{(m, n)}, v{(k, n)}; got u{self.u.shape}, v{self.v.shape}")

    def reflected(self):
        """The field under x -> 1 - x."""
        return StateField(self.u[:, ::-1].copy(), self.v[:, ::-1].copy())


def laplacian_matrix(grid, d=1.0):
    """Dense Neumann Laplacian ``d * Delta_h`` on the cell-centred grid."""
    n = grid.n
    if n < 2:
        raise ValueError("laplacian needs at least two cells")
    c = d / grid.h ** 2
    mat = np.zeros((n, n))
    idx = np.arange(n - 1)
    mat[idx, idx + 1] = c
    mat[idx + 1, idx] = c
    mat[np.arange(n), np.arange(n)] = -2.0 * c
    mat[0, 0] = mat[-1, -1] = -c
    return mat


def laplacian_eigenvalues(grid, d=1.0):
    """mu_j = -(2 d / h^2) (1 - cos(j pi h)), j = 0..n-1."""
    j = np.arange(grid.n)
    return -(4.0 * d / grid.h ** 2) * np.sin(0.5 * j * np.pi * grid.h) ** 2


def apply_laplacian(grid, field, d=1.0):
    """Matrix-free ``d * Delta_h`` applied along the last axis."""
    field = np.asarray(field, dtype=float)
    padded = np.concatenate([field[..., :1], field, field[..., -1:]], axis=-1)
    return d * (padded[..., 2:] - 2.0 * field + padded[..., :-2]) / grid.h ** 2


def cosine_modes(grid):
    """Orthonormal matrix whose column j is ``cos(j pi x)`` sampled on the nodes."""
    j = np.arange(grid.n)
    basis = np.cos(np.pi * np.outer(grid.nodes, j))
    basis[:, 0] *= np.sqrt(1.0 / grid.n)
    basis[:, 1:] *= np.sqrt(2.0 / grid.n)
    return basis


def heat_propagate(grid, d, field, t):
    """Advance ``w_t = d Delta_h w`` exactly by time ``t``.

    Works on the last axis, so a stack of fields (e.g. k diffusing
    components sharing one coefficient) can be passed at once.
    """
    if t < 0:
        raise NegativeTime(f"cannot propagate backwards in time (t={t})")
    field = np.asarray(field, dtype=float)
    if t == 0:
        return field.copy()
    # orthonormal DCT-II coefficients are exactly the cosine-mode amplitudes
    coeffs = fft.dct(field, type=2, norm="ortho", axis=-1)
    coeffs *= np.exp(laplacian_eigenvalues(grid, d) * t)
    return fft.idct(coeffs, type=2, norm="ortho", axis=-1)
