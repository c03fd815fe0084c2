"""Discrete domains, quadrature and the Dirichlet Laplacian.

Two geometries are supported: a uniform interval (also used, tagged as a
whole-space surrogate, for the truncated line) and a radially symmetric ball
in dimension d >= 2. Both are described by a diagonal mass matrix W (the
quadrature weights) and a symmetric positive-definite stiffness matrix A
built from edge weights:

    <u, v>_h        = sum_j w_j u_j v_j
    |grad u|^2_h    = sum_k kappa_k (u_k - u_{k-1})^2     (u = 0 beyond the edges)
    Delta_h         = -W^{-1} A

so summation by parts and the identity |grad u|^2_h = -<u, Delta_h u>_h hold
exactly, and every functional computed from them shares one inner product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Tuple

import numpy as np
import numpy.typing as npt
from scipy.linalg import eigh_tridiagonal
from scipy.special import gamma

from .errors import FieldError, GridError

FloatArray = npt.NDArray[np.float64]


class DomainKind(str, Enum):
    INTERVAL = 'interval'
    BALL = 'ball'
    TRUNCATED_LINE = 'truncated_line'


def sphere_area(d: int) -> float:
    """Surface measure of the unit sphere in R^d, 2 pi^(d/2) / Gamma(d/2)."""
    return float(2.0 * math.pi ** (d / 2.0) / gamma(d / 2.0))


@dataclass(frozen=True)
class DomainSpec:
    kind: DomainKind
    size: float  # L for an interval, R for a ball, A for the truncated line (-A, A)
    dimension: int = 1
    whole_space: bool = False

    def __post_init__(self) -> None:
        kind = DomainKind(self.kind)
        object.__setattr__(self, 'kind', kind)
        if not (math.isfinite(self.size) and self.size > 0):
            raise GridError(f'{kind.value}: size must be positive and finite, got {self.size!r}')
        if kind is DomainKind.BALL:
            if self.dimension < 2:
                raise GridError('ball: dimension must be >= 2 (use an interval for d = 1)')
        elif self.dimension != 1:
            raise GridError(f'{kind.value}: dimension must be 1, got {self.dimension}')
        if kind is DomainKind.TRUNCATED_LINE:
            object.__setattr__(self, 'whole_space', True)
        elif kind is DomainKind.INTERVAL and self.whole_space:
            raise GridError('interval: use truncated_line for a whole-space surrogate')

    @classmethod
    def interval(cls, length: float) -> 'DomainSpec':
        return cls(DomainKind.INTERVAL, float(length))

    @classmethod
    def ball(cls, radius: float, dimension: int, whole_space: bool = False) -> 'DomainSpec':
        return cls(DomainKind.BALL, float(radius), int(dimension), whole_space)

    @classmethod
    def truncated_line(cls, halfwidth: float) -> 'DomainSpec':
        return cls(DomainKind.TRUNCATED_LINE, float(halfwidth))

    @property
    def radial(self) -> bool:
        return self.kind is DomainKind.BALL

    @property
    def bounds(self) -> Tuple[float, float]:
        if self.kind is DomainKind.TRUNCATED_LINE:
            return -self.size, self.size
        return 0.0, self.size

    def measure(self) -> float:
        if self.kind is DomainKind.BALL:
            return sphere_area(self.dimension) * self.size**self.dimension / self.dimension
        left, right = self.bounds
        return right - left


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform interior grid; boundary values are implicitly zero.

    ``edge_weights`` has n + 1 entries: entry k couples node k - 1 and node k,
    where node -1 and node n are the (zero) boundary values. On a ball entry 0
    is zero, which encodes the symmetry condition u'(0) = 0.
    """

    domain: DomainSpec
    n: int
    h: float
    nodes: FloatArray
    volume_weights: FloatArray
    edge_weights: FloatArray

    def check_nodal(self, nodal: npt.ArrayLike) -> FloatArray:
        arr = np.asarray(nodal, dtype=np.float64)
        if arr.shape != (self.n,):
            raise GridError(f'expected {self.n} nodal values, got shape {arr.shape}')
        return arr

    def differences(self, values: FloatArray) -> FloatArray:
        padded = np.concatenate(([0.0], values, [0.0]))
        return np.diff(padded)

    def stiffness_apply(self, values: FloatArray) -> FloatArray:
        flux = self.edge_weights * self.differences(values)
        return flux[:-1] - flux[1:]

    def dirichlet_form(self, values: FloatArray) -> float:
        d = self.differences(values)
        return float(np.dot(self.edge_weights, d * d))

    def implicit_banded(self, dt: float) -> FloatArray:
        """(W + dt A) in the (1, 1) banded layout of scipy.linalg.solve_banded."""
        k = self.edge_weights
        ab = np.zeros((3, self.n))
        ab[0, 1:] = -dt * k[1:-1]
        ab[1, :] = self.volume_weights + dt * (k[:-1] + k[1:])
        ab[2, :-1] = -dt * k[1:-1]
        return ab

    def edge_magnitude(self, values: FloatArray) -> float:
        """Largest |u| at the outermost nodes, the truncation monitor."""
        if self.domain.radial:
            return float(abs(values[-1]))
        return float(max(abs(values[0]), abs(values[-1])))


def build_grid(domain: DomainSpec, n: int) -> Grid:
    """Uniform grid with n interior nodes.

    Interval-like domains: x_j = left + j h, j = 1..n, h = |Omega| / (n + 1),
    unit quadrature weight h. Balls: r_j = j h, j = 0..n-1, h = R / n, so the
    centre is node 0 and r = R is the implicit zero node; each node owns the
    shell [r_j - h/2, r_j + h/2] (the ball of radius h/2 at the centre) and
    edges carry the face area omega_{d-1} r_{j+1/2}^{d-1} / h.

    The ball layout keeps the centre as an unknown, so it is not the
    interval layout r_j = j h, j = 1..n, h = R / (n + 1) carried over to r:
    that node set would drop r = 0 and impose no symmetry condition there.
    """
    if int(n) != n or n < 3:
        raise GridError(f'grid needs at least 3 interior nodes, got {n!r}')
    n = int(n)
    if domain.radial:
        d = domain.dimension
        omega = sphere_area(d)
        h = domain.size / n
        nodes = h * np.arange(n, dtype=np.float64)
        outer = np.minimum(nodes + 0.5 * h, domain.size)
        inner = np.maximum(nodes - 0.5 * h, 0.0)
        weights = omega * (outer**d - inner**d) / d
        faces = h * (np.arange(n + 1, dtype=np.float64) - 0.5)
        edges = omega * np.abs(faces) ** (d - 1) / h
        edges[0] = 0.0
    else:
        left, right = domain.bounds
        h = (right - left) / (n + 1)
        nodes = left + h * np.arange(1, n + 1, dtype=np.float64)
        weights = np.full(n, h)
        edges = np.full(n + 1, 1.0 / h)
    for arr in (nodes, weights, edges):
        arr.setflags(write=False)
    return Grid(domain, n, float(h), nodes, weights, edges)


@dataclass(frozen=True, eq=False)
class Field:
    grid: Grid
    values: FloatArray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64)
        if values.shape != (self.grid.n,):
            raise FieldError(f'field has shape {values.shape}, grid has {self.grid.n} nodes')
        if not np.all(np.isfinite(values)):
            raise FieldError('field values must be finite')
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable[[FloatArray], npt.ArrayLike]) -> 'Field':
        return cls(grid, np.asarray(fn(grid.nodes), dtype=np.float64))

    @classmethod
    def zeros(cls, grid: Grid) -> 'Field':
        return cls(grid, np.zeros(grid.n))

    def with_values(self, values: npt.ArrayLike) -> 'Field':
        return Field(self.grid, np.asarray(values, dtype=np.float64))

    def scaled(self, c: float) -> 'Field':
        return Field(self.grid, c * self.values)

    def resample(self, grid: Grid) -> 'Field':
        """Piecewise-linear transfer onto another grid; zero outside the domain."""
        src = self.grid
        if src.domain.radial != grid.domain.radial:
            raise GridError('cannot resample between radial and Cartesian grids')
        left, right = src.domain.bounds
        if src.domain.radial:
            xp = np.concatenate((src.nodes, [right]))
            fp = np.concatenate((self.values, [0.0]))
        else:
            xp = np.concatenate(([left], src.nodes, [right]))
            fp = np.concatenate(([0.0], self.values, [0.0]))
        return Field(grid, np.interp(grid.nodes, xp, fp, left=0.0, right=0.0))

    def __len__(self) -> int:
        return self.grid.n


def integrate(grid: Grid, nodal: npt.ArrayLike) -> float:
    return float(np.dot(grid.volume_weights, grid.check_nodal(nodal)))


def apply_laplacian(field: Field) -> Field:
    grid = field.grid
    return Field(grid, -grid.stiffness_apply(field.values) / grid.volume_weights)


def gradient_sq_norm(field: Field) -> float:
    return field.grid.dirichlet_form(field.values)


def eigenpair(grid: Grid, k: int = 1) -> Tuple[float, Field]:
    """k-th smallest eigenvalue of -Delta_h and its L2-normalized eigenvector.

    Solved in the symmetric form W^{-1/2} A W^{-1/2}; the first mode is
    returned positive.
    """
    if not 1 <= k <= grid.n:
        raise GridError(f'eigenmode index must be in 1..{grid.n}, got {k}')
    w = grid.volume_weights
    kap = grid.edge_weights
    diag = (kap[:-1] + kap[1:]) / w
    off = -kap[1:-1] / np.sqrt(w[:-1] * w[1:])
    lam, vec = eigh_tridiagonal(diag, off, select='i', select_range=(k - 1, k - 1))
    values = vec[:, 0] / np.sqrt(w)
    if values.sum() < 0:
        values = -values
    return float(lam[0]), Field(grid, values)


def first_eigenpair(grid: Grid) -> Tuple[float, Field]:
    return eigenpair(grid, 1)
