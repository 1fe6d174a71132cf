"""Structured grids and collocation point sets for the three model problems."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import GridTooSmall, MeshTooCoarse, NonIntegralMesh


@dataclass(frozen=True)
class StructuredGrid:
    """A tensor-product lattice ``origin + index * spacing``.

    ``ghosts`` maps an out-of-range index on an axis to the in-range index it
    is identified with, e.g. ``{1: {-1: N - 1}}`` for the space axis of the
    Schrödinger lattice.  Periodic axes wrap every index modulo ``shape``.
    """

    shape: tuple
    spacing: tuple
    origin: tuple
    periodic: tuple
    axis_names: tuple = ()
    ghosts: dict = field(default_factory=dict)

    @property
    def ndim(self):
        return len(self.shape)

    @property
    def size(self):
        return int(np.prod(self.shape))

    def axis(self, k):
        return self.origin[k] + np.arange(self.shape[k]) * self.spacing[k]

    def mesh(self):
        """Coordinate arrays of shape ``self.shape`` (ij indexing)."""
        return np.meshgrid(*[self.axis(k) for k in range(self.ndim)], indexing="ij")

    def points(self):
        return np.stack([m.ravel() for m in self.mesh()], axis=1)

    def resolve(self, k, i):
        """Map a possibly out-of-range index on axis ``k`` to a stored index."""
        n = self.shape[k]
        if self.periodic[k]:
            return np.mod(i, n)
        ghost = self.ghosts.get(k, {})
        i = np.asarray(i)
        out = i.copy()
        for src, dst in ghost.items():
            out = np.where(i == src, dst, out)
        if np.any((out < 0) | (out >= n)):
            raise IndexError(f"index out of range on axis {k}")
        return out

    def flat_index(self, *idx):
        idx = [self.resolve(k, i) for k, i in enumerate(idx)]
        return np.ravel_multi_index(idx, self.shape)


@dataclass
class CollocationSet:
    """Interior, boundary and data points with per-point weights.

    ``nodes`` lists every grid point a stencil may touch; ``interior_index``
    and ``boundary_index`` locate the interior/boundary points among them.
    """

    interior: np.ndarray
    boundary: np.ndarray
    data_points: Optional[np.ndarray] = None
    data_targets: Optional[np.ndarray] = None
    weight_interior: Optional[np.ndarray] = None
    weight_boundary: Optional[np.ndarray] = None
    weight_data: Optional[np.ndarray] = None
    nodes: Optional[np.ndarray] = None
    interior_index: Optional[np.ndarray] = None
    boundary_index: Optional[np.ndarray] = None

    def __post_init__(self):
        d = self.interior.shape[1] if self.interior.size else self.boundary.shape[1]
        self.interior = np.asarray(self.interior, dtype=float).reshape(-1, d)
        self.boundary = np.asarray(self.boundary, dtype=float).reshape(-1, d)
        if self.data_points is None:
            self.data_points = np.zeros((0, d))
            self.data_targets = np.zeros((0, 1))
        if self.weight_interior is None:
            self.weight_interior = _default_weights(len(self.interior))
        if self.weight_boundary is None:
            self.weight_boundary = _default_weights(len(self.boundary))
        if self.weight_data is None:
            self.weight_data = _default_weights(len(self.data_points))

    @property
    def dim(self):
        return self.interior.shape[1]

    @property
    def n_interior(self):
        return len(self.interior)

    @property
    def n_boundary(self):
        return len(self.boundary)

    def all_points(self):
        return np.vstack([self.interior, self.boundary, self.data_points])

    def to_csv(self, path):
        names = ["x", "y", "t"][: self.dim] if self.dim <= 3 else [f"z{i}" for i in range(self.dim)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(names + ["class"])
            for label, pts in (("interior", self.interior), ("boundary", self.boundary), ("data", self.data_points)):
                for p in pts:
                    w.writerow([repr(float(v)) for v in p] + [label])


def _default_weights(n):
    return np.full(n, 1.0 / n) if n else np.zeros(0)


def build_slit_domain(h: float):
    """Square (-1, 1)^2 with the slit [0, 1) x {0} removed, meshed with spacing ``h``.

    Nodes are ordered with the x index major.  Slit nodes count as boundary.
    """
    n_float = 2.0 / h
    n = int(round(n_float))
    if n < 1 or abs(n_float - n) > 1e-9 * max(1.0, n_float):
        raise NonIntegralMesh(f"2/h = {n_float!r} is not an integer")
    if n % 2:
        raise NonIntegralMesh(f"2/h = {n} is odd, so y = 0 is not a grid line")
    grid = StructuredGrid((n + 1, n + 1), (h, h), (-1.0, -1.0), (False, False), ("x", "y"))
    I, J = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
    outer = (I == 0) | (I == n) | (J == 0) | (J == n)
    slit = (J == n // 2) & (I >= n // 2) & (I < n)
    bmask = (outer | slit).ravel()
    pts = grid.points()
    interior_index = np.flatnonzero(~bmask)
    boundary_index = np.flatnonzero(bmask)
    if interior_index.size == 0:
        raise MeshTooCoarse(f"h = {h} leaves no interior nodes")
    colloc = CollocationSet(
        interior=pts[interior_index],
        boundary=pts[boundary_index],
        nodes=pts,
        interior_index=interior_index,
        boundary_index=boundary_index,
    )
    return grid, colloc


def slit_node_counts(grid: StructuredGrid):
    """(slit, outer ring) node counts of a slit-domain grid."""
    n = grid.shape[0] - 1
    return n // 2, 4 * n


def build_periodic_grid(n, length=2 * np.pi, ndim=2):
    ns = (n,) * ndim if np.isscalar(n) else tuple(n)
    ls = (length,) * len(ns) if np.isscalar(length) else tuple(length)
    if min(ns) < 3:
        raise GridTooSmall(f"periodic grid needs n >= 3, got {ns}")
    return StructuredGrid(tuple(ns), tuple(l / k for l, k in zip(ls, ns)), (0.0,) * len(ns),
                          (True,) * len(ns), ("x", "y", "z")[: len(ns)])


def build_interval_grid(N: int, T: int):
    """Space-time lattice (t_k, x_j), k = 0..T, j = 0..N, on [0, 2pi] x [-5, 5].

    The ghost index -1 on the space axis is identified with N - 1.
    """
    if N < 1 or T < 1:
        raise GridTooSmall("N and T must be >= 1")
    return StructuredGrid((T + 1, N + 1), (2 * np.pi / T, 10.0 / N), (0.0, -5.0), (False, False),
                          ("t", "x"), ghosts={1: {-1: N - 1}})


def interval_residual_count(grid: StructuredGrid):
    T, N = grid.shape[0] - 1, grid.shape[1] - 1
    return T * N


def core_subgrids(grid: StructuredGrid, n_times: int):
    """Index sets for the one-cell and two-cell trimmed interiors and forward-difference times.

    Returns ``(omega1, omega2, t_core)`` where ``omega*`` are tuples of
    per-axis index arrays (use ``np.ix_``) and ``t_core`` is ``0..n_times-2``.
    """
    if min(grid.shape) < 5:
        raise GridTooSmall(f"need at least 5 nodes per axis, got {grid.shape}")
    omega1 = tuple(np.arange(1, n - 1) for n in grid.shape)
    omega2 = tuple(np.arange(2, n - 2) for n in grid.shape)
    return omega1, omega2, np.arange(max(n_times - 1, 0))
