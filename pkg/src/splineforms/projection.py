"""Commuting projection onto discrete form spaces.

The projector factors as reconstruction o change-of-basis o reduction:
point samples / cell integrals are taken on the Greville grid of the
space, converted to basis coefficients by interpolation (nodal factors)
or histopolation (edge factors), one direction at a time.  Built this
way, projecting and then differentiating gives the same coefficients as
differentiating and then projecting.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ._quadrature import panel_rule, split_interval
from .errors import ConstructionError, IllPosedNodesError
from .spaces import DiscreteForm, DiscreteFormSpace
from .splines import Basis1D, EdgeBasis1D
from .topology import Cochain

__all__ = [
    "ReducedCochain",
    "ChangeOfBasis",
    "reduce_0form",
    "reduce_1form",
    "build_interpolation",
    "build_histopolation",
    "greville_edges",
    "project_form",
]

_COND_LIMIT = 1e12
_KINDS = ("node-values", "edge-integrals", "face-integrals", "volume-integrals")


@dataclass(frozen=True)
class ReducedCochain:
    """Cochain of measurements plus the kind of cell it was measured on."""

    cochain: Cochain
    kind: str

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConstructionError(f"kind must be one of {_KINDS}")


class ChangeOfBasis:
    """Invertible square map between measurement cochains and coefficients.

    Wraps the interpolation matrix N_ij = N_j(x_i) or histopolation matrix
    M_ij = integral of M_j over edge i, with a cached LU factorization.
    """

    def __init__(self, matrix: np.ndarray):
        matrix = np.ascontiguousarray(matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ConstructionError("change of basis must be square")
        cond = np.linalg.cond(matrix)
        if not np.isfinite(cond) or cond > _COND_LIMIT:
            raise IllPosedNodesError(
                f"change-of-basis matrix is ill conditioned (cond ~ {cond:.2e})"
            )
        self.matrix = matrix
        self.cond = float(cond)
        self._lu = scipy.linalg.lu_factor(matrix)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve A x = rhs (rhs may carry extra trailing dimensions)."""
        rhs = np.asarray(rhs, dtype=float)
        flat = rhs.reshape(rhs.shape[0], -1)
        out = scipy.linalg.lu_solve(self._lu, flat)
        return out.reshape(rhs.shape)

    def solve_along(self, tensor: np.ndarray, axis: int) -> np.ndarray:
        """Solve along one axis of a coefficient tensor."""
        moved = np.moveaxis(tensor, axis, 0)
        return np.moveaxis(self.solve(moved), 0, axis)


def reduce_0form(f, nodes) -> ReducedCochain:
    """Sample a scalar function at interpolation nodes (1D de Rham map)."""
    nodes = np.asarray(nodes, dtype=float)
    vals = np.asarray(f(nodes), dtype=float)
    if vals.shape != nodes.shape:
        vals = np.broadcast_to(vals, nodes.shape).copy()
    return ReducedCochain(Cochain(0, vals), "node-values")


def reduce_1form(f, edges, n_gauss: int = 5, breakpoints=None) -> ReducedCochain:
    """Integrate a 1-form component over parametric intervals.

    Parameters
    ----------
    f : callable
        Vectorized density; the cochain entries are integrals f dx.
    edges : array_like, shape (m, 2)
        Interval endpoints.
    n_gauss : int
        Gauss points per smooth piece.
    breakpoints : array_like, optional
        Knot breakpoints; edges are split there so piecewise-smooth
        integrands are integrated exactly per piece.
    """
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 2 or edges.shape[1] != 2:
        raise ConstructionError("edges must be an (m, 2) array of intervals")
    vals = np.empty(edges.shape[0])
    for i, (a, b) in enumerate(edges):
        panels = split_interval(a, b, breakpoints if breakpoints is not None else ())
        pts, wts = panel_rule(panels, n_gauss)
        fx = np.asarray(f(pts.ravel()), dtype=float)
        if not np.all(np.isfinite(fx)):
            raise FloatingPointError("non-finite 1-form values during reduction")
        vals[i] = np.dot(fx, wts.ravel())
    return ReducedCochain(Cochain(1, vals), "edge-integrals")


def greville_edges(basis: Basis1D) -> np.ndarray:
    """Histopolation intervals: consecutive Greville nodes, shape (n, 2)."""
    nodes = basis.greville_points()
    return np.column_stack((nodes[:-1], nodes[1:]))


def build_interpolation(basis: Basis1D, nodes=None) -> ChangeOfBasis:
    """Square interpolation matrix of a nodal basis at given nodes (default Greville)."""
    if nodes is None:
        nodes = basis.greville_points()
    nodes = np.asarray(nodes, dtype=float)
    if nodes.shape != (basis.num_basis,):
        raise ConstructionError("need exactly one node per basis function")
    return ChangeOfBasis(basis.eval_nodal_many(nodes))


def build_histopolation(edge_basis: EdgeBasis1D, edges=None, n_gauss=None) -> ChangeOfBasis:
    """Square matrix of edge-function integrals over histopolation intervals."""
    if edges is None:
        edges = greville_edges(edge_basis.parent)
    edges = np.asarray(edges, dtype=float)
    if edges.shape != (edge_basis.num_basis, 2):
        raise ConstructionError("need exactly one interval per edge function")
    n = n_gauss or max(edge_basis.parent.degree + 1, 5)
    breaks = edge_basis.breakpoints
    mat = np.empty((edge_basis.num_basis, edge_basis.num_basis))
    for i, (a, b) in enumerate(edges):
        panels = split_interval(a, b, breaks)
        pts, wts = panel_rule(panels, n)
        table = edge_basis.eval_edge_many(pts.ravel())
        mat[i] = table.T @ wts.ravel()
    return ChangeOfBasis(mat)


class _Projector:
    """Cached per-direction reduction grids and change-of-basis solves."""

    def __init__(self, space: DiscreteFormSpace, n_gauss=None):
        self.space = space
        self.n_gauss = n_gauss
        self._interp = {}
        self._histo = {}

    def _interpolation(self, j: int) -> ChangeOfBasis:
        if j not in self._interp:
            self._interp[j] = build_interpolation(self.space.nodal_bases[j])
        return self._interp[j]

    def _histopolation(self, j: int) -> ChangeOfBasis:
        if j not in self._histo:
            edge = EdgeBasis1D(self.space.nodal_bases[j])
            n = self.n_gauss or max(edge.parent.degree + 1, 5)
            self._histo[j] = build_histopolation(edge, n_gauss=n)
        return self._histo[j]

    def _direction_rule(self, j: int, is_edge: bool):
        """(points, weight matrix) for one direction of the reduction grid.

        For a nodal direction the points are the Greville nodes and the
        weight matrix is the identity; for an edge direction the columns
        of the weight matrix accumulate Gauss weights per interval.
        """
        basis = self.space.nodal_bases[j]
        if not is_edge:
            pts = basis.greville_points()
            return pts, np.eye(pts.size)
        edges = greville_edges(basis)
        n = self.n_gauss or max(basis.degree + 1, 5)
        pts_list, cols = [], []
        for i, (a, b) in enumerate(edges):
            panels = split_interval(a, b, basis.breakpoints)
            pts, wts = panel_rule(panels, n)
            pts_list.append(pts.ravel())
            cols.append((i, wts.ravel()))
        points = np.concatenate(pts_list)
        quad = np.zeros((points.size, edges.shape[0]))
        pos = 0
        for i, w in cols:
            quad[pos : pos + w.size, i] = w
            pos += w.size
        return points, quad

    def reduce_block(self, block, component) -> np.ndarray:
        """Reduction tensor of one component over the block's cells."""
        pts, quads = [], []
        for j in range(self.space.d):
            p, q = self._direction_rule(j, j in block.dirs)
            pts.append(p)
            quads.append(q)
        if isinstance(component, DiscreteForm):
            comp_index = component.space.blocks.index(
                next(b for b in component.space.blocks if b.dirs == block.dirs)
            )
            vals = component.eval_grid(pts, comp=comp_index)[0]
        else:
            grids = np.meshgrid(*pts, indexing="ij")
            vals = np.asarray(component(*grids), dtype=float)
            vals = np.broadcast_to(vals, tuple(p.size for p in pts))
        out = vals
        for q in quads:
            out = np.moveaxis(np.tensordot(q.T, out, axes=([1], [0])), 0, -1)
        return out

    def solve_block(self, block, reduction: np.ndarray) -> np.ndarray:
        coeffs = reduction
        for j in range(self.space.d):
            cob = self._histopolation(j) if j in block.dirs else self._interpolation(j)
            coeffs = cob.solve_along(coeffs, j)
        return coeffs

    def project(self, components) -> DiscreteForm:
        blocks = self.space.blocks
        if isinstance(components, DiscreteForm):
            source = [components] * len(blocks)
        elif callable(components):
            source = [components]
        else:
            source = list(components)
        if len(source) != len(blocks):
            raise ConstructionError(
                f"expected {len(blocks)} component callables, got {len(source)}"
            )
        flat = np.empty(self.space.dim)
        for block, comp in zip(blocks, source):
            red = self.reduce_block(block, comp)
            coeffs = self.solve_block(block, red)
            flat[block.offset : block.offset + block.size] = coeffs.ravel(order="F")
        return DiscreteForm(self.space, flat)


def project_form(space: DiscreteFormSpace, components, n_gauss=None) -> DiscreteForm:
    """Commuting projection of a k-form onto a discrete space.

    Parameters
    ----------
    space : DiscreteFormSpace
    components : callable, sequence of callables, or DiscreteForm
        One vectorized component function per block, ordered like
        ``space.blocks`` (a single callable is allowed for one-block
        spaces).  A DiscreteForm re-projects its own reconstruction.
    n_gauss : int, optional
        Gauss points per smooth piece in the reductions
        (default max(degree + 1, 5)).
    """
    return _Projector(space, n_gauss=n_gauss).project(components)
