"""Tensor-product cell complexes, chains/cochains and incidence matrices.

All connectivity is purely combinatorial: a complex knows only its
per-direction cell counts.  Boundary and coboundary act through sparse
integer incidence matrices, so identities like "boundary of boundary is
empty" hold in exact arithmetic.

Numbering convention: cells are ordered lexicographically with the first
direction fastest.  One-cells are grouped by the axis they run along
(axis 1 first), two-cells in 3D by their normal axis.  All cells are
oriented along increasing coordinates; faces and volumes follow the
right-handed orientation of the axes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConstructionError

__all__ = [
    "CellComplex",
    "Chain",
    "Cochain",
    "IncidenceMatrix",
    "build_incidence",
    "boundary",
    "coboundary",
    "duality_pairing",
]


def direction_subsets(d: int, k: int):
    """Canonical ordering of the k-element direction subsets in d dimensions."""
    if k == 0:
        return [()]
    if d == 1:
        return [(0,)]
    if d == 2:
        return {1: [(0,), (1,)], 2: [(0, 1)]}[k]
    # 3D: 2-cells ordered by normal axis 1, 2, 3
    return {1: [(0,), (1,), (2,)], 2: [(1, 2), (0, 2), (0, 1)], 3: [(0, 1, 2)]}[k]


def block_orientation(d: int, k: int, subset) -> int:
    """Sign relating a block's stored wedge to the sorted one.

    Components follow the cyclic convention: in 3D the 2-cell block with
    normal axis 2 is attached to dx3^dx1 = -dx1^dx3, all other blocks to
    their sorted wedge.
    """
    if d == 3 and k == 2 and tuple(subset) == (0, 2):
        return -1
    return 1


def _difference_matrix(n: int) -> sp.csr_matrix:
    """1D coboundary (n, n+1): row i reads value[i+1] - value[i]."""
    data = np.tile([-1, 1], n)
    rows = np.repeat(np.arange(n), 2)
    cols = rows + np.tile([0, 1], n)
    return sp.csr_matrix((data, (rows, cols)), shape=(n, n + 1), dtype=np.int64)


@dataclass(frozen=True)
class IncidenceMatrix:
    """Signed integer connectivity E_{k-1,k} between k-cells and their boundary cells."""

    k_from: int
    k_to: int
    matrix: sp.csc_matrix

    def __post_init__(self):
        if self.k_to != self.k_from - 1:
            raise ConstructionError("incidence matrix must map k-cells to (k-1)-cells")


class CellComplex:
    """Tensor-product complex with dims[j] cells along direction j (d in {1,2,3})."""

    def __init__(self, dims):
        dims = tuple(int(n) for n in dims)
        if not 1 <= len(dims) <= 3:
            raise ConstructionError("dimension must be 1, 2 or 3")
        if any(n < 1 for n in dims):
            raise ConstructionError("every direction needs at least one cell")
        self.dims = dims
        self.d = len(dims)
        self._coboundary_cache: dict[int, sp.csr_matrix] = {}

    def block_shapes(self, k: int):
        """Per-block (direction subset, shape) pairs for the k-cells."""
        self._check_k(k, allow_zero=True)
        out = []
        for subset in direction_subsets(self.d, k):
            shape = tuple(
                self.dims[j] if j in subset else self.dims[j] + 1 for j in range(self.d)
            )
            out.append((subset, shape))
        return out

    def num_cells(self, k: int) -> int:
        return sum(int(np.prod(shape)) for _, shape in self.block_shapes(k))

    def coboundary_matrix(self, k: int) -> sp.csr_matrix:
        """Discrete derivative D_{k+1,k} acting on k-cochain coefficient vectors."""
        self._check_k(k, allow_zero=True)
        if k >= self.d:
            raise ConstructionError(f"no coboundary beyond top dimension {self.d}")
        if k not in self._coboundary_cache:
            self._coboundary_cache[k] = self._build_coboundary(k)
        return self._coboundary_cache[k]

    def incidence(self, k: int) -> IncidenceMatrix:
        """Boundary incidence E_{k-1,k}; its transpose is D_{k,k-1}."""
        self._check_k(k)
        return IncidenceMatrix(k, k - 1, self.coboundary_matrix(k - 1).T.tocsc())

    def _check_k(self, k: int, allow_zero: bool = False):
        lo = 0 if allow_zero else 1
        if not lo <= k <= self.d:
            raise ConstructionError(f"k={k} out of range for a {self.d}D complex")

    def _axis_operator(self, shape, axis) -> sp.spmatrix:
        """Apply the 1D difference along one axis of an F-ordered coefficient tensor."""
        mats = [
            _difference_matrix(self.dims[j])
            if j == axis
            else sp.identity(shape[j], dtype=np.int64, format="csr")
            for j in range(self.d)
        ]
        out = mats[0]
        for m in mats[1:]:
            out = sp.kron(m, out, format="csr")  # first direction fastest
        return out

    def _build_coboundary(self, k: int) -> sp.csr_matrix:
        col_blocks = self.block_shapes(k)
        row_blocks = self.block_shapes(k + 1)
        grid = []
        for target, _ in row_blocks:
            o_target = block_orientation(self.d, k + 1, target)
            row = []
            for subset, shape in col_blocks:
                if set(subset) <= set(target):
                    (axis,) = set(target) - set(subset)
                    o_source = block_orientation(self.d, k, subset)
                    sign = o_target * o_source * (-1) ** sum(1 for s in subset if s < axis)
                    row.append(sign * self._axis_operator(shape, axis))
                else:
                    row.append(None)
            grid.append(row)
        return sp.bmat(grid, format="csr", dtype=np.int64)

    def __repr__(self):
        return f"CellComplex(dims={self.dims})"


@dataclass(frozen=True)
class Chain:
    """Integer combination of k-cells with coefficients in {-1, 0, 1}."""

    k: int
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.ascontiguousarray(self.coeffs, dtype=np.int64)
        if coeffs.ndim != 1:
            raise ConstructionError("chain coefficients must be a vector")
        if np.any(np.abs(coeffs) > 1):
            raise ConstructionError("chain coefficients must lie in {-1, 0, 1}")
        object.__setattr__(self, "coeffs", coeffs)


@dataclass(frozen=True)
class Cochain:
    """Real value attached to every k-cell of a complex."""

    k: int
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.ascontiguousarray(self.coeffs)
        if coeffs.ndim != 1:
            raise ConstructionError("cochain coefficients must be a vector")
        object.__setattr__(self, "coeffs", coeffs)


def build_incidence(complex_: CellComplex, k: int) -> IncidenceMatrix:
    """Incidence matrix E_{k-1,k} of a complex (1 <= k <= d)."""
    return complex_.incidence(k)


def boundary(chain: Chain, incidence: IncidenceMatrix) -> Chain:
    """Boundary of a k-chain: coefficients E_{k-1,k} @ c."""
    if chain.k != incidence.k_from:
        raise ConstructionError(
            f"chain degree {chain.k} does not match incidence k_from {incidence.k_from}"
        )
    if chain.coeffs.size != incidence.matrix.shape[1]:
        raise ConstructionError("chain length does not match the incidence matrix")
    out = incidence.matrix @ chain.coeffs
    # boundaries of valid chains may leave {-1,0,1}; clip is wrong, so keep raw ints
    result = Chain.__new__(Chain)
    object.__setattr__(result, "k", incidence.k_to)
    object.__setattr__(result, "coeffs", np.asarray(out, dtype=np.int64))
    return result


def coboundary(cochain: Cochain, incidence: IncidenceMatrix) -> Cochain:
    """Coboundary of a (k-1)-cochain: coefficients E_{k-1,k}^T @ b."""
    if cochain.k != incidence.k_to:
        raise ConstructionError(
            f"cochain degree {cochain.k} does not match incidence k_to {incidence.k_to}"
        )
    if cochain.coeffs.size != incidence.matrix.shape[0]:
        raise ConstructionError("cochain length does not match the incidence matrix")
    return Cochain(incidence.k_from, incidence.matrix.T @ cochain.coeffs)


def duality_pairing(cochain: Cochain, chain: Chain) -> float:
    """Summation pairing <a, c> = a^T c."""
    if cochain.k != chain.k:
        raise ConstructionError("cochain and chain degrees differ")
    if cochain.coeffs.size != chain.coeffs.size:
        raise ConstructionError("cochain and chain lengths differ")
    return float(np.dot(cochain.coeffs, chain.coeffs))
