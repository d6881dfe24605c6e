"""Cell complex and incidence-matrix tests, all in exact integer arithmetic."""

import numpy as np
import numpy.testing as npt
import pytest

from splineforms.errors import ConstructionError
from splineforms.topology import (
    CellComplex,
    Chain,
    Cochain,
    boundary,
    build_incidence,
    coboundary,
    duality_pairing,
)

GRIDS = [(3,), (4,), (2, 3), (4, 4), (1, 1, 1), (2, 2, 2), (4, 4, 4), (2, 3, 4)]


def test_interval_incidence():
    E = build_incidence(CellComplex((3,)), 1).matrix.toarray()
    expected = np.array([[-1, 0, 0], [1, -1, 0], [0, 1, -1], [0, 0, 1]])
    npt.assert_array_equal(E, expected)


def test_single_cube_volume_incidence():
    E = build_incidence(CellComplex((1, 1, 1)), 3).matrix.toarray().ravel()
    npt.assert_array_equal(E, [-1, 1, -1, 1, -1, 1])


def test_boundary_of_boundary_is_empty():
    for dims in GRIDS:
        cx = CellComplex(dims)
        for k in range(2, len(dims) + 1):
            prod = cx.incidence(k - 1).matrix @ cx.incidence(k).matrix
            assert prod.dtype.kind == "i"
            assert prod.nnz == 0


def test_cell_counts():
    cx = CellComplex((3, 2))
    assert cx.num_cells(0) == 4 * 3
    assert cx.num_cells(1) == 3 * 3 + 4 * 2
    assert cx.num_cells(2) == 3 * 2
    cx3 = CellComplex((2, 3, 4))
    assert cx3.num_cells(0) == 3 * 4 * 5
    assert cx3.num_cells(1) == 2 * 4 * 5 + 3 * 3 * 5 + 3 * 4 * 4
    assert cx3.num_cells(3) == 2 * 3 * 4


def test_column_structure():
    # each k-cell boundary has 2k entries, paired with opposite signs
    for dims in [(4,), (3, 2), (2, 3, 2)]:
        cx = CellComplex(dims)
        for k in range(1, len(dims) + 1):
            E = cx.incidence(k).matrix.tocsc()
            for j in range(E.shape[1]):
                col = E.data[E.indptr[j] : E.indptr[j + 1]]
                assert len(col) == 2 * k
                assert sorted(col.tolist()) == [-1] * k + [1] * k


def test_boundary_of_single_volume():
    cx = CellComplex((1, 1, 1))
    chain = Chain(3, [1])
    out = boundary(chain, cx.incidence(3))
    npt.assert_array_equal(out.coeffs, [-1, 1, -1, 1, -1, 1])
    again = boundary(out, cx.incidence(2))
    assert not again.coeffs.any()


def test_adjacent_faces_cancel_shared_edge():
    # two faces side by side in x, same orientation: shared edge drops out
    cx = CellComplex((2, 1))
    chain = Chain(2, [1, 1])
    out = boundary(chain, cx.incidence(2))
    # y-running edges come after the 2*(1+1)=4 x-running ones; middle one is shared
    y_edges = out.coeffs[4:]
    assert y_edges[1] == 0
    assert y_edges[0] == -1 and y_edges[2] == 1


def test_boundary_of_boundary_random_chains():
    rng = np.random.default_rng(3)
    for dims in [(4, 4), (2, 3, 2)]:
        cx = CellComplex(dims)
        k = len(dims)
        for _ in range(25):
            chain = Chain(k, rng.integers(-1, 2, size=cx.num_cells(k)))
            out = boundary(boundary(chain, cx.incidence(k)), cx.incidence(k - 1))
            assert not out.coeffs.any()


def test_coboundary_1d_differences():
    cx = CellComplex((4,))
    T = Cochain(0, np.array([3.0, 5.0, 4.0, 0.0, 2.0]))
    out = coboundary(T, cx.incidence(1))
    npt.assert_array_equal(out.coeffs, [2.0, -1.0, -4.0, 2.0])


def test_coboundary_squared_is_zero():
    rng = np.random.default_rng(5)
    for dims in [(3, 3), (2, 2, 3)]:
        cx = CellComplex(dims)
        for k in range(len(dims) - 1):
            b = Cochain(k, rng.integers(-9, 10, size=cx.num_cells(k)))
            dd = coboundary(coboundary(b, cx.incidence(k + 1)), cx.incidence(k + 2))
            assert not dd.coeffs.any()


def test_3d_curl_component_formula():
    # face values from edge values, against the component-wise update rule
    rng = np.random.default_rng(9)
    n1, n2, n3 = 2, 2, 2
    cx = CellComplex((n1, n2, n3))
    s1, s2, s3 = n1 + 1, n2 + 1, n3 + 1
    u1 = rng.integers(-5, 6, size=(n1, s2, s3))
    u2 = rng.integers(-5, 6, size=(s1, n2, s3))
    u3 = rng.integers(-5, 6, size=(s1, s2, n3))
    u = np.concatenate([a.ravel(order="F") for a in (u1, u2, u3)])
    result = coboundary(Cochain(1, u), cx.incidence(2)).coeffs
    w1 = (u3[:, 1:, :] - u3[:, :-1, :]) - (u2[:, :, 1:] - u2[:, :, :-1])
    w2 = (u1[:, :, 1:] - u1[:, :, :-1]) - (u3[1:, :, :] - u3[:-1, :, :])
    w3 = (u2[1:, :, :] - u2[:-1, :, :]) - (u1[:, 1:, :] - u1[:, :-1, :])
    oracle = np.concatenate([a.ravel(order="F") for a in (w1, w2, w3)])
    npt.assert_array_equal(result, oracle)


def test_3d_divergence_component_formula():
    rng = np.random.default_rng(10)
    n1, n2, n3 = 2, 3, 2
    cx = CellComplex((n1, n2, n3))
    q1 = rng.integers(-5, 6, size=(n1 + 1, n2, n3))
    q2 = rng.integers(-5, 6, size=(n1, n2 + 1, n3))
    q3 = rng.integers(-5, 6, size=(n1, n2, n3 + 1))
    q = np.concatenate([a.ravel(order="F") for a in (q1, q2, q3)])
    result = coboundary(Cochain(2, q), cx.incidence(3)).coeffs
    oracle = (
        (q1[1:, :, :] - q1[:-1, :, :])
        + (q2[:, 1:, :] - q2[:, :-1, :])
        + (q3[:, :, 1:] - q3[:, :, :-1])
    ).ravel(order="F")
    npt.assert_array_equal(result, oracle)


def test_duality_pairing_examples():
    a = Cochain(1, np.array([1.0, 2.0, 3.0]))
    c = Chain(1, np.array([1, 0, -1]))
    assert duality_pairing(a, c) == -2.0
    zero = Chain(1, np.zeros(3, dtype=int))
    assert duality_pairing(a, zero) == 0.0


def test_adjointness_random_pairs():
    rng = np.random.default_rng(12)
    cx = CellComplex((3, 3))
    for k in (1, 2):
        E = cx.incidence(k)
        for _ in range(100):
            b = Cochain(k - 1, rng.integers(-9, 10, size=cx.num_cells(k - 1)))
            c = Chain(k, rng.integers(-1, 2, size=cx.num_cells(k)))
            lhs = duality_pairing(coboundary(b, E), c)
            rhs = duality_pairing(b, boundary(c, E))
            assert lhs == rhs


def test_incidence_depends_only_on_dims():
    from splineforms.spaces import DiscreteFormSpace
    from splineforms.splines import Basis1D, KnotVector

    a = Basis1D(KnotVector([0, 0, 0, 0.25, 0.5, 0.75, 1, 1, 1], 2))
    b = Basis1D(KnotVector([0, 0, 0, 0.1, 0.15, 0.8, 1, 1, 1], 2), [1, 2, 0.5, 1, 3, 1])
    sa = DiscreteFormSpace((a, a), 0)
    sb = DiscreteFormSpace((b, b), 0)
    da = sa.coboundary_matrix()
    db = sb.coboundary_matrix()
    assert (da != db).nnz == 0


def test_argument_errors():
    cx = CellComplex((2, 2))
    with pytest.raises(ConstructionError):
        cx.incidence(3)
    with pytest.raises(ConstructionError):
        Chain(1, [0, 2, 0])
    E = cx.incidence(1)
    with pytest.raises(ConstructionError):
        boundary(Chain(2, np.zeros(4, dtype=int)), E)
    with pytest.raises(ConstructionError):
        coboundary(Cochain(1, np.zeros(cx.num_cells(1))), E)
    with pytest.raises(ConstructionError):
        duality_pairing(Cochain(1, np.zeros(3)), Chain(2, np.zeros(3, dtype=int)))
