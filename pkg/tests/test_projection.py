"""Projection tests: reductions, change of basis, commuting diagrams."""

import numpy as np
import numpy.testing as npt
import pytest

from splineforms.errors import IllPosedNodesError
from splineforms.geometry import curved_square_patch
from splineforms.projection import (
    build_histopolation,
    build_interpolation,
    greville_edges,
    project_form,
    reduce_0form,
    reduce_1form,
)
from splineforms.spaces import DiscreteForm, DiscreteFormSpace
from splineforms.splines import Basis1D, EdgeBasis1D, KnotVector, uniform_open_knots
from splineforms._quadrature import gauss_rule, panel_rule, split_interval


def make_basis(p, spans, weights=None):
    return Basis1D(KnotVector(uniform_open_knots(p, spans), p), weights)


class TestReductions:
    def test_constant_gives_ones(self):
        nodes = make_basis(2, 5).greville_points()
        red = reduce_0form(lambda x: np.ones_like(x), nodes)
        npt.assert_allclose(red.cochain.coeffs, 1.0)
        assert red.kind == "node-values"

    def test_linear_on_hats(self):
        basis = Basis1D(KnotVector([0, 0, 0.5, 1, 1], 1))
        red = reduce_0form(lambda x: x, basis.greville_points())
        npt.assert_allclose(red.cochain.coeffs, [0, 0.5, 1])

    def test_sine_samples(self):
        nodes = np.linspace(0, 1, 8)
        red = reduce_0form(lambda x: np.sin(2 * np.pi * x), nodes)
        npt.assert_allclose(red.cochain.coeffs, np.sin(2 * np.pi * nodes))

    def test_gradient_integrals(self):
        # f = dT for T = x^2, edges split at 0.5: exact differences of T
        red = reduce_1form(lambda x: 2 * x, np.array([[0, 0.5], [0.5, 1]]))
        npt.assert_allclose(red.cochain.coeffs, [0.25, 0.75], atol=1e-15)
        assert red.kind == "edge-integrals"

    def test_zero_form(self):
        red = reduce_1form(lambda x: 0.0 * x, np.array([[0, 0.3], [0.3, 1]]))
        npt.assert_allclose(red.cochain.coeffs, 0.0)

    def test_trig_against_antiderivative(self):
        edges = np.column_stack((np.arange(4) / 4, np.arange(1, 5) / 4))
        red = reduce_1form(lambda x: np.cos(2 * np.pi * x), edges, n_gauss=10)
        exact = np.diff(np.sin(2 * np.pi * np.append(edges[:, 0], 1.0))) / (2 * np.pi)
        npt.assert_allclose(red.cochain.coeffs, exact, atol=1e-12)

    def test_nonfinite_raises(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            with pytest.raises(FloatingPointError):
                reduce_1form(lambda x: 1.0 / (x - x), np.array([[0.0, 1.0]]))


class TestChangeOfBasis:
    def test_hats_interpolation_is_identity(self):
        basis = Basis1D(KnotVector([0, 0, 0.5, 1, 1], 1))
        cob = build_interpolation(basis)
        npt.assert_allclose(cob.matrix, np.eye(3), atol=1e-15)

    def test_quadratic_rows(self):
        cob = build_interpolation(make_basis(2, 1))
        npt.assert_allclose(
            cob.matrix, [[1, 0, 0], [0.25, 0.5, 0.25], [0, 0, 1]], atol=1e-15
        )

    def test_rows_sum_to_one(self):
        _, rational = make_basis(3, 4), make_basis(3, 4, np.linspace(0.5, 2, 7))
        cob = build_interpolation(rational)
        npt.assert_allclose(cob.matrix.sum(axis=1), 1.0, atol=1e-14)

    def test_hats_histopolation_is_identity(self):
        basis = Basis1D(KnotVector([0, 0, 0.5, 1, 1], 1))
        cob = build_histopolation(EdgeBasis1D(basis))
        npt.assert_allclose(cob.matrix, np.eye(2), atol=1e-14)

    def test_column_sums_are_one(self):
        for weights in (None, np.linspace(0.5, 2.0, 8)):
            basis = make_basis(3, 5, weights)
            cob = build_histopolation(EdgeBasis1D(basis), n_gauss=32)
            npt.assert_allclose(cob.matrix.sum(axis=0), 1.0, atol=1e-12)

    def test_histopolation_reintegration(self):
        # solving then re-integrating reproduces the prescribed edge integrals
        basis = make_basis(3, 6)
        edge = EdgeBasis1D(basis)
        cob = build_histopolation(edge)
        f = lambda x: np.cos(2 * np.pi * x) + 0.3
        edges = greville_edges(basis)
        target = reduce_1form(f, edges, n_gauss=8, breakpoints=basis.breakpoints)
        coeffs = cob.solve(target.cochain.coeffs)
        for i, (a, b) in enumerate(edges):
            pts, wts = panel_rule(split_interval(a, b, basis.breakpoints), 8)
            got = np.dot(edge.eval_edge_many(pts.ravel()) @ coeffs, wts.ravel())
            assert abs(got - target.cochain.coeffs[i]) < 1e-13

    def test_ill_posed_nodes_raise(self):
        basis = make_basis(2, 1)
        with pytest.raises(IllPosedNodesError):
            build_interpolation(basis, nodes=[1.0 - 1e-8, 1.0 - 5e-9, 1.0])


class TestProjection:
    def test_constant_projects_to_ones(self):
        space = DiscreteFormSpace((make_basis(3, 4), make_basis(2, 3)), 0)
        form = project_form(space, lambda x, y: np.ones_like(x))
        npt.assert_allclose(form.coeffs, 1.0, atol=1e-13)

    def test_commutes_with_derivative_1d(self):
        for p in range(1, 5):
            b = make_basis(p, 8)
            s0 = DiscreteFormSpace((b,), 0)
            s1 = DiscreteFormSpace((b,), 1)
            T = lambda x: np.sin(2 * np.pi * x) + x**p
            dT = lambda x: 2 * np.pi * np.cos(2 * np.pi * x) + p * x ** (p - 1)
            lhs = project_form(s0, T).exterior_derivative().coeffs
            rhs = project_form(s1, dT).coeffs
            assert np.abs(lhs - rhs).max() < 1e-10 * np.abs(rhs).max()

    def test_commutes_with_derivative_2d(self):
        bx, by = make_basis(3, 6), make_basis(3, 5)
        s0 = DiscreteFormSpace((bx, by), 0)
        s1 = DiscreteFormSpace((bx, by), 1)
        s2 = DiscreteFormSpace((bx, by), 2)
        T = lambda x, y: np.sin(2 * np.pi * x) * np.cos(np.pi * y)
        Tx = lambda x, y: 2 * np.pi * np.cos(2 * np.pi * x) * np.cos(np.pi * y)
        Ty = lambda x, y: -np.pi * np.sin(2 * np.pi * x) * np.sin(np.pi * y)
        lhs = project_form(s0, T).exterior_derivative().coeffs
        rhs = project_form(s1, [Tx, Ty]).coeffs
        assert np.abs(lhs - rhs).max() < 1e-10 * np.abs(rhs).max()
        ux = lambda x, y: np.cos(np.pi * x) * np.sin(np.pi * y)
        uy = lambda x, y: x * y**2
        rot = lambda x, y: y**2 - np.pi * np.cos(np.pi * x) * np.cos(np.pi * y)
        lhs = project_form(s1, [ux, uy]).exterior_derivative().coeffs
        rhs = project_form(s2, rot).coeffs
        assert np.abs(lhs - rhs).max() < 1e-10 * np.abs(rhs).max()

    def test_commutes_with_derivative_3d(self):
        b = make_basis(2, 3)
        s0 = DiscreteFormSpace((b, b, b), 0)
        s1 = DiscreteFormSpace((b, b, b), 1)
        T = lambda x, y, z: x**2 * y + np.sin(np.pi * z) * y
        grad = [
            lambda x, y, z: 2 * x * y,
            lambda x, y, z: x**2 + np.sin(np.pi * z),
            lambda x, y, z: np.pi * np.cos(np.pi * z) * y,
        ]
        lhs = project_form(s0, T).exterior_derivative().coeffs
        rhs = project_form(s1, grad).coeffs
        assert np.abs(lhs - rhs).max() < 1e-10 * np.abs(rhs).max()

    def test_reduction_commutes_with_coboundary(self):
        # R(dT) computed by quadrature equals the differences of R(T)
        basis = make_basis(3, 7)
        T = lambda x: np.exp(np.sin(2 * np.pi * x))
        dT = lambda x: 2 * np.pi * np.cos(2 * np.pi * x) * T(x)
        nodes = basis.greville_points()
        samples = reduce_0form(T, nodes).cochain.coeffs
        integrals = reduce_1form(
            dT, greville_edges(basis), n_gauss=12, breakpoints=basis.breakpoints
        ).cochain.coeffs
        npt.assert_allclose(integrals, np.diff(samples), atol=1e-11)

    def test_projection_is_idempotent(self):
        space = DiscreteFormSpace((make_basis(2, 4), make_basis(3, 3)), 1)
        rng = np.random.default_rng(2)
        form = DiscreteForm(space, rng.standard_normal(space.dim))
        again = project_form(space, form)
        npt.assert_allclose(again.coeffs, form.coeffs, atol=1e-11)

    def test_member_roundtrip(self):
        for k in (0, 1, 2):
            space = DiscreteFormSpace((make_basis(3, 4), make_basis(2, 5)), k)
            rng = np.random.default_rng(4 + k)
            form = DiscreteForm(space, rng.standard_normal(space.dim))
            npt.assert_allclose(
                project_form(space, form).coeffs, form.coeffs, atol=1e-11
            )

    def test_commutes_with_pullback(self):
        # projecting the pulled-back form vs reducing over mapped cells
        # (the physical route uses finite-difference tangents only)
        from splineforms.verification import fd_tangent

        patch = curved_square_patch()
        b = make_basis(2, 3)
        space = DiscreteFormSpace((b, b), 1)
        a_fun = lambda x, y: np.stack((np.sin(x + y), x * y), axis=-1)

        def pulled_dx(x, y):
            uv = np.stack((x, y), axis=-1)
            vals = patch.pullback_components(1, uv, a_fun(*patch.map_point(uv).reshape(-1, 2).T).reshape(uv.shape))
            return vals[..., 0]

        def pulled_dy(x, y):
            uv = np.stack((x, y), axis=-1)
            vals = patch.pullback_components(1, uv, a_fun(*patch.map_point(uv).reshape(-1, 2).T).reshape(uv.shape))
            return vals[..., 1]

        reference = project_form(space, [pulled_dx, pulled_dy], n_gauss=10)

        # physical-route reduction of the same form over the mapped cells
        pts, wts = gauss_rule(10)
        t = 0.5 * (pts + 1)
        w = 0.5 * wts
        nodes = b.greville_points()
        edges = greville_edges(b)
        red = np.empty(space.dim)
        pos = 0
        for block in space.blocks:
            shape = block.shape
            vals = np.empty(shape)
            for i in range(shape[0]):
                for j in range(shape[1]):
                    if block.dirs == (0,):
                        seg0 = edges[i][0] + (edges[i][1] - edges[i][0]) * t
                        uv = np.column_stack((seg0, np.full_like(t, nodes[j])))
                        direction = np.array([edges[i][1] - edges[i][0], 0.0])
                    else:
                        seg1 = edges[j][0] + (edges[j][1] - edges[j][0]) * t
                        uv = np.column_stack((np.full_like(t, nodes[i]), seg1))
                        direction = np.array([0.0, edges[j][1] - edges[j][0]])
                    tangent = fd_tangent(patch, uv, direction)
                    avals = a_fun(*patch.map_point(uv).T)
                    vals[i, j] = np.einsum("mc,mc,m->", avals, tangent, w)
            red[pos : pos + block.size] = vals.ravel(order="F")
            pos += block.size
        from splineforms.projection import _Projector

        proj = _Projector(space, n_gauss=10)
        physical = np.empty(space.dim)
        for block in space.blocks:
            tensor = red[block.offset : block.offset + block.size].reshape(
                block.shape, order="F"
            )
            physical[block.offset : block.offset + block.size] = proj.solve_block(
                block, tensor
            ).ravel(order="F")
        assert np.abs(physical - reference.coeffs).max() < 1e-10 * max(
            1.0, np.abs(reference.coeffs).max()
        )
