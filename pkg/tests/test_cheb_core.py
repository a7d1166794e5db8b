from fractions import Fraction
from math import comb, pi, sqrt

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.polynomial import chebyshev as npc

from chebmin.cheb_core import (
    TensorPoly, basis_size, clenshaw_exact, evaluate, from_text, l2_norm_mu, multi_indices,
    partial, quad_mu, random_tensor_poly, sup_norm_grid, to_monomial_exact, to_text,
)
from chebmin.errors import DimensionMismatch


def T(dim, degree, coeffs):
    return TensorPoly.from_coeffs(dim, degree, coeffs)


def dense_numpy(p):
    """Independent evaluation through numpy's Chebyshev module."""
    if p.dim == 1:
        return lambda X: npc.chebval(X[:, 0], p.tensor)
    if p.dim == 2:
        return lambda X: npc.chebval2d(X[:, 0], X[:, 1], p.tensor)
    if p.dim == 3:
        return lambda X: npc.chebval3d(X[:, 0], X[:, 1], X[:, 2], p.tensor)
    raise ValueError


poly_params = st.tuples(st.integers(1, 3), st.integers(0, 8), st.integers(0, 2 ** 31))


def poly_from(params):
    n, d, seed = params
    return random_tensor_poly(n, d, np.random.default_rng(seed))


class TestBasis:
    @pytest.mark.parametrize("n,d", [(1, 0), (1, 7), (2, 3), (3, 4), (4, 6)])
    def test_basis_size_is_binomial(self, n, d):
        assert basis_size(n, d) == comb(n + d, n)
        assert len(multi_indices(n, d)) == comb(n + d, n)

    def test_graded_lex_order(self):
        assert multi_indices(2, 2) == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]

    def test_total_degree_enforced(self):
        with pytest.raises(ValueError):
            T(2, 2, {(2, 1): 1.0})

    def test_vector_roundtrip(self, rng):
        p = random_tensor_poly(3, 5, rng)
        q = TensorPoly.from_vector(3, 5, p.to_vector())
        assert np.array_equal(p.tensor, q.tensor)

    def test_coeffs_sparse_view(self):
        p = T(2, 3, {(0, 0): 2.0, (1, 2): -1.0})
        assert p.coeffs == {(0, 0): 2.0, (1, 2): -1.0}

    def test_immutable(self, rng):
        p = random_tensor_poly(2, 3, rng)
        with pytest.raises(ValueError):
            p.tensor[0, 0] = 5.0


class TestEvaluate:
    def test_t3_closed_form(self):
        assert evaluate(T(1, 3, {(3,): 1.0}), [0.5]) == pytest.approx(-1.0, abs=1e-15)

    def test_constant(self):
        p = TensorPoly.constant(3, 1.0)
        assert evaluate(p, [0.3, -0.7, 0.9]) == 1.0

    def test_product_closed_form(self):
        p = T(2, 3, {(2, 1): 1.0})
        assert evaluate(p, [0.0, 1.0]) == pytest.approx(-1.0, abs=1e-15)

    def test_batch_shape(self, rng):
        p = random_tensor_poly(2, 4, rng)
        X = rng.uniform(-1, 1, (7, 2))
        assert evaluate(p, X).shape == (7,)

    def test_dimension_mismatch(self, rng):
        p = random_tensor_poly(2, 4, rng)
        with pytest.raises(DimensionMismatch):
            evaluate(p, [0.1, 0.2, 0.3])

    @given(poly_params)
    def test_matches_numpy_chebval(self, params):
        p = poly_from(params)
        X = np.random.default_rng(params[2] + 1).uniform(-1, 1, (25, p.dim))
        ref = dense_numpy(p)(X)
        scale = 1.0 + np.abs(p.tensor).sum()
        assert np.max(np.abs(evaluate(p, X) - ref)) <= 1e-13 * scale


class TestPartial:
    def test_t2_derivative(self):
        dp = partial(T(1, 2, {(2,): 1.0}), 0)
        assert dp.coeffs == {(1,): 4.0}
        assert evaluate(dp, [0.25]) == pytest.approx(1.0)

    def test_constant_gives_zero(self):
        assert partial(TensorPoly.constant(2, 3.0), 1).is_zero()

    def test_axis_out_of_range(self, rng):
        with pytest.raises((ValueError, IndexError)):
            partial(random_tensor_poly(2, 3, rng), 2)

    def test_degree_drops(self, rng):
        assert partial(random_tensor_poly(2, 6, rng), 0).degree == 5

    def test_random_degree6_matches_finite_differences(self, rng):
        p = random_tensor_poly(2, 6, rng)
        dp = partial(p, 0)
        X = rng.uniform(-0.9, 0.9, (20, 2))
        h = 1e-5
        E = np.array([h, 0.0])
        fd = (evaluate(p, X + E) - evaluate(p, X - E)) / (2 * h)
        got = evaluate(dp, X)
        assert np.max(np.abs(got - fd) / np.maximum(1.0, np.abs(fd))) <= 1e-6

    @given(poly_params, st.integers(0, 2))
    def test_matches_numpy_chebder(self, params, axis):
        p = poly_from(params)
        axis = axis % p.dim
        ref = npc.chebder(p.tensor, axis=axis)
        got = partial(p, axis).with_degree(p.degree).tensor
        sl = tuple(slice(0, s) for s in ref.shape)
        assert np.allclose(got[sl], ref, atol=1e-11 * (1 + np.abs(ref).max()))

    @given(poly_params, st.floats(-3, 3), st.floats(-3, 3))
    def test_linearity(self, params, a, b):
        n, d, seed = params
        rng = np.random.default_rng(seed)
        p = random_tensor_poly(n, d, rng)
        q = random_tensor_poly(n, d, rng)
        for axis in range(n):
            lhs = partial(p * a + q * b, axis).tensor
            rhs = (partial(p, axis) * a + partial(q, axis) * b).tensor
            assert np.allclose(lhs, rhs, rtol=0, atol=1e-14 * (1 + np.abs(lhs).max()))


class TestNormsAndQuadrature:
    def test_constant_norm(self):
        assert l2_norm_mu(TensorPoly.constant(2, 1.0)) == pytest.approx(pi)

    def test_t1_norm(self):
        assert l2_norm_mu(T(1, 1, {(1,): 1.0})) == pytest.approx(sqrt(pi / 2))

    @pytest.mark.parametrize("nodes", [1, 3, 10])
    def test_quad_one(self, nodes):
        assert quad_mu(lambda X: np.ones(len(X)), nodes) == pytest.approx(pi)

    def test_quad_x_squared(self):
        assert quad_mu(lambda X: X[:, 0] ** 2, 2) == pytest.approx(pi / 2)

    def test_quad_tensor(self):
        assert quad_mu(lambda X: X[:, 0] ** 2 * X[:, 1] ** 2, 2, dim=2) == pytest.approx(pi ** 2 / 4)

    def test_quad_matches_numpy_chebgauss(self):
        x, w = npc.chebgauss(9)
        g = lambda t: np.cos(t) ** 2 + t ** 5  # noqa: E731
        assert quad_mu(lambda X: g(X[:, 0]), 9) == pytest.approx(np.dot(w, g(x)), rel=1e-14)

    def test_random_norm_against_quadrature(self, rng):
        p = random_tensor_poly(2, 5, rng)
        q = quad_mu(lambda X: evaluate(p, X) ** 2, 6, dim=2)
        assert l2_norm_mu(p) ** 2 == pytest.approx(q, rel=1e-12)

    @given(st.tuples(st.integers(1, 3), st.integers(0, 10), st.integers(0, 2 ** 31)))
    def test_parseval(self, params):
        n, d, seed = params
        if n == 3 and d > 7:
            d = 7
        p = random_tensor_poly(n, d, np.random.default_rng(seed))
        q = quad_mu(lambda X: evaluate(p, X) ** 2, d + 1, dim=n)
        assert l2_norm_mu(p) ** 2 == pytest.approx(q, rel=1e-12)


class TestSupNorm:
    def test_t5(self):
        assert sup_norm_grid(T(1, 5, {(5,): 1.0}), 64) == pytest.approx(1.0, abs=1e-3)

    def test_zero(self):
        assert sup_norm_grid(TensorPoly.zeros(2, 3), 64) == 0.0

    def test_product(self):
        p = T(2, 5, {(3, 2): 2.0})
        assert sup_norm_grid(p, 64) == pytest.approx(2.0, abs=1e-2)

    @given(poly_params, st.integers(2, 100), st.integers(1, 100))
    def test_monotone_in_resolution(self, params, r, extra):
        n, d, seed = params
        if n == 3:
            r, extra = min(r, 30), min(extra, 20)
        p = random_tensor_poly(n, d, np.random.default_rng(seed))
        assert sup_norm_grid(p, r) <= sup_norm_grid(p, r + extra)

    def test_close_to_dense_random_sampling(self, rng):
        p = random_tensor_poly(2, 8, rng)
        X = rng.uniform(-1, 1, (20000, 2))
        assert sup_norm_grid(p, 512) >= np.max(np.abs(evaluate(p, X))) * (1 - 1e-3)


class TestExactConversion:
    def test_half_t0_plus_half_t2(self):
        m = to_monomial_exact(T(1, 2, {(0,): 0.5, (2,): 0.5}))
        assert m.coeffs == {(2,): Fraction(1)}

    def test_t1_t1(self):
        m = to_monomial_exact(T(2, 2, {(1, 1): 1.0}))
        assert m.coeffs == {(1, 1): Fraction(1)}

    def test_random_roundtrip_exact(self, rng):
        p = random_tensor_poly(2, 8, rng)
        m = to_monomial_exact(p)
        for _ in range(20):
            x = [Fraction(int(rng.integers(-1000, 1001)), 1000) for _ in range(2)]
            assert m(x) == clenshaw_exact(p, x)

    def test_rationalized_value_close_to_float(self, rng):
        p = random_tensor_poly(2, 6, rng)
        m = to_monomial_exact(p)
        x = [0.25, -0.5]
        assert float(m(x)) == pytest.approx(evaluate(p, x), abs=1e-12)

    def test_independent_monomial_expansion(self):
        # T4 = 8x^4 - 8x^2 + 1
        m = to_monomial_exact(T(1, 4, {(4,): 1.0}))
        assert m.coeffs == {(0,): 1, (2,): -8, (4,): 8}


class TestText:
    def test_format(self):
        p = T(2, 2, {(0, 0): 1.5, (1, 1): -2.0})
        assert to_text(p) == "2 2\n0 0 1.5\n1 1 -2\n"

    @given(poly_params)
    def test_roundtrip(self, params):
        p = poly_from(params)
        q = from_text(to_text(p))
        assert q.dim == p.dim and q.degree == p.degree
        assert np.array_equal(q.tensor, p.tensor)
