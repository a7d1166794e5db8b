import math
import sys
import textwrap
import threading

import numpy as np
import pytest
from hypothesis import given, strategies as st

from chebmin.cheb_core import random_tensor_poly
from chebmin.errors import ConfigError, DimensionMismatch, UnknownBenchmark
from chebmin.oracle import (
    BoxDomain, NoiseModel, Oracle, SubprocessOracle, compile_expression, dejong5, deuflhard2d,
    from_function, holder_table2, make_benchmark, poly_oracle, rescale, trefethen, with_noise,
)


class TestBenchmarks:
    def test_deuflhard_origin(self):
        o = make_benchmark("deuflhard2d", [[-1, 1], [-1, 1]])
        assert o.evaluate([0.0, 0.0]) == pytest.approx(4.0)

    def test_holder_origin(self):
        assert holder_table2(np.zeros((1, 2)))[0] == 0.0

    def test_trefethen_origin(self):
        assert trefethen(np.zeros((1, 2)))[0] == pytest.approx(1 + math.sin(60), abs=1e-12)
        assert trefethen(np.zeros((1, 2)))[0] == pytest.approx(0.6951893, abs=1e-7)

    def test_dejong_global_minimum_value(self):
        # classical value of Shekel's foxholes at its global minimizer
        assert dejong5(np.array([[-31.97833, -31.97833]]))[0] == pytest.approx(0.998003838, abs=1e-8)

    def test_deuflhard4d_is_sum(self, rng):
        o4 = make_benchmark("deuflhard4d", [[-1, 1]] * 4)
        X = rng.uniform(-1, 1, (5, 4))
        ref = deuflhard2d(X[:, :2]) + deuflhard2d(X[:, 2:])
        assert np.allclose(o4.exact(X), ref)

    def test_default_domains(self):
        assert make_benchmark("dejong5").domain.as_list() == [[-50.0, 50.0], [-50.0, 50.0]]
        assert make_benchmark("trefethen").domain.as_list() == [[-0.375, 0.375], [-0.375, 0.375]]

    def test_unknown_name(self):
        with pytest.raises(UnknownBenchmark):
            make_benchmark("rosenbrock")

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            make_benchmark("deuflhard2d", [[-1, 1]] * 3)

    def test_random_poly_name(self):
        o = make_benchmark("random_poly(2, 4, 7)")
        assert o.dim == 2
        assert np.isfinite(o.evaluate([0.1, 0.2]))


class TestRescale:
    def test_identity_box(self, rng):
        o = from_function(2, lambda X: np.sin(X[:, 0]) + X[:, 1] ** 3)
        r = rescale(o, BoxDomain.unit(2))
        X = rng.uniform(-1, 1, (10, 2))
        assert np.array_equal(r.exact(X), o.exact(X))

    def test_affine_1d(self):
        o = from_function(1, lambda X: X[:, 0])
        g = rescale(o, BoxDomain([0.0], [2.0]))
        assert g.evaluate([-1.0]) == pytest.approx(0.0)
        assert g.evaluate([1.0]) == pytest.approx(2.0)

    def test_dejong_grid_roundtrip(self):
        o = make_benchmark("dejong5")
        grid = np.array([(a, b) for a in (-32, -16, 0, 16, 32) for b in (-32, -16, 0, 16, 32)], float)
        t = o.to_unit(grid)
        assert np.all(np.abs(t) <= 1.0)
        assert np.max(np.abs(o.to_original(t) - grid)) <= 1e-12

    def test_degenerate_box(self):
        with pytest.raises(ValueError):
            BoxDomain([0.0, 1.0], [1.0, 1.0])

    @given(st.lists(st.tuples(st.floats(-100, 100), st.floats(0.01, 50)), min_size=1, max_size=4))
    def test_maps_are_inverse(self, spec):
        box = BoxDomain([a for a, _ in spec], [a + w for a, w in spec])
        t = np.random.default_rng(0).uniform(-1, 1, (5, box.dim))
        assert np.allclose(box.to_unit(box.to_original(t)), t, atol=1e-9)

    def test_nested_rescale_composes(self):
        o = make_benchmark("deuflhard2d")
        sub = rescale(o, BoxDomain([0.0, -1.0], [1.0, 0.0]))
        t = np.array([[0.3, -0.4]])
        x = sub.to_original(t)
        assert np.allclose(sub.exact(t), deuflhard2d(x))

    def test_minimizer_maps_to_minimizer(self):
        f = lambda X: (X[:, 0] - 3.0) ** 2  # noqa: E731
        g = rescale(from_function(1, f), BoxDomain([2.0], [6.0]))
        t = np.linspace(-1, 1, 4001)[:, None]
        assert g.to_original(t[np.argmin(g.exact(t))])[0] == pytest.approx(3.0, abs=1e-3)


class TestNoise:
    def test_no_model(self, rng):
        o = make_benchmark("holder_table2")
        X = rng.uniform(-1, 1, (50, 2))
        assert np.array_equal(with_noise(o, None).evaluate(X, 0.1), o.exact(X))

    def test_bound_respected(self, rng):
        o = with_noise(make_benchmark("trefethen"), NoiseModel("uniform", seed=3))
        X = rng.uniform(-1, 1, (10 ** 4, 2))
        dev = o.evaluate(X, 0.1) - o.exact(X)
        assert np.max(np.abs(dev)) <= 0.1
        assert np.max(np.abs(dev)) > 0.09
        assert o.noise.bar_eta_max <= 0.1

    def test_zero_bound_exact(self, rng):
        o = with_noise(make_benchmark("trefethen"), NoiseModel("uniform", seed=3))
        X = rng.uniform(-1, 1, (20, 2))
        assert np.array_equal(o.evaluate(X, 0.0), o.exact(X))

    def test_deterministic_per_point(self, rng):
        o = with_noise(make_benchmark("deuflhard2d"), NoiseModel("uniform", seed=9))
        X = rng.uniform(-1, 1, (30, 2))
        a = o.evaluate(X, 0.5)
        b = o.evaluate(X[::-1], 0.5)[::-1]
        assert np.array_equal(a, b)

    def test_seed_changes_draws(self, rng):
        X = rng.uniform(-1, 1, (30, 2))
        base = make_benchmark("deuflhard2d")
        a = with_noise(base, NoiseModel("uniform", seed=1)).evaluate(X, 0.5)
        b = with_noise(base, NoiseModel("uniform", seed=2)).evaluate(X, 0.5)
        assert not np.array_equal(a, b)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            NoiseModel("gaussian")


class TestCounting:
    def test_counts_points(self, rng):
        o = make_benchmark("deuflhard2d")
        o.evaluate(rng.uniform(-1, 1, (7, 2)))
        o.evaluate([0.0, 0.0])
        o.exact(rng.uniform(-1, 1, (5, 2)))
        assert o.call_count == 8

    def test_thread_safe(self):
        o = make_benchmark("deuflhard2d")
        X = np.zeros((10, 2))

        def work():
            for _ in range(200):
                o.evaluate(X)

        threads = [threading.Thread(target=work) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert o.call_count == 8 * 200 * 10

    def test_poly_oracle(self, rng):
        p = random_tensor_poly(2, 3, rng)
        o = poly_oracle(p)
        assert o.evaluate([0.2, 0.1]) == pytest.approx(p([0.2, 0.1]))


class TestExpression:
    def test_basic(self):
        f = compile_expression("x1**2 + sin(x2) - 3*exp(-x1)", 2)
        X = np.array([[0.5, 1.0]])
        assert f(X)[0] == pytest.approx(0.25 + math.sin(1.0) - 3 * math.exp(-0.5))

    def test_aliases_and_constants(self):
        f = compile_expression("x*y + pi + abs(-e) + sqrt(4) + pow(2, 3)", 2)
        assert f(np.array([[2.0, 3.0]]))[0] == pytest.approx(6 + math.pi + math.e + 2 + 8)

    @pytest.mark.parametrize("text", ["__import__('os')", "x1.real", "[x1]", "x3", "lambda: 1",
                                      "open('f')", "x1 if x1 else 2", ""])
    def test_rejected(self, text):
        with pytest.raises(ConfigError):
            compile_expression(text, 2)

    def test_custom_benchmark(self):
        o = make_benchmark("custom", [[0, 2], [0, 2]], expression="(x1-1)**2 + (x2-1)**2")
        assert o.evaluate([0.0, 0.0]) == pytest.approx(0.0)


class TestSubprocess:
    def test_protocol(self, tmp_path):
        script = tmp_path / "child.py"
        script.write_text(textwrap.dedent("""
            import sys
            for line in sys.stdin:
                *xs, eta = map(float, line.split())
                print(sum(v * v for v in xs) + eta, flush=True)
        """))
        box = BoxDomain([0.0, 0.0], [2.0, 4.0])
        with SubprocessOracle([sys.executable, str(script)], box) as o:
            vals = o.evaluate(np.array([[-1.0, -1.0], [1.0, 1.0]]))
            assert np.allclose(vals, [0.0, 4.0 + 16.0])
            assert o.evaluate([0.0, 0.0], 0.25) == pytest.approx(1.0 + 4.0 + 0.25)
            assert o.call_count == 3
