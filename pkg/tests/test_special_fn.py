"""Special-function layer: stability, exactness, and independent oracles."""

import math
import threading

import mpmath as mp
import numpy as np
import pytest
from scipy.special import roots_legendre

from catbell.special_fn import (
    gauss_legendre,
    hermite_function_matrix,
    hermite_functions,
    log_binomial,
)

mp.mp.dps = 60


def psi_oracle(n: int, x: float) -> float:
    """High-precision normalized Hermite function, independent of the recurrence."""
    xm = mp.mpf(repr(x))
    val = mp.hermite(n, xm) * mp.sqrt(mp.e ** (-xm * xm) / (mp.factorial(n) * 2**n * mp.sqrt(mp.pi)))
    return float(val)


# frozen from the psi_oracle above
_FROZEN_PSI_AT_1P3 = {
    0: 0.3226515045649637741,
    1: 0.59318757377861326568,
    5: -0.39939146281375073457,
    12: 0.35918124326387973943,
    24: -0.28291812579483771007,
}


class TestHermiteFunctions:
    def test_ground_state_at_origin(self):
        table = hermite_functions(0.0, 0)
        assert table.values[0] == pytest.approx(math.pi ** -0.25, abs=1e-15)

    def test_first_excited_odd_at_origin(self):
        table = hermite_functions(0.0, 1)
        assert table.values[1] == 0.0

    def test_against_high_precision_oracle(self):
        table = hermite_functions(1.3, 24)
        for n in range(25):
            assert table.values[n] == pytest.approx(psi_oracle(n, 1.3), abs=1e-12)

    def test_frozen_oracle_values(self):
        table = hermite_functions(1.3, 24)
        for n, expected in _FROZEN_PSI_AT_1P3.items():
            assert table.values[n] == pytest.approx(expected, abs=1e-13)

    def test_oracle_at_scattered_points(self):
        rng = np.random.default_rng(0)
        for x in rng.uniform(-9, 9, 6):
            table = hermite_functions(float(x), 40)
            for n in (0, 7, 23, 40):
                assert table.values[n] == pytest.approx(psi_oracle(n, float(x)), abs=1e-12)

    def test_three_term_recurrence_residual(self):
        for x in (-7.3, -1.0, 0.4, 2.9, 11.0):
            values = hermite_functions(x, 120).values
            for n in range(1, 120):
                predicted = (
                    math.sqrt(2 / (n + 1)) * x * values[n]
                    - math.sqrt(n / (n + 1)) * values[n - 1]
                )
                assert abs(values[n + 1] - predicted) <= 1e-12

    def test_no_overflow_anywhere_in_domain(self):
        xs = np.linspace(-50, 50, 41)
        mat = hermite_function_matrix(xs, 200)
        assert np.all(np.isfinite(mat))
        assert np.max(np.abs(mat)) < 1.0  # normalized functions are bounded

    def test_matrix_matches_scalar_tables(self):
        xs = np.array([-2.0, 0.3, 4.5])
        mat = hermite_function_matrix(xs, 17)
        for i, x in enumerate(xs):
            np.testing.assert_array_equal(mat[i], hermite_functions(float(x), 17).values)

    def test_orthonormality_by_quadrature(self):
        # 400-node composite rule on [-12, 12]: two 200-node panels
        nodes_a, w_a = gauss_legendre(200, -12.0, 0.0)
        nodes_b, w_b = gauss_legendre(200, 0.0, 12.0)
        nodes = np.concatenate([nodes_a, nodes_b])
        weights = np.concatenate([w_a, w_b])
        mat = hermite_function_matrix(nodes, 30)
        gram = (mat * weights[:, None]).T @ mat
        assert np.max(np.abs(gram - np.eye(31))) <= 1e-8

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            hermite_functions(float("nan"), 3)
        with pytest.raises(ValueError):
            hermite_functions(float("inf"), 3)
        with pytest.raises(ValueError):
            hermite_functions(1.0, -1)


class TestLogBinomial:
    def test_small_exact(self):
        assert log_binomial(4, 2) == pytest.approx(math.log(6), rel=1e-15)

    def test_boundary(self):
        assert log_binomial(37, 0) == pytest.approx(0.0, abs=1e-13)
        assert log_binomial(37, 37) == pytest.approx(0.0, abs=1e-13)

    def test_against_exact_integer_arithmetic(self):
        assert log_binomial(24, 12) == pytest.approx(math.log(2704156), rel=1e-14)
        for N in (10, 60, 137, 200):
            for n in (0, 1, N // 3, N // 2, N):
                exact = math.log(math.comb(N, n))
                if exact == 0.0:
                    assert abs(log_binomial(N, n)) <= 1e-13
                else:
                    assert log_binomial(N, n) == pytest.approx(exact, rel=1e-13)

    def test_row_sums_to_power_of_two(self):
        for N in (1, 7, 33, 60):
            total = sum(math.exp(log_binomial(N, n)) for n in range(N + 1))
            assert total == pytest.approx(2.0**N, rel=1e-10)

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            log_binomial(5, -1)
        with pytest.raises(ValueError):
            log_binomial(5, 6)


class TestGaussLegendre:
    def test_midpoint_rule(self):
        nodes, weights = gauss_legendre(1, -1.0, 1.0)
        assert nodes[0] == pytest.approx(0.0, abs=1e-15)
        assert weights[0] == pytest.approx(2.0, abs=1e-15)

    def test_two_point_rule(self):
        nodes, weights = gauss_legendre(2, -1.0, 1.0)
        np.testing.assert_allclose(nodes, [-1 / math.sqrt(3), 1 / math.sqrt(3)], atol=1e-15)
        np.testing.assert_allclose(weights, [1.0, 1.0], atol=1e-15)

    def test_quintic_monomial(self):
        nodes, weights = gauss_legendre(16, 0.0, 1.0)
        assert float(np.sum(weights * nodes**5)) == pytest.approx(1 / 6, abs=1e-14)

    def test_polynomial_exactness(self):
        rng = np.random.default_rng(1)
        for order in (3, 8, 20):
            coeffs = rng.uniform(-2, 2, 2 * order)  # degree 2*order - 1
            nodes, weights = gauss_legendre(order, -2.0, 3.0)
            approx = float(np.sum(weights * np.polyval(coeffs, nodes)))
            # analytic antiderivative
            anti = np.polyint(coeffs)
            exact = float(np.polyval(anti, 3.0) - np.polyval(anti, -2.0))
            assert approx == pytest.approx(exact, rel=1e-12, abs=1e-12)

    def test_matches_scipy_reference(self):
        for order in (1, 2, 5, 16, 64, 200):
            nodes, weights = gauss_legendre(order, -1.0, 1.0)
            ref_nodes, ref_weights = roots_legendre(order)
            np.testing.assert_allclose(nodes, ref_nodes, atol=5e-15)
            np.testing.assert_allclose(weights, ref_weights, atol=5e-15)

    def test_interval_scaling(self):
        nodes, weights = gauss_legendre(12, 2.0, 7.0)
        assert float(np.sum(weights)) == pytest.approx(5.0, rel=1e-14)
        assert np.all((nodes > 2.0) & (nodes < 7.0))

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            gauss_legendre(0, -1.0, 1.0)
        with pytest.raises(ValueError):
            gauss_legendre(4, 1.0, 1.0)
        with pytest.raises(ValueError):
            gauss_legendre(4, 2.0, -2.0)

    def test_concurrent_cache_access(self):
        results = []

        def worker():
            results.append(gauss_legendre(48, -1.0, 1.0))

        threads = [threading.Thread(target=worker) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        for nodes, weights in results[1:]:
            np.testing.assert_array_equal(nodes, results[0][0])
            np.testing.assert_array_equal(weights, results[0][1])
