"""State construction: beam-splitter expansion, ring weights, wavepackets."""

import math

import numpy as np
import pytest
import sympy

from catbell.errors import TruncationError
from catbell.special_fn import gauss_legendre
from catbell.states import (
    CoherentRing,
    TwoModeFockVector,
    coherent_wavefunction,
    f_phi,
    reconstruct_number_state,
    split_number_state,
)


def symbolic_split_coefficients(N: int) -> list[complex]:
    """Expand (a1+ + i a2+)^N / sqrt(N! 2^N) |0,0> symbolically (oracle)."""
    a1, a2 = sympy.symbols("a1 a2")
    expr = sympy.expand((a1 + sympy.I * a2) ** N)
    coeffs = []
    for n in range(N + 1):
        # coefficient of a1^(N-n) a2^n, then normalize (a+)^k|0> = sqrt(k!)|k>
        c = expr.coeff(a1, N - n).coeff(a2, n)
        amp = c * sympy.sqrt(sympy.factorial(N - n) * sympy.factorial(n))
        amp = amp / sympy.sqrt(sympy.factorial(N) * 2**N)
        coeffs.append(complex(sympy.nsimplify(amp)))
    return coeffs


class TestSplitNumberState:
    def test_vacuum_passes_through(self):
        state = split_number_state(0)
        np.testing.assert_allclose(state.coefficients, [1.0], atol=1e-15)

    def test_single_photon(self):
        state = split_number_state(1)
        np.testing.assert_allclose(
            state.coefficients, [1 / math.sqrt(2), 1j / math.sqrt(2)], atol=1e-15
        )

    def test_four_photons_against_symbolic_oracle(self):
        state = split_number_state(4)
        np.testing.assert_allclose(state.coefficients, symbolic_split_coefficients(4), atol=1e-14)
        np.testing.assert_allclose(
            np.abs(state.coefficients),
            [0.25, 0.5, math.sqrt(6) / 4, 0.5, 0.25],
            atol=1e-14,
        )

    @pytest.mark.parametrize("N", [2, 3, 7])
    def test_small_states_against_symbolic_oracle(self, N):
        state = split_number_state(N)
        np.testing.assert_allclose(state.coefficients, symbolic_split_coefficients(N), atol=1e-13)

    def test_unit_norm_up_to_sixty(self):
        for N in range(61):
            norm = split_number_state(N).norm_squared
            assert abs(norm - 1.0) <= 1e-14

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            split_number_state(-1)
        with pytest.raises(ValueError):
            split_number_state(201)

    def test_vector_invariant_enforced(self):
        with pytest.raises(ValueError):
            TwoModeFockVector(total_photons=1, coefficients=np.array([1.0, 1.0]))
        with pytest.raises(ValueError):
            TwoModeFockVector(total_photons=2, coefficients=np.array([1.0, 0.0]))


class TestRingWeight:
    def test_real_positive_at_zero_phase(self):
        value = f_phi(5, math.sqrt(5), 0.0)
        assert value.imag == 0.0
        assert value.real > 0.0

    def test_modulus_independent_of_phase(self):
        phis = np.linspace(0, 2 * math.pi, 17)
        values = f_phi(6, 1.7, phis)
        np.testing.assert_allclose(np.abs(values), np.abs(values[0]), rtol=1e-14)

    def test_frozen_high_precision_value(self):
        # e^2 sqrt(24) / (32 pi), frozen from a 60-digit evaluation
        assert f_phi(4, 2.0, 0.0).real == pytest.approx(0.36007646277952583583, rel=1e-14)

    def test_log_space_survives_large_arguments(self):
        # e^{R^2/2} and N! both overflow doubles on their own here
        value = f_phi(180, math.sqrt(180), 0.3)
        assert np.isfinite(value.real) and np.isfinite(value.imag)

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            f_phi(3, 0.0, 0.1)
        with pytest.raises(ValueError):
            f_phi(3, -1.0, 0.1)
        with pytest.raises(ValueError):
            f_phi(0, 1.0, 0.1)


class TestCoherentWavefunction:
    def test_vacuum_gaussian(self):
        xs = np.linspace(-3, 3, 7)
        got = coherent_wavefunction(0.0, 1.234, xs)
        np.testing.assert_allclose(got, math.pi ** -0.25 * np.exp(-0.5 * xs**2), atol=1e-15)

    def test_displaced_peak_zero_momentum(self):
        value = coherent_wavefunction(1.0, 0.0, math.sqrt(2.0))
        assert value == pytest.approx(math.pi ** -0.25, abs=1e-14)
        assert value.imag == pytest.approx(0.0, abs=1e-14)

    def test_pure_momentum_at_origin(self):
        value = coherent_wavefunction(1.0, math.pi / 2, 0.0)
        assert value == pytest.approx(math.pi ** -0.25, abs=1e-12)

    def test_unit_norm(self):
        for alpha0, phi in ((0.0, 0.0), (1.0, 0.7), (3.0, -2.0)):
            x0 = math.sqrt(2) * alpha0 * math.cos(phi)
            nodes, weights = gauss_legendre(160, x0 - 10.0, x0 + 10.0)
            density = np.abs(coherent_wavefunction(alpha0, phi, nodes)) ** 2
            assert float(np.sum(weights * density)) == pytest.approx(1.0, abs=1e-10)

    def test_global_phase_factor_present(self):
        # at x = 0 the wavefunction reduces to the e^{-i x0 p0 / 2} factor
        alpha0, phi = 1.5, 0.6
        x0 = math.sqrt(2) * alpha0 * math.cos(phi)
        p0 = math.sqrt(2) * alpha0 * math.sin(phi)
        expected = math.pi ** -0.25 * np.exp(-0.5 * x0 * x0 * 1.0) * np.exp(-0.5j * x0 * p0)
        assert coherent_wavefunction(alpha0, phi, 0.0) == pytest.approx(
            complex(math.pi ** -0.25 * math.exp(-0.5 * x0 * x0) * np.exp(-0.5j * x0 * p0)),
            abs=1e-14,
        )
        del expected

    def test_rejects_negative_amplitude(self):
        with pytest.raises(ValueError):
            coherent_wavefunction(-0.5, 0.0, 0.0)


class TestReconstructNumberState:
    def test_single_photon_identity(self):
        coeffs = reconstruct_number_state(CoherentRing(N=1, R=1.0, M=128))
        assert abs(coeffs[1]) >= 1.0 - 1e-10
        others = np.delete(np.abs(coeffs), 1)
        assert float(np.max(others)) <= 1e-10

    def test_four_photon_overlap(self):
        coeffs = reconstruct_number_state(CoherentRing(N=4, R=2.0, M=128))
        assert abs(coeffs[4]) >= 1.0 - 1e-10

    def test_overlap_for_default_grids(self):
        for N in (1, 2, 6, 12, 24):
            coeffs = reconstruct_number_state(CoherentRing(N=N))
            assert abs(coeffs[N]) >= 1.0 - 1e-10, f"N={N}"

    def test_reconstruction_matches_split_state_radius_choice(self):
        # R is arbitrary in exact arithmetic; a non-default sane radius still works
        coeffs = reconstruct_number_state(CoherentRing(N=3, R=2.5, M=100))
        assert abs(coeffs[3]) >= 1.0 - 1e-10

    def test_undersampled_grid_rejected(self):
        with pytest.raises(ValueError):
            CoherentRing(N=1, R=1.0, M=8)

    def test_truncation_failure_flagged(self):
        # a huge ring radius pushes the Fock support far past the cutoff
        with pytest.raises(TruncationError):
            reconstruct_number_state(CoherentRing(N=1, R=12.0, M=128))

    def test_ring_validation(self):
        with pytest.raises(ValueError):
            CoherentRing(N=0)
        with pytest.raises(ValueError):
            CoherentRing(N=2, R=-1.0)
