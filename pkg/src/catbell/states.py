"""Input number state, its coherent-ring resolution, and the split two-mode state.

A balanced beam splitter acts as a1+ -> (a1+ + i a2+)/sqrt(2).  The same
physical output state has two representations used throughout:

* a two-mode Fock expansion over {|N-n, n>} with coefficients
  i^n sqrt(C(N,n)/2^N), and
* a uniform ring of two-mode coherent states |(R/sqrt2) e^{i phi}> x 2,
  weighted by f_phi.

The ring representation absorbs a -pi/2 phase shift on mode 2 that cancels
the reflection factor i, so the two descriptions refer to the same state up
to that fixed local rotation.  Quadratures are dimensionless,
x = (a + a+)/sqrt(2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import TruncationError

__all__ = [
    "MAX_PHOTONS",
    "TwoModeFockVector",
    "CoherentRing",
    "split_number_state",
    "f_phi",
    "f_phi_log_magnitude",
    "coherent_wavefunction",
    "reconstruct_number_state",
]

MAX_PHOTONS = 200

_I_POW = np.array([1.0, 1.0j, -1.0, -1.0j])  # i^n cycle


@dataclass(frozen=True)
class TwoModeFockVector:
    """Coefficients over the two-mode sector {|N-n, n>}, entry n on |N-n, n>."""

    total_photons: int
    coefficients: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        if self.total_photons < 0:
            raise ValueError("photon number must be non-negative")
        if len(self.coefficients) != self.total_photons + 1:
            raise ValueError("coefficient count must be total_photons + 1")
        if self.normalized:
            norm = float(np.sum(np.abs(self.coefficients) ** 2))
            if abs(norm - 1.0) > 1e-12:
                raise ValueError(f"state marked normalized but |c|^2 sums to {norm}")

    @property
    def norm_squared(self) -> float:
        return float(np.sum(np.abs(self.coefficients) ** 2))


@dataclass(frozen=True)
class CoherentRing:
    """Uniform phase grid for resolving |N> over coherent states of radius R.

    M must be at least 8N + 64: the weight f_phi oscillates as e^{-iN phi},
    and coarser grids alias Fock components back below the truncation cutoff.
    """

    N: int
    R: float = 0.0
    M: int = 0

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("ring resolution needs N >= 1")
        if self.R == 0.0:
            object.__setattr__(self, "R", math.sqrt(self.N))
        if self.R <= 0:
            raise ValueError(f"R must be positive, got {self.R}")
        if self.M == 0:
            object.__setattr__(self, "M", 8 * self.N + 64)
        if self.M < 8 * self.N + 64:
            raise ValueError(
                f"phase grid M={self.M} too coarse for N={self.N}; need >= {8 * self.N + 64}"
            )

    @property
    def phases(self) -> np.ndarray:
        return 2.0 * math.pi * np.arange(self.M) / self.M


def split_number_state(N: int) -> TwoModeFockVector:
    """Two-mode state produced by |N> on a balanced beam splitter.

    Coefficient of |N-n, n>: i^n sqrt(C(N,n)/2^N).
    """
    if N < 0:
        raise ValueError(f"photon number must be >= 0, got {N}")
    if N > MAX_PHOTONS:
        raise ValueError(f"photon number {N} exceeds supported maximum {MAX_PHOTONS}")
    n = np.arange(N + 1)
    # exact integer binomials keep the norm defect at the few-ulp level
    mags = np.sqrt([math.comb(N, int(k)) * 0.5**N for k in n])
    coeffs = _I_POW[n % 4] * mags
    return TwoModeFockVector(total_photons=N, coefficients=coeffs)


def f_phi_log_magnitude(N: int, R: float) -> float:
    """log |f_phi| = R^2/2 + log(sqrt(N!)) - log(2 pi R^N); phase is -N*phi."""
    if N < 1:
        raise ValueError(f"ring weight needs N >= 1, got {N}")
    if R <= 0:
        raise ValueError(f"R must be positive, got {R}")
    return 0.5 * R * R + 0.5 * math.lgamma(N + 1) - math.log(2.0 * math.pi) - N * math.log(R)


def f_phi(N: int, R: float, phi):
    """Ring weight f_phi = e^{R^2/2} e^{-iN phi} sqrt(N!) / (2 pi R^N).

    Evaluated in log space so e^{R^2/2} and N! never overflow individually.
    Accepts scalar or array phi.
    """
    log_mag = f_phi_log_magnitude(N, R)
    phi = np.asarray(phi, dtype=float)
    out = np.exp(log_mag - 1j * N * phi)
    return complex(out) if out.shape == () else out


def coherent_wavefunction(alpha0: float, phi: float, x):
    """Position wavefunction of the coherent state |alpha0 e^{i phi}>.

    psi(x) = pi^{-1/4} e^{i p0 x} e^{-(x-x0)^2/2} e^{-i x0 p0 / 2}
    with x0 = sqrt(2) alpha0 cos(phi), p0 = sqrt(2) alpha0 sin(phi).

    The global factor e^{-i x0 p0/2} matters: superpositions over phi
    interfere with the wrong fringe positions without it.
    """
    if alpha0 < 0:
        raise ValueError(f"alpha0 must be >= 0, got {alpha0}")
    if not (math.isfinite(alpha0) and math.isfinite(phi)):
        raise ValueError("alpha0 and phi must be finite")
    x = np.asarray(x, dtype=float)
    x0 = math.sqrt(2.0) * alpha0 * math.cos(phi)
    p0 = math.sqrt(2.0) * alpha0 * math.sin(phi)
    out = math.pi ** -0.25 * np.exp(1j * p0 * x - 0.5 * (x - x0) ** 2 - 0.5j * x0 * p0)
    return complex(out) if out.shape == () else out


def reconstruct_number_state(ring: CoherentRing) -> np.ndarray:
    """Fock coefficients of the trapezoid-rule integral over the coherent ring.

    Integrates f_phi |R e^{i phi}> over [0, 2 pi) on the uniform grid (the
    integrand is periodic, so the trapezoid rule converges spectrally) and
    expands in number states truncated at 4N + 40 photons.  For a valid grid
    the result is |N> itself; the coefficient sequence is returned so callers
    can check the overlap.

    Raises TruncationError if the Fock mass found just beyond the cutoff
    exceeds 1e-12 (e.g. for R far from sqrt(N), where the ring components
    populate much higher number states).
    """
    N, R, M = ring.N, ring.R, ring.M
    cutoff = 4 * N + 40
    probe = cutoff + 16  # extra orders used only for the tail-mass check
    m = np.arange(probe + 1)
    # combined log magnitude of f_phi and the coherent Fock coefficient
    # e^{-R^2/2} R^m / sqrt(m!); the e^{+-R^2/2} factors cancel exactly
    log_mag = (
        0.5 * math.lgamma(N + 1)
        - 0.5 * np.array([math.lgamma(k + 1) for k in m])
        + (m - N) * math.log(R)
        - math.log(2.0 * math.pi)
    )
    phases = ring.phases
    # trapezoid over the periodic grid: (2 pi / M) * sum_j e^{i (m-N) phi_j}
    osc = np.exp(1j * np.outer(m - N, phases)).sum(axis=1) * (2.0 * math.pi / M)
    coeffs = np.exp(log_mag) * osc
    tail = float(np.sum(np.abs(coeffs[cutoff + 1 :]) ** 2))
    if tail > 1e-12:
        raise TruncationError(
            f"Fock tail mass {tail:.3e} beyond cutoff {cutoff} exceeds 1e-12 "
            f"(N={N}, R={R}, M={M})"
        )
    return coeffs[: cutoff + 1]
