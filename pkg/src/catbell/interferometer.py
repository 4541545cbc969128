"""Kerr-phase branch states, detector-outcome structure, and joint amplitudes.

Each arm of the split number state passes a single-photon interferometer with
a Kerr medium in one path, so the field picks up a phase of +theta or -theta
conditioned on that arm's single photon.  That yields four branches, indexed

    k = 1: (+,+)   k = 2: (+,-)   k = 3: (-,+)   k = 4: (-,-)

where the signs are the phase shifts applied to mode 1 and mode 2.  On the
Fock expansion {|N-n, n>} (n photons in mode 2) the branch with signs
(s1, s2) multiplies coefficient n by

    exp(i theta (s1 (N-n) + s2 n)) = p_k * q_k^n,
    p_k = e^{i s1 N theta},  q_k = e^{i (s2 - s1) theta},

so q_1 = q_4 = 1, q_2 = e^{-2 i theta}, q_3 = e^{+2 i theta} = q_2*.  These
signs are pinned by the phase-integral representation below (see
CONVENTIONS.md); note q_2 conjugate to what one would read off a mode-1
photon index.

Two independent evaluators of the same branch amplitude are kept as
first-class operations: the Hermite-function form (production path) and the
coherent-ring phase integral (ground-truth oracle, built first).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError
from .special_fn import gauss_legendre, hermite_function_matrix
from .states import MAX_PHOTONS, f_phi_log_magnitude

__all__ = [
    "BRANCHES",
    "BRANCH_SIGNS",
    "PATTERNS",
    "PATTERN_SIGNS",
    "BranchState",
    "DetectorOutcome",
    "branch_state",
    "detector_outcome",
    "outcome_multiplier_table",
    "hermite_amplitude",
    "closed_form_amplitude",
    "phase_integral_amplitude",
    "outcome_amplitude",
    "total_outcome_norm",
]

BRANCHES = (1, 2, 3, 4)
BRANCH_SIGNS = {1: (1, 1), 2: (1, -1), 3: (-1, 1), 4: (-1, -1)}
_BRANCH_LABELS = {1: "++", 2: "+-", 3: "-+", 4: "--"}

# Detector patterns |D1 D2 D3 D4| occupation strings; D1/D2 read arm A,
# D3/D4 read arm B.  CHSH signs: a=+1 for D1, a=-1 for D2; b=+1 for D3,
# b=-1 for D4 (the b mapping mirrors a; flipping it only relabels b and
# changes the sign of S, which is reported in absolute value).
PATTERNS = ("1010", "1001", "0110", "0101")
PATTERN_SIGNS = {"1010": (1, 1), "1001": (1, -1), "0110": (-1, 1), "0101": (-1, -1)}

# Phase factors collected by each branch on its way to a given detector
# pattern: one factor i per beam-splitter reflection of a single photon,
# and 1/4 from the two final 50/50 splitters.  Multiply column k by the
# setting phase (z1 z2, z1, z2, 1)[k] with z = e^{i sigma}.
_PATTERN_BASE = {
    "1010": np.array([0.25, -0.25, -0.25, 0.25], dtype=complex),
    "1001": np.array([0.25j, 0.25j, -0.25j, -0.25j]),
    "0110": np.array([0.25j, -0.25j, 0.25j, -0.25j]),
    "0101": np.array([-0.25, -0.25, -0.25, -0.25], dtype=complex),
}


@dataclass(frozen=True)
class BranchState:
    """One Kerr-phase branch of the split number state (unit norm).

    ``coefficients[n]`` multiplies |N-n, n> and carries q_k^n sqrt(C(N,n)/2^N);
    the global phase ``prefactor`` (= p_k) is kept separate.
    """

    k: int
    total_photons: int
    theta: float
    prefactor: complex
    coefficients: np.ndarray

    @property
    def signs(self) -> tuple[int, int]:
        return BRANCH_SIGNS[self.k]

    @property
    def label(self) -> str:
        return _BRANCH_LABELS[self.k]


@dataclass(frozen=True)
class DetectorOutcome:
    """A single-photon detection pattern with its CHSH signs and multipliers.

    ``branch_multipliers[k-1]`` is the complex weight g_k applied to branch k
    in the postselected amplitude; every multiplier has modulus 1/4.
    """

    pattern: str
    chsh_signs: tuple[int, int]
    branch_multipliers: np.ndarray


def _split_magnitudes(N: int) -> np.ndarray:
    """sqrt(C(N,n)/2^N) from exact integer binomials (norm exact to a few ulp)."""
    return np.sqrt([math.comb(N, n) * 0.5**N for n in range(N + 1)])


def branch_state(N: int, theta: float, k: int) -> BranchState:
    """Branch k of the split number state after the Kerr media."""
    if k not in BRANCH_SIGNS:
        raise ValueError(f"branch index must be one of {BRANCHES}, got {k}")
    if N < 1:
        raise ValueError(f"branch states need N >= 1, got {N}")
    if N > MAX_PHOTONS:
        raise ValueError(f"photon number {N} exceeds supported maximum {MAX_PHOTONS}")
    s1, s2 = BRANCH_SIGNS[k]
    q = np.exp(1j * theta * (s2 - s1))
    prefactor = complex(np.exp(1j * theta * s1 * N))
    coeffs = _split_magnitudes(N) * q ** np.arange(N + 1)
    return BranchState(
        k=k, total_photons=N, theta=theta, prefactor=prefactor, coefficients=coeffs
    )


def detector_outcome(pattern: str, sigma1: float, sigma2: float) -> DetectorOutcome:
    """Branch multipliers and CHSH signs for one detection pattern."""
    if pattern not in PATTERN_SIGNS:
        raise ValueError(f"pattern must be one of {PATTERNS}, got {pattern!r}")
    setting = np.array(
        [np.exp(1j * (sigma1 + sigma2)), np.exp(1j * sigma1), np.exp(1j * sigma2), 1.0]
    )
    return DetectorOutcome(
        pattern=pattern,
        chsh_signs=PATTERN_SIGNS[pattern],
        branch_multipliers=_PATTERN_BASE[pattern] * setting,
    )


def outcome_multiplier_table(sigma1, sigma2) -> np.ndarray:
    """Multipliers g[pattern, branch] for all four patterns at once.

    sigma1/sigma2 may be arrays; the result then has shape
    ``sigma.shape + (4, 4)``.
    """
    sigma1 = np.asarray(sigma1, dtype=float)
    sigma2 = np.asarray(sigma2, dtype=float)
    z1 = np.exp(1j * sigma1)
    z2 = np.exp(1j * sigma2)
    setting = np.stack(np.broadcast_arrays(z1 * z2, z1, z2, np.ones_like(z1)), axis=-1)
    base = np.stack([_PATTERN_BASE[p] for p in PATTERNS])  # (4 patterns, 4 branches)
    return base * setting[..., None, :]


def hermite_amplitude(branch: BranchState, x1, x2):
    """Joint position amplitude <x1, x2|branch> via normalized Hermite functions.

    psi_k(x1, x2) = p_k sum_n c_n q_k^n psi_{N-n}(x1) psi_n(x2); all the
    Gaussian, factorial and 2^n factors live inside the psi_n.
    """
    N = branch.total_photons
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    shape = np.broadcast_shapes(x1.shape, x2.shape)
    m1 = hermite_function_matrix(np.broadcast_to(x1, shape).ravel(), N)
    m2 = hermite_function_matrix(np.broadcast_to(x2, shape).ravel(), N)
    products = m1[:, ::-1] * m2  # column n: psi_{N-n}(x1) psi_n(x2)
    out = branch.prefactor * (products @ branch.coefficients)
    return complex(out[0]) if shape == () else out.reshape(shape)


def closed_form_amplitude(branch: BranchState, x1, x2):
    """Analytic form of the (+,+) and (-,-) amplitudes.

    For q_k = 1 the binomial sum collapses under the Hermite addition theorem
    to p_k psi_N((x1+x2)/sqrt 2) psi_0((x1-x2)/sqrt 2): the beam splitter is a
    rotation of the quadrature plane.
    """
    if branch.k not in (1, 4):
        raise ValueError("closed form only exists for the equal-sign branches (k=1,4)")
    N = branch.total_photons
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    shape = np.broadcast_shapes(x1.shape, x2.shape)
    u = (np.broadcast_to(x1, shape).ravel() + np.broadcast_to(x2, shape).ravel()) / math.sqrt(2)
    v = (np.broadcast_to(x1, shape).ravel() - np.broadcast_to(x2, shape).ravel()) / math.sqrt(2)
    psi_n = hermite_function_matrix(u, N)[:, N]
    psi_0 = math.pi ** -0.25 * np.exp(-0.5 * v * v)
    out = branch.prefactor * psi_n * psi_0
    return complex(out[0]) if shape == () else out.reshape(shape)


def phase_integral_amplitude(
    N: int,
    R: float,
    theta: float,
    k: int,
    x1,
    x2,
    M: int | None = None,
    _check: bool = True,
):
    """Branch amplitude from the coherent-ring representation (oracle path).

    Integrates f_phi times the pair of coherent-state wavefunctions with mode
    phases (phi + s1 theta, phi + s2 theta) over the uniform phi grid, with
    all three phase factors of each Gaussian wavepacket included.  The log
    magnitudes of f_phi and the Gaussians are combined before exponentiation,
    so large N and R never overflow.

    The integral is recomputed on a doubled grid; if the two results differ
    by more than 1e-9 a ConvergenceError is raised and the finer value is
    never returned silently.
    """
    if k not in BRANCH_SIGNS:
        raise ValueError(f"branch index must be one of {BRANCHES}, got {k}")
    if N < 1:
        raise ValueError(f"phase integral needs N >= 1, got {N}")
    if R <= 0:
        raise ValueError(f"R must be positive, got {R}")
    if M is None:
        M = 8 * N + 64
    if M < 8 * N + 64:
        raise ValueError(f"phase grid M={M} too coarse for N={N}; need >= {8 * N + 64}")
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    shape = np.broadcast_shapes(x1.shape, x2.shape)
    p1 = np.broadcast_to(x1, shape).ravel()
    p2 = np.broadcast_to(x2, shape).ravel()

    coarse = _ring_sum(N, R, theta, k, p1, p2, M)
    if not _check:
        out = coarse
    else:
        fine = _ring_sum(N, R, theta, k, p1, p2, 2 * M)
        diff = float(np.max(np.abs(fine - coarse))) if fine.size else 0.0
        if diff > 1e-9:
            raise ConvergenceError(
                f"phase integral not converged: doubling M={M} moved the result by {diff:.3e}"
            )
        out = fine
    return complex(out[0]) if shape == () else out.reshape(shape)


def _ring_sum(N, R, theta, k, x1, x2, M, chunk=8192):
    s1, s2 = BRANCH_SIGNS[k]
    alpha0 = R / math.sqrt(2.0)
    log_f = f_phi_log_magnitude(N, R)
    phis = 2.0 * math.pi * np.arange(M) / M
    mu1 = phis + s1 * theta
    mu2 = phis + s2 * theta
    # sqrt(2) * alpha0 = R
    x01, p01 = R * np.cos(mu1), R * np.sin(mu1)
    x02, p02 = R * np.cos(mu2), R * np.sin(mu2)
    out = np.empty(x1.size, dtype=complex)
    for lo in range(0, x1.size, max(1, chunk // max(M, 1))):
        hi = min(x1.size, lo + max(1, chunk // max(M, 1)))
        c1 = x1[lo:hi, None]
        c2 = x2[lo:hi, None]
        log_mag = log_f - 0.5 * (c1 - x01) ** 2 - 0.5 * (c2 - x02) ** 2 - 0.5 * math.log(math.pi)
        phase = -N * phis + p01 * c1 - 0.5 * x01 * p01 + p02 * c2 - 0.5 * x02 * p02
        out[lo:hi] = np.exp(log_mag + 1j * phase).sum(axis=1) * (2.0 * math.pi / M)
    return out


def outcome_amplitude(
    N: int, theta: float, sigma1: float, sigma2: float, pattern: str, x1, x2
):
    """Postselected amplitude for one detector pattern: sum_k g_k psi_k(x1, x2)."""
    outcome = detector_outcome(pattern, sigma1, sigma2)
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    shape = np.broadcast_shapes(x1.shape, x2.shape)
    out = np.zeros(shape if shape else (1,), dtype=complex).ravel()
    for k in BRANCHES:
        amp = hermite_amplitude(branch_state(N, theta, k), x1, x2)
        out += outcome.branch_multipliers[k - 1] * np.atleast_1d(amp).ravel()
    return complex(out[0]) if shape == () else out.reshape(shape)


def total_outcome_norm(
    N: int,
    theta: float,
    sigma1: float,
    sigma2: float,
    grid_points: int = 200,
    margin: float = 6.0,
) -> float:
    """Total probability over all four patterns and all of quadrature space.

    Gauss-Legendre tensor grid on [-(sqrt(N)+margin), sqrt(N)+margin]^2; the
    margin covers the unit-width coherent uncertainty circles plus tails.
    Should be 1 for any settings: the interferometers are unitary.
    """
    half = math.sqrt(N) + margin
    nodes, weights = gauss_legendre(grid_points, -half, half)
    X1, X2 = np.meshgrid(nodes, nodes, indexing="ij")
    W = np.outer(weights, weights)
    total = 0.0
    for pattern in PATTERNS:
        amp = outcome_amplitude(N, theta, sigma1, sigma2, pattern, X1, X2)
        total += float(np.sum(W * np.abs(amp) ** 2))
    return total
