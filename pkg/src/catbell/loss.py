"""Photon loss as beam splitters into traced-out environment modes.

Loss happens in transmission: each output beam of the initial splitter meets
a beam splitter of intensity transmissivity eta whose reflected port is never
observed.  Organising the environment by the number of photons lost from
each mode, (l1, l2), gives an incoherent sum over loss records; within one
record the four Kerr branches still add coherently.

The lost photons split off *before* the Kerr media, so they carry no branch
phase: in record (l1, l2) branch (s1, s2) phases only the surviving photons,
exp(i theta (s1 m1 + s2 m2)) with (m1, m2) the post-loss occupations.  An
alternative bookkeeping that applies the branch phases to the pre-loss
occupations (equivalently, lets the lost photons carry Kerr phases into the
environment) is kept as ``phasing="pre_loss"`` for comparison; the two are
NOT equivalent, and the four-mode brute-force simulation below is the
arbiter (see the decisions ledger and CONVENTIONS.md).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .interferometer import (
    BRANCHES,
    BRANCH_SIGNS,
    PATTERNS,
    _split_magnitudes,
    outcome_multiplier_table,
)
from .special_fn import hermite_function_matrix, log_binomial

__all__ = [
    "LossModel",
    "LossOutcomeAmplitude",
    "kraus_weight",
    "loss_records",
    "record_amplitudes",
    "lossy_pattern_probability",
    "chsh_vs_loss",
    "brute_force_pattern_probability",
]


@dataclass(frozen=True)
class LossModel:
    """Identical per-path intensity transmissivity for both beams.

    The mean-loss parametrization counts photons lost *per path*: each beam
    carries N/2 photons on average, so n_bar = (1 - eta) N / 2 and
    eta = 1 - 2 n_bar / N.  This calibration is pinned by the S = 2
    crossings of the optimized loss curves (see the decisions ledger).
    """

    eta: float

    def __post_init__(self):
        if not (0.0 < self.eta <= 1.0):
            raise ValueError(f"transmissivity must be in (0, 1], got {self.eta}")

    def mean_loss(self, N: int) -> float:
        """Mean number of photons lost per path, (1 - eta) N / 2."""
        return (1.0 - self.eta) * N / 2.0

    @classmethod
    def from_mean_loss(cls, n_bar: float, N: int) -> "LossModel":
        if not (0.0 <= n_bar < N / 2.0):
            raise ValueError(f"per-path mean loss must lie in [0, N/2={N/2}), got {n_bar}")
        return cls(eta=1.0 - 2.0 * n_bar / N)


@dataclass(frozen=True)
class LossOutcomeAmplitude:
    """Reduced branch coefficients after losing (l1, l2) photons.

    ``coefficients[k-1, m]`` multiplies |N'-m, m> for branch k, with
    N' = N - l1 - l2 surviving photons.
    """

    lost: tuple[int, int]
    surviving: int
    coefficients: np.ndarray


def kraus_weight(n: int, l: int, eta: float) -> float:
    """Amplitude sqrt(C(n,l) eta^(n-l) (1-eta)^l) for losing l of n photons."""
    if not (0 <= l <= n):
        raise ValueError(f"need 0 <= l <= n, got l={l}, n={n}")
    if not (0.0 < eta <= 1.0):
        raise ValueError(f"transmissivity must be in (0, 1], got {eta}")
    if l == 0:
        return math.exp(0.5 * (n * math.log(eta))) if eta < 1.0 else (1.0 if n >= 0 else 0.0)
    if eta == 1.0:
        return 0.0
    return math.exp(
        0.5 * (log_binomial(n, l) + (n - l) * math.log(eta) + l * math.log(1.0 - eta))
    )


def _kraus_matrix(N: int, eta: float) -> np.ndarray:
    """K[m, l] = kraus_weight(m, l, eta) for 0 <= l <= m <= N (0 above diagonal)."""
    K = np.zeros((N + 1, N + 1))
    for m in range(N + 1):
        for l in range(m + 1):
            K[m, l] = kraus_weight(m, l, eta)
    return K


def loss_records(
    N: int, theta: float, eta: float, phasing: str = "post_loss"
) -> list[LossOutcomeAmplitude]:
    """All loss records (l1, l2) with their reduced branch coefficient vectors.

    With eta = 1 the single record (0, 0) reproduces the lossless branch
    states exactly.  Summed over records, each branch's squared norm is 1
    for any eta (the channel preserves trace).
    """
    if phasing not in ("post_loss", "pre_loss"):
        raise ValueError(f"unknown phasing rule {phasing!r}")
    if N < 1:
        raise ValueError(f"loss records need N >= 1, got {N}")
    c = _split_magnitudes(N)
    K = _kraus_matrix(N, eta)
    records = []
    for l1 in range(N + 1):
        for l2 in range(N + 1 - l1):
            if eta == 1.0 and (l1 or l2):
                continue
            surviving = N - l1 - l2
            m = np.arange(surviving + 1)
            n_pre = m + l2  # pre-loss photon count in mode 2
            mags = c[n_pre] * K[N - n_pre, l1] * K[n_pre, l2]
            coeffs = np.empty((4, surviving + 1), dtype=complex)
            for k in BRANCHES:
                s1, s2 = BRANCH_SIGNS[k]
                if phasing == "post_loss":
                    phase = theta * (s1 * (surviving - m) + s2 * m)
                else:
                    phase = theta * (s1 * (N - n_pre) + s2 * n_pre)
                coeffs[k - 1] = mags * np.exp(1j * phase)
            records.append(
                LossOutcomeAmplitude(lost=(l1, l2), surviving=surviving, coefficients=coeffs)
            )
    return records


def record_amplitudes(
    N: int, theta: float, eta: float, x1, x2, phasing: str = "post_loss"
) -> np.ndarray:
    """Branch amplitudes per loss record on a set of quadrature points.

    Returns a complex array of shape ``(n_records, 4, n_points)``; records
    are ordered by (l1, l2) lexicographically, so summation order is fixed
    regardless of how callers parallelize.
    """
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    records = loss_records(N, theta, eta, phasing)
    m1 = hermite_function_matrix(x1, N)
    m2 = hermite_function_matrix(x2, N)
    out = np.empty((len(records), 4, x1.size), dtype=complex)
    for r, rec in enumerate(records):
        s = rec.surviving
        prods = m1[:, s::-1] * m2[:, : s + 1]  # column m: psi_{N'-m}(x1) psi_m(x2)
        out[r] = rec.coefficients @ prods.T
    return out


def lossy_pattern_probability(
    N: int,
    theta: float,
    sigma1: float,
    sigma2: float,
    pattern: str,
    window,
    loss: LossModel,
) -> float:
    """Windowed probability of one detector pattern with photon loss.

    Incoherent sum over loss records of the coherent branch combination for
    the pattern, integrated over the homodyne acceptance window.
    """
    from .bell import window_probability

    return window_probability(N, theta, sigma1, sigma2, pattern, window, loss=loss)


def chsh_vs_loss(N: int, theta: float, window, n_bar_grid) -> list[dict]:
    """Optimized |S| as a function of the mean photon loss n_bar.

    Each grid point maps n_bar -> eta = 1 - n_bar / N and reruns the full
    two-stage optimization; the previous point's optimum seeds the next so
    the emitted curve is continuous.  Returns one dict per point with keys
    ``n_bar``, ``eta``, ``s_max``, ``settings``.
    """
    from .bell import optimize_chsh

    if window.delta_x != 0:
        raise ValueError("loss sweeps are defined in the point-window limit delta_x = 0")
    rows = []
    seed = None
    for n_bar in n_bar_grid:
        model = LossModel.from_mean_loss(float(n_bar), N) if n_bar > 0 else LossModel(1.0)
        s_max, settings = optimize_chsh(N, theta, window, seed_settings=seed, loss=model)
        seed = settings
        rows.append(
            {"n_bar": float(n_bar), "eta": model.eta, "s_max": s_max, "settings": settings}
        )
    return rows


def brute_force_pattern_probability(
    N: int,
    theta: float,
    sigma1: float,
    sigma2: float,
    pattern: str,
    window,
    eta: float,
    kerr_first: bool = False,
) -> float:
    """Four-mode pure-state simulation: system x environment, explicit trace.

    Builds the full Fock tensor over (mode1, mode2, env1, env2), applies the
    loss beam splitters as exact unitaries on an environment vacuum, applies
    the Kerr branch phases to the system modes, postselects the detector
    pattern, and traces the environment by summing the window probability
    over every environment occupation.  Exponential in N; intended for
    N <= 4 as the authoritative check of the record-based production path.

    ``kerr_first=True`` applies the branch phases before the loss splitters
    (lost photons then carry Kerr phases into the environment), matching the
    ``pre_loss`` record phasing instead of the physical layout.
    """
    from .bell import window_nodes

    if pattern not in PATTERNS:
        raise ValueError(f"pattern must be one of {PATTERNS}, got {pattern!r}")
    if not (0.0 < eta <= 1.0):
        raise ValueError(f"transmissivity must be in (0, 1], got {eta}")
    dim = N + 1
    c = _split_magnitudes(N)
    K = _kraus_matrix(N, eta)
    i_pow = np.array([1.0, 1.0j, -1.0, -1.0j])

    def apply_loss(T):
        # env modes start in vacuum, so each splitter only sees |n, 0> inputs
        out1 = np.zeros_like(T)
        for n1 in range(dim):
            for l in range(n1 + 1):
                out1[n1 - l, :, l, :] += T[n1, :, 0, :] * K[n1, l] * i_pow[l % 4]
        out2 = np.zeros_like(out1)
        for n2 in range(dim):
            for l in range(n2 + 1):
                out2[:, n2 - l, :, l] += out1[:, n2, :, 0] * K[n2, l] * i_pow[l % 4]
        return out2

    n_idx = np.arange(dim)
    g = outcome_multiplier_table(sigma1, sigma2)[PATTERNS.index(pattern)]
    amp = np.zeros((dim, dim, dim, dim), dtype=complex)
    for k in BRANCHES:
        s1, s2 = BRANCH_SIGNS[k]
        T = np.zeros((dim, dim, dim, dim), dtype=complex)
        T[N - n_idx, n_idx, 0, 0] = c
        kerr = np.exp(1j * theta * (s1 * n_idx[:, None] + s2 * n_idx[None, :]))
        if kerr_first:
            T *= kerr[:, :, None, None]
            T = apply_loss(T)
        else:
            T = apply_loss(T)
            T *= kerr[:, :, None, None]
        amp += g[k - 1] * T

    x1, x2, w = window_nodes(window)
    m1 = hermite_function_matrix(x1, N)
    m2 = hermite_function_matrix(x2, N)
    total = 0.0
    for e1 in range(dim):
        for e2 in range(dim):
            block = amp[:, :, e1, e2]
            if not np.any(block):
                continue
            psi = np.einsum("pn,nm,pm->p", m1, block, m2)  # amplitude at each point
            total += float(np.sum(w * np.abs(psi) ** 2))
    return total
