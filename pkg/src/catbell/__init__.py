"""catbell: Bell-test simulation for phase-entangled cat states.

Splitting a photon number state on a balanced beam splitter entangles the
phases of the two output beams.  This package builds that state, applies
single-photon-controlled Kerr phase branches, postselects on homodyne
quadrature windows, and evaluates the CHSH parameter, with and without
photon loss.
"""

from .bell import (
    HomodyneWindow,
    MeasurementSettings,
    TSIRELSON_BOUND,
    chsh,
    chsh_map,
    correlator,
    fringe_visibility,
    optimize_chsh,
    postselection_rate,
    window_probability,
)
from .errors import ConvergenceError, DegenerateWindowError, TruncationError
from .interferometer import (
    BranchState,
    DetectorOutcome,
    branch_state,
    closed_form_amplitude,
    detector_outcome,
    hermite_amplitude,
    outcome_amplitude,
    phase_integral_amplitude,
)
from .loss import (
    LossModel,
    LossOutcomeAmplitude,
    brute_force_pattern_probability,
    chsh_vs_loss,
    kraus_weight,
    lossy_pattern_probability,
)
from .special_fn import gauss_legendre, hermite_functions, log_binomial
from .states import (
    CoherentRing,
    TwoModeFockVector,
    coherent_wavefunction,
    f_phi,
    reconstruct_number_state,
    split_number_state,
)

__version__ = "0.1.0"
