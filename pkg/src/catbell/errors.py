"""Exception types shared across the package."""


class ConvergenceError(RuntimeError):
    """A quadrature or phase-grid refinement failed its self-consistency check."""


class TruncationError(RuntimeError):
    """A Fock-space truncation discarded more probability mass than allowed."""


class DegenerateWindowError(RuntimeError):
    """All detector-pattern probabilities vanish in the requested window."""
