"""Exception types raised by validation and solver contracts."""


class ModelValidationError(ValueError):
    """Model matrices violate an invariant (shape, hermiticity, pairing)."""


class RateResolutionError(ValueError):
    """Qubit rate system unsolvable for the requested parameters."""


class NonUniqueSteadyStateError(ValueError):
    """Liouvillian null space is degenerate; no unique stationary state."""


class RankDeficientSteadyStateError(ValueError):
    """Stationary state has a (numerically) zero eigenvalue; the entropy
    functionals -ln(pi_n / <pi>) are undefined."""


class StepSizeError(ValueError):
    """Per-step jump probability too large for the requested dt."""


class OffGridError(ValueError):
    """Requested time does not lie on the record's sampling grid."""


class InsufficientHorizonError(ValueError):
    """Entropy series does not cover the stopping rule's time cap."""


class EnumerationLimitError(ValueError):
    """Exhaustive path enumeration would exceed the configured cap."""


class NoBackwardModelError(ValueError):
    """A jump channel lacks a detailed-balance partner, so the
    time-reversed process is undefined."""
