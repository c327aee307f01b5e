"""Exception hierarchy for certlq.

Every failure mode raised by the library derives from :class:`CertlqError`,
so callers can catch one type at the top of an experiment loop.
"""

from __future__ import annotations


class CertlqError(Exception):
    """Base class for all certlq errors."""


class ConfigError(CertlqError):
    """Invalid or unparsable run configuration."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)


class DimensionMismatch(CertlqError):
    """Matrix or vector shapes are inconsistent; message names the block."""


class NonFiniteInput(CertlqError):
    """An input contains NaN or infinity."""


class MarginViolation(CertlqError):
    """An accepted Riccati iterate violated the saddle solvability margin."""


class NonConvergence(CertlqError):
    """Fixed-point iteration hit its iteration cap without converging."""


class SingularH(CertlqError):
    """The saddle block matrix H(P) is numerically singular."""


class SingularSchurBlock(CertlqError):
    """A Schur-complement block in the explicit gain formulas is singular."""


class UnstableClosedLoop(CertlqError):
    """A closed-loop matrix has spectral radius at or above one."""


class EigenFailure(CertlqError):
    """The underlying eigenvalue routine failed to converge."""


class NegativeLogDetGap(CertlqError):
    """Cached log det(V) fell below its regularization floor: corrupted state."""


class NumericsError(CertlqError):
    """Internal numerical self-audit failed (incremental state drifted)."""


class StateBlowup(CertlqError):
    """Simulated state norm exceeded the blow-up threshold."""

    def __init__(self, t: int, x_norm: float, trace=None):
        self.t = t
        self.x_norm = x_norm
        self.trace = trace
        super().__init__(f"state norm {x_norm:.3e} exceeded blow-up threshold at step {t}")


class CertificationCollapse(CertlqError):
    """Surrogate certification failed for too many consecutive episodes."""

    def __init__(self, episode: int, consecutive: int, trace=None):
        self.episode = episode
        self.consecutive = consecutive
        self.trace = trace
        super().__init__(
            f"certification failed for {consecutive} consecutive episodes (at episode {episode})"
        )
