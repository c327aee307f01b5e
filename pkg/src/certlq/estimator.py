"""Online ridge identification and the self-normalized confidence ellipsoid.

Maintains the regularized design matrix V = lambda*I + sum z_t z_t' through
rank-one Cholesky updates, the cross-moment S = sum x_{t+1} z_t', and the
cached log det(V) that drives the episode trigger.  The ridge estimate is
Theta_hat = S V^{-1}, and the ellipsoid radius is

    beta = sigma_w * sqrt(n*(log det V - d*log lambda) + 2*log(1/delta))
           + sqrt(lambda) * S_theta.

Membership is evaluated in matrix form, tr(Delta V Delta') <= beta^2, which
is the weighted norm the vectorized regression induces regardless of the
Kronecker stacking order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ._stepper import design_rank1
from .errors import DimensionMismatch, NegativeLogDetGap, NonFiniteInput, NumericsError
from .model import Dims, NoiseSpec, ThetaMatrix

REFRESH_EVERY = 1000
LOGDET_AUDIT_TOL = 1e-8


class DesignState:
    """Running design-matrix state; single-owner mutable.

    The arrays V, S and chol are updated in place (by :meth:`update` or by
    the step kernel operating directly on them); ``logdet_v`` is maintained
    incrementally and audited against a fresh factorization every
    ``refresh_every`` updates.
    """

    def __init__(self, dims: Dims, lam: float, refresh_every: int = REFRESH_EVERY):
        if not lam > 0:
            raise ValueError(f"ridge parameter lambda must be > 0, got {lam}")
        self.dims = dims
        self.lam = float(lam)
        self.refresh_every = int(refresh_every)
        d = dims.d
        self.V = lam * np.eye(d)
        self.S = np.zeros((dims.n, d))
        self.chol = math.sqrt(lam) * np.eye(d)
        self.logdet_v = d * math.log(lam)
        self.t = 0
        self._since_refresh = 0

    def update(self, z: np.ndarray, x_next: np.ndarray) -> "DesignState":
        """Fold one data pair (z_t, x_{t+1}) into the design state."""
        z = np.asarray(z, dtype=float).reshape(-1)
        x_next = np.asarray(x_next, dtype=float).reshape(-1)
        if z.shape != (self.dims.d,):
            raise DimensionMismatch(f"regressor z must have length {self.dims.d}, got {z.shape[0]}")
        if x_next.shape != (self.dims.n,):
            raise DimensionMismatch(f"x_next must have length {self.dims.n}, got {x_next.shape[0]}")
        if not (np.all(np.isfinite(z)) and np.all(np.isfinite(x_next))):
            raise NonFiniteInput("design update rejected non-finite input")
        logdet = design_rank1(self.V, self.S, self.chol, z, x_next)
        self.advance(1, logdet)
        return self

    def advance(self, steps: int, logdet: float) -> None:
        """Account for ``steps`` in-place updates done externally (step kernel)."""
        self.t += steps
        self.logdet_v = logdet
        self._since_refresh += steps
        if self._since_refresh >= self.refresh_every:
            self.audit_and_refresh()

    def steps_until_refresh(self) -> int:
        return self.refresh_every - self._since_refresh

    def logdet_drift(self) -> float:
        """|cached log det - log det from a fresh factorization of V|."""
        fresh = np.linalg.cholesky(self.V)
        return abs(2.0 * float(np.sum(np.log(np.diag(fresh)))) - self.logdet_v)

    def audit_and_refresh(self) -> None:
        """Check incremental drift and replace the factor with a fresh one."""
        lam_min = float(np.linalg.eigvalsh(self.V)[0])
        if lam_min < self.lam - 1e-9:
            raise NumericsError(
                f"design matrix lost its regularization floor "
                f"(lambda_min={lam_min:.6e} < lambda={self.lam})"
            )
        fresh = np.linalg.cholesky(self.V)
        fresh_logdet = 2.0 * float(np.sum(np.log(np.diag(fresh))))
        if abs(fresh_logdet - self.logdet_v) > LOGDET_AUDIT_TOL:
            raise NumericsError(
                f"incremental logdet drifted {abs(fresh_logdet - self.logdet_v):.3e} "
                f"from batch value after {self.t} updates"
            )
        self.chol[:, :] = fresh
        self.logdet_v = fresh_logdet
        self._since_refresh = 0


@dataclass(frozen=True)
class ConfidenceSet:
    """Ellipsoid snapshot {Theta : tr((Theta-center) V (Theta-center)') <= beta^2}."""

    center: ThetaMatrix
    V: np.ndarray
    beta: float
    delta: float
    s_theta: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"confidence radius beta must be > 0, got {self.beta}")
        V = np.array(self.V, dtype=float)
        V.flags.writeable = False
        object.__setattr__(self, "V", V)

    def contains(self, candidate: ThetaMatrix) -> bool:
        return contains(self, candidate)


def ridge_estimate(state: DesignState) -> ThetaMatrix:
    """Theta_hat = S V^{-1}, solved through the maintained Cholesky factor."""
    sol = scipy.linalg.cho_solve((state.chol, True), state.S.T)
    return ThetaMatrix(sol.T, state.dims)


def confidence_radius(
    state: DesignState,
    noise: NoiseSpec,
    delta: float,
    s_theta: float,
    lam: float | None = None,
) -> float:
    """Self-normalized ellipsoid radius from the cached log det(V)."""
    if not 0 < delta < 1:
        raise ValueError(f"delta must be in (0, 1), got {delta}")
    if s_theta < 0:
        raise ValueError(f"s_theta must be >= 0, got {s_theta}")
    lam = state.lam if lam is None else float(lam)
    gap = state.logdet_v - state.dims.d * math.log(lam)
    if gap < -1e-9:
        raise NegativeLogDetGap(
            f"log det(V) = {state.logdet_v:.6e} below its floor d*log(lambda); state corrupted"
        )
    gap = max(gap, 0.0)
    return noise.sigma_w * math.sqrt(state.dims.n * gap + 2.0 * math.log(1.0 / delta)) + math.sqrt(
        lam
    ) * s_theta


def make_confidence_set(
    state: DesignState, noise: NoiseSpec, delta: float, s_theta: float
) -> ConfidenceSet:
    """Snapshot the current estimate and radius into an immutable ellipsoid."""
    return ConfidenceSet(
        center=ridge_estimate(state),
        V=state.V.copy(),
        beta=confidence_radius(state, noise, delta, s_theta),
        delta=delta,
        s_theta=s_theta,
    )


def contains(conf: ConfidenceSet, candidate: ThetaMatrix) -> bool:
    """Weighted-norm membership test tr(Delta V Delta') <= beta^2."""
    if candidate.Theta.shape != conf.center.Theta.shape:
        raise DimensionMismatch(
            f"candidate shape {candidate.Theta.shape} vs center {conf.center.Theta.shape}"
        )
    delta_m = candidate.Theta - conf.center.Theta
    wnorm_sq = float(np.trace(delta_m @ conf.V @ delta_m.T))
    return wnorm_sq <= conf.beta**2


def min_eig_ratio(state: DesignState) -> float:
    """lambda_min(V)/t, the empirical persistent-excitation proxy."""
    if state.t < 1:
        raise ValueError("min_eig_ratio needs at least one update")
    return float(np.linalg.eigvalsh(state.V)[0]) / state.t


def l2_error_bound(beta: float, nu: float, t_k: int) -> float:
    """Surrogate l2 error bound 2*beta / sqrt(nu * t_k)."""
    if not nu > 0:
        raise ValueError(f"nu must be > 0, got {nu}")
    if t_k < 1:
        raise ValueError(f"t_k must be >= 1, got {t_k}")
    return 2.0 * beta / math.sqrt(nu * t_k)
