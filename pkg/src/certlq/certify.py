"""Regularity certification and surrogate shrinkage.

A parameter is *regular* for margins (mu, gamma) when its GARE admits a
stabilizing saddle solution whose solvability margin is at least mu and
whose closed loop has spectral radius at most 1 - gamma.  The shrinkage
step searches the segment between the previous certified surrogate and the
new ridge estimate for the largest coefficient alpha whose point is both
regular and inside the current confidence ellipsoid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CertlqError
from .estimator import ConfidenceSet, contains
from .model import CostSpec, ThetaMatrix, split_theta
from .riccati import GareSolution, SolverOptions, solve_gare

COARSE_MIN_EXP = 20  # coarse backtracking stops at alpha = 2^-20


@dataclass(frozen=True)
class RegularityMargins:
    """Certification margins: solvability mu > 0, spectral gap gamma in (0, 1)."""

    mu: float
    gamma: float

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"mu must be > 0, got {self.mu}")
        if not 0 < self.gamma < 1:
            raise ValueError(f"gamma must be in (0, 1), got {self.gamma}")


@dataclass(frozen=True)
class CertifiedModel:
    """Deployed surrogate with its shrinkage coefficient and certification.

    When ``failure_flag`` is False the solution satisfies the margins and
    (for episodes >= 1) the surrogate lies in the episode's confidence set.
    Episode 0 is the externally supplied initial model; it carries
    ``in_confidence=True`` vacuously since no data has been seen.
    """

    theta: ThetaMatrix
    alpha: float
    solution: GareSolution | None
    in_confidence: bool
    episode: int
    failure_flag: bool

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")


def is_regular(
    theta: ThetaMatrix,
    cost: CostSpec,
    margins: RegularityMargins,
    opts: SolverOptions = SolverOptions(),
) -> tuple[bool, GareSolution | None]:
    """Test GARE solvability with margins; never raises on solver failure."""
    gated = SolverOptions(
        tol=opts.tol, max_iter=opts.max_iter, mu_floor=max(opts.mu_floor, margins.mu)
    )
    model = split_theta(theta, theta.dims)
    try:
        sol = solve_gare(model, cost, gated)
    except (CertlqError, np.linalg.LinAlgError):
        return False, None
    if sol.margin < margins.mu or sol.rho_cl > 1.0 - margins.gamma:
        return False, None
    return True, sol


def shrink(
    theta_hat: ThetaMatrix,
    theta_prev: ThetaMatrix,
    conf: ConfidenceSet,
    cost: CostSpec,
    margins: RegularityMargins,
    tol_alpha: float = 1e-3,
    opts: SolverOptions = SolverOptions(),
    episode: int = 0,
) -> CertifiedModel:
    """Select the certified surrogate along the segment prev -> hat.

    Feasibility of alpha means theta(alpha) = (1-alpha)*prev + alpha*hat is
    inside ``conf`` and regular.  alpha = 1 is tried first; otherwise a
    coarse power-of-two backtracking locates a feasible point and bisection
    refines the bracket to width ``tol_alpha``.  If nothing on the segment
    (including alpha = 0) is feasible, the previous surrogate is retained
    with ``failure_flag`` set so the control loop can keep going.
    """
    if not tol_alpha > 0:
        raise ValueError(f"tol_alpha must be > 0, got {tol_alpha}")
    dims = theta_prev.dims
    probes: dict[float, tuple[bool, GareSolution | None]] = {}

    def point(alpha: float) -> ThetaMatrix:
        return ThetaMatrix((1.0 - alpha) * theta_prev.Theta + alpha * theta_hat.Theta, dims)

    def feasible(alpha: float) -> tuple[bool, GareSolution | None]:
        if alpha in probes:
            return probes[alpha]
        th = point(alpha)
        if not contains(conf, th):
            probes[alpha] = (False, None)
        else:
            probes[alpha] = is_regular(th, cost, margins, opts)
        return probes[alpha]

    def certified(alpha: float, sol: GareSolution) -> CertifiedModel:
        return CertifiedModel(
            theta=point(alpha),
            alpha=alpha,
            solution=sol,
            in_confidence=True,
            episode=episode,
            failure_flag=False,
        )

    ok, sol = feasible(1.0)
    if ok:
        return certified(1.0, sol)

    alpha_lo = None
    for j in range(1, COARSE_MIN_EXP + 1):
        a = 2.0**-j
        ok, sol = feasible(a)
        if ok:
            alpha_lo = a
            break
    if alpha_lo is not None:
        lo, hi = alpha_lo, 2.0 * alpha_lo  # hi was already probed infeasible
        while hi - lo > tol_alpha:
            mid = (lo + hi) / 2.0
            ok, _ = feasible(mid)
            if ok:
                lo = mid
            else:
                hi = mid
        _, sol = feasible(lo)
        return certified(lo, sol)

    ok, sol = feasible(0.0)
    if ok:
        return certified(0.0, sol)

    # Nothing on the segment is feasible: retain the previous surrogate.
    # It is regular by construction, so this solve succeeds; only the
    # confidence-membership certificate is lost.
    _, prev_sol = is_regular(theta_prev, cost, margins, opts)
    return CertifiedModel(
        theta=theta_prev,
        alpha=0.0,
        solution=prev_sol,
        in_confidence=False,
        episode=episode,
        failure_flag=True,
    )
