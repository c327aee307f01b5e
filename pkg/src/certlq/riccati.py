"""Zero-sum game Riccati machinery.

Solves the generalized algebraic Riccati equation (GARE)

    P = Q + A'PA - [A'PB1  A'PB2] H(P)^{-1} [B1'PA; B2'PA],

    H(P) = [[Ru + B1'PB1,  B1'PB2     ],
            [B2'PB1,       -Rv + B2'PB2]],

for the stabilizing saddle solution, derives the saddle gains, solves
closed-loop discrete Lyapunov equations, and evaluates the residual map

    F(P) = P - (Q + Acl'P Acl + K'Ru K - L'Rv L)

at the stage saddle pair (K, L) of P.  The solver is a plain fixed-point
iteration from P0 = Q; each accepted iterate is certified against the
solvability margin lambda_min(Rv - B2'PB2) before it is used.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    EigenFailure,
    MarginViolation,
    NonConvergence,
    NumericsError,
    SingularH,
    SingularSchurBlock,
    UnstableClosedLoop,
)
from .model import CostSpec, SystemModel

H_CONDITION_LIMIT = 1e12
LYAPUNOV_MAX_DIM = 32


@dataclass(frozen=True)
class SolverOptions:
    """Fixed-point solver knobs.

    tol: Frobenius tolerance on successive iterates (and certified residual).
    max_iter: iteration cap before NonConvergence.
    mu_floor: minimum solvability margin an accepted iterate must keep.
    """

    tol: float = 1e-10
    max_iter: int = 10_000
    mu_floor: float = 0.0

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError(f"tol must be > 0, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.mu_floor < 0:
            raise ValueError(f"mu_floor must be >= 0, got {self.mu_floor}")


@dataclass(frozen=True)
class GareSolution:
    """Certified stabilizing saddle solution of the GARE.

    Construction re-checks every invariant: P symmetric PSD, positive
    solvability margin, Schur-stable closed loop, residual within tol.
    """

    P: np.ndarray
    K: np.ndarray
    L: np.ndarray
    H: np.ndarray
    margin: float
    rho_cl: float
    residual: float
    iterations: int
    tol: float

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        asym = float(np.abs(P - P.T).max())
        if asym > 1e-10:
            raise NumericsError(f"GARE solution asymmetry {asym:.3e} exceeds 1e-10")
        lam_min = float(np.linalg.eigvalsh(P)[0])
        if lam_min < -1e-10:
            raise NumericsError(f"GARE solution not PSD (lambda_min={lam_min:.3e})")
        if not self.margin > 0:
            raise MarginViolation(f"solvability margin {self.margin:.3e} is not positive")
        if not self.rho_cl < 1:
            raise UnstableClosedLoop(f"closed-loop spectral radius {self.rho_cl:.6f} >= 1")
        if self.residual > self.tol:
            raise NumericsError(
                f"GARE residual {self.residual:.3e} exceeds tolerance {self.tol:.1e}"
            )
        for name in ("P", "K", "L", "H"):
            a = np.array(getattr(self, name), dtype=float)
            a.flags.writeable = False
            object.__setattr__(self, name, a)


def _saddle_margin(P: np.ndarray, m: SystemModel, c: CostSpec) -> float:
    """lambda_min(Rv - B2' P B2), the inner-maximization solvability margin."""
    return float(np.linalg.eigvalsh(c.Rv - m.B2.T @ P @ m.B2)[0])


def _assemble_h(P: np.ndarray, m: SystemModel, c: CostSpec) -> np.ndarray:
    return np.block(
        [
            [c.Ru + m.B1.T @ P @ m.B1, m.B1.T @ P @ m.B2],
            [m.B2.T @ P @ m.B1, -c.Rv + m.B2.T @ P @ m.B2],
        ]
    )


def _check_h(H: np.ndarray) -> None:
    if not np.all(np.isfinite(H)):
        raise SingularH("H(P) contains non-finite entries")
    cond = np.linalg.cond(H)
    if not np.isfinite(cond) or cond > H_CONDITION_LIMIT:
        raise SingularH(f"H(P) condition number {cond:.3e} exceeds {H_CONDITION_LIMIT:.0e}")


def gains_from_p(P: np.ndarray, m: SystemModel, c: CostSpec):
    """Saddle gains at a given value matrix: [K; L] = H(P)^{-1} [B1'PA; B2'PA].

    Returns (K, L, H).
    """
    H = _assemble_h(P, m, c)
    _check_h(H)
    G = np.vstack([m.B1.T @ P @ m.A, m.B2.T @ P @ m.A])
    KL = np.linalg.solve(H, G)
    m1 = m.B1.shape[1]
    return KL[:m1], KL[m1:], H


def gains_schur(P: np.ndarray, m: SystemModel, c: CostSpec):
    """Explicit Schur-complement form of the saddle gains.

    Algebraically identical to the block solve in :func:`gains_from_p`;
    kept as an independent code path for cross-checking.
    """
    B1, B2, A = m.B1, m.B2, m.A
    Su = c.Ru + B1.T @ P @ B1
    Sv = -c.Rv + B2.T @ P @ B2
    for name, blk in (("-Rv + B2'PB2", Sv), ("Ru + B1'PB1", Su)):
        cond = np.linalg.cond(blk)
        if not np.isfinite(cond) or cond > H_CONDITION_LIMIT:
            raise SingularSchurBlock(f"block ({name}) is numerically singular (cond={cond:.3e})")
    Sv_inv = np.linalg.inv(Sv)
    Su_inv = np.linalg.inv(Su)
    K = np.linalg.solve(
        Su - B1.T @ P @ B2 @ Sv_inv @ B2.T @ P @ B1,
        B1.T @ P @ A - B1.T @ P @ B2 @ Sv_inv @ B2.T @ P @ A,
    )
    L = np.linalg.solve(
        Sv - B2.T @ P @ B1 @ Su_inv @ B1.T @ P @ B2,
        B2.T @ P @ A - B2.T @ P @ B1 @ Su_inv @ B1.T @ P @ A,
    )
    return K, L


def closed_loop(m: SystemModel, K: np.ndarray, L: np.ndarray) -> np.ndarray:
    """A - B1 K - B2 L."""
    K = np.asarray(K, dtype=float)
    L = np.asarray(L, dtype=float)
    n = m.A.shape[0]
    if K.shape != (m.B1.shape[1], n):
        raise DimensionMismatch(f"K must have shape ({m.B1.shape[1]}, {n}), got {K.shape}")
    if L.shape != (m.B2.shape[1], n):
        raise DimensionMismatch(f"L must have shape ({m.B2.shape[1]}, {n}), got {L.shape}")
    return m.A - m.B1 @ K - m.B2 @ L


def spectral_radius(M: np.ndarray) -> float:
    """Largest eigenvalue modulus of a square matrix."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"spectral_radius needs a square matrix, got {M.shape}")
    try:
        ev = np.linalg.eigvals(M)
    except np.linalg.LinAlgError as e:
        raise EigenFailure(f"eigenvalue computation failed: {e}") from e
    return float(np.max(np.abs(ev)))


def gare_residual(P: np.ndarray, m: SystemModel, c: CostSpec) -> np.ndarray:
    """Residual map F(P) = P - (Q + Acl'P Acl + K'Ru K - L'Rv L) at P's saddle pair."""
    K, L, _ = gains_from_p(P, m, c)
    Acl = m.A - m.B1 @ K - m.B2 @ L
    Phi = c.Q + Acl.T @ P @ Acl + K.T @ c.Ru @ K - L.T @ c.Rv @ L
    return P - Phi


def solve_gare(m: SystemModel, c: CostSpec, opts: SolverOptions = SolverOptions()) -> GareSolution:
    """Fixed-point iteration for the stabilizing saddle solution.

    Iterates P <- Q + A'PA - G' H(P)^{-1} G with G = [B1'PA; B2'PA] from
    P0 = Q until successive iterates differ by less than opts.tol in
    Frobenius norm.  Every accepted iterate must keep the solvability
    margin above opts.mu_floor.

    Raises
    ------
    MarginViolation, SingularH, NonConvergence, UnstableClosedLoop
    """
    n = m.A.shape[0]
    if c.Q.shape != (n, n):
        raise DimensionMismatch(f"Q shape {c.Q.shape} inconsistent with n={n}")
    P = np.array(c.Q, dtype=float)
    margin = _saddle_margin(P, m, c)
    if margin < opts.mu_floor:
        raise MarginViolation(
            f"initial iterate margin {margin:.3e} below floor {opts.mu_floor:.3e}"
        )
    Bbar = np.hstack([m.B1, m.B2])
    m1 = m.B1.shape[1]
    converged = False
    iterations = opts.max_iter
    with np.errstate(over="ignore", invalid="ignore"):  # divergence is handled below
        for it in range(1, opts.max_iter + 1):
            H = _assemble_h(P, m, c)
            _check_h(H)
            G = Bbar.T @ P @ m.A
            KL = np.linalg.solve(H, G)
            Pn = c.Q + m.A.T @ P @ m.A - G.T @ KL
            Pn = (Pn + Pn.T) / 2.0
            if not np.all(np.isfinite(Pn)):
                raise NonConvergence(f"GARE iterate diverged to non-finite values at step {it}")
            gap = float(np.linalg.norm(Pn - P, "fro"))
            P = Pn
            margin = _saddle_margin(P, m, c)
            if margin < opts.mu_floor:
                raise MarginViolation(
                    f"iterate {it} margin {margin:.3e} below floor {opts.mu_floor:.3e}"
                )
            if gap < opts.tol:
                converged = True
                iterations = it
                break
    if not converged:
        raise NonConvergence(f"GARE iteration did not converge in {opts.max_iter} steps")
    K, L, H = gains_from_p(P, m, c)
    Acl = m.A - m.B1 @ K - m.B2 @ L
    rho = spectral_radius(Acl)
    if rho >= 1:
        raise UnstableClosedLoop(f"converged solution has rho(Acl)={rho:.6f} >= 1")
    residual = float(np.linalg.norm(gare_residual(P, m, c), "fro"))
    return GareSolution(
        P=P,
        K=K,
        L=L,
        H=H,
        margin=margin,
        rho_cl=rho,
        residual=residual,
        iterations=iterations,
        tol=opts.tol,
    )


def solve_lyapunov(Acl: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Solve X = W + Acl' X Acl directly via the vectorized n^2 x n^2 system.

    Requires rho(Acl) < 1 - 1e-9 and n <= 32; the result is symmetrized and
    its residual certified to 1e-10.
    """
    Acl = np.asarray(Acl, dtype=float)
    W = np.asarray(W, dtype=float)
    n = Acl.shape[0]
    if Acl.shape != (n, n) or W.shape != (n, n):
        raise DimensionMismatch(f"Acl and W must both be {n} x {n}, got {Acl.shape}, {W.shape}")
    if n > LYAPUNOV_MAX_DIM:
        raise DimensionMismatch(f"direct Lyapunov solve limited to n <= {LYAPUNOV_MAX_DIM}, got n={n}")
    rho = spectral_radius(Acl)
    if rho >= 1 - 1e-9:
        raise UnstableClosedLoop(f"rho(Acl)={rho:.9f} too close to 1 for a Lyapunov solve")
    M = np.eye(n * n) - np.kron(Acl.T, Acl.T)
    x = np.linalg.solve(M, W.flatten(order="F"))
    X = x.reshape((n, n), order="F")
    X = (X + X.T) / 2.0
    res = float(np.linalg.norm(X - W - Acl.T @ X @ Acl, "fro"))
    if res > 1e-10 * max(1.0, float(np.linalg.norm(X, "fro"))):
        raise NumericsError(f"Lyapunov residual {res:.3e} exceeds certification threshold")
    return X
