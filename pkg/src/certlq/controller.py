"""Episode loop: certified certainty-equivalent control with doubling updates.

Runs the closed-loop game under the true plant.  Both players apply the
saddle gains of the current certified surrogate plus Gaussian exploration
(self-play).  The design matrix grows every step; when det(V) has doubled
since the last boundary, the loop re-estimates, shrinks to a certified
surrogate, resolves the GARE there, and installs the new gains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from . import kernel
from .certify import CertifiedModel, RegularityMargins, is_regular, shrink
from .errors import CertificationCollapse, CertlqError, StateBlowup
from .estimator import DesignState, make_confidence_set, min_eig_ratio
from .metrics import benchmark_cost
from .model import GameSpec, ThetaMatrix
from .riccati import SolverOptions, solve_gare
from .trace import EpisodeRecord, RunTrace

if TYPE_CHECKING:  # pragma: no cover
    from .config import RunConfig

LN2 = math.log(2.0)
INITIAL_MODEL_RETRIES = 100


@dataclass(frozen=True)
class ExplorationSpec:
    """Exploration injection variances; ``None`` means horizon^{-1/2}."""

    sigma_eta_sq: float | None = None
    sigma_zeta_sq: float | None = None
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("sigma_eta_sq", "sigma_zeta_sq"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ValueError(f"{name} must be >= 0, got {v}")

    def resolve(self, horizon: int) -> "ExplorationSpec":
        """Fill in default variances for a concrete horizon."""
        default = horizon ** -0.5 if horizon >= 1 else 0.0
        return ExplorationSpec(
            sigma_eta_sq=default if self.sigma_eta_sq is None else self.sigma_eta_sq,
            sigma_zeta_sq=default if self.sigma_zeta_sq is None else self.sigma_zeta_sq,
            rng_seed=self.rng_seed,
        )


@dataclass
class EpisodeState:
    """Controller state during one episode."""

    k: int
    t_k: int
    K: np.ndarray
    L: np.ndarray
    logdet_at_start: float
    certified: CertifiedModel


def control(x: np.ndarray, ep: EpisodeState, expl: ExplorationSpec, rng: np.random.Generator):
    """One control step: u = -Kx + eta, v = -Lx + zeta.

    Returns (u, v, eta, zeta); eta is drawn before zeta from ``rng``.
    """
    if expl.sigma_eta_sq is None or expl.sigma_zeta_sq is None:
        raise ValueError("exploration variances unresolved; call ExplorationSpec.resolve first")
    x = np.asarray(x, dtype=float)
    eta = math.sqrt(expl.sigma_eta_sq) * rng.standard_normal(ep.K.shape[0])
    zeta = math.sqrt(expl.sigma_zeta_sq) * rng.standard_normal(ep.L.shape[0])
    u = -ep.K @ x + eta
    v = -ep.L @ x + zeta
    return u, v, eta, zeta


def should_update(logdet_now: float, logdet_at_start: float) -> bool:
    """Doubling trigger: det(V) has at least doubled since the episode start."""
    if logdet_now < logdet_at_start - 1e-9:
        raise ValueError(
            f"log det decreased ({logdet_now} < {logdet_at_start}); design state corrupted"
        )
    return logdet_now >= logdet_at_start + LN2


def sample_initial_model(
    spec: GameSpec,
    margins: RegularityMargins,
    opts: SolverOptions,
    rel_scale: float,
    rng: np.random.Generator,
    retries: int = INITIAL_MODEL_RETRIES,
) -> CertifiedModel:
    """Draw truth + Gaussian perturbation until the regularity test passes.

    The perturbation has Frobenius norm ``rel_scale * ||Theta_star||_F``.
    """
    theta_star = spec.theta_star
    base_norm = float(np.linalg.norm(theta_star.Theta, "fro"))
    for _ in range(retries):
        g = rng.standard_normal((spec.dims.n, spec.dims.d))
        gn = float(np.linalg.norm(g, "fro"))
        cand = ThetaMatrix(theta_star.Theta + rel_scale * base_norm * g / gn, spec.dims)
        ok, sol = is_regular(cand, spec.cost, margins, opts)
        if ok:
            return CertifiedModel(
                theta=cand,
                alpha=1.0,
                solution=sol,
                in_confidence=True,
                episode=0,
                failure_flag=False,
            )
    raise CertlqError(
        f"no regular initial model found in {retries} draws at perturbation scale {rel_scale}"
    )


def _noise_factor(Sigma_w: np.ndarray) -> np.ndarray:
    """A factor F with F F' = Sigma_w, diagonal-exact for diagonal input."""
    if np.count_nonzero(Sigma_w - np.diag(np.diag(Sigma_w))) == 0:
        return np.diag(np.sqrt(np.diag(Sigma_w)))
    try:
        return np.linalg.cholesky(Sigma_w)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(Sigma_w)
        return vecs @ np.diag(np.sqrt(np.clip(vals, 0.0, None)))


def run(
    spec: GameSpec, cfg: "RunConfig", seed: int | None = None, episode_hook=None
) -> RunTrace:
    """Simulate one seeded run of the full learning loop.

    Deterministic per (spec, cfg, seed).  Draw order from the seeded
    generator: initial-model attempts, then the disturbance block, then
    player-1 and player-2 exploration blocks.

    ``episode_hook(k, conf, state, certified)``, when given, is called at
    every episode boundary with the live confidence set and design state;
    it must treat them as read-only.
    """
    if seed is None:
        seed = cfg.seeds[0]
    rng = np.random.default_rng(seed)
    T = cfg.horizon
    dims = spec.dims
    n, m1, m2 = dims.n, dims.m1, dims.m2

    ep0 = sample_initial_model(spec, cfg.margins, cfg.solver, cfg.theta0_perturbation, rng)

    expl = cfg.exploration.resolve(T)
    w_blk = rng.standard_normal((T, n)) @ _noise_factor(spec.noise.Sigma_w).T
    eta_blk = math.sqrt(expl.sigma_eta_sq) * rng.standard_normal((T, m1))
    zeta_blk = math.sqrt(expl.sigma_zeta_sq) * rng.standard_normal((T, m2))
    w_blk = np.ascontiguousarray(w_blk)

    theta_star = spec.theta_star
    s_theta = cfg.s_theta
    if s_theta is None:
        s_theta = 1.5 * float(np.linalg.norm(theta_star.Theta, "fro"))

    truth_sol = solve_gare(spec.truth, spec.cost, cfg.solver)
    j_star = benchmark_cost(truth_sol, spec.noise)

    state = DesignState(dims, cfg.ridge_lambda)
    x = np.array(spec.x0, dtype=float)
    cost_out = np.zeros(T)
    xnorm_out = np.zeros(T)
    blowup_sq = cfg.blowup_threshold**2

    A = np.ascontiguousarray(spec.truth.A)
    B1 = np.ascontiguousarray(spec.truth.B1)
    B2 = np.ascontiguousarray(spec.truth.B2)
    Q = np.ascontiguousarray(spec.cost.Q)
    Ru = np.ascontiguousarray(spec.cost.Ru)
    Rv = np.ascontiguousarray(spec.cost.Rv)

    current = ep0
    K = np.ascontiguousarray(current.solution.K)
    L = np.ascontiguousarray(current.solution.L)

    beta0 = spec.noise.sigma_w * math.sqrt(2.0 * math.log(1.0 / cfg.delta)) + math.sqrt(
        cfg.ridge_lambda
    ) * s_theta
    episodes = [
        EpisodeRecord(
            k=0,
            t_k=0,
            alpha=math.nan,
            beta=beta0,
            theta_hat_err=float(np.linalg.norm(theta_star.Theta, "fro")),
            theta_tilde_err=float(np.linalg.norm(current.theta.Theta - theta_star.Theta, "fro")),
            gain_k_err=float(np.linalg.norm(K - truth_sol.K, "fro")),
            gain_l_err=float(np.linalg.norm(L - truth_sol.L, "fro")),
            margin=current.solution.margin,
            rho_cl=current.solution.rho_cl,
            min_eig_ratio=math.nan,
            failure_flag=False,
        )
    ]

    def build_trace(n_steps: int) -> RunTrace:
        return RunTrace(
            seed=seed,
            j_star=j_star,
            cost=cost_out[:n_steps].copy(),
            x_norm=xnorm_out[:n_steps].copy(),
            episodes=list(episodes),
            backend=kernel.BACKEND,
        )

    t = 0
    k = 0
    logdet_start = state.logdet_v
    consec_failures = 0
    while t < T:
        chunk = min(T - t, state.steps_until_refresh())
        steps, status, logdet = kernel.step_chunk(
            x, state.V, state.S, state.chol, state.logdet_v, logdet_start,
            A, B1, B2, K, L, Q, Ru, Rv,
            w_blk, eta_blk, zeta_blk,
            t, chunk, blowup_sq, cost_out, xnorm_out,
        )
        state.advance(steps, logdet)
        t += steps
        if status == kernel.STATUS_BLOWUP:
            raise StateBlowup(t - 1, float(np.linalg.norm(x)), trace=build_trace(t))
        if status == kernel.STATUS_TRIGGER:
            k += 1
            conf = make_confidence_set(state, spec.noise, cfg.delta, s_theta)
            cm = shrink(
                conf.center,
                current.theta,
                conf,
                spec.cost,
                cfg.margins,
                tol_alpha=cfg.tol_alpha,
                opts=cfg.solver,
                episode=k,
            )
            if cm.failure_flag:
                consec_failures += 1
                row_sol = cm.solution if cm.solution is not None else current.solution
            else:
                consec_failures = 0
                current = cm
                K = np.ascontiguousarray(cm.solution.K)
                L = np.ascontiguousarray(cm.solution.L)
                row_sol = cm.solution
            episodes.append(
                EpisodeRecord(
                    k=k,
                    t_k=t,
                    alpha=cm.alpha,
                    beta=conf.beta,
                    theta_hat_err=float(
                        np.linalg.norm(conf.center.Theta - theta_star.Theta, "fro")
                    ),
                    theta_tilde_err=float(
                        np.linalg.norm(current.theta.Theta - theta_star.Theta, "fro")
                    ),
                    gain_k_err=float(np.linalg.norm(K - truth_sol.K, "fro")),
                    gain_l_err=float(np.linalg.norm(L - truth_sol.L, "fro")),
                    margin=row_sol.margin,
                    rho_cl=row_sol.rho_cl,
                    min_eig_ratio=min_eig_ratio(state),
                    failure_flag=cm.failure_flag,
                )
            )
            if episode_hook is not None:
                episode_hook(k, conf, state, cm)
            if consec_failures > cfg.max_failed_episodes:
                raise CertificationCollapse(k, consec_failures, trace=build_trace(t))
            logdet_start = state.logdet_v

    trace = build_trace(T)
    _assert_episode_bound(trace, state, cfg.ridge_lambda)
    return trace


def _assert_episode_bound(trace: RunTrace, state: DesignState, lam: float) -> None:
    """Episode count is logarithmic in det(V_T) by construction; enforce it."""
    sign, logdet = np.linalg.slogdet(state.V)
    if sign <= 0:
        raise CertlqError("design matrix lost positive definiteness")
    bound = (logdet - state.dims.d * math.log(lam)) / LN2 + 1.0
    if trace.n_episodes > bound + 1e-9:
        raise CertlqError(
            f"episode count {trace.n_episodes} exceeds doubling bound {bound:.3f}"
        )
