"""certlq: certified online learning for zero-sum linear-quadratic games.

Library + CLI for simulating two-player zero-sum LQ games with unknown
dynamics: ridge identification with self-normalized confidence ellipsoids,
certified surrogate selection, saddle-point Riccati synthesis, doubling
episodes, and regret accounting, plus an offline verification battery for
the supporting perturbation theory.
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("certlq")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .certify import CertifiedModel, RegularityMargins, is_regular, shrink
from .config import RunConfig, load_config, parse_config
from .controller import ExplorationSpec, control, run, sample_initial_model, should_update
from .errors import CertlqError
from .estimator import (
    ConfidenceSet,
    DesignState,
    confidence_radius,
    contains,
    l2_error_bound,
    make_confidence_set,
    min_eig_ratio,
    ridge_estimate,
)
from .metrics import RegretSeries, benchmark_cost, closed_loop_cost, stage_cost
from .model import (
    CostSpec,
    Dims,
    GameSpec,
    NoiseSpec,
    SystemModel,
    ThetaMatrix,
    concat_model,
    split_theta,
    theta_distance,
)
from .riccati import (
    GareSolution,
    SolverOptions,
    closed_loop,
    gains_from_p,
    gains_schur,
    gare_residual,
    solve_gare,
    solve_lyapunov,
    spectral_radius,
)
from .trace import EpisodeRecord, RunTrace

__all__ = [
    "CertifiedModel", "CertlqError", "ConfidenceSet", "CostSpec", "DesignState",
    "Dims", "EpisodeRecord", "ExplorationSpec", "GameSpec", "GareSolution",
    "NoiseSpec", "RegretSeries", "RegularityMargins", "RunConfig", "RunTrace",
    "SolverOptions", "SystemModel", "ThetaMatrix", "benchmark_cost",
    "closed_loop", "closed_loop_cost", "concat_model", "confidence_radius",
    "contains", "control", "gains_from_p", "gains_schur", "gare_residual",
    "is_regular", "l2_error_bound", "load_config", "make_confidence_set",
    "min_eig_ratio", "parse_config", "ridge_estimate", "run",
    "sample_initial_model", "should_update", "shrink", "solve_gare",
    "solve_lyapunov", "spectral_radius", "split_theta", "stage_cost",
    "theta_distance",
]
