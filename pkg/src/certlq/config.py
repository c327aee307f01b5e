"""Run configuration: JSON schema, validation, and shipped scenarios.

A config file is a single JSON object.  Keys and nesting (defaults in
parentheses; matrices are nested lists, row-major):

    system:  {A, B1, B2}                      required
    cost:    {Q, Ru, Rv}                      required
    noise:   {sigma_w, Sigma_w?}              required (Sigma_w: sigma_w^2 I)
    x0:      [..]                             required
    horizon: int >= 1                         required
    lambda:  ridge regularization > 0         required
    delta:   confidence failure prob (0,1)    required
    seeds:   nonempty list of ints            required
    margins: {mu (0.05), gamma (0.02)}
    exploration: {sigma_eta_sq, sigma_zeta_sq}   (null -> horizon^-0.5)
    s_theta: prior parameter-norm bound          (null -> 1.5 ||Theta_truth||_F)
    output_dir: path ("runs")
    theta0_perturbation: relative Frobenius scale of the initial surrogate (0.05)
    tol_alpha: shrinkage bisection width (1e-3)
    solver:  {tol (1e-10), max_iter (10000), mu_floor (0.0)}
    blowup_threshold: state-norm abort level (1e6)
    max_failed_episodes: consecutive certification failures tolerated (10)

Unknown keys anywhere are rejected.  The environment variable CERTLQ_OUT
overrides ``output_dir``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .certify import RegularityMargins
from .controller import ExplorationSpec
from .errors import CertlqError, ConfigError
from .model import CostSpec, GameSpec, NoiseSpec, SystemModel
from .riccati import SolverOptions

SHIPPED_CONFIGS = {"example": "example_game.json"}


@dataclass(frozen=True)
class RunConfig:
    """Validated experiment configuration."""

    spec: GameSpec
    horizon: int
    ridge_lambda: float
    delta: float
    margins: RegularityMargins
    exploration: ExplorationSpec
    s_theta: float | None
    seeds: tuple[int, ...]
    output_dir: str
    theta0_perturbation: float
    tol_alpha: float
    solver: SolverOptions
    blowup_threshold: float
    max_failed_episodes: int
    source: dict | None = None

    def __post_init__(self):
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1", "horizon")
        if not self.ridge_lambda > 0:
            raise ConfigError("lambda must be > 0", "lambda")
        if not 0 < self.delta < 1:
            raise ConfigError("delta must lie in (0, 1)", "delta")
        if len(self.seeds) == 0:
            raise ConfigError("seeds must be nonempty", "seeds")
        if self.s_theta is not None and self.s_theta < 0:
            raise ConfigError("s_theta must be >= 0", "s_theta")
        if self.theta0_perturbation < 0:
            raise ConfigError("theta0_perturbation must be >= 0", "theta0_perturbation")
        if not self.tol_alpha > 0:
            raise ConfigError("tol_alpha must be > 0", "tol_alpha")
        if not self.blowup_threshold > 0:
            raise ConfigError("blowup_threshold must be > 0", "blowup_threshold")
        if self.max_failed_episodes < 0:
            raise ConfigError("max_failed_episodes must be >= 0", "max_failed_episodes")

    def with_overrides(self, seeds=None, horizon=None, output_dir=None) -> "RunConfig":
        out = self
        if seeds is not None:
            out = replace(out, seeds=tuple(int(s) for s in seeds))
        if horizon is not None:
            out = replace(out, horizon=int(horizon))
        if output_dir is not None:
            out = replace(out, output_dir=str(output_dir))
        return out

    def config_hash(self) -> str:
        """Stable hash of the effective configuration (excluding output dir)."""
        payload = {
            "A": self.spec.truth.A.tolist(),
            "B1": self.spec.truth.B1.tolist(),
            "B2": self.spec.truth.B2.tolist(),
            "Q": self.spec.cost.Q.tolist(),
            "Ru": self.spec.cost.Ru.tolist(),
            "Rv": self.spec.cost.Rv.tolist(),
            "sigma_w": self.spec.noise.sigma_w,
            "Sigma_w": self.spec.noise.Sigma_w.tolist(),
            "x0": self.spec.x0.tolist(),
            "horizon": self.horizon,
            "lambda": self.ridge_lambda,
            "delta": self.delta,
            "mu": self.margins.mu,
            "gamma": self.margins.gamma,
            "sigma_eta_sq": self.exploration.sigma_eta_sq,
            "sigma_zeta_sq": self.exploration.sigma_zeta_sq,
            "s_theta": self.s_theta,
            "theta0_perturbation": self.theta0_perturbation,
            "tol_alpha": self.tol_alpha,
            "solver": [self.solver.tol, self.solver.max_iter, self.solver.mu_floor],
            "blowup_threshold": self.blowup_threshold,
            "max_failed_episodes": self.max_failed_episodes,
        }
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise ConfigError("required key is missing", f"{where}{key}")
    return obj[key]


def _check_unknown(obj: dict, allowed: set, where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)}", where.rstrip("."))


def _matrix(obj, where: str) -> np.ndarray:
    try:
        arr = np.array(obj, dtype=float)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"not a numeric matrix ({e})", where) from None
    if arr.ndim != 2:
        raise ConfigError(f"must be a 2-D nested list, got ndim={arr.ndim}", where)
    return arr


def _scalar(obj, where: str) -> float:
    if isinstance(obj, bool) or not isinstance(obj, (int, float)):
        raise ConfigError(f"must be a number, got {type(obj).__name__}", where)
    return float(obj)


def parse_config(data: dict, path: str = "<dict>") -> RunConfig:
    """Validate a parsed JSON object into a RunConfig."""
    if not isinstance(data, dict):
        raise ConfigError("top level must be a JSON object", path)
    allowed = {
        "system", "cost", "noise", "x0", "horizon", "lambda", "delta", "seeds",
        "margins", "exploration", "s_theta", "output_dir", "theta0_perturbation",
        "tol_alpha", "solver", "blowup_threshold", "max_failed_episodes",
    }
    _check_unknown(data, allowed, path)

    system = _require(data, "system", "")
    _check_unknown(system, {"A", "B1", "B2"}, "system")
    try:
        truth = SystemModel(
            A=_matrix(_require(system, "A", "system."), "system.A"),
            B1=_matrix(_require(system, "B1", "system."), "system.B1"),
            B2=_matrix(_require(system, "B2", "system."), "system.B2"),
        )
    except CertlqError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e), "system") from e

    cost_obj = _require(data, "cost", "")
    _check_unknown(cost_obj, {"Q", "Ru", "Rv"}, "cost")
    try:
        cost = CostSpec(
            Q=_matrix(_require(cost_obj, "Q", "cost."), "cost.Q"),
            Ru=_matrix(_require(cost_obj, "Ru", "cost."), "cost.Ru"),
            Rv=_matrix(_require(cost_obj, "Rv", "cost."), "cost.Rv"),
        )
    except CertlqError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e), "cost") from e

    noise_obj = _require(data, "noise", "")
    _check_unknown(noise_obj, {"sigma_w", "Sigma_w"}, "noise")
    sigma_w = _scalar(_require(noise_obj, "sigma_w", "noise."), "noise.sigma_w")
    n = truth.A.shape[0]
    try:
        if "Sigma_w" in noise_obj:
            noise = NoiseSpec(sigma_w=sigma_w, Sigma_w=_matrix(noise_obj["Sigma_w"], "noise.Sigma_w"))
        else:
            noise = NoiseSpec.isotropic(sigma_w, n)
    except CertlqError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e), "noise") from e

    dims = truth.dims
    try:
        spec = GameSpec(dims=dims, truth=truth, cost=cost, noise=noise,
                        x0=np.asarray(_require(data, "x0", ""), dtype=float))
    except CertlqError as e:
        raise ConfigError(str(e), "x0") from e

    margins_obj = data.get("margins", {})
    _check_unknown(margins_obj, {"mu", "gamma"}, "margins")
    try:
        margins = RegularityMargins(
            mu=_scalar(margins_obj.get("mu", 0.05), "margins.mu"),
            gamma=_scalar(margins_obj.get("gamma", 0.02), "margins.gamma"),
        )
    except ValueError as e:
        raise ConfigError(str(e), "margins") from e

    expl_obj = data.get("exploration", {})
    _check_unknown(expl_obj, {"sigma_eta_sq", "sigma_zeta_sq"}, "exploration")
    try:
        expl = ExplorationSpec(
            sigma_eta_sq=None if expl_obj.get("sigma_eta_sq") is None
            else _scalar(expl_obj["sigma_eta_sq"], "exploration.sigma_eta_sq"),
            sigma_zeta_sq=None if expl_obj.get("sigma_zeta_sq") is None
            else _scalar(expl_obj["sigma_zeta_sq"], "exploration.sigma_zeta_sq"),
        )
    except ValueError as e:
        raise ConfigError(str(e), "exploration") from e

    solver_obj = data.get("solver", {})
    _check_unknown(solver_obj, {"tol", "max_iter", "mu_floor"}, "solver")
    try:
        solver = SolverOptions(
            tol=_scalar(solver_obj.get("tol", 1e-10), "solver.tol"),
            max_iter=int(solver_obj.get("max_iter", 10_000)),
            mu_floor=_scalar(solver_obj.get("mu_floor", 0.0), "solver.mu_floor"),
        )
    except ValueError as e:
        raise ConfigError(str(e), "solver") from e

    seeds = _require(data, "seeds", "")
    if not isinstance(seeds, list) or not all(isinstance(s, int) and not isinstance(s, bool) for s in seeds):
        raise ConfigError("seeds must be a list of integers", "seeds")

    s_theta = data.get("s_theta")
    if s_theta is not None:
        s_theta = _scalar(s_theta, "s_theta")

    horizon = _require(data, "horizon", "")
    if isinstance(horizon, bool) or not isinstance(horizon, int):
        raise ConfigError("horizon must be an integer", "horizon")

    return RunConfig(
        spec=spec,
        horizon=horizon,
        ridge_lambda=_scalar(_require(data, "lambda", ""), "lambda"),
        delta=_scalar(_require(data, "delta", ""), "delta"),
        margins=margins,
        exploration=expl,
        s_theta=s_theta,
        seeds=tuple(seeds),
        output_dir=str(data.get("output_dir", "runs")),
        theta0_perturbation=_scalar(data.get("theta0_perturbation", 0.05), "theta0_perturbation"),
        tol_alpha=_scalar(data.get("tol_alpha", 1e-3), "tol_alpha"),
        solver=solver,
        blowup_threshold=_scalar(data.get("blowup_threshold", 1e6), "blowup_threshold"),
        max_failed_episodes=int(data.get("max_failed_episodes", 10)),
        source=data,
    )


def load_config(path: str | Path) -> RunConfig:
    """Load and validate a config file; shipped names resolve to package data."""
    name = str(path)
    if name in SHIPPED_CONFIGS:
        text = (
            resources.files("certlq").joinpath("data", SHIPPED_CONFIGS[name]).read_text()
        )
        label = f"<shipped:{name}>"
    else:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}", str(p))
        text = p.read_text()
        label = str(p)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"JSON parse error at line {e.lineno}, column {e.colno}: {e.msg}", label) from e
    return parse_config(data, label)
