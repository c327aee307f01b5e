"""Run traces: per-step and per-episode records plus flat-file serialization.

Each run writes ``steps_<seed>.csv`` and ``episodes_<seed>.csv`` (comma
separated, header row, 17 significant digits) and the experiment writes one
``manifest.txt`` with key = value lines.  Column names and order are part
of the versioned schema below.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1

STEP_COLUMNS = ("t", "cost", "regret", "normalized_regret", "x_norm")
EPISODE_COLUMNS = (
    "k",
    "t_k",
    "alpha",
    "beta",
    "theta_hat_err",
    "theta_tilde_err",
    "gain_k_err",
    "gain_l_err",
    "margin",
    "rho_cl",
    "min_eig_ratio",
    "failure_flag",
)

_FMT = "%.17g"


@dataclass(frozen=True)
class EpisodeRecord:
    """One row of the per-episode table (k = 0 is the initial model)."""

    k: int
    t_k: int
    alpha: float
    beta: float
    theta_hat_err: float
    theta_tilde_err: float
    gain_k_err: float
    gain_l_err: float
    margin: float
    rho_cl: float
    min_eig_ratio: float
    failure_flag: bool

    def row(self) -> str:
        vals = [str(self.k), str(self.t_k)]
        for name in EPISODE_COLUMNS[2:-1]:
            vals.append(_FMT % getattr(self, name))
        vals.append("1" if self.failure_flag else "0")
        return ",".join(vals)


@dataclass
class RunTrace:
    """Everything one seeded run produces."""

    seed: int
    j_star: float
    cost: np.ndarray
    x_norm: np.ndarray
    episodes: list[EpisodeRecord]
    config_hash: str = ""
    code_version: str = ""
    backend: str = ""
    regret: np.ndarray = field(init=False)
    normalized_regret: np.ndarray = field(init=False)

    def __post_init__(self):
        self.cost = np.asarray(self.cost, dtype=float)
        self.x_norm = np.asarray(self.x_norm, dtype=float)
        t = np.arange(1, self.cost.shape[0] + 1, dtype=float)
        self.regret = np.cumsum(self.cost) - t * self.j_star
        self.normalized_regret = self.regret / np.sqrt(t)
        t_ks = [e.t_k for e in self.episodes]
        if any(b <= a for a, b in zip(t_ks, t_ks[1:])):
            raise ValueError("per-episode rows must be strictly increasing in t_k")

    @property
    def n_steps(self) -> int:
        return int(self.cost.shape[0])

    @property
    def n_episodes(self) -> int:
        """Completed update episodes (the k = 0 initial row does not count)."""
        return len(self.episodes) - 1

    def step_file(self, out_dir: Path) -> Path:
        return Path(out_dir) / f"steps_{self.seed}.csv"

    def episode_file(self, out_dir: Path) -> Path:
        return Path(out_dir) / f"episodes_{self.seed}.csv"

    def write_csv(self, out_dir: Path) -> tuple[Path, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        sp = self.step_file(out_dir)
        lines = [",".join(STEP_COLUMNS)]
        for t in range(self.n_steps):
            lines.append(
                ",".join(
                    [
                        str(t),
                        _FMT % self.cost[t],
                        _FMT % self.regret[t],
                        _FMT % self.normalized_regret[t],
                        _FMT % self.x_norm[t],
                    ]
                )
            )
        sp.write_text("\n".join(lines) + "\n")
        ep = self.episode_file(out_dir)
        lines = [",".join(EPISODE_COLUMNS)]
        lines.extend(e.row() for e in self.episodes)
        ep.write_text("\n".join(lines) + "\n")
        return sp, ep


def write_manifest(out_dir: Path, entries: dict) -> Path:
    """Write ``manifest.txt`` with one ``key = value`` line per entry."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "manifest.txt"
    lines = [f"{k} = {v}" for k, v in entries.items()]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_csv(path: Path) -> dict[str, np.ndarray]:
    """Read one of the trace files back into column arrays."""
    raw = np.genfromtxt(path, delimiter=",", names=True)
    names = raw.dtype.names or ()
    if raw.ndim == 0:
        return {name: np.atleast_1d(raw[name]) for name in names}
    return {name: raw[name] for name in names}
