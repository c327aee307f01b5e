"""Stage costs, closed-loop average cost, and regret accounting.

The equilibrium benchmark is J_star = tr(P_star Sigma_w); for arbitrary
stabilizing gains the closed-loop average cost is tr(P_KL Sigma_w) with
P_KL solving the closed-loop Lyapunov equation
P = Q + K'Ru K - L'Rv L + Acl' P Acl.  Regret is accumulated against
t * J_star from realized stage costs.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DimensionMismatch
from .model import CostSpec, NoiseSpec, SystemModel
from .riccati import GareSolution, closed_loop, solve_lyapunov


def stage_cost(x: np.ndarray, u: np.ndarray, v: np.ndarray, c: CostSpec) -> float:
    """x'Qx + u'Ru u - v'Rv v."""
    x = np.asarray(x, dtype=float).reshape(-1)
    u = np.asarray(u, dtype=float).reshape(-1)
    v = np.asarray(v, dtype=float).reshape(-1)
    if x.shape[0] != c.Q.shape[0]:
        raise DimensionMismatch(f"x length {x.shape[0]} vs Q dimension {c.Q.shape[0]}")
    if u.shape[0] != c.Ru.shape[0]:
        raise DimensionMismatch(f"u length {u.shape[0]} vs Ru dimension {c.Ru.shape[0]}")
    if v.shape[0] != c.Rv.shape[0]:
        raise DimensionMismatch(f"v length {v.shape[0]} vs Rv dimension {c.Rv.shape[0]}")
    return float(x @ c.Q @ x + u @ c.Ru @ u - v @ c.Rv @ v)


def benchmark_cost(sol: GareSolution, noise: NoiseSpec) -> float:
    """Equilibrium average cost tr(P_star Sigma_w)."""
    return float(np.trace(sol.P @ noise.Sigma_w))


def closed_loop_cost(
    K: np.ndarray, L: np.ndarray, m: SystemModel, c: CostSpec, noise: NoiseSpec
) -> float:
    """Average cost tr(P_KL Sigma_w) of fixed stabilizing gains under the true plant."""
    Acl = closed_loop(m, K, L)
    K = np.asarray(K, dtype=float)
    L = np.asarray(L, dtype=float)
    W = c.Q + K.T @ c.Ru @ K - L.T @ c.Rv @ L
    P_kl = solve_lyapunov(Acl, W)
    return float(np.trace(P_kl @ noise.Sigma_w))


class RegretSeries:
    """Running cumulative cost and regret against a fixed benchmark J_star.

    After N accumulated costs: cumulative_cost[N-1] = sum c_t,
    regret[t-1] = cumulative_cost[t-1] - t * J_star, and
    normalized[t-1] = regret[t-1] / sqrt(t) for t = 1..N.
    """

    def __init__(self, j_star: float):
        self.j_star = float(j_star)
        self._costs: list[float] = []

    def accumulate(self, c_t: float) -> "RegretSeries":
        self._costs.append(float(c_t))
        return self

    @classmethod
    def from_costs(cls, costs: np.ndarray, j_star: float) -> "RegretSeries":
        s = cls(j_star)
        s._costs = [float(c) for c in np.asarray(costs, dtype=float)]
        return s

    def __len__(self) -> int:
        return len(self._costs)

    @property
    def cumulative_cost(self) -> np.ndarray:
        return np.cumsum(np.asarray(self._costs, dtype=float))

    @property
    def regret(self) -> np.ndarray:
        t = np.arange(1, len(self._costs) + 1, dtype=float)
        return self.cumulative_cost - t * self.j_star

    @property
    def normalized(self) -> np.ndarray:
        t = np.arange(1, len(self._costs) + 1, dtype=float)
        return self.regret / np.sqrt(t)

    def regret_at(self, t: int) -> float:
        """Regret after t accumulated steps (t >= 1)."""
        if not 1 <= t <= len(self._costs):
            raise ValueError(f"t must be in [1, {len(self._costs)}], got {t}")
        return float(sum(self._costs[:t]) - t * self.j_star)

    def normalized_at(self, t: int) -> float:
        return self.regret_at(t) / math.sqrt(t)
