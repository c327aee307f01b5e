"""Domain types for the two-player zero-sum linear-quadratic game.

Holds the plant matrices (A, B1, B2), quadratic cost weights, the noise
specification, and the flat/structured parameter correspondence
Theta = [A  B1  B2].  All types validate eagerly on construction and are
immutable afterwards, so downstream modules may assume the invariants.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NonFiniteInput

SYMMETRY_RTOL = 1e-12


def _as_matrix(a, name: str, shape: tuple[int, int] | None = None) -> np.ndarray:
    m = np.array(a, dtype=float)
    if m.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got ndim={m.ndim}")
    if shape is not None and m.shape != shape:
        raise DimensionMismatch(f"{name} must have shape {shape}, got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NonFiniteInput(f"{name} contains non-finite entries")
    m.flags.writeable = False
    return m


def _as_vector(a, name: str, length: int | None = None) -> np.ndarray:
    v = np.array(a, dtype=float).reshape(-1)
    if length is not None and v.shape != (length,):
        raise DimensionMismatch(f"{name} must have length {length}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise NonFiniteInput(f"{name} contains non-finite entries")
    v.flags.writeable = False
    return v


def _symmetrize(m: np.ndarray, name: str) -> np.ndarray:
    scale = max(1.0, float(np.abs(m).max()))
    asym = float(np.abs(m - m.T).max())
    if asym > SYMMETRY_RTOL * scale:
        warnings.warn(
            f"{name} asymmetry {asym:.3e} exceeds tolerance; symmetrizing",
            stacklevel=3,
        )
    out = (m + m.T) / 2.0
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Dims:
    """Problem dimensions: state n, player inputs m1/m2, regressor d = n+m1+m2."""

    n: int
    m1: int
    m2: int

    def __post_init__(self):
        for name in ("n", "m1", "m2"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise DimensionMismatch(f"dimension {name} must be a positive integer, got {v!r}")

    @property
    def d(self) -> int:
        return self.n + self.m1 + self.m2


@dataclass(frozen=True)
class SystemModel:
    """Plant matrices of x_{t+1} = A x_t + B1 u_t + B2 v_t + w_t."""

    A: np.ndarray
    B1: np.ndarray
    B2: np.ndarray

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionMismatch(f"A must be square, got {A.shape}")
        B1 = _as_matrix(self.B1, "B1")
        B2 = _as_matrix(self.B2, "B2")
        if B1.shape[0] != n:
            raise DimensionMismatch(f"B1 has {B1.shape[0]} rows, expected n={n}")
        if B2.shape[0] != n:
            raise DimensionMismatch(f"B2 has {B2.shape[0]} rows, expected n={n}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B1", B1)
        object.__setattr__(self, "B2", B2)

    @property
    def dims(self) -> Dims:
        return Dims(self.A.shape[0], self.B1.shape[1], self.B2.shape[1])


@dataclass(frozen=True)
class ThetaMatrix:
    """Stacked parameter matrix Theta = [A  B1  B2] of shape n x d."""

    Theta: np.ndarray
    dims: Dims

    def __post_init__(self):
        t = _as_matrix(self.Theta, "Theta", (self.dims.n, self.dims.d))
        object.__setattr__(self, "Theta", t)

    @property
    def vec(self) -> np.ndarray:
        """Column-wise vectorization of Theta (length n*d)."""
        return self.Theta.flatten(order="F")


def concat_model(m: SystemModel) -> ThetaMatrix:
    """Stack (A, B1, B2) horizontally into the parameter matrix."""
    dims = m.dims
    return ThetaMatrix(np.hstack([m.A, m.B1, m.B2]), dims)


def split_theta(t: ThetaMatrix, dims: Dims) -> SystemModel:
    """Inverse of :func:`concat_model`: recover (A, B1, B2) from Theta."""
    if t.Theta.shape != (dims.n, dims.d):
        raise DimensionMismatch(
            f"Theta has shape {t.Theta.shape}, expected ({dims.n}, {dims.d})"
        )
    n, m1 = dims.n, dims.m1
    return SystemModel(
        A=t.Theta[:, :n],
        B1=t.Theta[:, n : n + m1],
        B2=t.Theta[:, n + m1 :],
    )


def theta_distance(a: ThetaMatrix, b: ThetaMatrix) -> float:
    """Frobenius distance between parameter matrices (= l2 distance of vecs)."""
    if a.Theta.shape != b.Theta.shape:
        raise DimensionMismatch(
            f"shape mismatch: {a.Theta.shape} vs {b.Theta.shape}"
        )
    return float(np.linalg.norm(a.Theta - b.Theta, "fro"))


@dataclass(frozen=True)
class CostSpec:
    """Stage cost weights: x'Qx + u'Ru u - v'Rv v with Q >= 0, Ru, Rv > 0."""

    Q: np.ndarray
    Ru: np.ndarray
    Rv: np.ndarray

    def __post_init__(self):
        Q = _symmetrize(_as_matrix(self.Q, "Q"), "Q")
        Ru = _symmetrize(_as_matrix(self.Ru, "Ru"), "Ru")
        Rv = _symmetrize(_as_matrix(self.Rv, "Rv"), "Rv")
        if Q.shape[0] != Q.shape[1]:
            raise DimensionMismatch(f"Q must be square, got {Q.shape}")
        for name, mat in (("Ru", Ru), ("Rv", Rv)):
            if mat.shape[0] != mat.shape[1]:
                raise DimensionMismatch(f"{name} must be square, got {mat.shape}")
            try:
                np.linalg.cholesky(mat)
            except np.linalg.LinAlgError:
                raise DimensionMismatch(f"{name} must be positive definite") from None
        q_eigs = np.linalg.eigvalsh(Q)
        if q_eigs[0] < -1e-10 * max(1.0, abs(q_eigs[-1])):
            raise DimensionMismatch(f"Q must be positive semidefinite (lambda_min={q_eigs[0]:.3e})")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "Ru", Ru)
        object.__setattr__(self, "Rv", Rv)


@dataclass(frozen=True)
class NoiseSpec:
    """Disturbance scale: sub-Gaussian parameter sigma_w and covariance Sigma_w."""

    sigma_w: float
    Sigma_w: np.ndarray

    def __post_init__(self):
        if not np.isfinite(self.sigma_w) or self.sigma_w < 0:
            raise NonFiniteInput(f"sigma_w must be a finite scalar >= 0, got {self.sigma_w}")
        S = _symmetrize(_as_matrix(self.Sigma_w, "Sigma_w"), "Sigma_w")
        eigs = np.linalg.eigvalsh(S)
        if eigs[0] < -1e-10 * max(1.0, abs(eigs[-1])):
            raise DimensionMismatch(f"Sigma_w must be PSD (lambda_min={eigs[0]:.3e})")
        object.__setattr__(self, "Sigma_w", S)
        object.__setattr__(self, "sigma_w", float(self.sigma_w))

    @classmethod
    def isotropic(cls, sigma_w: float, n: int) -> "NoiseSpec":
        return cls(sigma_w=sigma_w, Sigma_w=sigma_w**2 * np.eye(n))


@dataclass(frozen=True)
class GameSpec:
    """Full game description: dimensions, true plant, cost, noise, initial state."""

    dims: Dims
    truth: SystemModel
    cost: CostSpec
    noise: NoiseSpec
    x0: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.truth.dims != self.dims:
            raise DimensionMismatch(
                f"truth dims {self.truth.dims} inconsistent with declared {self.dims}"
            )
        n = self.dims.n
        if self.cost.Q.shape != (n, n):
            raise DimensionMismatch(f"Q shape {self.cost.Q.shape} inconsistent with n={n}")
        if self.cost.Ru.shape != (self.dims.m1, self.dims.m1):
            raise DimensionMismatch(f"Ru shape {self.cost.Ru.shape} inconsistent with m1={self.dims.m1}")
        if self.cost.Rv.shape != (self.dims.m2, self.dims.m2):
            raise DimensionMismatch(f"Rv shape {self.cost.Rv.shape} inconsistent with m2={self.dims.m2}")
        if self.noise.Sigma_w.shape != (n, n):
            raise DimensionMismatch(f"Sigma_w shape {self.noise.Sigma_w.shape} inconsistent with n={n}")
        x0 = np.zeros(n) if self.x0 is None else self.x0
        object.__setattr__(self, "x0", _as_vector(x0, "x0", n))

    @property
    def theta_star(self) -> ThetaMatrix:
        return concat_model(self.truth)
