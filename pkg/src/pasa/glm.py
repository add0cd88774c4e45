"""Exponential-dispersion GLM primitives and the offline Newton-Raphson MLE.

Two canonical-link families are supported: Gaussian with identity link and
Bernoulli with logit link. Score and negative Hessian are batch sums, never
averages; scaling to per-observation quantities happens at block
finalization.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import expit, xlogy

from .errors import (
    ConfigError,
    DegenerateVarianceError,
    InvalidMeanError,
    NonConvergenceError,
    RankDeficiencyError,
    SchemaError,
    SeparationError,
)
from .linalg import SpdFactor, symmetrize

MU_CLAMP = 1e-12


class FamilyKind(str, enum.Enum):
    GAUSSIAN_IDENTITY = "gaussian_identity"
    BERNOULLI_LOGIT = "bernoulli_logit"


@dataclass(frozen=True)
class GlmFamily:
    """Model family: link, unit variance, unit deviance, dispersion rule."""

    kind: FamilyKind
    dispersion_fixed: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", FamilyKind(self.kind))
        if self.kind is FamilyKind.BERNOULLI_LOGIT and self.dispersion_fixed != 1.0:
            raise SchemaError("bernoulli_logit requires dispersion_fixed = 1")
        if self.kind is FamilyKind.GAUSSIAN_IDENTITY and self.dispersion_fixed is not None:
            raise SchemaError("gaussian_identity estimates its dispersion")

    @property
    def name(self) -> str:
        return "gaussian" if self.is_gaussian else "bernoulli"

    @property
    def is_gaussian(self) -> bool:
        return self.kind is FamilyKind.GAUSSIAN_IDENTITY

    def mean(self, eta):
        """Inverse link. The logistic branch never overflows."""
        if self.is_gaussian:
            return eta
        return expit(eta)

    def variance(self, mu):
        """Unit variance function ``v(mu)``."""
        if self.is_gaussian:
            return np.ones_like(np.asarray(mu, dtype=float))[()]
        mu = np.asarray(mu, dtype=float)
        if np.any((mu <= 0.0) | (mu >= 1.0)):
            raise InvalidMeanError("bernoulli mean must lie in (0, 1)")
        return (mu * (1.0 - mu))[()]

    def hessian_weights(self, mu: np.ndarray) -> np.ndarray:
        """Variance weights for the information matrix, clamped near 0 and 1."""
        if self.is_gaussian:
            return np.ones_like(mu)
        mu = np.clip(mu, MU_CLAMP, 1.0 - MU_CLAMP)
        return mu * (1.0 - mu)

    def deviance(self, y, mu):
        """Unit deviance, with ``0 * log(0 / .) = 0`` for binary outcomes."""
        y = np.asarray(y, dtype=float)
        mu = np.asarray(mu, dtype=float)
        if self.is_gaussian:
            return ((y - mu) ** 2)[()]
        return (2.0 * (xlogy(y, y) - xlogy(y, mu)
                       + xlogy(1.0 - y, 1.0 - y) - xlogy(1.0 - y, 1.0 - mu)))[()]

    def check_outcome(self, y: np.ndarray) -> None:
        if not self.is_gaussian and np.any((y != 0.0) & (y != 1.0)):
            raise SchemaError("bernoulli outcomes must be 0 or 1")


GAUSSIAN = GlmFamily(FamilyKind.GAUSSIAN_IDENTITY)
BERNOULLI = GlmFamily(FamilyKind.BERNOULLI_LOGIT, dispersion_fixed=1.0)

_ALIASES = {
    "gaussian": GAUSSIAN, "linear": GAUSSIAN, "normal": GAUSSIAN,
    "gaussian_identity": GAUSSIAN,
    "bernoulli": BERNOULLI, "logistic": BERNOULLI, "binomial": BERNOULLI,
    "bernoulli_logit": BERNOULLI,
}


def get_family(name: str | GlmFamily) -> GlmFamily:
    if isinstance(name, GlmFamily):
        return name
    try:
        return _ALIASES[name.lower()]
    except KeyError:
        raise ConfigError(f"unknown family {name!r}; expected one of "
                          f"{sorted(_ALIASES)}") from None


# functional spellings used across the package
def mean(family: GlmFamily, eta):
    return family.mean(eta)


def variance_fn(family: GlmFamily, mu):
    return family.variance(mu)


def deviance(family: GlmFamily, y, mu):
    return family.deviance(y, mu)


@dataclass(frozen=True)
class BatchData:
    """One batch of rows: outcome ``y`` (s,) and design ``X`` (s, p)."""

    y: np.ndarray
    X: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if y.ndim != 1 or X.ndim != 2:
            raise SchemaError(f"expected y of shape (s,) and X of shape (s, p), "
                              f"got {y.shape} and {X.shape}")
        if X.shape[0] != y.shape[0]:
            raise SchemaError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
        if y.shape[0] < 1:
            raise SchemaError("a batch needs at least one row")
        y.flags.writeable = False
        X.flags.writeable = False
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)

    @property
    def s(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @classmethod
    def concat(cls, batches: Iterable["BatchData"]) -> "BatchData":
        batches = list(batches)
        if len(batches) == 1:
            return batches[0]
        return cls(np.concatenate([b.y for b in batches]),
                   np.concatenate([b.X for b in batches]))


@dataclass(frozen=True)
class SolverConfig:
    """Iteration controls shared by the offline and streaming solvers."""

    tol: float = 1e-8
    max_iter: int = 50
    stream_max_iter: int = 25
    beta_cap: float = 30.0
    dispersion_weighting: str = "paper"

    def __post_init__(self):
        if self.dispersion_weighting not in ("paper", "normalized"):
            raise ConfigError("dispersion_weighting must be 'paper' or 'normalized'")
        if self.tol <= 0 or self.max_iter < 1 or self.stream_max_iter < 1:
            raise ConfigError("tol must be positive and iteration caps >= 1")


@dataclass(frozen=True)
class FitResult:
    beta: np.ndarray
    J: np.ndarray
    phi: float
    n: int
    iterations: int
    converged: bool


def _check_beta(batch: BatchData, beta) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (batch.p,):
        raise SchemaError(f"beta has shape {beta.shape}, design has {batch.p} columns")
    return beta


def score(family: GlmFamily, batch: BatchData, beta) -> np.ndarray:
    """Batch score ``sum_i x_i (y_i - mu_i)``."""
    beta = _check_beta(batch, beta)
    mu = family.mean(batch.X @ beta)
    return batch.X.T @ (batch.y - mu)


def neg_hessian(family: GlmFamily, batch: BatchData, beta) -> np.ndarray:
    """Batch information ``sum_i v(mu_i) x_i x_i^T`` (symmetrized)."""
    beta = _check_beta(batch, beta)
    X = batch.X
    if family.is_gaussian:
        return symmetrize(X.T @ X)
    w = family.hessian_weights(family.mean(X @ beta))
    return symmetrize(X.T @ (X * w[:, None]))


def score_and_hessian(family: GlmFamily, batch: BatchData, beta):
    beta = _check_beta(batch, beta)
    X = batch.X
    mu = family.mean(X @ beta)
    U = X.T @ (batch.y - mu)
    w = family.hessian_weights(mu)
    return U, symmetrize(X.T @ (X * w[:, None]))


def estimate_dispersion_pearson(family: GlmFamily, batch: BatchData, beta) -> float:
    """Pearson statistic divided by the batch size ``s`` (no p correction)."""
    beta = _check_beta(batch, beta)
    mu = family.mean(batch.X @ beta)
    if family.is_gaussian:
        v = 1.0
    else:
        v = mu * (1.0 - mu)
        if np.any(v == 0.0):
            raise DegenerateVarianceError("zero variance at a fitted mean")
    return float(np.sum((batch.y - mu) ** 2 / v) / batch.s)


def fit_mle(family: GlmFamily, data: BatchData | Sequence[BatchData],
            config: SolverConfig | None = None) -> FitResult:
    """Offline MLE by Newton-Raphson (one normal-equation solve if Gaussian).

    Converged means ``||score||_inf <= tol * n`` at the last Newton step; the
    step is still applied, so the returned estimate is one quadratic step
    past that check. ``J`` is evaluated at the returned estimate.
    """
    config = config or SolverConfig()
    batch = data if isinstance(data, BatchData) else BatchData.concat(data)
    family.check_outcome(batch.y)
    n, p = batch.X.shape
    if n < p:
        raise RankDeficiencyError(f"{n} rows cannot identify {p} coefficients",
                                  pivot=n)
    X, y = batch.X, batch.y

    if family.is_gaussian:
        J = symmetrize(X.T @ X)
        beta = SpdFactor(J).solve(X.T @ y)
        phi = estimate_dispersion_pearson(family, batch, beta)
        return FitResult(beta, J, phi, n, 1, True)

    beta = np.zeros(p)
    threshold = config.tol * n
    for it in range(1, config.max_iter + 1):
        U, J = score_and_hessian(family, batch, beta)
        step = SpdFactor(J).solve(U)
        beta = beta + step
        if np.max(np.abs(beta)) > config.beta_cap:
            raise SeparationError(
                f"|beta|_inf exceeded {config.beta_cap} after {it} iterations; "
                "the MLE probably does not exist (separation)",
                last_iterate=beta, iterations=it)
        if np.max(np.abs(U)) <= threshold:
            J = neg_hessian(family, batch, beta)
            return FitResult(beta, J, 1.0, n, it, True)
    raise NonConvergenceError(
        f"Newton-Raphson did not converge in {config.max_iter} iterations",
        last_iterate=beta, score_norm=float(np.max(np.abs(U))))
