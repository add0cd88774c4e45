"""Inverse-dispersion, information-weighted combination of block summaries."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Sequence

import numpy as np

from .errors import ConfigError, NonConvergenceError, RankDeficiencyError, SchemaError, SingularMatrixError
from .glm import BatchData, GlmFamily, SolverConfig, neg_hessian, score
from .linalg import SpdFactor, condition_number, fsum_stack, symmetrize
from .stream import BlockSummary


@dataclass(frozen=True)
class PasaEstimate:
    beta: np.ndarray
    cov: np.ndarray
    total_n: int
    k_blocks: int
    per_block: tuple[BlockSummary, ...] = ()
    timing: dict = field(default_factory=dict)

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.diag(self.cov))

    def to_dict(self, level: float = 0.95) -> dict:
        ci = wald_intervals(self, level)
        return {
            "beta": self.beta.tolist(),
            "cov": self.cov.tolist(),
            "se": ci.se.tolist(),
            "intervals": {"level": level, "lower": ci.lower.tolist(),
                          "upper": ci.upper.tolist()},
            "total_n": int(self.total_n),
            "K": int(self.k_blocks),
            "timing_ms": {k: 1e3 * v for k, v in self.timing.items()
                          if isinstance(v, (int, float))},
        }


@dataclass(frozen=True)
class WaldIntervals:
    lower: np.ndarray
    upper: np.ndarray
    se: np.ndarray
    level: float

    def covers(self, truth) -> np.ndarray:
        truth = np.asarray(truth, dtype=float)
        return (self.lower <= truth) & (truth <= self.upper)


def _ordered(blocks: Sequence[BlockSummary]) -> list[BlockSummary]:
    blocks = list(blocks)
    if not blocks:
        raise ConfigError("combine needs at least one block")
    p = blocks[0].p
    for b in blocks:
        if b.p != p or b.J_k.shape != (p, p):
            raise SchemaError(f"block {b.block_id} has dimension {b.p}, expected {p}")
        if not b.phi_k > 0:
            raise SchemaError(f"block {b.block_id} has non-positive dispersion {b.phi_k}")
    return sorted(blocks, key=lambda b: b.block_id)


def pooled_dispersion(blocks: Sequence[BlockSummary]) -> float:
    """Degrees-of-freedom weighted mean of block dispersions."""
    dof = [max(b.n_k - b.p, 1) for b in blocks]
    return math.fsum(d * b.phi_k for d, b in zip(dof, blocks)) / math.fsum(dof)


def combine(blocks: Sequence[BlockSummary], dispersion: str = "block") -> PasaEstimate:
    """Combine block estimates weighted by ``n_k phi_k^{-1} J_k``.

    ``dispersion="pooled"`` replaces every ``phi_k`` by their pooled value,
    so weights reduce to ``n_k J_k``; for Gaussian blocks the combined
    estimate is then exactly least squares on all rows.

    The solve is centred on the lowest-id block's estimate, which is the same
    estimator but returns it exactly when every block agrees. Sums are
    correctly rounded, so block order never changes the result.
    """
    t0 = time.perf_counter()
    blocks = _ordered(blocks)
    if dispersion == "pooled":
        phi = pooled_dispersion(blocks)
        phis = [phi] * len(blocks)
    elif dispersion == "block":
        phis = [b.phi_k for b in blocks]
    else:
        raise ConfigError(f"dispersion must be 'block' or 'pooled', got {dispersion!r}")
    anchor = blocks[0].beta_k
    weights = [(b.n_k / phi) * symmetrize(b.J_k) for b, phi in zip(blocks, phis)]
    W = symmetrize(fsum_stack(weights))
    rhs = fsum_stack([Wk @ (b.beta_k - anchor) for Wk, b in zip(weights, blocks)])
    try:
        factor = SpdFactor(W, what="combined information")
    except RankDeficiencyError as exc:
        conds = {b.block_id: condition_number(b.J_k) for b in blocks}
        raise SingularMatrixError(f"{exc}; block condition numbers: {conds}",
                                  condition_numbers=conds) from None
    beta = anchor + factor.solve(rhs)
    cov = factor.inverse()
    elapsed = time.perf_counter() - t0
    return PasaEstimate(beta, cov, sum(b.n_k for b in blocks), len(blocks),
                        tuple(blocks), {"combine_s": elapsed})


def wald_intervals(estimate: PasaEstimate, level: float = 0.95) -> WaldIntervals:
    if not 0.0 < level < 1.0:
        raise ConfigError(f"level must lie in (0, 1), got {level}")
    z = NormalDist().inv_cdf(0.5 * (1.0 + level))
    se = np.sqrt(np.diag(estimate.cov))
    return WaldIntervals(estimate.beta - z * se, estimate.beta + z * se, se, level)


def gmm_oracle(family: GlmFamily, blocks: Sequence[BlockSummary],
               block_data: Sequence[BatchData],
               config: SolverConfig | None = None,
               start: np.ndarray | None = None) -> np.ndarray:
    """Minimize ``sum_k n_k phi_k^{-1} U_k' J_k^{-1} U_k`` over beta.

    ``U_k`` is the block-mean score recomputed from raw block data, so this
    needs all rows and is for validation at test scale only. Minimization is
    Gauss-Newton: the curvature of the quadratic form is approximated by
    ``2 sum_k w_k H_k' J_k^{-1} H_k`` with ``H_k`` the block-mean information.
    """
    config = config or SolverConfig()
    order = sorted(range(len(blocks)), key=lambda i: blocks[i].block_id)
    blocks = [blocks[i] for i in order]
    block_data = [block_data[i] for i in order]
    _ordered(blocks)
    inv_J = [SpdFactor(b.J_k, what=f"J of block {b.block_id}") for b in blocks]
    w = [b.n_k / b.phi_k for b in blocks]
    beta = combine(blocks).beta if start is None else np.asarray(start, dtype=float)

    for it in range(config.max_iter + 1):
        grad_terms, curv_terms = [], []
        for wk, Ak, b, data in zip(w, inv_J, blocks, block_data):
            U = score(family, data, beta) / b.n_k
            H = neg_hessian(family, data, beta) / b.n_k
            AU = Ak.solve(U)
            AH = Ak.solve(H)
            grad_terms.append(-2.0 * wk * (H.T @ AU))
            curv_terms.append(2.0 * wk * (H.T @ AH))
        grad = fsum_stack(grad_terms)
        if np.max(np.abs(grad)) <= config.tol:
            return beta
        if it == config.max_iter:
            break
        beta = beta - SpdFactor(fsum_stack(curv_terms), what="GMM curvature").solve(grad)
    raise NonConvergenceError(
        f"GMM minimization did not converge in {config.max_iter} iterations",
        last_iterate=beta, grad_norm=float(np.max(np.abs(grad))))
