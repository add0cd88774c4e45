"""Renewable within-block estimation.

A block is consumed as a sequence of batches. After each batch only the
triple (estimate, accumulated information, dispersion) plus counters is
kept; raw rows of earlier batches are never revisited.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from typing import Iterable

import numpy as np

from .errors import (
    ConfigError,
    DegenerateVarianceError,
    NonConvergenceError,
    NumericalError,
    RankDeficiencyError,
    SchemaError,
    SingularMatrixError,
)
from .glm import (
    BatchData,
    GlmFamily,
    SolverConfig,
    estimate_dispersion_pearson,
    fit_mle,
    neg_hessian,
    score,
)
from .linalg import SpdFactor, symmetrize

log = logging.getLogger(__name__)

# dispersion never drops below this, so noiseless Gaussian data still yields
# finite combination weights
PHI_FLOOR = 1e-30


@dataclass(frozen=True)
class StreamState:
    beta: np.ndarray
    J_acc: np.ndarray
    phi: float
    n_seen: int
    batches_seen: int
    family: GlmFamily
    block_id: int = 0

    @property
    def p(self) -> int:
        return self.beta.shape[0]

    def covariance(self) -> np.ndarray:
        return self.phi * SpdFactor(self.J_acc).inverse()


@dataclass(frozen=True)
class BlockSummary:
    """Everything a block sends to the combiner."""

    beta_k: np.ndarray
    J_k: np.ndarray
    phi_k: float
    n_k: int
    block_id: int = 0

    @property
    def p(self) -> int:
        return self.beta_k.shape[0]

    def to_dict(self) -> dict:
        return {
            "block_id": int(self.block_id),
            "n_k": int(self.n_k),
            "beta_k": [float(b) for b in self.beta_k],
            "J_k": [float(v) for v in self.J_k.ravel(order="C")],
            "phi_k": float(self.phi_k),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "BlockSummary":
        try:
            beta = np.asarray(d["beta_k"], dtype=float)
            J = np.asarray(d["J_k"], dtype=float)
            p = beta.shape[0]
            if J.ndim == 1:
                if J.shape[0] != p * p:
                    raise SchemaError(f"J_k has {J.shape[0]} entries, expected {p * p}")
                J = J.reshape(p, p)
            if J.shape != (p, p):
                raise SchemaError(f"J_k has shape {J.shape}, expected {(p, p)}")
            return cls(beta, J, float(d["phi_k"]), int(d["n_k"]), int(d["block_id"]))
        except KeyError as exc:
            raise SchemaError(f"block summary missing field {exc.args[0]!r}") from None

    @classmethod
    def from_json(cls, text: str) -> "BlockSummary":
        return cls.from_dict(json.loads(text))


def _floor(phi: float) -> float:
    return max(float(phi), PHI_FLOOR)


def init_block(family: GlmFamily, first_batch: BatchData,
               config: SolverConfig | None = None, block_id: int = 0) -> StreamState:
    """Start a block from the MLE on its first batch.

    Gaussian dispersion is ``RSS / (s - p)``, the first step of the exact
    linear recursion; other families with fixed dispersion report it.
    """
    config = config or SolverConfig()
    s, p = first_batch.X.shape
    try:
        fit = fit_mle(family, first_batch, config)
        if family.is_gaussian:
            if s <= p:
                raise DegenerateVarianceError(
                    f"first batch has s={s} <= p={p}; dispersion undefined")
            rss = float(np.sum((first_batch.y - first_batch.X @ fit.beta) ** 2))
            phi = rss / (s - p)
        else:
            phi = family.dispersion_fixed
    except NumericalError as exc:
        raise exc.with_context(block=block_id, batch=0)
    return StreamState(fit.beta, fit.J, _floor(phi), s, 1, family, block_id)


def _check_dims(state: StreamState, batch: BatchData) -> None:
    if batch.p != state.p:
        raise SchemaError(f"batch has {batch.p} columns, state has p={state.p}")
    state.family.check_outcome(batch.y)


def _renewed_phi(state: StreamState, s: int, phi_batch: float, weighting: str) -> float:
    p = state.p
    n_prev = state.n_seen
    n_new = n_prev + s
    denom = n_new - p
    if weighting == "paper":
        return ((n_prev - p) * state.phi + (s - p) * phi_batch) / denom
    return ((n_prev - p) * state.phi + s * phi_batch) / denom


def renew_update(state: StreamState, batch: BatchData,
                 config: SolverConfig | None = None) -> StreamState:
    """Incremental estimating-equation update for one batch.

    Iterates ``beta <- beta + M^{-1} U~`` with the preconditioner
    ``M = J_acc + J_b(beta_prev)`` factorized once, where
    ``U~ = J_acc (beta_prev - beta) + U_b(beta)``.
    """
    config = config or SolverConfig()
    _check_dims(state, batch)
    family = state.family
    where = dict(block=state.block_id, batch=state.batches_seen)
    J_prev, beta_prev = state.J_acc, state.beta
    n_new = state.n_seen + batch.s

    try:
        M = SpdFactor(J_prev + neg_hessian(family, batch, beta_prev),
                      what="renewal preconditioner")
    except RankDeficiencyError as exc:
        raise SingularMatrixError(str(exc), **exc.context, **where) from None

    threshold = config.tol * n_new
    beta = beta_prev
    resid0 = None
    for r in range(config.stream_max_iter + 1):
        U_adj = J_prev @ (beta_prev - beta) + score(family, batch, beta)
        resid = float(np.max(np.abs(U_adj)))
        if resid0 is None:
            resid0 = resid
        if resid <= threshold:
            break
        if not np.isfinite(resid) or (r > 0 and resid >= resid0):
            raise NonConvergenceError(
                f"renewal iteration is not contracting (residual {resid:.3g} "
                f"after {r} steps, started at {resid0:.3g})",
                last_iterate=beta, residual=resid, **where)
        if r == config.stream_max_iter:
            # the cap ends the iteration; the iterate is kept since it contracted
            log.debug("renewal stopped at cap with residual %.3g %s", resid, where)
            break
        beta = beta + M.solve(U_adj)
        if np.max(np.abs(beta)) > config.beta_cap:
            raise NonConvergenceError(
                f"|beta|_inf exceeded {config.beta_cap} during renewal",
                last_iterate=beta, residual=resid, **where)

    J_new = symmetrize(J_prev + neg_hessian(family, batch, beta))
    if family.dispersion_fixed is not None:
        phi = family.dispersion_fixed
    else:
        try:
            phi_b = estimate_dispersion_pearson(family, batch, beta)
        except NumericalError as exc:
            raise exc.with_context(**where)
        phi = _renewed_phi(state, batch.s, phi_b, config.dispersion_weighting)
    return replace(state, beta=beta, J_acc=J_new, phi=_floor(phi),
                   n_seen=n_new, batches_seen=state.batches_seen + 1)


def renew_update_linear(state: StreamState, batch: BatchData) -> StreamState:
    """Closed-form renewal for the Gaussian identity model.

    The estimate after batch ``b`` equals least squares on all rows seen so
    far, and ``phi`` equals their residual sum of squares over ``N_b - p``.
    """
    if not state.family.is_gaussian:
        raise ConfigError("renew_update_linear needs the gaussian_identity family")
    _check_dims(state, batch)
    X, y = batch.X, batch.y
    p = state.p
    J_prev, beta_prev = state.J_acc, state.beta
    J_new = symmetrize(J_prev + X.T @ X)
    try:
        beta = SpdFactor(J_new, what="accumulated information").solve(
            J_prev @ beta_prev + X.T @ y)
    except RankDeficiencyError as exc:
        raise SingularMatrixError(str(exc), block=state.block_id,
                                  batch=state.batches_seen) from None
    n_prev = state.n_seen
    n_new = n_prev + batch.s
    rss = ((n_prev - p) * state.phi + beta_prev @ J_prev @ beta_prev
           + y @ y - beta @ J_new @ beta)
    return replace(state, beta=beta, J_acc=J_new, phi=_floor(rss / (n_new - p)),
                   n_seen=n_new, batches_seen=state.batches_seen + 1)


def finalize_block(state: StreamState) -> BlockSummary:
    return BlockSummary(state.beta, state.J_acc / state.n_seen, state.phi,
                        state.n_seen, state.block_id)


def stream_block(family: GlmFamily, batches: Iterable[BatchData],
                 config: SolverConfig | None = None, block_id: int = 0,
                 linear_closed_form: bool | None = None) -> BlockSummary:
    """Consume an iterable of batches once and return the block summary.

    Gaussian blocks use the closed-form renewal by default; it is the exact
    root of the incremental equation and carries the exact RSS recursion.
    """
    config = config or SolverConfig()
    if linear_closed_form is None:
        linear_closed_form = family.is_gaussian
    state = None
    for batch in batches:
        if state is None:
            state = init_block(family, batch, config, block_id)
        elif linear_closed_form:
            state = renew_update_linear(state, batch)
        else:
            state = renew_update(state, batch, config)
    if state is None:
        raise ConfigError(f"block {block_id} received no batches")
    return finalize_block(state)
