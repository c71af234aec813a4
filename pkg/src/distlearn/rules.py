"""Belief update protocols.

Two layers share the same arithmetic:

* per-agent functions (``bayes_update``, ``geometric_pool_update``, ...)
  operating on :class:`~distlearn.core.BeliefState` values;
* network kernels (:func:`network_step`) that update every agent at once from
  an ``(n, m)`` array of log-beliefs, used by the simulator.

Everything works in log-space. A weight of exactly zero never touches a
``-inf`` log-belief, so ``0 * log 0`` is treated as 0 (the neighbour is simply
absent), while any positive weight on a zero belief yields zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .core import BeliefState, DegeneratePosteriorError, LikelihoodModel, normalize_log


class UpdateRuleKind(str, Enum):
    GEOMETRIC = "GeometricPool"
    ACCELERATED = "AcceleratedGeometric"
    LINEAR_THEN_BAYES = "LinearPoolThenBayes"
    BAYES_THEN_LINEAR = "BayesThenLinearPool"
    LIKELIHOOD_SHARING = "LikelihoodSharing"
    CENTRALIZED = "CentralizedBayes"

    @property
    def requires_static_graph(self) -> bool:
        return self is UpdateRuleKind.ACCELERATED

    @classmethod
    def parse(cls, name: str) -> "UpdateRuleKind":
        key = name.replace("-", "").replace("_", "").lower()
        for kind in cls:
            if kind.value.lower() == key or kind.name.replace("_", "").lower() == key:
                return kind
        raise ValueError(f"unknown update rule {name!r}; expected one of {[k.value for k in cls]}")


class PoolKind(str, Enum):
    LINEAR = "linear"
    LOGARITHMIC = "logarithmic"


# -- shared log-space arithmetic --------------------------------------------

def weighted_log_sum(weights: np.ndarray, log_values: np.ndarray) -> np.ndarray:
    """``weights @ log_values`` with ``0 * -inf = 0`` and ``w>0 * -inf = -inf``."""
    w = np.asarray(weights, dtype=float)
    lv = np.asarray(log_values, dtype=float)
    finite = np.isfinite(lv)
    if finite.all():
        return w @ lv
    out = w @ np.where(finite, lv, 0.0)
    zero_hit = (w > 0).astype(float) @ (~finite).astype(float)
    return np.where(zero_hit > 0, -np.inf, out)


def _log(p: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(p)


def normalize_rows(log_values: np.ndarray, step: int | None = None) -> np.ndarray:
    """Row-wise log normalization, naming the first degenerate row on failure."""
    try:
        return normalize_log(log_values, axis=-1)
    except DegeneratePosteriorError as exc:
        lv = np.atleast_2d(log_values)
        for i, row in enumerate(lv):
            if np.isnan(row).any() or np.isposinf(row).any() or not np.isfinite(row).any():
                raise DegeneratePosteriorError(str(exc), agent=i, step=step) from None
        raise


def _stack(neighbors: Sequence[tuple]) -> tuple[np.ndarray, np.ndarray]:
    if not neighbors:
        raise ValueError("need at least one neighbour")
    w = np.array([nb[0] for nb in neighbors], dtype=float)
    if (w < 0).any():
        raise ValueError("weights must be non-negative")
    beliefs = np.stack([nb[1].log_belief for nb in neighbors])
    return w, beliefs


def _signal_term(model: LikelihoodModel, s: int | None) -> np.ndarray | float:
    return 0.0 if s is None else model.log_likelihood(s)


# -- per-agent rules ----------------------------------------------------------

def bayes_update(prior: BeliefState, model: LikelihoodModel, s: int) -> BeliefState:
    return BeliefState(normalize_log(prior.log_belief + model.log_likelihood(s)))


def geometric_pool_update(neighbors: Sequence[tuple[float, BeliefState]], model: LikelihoodModel,
                          s: int | None) -> BeliefState:
    """Weighted geometric pool of neighbour beliefs followed by a Bayes step.

    ``neighbors`` must include the agent itself. ``s=None`` means no
    observation this round.
    """
    w, beliefs = _stack(neighbors)
    return BeliefState(normalize_log(weighted_log_sum(w, beliefs) + _signal_term(model, s)))


@dataclass(frozen=True, eq=False)
class AgentMemory:
    """State carried by one agent under the one-step-memory rule.

    ``prev_loglik_term`` is ``beta * log l(s|.)`` from the agent's previous
    update (zeros when it had no observation), which neighbours subtract.
    """

    current: BeliefState
    previous: BeliefState | None = None
    prev_loglik_term: np.ndarray | None = None

    @classmethod
    def initial(cls, prior: BeliefState) -> "AgentMemory":
        # mu_{-1} = mu_0 and beta_{-1} = 0
        return cls(prior, prior, np.zeros(len(prior)))


def _momentum_combine(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    """``num - den`` where ``-inf - -inf`` is ``-inf`` and ``finite - -inf`` is ``+inf``."""
    with np.errstate(invalid="ignore"):
        out = num - den
    both = np.isneginf(num) & np.isneginf(den)
    out = np.where(both, -np.inf, out)
    return np.where(np.isneginf(den) & ~np.isneginf(num), np.inf, out)


def accelerated_update(neighbors_curr: Sequence[tuple[float, BeliefState]],
                       neighbors_prev: Sequence[tuple[float, BeliefState, np.ndarray]],
                       sigma: float, model: LikelihoodModel, s: int | None) -> BeliefState:
    """One-step-memory update on a static graph.

    ``neighbors_curr`` holds ``(A_ij, mu_k^j)`` and ``neighbors_prev`` holds
    ``(A_ij, mu_{k-1}^j, beta_{k-1}^j log l^j(s_k^j|.))``, both including the
    agent itself.
    """
    w, cur = _stack(neighbors_curr)
    wp, prev = _stack([(nb[0], nb[1]) for nb in neighbors_prev])
    terms = prev + np.stack([np.asarray(nb[2], dtype=float) for nb in neighbors_prev])
    num = weighted_log_sum((1.0 + sigma) * w, cur)
    den = weighted_log_sum(sigma * wp, terms)
    out = _momentum_combine(num, den)
    with np.errstate(invalid="ignore"):
        out = out + _signal_term(model, s)
    return BeliefState(normalize_log(out))


def qlop_pool(kind: PoolKind | str, weights: Sequence[float], beliefs: Sequence[BeliefState]) -> BeliefState:
    """Quasi-linear opinion pool: arithmetic (``g(x)=x``) or geometric (``g(x)=log x``)."""
    kind = PoolKind(kind)
    w = np.asarray(weights, dtype=float)
    lb = np.stack([b.log_belief for b in beliefs])
    if kind is PoolKind.LINEAR:
        return BeliefState(normalize_log(_log(w @ np.exp(lb))))
    return BeliefState(normalize_log(weighted_log_sum(w, lb)))


def linear_rule_update(kind: UpdateRuleKind | str, neighbors: Sequence[tuple[float, BeliefState]],
                       own_model: LikelihoodModel | None = None, own_signal: int | None = None,
                       neighbor_models: Sequence[LikelihoodModel] | None = None,
                       neighbor_signals: Sequence[int | None] | None = None) -> BeliefState:
    """Arithmetic-pool rules.

    ``LinearPoolThenBayes`` pools the neighbours' beliefs and Bayes-updates
    with the agent's own likelihood. ``BayesThenLinearPool`` pools each
    neighbour's own posterior (their belief updated with their own signal).
    """
    kind = UpdateRuleKind(kind) if not isinstance(kind, UpdateRuleKind) else kind
    w, beliefs = _stack(neighbors)
    if kind is UpdateRuleKind.LINEAR_THEN_BAYES:
        pooled = _log(w @ np.exp(beliefs))
        return BeliefState(normalize_log(pooled + _signal_term(own_model, own_signal)))
    if kind is UpdateRuleKind.BAYES_THEN_LINEAR:
        if neighbor_models is None or neighbor_signals is None:
            raise ValueError("BayesThenLinearPool needs every neighbour's model and signal")
        posts = np.stack([
            normalize_log(b + _signal_term(mdl, sig))
            for b, mdl, sig in zip(beliefs, neighbor_models, neighbor_signals)
        ])
        return BeliefState(normalize_log(_log(w @ np.exp(posts))))
    raise ValueError(f"{kind.value} is not a linear-pool rule")


def likelihood_sharing_update(belief: BeliefState, gossip_weights: Sequence[float],
                              neighbor_likelihood_rows: Sequence[np.ndarray]) -> BeliefState:
    """Own belief times the weighted geometric mean of the neighbours' likelihood rows."""
    w = np.asarray(gossip_weights, dtype=float)
    rows = _log(np.stack([np.asarray(r, dtype=float) for r in neighbor_likelihood_rows]))
    return BeliefState(normalize_log(belief.log_belief + weighted_log_sum(w, rows)))


def externally_bayesian_check(weights: Sequence[float], beliefs: Sequence[BeliefState],
                              model: LikelihoodModel, s: int) -> float:
    """Max-abs gap between pool-then-Bayes and Bayes-each-then-pool (geometric pool)."""
    pooled_first = geometric_pool_update(list(zip(weights, beliefs)), model, s)
    updated = [bayes_update(b, model, s) for b in beliefs]
    bayes_first = qlop_pool(PoolKind.LOGARITHMIC, weights, updated)
    return float(np.max(np.abs(pooled_first.probabilities - bayes_first.probabilities)))


def linear_swap_gap(weights: Sequence[float], beliefs: Sequence[BeliefState],
                    model: LikelihoodModel, s: int) -> float:
    """Same comparison as :func:`externally_bayesian_check` for the arithmetic pool."""
    pooled_first = linear_rule_update(UpdateRuleKind.LINEAR_THEN_BAYES, list(zip(weights, beliefs)), model, s)
    updated = [bayes_update(b, model, s) for b in beliefs]
    bayes_first = qlop_pool(PoolKind.LINEAR, weights, updated)
    return float(np.max(np.abs(pooled_first.probabilities - bayes_first.probabilities)))


# -- network kernels ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class NetworkState:
    """All agents' log-beliefs at step ``k`` plus the memory the one-step-memory rule needs."""

    log_beliefs: np.ndarray
    prev_log_beliefs: np.ndarray | None = None
    prev_loglik: np.ndarray | None = None

    @classmethod
    def initial(cls, kind: UpdateRuleKind, priors: np.ndarray) -> "NetworkState":
        priors = np.asarray(priors, dtype=float)
        if kind is UpdateRuleKind.ACCELERATED:
            return cls(priors, priors, np.zeros_like(priors))
        if kind is UpdateRuleKind.CENTRALIZED:
            center = normalize_log(weighted_log_sum(np.full(len(priors), 1.0 / len(priors)), priors))
            return cls(np.broadcast_to(center, priors.shape).copy())
        return cls(priors)


def network_step(kind: UpdateRuleKind, state: NetworkState, weights: np.ndarray, loglik: np.ndarray,
                 sigma: float | None = None, step: int | None = None) -> NetworkState:
    """Advance every agent one synchronous round.

    ``loglik[i]`` is ``beta_k^i * log l^i(s_{k+1}^i|.)`` (a zero row when the
    agent has no observation). ``weights`` is ``A_k`` (``W_k`` for likelihood
    sharing, the lazy Metropolis matrix for the accelerated rule).
    """
    L = state.log_beliefs
    if kind is UpdateRuleKind.GEOMETRIC:
        new = normalize_rows(weighted_log_sum(weights, L) + loglik, step)
        return NetworkState(new)
    if kind is UpdateRuleKind.ACCELERATED:
        if sigma is None:
            raise ValueError("accelerated rule needs sigma")
        num = weighted_log_sum((1.0 + sigma) * weights, L)
        den = weighted_log_sum(sigma * weights, state.prev_log_beliefs + state.prev_loglik)
        with np.errstate(invalid="ignore"):
            raw = _momentum_combine(num, den) + loglik
        new = normalize_rows(raw, step)
        return NetworkState(new, L, loglik)
    if kind is UpdateRuleKind.LINEAR_THEN_BAYES:
        pooled = _log(weights @ np.exp(L))
        return NetworkState(normalize_rows(pooled + loglik, step))
    if kind is UpdateRuleKind.BAYES_THEN_LINEAR:
        posts = normalize_rows(L + loglik, step)
        return NetworkState(normalize_rows(_log(weights @ np.exp(posts)), step))
    if kind is UpdateRuleKind.LIKELIHOOD_SHARING:
        return NetworkState(normalize_rows(L + weighted_log_sum(weights, loglik), step))
    if kind is UpdateRuleKind.CENTRALIZED:
        center = normalize_rows(L[:1] + loglik.sum(axis=0, keepdims=True), step)
        return NetworkState(np.broadcast_to(center, L.shape).copy())
    raise ValueError(f"unsupported rule {kind!r}")
