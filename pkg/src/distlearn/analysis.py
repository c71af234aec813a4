"""Information-theoretic quantities and explicit concentration-rate constants.

All logarithms are natural (nats).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Collection, Sequence

import numpy as np

from .core import AgentSpec, stack_models
from .graphs import AcceleratedOperator, GraphSchedule, mixing_bound_lambda

DEFAULT_TOL = 1e-12


class NoSuboptimalHypothesisError(ValueError):
    """Every hypothesis is optimal, so the gap constant is undefined."""


def kl_divergence(p, q) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("distributions must have the same length")
    support = p > 0
    if (q[support] <= 0).any():
        raise ValueError("q must be positive wherever p is positive")
    ps, qs = p[support], q[support]
    return float(np.sum(ps * (np.log(ps) - np.log(qs))))


def kl_matrix(agents: Sequence[AgentSpec]) -> np.ndarray:
    """``out[i, p] = KL(f^i || l^i(.|theta_p))``."""
    m = stack_models(agents)
    out = np.empty((len(agents), m))
    for i, a in enumerate(agents):
        f = a.likelihood.true_distribution
        for p in range(m):
            out[i, p] = kl_divergence(f, a.likelihood.table[p])
    return out


def objective(theta: int, agents: Sequence[AgentSpec]) -> float:
    """Sum over agents of ``KL(f^i || l^i(.|theta))``."""
    return float(sum(kl_divergence(a.likelihood.true_distribution, a.likelihood.table[theta]) for a in agents))


@dataclass(frozen=True, eq=False)
class ConfidenceProfile:
    values: np.ndarray
    subset: frozenset
    rates: tuple

    def __getitem__(self, theta: int) -> float:
        return float(self.values[theta])

    def __add__(self, other: "ConfidenceProfile") -> "ConfidenceProfile":
        if self.subset & other.subset:
            raise ValueError("profiles must come from disjoint agent subsets")
        return ConfidenceProfile(self.values + other.values, self.subset | other.subset, self.rates)


def group_confidence(W: Collection[int] | None, agents: Sequence[AgentSpec]) -> ConfidenceProfile:
    """``C(theta) = -sum_{i in W} q^i KL(f^i || l^i(.|theta))``; ``W=None`` means all agents."""
    if W is None:
        W = range(len(agents))
    W = frozenset(int(i) for i in W)
    if not W:
        raise ValueError("agent subset must be non-empty")
    m = stack_models(agents)
    values = np.zeros(m)
    for i in sorted(W):
        q = agents[i].observation_rate
        if q == 0:
            continue
        f = agents[i].likelihood.true_distribution
        table = agents[i].likelihood.table
        values -= q * np.array([kl_divergence(f, table[p]) for p in range(m)])
    return ConfidenceProfile(values, W, tuple(a.observation_rate for a in agents))


def _tie_band(values: np.ndarray, tol: float) -> float:
    # relative band, with an absolute floor for values near zero
    return tol * max(1.0, float(np.max(np.abs(values))))


def optimal_set(agents: Sequence[AgentSpec], tol: float = DEFAULT_TOL, W: Collection[int] | None = None) -> frozenset[int]:
    """Hypothesis indices within ``tol`` (relative) of the maximal group confidence."""
    if tol < 0:
        raise ValueError("tol must be >= 0")
    c = group_confidence(W, agents).values
    best = c.max()
    return frozenset(int(p) for p in np.flatnonzero(c >= best - _tie_band(c, tol)))


def observationally_equivalent(W: Collection[int], theta_a: int, theta_b: int,
                               agents: Sequence[AgentSpec], tol: float = DEFAULT_TOL) -> bool:
    if tol < 0:
        raise ValueError("tol must be >= 0")
    c = group_confidence(W, agents).values
    return abs(c[theta_a] - c[theta_b]) <= tol


def log_belief_ratio(log_beliefs: np.ndarray, theta_v: int, theta_w: int) -> np.ndarray:
    """Per-agent ``log mu(theta_v) / mu(theta_w)`` from an ``(n, m)`` log-belief array."""
    lb = np.atleast_2d(np.asarray(log_beliefs, dtype=float))
    if np.isneginf(lb[:, theta_w]).any():
        raise ValueError("reference hypothesis has zero belief for some agent")
    return lb[:, theta_v] - lb[:, theta_w]


@dataclass(frozen=True)
class RateConstants:
    theorem: int
    n: int
    alpha: float
    eta: float | None
    B: int
    lam: float
    gamma1: tuple
    gamma2: float
    N_rho: int
    rho: float
    optimal: frozenset
    U: int | None = None
    sigma: float | None = None

    def log_bound(self, k, agent: int = 0):
        return -0.5 * np.asarray(k, dtype=float) * self.gamma2 + self.gamma1[agent]


def _prior_term(priors: np.ndarray, optimal: frozenset, suboptimal: Sequence[int]) -> float:
    """``max_{w in Theta-hat*, v not in Theta*} max_i log mu_0^i(v) / mu_0^i(w)``."""
    positive = np.all(np.isfinite(priors[:, sorted(optimal)]), axis=0)
    hat = [w for w, ok in zip(sorted(optimal), positive) if ok]
    if not hat:
        raise ValueError("no optimal hypothesis has positive prior for every agent")
    best = -np.inf
    for w in hat:
        for v in suboptimal:
            best = max(best, float(np.max(priors[:, v] - priors[:, w])))
    return best


def rate_constants(agents: Sequence[AgentSpec], graph: GraphSchedule | AcceleratedOperator, rho: float,
                   theorem: int = 2, priors: np.ndarray | None = None, eta: float | None = None,
                   eta_horizon: int | None = None, tol: float = DEFAULT_TOL) -> RateConstants:
    """Evaluate every constant of the concentration bound for one configuration.

    ``theorem=2`` is the time-varying geometric rule (``graph`` a schedule),
    ``theorem=3`` the one-step-memory rule (``graph`` an accelerated operator).
    ``eta`` defaults to the smallest positive weight realized over
    ``eta_horizon`` steps (one window by default).
    """
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    n = len(agents)
    m = stack_models(agents)
    opt = optimal_set(agents, tol)
    if len(opt) == m:
        raise NoSuboptimalHypothesisError("every hypothesis is optimal; gap constant undefined")
    c = group_confidence(None, agents).values
    best = max(c[p] for p in opt)
    suboptimal = [p for p in range(m) if p not in opt]
    gamma2 = float(min(best - c[v] for v in suboptimal) / n)
    alpha = min(a.likelihood.support_floor for a in agents)
    if not 0 < alpha < 1:
        raise ValueError(f"support floor alpha={alpha} must lie in (0, 1)")
    log_inv_alpha = math.log(1.0 / alpha)
    log_n = math.log(n)
    if priors is None:
        priors = np.stack([a.prior.log_belief for a in agents])

    if theorem == 2:
        if not isinstance(graph, GraphSchedule):
            raise TypeError("time-varying constants (theorem=2) need a GraphSchedule")
        if eta is None:
            eta = graph.realized_eta(0, eta_horizon or graph.B)
        lam = mixing_bound_lambda(n, eta, graph.B)
        g1 = _prior_term(priors, opt, suboptimal) + 12.0 * log_n / (1.0 - lam) * log_inv_alpha
        n_rho = math.ceil(8.0 * math.log(alpha) ** 2 * math.log(1.0 / rho) / gamma2 ** 2)
        return RateConstants(2, n, alpha, eta, graph.B, lam, (g1,) * n, gamma2, n_rho, rho, opt)
    if theorem == 3:
        if not isinstance(graph, AcceleratedOperator):
            raise TypeError("one-step-memory constants (theorem=3) need an AcceleratedOperator")
        uniform = np.allclose(priors, -math.log(m), atol=1e-12, rtol=0)
        if not uniform:
            raise ValueError("one-step-memory constants require uniform priors")
        lam = 1.0 - 1.0 / (18.0 * graph.U)
        g1 = 4.0 * log_n / (1.0 - lam) * log_inv_alpha
        n_rho = math.ceil(48.0 * math.log(alpha) ** 2 * math.log(1.0 / rho) / gamma2 ** 2)
        return RateConstants(3, n, alpha, eta, 1, lam, (g1,) * n, gamma2, n_rho, rho, opt,
                             U=graph.U, sigma=graph.sigma)
    raise ValueError("theorem must be 2 or 3")


def bound_curve(consts: RateConstants, k, agent: int = 0, clamp: bool = False):
    """``exp(-k gamma2 / 2 + gamma1^i)``; ``clamp`` caps at 1 for display."""
    log_b = consts.log_bound(k, agent)
    if clamp:
        log_b = np.minimum(log_b, 0.0)
    with np.errstate(over="ignore"):
        raw = np.exp(log_b)
    return raw if np.ndim(raw) else float(raw)
