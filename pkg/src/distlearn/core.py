"""Domain model: hypotheses, signal alphabets, likelihood tables and beliefs.

Beliefs are kept in log-space. An exactly-zero belief is ``-inf`` and is
propagated as such by every update rule; nothing is clamped.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np

ROW_TOL = 1e-12
BELIEF_TOL = 1e-9


class DegeneratePosteriorError(ArithmeticError):
    """Every hypothesis received zero (or an undefined) posterior mass."""

    def __init__(self, message: str, agent: int | None = None, step: int | None = None):
        super().__init__(message)
        self.agent = agent
        self.step = step

    def __str__(self) -> str:
        base = super().__str__()
        where = []
        if self.agent is not None:
            where.append(f"agent={self.agent}")
        if self.step is not None:
            where.append(f"step={self.step}")
        return f"{base} ({', '.join(where)})" if where else base


@dataclass(frozen=True)
class HypothesisSet:
    labels: tuple

    def __post_init__(self):
        labels = tuple(self.labels)
        if len(labels) < 1:
            raise ValueError("hypothesis set must be non-empty")
        if len(set(labels)) != len(labels):
            raise ValueError("hypothesis labels must be unique")
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.labels)

    def index(self, label: Hashable) -> int:
        return self.labels.index(label)

    @classmethod
    def numbered(cls, m: int) -> "HypothesisSet":
        return cls(tuple(f"theta{p + 1}" for p in range(m)))


@dataclass(frozen=True)
class SignalAlphabet:
    symbols: tuple

    def __post_init__(self):
        symbols = tuple(self.symbols)
        if not symbols:
            raise ValueError("signal alphabet must be non-empty")
        if len(set(symbols)) != len(symbols):
            raise ValueError("signal symbols must be unique")
        object.__setattr__(self, "symbols", symbols)

    def __len__(self) -> int:
        return len(self.symbols)

    def index(self, symbol: Hashable) -> int:
        return self.symbols.index(symbol)


def _readonly(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LikelihoodModel:
    """Per-agent likelihood table and the (unknown to the agent) true law.

    Attributes
    ----------
    table : ndarray, shape (m, |S|)
        Row ``p`` is the signal distribution under hypothesis ``p``.
    true_distribution : ndarray, shape (|S|,)
        The distribution the agent's signals are actually drawn from.
    support_floor : float
        Lower bound on ``table[:, s]`` over the support of the true law.
    alphabet : SignalAlphabet, optional
        Defaults to the integers ``0 .. |S|-1``.

    Construction does not validate; use :func:`validate_model`.
    """

    table: np.ndarray
    true_distribution: np.ndarray
    support_floor: float
    alphabet: SignalAlphabet | None = None
    log_table: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        table = _readonly(self.table)
        if table.ndim != 2:
            raise ValueError("likelihood table must be 2-D (hypotheses x signals)")
        f = _readonly(self.true_distribution)
        if f.shape != (table.shape[1],):
            raise ValueError("true distribution length must match the alphabet size")
        alphabet = self.alphabet
        if alphabet is None:
            alphabet = SignalAlphabet(tuple(range(table.shape[1])))
        elif len(alphabet) != table.shape[1]:
            raise ValueError("alphabet size must match the likelihood table")
        object.__setattr__(self, "table", table)
        object.__setattr__(self, "true_distribution", f)
        object.__setattr__(self, "support_floor", float(self.support_floor))
        object.__setattr__(self, "alphabet", alphabet)
        with np.errstate(divide="ignore", invalid="ignore"):
            log_table = np.log(table)
        log_table.setflags(write=False)
        object.__setattr__(self, "log_table", log_table)

    @property
    def num_hypotheses(self) -> int:
        return self.table.shape[0]

    @property
    def num_signals(self) -> int:
        return self.table.shape[1]

    def realized_floor(self) -> float:
        """min l(s|theta) over the support of the true distribution."""
        support = self.true_distribution > 0
        if not support.any():
            return 0.0
        return float(self.table[:, support].min())

    def log_likelihood(self, s: int) -> np.ndarray:
        """Column ``log l(s|.)`` for signal index ``s``."""
        return self.log_table[:, s]

    @classmethod
    def with_realized_floor(cls, table, true_distribution, alphabet=None) -> "LikelihoodModel":
        """Build a model whose support floor is the realized minimum."""
        model = cls(table, true_distribution, 0.0, alphabet)
        return cls(model.table, model.true_distribution, model.realized_floor(), alphabet)


@dataclass(frozen=True, eq=False)
class BeliefState:
    """Probability vector over the hypotheses, stored as ``log mu``."""

    log_belief: np.ndarray

    def __post_init__(self):
        lb = np.array(self.log_belief, dtype=float)
        if lb.ndim != 1 or lb.size == 0:
            raise ValueError("log belief must be a non-empty vector")
        if np.isnan(lb).any() or np.isposinf(lb).any():
            raise ValueError("log belief entries must be finite or -inf")
        if not np.isfinite(lb).any():
            raise ValueError("at least one belief entry must be positive")
        lb.setflags(write=False)
        object.__setattr__(self, "log_belief", lb)

    def __len__(self) -> int:
        return self.log_belief.size

    @property
    def probabilities(self) -> np.ndarray:
        return np.exp(self.log_belief)

    def is_normalized(self, tol: float = BELIEF_TOL) -> bool:
        return abs(float(np.exp(self.log_belief).sum()) - 1.0) <= tol

    @classmethod
    def from_log(cls, log_values) -> "BeliefState":
        """Normalize arbitrary log-weights; raises if all are ``-inf``."""
        return cls(normalize_log(np.asarray(log_values, dtype=float)))

    @classmethod
    def from_probabilities(cls, p) -> "BeliefState":
        p = np.asarray(p, dtype=float)
        if (p < 0).any():
            raise ValueError("probabilities must be non-negative")
        with np.errstate(divide="ignore"):
            return cls.from_log(np.log(p))


def normalize_log(log_values: np.ndarray, axis: int = -1) -> np.ndarray:
    """Subtract log-sum-exp along ``axis``.

    Rows that are entirely ``-inf`` (or contain ``+inf``/NaN) raise
    :class:`DegeneratePosteriorError`.
    """
    lv = np.asarray(log_values, dtype=float)
    top = lv.max(axis=axis, keepdims=True)
    if np.isnan(top).any() or np.isposinf(top).any():
        raise DegeneratePosteriorError("undefined posterior (NaN or +inf log-weight)")
    if np.isneginf(top).any():
        raise DegeneratePosteriorError("posterior normalizer is zero")
    out = lv - top
    out -= np.log(np.exp(out).sum(axis=axis, keepdims=True))
    # second pass so the exp-sum is 1 to rounding
    out -= np.log(np.exp(out).sum(axis=axis, keepdims=True))
    return out


@dataclass(frozen=True, eq=False)
class AgentSpec:
    likelihood: LikelihoodModel
    observation_rate: float = 1.0
    prior: BeliefState | None = None

    def __post_init__(self):
        q = float(self.observation_rate)
        if not 0.0 <= q <= 1.0:
            raise ValueError("observation rate must lie in [0, 1]")
        object.__setattr__(self, "observation_rate", q)
        prior = self.prior
        if prior is None:
            prior = uniform_prior(self.likelihood.num_hypotheses)
        if len(prior) != self.likelihood.num_hypotheses:
            raise ValueError("prior length must match the number of hypotheses")
        if not prior.is_normalized():
            raise ValueError("prior must sum to 1")
        object.__setattr__(self, "prior", prior)


def uniform_prior(m: int) -> BeliefState:
    if m < 1:
        raise ValueError("uniform prior needs m >= 1")
    return BeliefState(np.full(m, -np.log(m)))


def validate_model(model: LikelihoodModel) -> list[str]:
    """Return human-readable violations of the likelihood-model invariants."""
    violations: list[str] = []
    table, f = model.table, model.true_distribution
    if not np.isfinite(table).all():
        violations.append("likelihood table contains non-finite entries")
    for p, row in enumerate(table):
        if (row < 0).any() or (row > 1).any():
            violations.append(f"hypothesis row {p}: entries outside [0, 1]")
        total = row.sum()
        if abs(total - 1.0) > ROW_TOL:
            violations.append(f"hypothesis row {p}: sums to {float(total)!r}, not 1")
    if (f < 0).any() or (f > 1).any():
        violations.append("true distribution: entries outside [0, 1]")
    if abs(f.sum() - 1.0) > ROW_TOL:
        violations.append(f"true distribution: sums to {float(f.sum())!r}, not 1")
    alpha = model.support_floor
    if not alpha > 0:
        violations.append(f"support floor alpha={alpha!r} must be > 0")
    for s in np.flatnonzero(f > 0):
        for p in np.flatnonzero(table[:, s] < alpha):
            violations.append(
                f"support: f({s})>0 but l({s}|hypothesis {p})={float(table[p, s])!r} < alpha={alpha!r}"
            )
    return violations


def stack_models(agents: Sequence[AgentSpec]) -> int:
    """Check all agents share the hypothesis count and return it."""
    ms = {a.likelihood.num_hypotheses for a in agents}
    if len(ms) != 1:
        raise ValueError(f"agents disagree on the number of hypotheses: {sorted(ms)}")
    return ms.pop()
