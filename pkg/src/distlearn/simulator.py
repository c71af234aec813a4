"""Synchronous-round simulation engine, trajectories and Monte Carlo ensembles."""

from __future__ import annotations

import hashlib
import io
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Collection, Sequence

import numpy as np

from .analysis import NoSuboptimalHypothesisError, RateConstants, optimal_set, rate_constants
from .core import AgentSpec, DegeneratePosteriorError, stack_models
from .graphs import (AcceleratedOperator, GraphSchedule, StaticSchedule, TemplateSchedule,
                     check_b_strong_connectivity)
from .rules import NetworkState, UpdateRuleKind, network_step

logger = logging.getLogger(__name__)

CSV_HEADER = "k,agent,theta,belief,beta"
_DRAW_BLOCK = 256


# -- randomness ---------------------------------------------------------------

class CounterRNG:
    """Philox-backed uniforms addressed by ``(seed, k, agent, stream)``.

    Stream 0 drives the observation-availability flag, stream 1 the signal.
    The value at a given address never depends on how many draws were made
    before it, so parallel or partial evaluation reproduces the same numbers.
    """

    STREAMS = 2

    def __init__(self, seed: int, n: int):
        self.seed = int(seed) & ((1 << 64) - 1)
        self.n = n
        self._blocks_per_step = -(-(n * self.STREAMS) // 4)

    def uniforms(self, k0: int, count: int) -> np.ndarray:
        """Array ``(count, n, 2)`` of uniforms in ``[0, 1)`` for steps ``k0 .. k0+count-1``."""
        per_step = 4 * self._blocks_per_step
        bitgen = np.random.Philox(key=self.seed, counter=[k0 * self._blocks_per_step, 0, 0, 0])
        raw = bitgen.random_raw(count * per_step).reshape(count, per_step)
        raw = raw[:, : self.n * self.STREAMS].reshape(count, self.n, self.STREAMS)
        return (raw >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def derive_seed(master: int, index: int) -> int:
    """Independent 64-bit seed for run ``index`` of an ensemble."""
    ss = np.random.SeedSequence([int(master) & ((1 << 64) - 1), int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


class ObservationModel:
    """Vectorized sampler for every agent's availability flag and signal."""

    def __init__(self, agents: Sequence[AgentSpec]):
        self.m = stack_models(agents)
        self.n = len(agents)
        smax = max(a.likelihood.num_signals for a in agents)
        self.q = np.array([a.observation_rate for a in agents])
        cdf = np.ones((self.n, smax))
        last = np.zeros(self.n, dtype=int)
        log_tables = np.zeros((self.n, smax, self.m))
        for i, a in enumerate(agents):
            f = a.likelihood.true_distribution
            c = np.cumsum(f)
            cdf[i, : f.size] = c
            cdf[i, f.size - 1:] = np.inf
            last[i] = int(np.flatnonzero(f > 0).max()) if (f > 0).any() else 0
            log_tables[i, : f.size] = a.likelihood.log_table.T
        self.cdf = cdf
        self.last = last
        self.log_tables = log_tables

    def sample(self, u: np.ndarray):
        """Map uniforms ``(K, n, 2)`` to (beta, signal index, loglik) arrays."""
        beta = u[..., 0] < self.q
        sig = (u[..., 1][..., None] >= self.cdf).sum(axis=-1)
        sig = np.minimum(sig, self.last)
        ll = self.log_tables[np.arange(self.n), sig]  # (K, n, m)
        ll = np.where(beta[..., None], ll, 0.0)
        sig = np.where(beta, sig, -1)
        return beta, sig, ll


# -- configuration ------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SimulationConfig:
    agents: tuple
    schedule: GraphSchedule | AcceleratedOperator
    rule: UpdateRuleKind
    horizon: int
    seed: int
    epsilon: float = 0.01
    record_stride: int = 1
    stop_on_convergence: bool = True

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))
        object.__setattr__(self, "rule", UpdateRuleKind(self.rule))
        for msg in self.problems():
            raise ValueError(msg)

    def problems(self) -> list[str]:
        out = []
        if self.horizon < 1:
            out.append("horizon must be >= 1")
        if not 0 < self.epsilon < 1:
            out.append("epsilon must lie in (0, 1)")
        if self.record_stride < 1:
            out.append("record_stride must be >= 1")
        if not self.agents:
            out.append("need at least one agent")
        else:
            stack_models(self.agents)
            if self.n != len(self.agents):
                out.append(f"schedule has {self.n} nodes but there are {len(self.agents)} agents")
        if self.rule is UpdateRuleKind.ACCELERATED:
            if not isinstance(self.schedule, AcceleratedOperator):
                out.append("AcceleratedGeometric requires a static graph (accelerated operator)")
            m = self.agents[0].likelihood.num_hypotheses if self.agents else 1
            for i, a in enumerate(self.agents):
                if not np.allclose(a.prior.log_belief, -math.log(m), atol=1e-12, rtol=0):
                    out.append(f"AcceleratedGeometric requires uniform priors (agent {i})")
                    break
        return out

    @property
    def n(self) -> int:
        return self.schedule.n

    @property
    def sigma(self) -> float | None:
        return self.schedule.sigma if isinstance(self.schedule, AcceleratedOperator) else None

    @property
    def graph_schedule(self) -> GraphSchedule:
        if isinstance(self.schedule, AcceleratedOperator):
            return self.schedule.schedule()
        return self.schedule

    def weights(self, k: int) -> np.ndarray:
        if isinstance(self.schedule, AcceleratedOperator):
            return self.schedule.base.entries
        return self.schedule.matrix(k)

    def priors(self) -> np.ndarray:
        return np.stack([a.prior.log_belief for a in self.agents])

    def with_seed(self, seed: int) -> "SimulationConfig":
        return SimulationConfig(self.agents, self.schedule, self.rule, self.horizon, seed,
                                self.epsilon, self.record_stride, self.stop_on_convergence)

    def with_rule(self, rule: UpdateRuleKind, schedule=None) -> "SimulationConfig":
        return SimulationConfig(self.agents, schedule if schedule is not None else self.schedule, rule,
                                self.horizon, self.seed, self.epsilon, self.record_stride,
                                self.stop_on_convergence)

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for a in self.agents:
            h.update(a.likelihood.table.tobytes())
            h.update(a.likelihood.true_distribution.tobytes())
            h.update(np.float64(a.observation_rate).tobytes())
            h.update(a.prior.log_belief.tobytes())
        h.update(_describe_schedule(self.schedule).encode())
        h.update(f"{self.rule.value}|{self.horizon}|{self.epsilon!r}|{self.record_stride}|"
                 f"{self.stop_on_convergence}".encode())
        return h.hexdigest()[:16]


def _describe_schedule(schedule) -> str:
    if isinstance(schedule, AcceleratedOperator):
        return f"accelerated|U={schedule.U}|{sorted(schedule.graph.edges)}"
    if isinstance(schedule, StaticSchedule):
        return f"static|{sorted(schedule.graph(0).edges)}|{schedule.matrix(0).tobytes().hex()}"
    if isinstance(schedule, TemplateSchedule):
        parts = [[sorted(g.edges) for g in t] for t in schedule.templates]
        return f"templates|seed={schedule.seed}|{parts}|{schedule.weights_fn.__name__}"
    return f"{type(schedule).__name__}|{[sorted(schedule.graph(k).edges) for k in range(schedule.B)]}"


# -- trajectories ---------------------------------------------------------------

@dataclass(eq=False)
class Trajectory:
    """Recorded snapshots of a single run.

    ``betas[r]`` / ``signals[r]`` are the availability flags and signal indices
    consumed by the update that produced snapshot ``r`` (zeros / -1 at k=0).
    """

    steps: np.ndarray
    log_beliefs: np.ndarray
    betas: np.ndarray
    signals: np.ndarray
    labels: tuple
    seed: int
    config_hash: str
    optimal: frozenset
    convergence_step: int | None = None

    @property
    def beliefs(self) -> np.ndarray:
        return np.exp(self.log_beliefs)

    @property
    def final_beliefs(self) -> np.ndarray:
        return np.exp(self.log_beliefs[-1])

    def max_off_optimal(self, optimal: Collection | None = None) -> np.ndarray:
        optimal = self.optimal if optimal is None else optimal
        off = [p for p in range(self.log_beliefs.shape[2]) if p not in optimal]
        if not off:
            return np.full(len(self.steps), np.nan)
        return np.exp(self.log_beliefs[:, :, off].max(axis=(1, 2)))

    def write_csv(self, fh) -> None:
        fh.write(CSV_HEADER + "\n")
        probs = self.beliefs
        n, m = probs.shape[1], probs.shape[2]
        for r, k in enumerate(self.steps):
            for i in range(n):
                b = int(self.betas[r, i])
                for p in range(m):
                    fh.write(f"{int(k)},{i},{self.labels[p]},{probs[r, i, p]:.17g},{b}\n")

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()



def _labels(m: int) -> tuple:
    return tuple(f"theta{p + 1}" for p in range(m))


def step(state: NetworkState, k: int, config: SimulationConfig, rng: CounterRNG | None = None,
         sampler: ObservationModel | None = None) -> NetworkState:
    """Advance all agents from step ``k`` to ``k+1`` using the draws keyed by ``(seed, k, i)``."""
    rng = rng or CounterRNG(config.seed, config.n)
    sampler = sampler or ObservationModel(config.agents)
    _, _, ll = sampler.sample(rng.uniforms(k, 1))
    return network_step(config.rule, state, config.weights(k), ll[0], config.sigma, step=k)


def _optimal(agents) -> frozenset:
    return optimal_set(agents)


def run(config: SimulationConfig, labels: Sequence | None = None) -> Trajectory:
    """Simulate up to ``horizon`` steps, stopping early on convergence if configured."""
    n, m = config.n, config.agents[0].likelihood.num_hypotheses
    optimal = _optimal(config.agents)
    off = np.array([p for p in range(m) if p not in optimal], dtype=int)
    log_eps = math.log(config.epsilon)
    rng = CounterRNG(config.seed, n)
    sampler = ObservationModel(config.agents)
    state = NetworkState.initial(config.rule, config.priors())

    steps, snaps, betas, sigs = [0], [state.log_beliefs], [np.zeros(n, dtype=np.int8)], [np.full(n, -1)]
    converged = None
    if off.size and state.log_beliefs[:, off].max() < log_eps:
        converged = 0
    k = 0
    while k < config.horizon and not (converged is not None and config.stop_on_convergence):
        count = min(_DRAW_BLOCK, config.horizon - k)
        beta, sig, ll = sampler.sample(rng.uniforms(k, count))
        for b in range(count):
            state = network_step(config.rule, state, config.weights(k), ll[b], config.sigma, step=k)
            k += 1
            if k % config.record_stride == 0 or k == config.horizon:
                steps.append(k)
                snaps.append(state.log_beliefs)
                betas.append(beta[b].astype(np.int8))
                sigs.append(sig[b])
                if converged is None and off.size and state.log_beliefs[:, off].max() < log_eps:
                    converged = k
                    if config.stop_on_convergence:
                        break
    return Trajectory(np.array(steps), np.stack(snaps), np.stack(betas), np.stack(sigs),
                      tuple(labels) if labels is not None else _labels(m), config.seed,
                      config.fingerprint(), optimal, converged)


def convergence_time(traj: Trajectory, optimal: Collection[int], epsilon: float) -> int | None:
    """First recorded step where every agent's belief on every non-optimal hypothesis is below ``epsilon``."""
    m = traj.log_beliefs.shape[2]
    off = [p for p in range(m) if p not in optimal]
    if not optimal or not off:
        raise ValueError("optimal set must be a non-empty strict subset")
    worst = traj.log_beliefs[:, :, off].max(axis=(1, 2))
    hits = np.flatnonzero(worst < math.log(epsilon))
    return int(traj.steps[hits[0]]) if hits.size else None


# -- ensembles ----------------------------------------------------------------

@dataclass(eq=False)
class RunResult:
    index: int
    seed: int
    convergence_step: int | None
    violation: bool | None
    failed: str | None
    steps: np.ndarray
    max_off_optimal: np.ndarray
    final_log_beliefs: np.ndarray | None
    worst_margin: float | None = None


@dataclass(eq=False)
class MonteCarloSummary:
    runs: int
    seeds: list
    convergence_times: list
    bound_violations: list
    failures: list
    steps: np.ndarray
    quantile_levels: tuple
    quantiles: np.ndarray
    constants: RateConstants | None
    bound_checked_steps: int
    worst_margins: list = field(default_factory=list)
    final_log_beliefs: list = field(default_factory=list)
    envelope: np.ndarray | None = None

    @property
    def bound_applicable(self) -> bool:
        return self.constants is not None

    @property
    def violation_fraction(self) -> float | None:
        if self.constants is None:
            return None
        return sum(bool(v) for v in self.bound_violations) / self.runs

    def converged_times(self) -> np.ndarray:
        return np.array([t for t in self.convergence_times if t is not None], dtype=float)

    def median_convergence_time(self) -> float:
        """Median with non-converged runs counted as +inf."""
        t = np.array([math.inf if v is None else v for v in self.convergence_times], dtype=float)
        return float(np.median(t))

    def mean_convergence_time(self) -> float:
        t = np.array([math.inf if v is None else v for v in self.convergence_times], dtype=float)
        return float(np.mean(t))


def bound_constants(config: SimulationConfig, rho: float) -> RateConstants | None:
    """Constants of the concentration bound matching the configured rule, if one applies."""
    sched = config.graph_schedule
    if not check_b_strong_connectivity(sched, 0, sched.B):
        return None  # assumptions of the bound do not hold
    try:
        if config.rule is UpdateRuleKind.GEOMETRIC:
            horizon = max(sched.B, min(config.horizon, 4096) // sched.B * sched.B)
            return rate_constants(config.agents, sched, rho, theorem=2, eta_horizon=horizon)
        if config.rule is UpdateRuleKind.ACCELERATED:
            return rate_constants(config.agents, config.schedule, rho, theorem=3)
    except NoSuboptimalHypothesisError:
        return None
    return None


def _simulate_tracked(config: SimulationConfig, index: int, seed: int, consts: RateConstants | None,
                      optimal: frozenset) -> RunResult:
    n, m = config.n, config.agents[0].likelihood.num_hypotheses
    off = np.array([p for p in range(m) if p not in optimal], dtype=int)
    log_eps = math.log(config.epsilon)
    rng = CounterRNG(seed, n)
    sampler = ObservationModel(config.agents)
    state = NetworkState.initial(config.rule, config.priors())
    steps, worst = [0], []
    violation = False if consts is not None else None
    margin = math.inf if consts is not None else None
    converged = None

    def worst_off(L):
        return float(L[:, off].max()) if off.size else math.nan

    w0 = worst_off(state.log_beliefs)
    worst.append(w0)
    if off.size and w0 < log_eps:
        converged = 0
    k = 0
    try:
        while k < config.horizon and not (converged is not None and config.stop_on_convergence):
            count = min(_DRAW_BLOCK, config.horizon - k)
            _, _, ll = sampler.sample(rng.uniforms(k, count))
            for b in range(count):
                state = network_step(config.rule, state, config.weights(k), ll[b], config.sigma, step=k)
                k += 1
                L = state.log_beliefs
                w = worst_off(L)
                if consts is not None and k >= consts.N_rho:
                    # bound is agent-independent, so the worst agent decides
                    gap = consts.log_bound(k) - w
                    margin = min(margin, gap)
                    if gap < 0:
                        violation = True
                if k % config.record_stride == 0 or k == config.horizon:
                    steps.append(k)
                    worst.append(w)
                    if converged is None and off.size and w < log_eps:
                        converged = k
                        if config.stop_on_convergence:
                            break
                if k == config.horizon:
                    break
    except DegeneratePosteriorError as exc:
        logger.warning("run %d (seed %d) failed: %s", index, seed, exc)
        return RunResult(index, seed, None, violation, str(exc), np.array(steps), np.exp(worst), None, margin)
    return RunResult(index, seed, converged, violation, None, np.array(steps), np.exp(worst),
                     state.log_beliefs, margin)


def _run_batch(args):
    config, indices, seeds, consts, optimal = args
    return [_simulate_tracked(config, i, s, consts, optimal) for i, s in zip(indices, seeds)]


QUANTILES = (0.1, 0.5, 0.9)


def monte_carlo(config: SimulationConfig, runs: int, rho: float = 0.1, workers: int = 1) -> MonteCarloSummary:
    """Independent runs with seeds derived from ``config.seed``; merged by run index."""
    if runs < 1:
        raise ValueError("runs must be >= 1")
    consts = bound_constants(config, rho)
    optimal = _optimal(config.agents)
    seeds = [derive_seed(config.seed, r) for r in range(runs)]
    indices = list(range(runs))
    if workers <= 1 or runs == 1:
        results = _run_batch((config, indices, seeds, consts, optimal))
    else:
        chunks = [(config, indices[w::workers], seeds[w::workers], consts, optimal) for w in range(workers)]
        chunks = [c for c in chunks if c[1]]
        with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
            results = [r for batch in pool.map(_run_batch, chunks) for r in batch]
        results.sort(key=lambda r: r.index)
    return _summarize(results, consts)


def _summarize(results: list[RunResult], consts: RateConstants | None) -> MonteCarloSummary:
    longest = max(results, key=lambda r: len(r.steps)).steps
    table = np.full((len(results), len(longest)), np.nan)
    for r, res in enumerate(results):
        table[r, : len(res.max_off_optimal)] = res.max_off_optimal
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        q = np.nanquantile(table, QUANTILES, axis=0)
        envelope = np.nanmax(table, axis=0)
    horizon = int(longest[-1]) if len(longest) else 0
    checked = max(0, horizon - consts.N_rho + 1) if consts is not None else 0
    return MonteCarloSummary(
        runs=len(results),
        seeds=[r.seed for r in results],
        convergence_times=[r.convergence_step for r in results],
        bound_violations=[r.violation for r in results],
        failures=[r.failed for r in results],
        steps=longest,
        quantile_levels=QUANTILES,
        quantiles=q,
        constants=consts,
        bound_checked_steps=checked,
        worst_margins=[r.worst_margin for r in results],
        final_log_beliefs=[r.final_log_beliefs for r in results],
        envelope=envelope,
    )
