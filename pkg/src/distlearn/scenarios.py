"""Builders for the experiment scenarios: two-agent Gaussian example,
clique merging, topology sweeps and grid source localization.

Continuous observation models are discretized onto a finite alphabet of
bin midpoints and renormalized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .analysis import optimal_set
from .core import AgentSpec, LikelihoodModel, SignalAlphabet
from .graphs import (
    AcceleratedOperator,
    Graph,
    StaticSchedule,
    lazy_metropolis_weights,
    random_geometric_graph,
    topology,
)
from .rules import UpdateRuleKind
from .simulator import SimulationConfig

MASS_LOSS_TOL = 1e-6


class InvalidDiscretizationError(ValueError):
    pass


@dataclass(frozen=True)
class DiscretizationSpec:
    lo: float
    hi: float
    bins: int = 64

    def __post_init__(self):
        if self.bins < 2:
            raise ValueError("need at least two bins")
        if not self.lo < self.hi:
            raise ValueError("discretization range must satisfy lo < hi")

    @property
    def width(self) -> float:
        return (self.hi - self.lo) / self.bins

    def midpoints(self) -> np.ndarray:
        return self.lo + self.width * (np.arange(self.bins) + 0.5)

    def alphabet(self) -> SignalAlphabet:
        return SignalAlphabet(tuple(float(x) for x in self.midpoints()))

    @classmethod
    def centered(cls, center: float, half_width: float, bins: int = 64) -> "DiscretizationSpec":
        return cls(center - half_width, center + half_width, bins)


def _normal_cdf(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def gaussian_bins(disc: DiscretizationSpec, mean: float, scale: float = 1.0,
                  check_mass: bool = True) -> np.ndarray:
    """Gaussian density at the bin midpoints, renormalized to sum to one.

    With ``check_mass`` the untruncated Gaussian must lose at most
    ``MASS_LOSS_TOL`` of its mass outside the range.
    """
    if check_mass:
        lost = 1.0 - (_normal_cdf((disc.hi - mean) / scale) - _normal_cdf((disc.lo - mean) / scale))
        if lost > MASS_LOSS_TOL:
            raise InvalidDiscretizationError(
                f"range [{disc.lo}, {disc.hi}] loses {lost:.3g} of N({mean}, {scale}^2) mass")
    z = (disc.midpoints() - mean) / scale
    w = np.exp(-0.5 * z * z)
    return w / w.sum()


def _model(disc: DiscretizationSpec, true_mean: float, hyp_means: Sequence[float], scale: float = 1.0,
           check_mass: bool = True) -> LikelihoodModel:
    f = gaussian_bins(disc, true_mean, scale, check_mass)
    table = np.stack([gaussian_bins(disc, mu, scale, check_mass) for mu in hyp_means])
    return LikelihoodModel.with_realized_floor(table, f, disc.alphabet())


@dataclass(frozen=True, eq=False)
class Scenario:
    agents: tuple
    optimal: frozenset
    labels: tuple
    graph: Graph | None = None
    extra: dict = field(default_factory=dict)


# -- two-agent example ----------------------------------------------------------

TWO_AGENT_TRUE_MEANS = (1.0, 2.0)
TWO_AGENT_HYPOTHESIS_MEANS = ((0.5, 1.5, 0.0), (0.0, 2.5, 1.5))


def build_two_agent_example(discretization: DiscretizationSpec | None = None, *, half_width: float = 8.0,
                            bins: int = 64, observation_rate: float = 1.0) -> Scenario:
    """Two agents observing N(1,1) and N(2,1) with three shifted-Gaussian hypotheses.

    By default each agent's alphabet is centred on its own true mean, which
    keeps the mirror symmetry that makes the individually indistinguishable
    hypotheses exactly tied. A shared ``discretization`` may be supplied
    instead.
    """
    agents = []
    for true_mean, hyp in zip(TWO_AGENT_TRUE_MEANS, TWO_AGENT_HYPOTHESIS_MEANS):
        disc = discretization or DiscretizationSpec.centered(true_mean, half_width, bins)
        agents.append(AgentSpec(_model(disc, true_mean, hyp), observation_rate))
    agents = tuple(agents)
    return Scenario(agents, optimal_set(agents), ("theta1", "theta2", "theta3"), Graph.from_edges(2, [(0, 1)]))


# -- source localization ----------------------------------------------------------

@dataclass(frozen=True)
class Role:
    kind: str = "regular"  # regular | no_measurement | conflicting
    target: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("regular", "no_measurement", "conflicting"):
            raise ValueError(f"unknown agent role {self.kind!r}")
        if self.kind == "conflicting" and self.target is None:
            raise ValueError("conflicting agents need a substituted target point")


REGULAR = Role()
NO_MEASUREMENT = Role("no_measurement")


@dataclass(frozen=True, eq=False)
class LocalizationScenario:
    """Agents measuring noisy distance to a source over a g x g hypothesis grid.

    The noise is a Gaussian of scale ``noise_scale`` truncated to each agent's
    observation window, which spans every candidate distance widened by
    ``truncation`` scales on both sides.
    """

    agent_positions: np.ndarray
    source_position: tuple
    grid_size: int
    area: tuple = (-10.0, 10.0)
    noise_scale: float = 1.0
    truncation: float = 4.0
    bins: int = 64
    roles: tuple = ()
    edges: tuple | None = None

    def __post_init__(self):
        pos = np.asarray(self.agent_positions, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "agent_positions", pos)
        roles = tuple(self.roles) or (REGULAR,) * len(pos)
        if len(roles) != len(pos):
            raise ValueError("need one role per agent")
        object.__setattr__(self, "roles", roles)
        if self.grid_size < 1 or self.noise_scale <= 0 or self.truncation <= 0:
            raise ValueError("grid size, noise scale and truncation must be positive")

    def hypothesis_points(self) -> np.ndarray:
        axis = np.linspace(self.area[0], self.area[1], self.grid_size)
        xx, yy = np.meshgrid(axis, axis, indexing="xy")
        return np.column_stack([xx.ravel(), yy.ravel()])

    def labels(self) -> tuple:
        return tuple(f"({x:g},{y:g})" for x, y in self.hypothesis_points())

    def graph(self) -> Graph:
        if self.edges is not None:
            return Graph.from_edges(len(self.agent_positions), self.edges)
        return random_geometric_graph(self.agent_positions)


def build_localization(scenario: LocalizationScenario) -> Scenario:
    pts = scenario.hypothesis_points()
    src = np.asarray(scenario.source_position, dtype=float)
    c, T = scenario.noise_scale, scenario.truncation
    agents = []
    for pos, role in zip(scenario.agent_positions, scenario.roles):
        hyp_d = np.linalg.norm(pts - pos, axis=1)
        emitter = np.asarray(role.target, dtype=float) if role.kind == "conflicting" else src
        true_d = float(np.linalg.norm(emitter - pos))
        lo = min(hyp_d.min(), true_d) - T * c
        hi = max(hyp_d.max(), true_d) + T * c
        disc = DiscretizationSpec(lo, hi, scenario.bins)
        model = _model(disc, true_d, hyp_d, c, check_mass=False)
        q = 0.0 if role.kind == "no_measurement" else 1.0
        agents.append(AgentSpec(model, q))
    agents = tuple(agents)
    return Scenario(agents, optimal_set(agents), scenario.labels(), scenario.graph(),
                    {"points": pts, "roles": scenario.roles})


def mixed_roles_scenario(n_regular: int = 4, n_silent: int = 3, n_conflicting: int = 3, grid_size: int = 10,
                  seed: int = 0, source: tuple | None = None, conflict_target: tuple = (0.0, 0.0),
                  area: tuple = (-10.0, 10.0), noise_scale: float = 1.0, truncation: float = 4.0,
                  bins: int = 64) -> LocalizationScenario:
    """Reduced-scale mix of regular, silent and corrupted agents at seeded positions."""
    rng = np.random.default_rng(seed)
    n = n_regular + n_silent + n_conflicting
    positions = rng.uniform(area[0], area[1], size=(n, 2))
    if source is None:
        axis = np.linspace(area[0], area[1], grid_size)
        source = (float(axis[int(rng.integers(grid_size))]), float(axis[int(rng.integers(grid_size))]))
    roles = ((REGULAR,) * n_regular + (NO_MEASUREMENT,) * n_silent
             + (Role("conflicting", tuple(conflict_target)),) * n_conflicting)
    order = rng.permutation(n)
    roles = tuple(roles[i] for i in order)
    return LocalizationScenario(positions, tuple(source), grid_size, area, noise_scale, truncation, bins, roles)


# -- clique merging -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CliqueMerge:
    isolated: SimulationConfig
    merged: SimulationConfig
    cliques: tuple
    clique_optima: tuple
    merged_optimum: frozenset


def _clique_graph(sizes: Sequence[int], bridges: bool) -> tuple[Graph, tuple]:
    edges, members, start = [], [], 0
    for s in sizes:
        nodes = list(range(start, start + s))
        members.append(tuple(nodes))
        edges += [(a, b) for a in nodes for b in nodes if a < b]
        start += s
    if bridges:
        for a, b in zip(members, members[1:]):
            edges.append((a[-1], b[0]))
    return Graph.from_edges(start, edges), tuple(members)


def default_clique_models() -> list[LikelihoodModel]:
    """Two opposed groups over binary signals.

    Group 0 observes (0.7, 0.3), matched exactly by theta1, with theta2 at
    (0.4, 0.6). Group 1 observes (0.5, 0.5), matched exactly by theta2, with
    theta1 at (0.4, 0.6). Group 0's gap is larger, so merging favours theta1.
    """
    a = LikelihoodModel.with_realized_floor([[0.7, 0.3], [0.4, 0.6]], [0.7, 0.3])
    b = LikelihoodModel.with_realized_floor([[0.4, 0.6], [0.5, 0.5]], [0.5, 0.5])
    return [a, b]


def build_clique_merge(num_cliques: int = 2, per_clique_models: Sequence[LikelihoodModel] | None = None,
                       clique_size: int = 3, rule: UpdateRuleKind = UpdateRuleKind.GEOMETRIC,
                       horizon: int = 3000, seed: int = 0, stop_on_convergence: bool = False) -> CliqueMerge:
    models = list(per_clique_models or default_clique_models())
    if len(models) != num_cliques:
        raise ValueError("need one model per clique")
    sizes = [clique_size] * num_cliques
    agents = tuple(AgentSpec(models[c]) for c, s in enumerate(sizes) for _ in range(s))
    iso_graph, members = _clique_graph(sizes, bridges=False)
    merged_graph, _ = _clique_graph(sizes, bridges=True)
    optima = tuple(optimal_set(agents, W=mem) for mem in members)
    merged_opt = optimal_set(agents)

    def config(g):
        return SimulationConfig(agents, StaticSchedule(g), rule, horizon, seed,
                                stop_on_convergence=stop_on_convergence)

    return CliqueMerge(config(iso_graph), config(merged_graph), members, optima, merged_opt)


# -- topology sweep ---------------------------------------------------------------------

SWEEP_RULES = (UpdateRuleKind.BAYES_THEN_LINEAR, UpdateRuleKind.GEOMETRIC, UpdateRuleKind.ACCELERATED)


def one_informative_agents(n: int, informative: LikelihoodModel | None = None,
                           informative_index: int = 0) -> tuple:
    """One agent able to tell hypotheses apart; every other agent's rows are identical."""
    if informative is None:
        informative = LikelihoodModel.with_realized_floor([[0.8, 0.2], [0.3, 0.7]], [0.8, 0.2])
    m = informative.num_hypotheses
    blank_f = np.full(informative.num_signals, 1.0 / informative.num_signals)
    blank = LikelihoodModel.with_realized_floor(np.tile(blank_f, (m, 1)), blank_f)
    return tuple(AgentSpec(informative if i == informative_index else blank) for i in range(n))


@dataclass(frozen=True, eq=False)
class SweepEntry:
    family: str
    size: int
    rule: UpdateRuleKind
    config: SimulationConfig


def build_topology_sweep(family: str, sizes: Sequence[int], rules: Sequence[UpdateRuleKind] = SWEEP_RULES,
                         horizon: int = 20000, seed: int = 0, epsilon: float = 0.01,
                         informative: LikelihoodModel | None = None) -> list[SweepEntry]:
    """Configurations for convergence time versus network size on one topology family."""
    if not sizes:
        raise ValueError("sweep needs at least one size")
    out = []
    for n in sizes:
        g = topology(family, n)
        agents = one_informative_agents(n, informative)
        for rule in rules:
            rule = UpdateRuleKind(rule)
            if rule is UpdateRuleKind.ACCELERATED:
                sched = AcceleratedOperator(g, n)
            else:
                sched = StaticSchedule(g, lazy_metropolis_weights)
            cfg = SimulationConfig(agents, sched, rule, horizon, seed, epsilon)
            out.append(SweepEntry(family, n, rule, cfg))
    return out


BUILDERS = {
    "two_agent": build_two_agent_example,
    "localization": build_localization,
    "mixed_roles": mixed_roles_scenario,
    "clique_merge": build_clique_merge,
    "topology_sweep": build_topology_sweep,
}
