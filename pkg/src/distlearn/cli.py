"""Command-line front end: ``distlearn run|sweep|verify <config.yaml>``.

Experiment configs are YAML documents with a mandatory ``version: 1`` key.
See README.md for the full schema. Exit codes: 0 success, 1 invalid config,
2 runtime failure, 3 a requested verification failed.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .analysis import bound_curve
from .core import AgentSpec, BeliefState, DegeneratePosteriorError, LikelihoodModel, validate_model
from .graphs import (AcceleratedOperator, BoundCheck, Graph, StaticSchedule, WeightMatrix,
                     check_accelerated_envelope, check_consensus_contraction, check_mixing_bounds,
                     edge_split_schedule, random_schedule, topology, weight_rule)
from .rules import UpdateRuleKind
from .scenarios import (InvalidDiscretizationError, build_clique_merge, build_localization,
                        build_topology_sweep, build_two_agent_example, default_clique_models,
                        mixed_roles_scenario, one_informative_agents)
from .simulator import MonteCarloSummary, SimulationConfig, derive_seed, monte_carlo, run

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_VERIFY = 0, 1, 2, 3
CONFIG_VERSION = 1
SCENARIOS = ("two_agent", "localization", "clique_merge", "one_informative", "custom")
TOPOLOGIES = ("scenario", "path", "cycle", "grid", "complete", "custom", "random")

log = logging.getLogger("distlearn")


class ConfigError(ValueError):
    """Invalid experiment config; ``field`` names the offending dotted key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


# -- config parsing -----------------------------------------------------------------

def _block(cfg: dict, name: str, required: bool = False) -> dict:
    value = cfg.get(name)
    if value is None:
        if required:
            raise ConfigError(name, "missing required block")
        return {}
    if not isinstance(value, dict):
        raise ConfigError(name, "must be a mapping")
    return value


def _int(block: dict, key: str, where: str, default: Any = None, minimum: int | None = None) -> int:
    value = block.get(key, default)
    if value is None:
        raise ConfigError(f"{where}.{key}", "missing required field")
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where}.{key}", f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{where}.{key}", f"must be >= {minimum}")
    return value


def _float(block: dict, key: str, where: str, default: float, lo: float, hi: float) -> float:
    value = block.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}.{key}", f"expected a number, got {value!r}")
    if not lo < value < hi:
        raise ConfigError(f"{where}.{key}", f"must lie in ({lo}, {hi})")
    return float(value)


def _rule(name: Any, where: str) -> UpdateRuleKind:
    try:
        return UpdateRuleKind.parse(str(name))
    except ValueError as exc:
        raise ConfigError(where, str(exc)) from None


@dataclass(frozen=True)
class RunSettings:
    horizon: int
    seed: int
    runs: int
    rho: float
    epsilon: float
    stride: int
    stop_on_convergence: bool


@dataclass(frozen=True)
class Experiment:
    """Validated config, ready to execute."""

    raw: dict
    agents: tuple
    labels: tuple
    rule: UpdateRuleKind
    schedule: Any
    settings: RunSettings
    output: dict

    def simulation(self) -> SimulationConfig:
        return SimulationConfig(self.agents, self.schedule, self.rule, self.settings.horizon,
                                self.settings.seed, self.settings.epsilon, self.settings.stride,
                                self.settings.stop_on_convergence)


def load_config(path: str | os.PathLike) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from None
    try:
        cfg = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"not valid YAML: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("<file>", "top level must be a mapping")
    if cfg.get("version") != CONFIG_VERSION:
        raise ConfigError("version", f"expected {CONFIG_VERSION}, got {cfg.get('version')!r}")
    return cfg


def parse_run_settings(cfg: dict) -> RunSettings:
    blk = _block(cfg, "run", required=True)
    if "seed" not in blk:
        raise ConfigError("run.seed", "missing required field (no default seed is ever used)")
    seed = _int(blk, "seed", "run", minimum=0)
    return RunSettings(
        horizon=_int(blk, "horizon", "run", minimum=1),
        seed=seed,
        runs=_int(blk, "runs", "run", 1, minimum=1),
        rho=_float(blk, "rho", "run", 0.1, 0.0, 1.0),
        epsilon=_float(blk, "epsilon", "run", 0.01, 0.0, 1.0),
        stride=_int(blk, "stride", "run", 1, minimum=1),
        stop_on_convergence=bool(blk.get("stop_on_convergence", False)),
    )


def _custom_agents(params: dict) -> tuple:
    specs = params.get("agents")
    if not isinstance(specs, list) or not specs:
        raise ConfigError("scenario.params.agents", "custom scenario needs a non-empty agent list")
    agents = []
    for idx, spec in enumerate(specs):
        where = f"scenario.params.agents[{idx}]"
        if not isinstance(spec, dict):
            raise ConfigError(where, "must be a mapping")
        try:
            table = np.asarray(spec["likelihood"], dtype=float)
            f = np.asarray(spec["true_distribution"], dtype=float)
        except KeyError as exc:
            raise ConfigError(f"{where}.{exc.args[0]}", "missing required field") from None
        except (TypeError, ValueError):
            raise ConfigError(where, "likelihood and true_distribution must be numeric arrays") from None
        try:
            if "alpha" in spec:
                model = LikelihoodModel(table, f, float(spec["alpha"]))
            else:
                model = LikelihoodModel.with_realized_floor(table, f)
            problems = validate_model(model)
            if problems:
                raise ConfigError(where, "; ".join(problems))
            prior = None
            if spec.get("prior") is not None:
                prior = BeliefState.from_probabilities(spec["prior"])
            agent = AgentSpec(model, float(spec.get("q", 1.0)), prior)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(where, str(exc)) from None
        agents.extend([agent] * _int(spec, "count", where, 1, minimum=1))
    return tuple(agents)


def build_scenario(cfg: dict) -> tuple[tuple, tuple, Graph | None]:
    """Resolve the scenario block to (agents, hypothesis labels, suggested graph)."""
    blk = _block(cfg, "scenario", required=True)
    name = blk.get("builder")
    if name not in SCENARIOS:
        raise ConfigError("scenario.builder", f"unknown builder {name!r}; expected one of {SCENARIOS}")
    params = blk.get("params") or {}
    if not isinstance(params, dict):
        raise ConfigError("scenario.params", "must be a mapping")
    try:
        if name == "custom":
            agents = _custom_agents(params)
            m = agents[0].likelihood.num_hypotheses
            return agents, tuple(f"theta{p + 1}" for p in range(m)), None
        if name == "two_agent":
            sc = build_two_agent_example(**params)
            return sc.agents, sc.labels, sc.graph
        if name == "localization":
            p = dict(params)
            for key in ("source", "conflict_target", "area"):
                if key in p:
                    p[key] = tuple(p[key])
            sc = build_localization(mixed_roles_scenario(**p))
            return sc.agents, sc.labels, sc.graph
        if name == "clique_merge":
            p = dict(params)
            variant = p.pop("variant", "merged")
            if variant not in ("merged", "isolated"):
                raise ConfigError("scenario.params.variant", "must be 'merged' or 'isolated'")
            cm = build_clique_merge(num_cliques=p.pop("num_cliques", 2),
                                    per_clique_models=p.pop("models", None) or default_clique_models(),
                                    clique_size=p.pop("clique_size", 3), horizon=1, **p)
            chosen = cm.merged if variant == "merged" else cm.isolated
            m = chosen.agents[0].likelihood.num_hypotheses
            return chosen.agents, tuple(f"theta{q + 1}" for q in range(m)), chosen.graph_schedule.graph(0)
        agents = one_informative_agents(_int(params, "n", "scenario.params", minimum=1))
        return agents, ("theta1", "theta2"), None
    except ConfigError:
        raise
    except (TypeError, ValueError, InvalidDiscretizationError) as exc:
        raise ConfigError("scenario.params", str(exc)) from None


def build_schedule(cfg: dict, n: int, rule: UpdateRuleKind, suggested: Graph | None, seed: int):
    blk = _block(cfg, "schedule")
    name = blk.get("topology", "scenario" if suggested is not None else None)
    if name not in TOPOLOGIES:
        raise ConfigError("schedule.topology", f"unknown topology {name!r}; expected one of {TOPOLOGIES}")
    mode = blk.get("mode", "static")
    if mode not in ("static", "time_varying"):
        raise ConfigError("schedule.mode", "must be 'static' or 'time_varying'")
    if rule.requires_static_graph and mode != "static":
        raise ConfigError("schedule.mode", f"{rule.value} requires a static schedule")
    try:
        weights_fn = weight_rule(blk.get("weights", "lazy_metropolis"))
    except ValueError as exc:
        raise ConfigError("schedule.weights", str(exc)) from None
    B = _int(blk, "B", "schedule", 1, minimum=1)
    sched_seed = _int(blk, "seed", "schedule", seed, minimum=0)

    if name == "random":
        if mode != "time_varying":
            raise ConfigError("schedule.topology", "'random' is only available for time-varying schedules")
        return random_schedule(n, B, sched_seed, _int(blk, "templates", "schedule", 8, minimum=1),
                               float(blk.get("extra_edge_prob", 0.1)), weights_fn)
    try:
        if name == "scenario":
            if suggested is None:
                raise ConfigError("schedule.topology", "this scenario has no built-in graph; name a topology")
            graph = suggested
        else:
            graph = topology(name, n, blk.get("edges"))
    except ValueError as exc:
        raise ConfigError("schedule.topology", str(exc)) from None
    if graph.n != n:
        raise ConfigError("schedule.topology", f"graph has {graph.n} nodes but there are {n} agents")

    custom = blk.get("weight_matrix")
    if rule is UpdateRuleKind.ACCELERATED:
        if custom is not None:
            raise ConfigError("schedule.weight_matrix", "the accelerated rule fixes its own lazy Metropolis weights")
        U = _int(_block(cfg, "rule"), "U", "rule", n, minimum=n)
        return AcceleratedOperator(graph, U)
    if mode == "time_varying":
        if custom is not None:
            raise ConfigError("schedule.weight_matrix", "custom weights need a static schedule")
        try:
            return edge_split_schedule(graph, B, sched_seed, _int(blk, "templates", "schedule", 8, minimum=1),
                                       weights_fn)
        except ValueError as exc:
            raise ConfigError("schedule.topology", str(exc)) from None
    if custom is not None:
        try:
            wm = WeightMatrix(np.asarray(custom, dtype=float))
        except (TypeError, ValueError) as exc:
            raise ConfigError("schedule.weight_matrix", str(exc)) from None
        if wm.n != n:
            raise ConfigError("schedule.weight_matrix", f"must be {n} x {n}")
        return StaticSchedule(graph, weights_fn, weights=wm)
    return StaticSchedule(graph, weights_fn)


def build_experiment(cfg: dict) -> Experiment:
    settings = parse_run_settings(cfg)
    rule = _rule(_block(cfg, "rule").get("kind", "GeometricPool"), "rule.kind")
    agents, labels, graph = build_scenario(cfg)
    schedule = build_schedule(cfg, len(agents), rule, graph, settings.seed)
    exp = Experiment(cfg, agents, labels, rule, schedule, settings, _block(cfg, "output"))
    try:
        exp.simulation()
    except ValueError as exc:
        raise ConfigError("rule", str(exc)) from None
    return exp


# -- output ---------------------------------------------------------------------------

def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{x:.17g}"
    return str(x)


def _write_rows(path: Path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def prepare_output(directory: str | os.PathLike) -> Path:
    out = Path(directory)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc.strerror}") from None
    if not os.access(out, os.W_OK | os.X_OK):
        raise OSError(f"output directory {out} is not writable")
    return out


def _artifacts(exp: Experiment, default: tuple) -> set:
    wanted = exp.output.get("artifacts", list(default))
    unknown = set(wanted) - set(default)
    if unknown:
        raise ConfigError("output.artifacts", f"unknown artifacts {sorted(unknown)}; expected {list(default)}")
    return set(wanted)


def write_summary(path: Path, summary: MonteCarloSummary, labels: tuple) -> None:
    def rows():
        for r in range(summary.runs):
            finals = summary.final_log_beliefs[r]
            status = "failed" if summary.failures[r] else "ok"
            base = [r, summary.seeds[r], summary.convergence_times[r], summary.bound_violations[r], status]
            if finals is None:
                yield base + ["", "", ""]
                continue
            probs = np.exp(finals)
            for i in range(probs.shape[0]):
                for p in range(probs.shape[1]):
                    yield base + [i, labels[p], probs[i, p]]

    _write_rows(path, ["run", "seed", "convergence_step", "bound_violation", "status", "agent", "theta",
                       "final_belief"], rows())


def write_bound_curve(path: Path, summary: MonteCarloSummary) -> None:
    consts = summary.constants
    if consts is not None:
        log_bound = consts.log_bound(summary.steps)
        bound = bound_curve(consts, summary.steps, clamp=True)
    else:
        log_bound = bound = [None] * len(summary.steps)
    rows = ((k, b, lb, e) for k, b, lb, e in zip(summary.steps, bound, log_bound, summary.envelope))
    _write_rows(path, ["k", "bound", "log_bound", "empirical"], rows)


# -- commands -------------------------------------------------------------------------------

def _say(args, msg: str) -> None:
    if not args.quiet:
        print(msg)


def _output_dir(args, exp_output: dict) -> Path:
    return prepare_output(args.out or exp_output.get("directory", "out"))


def cmd_run(args) -> int:
    exp = build_experiment(load_config(args.config))
    wanted = _artifacts(exp, ("trajectory", "summary", "bound_curve"))
    out = _output_dir(args, exp.output)
    config = exp.simulation()
    summary = monte_carlo(config, exp.settings.runs, exp.settings.rho, workers=args.workers)
    failed = [(r, s, f) for r, (s, f) in enumerate(zip(summary.seeds, summary.failures)) if f]
    if "trajectory" in wanted and not failed:
        traj = run(config.with_seed(derive_seed(config.seed, 0)), exp.labels)
        with open(out / "trajectory.csv", "w", encoding="utf-8", newline="") as fh:
            traj.write_csv(fh)
    if "summary" in wanted:
        write_summary(out / "summary.csv", summary, exp.labels)
    if "bound_curve" in wanted:
        write_bound_curve(out / "bound_curve.csv", summary)
    for r, seed, msg in failed:
        print(f"error: run {r} (seed {seed}) hit a degenerate posterior: {msg}", file=sys.stderr)
    if failed:
        return EXIT_RUNTIME
    med = summary.median_convergence_time()
    _say(args, f"{summary.runs} run(s) of {config.rule.value}: median convergence step {_fmt(med)}; "
               f"artifacts in {out}")
    if summary.constants is not None:
        _say(args, f"bound violations at k >= {summary.constants.N_rho}: "
                   f"{sum(bool(v) for v in summary.bound_violations)}/{summary.runs}")
    return EXIT_OK


def parse_sweep(cfg: dict) -> tuple[str, list[int], list[UpdateRuleKind], int]:
    blk = _block(cfg, "sweep", required=True)
    family = blk.get("family", "path")
    if family not in ("path", "cycle", "grid", "complete"):
        raise ConfigError("sweep.family", f"unknown family {family!r}")
    sizes = blk.get("sizes")
    if not isinstance(sizes, list) or not sizes:
        raise ConfigError("sweep.sizes", "must be a non-empty list of network sizes")
    for s in sizes:
        if isinstance(s, bool) or not isinstance(s, int) or s < 1:
            raise ConfigError("sweep.sizes", f"invalid size {s!r}")
        if family == "grid" and math.isqrt(s) ** 2 != s:
            raise ConfigError("sweep.sizes", f"grid size {s} is not a perfect square")
    rules = [_rule(r, "sweep.rules") for r in blk.get("rules", ["BayesThenLinearPool", "GeometricPool",
                                                                "AcceleratedGeometric"])]
    if not rules:
        raise ConfigError("sweep.rules", "must list at least one rule")
    U_factor = _int(blk, "U_factor", "sweep", 1, minimum=1)
    return family, sizes, rules, U_factor


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    settings = parse_run_settings(cfg)
    family, sizes, rules, U_factor = parse_sweep(cfg)
    out = prepare_output(args.out or _block(cfg, "output").get("directory", "out"))
    entries = build_topology_sweep(family, sizes, rules, horizon=settings.horizon, seed=settings.seed,
                                   epsilon=settings.epsilon)
    rows, table, failures = [], {}, []
    for e in entries:
        config = e.config
        if e.rule is UpdateRuleKind.ACCELERATED and U_factor != 1:
            config = config.with_rule(e.rule, AcceleratedOperator(config.schedule.graph, U_factor * e.size))
        # every rule sees the same per-run seeds (common random numbers)
        summary = monte_carlo(config, settings.runs, settings.rho, workers=args.workers)
        converged = sum(t is not None for t in summary.convergence_times)
        med, mean = summary.median_convergence_time(), summary.mean_convergence_time()
        rows.append([family, e.size, e.rule.value, settings.runs, converged, med, mean])
        table[(e.size, e.rule)] = (med, mean)
        failures += [(e.size, e.rule.value, s, f) for s, f in zip(summary.seeds, summary.failures) if f]
        _say(args, f"{family} n={e.size} {e.rule.value}: median {_fmt(med)}, mean {_fmt(mean)}")
    _write_rows(out / "sweep.csv", ["family", "n", "rule", "runs", "converged", "median", "mean"], rows)
    header = ["n"] + [f"{r.value}_{stat}" for r in rules for stat in ("median", "mean")]
    combined = [[n] + [v for r in rules for v in table[(n, r)]] for n in sizes]
    _write_rows(out / "size_table.csv", header, combined)
    for n, rule, seed, msg in failures:
        print(f"error: n={n} {rule} seed {seed}: degenerate posterior: {msg}", file=sys.stderr)
    return EXIT_RUNTIME if failures else EXIT_OK


def _stochasticity_check(schedule, horizon: int) -> tuple[BoundCheck, list[str]]:
    seen, bad, worst = set(), [], 0.0
    for k in range(horizon):
        g, w = schedule[k]
        if id(w) in seen:
            continue
        seen.add(id(w))
        bad += w.violations(g)
        a = w.entries
        worst = max(worst, float(np.abs(a.sum(axis=0) - 1).max()), float(np.abs(a.sum(axis=1) - 1).max()))
    return BoundCheck("stochasticity", len(seen), len(bad), -worst if worst else 0.0, worst), bad


def run_verification(exp: Experiment, workers: int = 1) -> list[tuple[BoundCheck | None, str]]:
    """Every applicable check, as (result or None when skipped, detail text)."""
    blk = _block(exp.raw, "verify")
    horizon = _int(blk, "horizon", "verify", 200, minimum=1)
    acc_horizon = _int(blk, "accelerated_horizon", "verify", 500, minimum=2)
    schedule = exp.schedule
    graph_schedule = schedule.schedule() if isinstance(schedule, AcceleratedOperator) else schedule
    window = max(graph_schedule.B, -(-(horizon + 1) // graph_schedule.B) * graph_schedule.B)

    results = []
    stoch, bad = _stochasticity_check(graph_schedule, window)
    results.append((stoch, "; ".join(bad[:5])))
    if stoch.passed:
        envelope, cumulative = check_mixing_bounds(graph_schedule, horizon)
        results += [(envelope, ""), (cumulative, "")]
    else:
        results.append((None, "mixing bounds skipped: weights are not doubly stochastic"))
    if graph_schedule.static and stoch.passed:
        graph = graph_schedule.graph(0)
        U = schedule.U if isinstance(schedule, AcceleratedOperator) else graph.n
        op = AcceleratedOperator(graph, U)
        results.append((check_accelerated_envelope(op, acc_horizon), f"U={U}"))
        results.append((check_consensus_contraction(op, acc_horizon), f"U={U}"))
    if blk.get("coverage", True) and stoch.passed:
        summary = monte_carlo(exp.simulation(), exp.settings.runs, exp.settings.rho, workers=workers)
        frac = summary.violation_fraction
        if frac is None:
            results.append((None, "coverage: no concentration bound applies to this configuration"))
        else:
            viol = sum(bool(v) for v in summary.bound_violations)
            margins = [m for m in summary.worst_margins if m is not None and math.isfinite(m)]
            margin = min(margins) if margins else math.inf
            checked = summary.bound_checked_steps * summary.runs
            ok = frac <= exp.settings.rho and not any(summary.failures)
            check = BoundCheck(f"coverage_{exp.rule.value}", checked,
                               0 if ok else max(1, viol), margin, frac)
            detail = (f"violation fraction {frac:.4g} vs rho={exp.settings.rho} over {summary.runs} runs, "
                      f"N(rho)={summary.constants.N_rho}")
            if not checked:
                detail += "; horizon is shorter than N(rho), nothing was checked"
            results.append((check, detail))
    return results


def cmd_verify(args) -> int:
    exp = build_experiment(load_config(args.config))
    results = run_verification(exp, args.workers)
    ok = True
    for check, detail in results:
        if check is None:
            _say(args, f"SKIP  {detail}")
            continue
        ok &= check.passed
        tag = "PASS" if check.passed else "FAIL"
        line = (f"{tag}  {check.name}: checked={check.checked} violations={check.violations} "
                f"worst_margin={check.worst_margin:.6g} worst_ratio={check.worst_ratio:.6g}")
        if detail:
            line += f" ({detail})"
        if check.passed:
            _say(args, line)
        else:
            print(line, file=sys.stderr if args.quiet else sys.stdout)
    if args.out:
        out = prepare_output(args.out)
        _write_rows(out / "verify.csv", ["check", "passed", "checked", "violations", "worst_margin",
                                         "worst_ratio"],
                    ([c.name, c.passed, c.checked, c.violations, c.worst_margin, c.worst_ratio]
                     for c, _ in results if c is not None))
    return EXIT_OK if ok else EXIT_VERIFY


# -- entry point -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="distlearn", description="Distributed non-Bayesian learning simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func, text in (("run", cmd_run, "simulate one configuration (optionally an ensemble)"),
                             ("sweep", cmd_sweep, "convergence time versus network size"),
                             ("verify", cmd_verify, "check the matrix bounds and concentration coverage")):
        p = sub.add_parser(name, help=text)
        p.add_argument("config", help="YAML experiment config")
        p.add_argument("--out", help="output directory (overrides output.directory)")
        p.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                       help="worker processes for ensembles (default: number of processors)")
        p.add_argument("--quiet", action="store_true", help="only report errors")
        p.set_defaults(func=func)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    if args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DegeneratePosteriorError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
