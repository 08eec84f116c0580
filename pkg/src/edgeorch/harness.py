"""Experiment runner: training with an oracle-anchored stopping rule, and report tables."""

from __future__ import annotations

import argparse
import csv
import io
import json
import statistics
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import yaml

from .agents import (
    AgentConfig, DQNAgent, HybridAgent, TabularQAgent, TrainingLog, dqn_train, greedy_policy, hybrid_train,
)
from .catalog import CONSTRAINTS, AccuracyConstraint, average_accuracy
from .oracle import JointConfiguration, MatchReport, evaluate, optimal_configuration, policy_match
from .simenv import (
    MAX_DEVICES, SCENARIOS, ConfigurationError, EdgeCloudEnv, EnvConfig, Observation, StepOutcome, Topology,
    load_scenario, scenario_topology, with_learning_features,
)

AGENT_KINDS = ("QL", "DQN", "HL")

# real-env step budgets by number of devices
DEFAULT_BUDGET = {1: 50_000, 2: 50_000, 3: 50_000, 4: 200_000, 5: 500_000}


class StopTraining(Exception):
    pass


class MonitoredEnv:
    """Environment wrapper that counts real steps and checks convergence as training proceeds.

    Every ``eval_every`` real steps the current greedy policy is rolled out on a
    separate evaluation environment and compared with the oracle. ``window``
    consecutive cost matches stop training, as does exhausting ``budget``.
    """

    def __init__(self, env: EdgeCloudEnv, policy, oracle: JointConfiguration, budget: int,
                 eval_every: int = 100, window: int = 3):
        self.env = env
        self.n = env.n
        self.policy = policy
        self.oracle = oracle
        self.budget = budget
        self.eval_every = eval_every
        self.window = window
        self.eval_env = EdgeCloudEnv(env.topology, env.constraint, env.config, env.catalog)
        self.steps = 0
        self.experience_ms = 0.0
        self.streak = 0
        self.converged = False
        self.evaluations: list[tuple[int, bool]] = []
        self.last_config: tuple[int, ...] | None = None
        self.last_report: MatchReport | None = None

    @property
    def observation(self) -> Observation:
        return self.env.observation

    def check(self) -> MatchReport:
        cfg = greedy_policy(self.policy, self.eval_env)
        report = policy_match(cfg, self.oracle, self.env.topology, self.env.config, self.env.constraint)
        self.last_config, self.last_report = cfg, report
        return report

    def step(self, action: int) -> StepOutcome:
        # stop before stepping so the agent has recorded every outcome it was handed
        if self.converged or self.steps >= self.budget:
            raise StopTraining
        out = self.env.step(action)
        self.steps += 1
        self.experience_ms += out.response_time
        if self.steps % self.eval_every == 0:
            report = self.check()
            self.evaluations.append((self.steps, report.cost_match))
            self.streak = self.streak + 1 if report.cost_match else 0
            self.converged = self.streak >= self.window
        return out


@dataclass
class ConvergenceRecord:
    agent: str
    seed: int
    scenario: str
    n_devices: int
    constraint: str
    converged: bool
    real_env_steps: int
    experience_ms: float
    updates: int
    policy: list[str]
    policy_art: float
    oracle_art: float
    cost_match: bool
    exact_match: bool


@dataclass
class ExperimentSpec:
    scenario: str = "A"
    n_devices: int = 3
    constraint: AccuracyConstraint = AccuracyConstraint.MIN
    agent: str = "HL"
    seeds: Sequence[int] = (1,)
    budget: int | None = None
    window: int = 3
    eval_every: int = 100
    agent_config: AgentConfig = field(default_factory=AgentConfig)
    # learners see the requester index and job details; the oracle ignores observations
    env_config: EnvConfig = field(default_factory=with_learning_features)
    topology: Topology | None = None  # overrides ``scenario`` when given

    def validate(self) -> None:
        if not self.seeds:
            raise ConfigurationError("seed list is empty")
        if self.agent not in AGENT_KINDS:
            raise ConfigurationError(f"agent must be one of {AGENT_KINDS}")
        if not 1 <= self.n_devices <= MAX_DEVICES:
            raise ConfigurationError(f"n_devices must be in [1, {MAX_DEVICES}]")
        if self.budget is not None and self.budget < 0:
            raise ConfigurationError("budget must be non-negative")
        self.env_config.validate()
        self.resolve_topology()

    def resolve_topology(self) -> Topology:
        if self.topology is not None:
            self.topology.validate()
            return self.topology
        return scenario_topology(self.scenario, self.n_devices)

    @property
    def step_budget(self) -> int:
        return DEFAULT_BUDGET[self.n_devices] if self.budget is None else self.budget


def make_agent(kind: str, env: EdgeCloudEnv, config: AgentConfig, seed: int):
    if kind == "QL":
        return TabularQAgent(env.n_actions, config, seed)
    if kind == "DQN":
        return DQNAgent(env.observation_size, env.n_actions, config, seed)
    if kind == "HL":
        return HybridAgent(env.observation_size, env.n_actions, env.snap, config, seed)
    raise ConfigurationError(f"unknown agent kind {kind!r}")


def train_one(spec: ExperimentSpec, seed: int, oracle: JointConfiguration | None = None):
    """Train one agent under the stopping rule; returns ``(record, agent, monitor)``."""
    topology = spec.resolve_topology()
    oracle = oracle or optimal_configuration(topology, spec.constraint, spec.env_config)
    env = EdgeCloudEnv(topology, spec.constraint, spec.env_config)
    env.reset(seed)
    agent = make_agent(spec.agent, env, spec.agent_config, seed)
    mon = MonitoredEnv(env, agent.greedy_action, oracle, spec.step_budget, spec.eval_every, spec.window)
    try:
        if spec.step_budget > 0:
            if spec.agent == "QL":
                agent.train(mon, spec.step_budget)
            elif spec.agent == "DQN":
                dqn_train(agent, mon, spec.step_budget)
            else:
                hybrid_train(agent, mon, epochs=10**9)
    except StopTraining:
        pass
    report = mon.last_report or mon.check()
    cfg = mon.last_config
    assert mon.steps == env.step_count == agent.log.real_env_steps
    record = ConvergenceRecord(
        agent=spec.agent, seed=seed, scenario=spec.scenario if spec.topology is None else "custom",
        n_devices=topology.n_devices, constraint=spec.constraint.label,
        converged=mon.converged, real_env_steps=mon.steps, experience_ms=mon.experience_ms,
        updates=agent.log.updates, policy=[str(env.actions[a]) for a in cfg],
        policy_art=report.policy_art, oracle_art=report.oracle_art,
        cost_match=report.cost_match, exact_match=report.exact_match,
    )
    return record, agent, mon


def run_experiment(spec: ExperimentSpec) -> list[ConvergenceRecord]:
    spec.validate()
    oracle = optimal_configuration(spec.resolve_topology(), spec.constraint, spec.env_config)
    return [train_one(spec, seed, oracle)[0] for seed in spec.seeds]


# agent comparison ----------------------------------------------------------------

@dataclass
class SpeedupTable:
    """Median real-env steps per agent and their ratios to a reference agent.

    A family with no converged seed contributes its budget, so a ratio built
    on it is a bound rather than a value: ``>=`` when the numerator never
    converged, ``<=`` when the reference never did.
    """

    scenario: str
    n_devices: int
    constraint: str
    reference: str
    medians: dict[str, float]
    converged: dict[str, int]
    seeds: int
    ratios: dict[str, float]
    flags: dict[str, str]

    def format(self) -> str:
        agents = list(self.medians)
        head = f"{'Users':>5} {'Cnst':>5} " + " ".join(f"{a:>10}" for a in agents)
        head += "".join(f" {a + '/' + self.reference:>12}" for a in self.ratios)
        row = f"{self.n_devices:>5} {self.constraint:>5} " + " ".join(f"{self.medians[a]:>10.0f}" for a in agents)
        row += "".join(f" {(self.flags[a] + format(r, '.2f')):>12}" for a, r in self.ratios.items())
        return head + "\n" + row + "\n"


def compare_agents(scenario: str, constraint: AccuracyConstraint, n_devices: int, seeds: Sequence[int],
                   agents: Sequence[str] = AGENT_KINDS, reference: str = "HL", budget: int | None = None,
                   agent_config: AgentConfig | None = None, env_config: EnvConfig | None = None,
                   records: list[ConvergenceRecord] | None = None) -> SpeedupTable:
    """Train every agent kind on the same seeds and tabulate median convergence steps."""
    if len(seeds) < 3:
        raise ConfigurationError("comparison needs at least 3 seeds")
    kinds = list(dict.fromkeys([*agents, reference]))
    medians: dict[str, float] = {}
    converged: dict[str, int] = {}
    for kind in kinds:
        spec = ExperimentSpec(scenario=scenario, n_devices=n_devices, constraint=constraint, agent=kind,
                              seeds=tuple(seeds), budget=budget,
                              agent_config=agent_config or AgentConfig(),
                              env_config=env_config or with_learning_features())
        recs = run_experiment(spec)
        if records is not None:
            records.extend(recs)
        medians[kind] = float(statistics.median(r.real_env_steps for r in recs))
        converged[kind] = sum(r.converged for r in recs)
    ratios, flags = {}, {}
    for kind in kinds:
        if kind == reference:
            continue
        ratios[kind] = medians[kind] / medians[reference] if medians[reference] else float("inf")
        if converged[kind] == 0:
            flags[kind] = ">="
        elif converged[reference] == 0:
            flags[kind] = "<="
        else:
            flags[kind] = ""
    if reference in agents and len(set(agents)) == 1:
        ratios[reference], flags[reference] = 1.0, ""
    return SpeedupTable(scenario, n_devices, constraint.label, reference,
                        {k: medians[k] for k in kinds}, converged, len(seeds), ratios, flags)


# pareto tables -----------------------------------------------------------------------

def pareto_header(n_devices: int) -> list[str]:
    return ["Exp", "Cnst", *[f"S{i + 1}" for i in range(n_devices)], "ART(ms)", "AA(%)"]


def pareto_rows(scenarios: Sequence[str], constraints: Sequence[AccuracyConstraint], n_devices: int,
                agent: str | None = None, seed: int = 1, budget: int | None = None,
                agent_config: AgentConfig | None = None, env_config: EnvConfig | None = None) -> list[list[str]]:
    """One row per (scenario, constraint): the oracle's configuration, or the agent's greedy one."""
    rows = []
    for scen in scenarios:
        topo = scenario_topology(scen, n_devices)
        for cons in constraints:
            if agent is None:
                cfg = optimal_configuration(topo, cons, env_config)
            else:
                spec = ExperimentSpec(scenario=scen, n_devices=n_devices, constraint=cons, agent=agent,
                                      seeds=(seed,), budget=budget, agent_config=agent_config or AgentConfig(),
                                      env_config=env_config or with_learning_features())
                _, _, mon = train_one(spec, seed)
                cfg = evaluate(mon.last_config, topo, spec.env_config)
            env = EdgeCloudEnv(topo, cons, env_config)
            models = [env._model(env.actions[a].model) for a in cfg.actions]
            rows.append([scen, cons.label, *cfg.labels(env), f"{cfg.art:.2f}",
                         f"{average_accuracy(models):.2f}"])
    return rows


def render_table(header: list[str], rows: Iterable[list[str]], fmt: str = "csv") -> str:
    rows = list(rows)
    if fmt == "json":
        return json.dumps([dict(zip(header, r)) for r in rows], indent=2, sort_keys=False) + "\n"
    if fmt != "csv":
        raise ConfigurationError(f"unknown report format {fmt!r}")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def emit_pareto_table(scenarios: Sequence[str], constraints: Sequence[AccuracyConstraint] = CONSTRAINTS,
                      agent: str | None = None, path: str | Path | None = None, n_devices: int = 3,
                      fmt: str = "csv", **kwargs) -> str:
    """Table of optimal (or learned) configurations; written to ``path`` when given."""
    text = render_table(pareto_header(n_devices), pareto_rows(scenarios, constraints, n_devices, agent, **kwargs), fmt)
    if path is not None:
        Path(path).write_text(text)
    return text


# reports ---------------------------------------------------------------------------

RECORD_FIELDS = [f for f in ConvergenceRecord.__dataclass_fields__]


def records_csv(records: Sequence[ConvergenceRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORD_FIELDS)
    for r in records:
        row = asdict(r)
        row["policy"] = " ".join(r.policy)
        for k in ("experience_ms", "policy_art", "oracle_art"):
            row[k] = f"{row[k]:.6f}"
        w.writerow([row[k] for k in RECORD_FIELDS])
    return buf.getvalue()


def summary_json(records: Sequence[ConvergenceRecord], tables: Sequence[SpeedupTable] = ()) -> str:
    doc: dict[str, Any] = {"records": [asdict(r) for r in records]}
    if tables:
        doc["speedups"] = [asdict(t) for t in tables]
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


# config files --------------------------------------------------------------------------

@dataclass
class MatrixConfig:
    """Experiment matrix read from a YAML file; every key is optional."""

    scenarios: list[str] = field(default_factory=lambda: ["A"])
    users: int = 3
    constraints: list[AccuracyConstraint] = field(default_factory=lambda: list(CONSTRAINTS))
    agents: list[str] = field(default_factory=lambda: ["HL"])
    seeds: list[int] = field(default_factory=lambda: [1])
    budget: int | None = None
    agent_config: AgentConfig = field(default_factory=AgentConfig)
    env_config: EnvConfig = field(default_factory=with_learning_features)

    KEYS = ("scenarios", "users", "constraints", "agents", "seeds", "budget", "agent", "env")

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "MatrixConfig":
        unknown = set(doc) - set(cls.KEYS)
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        out = cls()
        try:
            if "scenarios" in doc:
                out.scenarios = [str(s) for s in _as_list(doc["scenarios"])]
            if "users" in doc:
                out.users = int(doc["users"])
            if "constraints" in doc:
                out.constraints = [AccuracyConstraint.parse(str(c)) for c in _as_list(doc["constraints"])]
            if "agents" in doc:
                out.agents = [str(a) for a in _as_list(doc["agents"])]
            if "seeds" in doc:
                out.seeds = parse_seeds(doc["seeds"])
            if doc.get("budget") is not None:
                out.budget = int(doc["budget"])
            if "agent" in doc:
                out.agent_config = AgentConfig.from_dict(doc["agent"] or {})
            if "env" in doc:
                out.env_config = EnvConfig.from_dict({**asdict(with_learning_features()), **(doc["env"] or {})})
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(str(exc)) from exc
        for a in out.agents:
            if a not in AGENT_KINDS:
                raise ConfigurationError(f"agent must be one of {AGENT_KINDS}, got {a!r}")
        for s in out.scenarios:
            scenario_topology(s, out.users)
        return out

    @classmethod
    def load(cls, path: str | Path) -> "MatrixConfig":
        try:
            with open(path) as fh:
                doc = yaml.safe_load(fh) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigurationError("config file must hold a mapping")
        return cls.from_dict(doc)

    def specs(self) -> list[ExperimentSpec]:
        return [ExperimentSpec(scenario=s, n_devices=self.users, constraint=c, agent=a, seeds=tuple(self.seeds),
                               budget=self.budget, agent_config=self.agent_config, env_config=self.env_config)
                for a in self.agents for s in self.scenarios for c in self.constraints]


def _as_list(v: Any) -> list:
    return list(v) if isinstance(v, (list, tuple)) else [v]


def parse_seeds(v: Any) -> list[int]:
    """``5`` means seeds 1..5; a list or ``"1,4,7"`` names them explicitly."""
    if isinstance(v, (list, tuple)):
        seeds = [int(x) for x in v]
    elif isinstance(v, str) and "," in v:
        seeds = [int(x) for x in v.split(",") if x.strip()]
    else:
        count = int(v)
        if count < 1:
            raise ConfigurationError("seed count must be positive")
        seeds = list(range(1, count + 1))
    if not seeds:
        raise ConfigurationError("seed list is empty")
    return seeds


# invariant suite -----------------------------------------------------------------------

def run_checks(n_devices: int = 3) -> list[tuple[str, bool, str]]:
    """Cheap structural checks over the simulator and oracle; ``(name, ok, detail)`` each."""
    from .catalog import load_default_catalog
    from .simenv import LinkQuality, Target

    out: list[tuple[str, bool, str]] = []
    expected = [("d0", 569, "FP32", 89.9), ("d1", 317, "FP32", 88.2), ("d2", 150, "FP32", 84.9),
                ("d3", 41, "FP32", 74.2), ("d4", 569, "Int8", 88.9), ("d5", 317, "Int8", 87.0),
                ("d6", 150, "Int8", 83.2), ("d7", 41, "Int8", 72.8)]
    rows = [(m.id, m.macs, m.precision.value, m.accuracy) for m in load_default_catalog()]
    out.append(("catalog rows", rows == expected, f"{len(rows)} models"))

    # weak links add exactly their delay per traversal, and never touch local execution
    ok, worst = True, ""
    regular = Topology((LinkQuality.REGULAR,) * n_devices, LinkQuality.REGULAR)
    env_r = EdgeCloudEnv(regular, AccuracyConstraint.MIN)
    env_r.reset(0)
    for dev in range(n_devices):
        weak_dev = Topology(tuple(LinkQuality.WEAK if i == dev else LinkQuality.REGULAR for i in range(n_devices)),
                            LinkQuality.REGULAR)
        env_w = EdgeCloudEnv(weak_dev, AccuracyConstraint.MIN)
        env_w.reset(0)
        for a, act in enumerate(env_r.actions):
            delta = env_w.response_time(a, device=dev) - env_r.response_time(a, device=dev)
            want = 0.0 if act.target is Target.LOCAL else 2 * env_r.config.weak_delay_ms
            if delta != want:
                ok, worst = False, f"device {dev} {act}: {delta} != {want}"
    out.append(("weak-link arithmetic", ok, worst or "exact"))

    for scen in SCENARIOS:
        topo = scenario_topology(scen, n_devices)
        arts = [optimal_configuration(topo, c).art for c in CONSTRAINTS]
        mono = all(b >= a for a, b in zip(arts, arts[1:]))
        out.append((f"pareto monotone {scen}", mono, " ".join(f"{a:.1f}" for a in arts)))
        if scen == "A":
            gap = (arts[3] - arts[2]) / arts[2]
            out.append(("85%->89% gap >= 30% (A)", gap >= 0.30, f"{gap:.1%}"))

    text1 = emit_pareto_table(["A"], n_devices=n_devices)
    text2 = emit_pareto_table(["A"], n_devices=n_devices)
    out.append(("pareto table byte-stable", text1 == text2, f"{len(text1)} bytes"))
    return out


# command line ---------------------------------------------------------------------------

class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit 2; configuration errors exit 1 here
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="edgeorch", description="Inference orchestration in end-edge-cloud simulations.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, agent: bool = True):
        sp.add_argument("--scenario", help="scenario id(s) A-D, comma separated")
        sp.add_argument("--users", type=int, help="number of end devices (1-5)")
        sp.add_argument("--constraint", help="accuracy constraint(s): Min, 80%%, 85%%, 89%%, Max")
        if agent:
            sp.add_argument("--agent", help="QL, DQN or HL (comma separated for several)")
            sp.add_argument("--seeds", help="seed count N (seeds 1..N) or an explicit list like 1,4,7")
            sp.add_argument("--budget", type=int, help="real environment step budget")
        sp.add_argument("--config", help="YAML experiment matrix")
        sp.add_argument("--out", default=".", help="output directory")

    sp = sub.add_parser("oracle", help="emit optimal-configuration tables")
    common(sp, agent=False)
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp = sub.add_parser("train", help="train agents under the stopping rule")
    common(sp)
    sp.add_argument("--strict", action="store_true", help="exit 2 if any run fails to converge")
    sp = sub.add_parser("compare", help="median convergence steps and speedups")
    common(sp)
    sp = sub.add_parser("check", help="run the invariant suite")
    sp.add_argument("--users", type=int, default=3)
    return p


def _matrix(args) -> MatrixConfig:
    m = MatrixConfig.load(args.config) if args.config else MatrixConfig()
    if args.scenario:
        m.scenarios = [s.strip() for s in args.scenario.split(",")]
    if args.users is not None:
        m.users = args.users
    if args.constraint:
        m.constraints = [AccuracyConstraint.parse(c.strip()) for c in args.constraint.split(",")]
    if getattr(args, "agent", None):
        m.agents = [a.strip() for a in args.agent.split(",")]
    if getattr(args, "seeds", None):
        m.seeds = parse_seeds(args.seeds)
    if getattr(args, "budget", None) is not None:
        m.budget = args.budget
    return _validated(m)


def _validated(m: MatrixConfig) -> MatrixConfig:
    if not 1 <= m.users <= MAX_DEVICES:
        raise ConfigurationError(f"--users must be in [1, {MAX_DEVICES}]")
    for a in m.agents:
        if a not in AGENT_KINDS:
            raise ConfigurationError(f"agent must be one of {AGENT_KINDS}, got {a!r}")
    if m.budget is not None and m.budget < 0:
        raise ConfigurationError("budget must be non-negative")
    for s in m.scenarios:
        scenario_topology(s, m.users)
    return m


def _cmd_oracle(args) -> int:
    m = _matrix(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for scen in m.scenarios:
        path = out / f"pareto_{scen}.{args.format}"
        text = emit_pareto_table([scen], m.constraints, None, path, m.users, args.format, env_config=m.env_config)
        print(f"wrote {path}")
        print(text, end="")
    return 0


def _cmd_train(args) -> int:
    m = _matrix(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    records: list[ConvergenceRecord] = []
    for spec in m.specs():
        for rec in run_experiment(spec):
            records.append(rec)
            print(f"{rec.agent} {rec.scenario} n={rec.n_devices} {rec.constraint} seed={rec.seed} "
                  f"converged={rec.converged} steps={rec.real_env_steps} "
                  f"art={rec.policy_art:.2f}/{rec.oracle_art:.2f} [{' '.join(rec.policy)}]")
    (out / "records.csv").write_text(records_csv(records))
    (out / "summary.json").write_text(summary_json(records))
    if args.strict and not all(r.converged for r in records):
        return 2
    return 0


def _cmd_compare(args) -> int:
    m = _matrix(args)
    if not getattr(args, "seeds", None) and not args.config:
        m.seeds = [1, 2, 3, 4, 5]
    if not getattr(args, "agent", None) and not args.config:
        m.agents = list(AGENT_KINDS)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    records: list[ConvergenceRecord] = []
    tables = []
    for scen in m.scenarios:
        for cons in m.constraints:
            t = compare_agents(scen, cons, m.users, m.seeds, m.agents, budget=m.budget,
                               agent_config=m.agent_config, env_config=m.env_config, records=records)
            tables.append(t)
            print(f"scenario {scen}")
            print(t.format(), end="")
    (out / "records.csv").write_text(records_csv(records))
    (out / "summary.json").write_text(summary_json(records, tables))
    return 0


def _cmd_check(args) -> int:
    results = run_checks(args.users)
    for name, ok, detail in results:
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return 0 if all(ok for _, ok, _ in results) else 1


def cli_main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(parser.format_usage().rstrip(), file=sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    handlers = {"oracle": _cmd_oracle, "train": _cmd_train, "compare": _cmd_compare, "check": _cmd_check}
    try:
        return handlers[args.command](args)
    except (ConfigurationError, ValueError) as exc:  # ValueError: unparseable flag values
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
