"""Exhaustive search for the optimal joint (node, model) configuration."""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

from .catalog import AccuracyConstraint, average_accuracy
from .simenv import MAX_DEVICES, ConfigurationError, EdgeCloudEnv, EnvConfig, Target, Tier, Topology

STEADY_ROUNDS = 10
REL_TOL = 1e-6


@dataclass(frozen=True)
class JointConfiguration:
    actions: tuple[int, ...]
    art: float = float("nan")
    aa: float = float("nan")

    def labels(self, env: EdgeCloudEnv) -> list[str]:
        return [str(env.actions[a]) for a in self.actions]


def enumerate_configurations(n_devices: int, n_actions: int = 10) -> Iterator[tuple[int, ...]]:
    """All ``n_actions ** n_devices`` assignments in lexicographic order."""
    if not 1 <= n_devices <= MAX_DEVICES:
        raise ConfigurationError(f"n_devices must be in [1, {MAX_DEVICES}], got {n_devices}")
    return itertools.product(range(n_actions), repeat=n_devices)


def _make_env(topology: Topology, config: EnvConfig | None, constraint=AccuracyConstraint.MIN) -> EdgeCloudEnv:
    return EdgeCloudEnv(topology, constraint, config)


def steady_state_art(actions: Sequence[int], topology: Topology, config: EnvConfig | None = None,
                     env: EdgeCloudEnv | None = None) -> float:
    """Replay ``actions`` round-robin from a fresh reset and return the final window ART."""
    env = env or _make_env(topology, config)
    if len(actions) != env.n:
        raise ValueError(f"configuration has {len(actions)} entries for {env.n} devices")
    env.reset(0)
    out = None
    for _ in range(STEADY_ROUNDS):
        for a in actions:
            out = env.step(int(a))
    return out.window_art


def evaluate(actions: Sequence[int], topology: Topology, config: EnvConfig | None = None,
             env: EdgeCloudEnv | None = None) -> JointConfiguration:
    env = env or _make_env(topology, config)
    art = steady_state_art(actions, topology, config, env)
    aa = average_accuracy([env._model(env.actions[a].model) for a in actions])
    return JointConfiguration(tuple(int(a) for a in actions), art, aa)


def _memory_never_binds(env: EdgeCloudEnv) -> bool:
    biggest = max(m.mem_footprint for m in env.catalog)
    need = env.n * biggest
    return need <= min(env.config.mem_capacity[Tier.EDGE], env.config.mem_capacity[Tier.CLOUD]) \
        and biggest <= env.config.mem_capacity[Tier.END]


@lru_cache(maxsize=64)
def _all_arts(topology: Topology, config: EnvConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Steady-state ART and accuracy sum (hundredths) for every configuration.

    Closed form of the replay: at steady state each device's request shares its
    node with exactly the other devices' most recent jobs on that node.
    """
    env = _make_env(topology, config)
    n, k = env.n, env.n_actions
    configs = np.array(list(enumerate_configurations(n, k)), dtype=np.int64).reshape(-1, n)
    edge_idx = [i for i, act in enumerate(env.actions) if act.target is Target.EDGE]
    cloud_idx = [i for i, act in enumerate(env.actions) if act.target is Target.CLOUD]
    n_edge = np.isin(configs, edge_idx).sum(axis=1)
    n_cloud = np.isin(configs, cloud_idx).sum(axis=1)

    total = np.zeros(len(configs))
    for dev in range(n):
        col = configs[:, dev]
        rt = np.empty(len(configs))
        for a, act in enumerate(env.actions):
            sel = col == a
            if not sel.any():
                continue
            model = env._model(act.model)
            if act.target is Target.LOCAL:
                tier, others = Tier.END, np.zeros(int(sel.sum()))
            elif act.target is Target.EDGE:
                tier, others = Tier.EDGE, n_edge[sel] - 1
            else:
                tier, others = Tier.CLOUD, n_cloud[sel] - 1
            compute = env.compute_ms(model, tier)
            wait = others / env.config.cpu_count[tier] * compute
            rt[sel] = wait + compute + env.network_ms(act.target, dev)
        total = total + rt if dev else rt
    arts = total / n
    acc = np.array([env._model(a.model).accuracy_hundredths for a in env.actions])
    acc_sum = acc[configs].sum(axis=1)
    return configs, arts, acc_sum


def all_configurations(topology: Topology, config: EnvConfig | None = None):
    return _all_arts(topology, config or EnvConfig())


def optimal_configuration(topology: Topology, constraint: AccuracyConstraint,
                          config: EnvConfig | None = None) -> JointConfiguration:
    """Feasible configuration of minimum steady-state ART; ties go to the lexicographically first."""
    config = config or EnvConfig()
    env = _make_env(topology, config)
    n = env.n
    if _memory_never_binds(env):
        configs, arts, acc_sum = _all_arts(topology, config)
        feasible = acc_sum >= n * constraint.threshold_hundredths
        if not feasible.any():
            raise RuntimeError("no feasible configuration")
        best = arts[feasible].min()
        tied = np.flatnonzero(feasible & (arts <= best + REL_TOL * best))
        winner = configs[tied[0]]  # enumeration order is lexicographic
        result = evaluate(winner, topology, config, env)
        if abs(result.art - best) > REL_TOL * best:
            raise AssertionError(f"closed form {best} disagrees with replay {result.art}")
        return result

    best: JointConfiguration | None = None
    for cfg in enumerate_configurations(n, env.n_actions):
        models = [env._model(env.actions[a].model) for a in cfg]
        if not constraint.satisfied_by(models):
            continue
        cand = evaluate(cfg, topology, config, env)
        if best is None or cand.art < best.art - REL_TOL * best.art:
            best = cand
    assert best is not None
    return best


@dataclass(frozen=True)
class MatchReport:
    exact_match: bool
    cost_match: bool
    policy_art: float
    oracle_art: float

    @property
    def relative_gap(self) -> float:
        return (self.policy_art - self.oracle_art) / self.oracle_art


def policy_match(policy: Sequence[int] | JointConfiguration, oracle: JointConfiguration,
                 topology: Topology, config: EnvConfig | None = None,
                 constraint: AccuracyConstraint | None = None) -> MatchReport:
    """Compare a policy's configuration with the oracle's.

    Cost match is the acceptance signal: distinct configurations may tie. A
    configuration that violates ``constraint`` never cost-matches.
    """
    actions = policy.actions if isinstance(policy, JointConfiguration) else tuple(int(a) for a in policy)
    evald = evaluate(actions, topology, config)
    cost_ok = abs(evald.art - oracle.art) <= REL_TOL * abs(oracle.art)
    if constraint is not None:
        env = _make_env(topology, config)
        models = [env._model(env.actions[a].model) for a in actions]
        cost_ok = cost_ok and constraint.satisfied_by(models)
    return MatchReport(actions == oracle.actions, cost_ok, evald.art, oracle.art)


def random_spot_check(topology: Topology, constraint: AccuracyConstraint, samples: int = 1000,
                      seed: int = 0, config: EnvConfig | None = None) -> tuple[JointConfiguration, list[JointConfiguration]]:
    """The optimum plus ``samples`` random feasible configurations, all evaluated by replay."""
    config = config or EnvConfig()
    env = _make_env(topology, config)
    best = optimal_configuration(topology, constraint, config)
    rng = random.Random(seed)
    out = []
    while len(out) < samples:
        cfg = tuple(rng.randrange(env.n_actions) for _ in range(env.n))
        models = [env._model(env.actions[a].model) for a in cfg]
        if constraint.satisfied_by(models):
            out.append(evaluate(cfg, topology, config, env))
    return best, out
