"""Orchestration agents: tabular Q-learning, DQN, and the hybrid Dyna-style learner.

Rewards are costs (average response time plus an accuracy penalty), so every
greedy choice and every bootstrap target uses ``min``/``argmin``.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import pickle
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Callable, Protocol

import numpy as np

from .approx import MLP, Adam, PrioritizedReplayBuffer, ReplayBuffer, Transition
from .simenv import EdgeCloudEnv, Observation, StepOutcome

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AgentConfig:
    gamma: float = 0.9
    lr: float = 1e-3
    hidden: tuple[int, ...] = (64, 64)
    batch_size: int = 32
    warmup: int = 32
    buffer_capacity: int = 10_000
    reward_scale: float = 1e-3  # costs are learned in seconds
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_epochs: float | None = None  # None: the first half of ``epochs``
    per_alpha: float = 0.6
    per_eps: float = 1e-3
    beta_start: float = 0.4
    beta_end: float = 1.0
    beta_steps: int = 20_000
    # tabular baseline
    ql_lr: float = 0.5
    # hybrid schedule constants
    epochs: int = 50
    n_direct: int = 20
    t_direct: int = 20
    n_world: int = 200
    n_suggest: int = 10
    t_suggest: int = 5
    n_plan: int = 200
    k_best: int = 3
    model_lr: float = 1e-3
    alpha_override: float | None = None
    # what planning does for an action already in D_plan:
    # "literal" rewrites the stored state; "relabel" also swaps in the model's predicted
    # reward and next state; "push" adds the model-predicted tuple as a new entry
    plan_update: str = "push"

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "AgentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown agent settings: {sorted(unknown)}")
        d = dict(d)
        if "hidden" in d:
            d["hidden"] = tuple(d["hidden"])
        return cls(**d)

    def with_overrides(self, **kw) -> "AgentConfig":
        return replace(self, **kw)


class StepEnv(Protocol):
    n: int
    observation: Observation

    def step(self, action: int) -> StepOutcome: ...


# action selection -----------------------------------------------------------

def select_action(values: np.ndarray, eps: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy over costs; exploitation takes the lowest index among minima."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must be in [0, 1]")
    if eps > 0.0 and rng.random() < eps:
        return int(rng.integers(len(values)))
    return int(np.argmin(values))


def linear(start: float, end: float, frac: float) -> float:
    return start + (end - start) * min(max(frac, 0.0), 1.0)


def epsilon_at(config: "AgentConfig", epoch: int) -> float:
    """Exploration rate, annealed linearly from epoch 1 over the first half of training."""
    span = config.eps_decay_epochs if config.eps_decay_epochs is not None else config.epochs / 2
    if span <= 0:
        return config.eps_end
    return linear(config.eps_start, config.eps_end, (epoch - 1) / span)


# training log ----------------------------------------------------------------

@dataclass
class LogRecord:
    epoch: int
    phase: str
    real_env_steps: int
    reward: float | None = None
    loss: float | None = None


@dataclass
class TrainingLog:
    records: list[LogRecord] = field(default_factory=list)
    real_env_steps: int = 0
    experience_ms: float = 0.0
    q_updates: int = 0
    model_updates: int = 0

    def add(self, epoch: int, phase: str, reward: float | None = None, loss: float | None = None) -> None:
        self.records.append(LogRecord(epoch, phase, self.real_env_steps, reward, loss))

    def real_step(self, out: StepOutcome) -> None:
        self.real_env_steps += 1
        self.experience_ms += out.response_time

    @property
    def updates(self) -> int:
        return self.q_updates + self.model_updates

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "epoch", "phase", "reward", "loss", "real_env_steps"])
        for i, r in enumerate(self.records):
            w.writerow([i, r.epoch, r.phase,
                        "" if r.reward is None else repr(r.reward),
                        "" if r.loss is None else repr(r.loss), r.real_env_steps])
        return buf.getvalue()


# tabular Q-learning ------------------------------------------------------------

class QTable:
    """Lazily grown table of action costs; unseen states read as zeros."""

    def __init__(self, n_actions: int, lr: float, gamma: float):
        self.n_actions = n_actions
        self.lr = lr
        self.gamma = gamma
        self.table: dict[tuple, np.ndarray] = {}

    def __len__(self) -> int:
        return len(self.table)

    def values(self, key: tuple) -> np.ndarray:
        v = self.table.get(key)
        return v if v is not None else np.zeros(self.n_actions)

    def update(self, s: tuple, a: int, r: float, s_next: tuple) -> float:
        return tabular_q_update(self, s, a, r, s_next)


def tabular_q_update(table: QTable, s: tuple, a: int, r: float, s_next: tuple) -> float:
    """Q(s,a) += lr * (r + gamma * min_a' Q(s',a') - Q(s,a)); returns the TD error."""
    row = table.table.get(s)
    if row is None:
        row = table.table[s] = np.zeros(table.n_actions)
    target = r + table.gamma * float(np.min(table.values(s_next)))
    td = target - row[a]
    row[a] += table.lr * td
    return td


class TabularQAgent:
    kind = "QL"

    def __init__(self, n_actions: int, config: AgentConfig | None = None, seed: int = 0):
        self.config = config or AgentConfig()
        self.rng = np.random.default_rng(seed)
        self.q = QTable(n_actions, self.config.ql_lr, self.config.gamma)
        self.log = TrainingLog()

    def epsilon(self) -> float:
        # no epoch structure here; an epoch is one DQN epoch's worth of real steps
        c = self.config
        per_epoch = max(1, c.n_direct * c.t_direct)
        return epsilon_at(c, 1 + self.log.real_env_steps // per_epoch)

    def greedy_action(self, obs: Observation) -> int:
        return int(np.argmin(self.q.values(obs.key)))

    def train(self, env: StepEnv, budget: int) -> TrainingLog:
        c = self.config
        s = env.observation
        for _ in range(budget):
            a = select_action(self.q.values(s.key), self.epsilon(), self.rng)
            out = env.step(a)
            self.log.real_step(out)
            self.q.update(s.key, a, out.reward * c.reward_scale, out.observation.key)
            self.log.q_updates += 1
            s = out.observation
        return self.log


# deep Q-network ---------------------------------------------------------------

class DQNAgent:
    """Q-network with a target copy, Adam, and a prioritized replay buffer."""

    kind = "DQN"

    def __init__(self, obs_dim: int, n_actions: int, config: AgentConfig | None = None, seed: int = 0):
        self.config = c = config or AgentConfig()
        self.obs_dim = obs_dim
        self.n_actions = n_actions
        self.rng = np.random.default_rng(seed)
        self.q = MLP((obs_dim, *c.hidden, n_actions), self.rng)
        self.q_target = self.q.copy()
        self.adam = Adam(self.q.params, lr=c.lr)
        self.d_direct = PrioritizedReplayBuffer(c.buffer_capacity, obs_dim, self.rng, c.per_alpha, c.per_eps)
        self.log = TrainingLog()
        self.syncs = 0
        self.epoch = 1

    def epsilon(self) -> float:
        return epsilon_at(self.config, self.epoch)

    def beta(self) -> float:
        c = self.config
        return linear(c.beta_start, c.beta_end, self.log.real_env_steps / c.beta_steps)

    def q_values(self, s: np.ndarray) -> np.ndarray:
        return self.q.forward(s)

    def greedy_action(self, obs: Observation) -> int:
        return int(np.argmin(self.q.forward(obs.vector())))

    def sync_target(self) -> None:
        self.q_target.load_from(self.q)
        self.syncs += 1

    def td_targets(self, r: np.ndarray, s_next: np.ndarray) -> np.ndarray:
        """Bootstrap from the target network only."""
        return r * self.config.reward_scale + self.config.gamma * self.q_target.forward(s_next).min(axis=1)

    def learn(self, buffer: PrioritizedReplayBuffer, batch_size: int | None = None) -> float:
        """One prioritized minibatch, one Adam step, refreshed priorities."""
        bs = batch_size or self.config.batch_size
        batch = buffer.sample(bs, self.beta())
        target = self.td_targets(batch.r, batch.s_next)
        pred = self.q.forward(batch.s)
        full_target = pred.copy()
        rows = np.arange(len(batch.a))
        full_target[rows, batch.a] = target
        mask = np.zeros_like(pred)
        mask[rows, batch.a] = 1.0
        loss, grads, out = self.q.loss_and_grads(batch.s, full_target, batch.weights, mask)
        self.adam.step(self.q.params, grads)
        buffer.update_priorities(batch.indices, out[rows, batch.a] - target)
        self.log.q_updates += 1
        return loss


def direct_rl_session(agent: DQNAgent, env: StepEnv, t_direct: int, epoch: int = 0,
                      d_world: ReplayBuffer | None = None) -> None:
    """``t_direct`` real steps; each transition goes to D_direct (and D_world), then one update."""
    c = agent.config
    agent.epoch = max(epoch, 1)
    s_obs = env.observation
    s = s_obs.vector()
    for _ in range(t_direct):
        a = select_action(agent.q.forward(s), agent.epsilon(), agent.rng)
        out = env.step(a)
        agent.log.real_step(out)
        s_next = out.observation.vector()
        t = Transition(s, a, out.reward, s_next)
        agent.d_direct.push(t)
        if d_world is not None:
            d_world.push(t)
        loss = None
        if len(agent.d_direct) >= max(c.warmup, c.batch_size):
            loss = agent.learn(agent.d_direct)
        agent.log.add(epoch, "direct", out.reward, loss)
        s = s_next


def session_count(base: int, weight: float) -> int:
    """Round ``weight * base`` half-up, keeping at least one session when ``base > 0``."""
    if base <= 0:
        return 0
    return max(1, math.floor(weight * base + 0.5))


def dqn_train(agent: DQNAgent, env: StepEnv, budget: int) -> TrainingLog:
    """Direct-RL-only training: blocks of ``n_direct`` sessions, each followed by a target sync."""
    c = agent.config
    epoch = 0
    while agent.log.real_env_steps < budget:
        epoch += 1
        for _ in range(c.n_direct):
            steps = min(c.t_direct, budget - agent.log.real_env_steps)
            if steps <= 0:
                break
            direct_rl_session(agent, env, steps, epoch)
        agent.sync_target()
        # the hybrid loop syncs twice per epoch; keep the counters aligned
        agent.sync_target()
    return agent.log


# system model and hybrid agent ---------------------------------------------------

def _identity(v: np.ndarray) -> np.ndarray:
    return np.asarray(v, dtype=np.float64)


class SystemModel:
    """Predicts (cost, next observation) for every action from one state."""

    def __init__(self, obs_dim: int, n_actions: int, snap: Callable[[np.ndarray], np.ndarray] | None,
                 config: AgentConfig, rng: np.random.Generator):
        self.obs_dim = obs_dim
        self.n_actions = n_actions
        # maps a raw predicted encoding to the nearest legal observation
        self.snap = snap or _identity
        self.config = config
        self.net = MLP((obs_dim + n_actions, *config.hidden, 1 + obs_dim), rng, zero_output=True)
        self.adam = Adam(self.net.params, lr=config.model_lr)
        self._eye = np.eye(n_actions)

    def inputs(self, s: np.ndarray, a: np.ndarray) -> np.ndarray:
        s = np.atleast_2d(s)
        return np.hstack([s, self._eye[np.asarray(a).reshape(-1)]])

    def train_session(self, d_world: ReplayBuffer, batch_size: int) -> float | None:
        if len(d_world) < batch_size:
            log.debug("system model: D_world has %d < %d transitions, skipping", len(d_world), batch_size)
            return None
        b = d_world.sample(batch_size)
        x = self.inputs(b.s, b.a)
        target = np.hstack([(b.r * self.config.reward_scale)[:, None], b.s_next])
        loss, grads, _ = self.net.loss_and_grads(x, target)
        self.adam.step(self.net.params, grads)
        return loss

    def predict_all(self, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Predicted scaled cost per action and raw next-state encodings."""
        x = self.inputs(np.repeat(s[None, :], self.n_actions, axis=0), np.arange(self.n_actions))
        out = self.net.forward(x)
        return out[:, 0], out[:, 1:]

    def predict(self, s: np.ndarray, a: int) -> tuple[float, np.ndarray]:
        out = self.net.forward(self.inputs(s, [a]))[0]
        return float(out[0]), self.snap(out[1:])


def train_system_model(model: SystemModel, d_world: ReplayBuffer, sessions: int, batch_size: int) -> list[float]:
    losses = []
    for _ in range(sessions):
        loss = model.train_session(d_world, batch_size)
        if loss is not None:
            losses.append(loss)
    return losses


def suggest_actions(model: SystemModel, s: np.ndarray, k: int) -> list[int]:
    """The ``k`` actions with the lowest predicted cost, ties by lowest index."""
    if not 1 <= k <= model.n_actions:
        raise ValueError(f"K must be in [1, {model.n_actions}]")
    costs, _ = model.predict_all(s)
    return [int(i) for i in np.argsort(costs, kind="stable")[:k]]


class HybridAgent(DQNAgent):
    """DQN core plus a learned system model and a planning buffer."""

    kind = "HL"

    def __init__(self, obs_dim: int, n_actions: int, snap: Callable[[np.ndarray], np.ndarray] | None = None,
                 config: AgentConfig | None = None, seed: int = 0):
        super().__init__(obs_dim, n_actions, config, seed)
        c = self.config
        # separate stream so the direct-RL trajectory matches a plain DQN with the same seed
        self.model_rng = np.random.default_rng((seed, 1))
        self.model = SystemModel(obs_dim, n_actions, snap, c, self.model_rng)
        self.d_world = ReplayBuffer(c.buffer_capacity, obs_dim, self.model_rng)
        self.d_plan = PrioritizedReplayBuffer(c.buffer_capacity, obs_dim, self.model_rng, c.per_alpha, c.per_eps)
        self.schedule: list[dict[str, float]] = []
        self.next_epoch = 1

    def alpha(self, epoch: int) -> float:
        if self.config.alpha_override is not None:
            return self.config.alpha_override
        # epochs past N (training continued until convergence) stay at alpha = 1
        return min(1.0, epoch / self.config.epochs)

    def session_counts(self, epoch: int) -> dict[str, int]:
        c = self.config
        a = self.alpha(epoch)
        return {
            "direct": session_count(c.n_direct, 1 - a / 2),
            "world": session_count(c.n_world, 1 - a / 2),
            "suggest": session_count(c.n_suggest, (a + 1) / 2),
            "plan": session_count(c.n_plan, (a + 1) / 2),
        }


def planning_session(agent: HybridAgent, env: StepEnv, t_suggest: int, epoch: int = 0) -> int:
    """Roll the system model from the real state; probe never-tried suggested actions for real.

    Returns the number of real environment steps taken.
    """
    c = agent.config
    s = env.observation.vector()
    probes = 0
    for _ in range(t_suggest):
        costs, nexts = agent.model.predict_all(s)
        order = np.argsort(costs, kind="stable")
        a = int(order[0])
        s_imagined = agent.model.snap(nexts[a])
        for a_prime in (int(x) for x in order[: c.k_best]):
            slot = agent.d_plan.slot_with_action(a_prime)
            if slot is None:
                # real probe from the environment's actual current state
                s_real = env.observation.vector()
                out = env.step(a_prime)
                agent.log.real_step(out)
                probes += 1
                agent.d_plan.push(Transition(s_real, a_prime, out.reward, out.observation.vector()))
                agent.log.add(epoch, "planning", out.reward)
            elif c.plan_update == "relabel":
                r_hat = costs[a_prime] / c.reward_scale
                agent.d_plan.relabel(slot, s, r_hat, agent.model.snap(nexts[a_prime]))
            elif c.plan_update == "push":
                r_hat = costs[a_prime] / c.reward_scale
                agent.d_plan.push(Transition(s, a_prime, r_hat, agent.model.snap(nexts[a_prime])))
            else:
                agent.d_plan.set_state(slot, s)
        s = s_imagined
    return probes


def hybrid_train(agent: HybridAgent, env: StepEnv, epochs: int | None = None,
                 checkpoint_dir: str | Path | None = None) -> TrainingLog:
    """Run epochs ``agent.next_epoch..epochs``; a restored checkpoint resumes where it stopped."""
    c = agent.config
    n_epochs = c.epochs if epochs is None else epochs
    bs = c.batch_size
    for epoch in range(agent.next_epoch, n_epochs + 1):
        counts = agent.session_counts(epoch)
        agent.schedule.append({"epoch": epoch, "alpha": agent.alpha(epoch), **counts})
        for _ in range(counts["direct"]):
            direct_rl_session(agent, env, c.t_direct, epoch, agent.d_world)
        agent.sync_target()
        for loss in train_system_model(agent.model, agent.d_world, counts["world"], bs):
            agent.log.model_updates += 1
            agent.log.add(epoch, "model", loss=loss)
        for _ in range(counts["suggest"]):
            planning_session(agent, env, c.t_suggest, epoch)
        if len(agent.d_plan):
            for _ in range(counts["plan"]):
                loss = agent.learn(agent.d_plan, min(bs, len(agent.d_plan)))
                agent.log.add(epoch, "planning", loss=loss)
        agent.sync_target()
        agent.next_epoch = epoch + 1
        if checkpoint_dir is not None:
            save_checkpoint(agent, env, checkpoint_dir)
    return agent.log


# checkpoints -------------------------------------------------------------------

_NETS = {"q.txt": ("q",), "q_target.txt": ("q_target",), "model.txt": ("model", "net")}


def save_checkpoint(agent: DQNAgent, env: StepEnv, directory: str | Path) -> None:
    """Networks as parameter text files; optimizer moments, buffers, RNGs and env in ``state.pkl``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    nets = {}
    for name, path in _NETS.items():
        owner = agent
        for attr in path[:-1]:
            owner = getattr(owner, attr, None)
        if owner is None or not hasattr(owner, path[-1]):
            continue
        nets[name] = (owner, path[-1], getattr(owner, path[-1]))
    try:
        for name, (owner, attr, net) in nets.items():
            net.save(d / name)
            setattr(owner, attr, None)
        with open(d / "state.pkl", "wb") as fh:
            pickle.dump({"agent": agent, "env": env}, fh)
    finally:
        for owner, attr, net in nets.values():
            setattr(owner, attr, net)


def load_checkpoint(directory: str | Path) -> tuple[DQNAgent, StepEnv]:
    d = Path(directory)
    with open(d / "state.pkl", "rb") as fh:
        state = pickle.load(fh)
    agent = state["agent"]
    for name, path in _NETS.items():
        if (d / name).exists():
            owner = agent
            for attr in path[:-1]:
                owner = getattr(owner, attr)
            setattr(owner, path[-1], MLP.load(d / name))
    return agent, state["env"]


# greedy evaluation ----------------------------------------------------------------

WARMUP_ROUNDS = 10


def greedy_policy(policy: Callable[[Observation], int], env: EdgeCloudEnv, warmup_rounds: int = WARMUP_ROUNDS) -> tuple[int, ...]:
    """Roll ``env`` greedily from reset; return the decisions of the last device round."""
    env.reset(0)
    decisions: list[int] = []
    for _ in range(warmup_rounds + 1):
        decisions = []
        for _ in range(env.n):
            a = policy(env.observation)
            decisions.append(a)
            env.step(a)
    return tuple(decisions)
