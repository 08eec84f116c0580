"""End-edge-cloud inference simulator.

A star topology of ``n`` single-core end devices, one 2-core edge server and
one 4-core cloud server. Devices issue inference requests round-robin; each
request is serviced by the node and model chosen by the orchestrator. Latency
is linear in model MACs per tier, with a processor-sharing queue wait and a
fixed per-hop payload time plus 20 ms per traversal of a weak link.

A job stays resident on its node for the ``n - 1`` requests that follow it,
so the state a device observes when it issues a request reflects the most
recent decision of every other device.
"""

from __future__ import annotations

import csv
import io
from collections import deque
from dataclasses import dataclass, field, fields, replace
from enum import Enum, IntEnum
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

from .catalog import AccuracyConstraint, InferenceModel, Precision, load_default_catalog

MAX_DEVICES = 5
CPU_LEVELS = 9  # edge/cloud CPU utilisation levels 0..8


class ConfigurationError(ValueError):
    pass


class LifecycleError(RuntimeError):
    pass


class Tier(IntEnum):
    END = 0
    EDGE = 1
    CLOUD = 2


class LinkQuality(str, Enum):
    REGULAR = "R"
    WEAK = "W"


class Target(str, Enum):
    LOCAL = "L"
    EDGE = "E"
    CLOUD = "C"


@dataclass(frozen=True)
class Topology:
    device_links: tuple[LinkQuality, ...]
    edge_link: LinkQuality = LinkQuality.REGULAR

    @property
    def n_devices(self) -> int:
        return len(self.device_links)

    def validate(self) -> None:
        if not 1 <= self.n_devices <= MAX_DEVICES:
            raise ConfigurationError(f"n_devices must be in [1, {MAX_DEVICES}], got {self.n_devices}")

    @classmethod
    def from_pattern(cls, pattern: str, n_devices: int | None = None) -> "Topology":
        """Build from a link pattern such as ``"RWRWR/W"`` (devices / edge)."""
        devices, _, edge = pattern.partition("/")
        links = tuple(LinkQuality(c) for c in devices.strip().upper())
        if n_devices is not None:
            if n_devices > len(links):
                raise ConfigurationError(f"pattern {pattern!r} has fewer than {n_devices} devices")
            links = links[:n_devices]
        return cls(links, LinkQuality(edge.strip().upper() or "R"))


# Network conditions of the four evaluation scenarios for devices S1..S5 and the edge.
SCENARIOS: dict[str, str] = {
    "A": "RRRRR/R",
    "B": "RWRWR/W",
    "C": "WWWRR/R",
    "D": "WWWWW/W",
}


def scenario_topology(name: str, n_devices: int = MAX_DEVICES) -> Topology:
    if name not in SCENARIOS:
        raise ConfigurationError(f"unknown scenario {name!r}")
    if not 1 <= n_devices <= MAX_DEVICES:
        raise ConfigurationError(f"n_devices must be in [1, {MAX_DEVICES}], got {n_devices}")
    return Topology.from_pattern(SCENARIOS[name], n_devices)


@dataclass(frozen=True)
class OrchestrationAction:
    target: Target
    model: str  # catalog id

    def __str__(self) -> str:
        return f"{self.model},{self.target.value}"


def action_space(catalog: Sequence[InferenceModel]) -> list[OrchestrationAction]:
    """Local with any model, then edge and cloud with the most accurate model."""
    best = catalog[0].id
    acts = [OrchestrationAction(Target.LOCAL, m.id) for m in catalog]
    acts.append(OrchestrationAction(Target.EDGE, best))
    acts.append(OrchestrationAction(Target.CLOUD, best))
    return acts


N_ACTIONS = len(action_space(load_default_catalog()))


@dataclass(frozen=True)
class EnvConfig:
    # million MACs per ms per core for FP32; Int8 runs int8_speedup times faster
    throughput: tuple[float, float, float] = (0.57, 0.80, 1.00)
    int8_speedup: float = 1.6
    cpu_count: tuple[int, int, int] = (1, 2, 4)
    mem_capacity: tuple[int, int, int] = (4000, 16000, 32000)
    mem_busy_fraction: float = 0.5
    payload_ms: float = 10.0
    weak_delay_ms: float = 20.0
    penalty: float = 2000.0
    anchor_ms: float = 72.0  # idle local latency of the smallest Int8 model
    # optional observation features beyond the base state (both off by default)
    requester_index: bool = False
    job_details: bool = False  # per-device action of its in-window request

    @classmethod
    def from_dict(cls, d: dict) -> "EnvConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown environment settings: {sorted(unknown)}")
        d = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        t = self.throughput
        if not (t[2] > t[1] > t[0] > 0):
            raise ConfigurationError("throughput must increase End < Edge < Cloud")
        if self.int8_speedup < 1.0:
            raise ConfigurationError("Int8 throughput must not be below FP32")
        if min(self.cpu_count) < 1:
            raise ConfigurationError("cpu_count must be positive")


@dataclass
class Job:
    node: int
    model: InferenceModel
    step: int
    device: int = 0
    action: int = -1


@dataclass(frozen=True)
class Observation:
    """Discrete system state; one ``(P, M, B)`` triple per node."""

    devices: tuple[tuple[int, int, int], ...]
    edge: tuple[int, int, int]
    cloud: tuple[int, int, int]
    requester: int | None = None
    # optional: per device, action index of its in-window request (-1 if none)
    jobs: tuple[int, ...] | None = None

    @property
    def key(self) -> tuple:
        return (self.devices, self.edge, self.cloud, self.requester, self.jobs)

    def vector(self) -> np.ndarray:
        return encode_observation(self)


def observation_size(n_devices: int, requester_index: bool = False, job_details: bool = False) -> int:
    return 3 * n_devices + 6 + (n_devices if requester_index else 0) + (N_ACTIONS * n_devices if job_details else 0)


def encode_observation(obs: Observation) -> np.ndarray:
    """Map every component to [0, 1]: binary flags as-is, CPU levels as k/8."""
    vals: list[float] = []
    for dev in obs.devices:
        vals.extend(dev)
    for p, m, b in (obs.edge, obs.cloud):
        vals.extend((p / (CPU_LEVELS - 1), m, b))
    if obs.requester is not None:
        onehot = [0.0] * len(obs.devices)
        onehot[obs.requester] = 1.0
        vals.extend(onehot)
    if obs.jobs is not None:
        for a in obs.jobs:
            onehot = [0.0] * N_ACTIONS
            if a >= 0:
                onehot[a] = 1.0
            vals.extend(onehot)
    return np.asarray(vals, dtype=np.float64)


def decode_vector(vec: np.ndarray, n_devices: int, requester_index: bool = False,
                  job_details: bool = False) -> Observation:
    """Snap a (possibly predicted) encoding to the nearest legal observation."""
    vec = np.asarray(vec, dtype=np.float64)
    if vec.shape != (observation_size(n_devices, requester_index, job_details),):
        raise ValueError(f"encoding length {vec.shape} does not match {n_devices} devices")

    def bit(x: float) -> int:
        return 1 if x >= 0.5 else 0

    def level(x: float) -> int:
        return int(np.clip(np.rint(x * (CPU_LEVELS - 1)), 0, CPU_LEVELS - 1))

    devices = tuple((bit(vec[3 * i]), bit(vec[3 * i + 1]), bit(vec[3 * i + 2])) for i in range(n_devices))
    o = 3 * n_devices
    edge = (level(vec[o]), bit(vec[o + 1]), bit(vec[o + 2]))
    cloud = (level(vec[o + 3]), bit(vec[o + 4]), bit(vec[o + 5]))
    o += 6
    requester = None
    if requester_index:
        requester = int(np.argmax(vec[o:o + n_devices]))
        o += n_devices
    jobs = None
    if job_details:
        blocks = vec[o:].reshape(n_devices, N_ACTIONS)
        jobs = tuple(int(np.argmax(b)) if b.max() >= 0.5 else -1 for b in blocks)
    return Observation(devices, edge, cloud, requester, jobs)


def snap_vector(vec: np.ndarray, n_devices: int, requester_index: bool = False,
                job_details: bool = False) -> np.ndarray:
    return encode_observation(decode_vector(vec, n_devices, requester_index, job_details))


def reward(window_art: float, window_aa: float, constraint: AccuracyConstraint, penalty: float = 1000.0) -> float:
    """Cost to minimise: average response time, plus ``penalty`` if accuracy falls short."""
    if window_art < 0:
        raise ValueError("window_art must be non-negative")
    if round(window_aa * 100) >= constraint.threshold_hundredths:
        return window_art
    return window_art + penalty


@dataclass(frozen=True)
class StepOutcome:
    observation: Observation
    reward: float
    response_time: float
    window_art: float
    window_aa: float
    violated: bool
    device: int
    action: int


@dataclass
class ResourceState:
    n_devices: int
    jobs: list[Job] = field(default_factory=list)
    round_index: int = 0

    def node_jobs(self, node: int) -> int:
        return sum(1 for j in self.jobs if j.node == node)

    def node_mem(self, node: int) -> int:
        return sum(j.model.mem_footprint for j in self.jobs if j.node == node)


class EdgeCloudEnv:
    """Single-threaded request-by-request simulator with a reset/step interface."""

    def __init__(
        self,
        topology: Topology,
        constraint: AccuracyConstraint = AccuracyConstraint.MIN,
        config: EnvConfig | None = None,
        catalog: Sequence[InferenceModel] | None = None,
    ):
        topology.validate()
        self.topology = topology
        self.constraint = constraint
        self.config = config or EnvConfig()
        self.config.validate()
        self.catalog = list(catalog) if catalog is not None else load_default_catalog()
        self.actions = action_space(self.catalog)
        self.n = topology.n_devices
        self.edge_node = self.n
        self.cloud_node = self.n + 1

        anchor = self.catalog[-1]
        raw = anchor.macs / self._per_core(Tier.END, anchor.precision)
        self.compute_scale = self.config.anchor_ms / raw

        self._link_extra = [self._extra(q) for q in topology.device_links]
        self._edge_extra = self._extra(topology.edge_link)
        self.state: ResourceState | None = None
        self.seed: int | None = None
        self.step_count = 0
        self.clock_ms = 0.0
        self._rt_window: deque[float] = deque(maxlen=self.n)
        self._acc_window: deque[int] = deque(maxlen=self.n)
        self._obs: Observation | None = None

    # latency model -------------------------------------------------------

    def _extra(self, q: LinkQuality) -> float:
        return self.config.weak_delay_ms if q is LinkQuality.WEAK else 0.0

    def _per_core(self, tier: Tier, precision: Precision) -> float:
        t = self.config.throughput[tier]
        return t * self.config.int8_speedup if precision is Precision.INT8 else t

    def compute_ms(self, model: InferenceModel, tier: Tier) -> float:
        return model.macs / self._per_core(tier, model.precision) * self.compute_scale

    def network_ms(self, target: Target, device: int) -> float:
        if target is Target.LOCAL:
            return 0.0
        # request payload plus the weak-link delay on the way in and on the way back
        ms = self.config.payload_ms + 2 * self._link_extra[device]
        if target is Target.CLOUD:
            ms += self.config.payload_ms + 2 * self._edge_extra
        return ms

    def _node_of(self, target: Target, device: int) -> tuple[int, Tier]:
        if target is Target.LOCAL:
            return device, Tier.END
        if target is Target.EDGE:
            return self.edge_node, Tier.EDGE
        return self.cloud_node, Tier.CLOUD

    def response_time(self, action: OrchestrationAction | int, state: ResourceState | None = None,
                      device: int | None = None) -> float:
        """Queue wait + compute + network for one request, without mutating anything."""
        action = self._as_action(action)
        state = state if state is not None else self._require_state()
        device = state.round_index if device is None else device
        model = self._model(action.model)
        node, tier = self._node_of(action.target, device)
        compute = self.compute_ms(model, tier)
        wait = state.node_jobs(node) / self.config.cpu_count[tier] * compute
        return wait + compute + self.network_ms(action.target, device)

    # lifecycle -------------------------------------------------------------

    def reset(self, seed: int = 0) -> Observation:
        # the simulator itself is deterministic; the seed is recorded for traceability
        self.seed = seed
        self.state = ResourceState(self.n)
        self.step_count = 0
        self.clock_ms = 0.0
        self._rt_window.clear()
        self._acc_window.clear()
        self._obs = self.encode_state(self.state)
        return self._obs

    @property
    def observation(self) -> Observation:
        if self._obs is None:
            raise LifecycleError("environment has not been reset")
        return self._obs

    def step(self, action: OrchestrationAction | int, constraint: AccuracyConstraint | None = None) -> StepOutcome:
        state = self._require_state()
        constraint = constraint or self.constraint
        act = self._as_action(action)
        idx = self.actions.index(act) if not isinstance(action, (int, np.integer)) else int(action)
        device = state.round_index
        rt = self.response_time(act, state, device)
        model = self._model(act.model)
        node, tier = self._node_of(act.target, device)
        if state.node_mem(node) + model.mem_footprint <= self.config.mem_capacity[tier]:
            state.jobs.append(Job(node, model, self.step_count, device, idx))
        # else: the job queues outside memory and is not resident

        self._rt_window.append(rt)
        self._acc_window.append(model.accuracy_hundredths)
        self.clock_ms += rt
        self.step_count += 1
        state.round_index = (device + 1) % self.n
        horizon = self.step_count - (self.n - 1)
        state.jobs = [j for j in state.jobs if j.step >= horizon]

        art = sum(self._rt_window) / len(self._rt_window)
        aa = sum(self._acc_window) / len(self._acc_window) / 100.0
        violated = sum(self._acc_window) < len(self._acc_window) * constraint.threshold_hundredths
        cost = art + self.config.penalty if violated else art
        self._obs = self.encode_state(state)
        return StepOutcome(self._obs, cost, rt, art, aa, violated, device, idx)

    def encode_state(self, state: ResourceState) -> Observation:
        cfg = self.config
        busy = [0] * (self.n + 2)
        mem = [0] * (self.n + 2)
        for j in state.jobs:
            busy[j.node] += 1
            mem[j.node] += j.model.mem_footprint

        def mbit(node: int, tier: Tier) -> int:
            return int(mem[node] > cfg.mem_busy_fraction * cfg.mem_capacity[tier])

        weak = [int(q is LinkQuality.WEAK) for q in self.topology.device_links]
        edge_weak = int(self.topology.edge_link is LinkQuality.WEAK)
        devices = tuple((int(busy[i] >= 1), mbit(i, Tier.END), weak[i]) for i in range(self.n))
        top = CPU_LEVELS - 1
        edge = (min(busy[self.edge_node], top), mbit(self.edge_node, Tier.EDGE), edge_weak)
        cloud = (min(busy[self.cloud_node], top), mbit(self.cloud_node, Tier.CLOUD), edge_weak)
        requester = state.round_index if cfg.requester_index else None
        jobs = None
        if cfg.job_details:
            detail = [-1] * self.n
            for j in state.jobs:
                detail[j.device] = j.action
            jobs = tuple(detail)
        return Observation(devices, edge, cloud, requester, jobs)

    # helpers -----------------------------------------------------------------

    @property
    def observation_size(self) -> int:
        return observation_size(self.n, self.config.requester_index, self.config.job_details)

    def snap(self, vec: np.ndarray) -> np.ndarray:
        """Nearest legal observation encoding for this environment."""
        return snap_vector(vec, self.n, self.config.requester_index, self.config.job_details)

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    def _require_state(self) -> ResourceState:
        if self.state is None:
            raise LifecycleError("step before reset")
        return self.state

    def _as_action(self, action: OrchestrationAction | int) -> OrchestrationAction:
        if isinstance(action, (int, np.integer)):
            if not 0 <= action < len(self.actions):
                raise ValueError(f"action index {action} out of range")
            return self.actions[int(action)]
        if action not in self.actions:
            raise ValueError(f"invalid action {action}: edge and cloud only serve {self.catalog[0].id}")
        return action

    def _model(self, model_id: str) -> InferenceModel:
        return self.catalog[int(model_id[1:])]


# scenario files and traces --------------------------------------------------

@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    topology: Topology
    constraint: AccuracyConstraint
    seed: int = 0


def load_scenario(path: str | Path) -> ScenarioSpec:
    """YAML with keys n_devices, device_links (e.g. ``RWR``), edge_link, constraint, seed."""
    with open(path) as fh:
        doc = yaml.safe_load(fh) or {}
    try:
        links = str(doc["device_links"]).upper()
        n = int(doc.get("n_devices", len(links)))
        topo = Topology.from_pattern(f"{links}/{doc.get('edge_link', 'R')}", n)
    except (KeyError, ValueError) as exc:
        raise ConfigurationError(f"bad scenario file {path}: {exc}") from exc
    topo.validate()
    return ScenarioSpec(
        name=str(doc.get("name", Path(path).stem)),
        topology=topo,
        constraint=AccuracyConstraint.parse(str(doc.get("constraint", "Min"))),
        seed=int(doc.get("seed", 0)),
    )


TRACE_FIELDS = ["step", "device", "action", "response_time_ms", "window_art", "window_aa", "violated"]


class TraceWriter:
    """Collects step outcomes and renders them as CSV."""

    def __init__(self, env: EdgeCloudEnv):
        self.env = env
        self.rows: list[list] = []

    def record(self, out: StepOutcome) -> None:
        self.rows.append([
            self.env.step_count, out.device, str(self.env.actions[out.action]),
            f"{out.response_time:.6f}", f"{out.window_art:.6f}", f"{out.window_aa:.2f}", int(out.violated),
        ])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_FIELDS)
        w.writerows(self.rows)
        return buf.getvalue()


def with_requester_index(config: EnvConfig, on: bool = True) -> EnvConfig:
    return replace(config, requester_index=on)


def with_learning_features(config: EnvConfig | None = None) -> EnvConfig:
    """``config`` with the requester index and job details switched on."""
    return replace(config or EnvConfig(), requester_index=True, job_details=True)
