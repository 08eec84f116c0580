"""Numeric substrate: a small ReLU MLP with hand-written backprop, Adam, and replay buffers."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np


class MLP:
    """Feed-forward network; ReLU on hidden layers, identity output.

    Weights are stored as ``(fan_in, fan_out)`` matrices so a batch ``X`` of
    shape ``(B, fan_in)`` maps through ``X @ W + b``.
    """

    def __init__(self, sizes: Sequence[int], rng: np.random.Generator | None = None, zero_output: bool = False):
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        self.sizes = tuple(int(s) for s in sizes)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for i, (fi, fo) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            last = i == len(self.sizes) - 2
            if last and zero_output:
                w = np.zeros((fi, fo))
            else:
                # He init for ReLU layers
                w = rng.normal(0.0, np.sqrt(2.0 / fi), size=(fi, fo))
            self.weights.append(w)
            self.biases.append(np.zeros(fo))

    @property
    def params(self) -> list[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def copy(self) -> "MLP":
        out = MLP.__new__(MLP)
        out.sizes = self.sizes
        out.weights = [w.copy() for w in self.weights]
        out.biases = [b.copy() for b in self.biases]
        return out

    def load_from(self, other: "MLP") -> None:
        for dst, src in zip(self.params, other.params):
            dst[...] = src

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        h = x[None, :] if single else x
        if h.shape[1] != self.sizes[0]:
            raise ValueError(f"input width {h.shape[1]} != {self.sizes[0]}")
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = np.maximum(h, 0.0)
        return h[0] if single else h

    __call__ = forward

    def loss_and_grads(
        self,
        x: np.ndarray,
        target: np.ndarray,
        weight: np.ndarray | None = None,
        mask: np.ndarray | None = None,
    ) -> tuple[float, list[np.ndarray], np.ndarray]:
        """Weighted squared error and its gradient.

        loss = mean_i  w_i * sum_j m_ij (y_ij - t_ij)^2

        Returns ``(loss, grads, outputs)`` with ``grads`` ordered like :attr:`params`.
        """
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        target = np.asarray(target, dtype=np.float64).reshape(x.shape[0], -1)
        n = x.shape[0]
        if n == 0:
            raise ValueError("empty batch")
        if x.shape[1] != self.sizes[0] or target.shape[1] != self.sizes[-1]:
            raise ValueError("batch shape does not match network")
        w = np.ones(n) if weight is None else np.asarray(weight, dtype=np.float64)
        if np.any(w < 0):
            raise ValueError("importance weights must be non-negative")

        acts = [x]
        h = x
        last = len(self.weights) - 1
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ W + b
            if i < last:
                h = np.maximum(h, 0.0)
            acts.append(h)
        y = acts[-1]
        err = y - target
        if mask is not None:
            err = err * mask
        loss = float(np.mean(w * np.sum(err * err, axis=1)))

        delta = (2.0 / n) * err * w[:, None]
        grads: list[np.ndarray] = [None] * (2 * len(self.weights))  # type: ignore[list-item]
        for i in range(last, -1, -1):
            grads[2 * i] = acts[i].T @ delta
            grads[2 * i + 1] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.weights[i].T) * (acts[i] > 0.0)
        return loss, grads, y

    # serialization: header line of layer sizes, then one value per line (row-major)

    def to_text(self) -> str:
        flat = np.concatenate([p.ravel() for p in self.params])
        lines = [" ".join(str(s) for s in self.sizes)]
        lines.extend(repr(float(v)) for v in flat)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "MLP":
        lines = text.strip().splitlines()
        sizes = [int(s) for s in lines[0].split()]
        net = cls(sizes)
        flat = np.array([float(v) for v in lines[1:]])
        expected = sum(p.size for p in net.params)
        if flat.size != expected:
            raise ValueError(f"snapshot has {flat.size} values, network needs {expected}")
        pos = 0
        for p in net.params:
            p[...] = flat[pos:pos + p.size].reshape(p.shape)
            pos += p.size
        return net

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path: str | Path) -> "MLP":
        return cls.from_text(Path(path).read_text())


class Adam:
    """Adam with bias correction; moments are kept per parameter array."""

    def __init__(self, params: Sequence[np.ndarray], lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> None:
        if len(params) != len(grads):
            raise ValueError("params/grads length mismatch")
        for g in grads:
            if not np.all(np.isfinite(g)):
                raise FloatingPointError("non-finite gradient; refusing to update")
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            if p.shape != g.shape:
                raise ValueError(f"shape mismatch {p.shape} vs {g.shape}")
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            # eps sits inside the root: theta -= lr * m_hat / sqrt(v_hat + eps)
            p -= self.lr * (m / c1) / np.sqrt(v / c2 + self.eps)


@dataclass(frozen=True)
class Transition:
    s: np.ndarray
    a: int
    r: float
    s_next: np.ndarray


@dataclass
class Batch:
    s: np.ndarray
    a: np.ndarray
    r: np.ndarray
    s_next: np.ndarray
    indices: np.ndarray
    weights: np.ndarray


class UndersizedBufferError(ValueError):
    pass


class ReplayBuffer:
    """Fixed-capacity ring of transitions, sampled uniformly without replacement."""

    def __init__(self, capacity: int, obs_dim: int, rng: np.random.Generator):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.rng = rng
        self.s = np.zeros((capacity, obs_dim))
        self.s_next = np.zeros((capacity, obs_dim))
        self.a = np.zeros(capacity, dtype=np.int64)
        self.r = np.zeros(capacity)
        self._next = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def push(self, t: Transition) -> int:
        if not np.isfinite(t.r):
            raise ValueError("reward must be finite")
        i = self._next
        self.s[i] = t.s
        self.s_next[i] = t.s_next
        self.a[i] = t.a
        self.r[i] = t.r
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)
        self._on_push(i)
        return i

    def _on_push(self, slot: int) -> None:
        pass

    def __getitem__(self, slot: int) -> Transition:
        if not 0 <= slot < self._size:
            raise IndexError(slot)
        return Transition(self.s[slot].copy(), int(self.a[slot]), float(self.r[slot]), self.s_next[slot].copy())

    def slots_in_order(self) -> list[int]:
        """Occupied slots, oldest first."""
        if self._size < self.capacity:
            return list(range(self._size))
        return [(self._next + k) % self.capacity for k in range(self.capacity)]

    def transitions(self) -> list[Transition]:
        return [self[i] for i in self.slots_in_order()]

    def _gather(self, idx: np.ndarray, weights: np.ndarray) -> Batch:
        return Batch(self.s[idx], self.a[idx], self.r[idx], self.s_next[idx], idx, weights)

    def sample(self, batch_size: int) -> Batch:
        if self._size < batch_size:
            raise UndersizedBufferError(f"buffer holds {self._size} < {batch_size}")
        idx = self.rng.choice(self._size, size=batch_size, replace=False)
        return self._gather(idx, np.ones(batch_size))


class PrioritizedReplayBuffer(ReplayBuffer):
    """Proportional prioritized replay: P(i) = p_i^alpha / sum_j p_j^alpha.

    New transitions enter with the current maximum priority. Sampling is with
    replacement and returns normalized importance-sampling weights.
    """

    def __init__(self, capacity: int, obs_dim: int, rng: np.random.Generator,
                 alpha: float = 0.6, eps: float = 1e-3):
        super().__init__(capacity, obs_dim, rng)
        self.alpha = alpha
        self.eps = eps
        self.priorities = np.zeros(capacity)
        self._max_priority = 1.0

    def _on_push(self, slot: int) -> None:
        self.priorities[slot] = self._max_priority

    def probabilities(self) -> np.ndarray:
        p = self.priorities[: self._size] ** self.alpha
        return p / p.sum()

    def sample(self, batch_size: int, beta: float = 0.4) -> Batch:
        if self._size < batch_size:
            raise UndersizedBufferError(f"buffer holds {self._size} < {batch_size}")
        probs = self.probabilities()
        idx = self.rng.choice(self._size, size=batch_size, replace=True, p=probs)
        w = (self._size * probs[idx]) ** (-beta)
        return self._gather(idx, w / w.max())

    def update_priorities(self, indices: np.ndarray, td_errors: np.ndarray) -> None:
        new = np.abs(np.asarray(td_errors, dtype=np.float64)) + self.eps
        self.priorities[np.asarray(indices)] = new
        self._max_priority = max(self._max_priority, float(new.max()))

    def slot_with_action(self, action: int) -> int | None:
        """Most recently written slot holding ``action``, if any."""
        for slot in reversed(self.slots_in_order()):
            if self.a[slot] == action:
                return slot
        return None

    def set_state(self, slot: int, s: np.ndarray) -> None:
        self.s[slot] = s

    def relabel(self, slot: int, s: np.ndarray, r: float, s_next: np.ndarray) -> None:
        if not np.isfinite(r):
            raise ValueError("reward must be finite")
        self.s[slot] = s
        self.r[slot] = r
        self.s_next[slot] = s_next
