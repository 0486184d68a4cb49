"""Parameterized-action Q-learning: discrete choice k plus continuous parameter x_k.

``Q(s, k, x_k; w)`` is an MLP fed ``[s, onehot(k), x]`` where ``x`` carries
``x_k`` in slot k and zeros elsewhere.  A deterministic policy network maps a
state to one parameter per discrete action, squashed into its box.  The
Bellman target bootstraps through the policy:

    y = r + discount * max_k Q(s', k, x_k(s'; theta-); w-)

The critic minimizes the squared TD error; the policy ascends
``sum_k Q(s, k, x_k(s; theta); w)`` so every branch tracks its own argmax.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .mlp import MLP, Adam


class TrainingDiverged(FloatingPointError):
    pass


@dataclass(frozen=True)
class HybridActionSpace:
    low: np.ndarray
    high: np.ndarray

    def __post_init__(self) -> None:
        low = np.asarray(self.low, dtype=float)
        high = np.asarray(self.high, dtype=float)
        object.__setattr__(self, "low", low)
        object.__setattr__(self, "high", high)
        if low.ndim != 1 or low.shape != high.shape or low.size < 1:
            raise ValueError("bounds must be two equal-length 1-D arrays")
        if np.any(low >= high):
            raise ValueError("each interval needs low < high")

    @classmethod
    def uniform(cls, n: int, low: float = 0.0, high: float = 1.0) -> "HybridActionSpace":
        return cls(np.full(n, low), np.full(n, high))

    @property
    def n(self) -> int:
        return self.low.size

    def contains(self, k: int, x: float) -> bool:
        return 0 <= k < self.n and self.low[k] <= x <= self.high[k]


class HybridHyperParams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    hidden: tuple[int, ...] = (32, 32)
    lr_q: float = Field(1e-3, gt=0)
    lr_policy: float = Field(1e-3, gt=0)
    discount: float = Field(0.9, ge=0, lt=1)
    tau_soft: float = Field(0.01, gt=0, le=1)
    batch_size: int = Field(32, ge=1)
    replay_capacity: int = Field(10_000, ge=1)
    warmup: int = Field(64, ge=1)
    eps_start: float = Field(1.0, ge=0, le=1)
    eps_end: float = Field(0.05, ge=0, le=1)
    eps_decay_steps: int = Field(2000, ge=1)
    noise_start: float = Field(0.3, ge=0)
    noise_end: float = Field(0.02, ge=0)
    noise_decay_steps: int = Field(3000, ge=1)
    max_episode_steps: int = Field(50, ge=1)


class ReplayMemory:
    def __init__(self, capacity: int, state_dim: int, n_actions: int):
        self.capacity = capacity
        self.s = np.zeros((capacity, state_dim))
        self.k = np.zeros(capacity, dtype=np.int64)
        self.x = np.zeros((capacity, n_actions))
        self.r = np.zeros(capacity)
        self.s2 = np.zeros((capacity, state_dim))
        self.done = np.zeros(capacity, dtype=bool)
        self.size = 0
        self._next = 0

    def __len__(self) -> int:
        return self.size

    def push(self, s, k, x, r, s2, done) -> None:
        i = self._next
        self.s[i], self.k[i], self.x[i], self.r[i], self.s2[i], self.done[i] = s, k, x, r, s2, done
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> "Batch":
        idx = rng.integers(0, self.size, size=batch_size)
        return Batch(self.s[idx], self.k[idx], self.x[idx], self.r[idx], self.s2[idx], self.done[idx])


@dataclass
class Batch:
    s: np.ndarray
    k: np.ndarray
    x: np.ndarray  # full parameter vector; only x[k] matters
    r: np.ndarray
    s2: np.ndarray
    done: np.ndarray

    @classmethod
    def single(cls, s, k, x, r, s2, done) -> "Batch":
        return cls(
            np.atleast_2d(np.asarray(s, dtype=float)),
            np.array([k]),
            np.atleast_2d(np.asarray(x, dtype=float)),
            np.array([float(r)]),
            np.atleast_2d(np.asarray(s2, dtype=float)),
            np.array([bool(done)]),
        )


@dataclass
class HybridAgent:
    space: HybridActionSpace
    state_dim: int
    hp: HybridHyperParams
    q_net: MLP
    policy_net: MLP
    q_target: MLP = None
    policy_target: MLP = None
    steps: int = 0
    memory: ReplayMemory = field(default=None, repr=False)

    def __post_init__(self) -> None:
        self.q_target = self.q_target or self.q_net.copy()
        self.policy_target = self.policy_target or self.policy_net.copy()
        self.memory = self.memory or ReplayMemory(self.hp.replay_capacity, self.state_dim, self.space.n)
        self.q_opt = Adam(self.q_net.params, self.hp.lr_q)
        self.policy_opt = Adam(self.policy_net.params, self.hp.lr_policy)

    @classmethod
    def create(cls, state_dim: int, space: HybridActionSpace, hp: HybridHyperParams | None = None,
               rng: np.random.Generator | None = None, zero: bool = False) -> "HybridAgent":
        hp = hp or HybridHyperParams()
        k = space.n
        q = MLP([state_dim + 2 * k, *hp.hidden, 1], rng, zero=zero)
        pi = MLP([state_dim, *hp.hidden, k], rng, zero=zero)
        return cls(space, state_dim, hp, q, pi)

    # -- evaluation ------------------------------------------------------

    def _q_input(self, s, k, x):
        s = np.atleast_2d(s)
        n = s.shape[0]
        kk = self.space.n
        k = np.broadcast_to(np.asarray(k), (n,))
        onehot = np.zeros((n, kk))
        onehot[np.arange(n), k] = 1.0
        xin = onehot * np.atleast_2d(x)
        return np.hstack([s, onehot, xin])

    def q_batch(self, s, k, x, net: MLP | None = None) -> np.ndarray:
        """Q for a batch; ``x`` is the full (n, K) parameter matrix."""
        return (net or self.q_net)(self._q_input(s, k, x))[:, 0]

    def q_value(self, s, k: int, x_k: float, net: MLP | None = None) -> float:
        if not self.space.contains(k, x_k):
            raise ValueError(f"action ({k}, {x_k}) is outside the action space")
        x = np.zeros(self.space.n)
        x[k] = x_k
        return float(self.q_batch(s, k, x, net)[0])

    def q_grad_x(self, s, k: int, x_k: float) -> float:
        """dQ/dx_k by backprop."""
        x = np.zeros(self.space.n)
        x[k] = x_k
        inp = self._q_input(s, k, x)
        _, acts = self.q_net.forward(inp)
        _, g_in = self.q_net.backward(acts, np.ones((1, 1)))
        return float(g_in[0, self.state_dim + self.space.n + k])

    def _squash(self, u):
        lo, hi = self.space.low, self.space.high
        # clip guards the last ulp when tanh saturates
        return np.clip(lo + (hi - lo) * (np.tanh(u) + 1.0) / 2.0, lo, hi)

    def continuous_policy(self, s, net: MLP | None = None) -> np.ndarray:
        """x_k(s) for every k; rows match states when ``s`` is a batch."""
        out = self._squash((net or self.policy_net)(s))
        return out[0] if np.ndim(s) == 1 else out

    def greedy(self, s) -> tuple[int, np.ndarray]:
        x = self.continuous_policy(s)
        qs = [self.q_batch(s, k, x)[0] for k in range(self.space.n)]
        return int(np.argmax(qs)), x

    def act(self, s, rng: np.random.Generator, explore: bool = True) -> tuple[int, np.ndarray]:
        k, x = self.greedy(s)
        if not explore:
            return k, x
        if rng.random() < self.epsilon():
            k = int(rng.integers(self.space.n))
        span = self.space.high - self.space.low
        x = np.clip(x + rng.normal(0.0, self.noise_scale(), self.space.n) * span, self.space.low, self.space.high)
        return k, x

    def epsilon(self) -> float:
        frac = min(1.0, self.steps / self.hp.eps_decay_steps)
        return self.hp.eps_start + frac * (self.hp.eps_end - self.hp.eps_start)

    def noise_scale(self) -> float:
        frac = min(1.0, self.steps / self.hp.noise_decay_steps)
        return self.hp.noise_start + frac * (self.hp.noise_end - self.hp.noise_start)

    # -- learning --------------------------------------------------------

    def bellman_target(self, batch: Batch, discount: float | None = None) -> np.ndarray:
        discount = self.hp.discount if discount is None else discount
        if not 0 <= discount < 1:
            raise ValueError("discount must lie in [0, 1)")
        if discount == 0:
            return batch.r.astype(float).copy()
        x2 = self.continuous_policy(batch.s2, self.policy_target)
        q2 = np.stack([self.q_batch(batch.s2, k, x2, self.q_target) for k in range(self.space.n)], axis=1)
        return batch.r + discount * np.where(batch.done, 0.0, q2.max(axis=1))

    def td_errors(self, batch: Batch) -> np.ndarray:
        return self.q_batch(batch.s, batch.k, batch.x) - self.bellman_target(batch)

    def critic_step(self, batch: Batch) -> float:
        y = self.bellman_target(batch)
        inp = self._q_input(batch.s, batch.k, batch.x)
        q, acts = self.q_net.forward(inp)
        err = q[:, 0] - y
        loss = float(np.mean(err**2))
        if not np.isfinite(loss):
            raise TrainingDiverged(f"non-finite critic loss at step {self.steps}")
        grads, _ = self.q_net.backward(acts, (2.0 * err / len(err))[:, None])
        self.q_opt.step(grads)
        return loss

    def policy_objective(self, s) -> float:
        s = np.atleast_2d(s)
        x = self.continuous_policy(s)
        return float(np.mean(sum(self.q_batch(s, k, x) for k in range(self.space.n))))

    def actor_step(self, s) -> float:
        s = np.atleast_2d(s)
        n, kk = s.shape[0], self.space.n
        u, pacts = self.policy_net.forward(s)
        x = self._squash(u)
        dq_dx = np.zeros((n, kk))
        total = 0.0
        for k in range(kk):
            inp = self._q_input(s, k, x)
            q, qacts = self.q_net.forward(inp)
            total += q[:, 0].sum()
            _, g_in = self.q_net.backward(qacts, np.ones((n, 1)))
            dq_dx[:, k] = g_in[:, self.state_dim + kk + k]
        dx_du = (self.space.high - self.space.low) / 2.0 * (1.0 - np.tanh(u) ** 2)
        grad_u = -(dq_dx * dx_du) / n  # minimize -objective
        grads, _ = self.policy_net.backward(pacts, grad_u)
        self.policy_opt.step(grads)
        return total / n

    def train_step(self, batch: Batch) -> float:
        loss = self.critic_step(batch)
        self.actor_step(batch.s)
        self.q_target.soft_update(self.q_net, self.hp.tau_soft)
        self.policy_target.soft_update(self.policy_net, self.hp.tau_soft)
        return loss


def train(env, episodes: int, hp: HybridHyperParams, rng: np.random.Generator,
          agent: HybridAgent | None = None) -> tuple[HybridAgent, list[float]]:
    """Run ``episodes`` episodes with one gradient step per environment step."""
    agent = agent or HybridAgent.create(env.state_dim, env.action_space, hp, rng)
    returns = []
    for _ in range(episodes):
        s = env.reset()
        total = 0.0
        for _ in range(hp.max_episode_steps):
            k, x = agent.act(s, rng)
            s2, r, done = env.step(k, float(x[k]))
            agent.memory.push(s, k, x, r, s2, done)
            agent.steps += 1
            total += r
            if len(agent.memory) >= max(hp.warmup, 1):
                agent.train_step(agent.memory.sample(hp.batch_size, rng))
            s = s2
            if done:
                break
        if not np.isfinite(total):
            raise TrainingDiverged("episode return is not finite")
        returns.append(float(total))
    return agent, returns
