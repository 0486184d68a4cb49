"""Environments for the hybrid-action agent.

All share a tiny interface: ``state_dim``, ``action_space``, ``reset()`` and
``step(k, x) -> (next_state, reward, done)``.  Discrete actions are 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..capacity import PowerModel, closed_form_sinr, closed_form_rate, energy_efficiency, equal_split_power, precoder_constants
from ..scenario import Scenario
from .agent import HybridActionSpace


class BanditEnv:
    """Single state, one step per episode, reward ``b_k - (x - c_k)^2``.

    With the default b and c the best action is branch 0 with x = 0.3.
    """

    def __init__(self, b=(1.0, 0.5), c=(0.3, 0.7)):
        self.b = np.asarray(b, dtype=float)
        self.c = np.asarray(c, dtype=float)
        self.state_dim = 1
        self.action_space = HybridActionSpace.uniform(len(self.b))

    @property
    def optimum(self) -> tuple[int, float]:
        k = int(np.argmax(self.b))
        return k, float(self.c[k])

    def reward(self, k: int, x: float) -> float:
        return float(self.b[k] - (x - self.c[k]) ** 2)

    def reset(self) -> np.ndarray:
        return np.ones(1)

    def step(self, k: int, x: float):
        return np.ones(1), self.reward(k, x), True


class ChainMDP:
    """Three states, deterministic transitions, rewards ``b[s,k] - (x - c[s,k])^2``.

    Every ``c`` sits on the grid ``{0, .25, .5, .75, 1}``, so value iteration
    over that grid gives the same optimum as the continuous problem.
    """

    grid = np.linspace(0.0, 1.0, 5)

    def __init__(self, discount: float = 0.5, rng: np.random.Generator | None = None):
        self._rng = rng or np.random.default_rng(0)
        self.b = np.array([[0.2, 0.5], [0.6, 0.1], [0.0, 0.3]])
        self.c = np.array([[0.25, 0.75], [0.5, 0.0], [1.0, 0.25]])
        self.next_state = np.array([[1, 2], [2, 0], [0, 1]])
        self.discount = discount
        self.state_dim = 3
        self.action_space = HybridActionSpace.uniform(2)
        self._s = 0

    def encode(self, s: int) -> np.ndarray:
        return np.eye(3)[s]

    def reward(self, s: int, k: int, x: float) -> float:
        return float(self.b[s, k] - (x - self.c[s, k]) ** 2)

    def reset(self, state: int | None = None) -> np.ndarray:
        self._s = int(self._rng.integers(3)) if state is None else state
        return self.encode(self._s)

    def step(self, k: int, x: float):
        r = self.reward(self._s, k, x)
        self._s = int(self.next_state[self._s, k])
        return self.encode(self._s), r, False

    def value_iteration(self, tol: float = 1e-12) -> np.ndarray:
        """Q*(s, k, grid point) for the discretized action space."""
        r = self.b[:, :, None] - (self.grid[None, None, :] - self.c[:, :, None]) ** 2
        q = np.zeros_like(r)
        while True:
            v = q.max(axis=(1, 2))
            new = r + self.discount * v[self.next_state][:, :, None]
            if np.max(np.abs(new - q)) < tol:
                return new
            q = new


@dataclass
class HetNetState:
    active: np.ndarray  # (M,) bool, index 0 = macro (always on)
    fractions: np.ndarray  # (M,) budget fraction of p_max
    rates: np.ndarray  # (K,)
    step: int = 0


class HetNetEnv:
    """Small-cell on/off plus power control on top of the closed-form rates.

    Action k = 0 keeps the on/off pattern and sets the macro budget to x p_max;
    k = j >= 1 toggles small cell j and sets its budget to x p_max.  The reward
    is energy efficiency minus ``qos_weight`` times the total rate shortfall
    below ``min_rate``.  Episodes end after ``horizon`` steps.
    """

    def __init__(self, scenario: Scenario, scheme="mrt", power_model: PowerModel | None = None,
                 qos_weight: float = 1.0, min_rate: float = 0.5, horizon: int = 50):
        self.scenario = scenario
        self.scheme = scheme
        self.power_model = power_model or PowerModel()
        self.qos_weight = qos_weight
        self.min_rate = min_rate
        self.horizon = horizon
        c = scenario.config
        self.m, self.k = scenario.beta.shape
        self.p_max = c.max_tx_power
        self._gamma = scenario.gamma
        self._const = precoder_constants(scheme, c.antennas_per_cell, c.pilot_length, scenario.beta, self._gamma)
        lb = np.log10(scenario.beta).mean(axis=1)
        self._beta_feat = (lb - lb.mean()) / (lb.std() + 1e-9)
        self.action_space = HybridActionSpace.uniform(self.m)
        self.state_dim = 2 * self.m + self.m + self.k + 1
        self.state: HetNetState | None = None

    def evaluate(self, active, fractions):
        """(reward, ee, rates) for an on/off pattern and budget fractions."""
        c = self.scenario.config
        active = np.asarray(active, dtype=bool)
        rho = equal_split_power(self.m, self.k, np.asarray(fractions) * self.p_max, active)
        sinr = closed_form_sinr(rho, self._gamma, self._const, active, self.scenario.pilots, c.noise_variance)
        rates = closed_form_rate(sinr, c.pilot_length, c.coherence_block)
        ee = energy_efficiency(rates, rho, active, self.power_model)
        penalty = self.qos_weight * np.maximum(0.0, self.min_rate - rates).sum()
        return ee - penalty, ee, rates

    def observe(self, st: HetNetState | None = None) -> np.ndarray:
        st = st or self.state
        return np.concatenate([
            st.active.astype(float),
            st.fractions,
            self._beta_feat,
            st.rates,
            [st.step / self.horizon],
        ])

    def reset(self) -> np.ndarray:
        active = np.ones(self.m, dtype=bool)
        fractions = np.ones(self.m)
        _, _, rates = self.evaluate(active, fractions)
        self.state = HetNetState(active, fractions, rates, 0)
        return self.observe()

    def transition(self, st: HetNetState, k: int, x: float) -> tuple[HetNetState, float]:
        if not 0 <= k < self.m:
            raise ValueError(f"discrete action {k} out of range (the macro cell cannot be toggled)")
        if not 0.0 <= x <= 1.0:
            raise ValueError("power fraction must lie in [0, 1]")
        active = st.active.copy()
        fractions = st.fractions.copy()
        if k > 0:
            active[k] = not active[k]
        fractions[k] = x
        reward, _, rates = self.evaluate(active, fractions)
        return HetNetState(active, fractions, rates, st.step + 1), float(reward)

    def step(self, k: int, x: float):
        self.state, reward = self.transition(self.state, k, x)
        return self.observe(), reward, self.state.step >= self.horizon

    def greedy_action(self, grid=np.linspace(0.0, 1.0, 11)) -> tuple[int, float]:
        """Best immediate reward over every discrete action and a grid of x."""
        best, arg = -np.inf, (0, 1.0)
        for k in range(self.m):
            for x in grid:
                _, r = self.transition(self.state, k, float(x))
                if r > best:
                    best, arg = r, (k, float(x))
        return arg


def rollout(env, policy, rng: np.random.Generator | None = None) -> float:
    """Total reward of one episode under ``policy(env, state, rng) -> (k, x)``."""
    s = env.reset()
    total = 0.0
    done = False
    steps = 0
    while not done:
        k, x = policy(env, s, rng)
        s, r, done = env.step(k, x)
        total += r
        steps += 1
        if steps > 10_000:
            break
    return total
