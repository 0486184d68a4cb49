"""Two-tier topology, large-scale fading, pilots, channel draws and MMSE estimates.

Cell index 0 is always the macro station; indices 1..J are small cells.
All powers are linear (watts).  Channel arrays carry an optional leading batch
axis so Monte Carlo code can draw many realizations at once:
``h.shape == (*batch, M, K, N)`` with ``M = J + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class ScenarioConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    num_small_cells: int = Field(3, ge=0)
    num_ues: int = Field(4, ge=1)
    antennas_per_cell: int = Field(8, ge=1)
    pilot_length: int = Field(2, ge=1)
    coherence_block: int = Field(200, ge=2)
    noise_variance: float = Field(1e-6, gt=0)
    pilot_power: float = Field(0.1, gt=0)
    max_tx_power: float = Field(1.0, gt=0)
    area_side: float = Field(200.0, gt=0)
    pathloss_exponent: float = Field(3.76, gt=0)
    reference_distance: float = Field(10.0, gt=0)
    master_seed: int = Field(0, ge=0, lt=2**64)

    @model_validator(mode="after")
    def _pilot_fits_block(self) -> "ScenarioConfig":
        if self.pilot_length >= self.coherence_block:
            raise ValueError(
                f"pilot_length ({self.pilot_length}) must be < coherence_block ({self.coherence_block})"
            )
        return self

    @property
    def num_cells(self) -> int:
        return self.num_small_cells + 1


@dataclass
class NetworkTopology:
    cell_positions: np.ndarray  # (M, 2), row 0 = macro
    ue_positions: np.ndarray  # (K, 2)
    active_set: np.ndarray  # sorted cell indices

    def __post_init__(self) -> None:
        self.cell_positions = np.asarray(self.cell_positions, dtype=float)
        self.ue_positions = np.asarray(self.ue_positions, dtype=float)
        self.active_set = np.unique(np.asarray(self.active_set, dtype=int))
        m = len(self.cell_positions)
        if self.active_set.size and (self.active_set.min() < 0 or self.active_set.max() >= m):
            raise ValueError("active_set refers to a cell that does not exist")
        if not (np.isfinite(self.cell_positions).all() and np.isfinite(self.ue_positions).all()):
            raise ValueError("positions must be finite")

    @property
    def num_cells(self) -> int:
        return len(self.cell_positions)

    @property
    def num_ues(self) -> int:
        return len(self.ue_positions)

    def active_mask(self) -> np.ndarray:
        mask = np.zeros(self.num_cells, dtype=bool)
        mask[self.active_set] = True
        return mask


@dataclass(frozen=True)
class PilotAssignment:
    pilot_index: np.ndarray  # (K,), 0-based pilot ids
    length: int

    @property
    def groups(self) -> list[np.ndarray]:
        """``groups[k]`` = UEs sharing UE k's pilot, including k."""
        return [np.flatnonzero(self.pilot_index == self.pilot_index[k]) for k in range(len(self.pilot_index))]

    def same_pilot(self) -> np.ndarray:
        """Boolean (K, K) matrix, True where two UEs share a pilot."""
        return self.pilot_index[:, None] == self.pilot_index[None, :]


@dataclass
class ChannelState:
    beta: np.ndarray  # (M, K)
    gamma: np.ndarray  # (M, K) per-antenna variance of h_hat
    h: np.ndarray  # (*batch, M, K, N)
    h_hat: np.ndarray  # (*batch, M, K, N)
    pilot_obs: np.ndarray  # (*batch, M, tau_p, N) despread pilot observations
    pilot_var: np.ndarray = field(repr=False, default=None)  # (M, tau_p) per-antenna variance of pilot_obs


def build_topology(cfg: ScenarioConfig, rng: np.random.Generator) -> NetworkTopology:
    side = cfg.area_side
    macro = np.array([[side / 2.0, side / 2.0]])
    small = rng.uniform(0.0, side, size=(cfg.num_small_cells, 2))
    ues = rng.uniform(0.0, side, size=(cfg.num_ues, 2))
    return NetworkTopology(np.vstack([macro, small]), ues, np.arange(cfg.num_cells))


def large_scale_fading(topology: NetworkTopology, cfg: ScenarioConfig) -> np.ndarray:
    d = np.linalg.norm(topology.cell_positions[:, None, :] - topology.ue_positions[None, :, :], axis=-1)
    d0 = cfg.reference_distance
    return (np.maximum(d, d0) / d0) ** (-cfg.pathloss_exponent)


def assign_pilots(num_ues: int, pilot_length: int, policy: str = "round-robin") -> PilotAssignment:
    if pilot_length < 1:
        raise ValueError("pilot_length must be >= 1")
    if policy != "round-robin":
        raise ValueError(f"unknown pilot policy {policy!r}")
    return PilotAssignment(np.arange(num_ues) % pilot_length, pilot_length)


def complex_normal(rng: np.random.Generator, shape, variance=1.0) -> np.ndarray:
    """Circularly-symmetric CN(0, variance) samples; ``variance`` broadcasts against ``shape``."""
    scale = np.sqrt(np.asarray(variance, dtype=float) / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def draw_channels(beta: np.ndarray, n_antennas: int, rng: np.random.Generator, batch: tuple = ()) -> np.ndarray:
    """Rayleigh realizations with per-antenna variance ``beta[m, k]``."""
    beta = np.asarray(beta, dtype=float)
    shape = (*batch, *beta.shape, n_antennas)
    return complex_normal(rng, shape, beta[..., None])


def pilot_observation_variance(beta, pilots: PilotAssignment, pilot_power, noise_variance) -> np.ndarray:
    """Per-antenna variance of each despread pilot observation, shape (M, tau_p)."""
    beta = np.asarray(beta, dtype=float)
    tp = pilots.length
    onehot = np.eye(tp)[pilots.pilot_index]  # (K, tau_p)
    return tp * pilot_power * beta @ onehot + noise_variance


def estimate_quality(beta, pilots: PilotAssignment, pilot_power, noise_variance) -> np.ndarray:
    """gamma_mk = tau_p p_p beta_mk^2 / (tau_p p_p sum_{k' in P_k} beta_mk' + sigma^2)."""
    beta = np.asarray(beta, dtype=float)
    v = pilot_observation_variance(beta, pilots, pilot_power, noise_variance)
    return pilots.length * pilot_power * beta**2 / v[:, pilots.pilot_index]


def estimate_channels(
    h: np.ndarray,
    beta: np.ndarray,
    pilots: PilotAssignment,
    pilot_power: float,
    noise_variance: float,
    rng: np.random.Generator,
) -> ChannelState:
    """Linear MMSE estimates from one round of orthogonal uplink pilots.

    Cell m observes ``y_mt = sqrt(tau_p p_p) sum_{k: i_k = t} h_mk + n_mt`` for
    every pilot t.  UEs that share a pilot get parallel estimates.
    """
    beta = np.asarray(beta, dtype=float)
    tp = pilots.length
    m, k, n = h.shape[-3:]
    batch = h.shape[:-3]
    onehot = np.eye(tp)[pilots.pilot_index]  # (K, tau_p)
    amp = np.sqrt(tp * pilot_power)
    y = amp * np.einsum("...mkn,kt->...mtn", h, onehot) + complex_normal(rng, (*batch, m, tp, n), noise_variance)
    v = pilot_observation_variance(beta, pilots, pilot_power, noise_variance)
    coef = amp * beta / v[:, pilots.pilot_index]  # (M, K)
    h_hat = coef[..., None] * y[..., :, pilots.pilot_index, :]
    gamma = estimate_quality(beta, pilots, pilot_power, noise_variance)
    return ChannelState(beta=beta, gamma=gamma, h=h, h_hat=h_hat, pilot_obs=y, pilot_var=v)


@dataclass
class Scenario:
    """Everything the capacity code needs about one drop of the network."""

    config: ScenarioConfig
    topology: NetworkTopology
    beta: np.ndarray
    pilots: PilotAssignment

    @property
    def gamma(self) -> np.ndarray:
        c = self.config
        return estimate_quality(self.beta, self.pilots, c.pilot_power, c.noise_variance)


def make_scenario(cfg: ScenarioConfig, rng: np.random.Generator) -> Scenario:
    topo = build_topology(cfg, rng)
    beta = large_scale_fading(topo, cfg)
    return Scenario(cfg, topo, beta, assign_pilots(cfg.num_ues, cfg.pilot_length))
