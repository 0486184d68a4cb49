"""Hybrid discrete/continuous-action Q-learning and its environments."""

from .agent import (
    Batch,
    HybridActionSpace,
    HybridAgent,
    HybridHyperParams,
    ReplayMemory,
    TrainingDiverged,
    train,
)
from .envs import BanditEnv, ChainMDP, HetNetEnv, rollout
from .mlp import MLP, Adam
from .serialize import dump_agent, dump_networks, load_networks

__all__ = [
    "Adam",
    "BanditEnv",
    "Batch",
    "ChainMDP",
    "HetNetEnv",
    "HybridActionSpace",
    "HybridAgent",
    "HybridHyperParams",
    "MLP",
    "ReplayMemory",
    "TrainingDiverged",
    "dump_agent",
    "dump_networks",
    "load_networks",
    "rollout",
    "train",
]
