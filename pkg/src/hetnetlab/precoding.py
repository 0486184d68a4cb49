"""MRT and full-pilot zero-forcing precoders, transmit signals, received samples.

Both precoders are scaled to unit second moment, ``E{||w_mk||^2} = 1``.  The
scaling constants are known in closed form (``N gamma_mk`` for MRT,
``1 / ((N - tau_p) gamma_mk)`` for the un-normalized F-ZF vector built from the
estimates); an empirical mode averages over the leading batch axis instead and
exists for cross-checking.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .scenario import PilotAssignment, complex_normal


class PrecoderScheme(str, Enum):
    MRT = "mrt"
    FZF = "fzf"


class ConfigurationError(ValueError):
    """Raised when a scheme cannot be used with the given dimensions."""


@dataclass
class PrecodingVectors:
    w: np.ndarray  # (*batch, M, K, N)
    inactive: np.ndarray  # (M, K) True where gamma == 0 and w was zeroed
    singular: np.ndarray | None = None  # (*batch, M) F-ZF Gram matrices rejected as rank-deficient


def check_fzf_dimensions(n_antennas: int, pilot_length: int) -> None:
    if n_antennas <= pilot_length:
        raise ConfigurationError(
            f"F-ZF needs more antennas than pilots (N={n_antennas}, tau_p={pilot_length})"
        )


def mrt_weights(h_hat: np.ndarray, gamma: np.ndarray, normalization: str = "analytic") -> PrecodingVectors:
    gamma = np.asarray(gamma, dtype=float)
    n = h_hat.shape[-1]
    inactive = gamma <= 0
    if normalization == "analytic":
        power = n * gamma
    elif normalization == "empirical":
        if h_hat.ndim < 4:
            raise ValueError("empirical normalization needs a leading batch axis")
        power = np.mean(np.sum(np.abs(h_hat) ** 2, axis=-1), axis=tuple(range(h_hat.ndim - 3)))
        inactive = inactive | (power <= 0)
    else:
        raise ValueError(f"unknown normalization {normalization!r}")
    scale = np.where(inactive, 0.0, 1.0 / np.sqrt(np.where(inactive, 1.0, power)))
    return PrecodingVectors(h_hat * scale[..., None], inactive)


def fzf_weights(
    pilot_obs: np.ndarray,
    pilot_var: np.ndarray,
    pilots: PilotAssignment,
    gamma: np.ndarray,
    normalization: str = "analytic",
    cond_limit: float = 1e10,
) -> PrecodingVectors:
    """Full-pilot zero-forcing: ``w_mk ~ H_m (H_m^H H_m)^-1 e_{i_k}``.

    ``H_m`` holds one column per pilot (the despread observation, scaled to unit
    per-antenna variance).  The estimate of every UE on pilot t is a positive
    multiple of column t, so the result is the textbook F-ZF direction.
    Realizations whose Gram matrix has condition number above ``cond_limit``
    are returned zeroed and flagged in ``singular``; the caller decides whether
    to redraw.
    """
    n = pilot_obs.shape[-1]
    tp = pilots.length
    check_fzf_dimensions(n, tp)
    gamma = np.asarray(gamma, dtype=float)
    y = pilot_obs / np.sqrt(pilot_var)[..., None]  # (*b, M, tp, N), rows are columns of H_m
    gram = np.einsum("...tn,...un->...tu", y.conj(), y)
    cond = np.linalg.cond(gram)
    singular = ~np.isfinite(cond) | (cond > cond_limit)
    safe = np.where(singular[..., None, None], np.eye(tp), gram)
    ginv = np.linalg.inv(safe)
    # rows of H (H^H H)^-1, i.e. v_t = sum_u ginv[u, t] y_u
    v = np.einsum("...ut,...un->...tn", ginv, y)
    v = np.where(singular[..., None, None], 0.0, v)
    v_k = v[..., :, pilots.pilot_index, :]  # (*b, M, K, N)
    inactive = gamma <= 0
    if normalization == "analytic":
        scale = np.full(gamma.shape, np.sqrt(n - tp))
    elif normalization == "empirical":
        if v_k.ndim < 4:
            raise ValueError("empirical normalization needs a leading batch axis")
        power = np.mean(np.sum(np.abs(v_k) ** 2, axis=-1), axis=tuple(range(v_k.ndim - 3)))
        scale = 1.0 / np.sqrt(power)
    else:
        raise ValueError(f"unknown normalization {normalization!r}")
    scale = np.where(inactive, 0.0, scale)
    return PrecodingVectors(v_k * scale[..., None], inactive, singular)


def precode(scheme, state, pilots: PilotAssignment, normalization: str = "analytic") -> PrecodingVectors:
    scheme = PrecoderScheme(scheme)
    if scheme is PrecoderScheme.MRT:
        return mrt_weights(state.h_hat, state.gamma, normalization)
    return fzf_weights(state.pilot_obs, state.pilot_var, pilots, state.gamma, normalization)


def transmit_signal(rho: np.ndarray, w: np.ndarray, symbols: np.ndarray) -> np.ndarray:
    """x_m = sum_k sqrt(rho_mk) w_mk s_k, returned as (*batch, M, N)."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise ValueError("power coefficients must be nonnegative")
    return np.einsum("mk,...mkn,...k->...mn", np.sqrt(rho), w, symbols)


def received_sample(
    x: np.ndarray,
    h: np.ndarray,
    active: np.ndarray,
    noise_variance: float,
    rng: np.random.Generator | None = None,
    noise: np.ndarray | None = None,
) -> np.ndarray:
    """r_k = sum_{m in A} h_mk^H x_m + n_k for every UE, shape (*batch, K).

    Pass ``noise`` to reuse a fixed draw; otherwise it is drawn from ``rng``.
    """
    active = np.asarray(active, dtype=bool)
    signal = np.einsum("m,...mkn,...mn->...k", active.astype(float), h.conj(), x)
    if noise is None:
        if noise_variance > 0:
            if rng is None:
                raise ValueError("rng required to draw noise")
            noise = complex_normal(rng, signal.shape, noise_variance)
        else:
            noise = 0.0
    return signal + noise
