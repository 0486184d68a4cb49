"""Downlink ergodic-rate lower bound: closed form and Monte Carlo, plus energy efficiency.

The Monte Carlo path simulates pilots, MMSE estimation and precoding, then
evaluates the use-and-then-forget bound

    R_k = (1 - tau_p/tau_c) log2(1 + |DS_k|^2 / (E|BU_k|^2 + sum_{k' != k} E|UI_k'k|^2 + sigma^2))

from sample moments.  The closed form replaces those moments with the
precoder constants ``G`` and ``z``.  The two paths share no code beyond the
scenario description, which is what makes them useful as checks on each other.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .precoding import ConfigurationError, PrecoderScheme, check_fzf_dimensions, precode
from .scenario import PilotAssignment, Scenario, draw_channels, estimate_channels


@dataclass(frozen=True)
class PrecoderConstants:
    gain: float  # G
    z: np.ndarray  # (M, K)


@dataclass(frozen=True)
class PowerModel:
    """Linear amplifier with efficiency ``eta`` plus fixed circuit power per active cell."""

    efficiency: float = 0.5
    circuit_power: float = 1.0

    def __post_init__(self) -> None:
        if not 0 < self.efficiency <= 1:
            raise ValueError("amplifier efficiency must lie in (0, 1]")
        if self.circuit_power <= 0:
            raise ValueError("circuit power must be positive")


@dataclass
class CapacityReport:
    sinr: np.ndarray
    rate: np.ndarray
    ds: np.ndarray | None = None
    bu: np.ndarray | None = None
    ui: np.ndarray | None = None  # ui[k', k]: second moment of the leak of k' into UE k
    ee: float | None = None
    diagnostics: dict = field(default_factory=dict)


def precoder_constants(scheme, n_antennas: int, pilot_length: int, beta, gamma) -> PrecoderConstants:
    scheme = PrecoderScheme(scheme)
    beta = np.asarray(beta, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    if scheme is PrecoderScheme.MRT:
        return PrecoderConstants(float(n_antennas), beta.copy())
    check_fzf_dimensions(n_antennas, pilot_length)
    return PrecoderConstants(float(n_antennas - pilot_length), np.maximum(beta - gamma, 0.0))


def _active_mask(active, num_cells: int) -> np.ndarray:
    active = np.asarray(active)
    if active.dtype == bool:
        if active.shape != (num_cells,):
            raise ValueError("active mask has the wrong length")
        return active
    mask = np.zeros(num_cells, dtype=bool)
    mask[active.astype(int)] = True
    return mask


def closed_form_sinr(
    rho,
    gamma,
    constants: PrecoderConstants,
    active,
    pilots: PilotAssignment,
    noise_variance: float,
    indexing: str = "victim",
) -> np.ndarray:
    """Closed-form SINR of every UE.

    ``indexing="victim"`` evaluates the pilot-contamination and residual terms
    with the estimate quality and ``z`` of the UE being served, which is what
    the bound evaluates to under MMSE estimation.  ``indexing="interferer"``
    uses the interfering UE's quantities instead; it coincides with the victim
    form only when the instance is symmetric.
    """
    rho = np.asarray(rho, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    m_cells, k_ues = rho.shape
    a = _active_mask(active, m_cells).astype(float)[:, None]
    if not a.any():
        return np.zeros(k_ues)
    g, z = constants.gain, constants.z
    coherent = (a * np.sqrt(rho * gamma)).sum(axis=0)
    signal = g * coherent**2
    contam_mask = pilots.same_pilot() & ~np.eye(k_ues, dtype=bool)  # [k, k']
    if indexing == "victim":
        # cross[k', k] = sum_m sqrt(rho_mk' gamma_mk)
        cross = (a * np.sqrt(rho)).T @ np.sqrt(gamma)
        contamination = g * np.sum(contam_mask.T * cross**2, axis=0)
        residual = np.einsum("mj,mk->k", a * rho, z)
    elif indexing == "interferer":
        contamination = g * (contam_mask.astype(float) @ coherent**2)
        residual = np.full(k_ues, np.sum(a * rho * z))
    else:
        raise ValueError(f"unknown indexing {indexing!r}")
    return signal / (contamination + residual + noise_variance)


def closed_form_rate(sinr, pilot_length: int, coherence_block: int) -> np.ndarray:
    sinr = np.asarray(sinr, dtype=float)
    if np.any(sinr < 0):
        raise ValueError("SINR must be nonnegative")
    return (1.0 - pilot_length / coherence_block) * np.log2(1.0 + sinr)


def equal_split_power(num_cells: int, num_ues: int, budgets, active) -> np.ndarray:
    """Each active cell spreads its budget evenly over all K UEs."""
    budgets = np.broadcast_to(np.asarray(budgets, dtype=float), (num_cells,))
    mask = _active_mask(active, num_cells)
    return np.where(mask[:, None], budgets[:, None] / num_ues, 0.0) * np.ones((1, num_ues))


def closed_form_report(scenario: Scenario, scheme, rho, active=None, indexing: str = "victim") -> CapacityReport:
    c = scenario.config
    active = scenario.topology.active_set if active is None else active
    gamma = scenario.gamma
    const = precoder_constants(scheme, c.antennas_per_cell, c.pilot_length, scenario.beta, gamma)
    sinr = closed_form_sinr(rho, gamma, const, active, scenario.pilots, c.noise_variance, indexing)
    return CapacityReport(sinr=sinr, rate=closed_form_rate(sinr, c.pilot_length, c.coherence_block))


def monte_carlo_rate(
    scenario: Scenario,
    scheme,
    rho,
    trials: int,
    rng: np.random.Generator,
    active=None,
    chunk: int = 10_000,
) -> CapacityReport:
    """Sample-moment evaluation of the bound over ``trials`` channel realizations."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    c = scenario.config
    scheme = PrecoderScheme(scheme)
    if scheme is PrecoderScheme.FZF:
        check_fzf_dimensions(c.antennas_per_cell, c.pilot_length)
    rho = np.asarray(rho, dtype=float)
    m_cells, k_ues = rho.shape
    a = _active_mask(scenario.topology.active_set if active is None else active, m_cells)
    amp = np.sqrt(rho) * a[:, None]

    s1 = np.zeros((k_ues, k_ues), dtype=complex)  # sum of a[k, j]
    s2 = np.zeros((k_ues, k_ues))  # sum of |a[k, j]|^2
    done = 0
    redraws = 0
    while done < trials:
        n = min(chunk, trials - done)
        h = draw_channels(scenario.beta, c.antennas_per_cell, rng, (n,))
        est = estimate_channels(h, scenario.beta, scenario.pilots, c.pilot_power, c.noise_variance, rng)
        pv = precode(scheme, est, scenario.pilots)
        keep = slice(None)
        if pv.singular is not None and pv.singular.any():
            bad = pv.singular.any(axis=-1)
            redraws += int(bad.sum())
            keep = ~bad
            n = int(keep.sum())
        # g[t, k, j] = sum_m sqrt(rho_mj) h_mk^H w_mj  (signal for j seen by UE k)
        g = np.einsum("mj,tmkn,tmjn->tkj", amp, h[keep].conj(), pv.w[keep], optimize=True)
        s1 += g.sum(axis=0)
        s2 += (np.abs(g) ** 2).sum(axis=0)
        done += n

    mean = s1 / trials
    second = s2 / trials
    ds = np.diag(mean).copy()
    bu = np.maximum(np.diag(second) - np.abs(ds) ** 2, 0.0)
    ui = second.T.copy()  # ui[k', k]
    np.fill_diagonal(ui, 0.0)
    denom = bu + ui.sum(axis=0) + c.noise_variance
    sinr = np.abs(ds) ** 2 / denom
    return CapacityReport(
        sinr=sinr,
        rate=closed_form_rate(sinr, c.pilot_length, c.coherence_block),
        ds=ds,
        bu=bu,
        ui=ui,
        diagnostics={"trials": trials, "redraws": redraws},
    )


def energy_efficiency(rates, rho, active, power_model: PowerModel) -> float:
    """Sum rate over consumed power (bits/Joule/Hz per unit bandwidth)."""
    rates = np.asarray(rates, dtype=float)
    rho = np.asarray(rho, dtype=float)
    mask = _active_mask(active, rho.shape[0])
    if not mask.any():
        return 0.0
    consumed = np.sum(rho[mask].sum(axis=1) / power_model.efficiency + power_model.circuit_power)
    return float(rates.sum() / consumed)


def consumed_power(rho, active, power_model: PowerModel) -> float:
    rho = np.asarray(rho, dtype=float)
    mask = _active_mask(active, rho.shape[0])
    return float(np.sum(rho[mask].sum(axis=1) / power_model.efficiency + power_model.circuit_power))


def dbm_to_watt(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


@dataclass
class SweepPoint:
    p_max_dbm: float
    sum_rate: float
    total_power_w: float
    ee: float
    active_cells: int


def _evaluate_ee(scenario: Scenario, scheme, p_max: float, mask: np.ndarray, power_model: PowerModel):
    m, k = scenario.beta.shape
    rho = equal_split_power(m, k, p_max, mask)
    rep = closed_form_report(scenario, scheme, rho, mask)
    return energy_efficiency(rep.rate, rho, mask, power_model), rep.rate, rho


def sweep_power(
    scenario: Scenario,
    scheme,
    p_max_dbm_grid,
    power_model: PowerModel,
    cell_policy: str = "all-on",
) -> list[SweepPoint]:
    """Closed-form EE at each per-cell power cap.

    ``cell_policy="greedy"`` switches small cells off one at a time while doing
    so raises EE (the macro cell stays on).
    """
    grid = list(p_max_dbm_grid)
    if not grid:
        raise ValueError("power grid is empty")
    m = scenario.beta.shape[0]
    points = []
    for dbm in grid:
        p_max = float(dbm_to_watt(dbm))
        mask = np.ones(m, dtype=bool)
        best, rates, rho = _evaluate_ee(scenario, scheme, p_max, mask, power_model)
        if cell_policy == "greedy":
            improved = True
            while improved:
                improved = False
                for j in np.flatnonzero(mask[1:]) + 1:
                    trial = mask.copy()
                    trial[j] = False
                    ee, r, p = _evaluate_ee(scenario, scheme, p_max, trial, power_model)
                    if ee > best:
                        best, rates, rho, cand = ee, r, p, trial
                        improved = True
                if improved:
                    mask = cand
        elif cell_policy != "all-on":
            raise ValueError(f"unknown cell policy {cell_policy!r}")
        points.append(
            SweepPoint(
                p_max_dbm=float(dbm),
                sum_rate=float(rates.sum()),
                total_power_w=consumed_power(rho, mask, power_model),
                ee=best,
                active_cells=int(mask.sum()),
            )
        )
    return points


__all__ = [
    "CapacityReport",
    "ConfigurationError",
    "PowerModel",
    "PrecoderConstants",
    "SweepPoint",
    "closed_form_rate",
    "closed_form_report",
    "closed_form_sinr",
    "consumed_power",
    "dbm_to_watt",
    "energy_efficiency",
    "equal_split_power",
    "monte_carlo_rate",
    "precoder_constants",
    "sweep_power",
]
