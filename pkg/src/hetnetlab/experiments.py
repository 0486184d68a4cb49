"""Command runners: each turns a resolved experiment file into CSV rows plus a summary.

Randomness is drawn only from ``derive_rng(seed, <label>, <index>)`` streams,
so every command is a deterministic function of the experiment file and the seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .capacity import closed_form_report, equal_split_power, monte_carlo_rate, sweep_power
from .config import ExperimentSpec, placement_sites
from .coopnet import outage_probability, relay_outage_oracle
from .hybridrl import BanditEnv, ChainMDP, HetNetEnv, dump_agent, train
from .placement import hybrid_place, random_placement_cost
from .rng import derive_rng
from .scenario import make_scenario


@dataclass
class RunResult:
    header: list[str]
    rows: list[list]
    summary: dict = field(default_factory=dict)
    extra_files: dict = field(default_factory=dict)  # suffix -> writer(path)
    ok: bool = True


DEFAULT_TRIALS = {
    "validate-capacity": 100_000,
    "sweep-power": 1,
    "coop-outage": 10_000,
    "train-rl": None,  # episodes come from rl.episodes
    "place-replicas": None,  # baseline draws come from placement.baseline_draws
}


def _scenario(spec: ExperimentSpec, seed: int):
    cfg = spec.scenario.to_config(seed)
    return make_scenario(cfg, derive_rng(seed, "scenario"))


def run_validate_capacity(spec: ExperimentSpec, seed: int, trials: int) -> RunResult:
    sc = _scenario(spec, seed)
    m, k = sc.beta.shape
    rho = equal_split_power(m, k, sc.config.max_tx_power, sc.topology.active_set)
    rows = []
    worst = 0.0
    for i, scheme in enumerate(spec.schemes):
        cf = closed_form_report(sc, scheme, rho)
        mc = monte_carlo_rate(sc, scheme, rho, trials, derive_rng(seed, "mc", i))
        for ue in range(k):
            rel = abs(mc.rate[ue] - cf.rate[ue]) / cf.rate[ue] if cf.rate[ue] > 0 else abs(mc.rate[ue])
            worst = max(worst, rel)
            rows.append([
                scheme, ue, cf.sinr[ue], cf.rate[ue], mc.sinr[ue], mc.rate[ue],
                abs(mc.ds[ue]), mc.bu[ue], mc.ui[:, ue].sum(), rel, int(rel <= spec.tolerance),
            ])
    header = ["scheme", "ue", "sinr_closed", "rate_closed", "sinr_mc", "rate_mc",
              "ds_abs", "bu_var", "ui_sum", "rel_error", "within_tol"]
    ok = worst <= spec.tolerance
    return RunResult(header, rows, {"max_rel_error": worst, "tolerance": spec.tolerance, "all_within_tol": ok}, ok=ok)


def run_sweep_power(spec: ExperimentSpec, seed: int, trials: int) -> RunResult:
    sc = _scenario(spec, seed)
    pm = spec.power_model.to_model()
    rows = []
    for scheme in spec.schemes:
        for pt in sweep_power(sc, scheme, spec.sweep.p_max_dbm, pm, spec.sweep.cell_policy):
            rows.append([scheme, pt.p_max_dbm, pt.sum_rate, pt.total_power_w, pt.ee, pt.active_cells])
    header = ["scheme", "p_max_dbm", "sum_rate", "total_power_w", "ee", "active_cells"]
    summary = {}
    for scheme in spec.schemes:
        pts = [r for r in rows if r[0] == scheme]
        best = max(range(len(pts)), key=lambda i: pts[i][4])
        summary[scheme] = {"argmax_p_max_dbm": pts[best][1], "max_ee": pts[best][4]}
    return RunResult(header, rows, summary)


def run_coop_outage(spec: ExperimentSpec, seed: int, trials: int) -> RunResult:
    base = spec.coop.config
    grid = spec.coop.tx_snr_db or [10.0 * np.log10(base.tx_snr) if base.tx_snr > 0 else -np.inf]
    rows = []
    for i, snr_db in enumerate(grid):
        cfg = base.model_copy(update={"tx_snr": float(10.0 ** (snr_db / 10.0))})
        res = outage_probability(cfg, trials, derive_rng(seed, "coop", i))
        out, rel = res["outage"], res["relay_outage"]
        oracle = ""
        if rel is not None and cfg.mean_gain_sr == cfg.mean_gain_rd and cfg.noise_variance > 0:
            mean_snr = cfg.tx_snr * cfg.mean_gain_sr / cfg.noise_variance
            oracle = relay_outage_oracle(len(cfg.source_rank_set), cfg.num_relays, mean_snr, cfg.threshold)
        rows.append([
            snr_db, cfg.mode, trials, out.p, out.ci_low, out.ci_high,
            "" if rel is None else rel.p, "" if rel is None else rel.ci_low,
            "" if rel is None else rel.ci_high, oracle,
        ])
    header = ["tx_snr_db", "mode", "trials", "outage", "ci_low", "ci_high",
              "relay_outage", "relay_ci_low", "relay_ci_high", "relay_oracle"]
    return RunResult(header, rows, {"points": len(rows)})


def _make_env(spec: ExperimentSpec, seed: int):
    rl = spec.rl
    if rl.env == "bandit":
        return BanditEnv()
    if rl.env == "chain":
        return ChainMDP(rl.hyperparams.discount, derive_rng(seed, "chain-env"))
    sc = _scenario(spec, seed)
    return HetNetEnv(sc, spec.schemes[0], spec.power_model.to_model(), rl.qos_weight, rl.min_rate, rl.horizon)


def run_train_rl(spec: ExperimentSpec, seed: int, trials: int | None) -> RunResult:
    rl = spec.rl
    episodes = rl.episodes if trials is None else trials
    env = _make_env(spec, seed)
    hp = rl.hyperparams
    if rl.env == "hetnet":
        hp = hp.model_copy(update={"max_episode_steps": rl.horizon})
    agent, returns = train(env, episodes, hp, derive_rng(seed, "train-rl"))
    rows = [[i, r] for i, r in enumerate(returns)]

    # greedy evaluation of the final policy
    policy_rows = []
    s = env.reset()
    for step in range(hp.max_episode_steps if rl.env != "bandit" else 1):
        k, x = agent.greedy(s)
        s, r, done = env.step(k, float(x[k]))
        policy_rows.append([step, k, float(x[k]), r])
        if done:
            break

    def write_policy(path):
        from .cli import write_csv

        write_csv(path, ["step", "action", "parameter", "reward"], policy_rows)

    summary = {
        "episodes": episodes,
        "final_greedy_action": policy_rows[0][1] if policy_rows else None,
        "final_greedy_parameter": policy_rows[0][2] if policy_rows else None,
        "greedy_return": float(sum(r[3] for r in policy_rows)),
    }
    return RunResult(
        ["episode", "return"], rows, summary,
        extra_files={".policy.csv": write_policy, ".weights.bin": lambda p: dump_agent(agent, p)},
    )


def run_place_replicas(spec: ExperimentSpec, seed: int, trials: int | None) -> RunResult:
    sec = spec.placement
    sites = placement_sites(sec, derive_rng(seed, "placement-sites"))
    pl = hybrid_place(sites, sec.k, sec.p_per_cluster, derive_rng(seed, "placement"), sec.ms_per_unit)
    draws = sec.baseline_draws if trials is None else trials
    baseline = random_placement_cost(sites, len(pl.centers), derive_rng(seed, "placement-baseline"), draws,
                                     sec.ms_per_unit)
    rows = [[i, int(pl.labels[i]), int(pl.nearest[i]), float(pl.response[i])] for i in range(len(sites))]
    summary = {
        "replicas": [int(c) for c in pl.centers],
        "cost": pl.cost,
        "worst_case": pl.worst_case,
        "random_baseline_cost": baseline,
    }
    return RunResult(["site", "cluster", "center", "distance"], rows, summary)


RUNNERS = {
    "validate-capacity": run_validate_capacity,
    "sweep-power": run_sweep_power,
    "coop-outage": run_coop_outage,
    "train-rl": run_train_rl,
    "place-replicas": run_place_replicas,
}
