"""Experiment files: JSON in, validated models out.

Powers in experiment files are given in dBm and converted to watts here;
nothing past this module sees dBm.  Unknown keys are rejected, and every
constraint violation in a file is reported in one error.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .capacity import PowerModel, dbm_to_watt
from .coopnet import CoopConfig
from .hybridrl import HybridHyperParams
from .scenario import ScenarioConfig

COMMANDS = ("validate-capacity", "sweep-power", "coop-outage", "train-rl", "place-replicas")


class SpecError(ValueError):
    """A spec file that cannot be parsed or violates constraints."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ScenarioSection(_Strict):
    num_small_cells: int = Field(3, ge=0)
    num_ues: int = Field(4, ge=1)
    antennas_per_cell: int = Field(8, ge=1)
    pilot_length: int = Field(2, ge=1)
    coherence_block: int = Field(200, ge=2)
    noise_power_dbm: float = -30.0
    pilot_power_dbm: float = 20.0
    max_tx_power_dbm: float = 30.0
    area_side: float = Field(200.0, gt=0)
    pathloss_exponent: float = Field(3.76, gt=0)
    reference_distance: float = Field(10.0, gt=0)

    @model_validator(mode="after")
    def _pilots(self):
        if self.pilot_length >= self.coherence_block:
            raise ValueError(
                f"pilot_length < coherence_block violated ({self.pilot_length} >= {self.coherence_block})"
            )
        return self

    def to_config(self, master_seed: int, max_tx_power_dbm: float | None = None) -> ScenarioConfig:
        p_dbm = self.max_tx_power_dbm if max_tx_power_dbm is None else max_tx_power_dbm
        return ScenarioConfig(
            num_small_cells=self.num_small_cells,
            num_ues=self.num_ues,
            antennas_per_cell=self.antennas_per_cell,
            pilot_length=self.pilot_length,
            coherence_block=self.coherence_block,
            noise_variance=float(dbm_to_watt(self.noise_power_dbm)),
            pilot_power=float(dbm_to_watt(self.pilot_power_dbm)),
            max_tx_power=float(dbm_to_watt(p_dbm)),
            area_side=self.area_side,
            pathloss_exponent=self.pathloss_exponent,
            reference_distance=self.reference_distance,
            master_seed=master_seed,
        )


class PowerModelSection(_Strict):
    efficiency: float = Field(0.5, gt=0, le=1)
    circuit_power_w: float = Field(1.0, gt=0)

    def to_model(self) -> PowerModel:
        return PowerModel(self.efficiency, self.circuit_power_w)


class SweepSection(_Strict):
    p_max_dbm: list[float] = Field(default_factory=lambda: [float(v) for v in range(0, 31, 2)], min_length=1)
    cell_policy: Literal["all-on", "greedy"] = "all-on"


class CoopSection(_Strict):
    config: CoopConfig = Field(default_factory=CoopConfig)
    tx_snr_db: list[float] | None = Field(None, min_length=1)


class RLSection(_Strict):
    env: Literal["bandit", "chain", "hetnet"] = "bandit"
    episodes: int = Field(5000, ge=0)
    hyperparams: HybridHyperParams = Field(default_factory=HybridHyperParams)
    qos_weight: float = Field(1.0, ge=0)
    min_rate: float = Field(0.5, ge=0)
    horizon: int = Field(50, ge=1)


class PlacementSection(_Strict):
    sites: list[tuple[float, float]] | None = None
    distances: list[list[float]] | None = None
    weights: list[float] | None = None
    num_sites: int = Field(30, ge=1)
    area_side: float = Field(100.0, gt=0)
    k: int = Field(3, ge=1)
    p_per_cluster: int = Field(1, ge=1)
    ms_per_unit: float = Field(1.0, gt=0)
    baseline_draws: int = Field(100, ge=1)


class ExperimentSpec(_Strict):
    command: Literal["validate-capacity", "sweep-power", "coop-outage", "train-rl", "place-replicas"]
    seed: int | None = Field(None, ge=0, lt=2**64)
    trials: int | None = Field(None, ge=1)
    output: str | None = None
    scheme: Literal["mrt", "fzf"] | list[Literal["mrt", "fzf"]] = Field(default_factory=lambda: ["mrt", "fzf"])
    tolerance: float = Field(0.03, gt=0)
    scenario: ScenarioSection = Field(default_factory=ScenarioSection)
    power_model: PowerModelSection = Field(default_factory=PowerModelSection)
    sweep: SweepSection = Field(default_factory=SweepSection)
    coop: CoopSection = Field(default_factory=CoopSection)
    rl: RLSection = Field(default_factory=RLSection)
    placement: PlacementSection = Field(default_factory=PlacementSection)

    @property
    def schemes(self) -> list[str]:
        return [self.scheme] if isinstance(self.scheme, str) else list(self.scheme)


def defaulted_fields(model: BaseModel, prefix: str = "", everything: bool = False) -> list[str]:
    """Dotted paths of every leaf field that was filled from its default."""
    out = []
    for name in type(model).model_fields:
        path = f"{prefix}{name}"
        value = getattr(model, name)
        missing = everything or name not in model.model_fields_set
        if isinstance(value, BaseModel):
            out.extend(defaulted_fields(value, path + ".", missing))
        elif missing:
            out.append(path)
    return out


def _format_errors(source: str, err: ValidationError) -> str:
    lines = [f"{source}: {err.error_count()} problem(s)"]
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        lines.append(f"  {loc}: {e['msg']}")
    return "\n".join(lines)


def parse_spec(data: dict, source: str = "<spec>") -> ExperimentSpec:
    try:
        return ExperimentSpec.model_validate(data)
    except ValidationError as err:
        raise SpecError(_format_errors(source, err)) from None


def load_spec(path) -> ExperimentSpec:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise SpecError(f"{path}: cannot read ({exc.strerror})") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    if not isinstance(data, dict):
        raise SpecError(f"{path}: top level must be a JSON object")
    return parse_spec(data, str(path))


def spec_to_jsonable(spec: ExperimentSpec) -> dict:
    return json.loads(spec.model_dump_json())


def placement_sites(section: PlacementSection, rng: np.random.Generator):
    """Site coordinates/distances and weights, drawing any that are missing."""
    from .placement import SiteSet

    coords = None if section.sites is None else np.asarray(section.sites, dtype=float)
    dists = None if section.distances is None else np.asarray(section.distances, dtype=float)
    drawn = coords is None and dists is None
    if drawn:
        coords = rng.uniform(0.0, section.area_side, size=(section.num_sites, 2))
    n = len(coords) if coords is not None else len(dists)
    if section.weights is not None:
        weights = np.asarray(section.weights, dtype=float)
    else:
        weights = rng.uniform(0.5, 1.5, size=n) if drawn else np.ones(n)
    return SiteSet(coords, weights, dists)
