"""Experiment configuration: strict JSON loading and packaged presets.

The configuration file is a JSON object; unknown keys are rejected and a
master seed is mandatory so every run is reproducible.  Packaged presets
(``rearrange``, ``join``, ``fluorescence``) carry the measured apparatus
parameters and the canonical sequences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

from .collision import AtomCount, MolassesEpisode, TraceLayout
from .noise import NoiseModel
from .traps import TrapConfig


class ConfigError(Exception):
    """Invalid or unreadable experiment configuration."""


SCHEMA_VERSION = 1

_TRAP_KEYS = {"wavelength_um", "waist_um", "depth_mk", "axis",
              "axial_phase_offset_um", "transverse_center_um"}
_NOISE_KEYS = {
    "transport_rms_um": "transport_rms",
    "insert_rms_um": "insert_rms",
    "distance_meas_rms_um": "distance_meas_rms",
    "position_meas_rms_um": "position_meas_rms",
    "radial_placement_rms_um": "radial_placement_rms",
    "loss_prob_atom1": "loss_prob_atom1",
    "loss_prob_atom2": "loss_prob_atom2",
    "storage_lifetime_hdt_s": "storage_lifetime_hdt",
    "storage_lifetime_vdt_s": "storage_lifetime_vdt",
    "molasses_lifetime_s": "molasses_lifetime",
    "pair_collision_rate_hz": "pair_collision_rate",
    "pair_loss_branching": "pair_loss_branching",
}
_FLUOR_KEYS = {"mean_atoms", "count_kind", "wells", "shots", "placement",
               "molasses_duration_s", "molasses_on_s", "bin_width_s",
               "background_tail_s", "fluorescence_per_atom",
               "background_level"}
_TOP_KEYS = {"schema_version", "traps", "noise", "sequence_path", "trials",
             "master_seed", "post_selection_min_separation_um",
             "fluorescence", "outputs"}


@dataclass(frozen=True)
class FluorescenceSettings:
    """Parameters of the fluorescence study (one run per mean atom count)."""

    mean_atoms: tuple = (3.0, 19.0)
    count_kind: str = "poisson"          # 'poisson' | 'fixed'
    wells: int = 25
    shots: int = 100
    placement: str = "uniform"           # 'uniform' | 'distinct'
    molasses_duration: float = 0.30
    molasses_on: float = 0.26
    bin_width: float = 0.01
    background_tail: float = 0.05
    fluorescence_per_atom: float = 1.0
    background_level: float = 0.2

    def episode(self, noise: NoiseModel) -> MolassesEpisode:
        return MolassesEpisode(
            duration=self.molasses_duration,
            pair_collision_rate=noise.pair_collision_rate,
            single_survival_lifetime=noise.molasses_lifetime,
            pair_loss_branching=noise.pair_loss_branching,
            fluorescence_per_atom=self.fluorescence_per_atom,
            background_level=self.background_level)

    def layout(self) -> TraceLayout:
        return TraceLayout(molasses_on=self.molasses_on,
                           bin_width=self.bin_width,
                           background_tail=self.background_tail)

    def atom_count(self, mean: float) -> AtomCount:
        return AtomCount(self.count_kind, mean)


@dataclass(frozen=True)
class ExperimentConfig:
    hdt: TrapConfig
    vdt: TrapConfig
    noise: NoiseModel
    master_seed: int
    trials: int = 1
    sequence_path: Optional[Path] = None
    post_selection_min_separation: float = 10.0
    fluorescence: FluorescenceSettings = field(
        default_factory=FluorescenceSettings)
    outputs: Optional[Path] = None


def _require(cond: bool, message: str):
    if not cond:
        raise ConfigError(message)


def _check_keys(obj: dict, allowed, where: str):
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key '{where}.{unknown[0]}'")


def _get(obj: dict, key: str, types, where: str, required: bool = True,
         default=None):
    if key not in obj:
        _require(not required, f"missing required field '{where}.{key}'")
        return default
    value = obj[key]
    _require(isinstance(value, types) and not isinstance(value, bool),
             f"field '{where}.{key}' has the wrong type")
    return value


def _parse_trap(obj, name: str) -> TrapConfig:
    where = f"traps.{name}"
    _require(isinstance(obj, dict), f"'{where}' must be an object")
    _check_keys(obj, _TRAP_KEYS, where)
    center = _get(obj, "transverse_center_um", list, where, required=False,
                  default=[0.0, 0.0])
    _require(len(center) == 2 and all(isinstance(v, (int, float))
                                      and not isinstance(v, bool)
                                      for v in center),
             f"field '{where}.transverse_center_um' must be two numbers")
    try:
        return TrapConfig(
            name=name,
            wavelength=float(_get(obj, "wavelength_um", (int, float), where)),
            waist=float(_get(obj, "waist_um", (int, float), where)),
            depth=float(_get(obj, "depth_mk", (int, float), where)),
            axis=_get(obj, "axis", str, where, required=False,
                      default="y" if name == "hdt" else "z"),
            axial_phase_offset=float(_get(obj, "axial_phase_offset_um",
                                          (int, float), where,
                                          required=False, default=0.0)),
            transverse_center=(float(center[0]), float(center[1])),
        )
    except ValueError as err:
        raise ConfigError(f"invalid '{where}': {err}") from None


def _parse_noise(obj) -> NoiseModel:
    _require(isinstance(obj, dict), "'noise' must be an object")
    _check_keys(obj, _NOISE_KEYS, "noise")
    kwargs = {}
    for key, attr in _NOISE_KEYS.items():
        if key in obj:
            kwargs[attr] = float(_get(obj, key, (int, float), "noise"))
    try:
        return NoiseModel(**kwargs)
    except ValueError as err:
        raise ConfigError(f"invalid 'noise': {err}") from None


def _parse_fluorescence(obj) -> FluorescenceSettings:
    _require(isinstance(obj, dict), "'fluorescence' must be an object")
    _check_keys(obj, _FLUOR_KEYS, "fluorescence")
    where = "fluorescence"
    means = _get(obj, "mean_atoms", list, where, required=False,
                 default=[3.0, 19.0])
    _require(len(means) >= 1 and all(isinstance(v, (int, float))
                                     and not isinstance(v, bool)
                                     for v in means),
             "field 'fluorescence.mean_atoms' must be a list of numbers")
    try:
        settings = FluorescenceSettings(
            mean_atoms=tuple(float(v) for v in means),
            count_kind=_get(obj, "count_kind", str, where, required=False,
                            default="poisson"),
            wells=int(_get(obj, "wells", int, where, required=False,
                           default=25)),
            shots=int(_get(obj, "shots", int, where, required=False,
                           default=100)),
            placement=_get(obj, "placement", str, where, required=False,
                           default="uniform"),
            molasses_duration=float(_get(obj, "molasses_duration_s",
                                         (int, float), where, required=False,
                                         default=0.30)),
            molasses_on=float(_get(obj, "molasses_on_s", (int, float), where,
                                   required=False, default=0.26)),
            bin_width=float(_get(obj, "bin_width_s", (int, float), where,
                                 required=False, default=0.01)),
            background_tail=float(_get(obj, "background_tail_s", (int, float),
                                       where, required=False, default=0.05)),
            fluorescence_per_atom=float(_get(obj, "fluorescence_per_atom",
                                             (int, float), where,
                                             required=False, default=1.0)),
            background_level=float(_get(obj, "background_level", (int, float),
                                        where, required=False, default=0.2)),
        )
    except ValueError as err:
        raise ConfigError(f"invalid 'fluorescence': {err}") from None
    _require(settings.count_kind in ("poisson", "fixed"),
             "field 'fluorescence.count_kind' must be 'poisson' or 'fixed'")
    _require(settings.placement in ("uniform", "distinct"),
             "field 'fluorescence.placement' must be 'uniform' or 'distinct'")
    _require(settings.wells >= 1, "field 'fluorescence.wells' must be >= 1")
    _require(settings.shots >= 1, "field 'fluorescence.shots' must be >= 1")
    try:
        settings.layout().bin_counts(settings.molasses_duration)
    except ValueError as err:
        raise ConfigError(f"invalid 'fluorescence': {err}") from None
    return settings


def packaged_sequence(name: str) -> Path:
    """Path of a sequence file shipped with the package."""
    root = resources.files("tweezersim").joinpath("data/sequences")
    path = root.joinpath(name)
    if not path.is_file():
        raise ConfigError(f"no packaged sequence named {name!r}")
    return Path(str(path))


def packaged_config(name: str) -> Path:
    """Path of a preset configuration shipped with the package."""
    root = resources.files("tweezersim").joinpath("data/configs")
    path = root.joinpath(f"{name}.json")
    if not path.is_file():
        raise ConfigError(f"no packaged config named {name!r}")
    return Path(str(path))


def _resolve_sequence(raw: str, base_dir: Path) -> Path:
    candidate = Path(raw)
    if not candidate.is_absolute():
        local = base_dir / candidate
        if local.is_file():
            return local
        try:
            return packaged_sequence(raw)
        except ConfigError:
            candidate = local
    if not candidate.is_file():
        raise ConfigError(f"sequence file not found: {raw}")
    return candidate


def load_config(path, strict: bool = True) -> ExperimentConfig:
    """Load and validate an experiment configuration file."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as err:
        raise ConfigError(f"cannot read config: {err}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"config is not valid JSON: {err}") from None
    _require(isinstance(raw, dict), "config root must be a JSON object")
    if strict:
        _check_keys(raw, _TOP_KEYS, "config")
    version = _get(raw, "schema_version", int, "config", required=False,
                   default=SCHEMA_VERSION)
    _require(version == SCHEMA_VERSION,
             f"unsupported schema_version {version}")

    traps_obj = _get(raw, "traps", dict, "config", required=False, default={})
    _check_keys(traps_obj, {"hdt", "vdt"}, "traps")
    hdt = (_parse_trap(traps_obj["hdt"], "hdt") if "hdt" in traps_obj
           else TrapConfig("hdt", 1.064, 19.0, 0.8, "y"))
    vdt = (_parse_trap(traps_obj["vdt"], "vdt") if "vdt" in traps_obj
           else TrapConfig("vdt", 1.030, 10.0, 1.5, "z"))

    noise = _parse_noise(_get(raw, "noise", dict, "config", required=False,
                              default={}))

    master_seed = _get(raw, "master_seed", int, "config",
                       required=strict, default=0)
    trials = _get(raw, "trials", int, "config", required=False, default=1)
    _require(trials >= 1, "field 'config.trials' must be >= 1")

    min_sep = float(_get(raw, "post_selection_min_separation_um",
                         (int, float), "config", required=False,
                         default=10.0))
    _require(min_sep >= 0,
             "field 'config.post_selection_min_separation_um' must be >= 0")

    sequence_path = None
    if "sequence_path" in raw:
        sequence_path = _resolve_sequence(
            _get(raw, "sequence_path", str, "config"), path.parent)

    fluor = _parse_fluorescence(raw["fluorescence"]) \
        if "fluorescence" in raw else FluorescenceSettings()

    outputs = None
    if "outputs" in raw:
        outputs = Path(_get(raw, "outputs", str, "config"))

    return ExperimentConfig(hdt=hdt, vdt=vdt, noise=noise,
                            master_seed=int(master_seed), trials=int(trials),
                            sequence_path=sequence_path,
                            post_selection_min_separation=min_sep,
                            fluorescence=fluor, outputs=outputs)
