"""Experiment configuration files.

A config is a flat list of `key = value` lines with `#` comment lines;
every key has a default, so the empty file is the canonical full-scale
experiment. Unknown keys, bad values, and duplicates are errors naming
the offending line. Serialization is lossless and canonical (fixed key
order, repr floats), and the sha256 of that canonical text identifies
the experiment in every artifact the pipeline writes.

The robot.*, sensors.*, and rnn.* keys document build-time constants of
the simulator; a config may restate them but not change them, so a file
declaring a different architecture is rejected instead of silently
running something else.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields

from .errors import ConfigError
from .evolve import FREEZE_CHOICES, EvolutionConfig
from .maze import MazeLayout, load_layout
from .robot import RobotBody
from .sensors import CAM_FOV, CAM_RANGE, NUM_INPUTS, PROX_RANGE
from .rnn import LEAK, N_HIDDEN, N_OUTPUTS
from . import layouts

LAYOUT_BUILDERS = {
    "triple-t": layouts.canonical_triple_t,
    "double-t": layouts.desk_double_t,
}

_BODY = RobotBody()


@dataclass(frozen=True)
class ExperimentConfig:
    layout: str = "triple-t"
    out: str = "runs/experiment"
    master_seed: int = 0
    robot_body_radius: float = _BODY.body_radius
    robot_wheel_radius: float = _BODY.wheel_radius
    robot_axle_length: float = _BODY.axle_length
    robot_min_wheel_speed: float = _BODY.min_wheel_speed
    robot_max_wheel_speed: float = _BODY.max_wheel_speed
    sensors_proximity_range: float = PROX_RANGE
    sensors_camera_range: float = CAM_RANGE
    sensors_camera_fov: float = CAM_FOV
    sensors_inputs: int = NUM_INPUTS
    rnn_hidden: int = N_HIDDEN
    rnn_outputs: int = N_OUTPUTS
    rnn_leak: float = LEAK
    evolution_population_size: int = 50
    evolution_generations: int = 200
    evolution_trials_per_genotype: int = 5
    evolution_elite_fraction: float = 0.10
    evolution_mutation_rate: float = 0.06
    evolution_mutation_std_base: float = 0.3
    evolution_mutation_std_halflife: float = 50.0
    evolution_init_std: float = 0.3
    evolution_max_steps: int = 5000
    evolution_reevaluate_elites: bool = False
    evolution_freeze_mask: str = "none"
    evolution_stop_at_fitness: float | None = None
    demo_trials: int = 20
    analysis_build_trials: int = 15
    analysis_battery_trials: int = 20
    analysis_edge_threshold: float = 1.0 / 3.0
    analysis_significance: float = 0.01 / 6

    def evolution_config(self) -> EvolutionConfig:
        return EvolutionConfig(
            population_size=self.evolution_population_size,
            generations=self.evolution_generations,
            trials_per_genotype=self.evolution_trials_per_genotype,
            elite_fraction=self.evolution_elite_fraction,
            mutation_rate=self.evolution_mutation_rate,
            mutation_std_base=self.evolution_mutation_std_base,
            mutation_std_halflife=self.evolution_mutation_std_halflife,
            init_std=self.evolution_init_std,
            master_seed=self.master_seed,
            max_steps=self.evolution_max_steps,
            reevaluate_elites=self.evolution_reevaluate_elites,
            freeze_mask=self.evolution_freeze_mask,
            stop_at_fitness=self.evolution_stop_at_fitness,
        )

    def build_layout(self) -> MazeLayout:
        builder = LAYOUT_BUILDERS.get(self.layout)
        if builder is not None:
            return builder()
        return load_layout(self.layout)

    def text(self) -> str:
        lines = []
        for key, field_name, kind in _KEYS:
            lines.append(f"{key} = {_format(getattr(self, field_name), kind)}")
        return "\n".join(lines) + "\n"

    def content_hash(self) -> str:
        """sha256 identifying the experiment.

        The output directory is excluded: runs differing only in where
        their artifacts land are the same experiment and must produce
        byte-identical files.
        """
        lines = [line for line in self.text().splitlines()
                 if not line.startswith("out = ")]
        return hashlib.sha256("\n".join(lines).encode()).hexdigest()


def _field_to_key(name: str) -> str:
    for prefix in ("robot", "sensors", "rnn", "evolution", "demo", "analysis"):
        if name.startswith(prefix + "_"):
            return f"{prefix}.{name[len(prefix) + 1:]}"
    return name


_KIND = {"int": "int", "float": "float", "bool": "bool", "str": "str",
         "float | None": "optional-float"}
# keys in declaration order: (dotted key, field name, value kind)
_KEYS = [(_field_to_key(f.name), f.name, _KIND[f.type])
         for f in fields(ExperimentConfig)]
_BY_KEY = {key: (field_name, kind) for key, field_name, kind in _KEYS}

# build-time constants a config may restate but not change
_FIXED = {
    "robot.body_radius", "robot.wheel_radius", "robot.axle_length",
    "robot.min_wheel_speed", "robot.max_wheel_speed",
    "sensors.proximity_range", "sensors.camera_range", "sensors.camera_fov",
    "sensors.inputs", "rnn.hidden", "rnn.outputs", "rnn.leak",
}


def _format(value, kind: str) -> str:
    if kind == "bool":
        return "true" if value else "false"
    if kind == "optional-float":
        return "none" if value is None else repr(float(value))
    if kind == "float":
        return repr(float(value))
    return str(value)


def _parse_value(raw: str, kind: str, where: str):
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            if raw not in ("true", "false"):
                raise ValueError
            return raw == "true"
        if kind == "optional-float":
            return None if raw == "none" else float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{where}: bad {kind} value {raw!r}") from None


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    values: dict = {}
    seen: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        where = f"{source}:{lineno}"
        if "=" not in stripped:
            raise ConfigError(f"{where}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in _BY_KEY:
            raise ConfigError(f"{where}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(
                f"{where}: duplicate key {key!r} (first set on line {seen[key]})")
        seen[key] = lineno
        field_name, kind = _BY_KEY[key]
        value = _parse_value(raw, kind, where)
        if key in _FIXED:
            built = getattr(ExperimentConfig, field_name)
            if value != built:
                raise ConfigError(
                    f"{where}: {key} is fixed at build time "
                    f"({_format(built, kind)}), cannot be {raw}")
        values[field_name] = value

    cfg = ExperimentConfig(**values)
    if cfg.layout not in LAYOUT_BUILDERS and "/" not in cfg.layout \
            and "." not in cfg.layout:
        raise ConfigError(
            f"{source}: layout {cfg.layout!r} is neither "
            f"{sorted(LAYOUT_BUILDERS)} nor a layout file path")
    if cfg.evolution_freeze_mask not in FREEZE_CHOICES:
        raise ConfigError(
            f"{source}: evolution.freeze_mask {cfg.evolution_freeze_mask!r} "
            f"not in {FREEZE_CHOICES}")
    try:
        cfg.evolution_config().validate()
    except ConfigError as e:
        raise ConfigError(f"{source}: {e}") from None
    for name, value in (("demo.trials", cfg.demo_trials),
                        ("analysis.build_trials", cfg.analysis_build_trials),
                        ("analysis.battery_trials", cfg.analysis_battery_trials)):
        if value < 1:
            raise ConfigError(f"{source}: {name} must be >= 1, got {value}")
    if not 0.0 < cfg.analysis_significance < 1.0:
        raise ConfigError(f"{source}: analysis.significance must be in (0, 1)")
    if not 0.0 <= cfg.analysis_edge_threshold < 1.0:
        raise ConfigError(f"{source}: analysis.edge_threshold must be in [0, 1)")
    return cfg


def load_config(path: str) -> ExperimentConfig:
    with open(path) as f:
        return parse_config(f.read(), source=path)


def save_config(cfg: ExperimentConfig, path: str) -> None:
    with open(path, "w") as f:
        f.write(cfg.text())
