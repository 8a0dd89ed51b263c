"""Flat key=value run configuration.

One text file drives every command: unknown keys are rejected, missing
keys fall back to the documented defaults.  '#' starts a comment; blank
lines are ignored.  List values are comma-separated.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError
from .features import GridSpec
from .network import DpmConfig
from .preprocess import PreprocParams
from .synthetic import SynthSpec


@dataclass
class RunConfig:
    seed: int = 42
    descriptor: str = "sift"
    # dense grid
    block: int = 20
    stride: int = 8
    scales: tuple[float, ...] = (0.6, 1.0)
    # preprocessing
    dog_sigma_inner: float = 1.0
    dog_sigma_outer: float = 2.0
    unit_std: bool = True
    # embedding
    pca_dim: int = 64
    max_train_vectors: int = 1_000_000
    # network / training
    hidden_sizes: tuple[int, ...] = (200, 200)
    l2_penalty: float = 1e-4
    learning_rate: float = 0.003
    lr_decay_factor: float = 0.5
    lr_decay_every: int = 15
    epochs: int = 30
    batch_size: int = 128
    activation: str = "tanh"
    map_direction: str = "visible_to_thermal"
    # synthetic dataset
    synth_subjects: int = 40
    synth_images_per_subject: int = 4
    synth_train_fraction: float = 0.5
    synth_gamma: float = 0.25
    synth_blur_sigma: float = 3.0
    synth_downsample: int = 2
    synth_noise_sigma: float = 0.008
    synth_width: int = 130
    synth_height: int = 170

    def grid_spec(self) -> GridSpec:
        return GridSpec(block=self.block, stride=self.stride, scales=self.scales)

    def preproc_params(self) -> PreprocParams:
        return PreprocParams(
            dog_sigma_inner=self.dog_sigma_inner,
            dog_sigma_outer=self.dog_sigma_outer,
            unit_std=self.unit_std,
        )

    def dpm_config(self, input_dim: int | None = None) -> DpmConfig:
        return DpmConfig(
            input_dim=input_dim if input_dim is not None else self.pca_dim + 2,
            hidden_sizes=self.hidden_sizes,
            l2_penalty=self.l2_penalty,
            learning_rate=self.learning_rate,
            lr_decay_factor=self.lr_decay_factor,
            lr_decay_every=self.lr_decay_every,
            epochs=self.epochs,
            batch_size=self.batch_size,
            seed=self.seed,
            activation=self.activation,
        )

    def synth_spec(self) -> SynthSpec:
        return SynthSpec(
            n_subjects=self.synth_subjects,
            images_per_subject=self.synth_images_per_subject,
            train_fraction=self.synth_train_fraction,
            gamma=self.synth_gamma,
            blur_sigma=self.synth_blur_sigma,
            downsample=self.synth_downsample,
            noise_sigma=self.synth_noise_sigma,
            width=self.synth_width,
            height=self.synth_height,
            seed=self.seed,
        )


def _parse_bool(value: str) -> bool:
    v = value.strip().lower()
    if v in ("true", "1", "yes"):
        return True
    if v in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _parse_value(name: str, value: str, kind):
    if kind == "int":
        return int(value)
    if kind == "float":
        return float(value)
    if kind == "bool":
        return _parse_bool(value)
    if kind == "floats":
        return tuple(float(v) for v in value.split(","))
    if kind == "ints":
        return tuple(int(v) for v in value.split(","))
    return value.strip()


_KINDS = {
    int: "int",
    float: "float",
    bool: "bool",
    str: "str",
}


def _field_kinds() -> dict[str, str]:
    kinds = {}
    for f in fields(RunConfig):
        if f.name in ("scales",):
            kinds[f.name] = "floats"
        elif f.name in ("hidden_sizes",):
            kinds[f.name] = "ints"
        else:
            kinds[f.name] = _KINDS[type(getattr(RunConfig(), f.name))]
    return kinds


def parse_config_text(text: str, source: str = "<config>") -> RunConfig:
    kinds = _field_kinds()
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in kinds:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        try:
            values[key] = _parse_value(key, value.strip(), kinds[key])
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from exc
    cfg = RunConfig(**values)
    if cfg.descriptor not in ("sift", "hog"):
        raise ConfigError(f"{source}: descriptor must be sift or hog, got {cfg.descriptor!r}")
    if cfg.map_direction not in ("visible_to_thermal", "thermal_to_visible"):
        raise ConfigError(f"{source}: bad map_direction {cfg.map_direction!r}")
    return cfg


def load_config(path) -> RunConfig:
    return parse_config_text(Path(path).read_text(), source=str(path))
