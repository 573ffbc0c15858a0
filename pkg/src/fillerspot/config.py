"""Configuration dataclasses and the YAML document that ties a run together.

Every tunable lives in one structured document: frontend, augmentation,
model, decoding, loss factors, mining schedule, training schedule, and the
synthetic-corpus section. Loading rejects unknown keys so a typo in a config
file fails loudly instead of silently running defaults.
"""

from __future__ import annotations

import dataclasses
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .util import atomic_write_text


class ConfigError(ValueError):
    """Raised for invalid, inconsistent, or unparseable configuration."""


@dataclass(frozen=True)
class FrontendConfig:
    """STFT frontend settings."""

    sample_rate: int = 16000
    win_ms: float = 25.0
    hop_ms: float = 10.0
    n_fft: int = 512
    log_floor: float = 1e-6

    def __post_init__(self) -> None:
        if self.sample_rate <= 0:
            raise ConfigError(f"sample_rate must be positive: {self.sample_rate}")
        if self.win_ms <= 0 or self.hop_ms <= 0:
            raise ConfigError("win_ms and hop_ms must be positive")
        if self.n_fft < self.win_length:
            raise ConfigError(
                f"n_fft ({self.n_fft}) must be >= window length ({self.win_length} samples)"
            )
        if self.log_floor <= 0:
            raise ConfigError(f"log_floor must be positive: {self.log_floor}")

    @property
    def win_length(self) -> int:
        return int(round(self.win_ms * self.sample_rate / 1000.0))

    @property
    def hop_length(self) -> int:
        return int(round(self.hop_ms * self.sample_rate / 1000.0))

    @property
    def hop_s(self) -> float:
        return self.hop_length / self.sample_rate

    @property
    def num_bins(self) -> int:
        return self.n_fft // 2 + 1


@dataclass(frozen=True)
class AugmentConfig:
    """Training-time spectrogram augmentation.

    Conservative stand-in settings: small time shift, mild additive noise
    (scaled to the feature standard deviation), and mean-fill time/frequency
    masking. Disabled entirely when ``enabled`` is false.
    """

    enabled: bool = True
    time_shift_frames: int = 2
    noise_snr_db: float | None = 20.0
    time_mask_width: int = 8
    time_mask_count: int = 1
    freq_mask_width: int = 8
    freq_mask_count: int = 1

    def __post_init__(self) -> None:
        if self.time_shift_frames < 0:
            raise ConfigError("time_shift_frames must be >= 0")
        for name in ("time_mask_width", "time_mask_count", "freq_mask_width", "freq_mask_count"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")


@dataclass(frozen=True)
class ModelConfig:
    """Detection network architecture knobs."""

    base_channels: int = 24
    trunk_width: int = 64
    trunk_blocks: int = 3
    head_channels: int = 64
    downsample_factor: int = 4
    num_auxiliary: int = 8

    def __post_init__(self) -> None:
        for name in ("base_channels", "trunk_width", "trunk_blocks", "head_channels"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        ds = self.downsample_factor
        if ds < 1 or (ds & (ds - 1)) != 0:
            raise ConfigError(f"downsample_factor must be a positive power of two: {ds}")
        if self.num_auxiliary < 0:
            raise ConfigError(f"num_auxiliary must be >= 0: {self.num_auxiliary}")

    @property
    def num_channels(self) -> int:
        """Heatmap channels: filler, non-filler, and the auxiliary slots."""
        return 2 + self.num_auxiliary


@dataclass(frozen=True)
class DecodeConfig:
    """Peak-extraction settings for turning heatmaps into events."""

    score_threshold: float = 0.3
    nms_radius_frames: int = 2
    top_k: int = 100

    def __post_init__(self) -> None:
        if not (0.0 <= self.score_threshold <= 1.0):
            raise ConfigError(f"score_threshold must be in [0, 1]: {self.score_threshold}")
        if self.nms_radius_frames < 1:
            raise ConfigError("nms_radius_frames must be >= 1")
        if self.top_k < 1:
            raise ConfigError("top_k must be >= 1")


@dataclass(frozen=True)
class LossFactors:
    """Weights for the detection objective and its inter-category terms."""

    alpha: float = 2.0
    beta: float = 4.0
    gamma: float = 1.0
    mu_fn: float = 2.0
    omega_fn: float = 2.0
    mu_nf: float = 0.5
    omega_nf: float = 0.5
    lambda_len: float = 0.1
    lambda_off: float = 1.0

    def __post_init__(self) -> None:
        for f in dataclasses.fields(self):
            if getattr(self, f.name) < 0:
                raise ConfigError(f"loss factor {f.name} must be >= 0")

    def without_inter_category(self) -> "LossFactors":
        """The ablation switch: zero out both inter-category pairs."""
        return dataclasses.replace(self, mu_fn=0.0, omega_fn=0.0, mu_nf=0.0, omega_nf=0.0)


@dataclass(frozen=True)
class MiningSchedule:
    """When hard-category mining runs and what it may promote."""

    start_epoch: int = 120
    period_epochs: int = 10
    num_auxiliary: int = 8
    min_fp_count: int = 3

    def __post_init__(self) -> None:
        if self.start_epoch < 1:
            raise ConfigError(f"start_epoch must be >= 1: {self.start_epoch}")
        if self.period_epochs < 1:
            raise ConfigError(f"period_epochs must be >= 1: {self.period_epochs}")
        if self.num_auxiliary < 0:
            raise ConfigError(f"num_auxiliary must be >= 0: {self.num_auxiliary}")
        if self.min_fp_count < 1:
            raise ConfigError(f"min_fp_count must be >= 1: {self.min_fp_count}")


@dataclass(frozen=True)
class TrainConfig:
    """Optimization schedule and trainer behavior."""

    lr_initial: float = 5e-3
    lr_drop_epochs: tuple[int, ...] = (300, 350, 400)
    total_epochs: int = 450
    batch_size: int = 8
    window_s: float = 10.0
    momentum: float = 0.9
    weight_decay: float = 0.0
    target_sigma_frac: float = 1.0 / 6.0
    eval_collar_s: float = 0.2
    seed: int = 0
    loss: LossFactors = field(default_factory=LossFactors)
    schedule: MiningSchedule = field(default_factory=MiningSchedule)

    def __post_init__(self) -> None:
        if self.lr_initial <= 0:
            raise ConfigError(f"lr_initial must be positive: {self.lr_initial}")
        if self.total_epochs < 1:
            raise ConfigError(f"total_epochs must be >= 1: {self.total_epochs}")
        drops = self.lr_drop_epochs
        if list(drops) != sorted(set(drops)):
            raise ConfigError(f"lr_drop_epochs must be strictly increasing: {drops}")
        if drops and drops[-1] >= self.total_epochs:
            raise ConfigError(
                f"lr_drop_epochs must all be < total_epochs ({self.total_epochs}): {drops}"
            )
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1: {self.batch_size}")
        if self.window_s <= 0:
            raise ConfigError(f"window_s must be positive: {self.window_s}")
        if not (0.0 <= self.momentum < 1.0):
            raise ConfigError(f"momentum must be in [0, 1): {self.momentum}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be >= 0: {self.weight_decay}")
        if self.target_sigma_frac <= 0:
            raise ConfigError(f"target_sigma_frac must be positive: {self.target_sigma_frac}")
        if self.eval_collar_s <= 0:
            raise ConfigError(f"eval_collar_s must be positive: {self.eval_collar_s}")


@dataclass(frozen=True)
class SynthConfig:
    """Synthetic-corpus section consumed by ``gen-synth``."""

    preset: str = "desk"
    clips: int = 56
    seed: int = 0
    noise_snr_db: float = 14.0
    words_per_clip: tuple[int, int] = (6, 9)
    split_fractions: tuple[float, float, float] = (0.7, 0.15, 0.15)
    split_seed: int = 0

    def __post_init__(self) -> None:
        if self.preset != "desk":
            raise ConfigError(f"unknown synth preset: {self.preset!r}")
        if self.clips < 1:
            raise ConfigError(f"synth clips must be >= 1: {self.clips}")


@dataclass(frozen=True)
class Config:
    """The full run configuration document."""

    filler_lexicon: tuple[str, ...] = ("um", "uh")
    frontend: FrontendConfig = field(default_factory=FrontendConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    decode: DecodeConfig = field(default_factory=DecodeConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)

    def __post_init__(self) -> None:
        if not self.filler_lexicon:
            raise ConfigError("filler_lexicon must not be empty")
        if len(set(self.filler_lexicon)) != len(self.filler_lexicon):
            raise ConfigError(f"filler_lexicon has duplicates: {self.filler_lexicon}")
        if self.model.num_auxiliary != self.train.schedule.num_auxiliary:
            raise ConfigError(
                f"model.num_auxiliary ({self.model.num_auxiliary}) must equal "
                f"train.schedule.num_auxiliary ({self.train.schedule.num_auxiliary})"
            )


def paper_config(seed: int = 0) -> Config:
    """The paper-scale defaults (450 epochs, mining from epoch 120)."""
    return dataclasses.replace(Config(), train=dataclasses.replace(TrainConfig(), seed=seed))


def desk_config(seed: int = 0, num_auxiliary: int = 4) -> Config:
    """Desk-scale preset: tiny model, 45 epochs, mining from epoch 12 every epoch.

    The paper-scale schedule shrinks by a factor of ten with the same shape:
    learning-rate drops at 30/35/40 and an aggressive mining cadence so the
    whole run fits in well under a minute on one CPU core.
    """
    return Config(
        frontend=FrontendConfig(win_ms=16.0, n_fft=256),
        model=ModelConfig(
            base_channels=8,
            trunk_width=32,
            trunk_blocks=2,
            head_channels=32,
            downsample_factor=4,
            num_auxiliary=num_auxiliary,
        ),
        train=TrainConfig(
            lr_drop_epochs=(30, 35, 40),
            total_epochs=45,
            batch_size=4,
            window_s=8.0,
            seed=seed,
            schedule=MiningSchedule(
                start_epoch=12, period_epochs=1, num_auxiliary=num_auxiliary, min_fp_count=1
            ),
        ),
    )


# ---------------------------------------------------------------------------
# YAML plumbing
# ---------------------------------------------------------------------------

def _coerce(value, hint, where: str):
    origin = typing.get_origin(hint)
    if origin in (typing.Union, types.UnionType):
        args = typing.get_args(hint)
        if len(args) == 2 and type(None) in args:
            if value is None:
                return None
            inner = args[0] if args[1] is type(None) else args[1]
            return _coerce(value, inner, where)
        raise ConfigError(f"{where}: unsupported config field type {hint!r}")
    if dataclasses.is_dataclass(hint):
        if not isinstance(value, dict):
            raise ConfigError(f"{where}: expected a mapping, got {type(value).__name__}")
        return _build_dataclass(hint, value, where)
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{where}: expected a list, got {type(value).__name__}")
        args = typing.get_args(hint)
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_coerce(v, args[0], f"{where}[{i}]") for i, v in enumerate(value))
        if len(value) != len(args):
            raise ConfigError(f"{where}: expected {len(args)} entries, got {len(value)}")
        return tuple(_coerce(v, a, f"{where}[{i}]") for i, (v, a) in enumerate(zip(value, args)))
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected a boolean, got {value!r}")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if hint is float:
        if isinstance(value, bool):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        if isinstance(value, (int, float)):
            return float(value)
        if isinstance(value, str):
            try:
                return float(value)
            except ValueError:
                raise ConfigError(f"{where}: expected a number, got {value!r}") from None
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    raise ConfigError(f"{where}: unsupported config field type {hint!r}")


def _build_dataclass(cls, data: dict, where: str):
    hints = typing.get_type_hints(cls)
    known = {f.name: hints[f.name] for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}; known keys are {sorted(known)}")
    kwargs = {k: _coerce(v, known[k], f"{where}.{k}") for k, v in data.items()}
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def dataclass_from_dict(cls, data: dict, where: str = "data"):
    """Rebuild any config dataclass from plain parsed data, strictly."""
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(data).__name__}")
    return _build_dataclass(cls, data, where)


def dataclass_to_dict(obj) -> dict:
    """Flatten a config dataclass to plain dicts/lists for serialization."""

    def unwrap(value):
        if dataclasses.is_dataclass(value):
            return {f.name: unwrap(getattr(value, f.name)) for f in dataclasses.fields(value)}
        if isinstance(value, tuple):
            return [unwrap(v) for v in value]
        return value

    return unwrap(obj)


def config_from_dict(data: dict) -> Config:
    if not isinstance(data, dict):
        raise ConfigError(f"config document must be a mapping, got {type(data).__name__}")
    return _build_dataclass(Config, data, "config")


def config_to_dict(config: Config) -> dict:
    return dataclass_to_dict(config)


def load_config(path: Path | str) -> Config:
    """Parse a YAML config file; absent keys keep their defaults."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if data is None:
        data = {}
    try:
        return config_from_dict(data)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def save_config(config: Config, path: Path | str) -> None:
    atomic_write_text(path, yaml.safe_dump(config_to_dict(config), sort_keys=False))
