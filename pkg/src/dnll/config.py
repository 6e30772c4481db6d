"""Training configuration and its flat key=value file format.

Config files are plain text, one ``key = value`` per line, ``#`` comments,
dotted keys for the nested groups (``optimizer.base_lr``). Every field is
addressable; unknown keys are rejected by name so typos cannot silently
fall back to defaults. ``serialize_config`` emits the fully resolved
config in canonical order, which is what run manifests echo.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .data import AugmentConfig
from .errors import ConfigError
from .optim import OptimizerConfig

SELECTION_MODES = ("EP", "EPM")
LEARNING_MODES = ("mutual", "self_only", "mutual_plus_self", "supervised")


@dataclass
class Seeds:
    model1: int = 1
    model2: int = 2
    data: int = 3
    sampler: int = 4
    augment: int = 5


@dataclass
class TrainConfig:
    lam: float = 1.0
    m: int = 1
    selection_mode: str = "EP"
    learning_mode: str = "mutual_plus_self"
    epochs: int = 30
    batch_size: int = 100
    labeled_fraction: float = 0.5
    ema_decay: float = 0.9
    lambda_ramp_epochs: int = 0
    hidden: tuple[int, ...] = (256, 128)
    activation: str = "relu"
    max_unlabeled: int = 0
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    seeds: Seeds = field(default_factory=Seeds)

    def __post_init__(self):
        if self.lam < 0:
            raise ConfigError(f"lambda must be >= 0, got {self.lam}")
        if self.m < 1:
            raise ConfigError(f"m must be >= 1, got {self.m}")
        if self.selection_mode not in SELECTION_MODES:
            raise ConfigError(
                f"selection_mode {self.selection_mode!r} not in {SELECTION_MODES}"
            )
        if self.learning_mode not in LEARNING_MODES:
            raise ConfigError(
                f"learning_mode {self.learning_mode!r} not in {LEARNING_MODES}"
            )
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 2:
            raise ConfigError(f"batch_size must be >= 2, got {self.batch_size}")
        if not 0.0 < self.labeled_fraction < 1.0:
            raise ConfigError(
                f"labeled_fraction must be in (0, 1), got {self.labeled_fraction}"
            )
        if self.lambda_ramp_epochs < 0:
            raise ConfigError("lambda_ramp_epochs must be >= 0")
        if self.max_unlabeled < 0:
            raise ConfigError("data.max_unlabeled must be >= 0 (0 = use all)")

    def effective_lambda(self, epoch: int) -> float:
        """Constant by default; optional linear ramp over the first epochs."""
        if self.lambda_ramp_epochs > 0:
            return self.lam * min(1.0, (epoch + 1) / self.lambda_ramp_epochs)
        return self.lam


def _parse_bool(raw: str, key: str) -> bool:
    low = raw.lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {raw!r}")


def _parse_hidden(raw: str) -> tuple[int, ...]:
    try:
        return tuple(int(tok) for tok in raw.replace(" ", "").split(",") if tok)
    except ValueError as exc:
        raise ConfigError(f"model.hidden: expected comma-separated ints, got {raw!r}") from exc


# key -> (section, attribute, parser)
_SCHEMA = {
    "lambda": (None, "lam", float),
    "m": (None, "m", int),
    "selection_mode": (None, "selection_mode", str),
    "learning_mode": (None, "learning_mode", str),
    "epochs": (None, "epochs", int),
    "batch_size": (None, "batch_size", int),
    "labeled_fraction": (None, "labeled_fraction", float),
    "ema_decay": (None, "ema_decay", float),
    "lambda_ramp_epochs": (None, "lambda_ramp_epochs", int),
    "model.hidden": (None, "hidden", _parse_hidden),
    "model.activation": (None, "activation", str),
    "data.max_unlabeled": (None, "max_unlabeled", int),
    "optimizer.base_lr": ("optimizer", "base_lr", float),
    "optimizer.momentum": ("optimizer", "momentum", float),
    "optimizer.weight_decay": ("optimizer", "weight_decay", float),
    "optimizer.total_steps": ("optimizer", "total_steps", int),
    "optimizer.nesterov": ("optimizer", "nesterov", _parse_bool),
    "augment.weak": ("augment", "weak", str),
    "augment.strong": ("augment", "strong", str),
    "augment.crop_pad": ("augment", "crop_pad", int),
    "augment.flip_p": ("augment", "flip_p", float),
    "augment.noise_sigma": ("augment", "noise_sigma", float),
    "augment.per_submodel_streams": ("augment", "per_submodel_streams", _parse_bool),
    "seeds.model1": ("seeds", "model1", int),
    "seeds.model2": ("seeds", "model2", int),
    "seeds.data": ("seeds", "data", int),
    "seeds.sampler": ("seeds", "sampler", int),
    "seeds.augment": ("seeds", "augment", int),
}


def parse_config(text: str) -> TrainConfig:
    """Parse key=value text into a validated TrainConfig."""
    top: dict = {}
    nested: dict[str, dict] = {"optimizer": {}, "augment": {}, "seeds": {}}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw_line!r}")
        key, _, raw_value = line.partition("=")
        key = key.strip()
        raw_value = raw_value.strip()
        if key not in _SCHEMA:
            raise ConfigError(f"unknown config key {key!r} (line {lineno})")
        section, attr, parser = _SCHEMA[key]
        try:
            if parser in (_parse_bool,):
                value = parser(raw_value, key)
            else:
                value = parser(raw_value)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{key}: cannot parse value {raw_value!r}") from exc
        if section is None:
            top[attr] = value
        else:
            nested[section][attr] = value
    return TrainConfig(
        optimizer=OptimizerConfig(**nested["optimizer"]),
        augment=AugmentConfig(**nested["augment"]),
        seeds=Seeds(**nested["seeds"]),
        **top,
    )


def parse_config_file(path) -> TrainConfig:
    return parse_config(Path(path).read_text())


def serialize_config(cfg: TrainConfig) -> str:
    """Canonical key=value dump of every field (manifest echo format)."""
    values = {
        "lambda": cfg.lam,
        "m": cfg.m,
        "selection_mode": cfg.selection_mode,
        "learning_mode": cfg.learning_mode,
        "epochs": cfg.epochs,
        "batch_size": cfg.batch_size,
        "labeled_fraction": cfg.labeled_fraction,
        "ema_decay": cfg.ema_decay,
        "lambda_ramp_epochs": cfg.lambda_ramp_epochs,
        "model.hidden": ",".join(str(h) for h in cfg.hidden),
        "model.activation": cfg.activation,
        "data.max_unlabeled": cfg.max_unlabeled,
        "optimizer.base_lr": cfg.optimizer.base_lr,
        "optimizer.momentum": cfg.optimizer.momentum,
        "optimizer.weight_decay": cfg.optimizer.weight_decay,
        "optimizer.total_steps": cfg.optimizer.total_steps,
        "optimizer.nesterov": cfg.optimizer.nesterov,
        "augment.weak": cfg.augment.weak,
        "augment.strong": cfg.augment.strong,
        "augment.crop_pad": cfg.augment.crop_pad,
        "augment.flip_p": cfg.augment.flip_p,
        "augment.noise_sigma": cfg.augment.noise_sigma,
        "augment.per_submodel_streams": cfg.augment.per_submodel_streams,
        "seeds.model1": cfg.seeds.model1,
        "seeds.model2": cfg.seeds.model2,
        "seeds.data": cfg.seeds.data,
        "seeds.sampler": cfg.seeds.sampler,
        "seeds.augment": cfg.seeds.augment,
    }
    lines = []
    for key in _SCHEMA:
        v = values[key]
        if isinstance(v, bool):
            v = "true" if v else "false"
        lines.append(f"{key} = {v}")
    return "\n".join(lines) + "\n"
