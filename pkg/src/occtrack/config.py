"""Tracker configuration: every threshold, weight and budget in one place."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

import yaml


class ConfigError(ValueError):
    pass


# Fields that are probabilities/scores and must lie in [0, 1].
_UNIT_FIELDS = (
    "tau_rec", "tau_app_rec", "tau_unc", "tau_app_unc", "tau_mot", "tau_geo", "tau_delta",
    "tau_reconf_app", "tau_rep_iou", "tau_rep_app", "tau_rep_delta", "tau_drm",
    "tau_drm_reappear", "tau_anchor", "tau_dist", "small_area_fraction", "anchor_novelty",
    "small_area_floor",
)
_POSITIVE_INT_FIELDS = (
    "n_win", "n_drm", "branch_keep", "k_c", "median_window", "anchor_capacity",
    "noncond_capacity", "noncond_buffer_factor", "recovery_cap",
)
_NONNEG_INT_FIELDS = ("l_miss", "g_min")


@dataclass(frozen=True)
class Config:
    # mode classification
    tau_rec: float = 0.30
    tau_app_rec: float = 0.35
    tau_unc: float = 0.55
    tau_app_unc: float = 0.50
    tau_mot: float = 0.35
    tau_geo: float = 0.50
    tau_delta: float = 0.10
    # motion scale, as a fraction of the frame diagonal
    tau_m: float = 0.05
    # branch score weights
    lambda_a: float = 2.0
    lambda_m: float = 0.5
    lambda_g: float = 0.5
    lambda_e: float = 1.0
    eps: float = 1e-4
    # reconfirmation
    n_win: int = 3
    tau_reconf_app: float = 0.70
    l_miss: int = 10
    tau_rep_iou: float = 0.50
    tau_rep_app: float = 0.60
    tau_rep_delta: float = 0.05
    # DRM promotion
    tau_drm: float = 0.80
    tau_drm_reappear: float = 0.60
    g_min: int = 5
    r_min: float = 0.5
    r_max: float = 2.0
    r_min_small: float = 0.25
    r_max_small: float = 4.0
    n_drm: int = 2
    # budgets
    branch_keep: int = 3
    k_c: int = 6
    keep_first_cond_frame: bool = True
    small_area_fraction: float = 0.005
    median_window: int = 15
    anchor_capacity: int = 8
    tau_anchor: float = 0.85
    anchor_novelty: float = 0.98
    tau_dist: float = 0.5
    # distractor separation, in multiples of sqrt(median area)
    d_dist: float = 1.5
    noncond_capacity: int = 7
    noncond_buffer_factor: int = 4
    small_area_floor: float = 0.5
    recovery_cap: int = 60

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name in _UNIT_FIELDS:
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {value!r}")
        for name in _POSITIVE_INT_FIELDS:
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ConfigError(f"{name} must be an integer >= 1, got {value!r}")
        for name in _NONNEG_INT_FIELDS:
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                raise ConfigError(f"{name} must be an integer >= 0, got {value!r}")
        if not self.eps > 0:
            raise ConfigError(f"eps must be > 0, got {self.eps!r}")
        if not self.tau_m > 0:
            raise ConfigError(f"tau_m must be > 0, got {self.tau_m!r}")
        if not self.d_dist >= 0:
            raise ConfigError(f"d_dist must be >= 0, got {self.d_dist!r}")
        for name in ("lambda_a", "lambda_m", "lambda_g", "lambda_e"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)!r}")
        if not 0 < self.r_min < self.r_max:
            raise ConfigError(f"need 0 < r_min < r_max, got r_min={self.r_min!r} r_max={self.r_max!r}")
        if not 0 < self.r_min_small < self.r_max_small:
            raise ConfigError(
                f"need 0 < r_min_small < r_max_small, got {self.r_min_small!r}, {self.r_max_small!r}"
            )
        if not isinstance(self.keep_first_cond_frame, bool):
            raise ConfigError("keep_first_cond_frame must be a boolean")

    def replace(self, **changes) -> Config:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @property
    def noncond_buffer_size(self) -> int:
        return self.noncond_capacity * self.noncond_buffer_factor


def config_from_mapping(data: dict | None) -> Config:
    data = data or {}
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping of key: value pairs")
    known = {f.name: f for f in fields(Config)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown configuration key(s): {', '.join(unknown)}")
    kwargs = {}
    for key, value in data.items():
        default = known[key].default
        if isinstance(default, float) and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        kwargs[key] = value
    return Config(**kwargs)


def load_config(path: str | Path | None) -> Config:
    if path is None:
        return Config()
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: malformed config: {exc}") from exc
    try:
        return config_from_mapping(data)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def dump_config(cfg: Config, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=False))
