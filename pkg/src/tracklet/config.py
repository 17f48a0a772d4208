"""Pipeline configuration: flat ``key = value`` files with ``#`` comments."""

from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass, fields

from .background import GmmParams


class ConfigError(ValueError):
    pass


_CHOICES = {
    "bg_model": ("gmm", "adaptive"),
    "hist_downsample": ("sample", "pool"),
    "refine": ("none", "meanshift"),
}


@dataclass
class PipelineConfig:
    # background (mixture defaults are the published table values)
    bg_model: str = "gmm"
    alpha: float = 0.02
    rho: float = 0.01
    deviation_sq_threshold: float = 49.0
    init_variance: float = 3.0
    init_mixprop: float = 1e-5
    background_threshold: float = 0.9
    component_threshold: int = 10
    variance_floor: float = 0.75
    alpha_bg: float = 0.05
    t_floor: float = 10.0
    t_gain: float = 5.0
    # morphology
    morph_radius: int = 1
    # regions
    min_area: int = 15
    bins_per_channel: int = 8
    hist_downsample: str = "sample"
    hist_downsample_bins: int = 0
    # association
    lambda_px: float = 50.0
    max_missed: int = 5
    speed_window: int = 5
    # mean-shift refinement
    refine: str = "none"
    ms_epsilon: float = 0.1
    ms_max_iter: int = 20
    ms_gamma: float = 0.1
    # driver
    warmup: int = 30
    input: str = ""
    input_pattern: str = "frame_%06d.ppm"
    input_first: int = 0
    input_count: int = 0
    input_channels: int = 0
    output: str = "out"
    annotate: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for key, options in _CHOICES.items():
            if getattr(self, key) not in options:
                raise ConfigError(f"{key} must be one of {', '.join(options)}")
        positive = ("lambda_px", "ms_epsilon", "ms_max_iter", "bins_per_channel", "speed_window")
        for key in positive:
            if getattr(self, key) <= 0:
                raise ConfigError(f"{key} must be positive")
        nonneg = ("morph_radius", "min_area", "max_missed", "warmup", "hist_downsample_bins", "input_count")
        for key in nonneg:
            if getattr(self, key) < 0:
                raise ConfigError(f"{key} must be >= 0")
        if not 0 <= self.ms_gamma <= 1:
            raise ConfigError("ms_gamma must lie in [0, 1]")
        if self.input_channels not in (0, 1, 3):
            raise ConfigError("input_channels must be 0 (any), 1 or 3")
        try:
            self.gmm_params()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def gmm_params(self) -> GmmParams:
        return GmmParams(
            alpha=self.alpha,
            rho=self.rho,
            deviation_sq_threshold=self.deviation_sq_threshold,
            init_variance=self.init_variance,
            init_mixprop=self.init_mixprop,
            background_threshold=self.background_threshold,
            component_threshold=self.component_threshold,
            variance_floor=self.variance_floor,
        )

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)


def _coerce(key: str, kind, text: str):
    text = text.strip()
    try:
        if kind is bool:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as {kind.__name__}") from None
    return text


_TYPES = {f.name: {"str": str, "int": int, "float": float, "bool": bool}[f.type] for f in fields(PipelineConfig)}


def parse_config(text: str, base: PipelineConfig | None = None) -> PipelineConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _coerce(key, _TYPES[key], value)
    base = base or PipelineConfig()
    try:
        return dataclasses.replace(base, **values)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> PipelineConfig:
    try:
        with open(path) as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc


def format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        text = repr(value)
        if text.endswith(".0"):
            text = text[:-2]
        return re.sub(r"e([+-])0*(\d)", r"e\1\2", text)
    return str(value)


def dump_config(config: PipelineConfig) -> str:
    return "".join(f"{f.name} = {format_value(getattr(config, f.name))}\n" for f in fields(config))
