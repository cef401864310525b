# config/experiment_config.py
"""
实验配置：JSON 键值文档 → pydantic 模型，未知键直接拒绝。

示例:
{
  "preset": "kls-origin",
  "half_width": 2048,
  "horizon": 4000,
  "nonlinearity": {"c": 1.0, "p": 3, "gamma": "sigma3"},
  "initial": {"recipe": "mixed", "z": [0.03, 0.0], "eps": 0.05},
  "seed": 0
}
"""
import json
import os
from typing import List, Literal, Optional, Tuple

from pydantic import (BaseModel, ConfigDict, Field, NonNegativeFloat, PositiveFloat, PositiveInt,
                      ValidationError, field_validator, model_validator)

from config.settings import (DEFAULT_PRESET, EXPERIMENT_CONFIG, LATTICE_CONFIG, NONLINEAR_CONFIG, OUTPUT_DIR,
                             SMOOTHNESS_CONFIG, SUPPORTED_PRESETS, WRAP_GUARD_CONFIG)
from core.errors import ConfigError


class NonlinearitySettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    c: float = NONLINEAR_CONFIG["c"]
    p: PositiveInt = NONLINEAR_CONFIG["p"]
    gamma: Literal["sigma3", "sigma1", "identity"] = NONLINEAR_CONFIG["gamma"]


class InitialDataSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    recipe: Literal["bound_state", "continuous_only", "mixed", "snapshot"] = "mixed"
    z: Tuple[float, float] = (0.03, 0.0)
    eps: NonNegativeFloat = 0.05
    profile_width: PositiveFloat = EXPERIMENT_CONFIG["profile_width"]
    snapshot: Optional[str] = None

    @model_validator(mode="after")
    def _check_recipe(self):
        if self.recipe == "snapshot":
            if not self.snapshot:
                raise ValueError("recipe=snapshot 需要 snapshot 路径")
            if not os.path.isfile(self.snapshot):
                raise ValueError(f"快照文件不存在: {self.snapshot}")
        return self

    @property
    def z0(self) -> complex:
        return complex(*self.z)


class ToleranceOverrides(BaseModel):
    model_config = ConfigDict(extra="forbid")

    cauchy_factor: Optional[PositiveFloat] = None
    cauchy_threshold: Optional[PositiveFloat] = None
    resolution_factor: Optional[PositiveFloat] = None
    rho_variation: Optional[PositiveFloat] = None
    z_plateau: Optional[PositiveFloat] = None
    decay_tolerance: Optional[PositiveFloat] = None
    wrap_threshold: Optional[PositiveFloat] = None

    def merged(self) -> dict:
        """EXPERIMENT_CONFIG 默认值叠加非空覆盖项"""
        merged = {**EXPERIMENT_CONFIG, "wrap_threshold": WRAP_GUARD_CONFIG["threshold"]}
        merged.update({k: v for k, v in self.model_dump().items() if v is not None})
        return merged


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    preset: str = DEFAULT_PRESET
    kappa: Optional[float] = None
    defect_phase: Optional[float] = None
    tail_amplitude: Optional[float] = None
    tail_length: Optional[PositiveFloat] = None
    coin_csv: Optional[str] = None

    nonlinearity: NonlinearitySettings = Field(default_factory=NonlinearitySettings)
    half_width: PositiveInt = LATTICE_CONFIG["default_half_width"]
    horizon: PositiveInt = 1000
    initial: InitialDataSettings = Field(default_factory=InitialDataSettings)
    seed: int = 0
    out_dir: str = OUTPUT_DIR
    tolerances: ToleranceOverrides = Field(default_factory=ToleranceOverrides)
    auto_enlarge: bool = True

    single_step: bool = False
    decay_window: Tuple[PositiveInt, PositiveInt] = (20, 400)
    orbital_z: float = 0.04
    orbital_deltas: List[PositiveFloat] = Field(default_factory=lambda: [0.02, 0.01, 0.005])
    z_scaling_eps: List[PositiveFloat] = Field(default_factory=lambda: [0.02, 0.04, 0.08])
    kato_eps: List[PositiveFloat] = Field(default_factory=lambda: list(SMOOTHNESS_CONFIG["eps_list"]))
    kato_s: float = SMOOTHNESS_CONFIG["weight_s"]
    kato_grid_size: PositiveInt = SMOOTHNESS_CONFIG["grid_size"]

    @field_validator("preset")
    @classmethod
    def _check_preset(cls, value: str) -> str:
        if value not in SUPPORTED_PRESETS:
            raise ValueError(f"不支持的预设 {value}，可选: {', '.join(SUPPORTED_PRESETS)}")
        return value

    @field_validator("coin_csv")
    @classmethod
    def _check_coin_csv(cls, value: Optional[str]) -> Optional[str]:
        if value is not None and not os.path.isfile(value):
            raise ValueError(f"硬币 CSV 不存在: {value}")
        return value

    @model_validator(mode="after")
    def _check_window(self):
        t_min, t_max = self.decay_window
        if t_min >= t_max:
            raise ValueError(f"decay_window 需要 t_min < t_max，收到 {self.decay_window}")
        return self

    @property
    def thresholds(self) -> dict:
        return self.tolerances.merged()


def _describe(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        location = ".".join(str(p) for p in item["loc"]) or "<root>"
        if item["type"] == "extra_forbidden":
            parts.append(f"未知的配置键 '{location}'")
        else:
            parts.append(f"{location}: {item['msg']}")
    return "; ".join(parts)


def parse_config(data: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(_describe(e)) from e


def load_config(path: str) -> ExperimentConfig:
    """读取 JSON 配置；语法错误报告行列号，字段错误报告键名"""
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"无法读取配置文件 {path}: {e}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}:{e.colno}: JSON 语法错误: {e.msg}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: 顶层必须是对象")
    return parse_config(data)
