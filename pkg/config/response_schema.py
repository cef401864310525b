from typing import Any, Dict, Generic, List, Literal, Optional, TypeVar

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

T = TypeVar('T')


class ApiResponse(BaseModel, Generic[T]):
    success: bool
    code: int
    message: str
    data: Optional[T] = None

    @classmethod
    def success_response(cls, data: T = None, message: str = "Success"):
        return cls(success=True, code=200, message=message, data=data)

    @classmethod
    def error_response(cls, message: str, code: int = 400):
        return cls(success=False, code=code, message=message, data=None)


class SpectrumRequest(BaseModel):
    preset: str = "kls-origin"
    half_width: int = Field(64, gt=1)
    kappa: Optional[float] = None


class BoundStateRequest(BaseModel):
    preset: str = "kls-origin"
    half_width: int = Field(64, gt=1)
    c: float = 1.0
    p: int = Field(3, ge=1)
    gamma: Literal["sigma3", "sigma1", "identity"] = "sigma3"
    z_re: float = 0.05
    z_im: float = 0.0


class DecayFitRequest(BaseModel):
    preset: str = "kls-origin"
    half_width: int = Field(1024, gt=1)
    t_min: int = Field(20, ge=1)
    t_max: int = Field(200, ge=2)
    single_step: bool = False
    control: bool = False


class KatoCheckRequest(BaseModel):
    preset: str = "kls-origin"
    half_width: int = Field(32, gt=1)
    eps_list: List[float] = Field(default_factory=lambda: [0.1, 0.03, 0.01, 0.003])
    s: float = 2.0
    grid_size: int = Field(32, ge=4)
    instances: int = Field(5, ge=1)
    seed: int = 0


class DecayFitReport(BaseModel):
    slope: float
    intercept: float
    r_squared: float
    t_min: int
    t_max: int
    clock: Literal["single", "double"]
    control: bool
    boundary_mass: float
    passed: bool


class OrbitalRow(BaseModel):
    delta: float
    sup_deviation: float
    final_deviation: float
    halving_ratio: Optional[float] = None


class StabilityReport(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    status: Literal["PASS", "INCONCLUSIVE"]
    half_width: int
    horizon: int
    rho: float
    rho_variation: float
    z_l1: float
    z_tail_increment: float
    eta1_converged: bool
    eta1_diffs: List[float]
    eta_plus_converged: bool
    eta_plus_diffs: List[float]
    eta_plus_norm: float
    resolution: Dict[int, float]
    resolution_monotone: bool
    final_residual: float
    pass_threshold: float
    scaling_exponents: Dict[str, float] = Field(default_factory=dict)
    failed_checks: List[str] = Field(default_factory=list)
    failure: Optional[str] = None
    eta_plus: Optional[Any] = Field(default=None, exclude=True)

    @model_validator(mode="after")
    def _check_finite(self):
        norms = [self.rho, self.z_l1, self.eta_plus_norm, self.final_residual, *self.resolution.values()]
        if not all(np.isfinite(v) for v in norms):
            raise ValueError("StabilityReport 中存在非有限的范数")
        if self.status == "PASS" and self.final_residual > self.pass_threshold:
            raise ValueError("PASS 状态要求最终残差不超过阈值")
        return self
