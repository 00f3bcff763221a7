"""Pydantic request/response models for the session service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field


class PhantomSpecModel(BaseModel):
    dims: tuple[int, int, int] = (96, 96, 96)
    spacing: tuple[float, float, float] = (0.45, 0.45, 0.45)
    atrium_radius: float = 16.0
    leaflet_thickness: float = 1.5
    leaflet_coverage: float = 1.0
    bowl_depth_frac: float = 0.89
    intensities: tuple[float, float] = (20.0, 180.0)
    noise_sigma: float = 8.0
    rng_seed: int = 1234


class SessionConfigModel(BaseModel):
    seed_radius: float = 5.0
    shell_distance: float = 5.0
    smoothing_sigma: float = 1.0
    beta: float | Literal["auto"] = "auto"
    roi_clamp: bool = False
    roi_radius_margin: float = 2.0
    roi_above: float = 1.5
    roi_below: Optional[float] = None


class CreateSessionRequest(BaseModel):
    phantom: Optional[PhantomSpecModel] = None
    config: Optional[SessionConfigModel] = None


class Point3(BaseModel):
    x: float
    y: float
    z: float


class AnnulusRequest(BaseModel):
    points: list[Point3] = Field(min_length=1)
    probe_dir: Optional[tuple[float, float, float]] = None


class ContourParamsModel(BaseModel):
    curvature_scale: float
    advection_scale: float
    propagation_scale: float
    dt_safety: float = 0.4
    reinit_interval: int = 20


class StepRequest(BaseModel):
    stage: Literal["BLOODPOOL", "LEAFLET"]
    iterations: int
    params: Optional[ContourParamsModel] = None


class AcceptRequest(BaseModel):
    stage: Literal["BLOODPOOL", "LEAFLET"]


class StepResponse(BaseModel):
    stage: str
    iterations_done: int
    inside_volume_mm3: float
    status: str
    checksum: Optional[str] = None


class AnnulusResponse(BaseModel):
    centroid: tuple[float, float, float]
    plane_normal: tuple[float, float, float]
    plane_offset: float
    probe_dir: tuple[float, float, float]
    max_radius: float
    samples: list[tuple[float, float, float]]


class ErrorBody(BaseModel):
    code: str
    message: str
    detail: Optional[str] = None
