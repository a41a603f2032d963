from __future__ import annotations

import hashlib
import json
from functools import lru_cache
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from .core.logging import LogConfig
from .models import ALLOWED_K

MANIFEST_SCHEMA_VERSION = 1


class SignalSettings(BaseModel):
    detrend_cutoff_hz: float = 0.4
    band_lo_hz: float = 0.4
    band_hi_hz: float = 4.0
    filter_order: int = 4
    pos_window_s: float = 1.6
    pad_factor: int = 4
    hr_min_bpm: float = 30.0
    hr_max_bpm: float = 200.0
    peak_ratio: float = 3.0
    ppg_tolerance_bpm: float = 3.0

    @field_validator("detrend_cutoff_hz", "band_lo_hz", "band_hi_hz", "pos_window_s", "peak_ratio")
    @classmethod
    def validate_positive(cls, v: float) -> float:
        if v <= 0:
            raise ValueError(f"Value must be positive, got: {v}")
        return v

    @field_validator("filter_order", "pad_factor")
    @classmethod
    def validate_at_least_one(cls, v: int) -> int:
        if v < 1:
            raise ValueError(f"Value must be >= 1, got: {v}")
        return v

    @model_validator(mode="after")
    def validate_ranges(self) -> SignalSettings:
        if self.band_lo_hz >= self.band_hi_hz:
            raise ValueError("band_lo_hz must be below band_hi_hz")
        if not 0 < self.hr_min_bpm < self.hr_max_bpm:
            raise ValueError("HR range must satisfy 0 < hr_min_bpm < hr_max_bpm")
        return self


class MapSettings(BaseModel):
    k: int = 9
    segment_len_s: float = 20.0
    n_segments: int = 7
    total_len_s: float = 70.0
    phase_mean: Literal["circular", "arithmetic"] = "circular"
    tol_fund_bpm: float = 6.0
    tol_harm_bpm: float = 12.0
    snr_clamp_db: float = 60.0
    rows_per_block: int = 8

    @field_validator("k")
    @classmethod
    def validate_k(cls, v: int) -> int:
        if v not in ALLOWED_K:
            raise ValueError(f"k must be one of {ALLOWED_K}, got: {v}")
        return v

    @field_validator("n_segments", "rows_per_block")
    @classmethod
    def validate_count(cls, v: int) -> int:
        if v < 1:
            raise ValueError(f"Value must be >= 1, got: {v}")
        return v

    @field_validator("segment_len_s", "total_len_s", "tol_fund_bpm", "tol_harm_bpm", "snr_clamp_db")
    @classmethod
    def validate_positive(cls, v: float) -> float:
        if v <= 0:
            raise ValueError(f"Value must be positive, got: {v}")
        return v


class GeometrySettings(BaseModel):
    texture_resolution: int = 512
    view_weight: Literal["cosine", "uniform"] = "cosine"
    depth_eps_rel: float = 1e-3

    @field_validator("texture_resolution")
    @classmethod
    def validate_resolution(cls, v: int) -> int:
        if not 8 <= v <= 8192:
            raise ValueError(f"Texture resolution must be between 8 and 8192, got: {v}")
        return v

    @field_validator("depth_eps_rel")
    @classmethod
    def validate_eps(cls, v: float) -> float:
        if not 0 < v < 0.1:
            raise ValueError(f"depth_eps_rel must be in (0, 0.1), got: {v}")
        return v


class FittingSettings(BaseModel):
    lambda_D: float = 2.5
    lambda_L: float = 0.01
    lambda_beta: float = 1e-4
    lambda_psi: float = 2e-4
    lambda_theta: float = 1e-3
    sigma_gmo: float = 1e-4
    outer_iters: int = 12
    inner_iters: int = 20
    rel_tol: float = 1e-8

    @field_validator(
        "lambda_D", "lambda_L", "lambda_beta", "lambda_psi", "lambda_theta", "sigma_gmo", "rel_tol"
    )
    @classmethod
    def validate_positive(cls, v: float) -> float:
        if v <= 0:
            raise ValueError(f"Value must be positive, got: {v}")
        return v

    @field_validator("outer_iters", "inner_iters")
    @classmethod
    def validate_iters(cls, v: int) -> int:
        if v < 1:
            raise ValueError(f"Iteration count must be >= 1, got: {v}")
        return v


class RuntimeSettings(BaseModel):
    workers: int = 1
    max_retries: int = 3

    @field_validator("workers")
    @classmethod
    def validate_workers(cls, v: int) -> int:
        if not 1 <= v <= 256:
            raise ValueError(f"workers must be between 1 and 256, got: {v}")
        return v

    @field_validator("max_retries")
    @classmethod
    def validate_retries(cls, v: int) -> int:
        if v < 0:
            raise ValueError(f"max_retries must be >= 0, got: {v}")
        return v


class AppSettings(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix="PM3D_", env_file=None, env_nested_delimiter="__", extra="ignore"
    )

    signal: SignalSettings = Field(default_factory=SignalSettings)
    maps: MapSettings = Field(default_factory=MapSettings)
    geometry: GeometrySettings = Field(default_factory=GeometrySettings)
    fitting: FittingSettings = Field(default_factory=FittingSettings)
    runtime: RuntimeSettings = Field(default_factory=RuntimeSettings)
    logging: LogConfig = Field(default_factory=LogConfig)

    @classmethod
    def from_file_and_env(cls, config_file: Optional[str] = None) -> AppSettings:
        if config_file:
            return cls.model_validate_json(_load_toml_as_json(config_file))
        return cls()


def _load_toml_as_json(path: str) -> str:
    # stdlib tomllib on py311+, the "tomli" backport otherwise
    try:
        import tomllib as _toml  # type: ignore[import-not-found]
    except ImportError:
        try:
            import tomli as _toml  # type: ignore[no-redef]
        except ImportError as e:  # pragma: no cover
            raise RuntimeError(
                "Reading TOML config requires Python 3.11+ (tomllib) or the 'tomli' package"
            ) from e

    data = _toml.loads(Path(path).read_text(encoding="utf-8"))
    return json.dumps(data)


@lru_cache(maxsize=1)
def get_settings(config_file: Optional[str] = None) -> AppSettings:
    return AppSettings.from_file_and_env(config_file)


class WorkspacePaths(BaseModel):
    """Input locations, relative to the subject directory unless absolute."""

    model_config = ConfigDict(extra="forbid")

    frames: str = "frames"
    masks: str = "masks"
    cameras: str = "cameras.json"
    scan: str = "scan.obj"
    landmarks: str = "landmarks.json"
    model: str = "model.p3mm"
    ppg: Optional[str] = None


class StageToggles(BaseModel):
    model_config = ConfigDict(extra="forbid")

    maps: bool = True
    fit: bool = True
    bake: bool = True
    eval: bool = True


class MapParameters(BaseModel):
    model_config = ConfigDict(extra="forbid")

    k: int = 9
    segment_len_s: float = 20.0
    n_segments: int = 7
    total_len_s: float = 70.0

    @field_validator("k")
    @classmethod
    def validate_k(cls, v: int) -> int:
        if v not in ALLOWED_K:
            raise ValueError(f"k must be one of {ALLOWED_K}, got: {v}")
        return v

    @model_validator(mode="after")
    def validate_segments(self) -> MapParameters:
        if self.n_segments < 1 or self.segment_len_s <= 0:
            raise ValueError("Need at least one segment of positive length")
        if self.total_len_s < self.segment_len_s:
            raise ValueError("total_len_s must be at least segment_len_s")
        return self


class RunManifest(BaseModel):
    """One subject run. Unknown keys are rejected so that reruns are reproducible."""

    model_config = ConfigDict(extra="forbid")

    schema_version: int = MANIFEST_SCHEMA_VERSION
    subject: str
    fps: float = 30.0
    views: Optional[list[int]] = None
    paths: WorkspacePaths = Field(default_factory=WorkspacePaths)
    maps: MapParameters = Field(default_factory=MapParameters)
    stages: StageToggles = Field(default_factory=StageToggles)
    texture_resolution: int = 512
    frames_t0_unix_s: Optional[float] = None
    seed: int = 0

    @field_validator("schema_version")
    @classmethod
    def validate_schema(cls, v: int) -> int:
        if v != MANIFEST_SCHEMA_VERSION:
            raise ValueError(
                f"Unsupported manifest schema_version {v}, expected {MANIFEST_SCHEMA_VERSION}"
            )
        return v

    @field_validator("subject")
    @classmethod
    def validate_subject(cls, v: str) -> str:
        v = v.strip()
        if not v or any(c in v for c in '/\\<>:"|?*') or v in {".", ".."}:
            raise ValueError(f"Invalid subject id: {v!r}")
        return v

    @field_validator("fps")
    @classmethod
    def validate_fps(cls, v: float) -> float:
        if v <= 0:
            raise ValueError(f"fps must be positive, got: {v}")
        return v

    @field_validator("texture_resolution")
    @classmethod
    def validate_resolution(cls, v: int) -> int:
        if not 8 <= v <= 8192:
            raise ValueError(f"Texture resolution must be between 8 and 8192, got: {v}")
        return v

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def content_hash(self) -> str:
        """SHA-256 of the canonical manifest, recorded in every output sidecar."""
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()


def load_manifest(path: str | Path) -> RunManifest:
    return RunManifest.model_validate_json(Path(path).read_text(encoding="utf-8"))


def write_manifest(path: str | Path, manifest: RunManifest) -> None:
    Path(path).write_text(
        json.dumps(manifest.model_dump(mode="json"), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


class LightConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["diffuse", "ringlight"] = "diffuse"
    intensity: float = 0.6
    r0_mm: float = 400.0
    falloff_exponent: float = 2.0

    @field_validator("intensity", "r0_mm")
    @classmethod
    def validate_positive(cls, v: float) -> float:
        if v <= 0:
            raise ValueError(f"Value must be positive, got: {v}")
        return v

    @field_validator("falloff_exponent")
    @classmethod
    def validate_exponent(cls, v: float) -> float:
        if v < 0:
            raise ValueError(f"Falloff exponent must be >= 0, got: {v}")
        return v


class SpecularConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    view_id: int
    center_px: tuple[float, float]
    sigma_px: float = 6.0
    strength: float = 0.2
    drift: float = 0.0
    drift_hz: float = 0.3

    @field_validator("sigma_px")
    @classmethod
    def validate_sigma(cls, v: float) -> float:
        if v <= 0:
            raise ValueError(f"sigma_px must be positive, got: {v}")
        return v


class AutoSpecularConfig(BaseModel):
    """One view-anchored highlight per view, placed at a seeded random foreground pixel."""

    model_config = ConfigDict(extra="forbid")

    sigma_px: float = 8.0
    strength: float = 0.3
    drift: float = 0.5
    drift_hz: float = 1.9


class DiskConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    center_uv: tuple[float, float]
    radius_uv: float

    @field_validator("radius_uv")
    @classmethod
    def validate_radius(cls, v: float) -> float:
        if v < 0:
            raise ValueError(f"radius_uv must be >= 0, got: {v}")
        return v


class PerturbationConfig(DiskConfig):
    kind: Literal["scratch-boost", "blemish-drop"]


class SynthScenarioConfig(BaseModel):
    """JSON form of a synthetic scenario."""

    model_config = ConfigDict(extra="forbid")

    geometry: Literal["plane", "sphere", "head"] = "head"
    hr_bpm: float = 72.0
    amplitude: float = 0.01
    amplitude_pattern: Literal["uniform", "gradient"] = "uniform"
    phase_pattern: Literal["uniform", "split", "gradient"] = "uniform"
    phase_max_rad: float = 1.0
    noise_sigma: float = 0.0
    noise_model: Literal["shot", "gaussian"] = "shot"
    light: LightConfig = Field(default_factory=LightConfig)
    specular: list[SpecularConfig] = Field(default_factory=list)
    auto_specular: Optional[AutoSpecularConfig] = None
    inversion: Optional[DiskConfig] = None
    perturbations: list[PerturbationConfig] = Field(default_factory=list)
    n_views: int = 23
    view_step_deg: float = 15.0
    camera_distance_mm: float = 600.0
    focal_px: float = 280.0
    fps: float = 30.0
    duration_s: float = 70.0
    width: int = 160
    height: int = 128
    texture_resolution: int = 256
    segment_len_s: float = 20.0
    ppg_fs: float = 60.0
    t0_unix_s: float = 1_700_000_000.0

    @field_validator("hr_bpm")
    @classmethod
    def validate_hr(cls, v: float) -> float:
        if not 30.0 <= v <= 200.0:
            raise ValueError(f"hr_bpm must be within [30, 200], got: {v}")
        return v

    @field_validator("amplitude", "noise_sigma")
    @classmethod
    def validate_non_negative(cls, v: float) -> float:
        if v < 0:
            raise ValueError(f"Value must be >= 0, got: {v}")
        return v

    @field_validator("n_views", "width", "height", "texture_resolution")
    @classmethod
    def validate_count(cls, v: int) -> int:
        if v < 1:
            raise ValueError(f"Value must be >= 1, got: {v}")
        return v

    @field_validator("fps", "duration_s", "camera_distance_mm", "focal_px", "ppg_fs")
    @classmethod
    def validate_positive(cls, v: float) -> float:
        if v <= 0:
            raise ValueError(f"Value must be positive, got: {v}")
        return v

    @model_validator(mode="after")
    def validate_duration(self) -> SynthScenarioConfig:
        if self.duration_s < self.segment_len_s:
            raise ValueError("duration_s must cover at least one segment")
        return self
