"""
Configuration

One RunConfig per CLI invocation, merged from (lowest to highest priority):
1. Field defaults below
2. Environment variables (MULTIFLOOR_ prefix, "__" between section and key), .env file
3. A config file of `section.key = value` lines
4. Command-line flags

Unknown sections and keys are rejected.
"""

import logging
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from .errors import InvalidInputError

logger = logging.getLogger(__name__)


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class BaroConfig(_Section):
    """Barometric altitude and floor-tracking parameters."""
    window: int = Field(100, ge=1)
    p_cri: float = Field(101325.0, gt=0)  # reference pressure at the start pose
    floor_threshold: float = Field(2.5, gt=0)
    nominal_floor_height: float = Field(3.64, gt=0)


class ElevatorDetectConfig(_Section):
    """In-cab detection threshold and hollow-cuboid synthesis geometry."""
    range_sq_threshold: float = Field(9.0, gt=0)
    footprint: Tuple[float, float] = (1.0, 1.0)  # half-extents a, b
    shell_spacing: float = Field(0.1, gt=0)

    @model_validator(mode="after")
    def _positive_footprint(self) -> "ElevatorDetectConfig":
        if min(self.footprint) <= 0:
            raise ValueError("footprint half-extents must be positive")
        return self


class LoopDbConfig(_Section):
    """Scan-context descriptor, ring-key search and alignment parameters."""
    n_rings: int = Field(20, ge=1)
    n_sectors: int = Field(60, ge=1)
    l_max: float = Field(40.0, gt=0)
    top_k: int = Field(10, ge=1)
    accept_threshold: float = Field(0.20, gt=0, lt=1)
    exclusion_gap: int = Field(50, ge=1)
    use_floor_labels: bool = True
    sensor_height: float = Field(0.5, ge=0)
    icp_max_iterations: int = Field(50, ge=1)
    icp_max_rms: float = Field(0.5, gt=0)
    icp_voxel_size: float = Field(0.2, gt=0)
    icp_max_correspondence: float = Field(2.0, gt=0)


class OptimizeParams(_Section):
    """Levenberg-Marquardt solver settings."""
    max_iterations: int = Field(100, ge=1)
    tolerance: float = Field(1e-9, gt=0)  # relative cost change
    initial_damping: float = Field(1e-4, gt=0)


class GraphConfig(OptimizeParams):
    """Solver settings plus the noise model used to weight each constraint type."""
    odom_sigma_xy: float = Field(0.05, gt=0)
    odom_sigma_z: float = Field(0.05, gt=0)
    odom_sigma_rot: float = Field(0.01, gt=0)
    elevator_odom_sigma_z: float = Field(10.0, gt=0)
    sigma_z: float = Field(0.3, gt=0)
    prior_sigma: float = Field(1e-3, gt=0)
    loop_sigma_xy: float = Field(0.1, gt=0)
    loop_sigma_yaw: float = Field(0.05, gt=0)
    loop_weak_sigma: float = Field(10.0, gt=0)
    use_elevation_constraints: bool = True

    def optimize_params(self) -> OptimizeParams:
        return OptimizeParams(
            max_iterations=self.max_iterations,
            tolerance=self.tolerance,
            initial_damping=self.initial_damping,
        )


class VoxelizeConfig(_Section):
    """Voxel grid and ground/stair extraction parameters."""
    max_ground_channel: int = Field(4, ge=0, le=15)
    min_step_rise: float = Field(0.15, gt=0)
    max_step_range: float = Field(4.0, gt=0)
    face_tolerance: float = Field(0.1, ge=0)
    azimuth_tolerance_deg: float = Field(0.5, gt=0)
    surface_tolerance: float = Field(0.05, ge=0)
    n_z: int = Field(5, ge=1)
    resolution: float = Field(0.3, gt=0)
    origin: Tuple[float, float, float] = (0.0, 0.0, 0.0)


class PlanConfig(_Section):
    """Robot/elevator speeds and elevator cab positions for planning."""
    v_rbt: float = Field(1.0, gt=0)
    v_elv: float = Field(1.0, gt=0)
    elevator_z: Dict[str, float] = Field(default_factory=dict)
    snap_radius: float = Field(1.0, gt=0)


class RunConfig(BaseSettings):
    """Merged configuration for one command."""
    model_config = SettingsConfigDict(
        env_prefix="MULTIFLOOR_",
        env_nested_delimiter="__",
        env_file=".env",
        extra="forbid",
    )

    log_level: str = "INFO"
    baro: BaroConfig = Field(default_factory=BaroConfig)
    elevator: ElevatorDetectConfig = Field(default_factory=ElevatorDetectConfig)
    loop: LoopDbConfig = Field(default_factory=LoopDbConfig)
    graph: GraphConfig = Field(default_factory=GraphConfig)
    voxel: VoxelizeConfig = Field(default_factory=VoxelizeConfig)
    plan: PlanConfig = Field(default_factory=PlanConfig)


# ============================================
# CONFIG FILE
# ============================================

def _parse_value(raw: str) -> Union[str, list, dict]:
    """
    Turns a config-file value into what pydantic should coerce.

    - "a=1, b=2" -> {"a": "1", "b": "2"}
    - "1.0, 2.0" -> ["1.0", "2.0"]
    - anything else stays a string
    """
    raw = raw.strip()
    if "=" in raw:
        mapping = {}
        for item in raw.split(","):
            if not item.strip():
                continue
            key, _, value = item.partition("=")
            mapping[key.strip()] = value.strip()
        return mapping
    if "," in raw:
        return [part.strip() for part in raw.split(",")]
    return raw


def parse_config_text(text: str) -> Dict[str, Any]:
    """
    Parses `section.key = value` lines into a nested dict.

    Args:
        text: Config file contents

    Returns:
        {"section": {"key": value}} plus top-level keys without a section

    Raises:
        InvalidInputError: on a line without "=" or an empty key
    """
    merged: Dict[str, Any] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        key, sep, value = stripped.partition("=")
        key = key.strip()
        if not sep or not key:
            raise InvalidInputError(f"config line {line_no}: expected 'section.key = value'")
        section, dot, name = key.partition(".")
        if dot:
            merged.setdefault(section, {})[name] = _parse_value(value)
        else:
            merged[section] = _parse_value(value)
    return merged


def _deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    result = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(result.get(key), dict):
            result[key] = _deep_merge(result[key], value)
        else:
            result[key] = value
    return result


def load_config(
    config_file: Optional[Union[str, Path]] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> RunConfig:
    """
    Builds the RunConfig for a command.

    Args:
        config_file: Optional path to a `section.key = value` file
        overrides: Nested dict from command-line flags (wins over the file)

    Returns:
        Validated RunConfig

    Raises:
        InvalidInputError: unreadable file, unknown key or invalid value
    """
    values: Dict[str, Any] = {}
    if config_file is not None:
        path = Path(config_file)
        if not path.is_file():
            raise InvalidInputError(f"config file not found: {path}")
        values = parse_config_text(path.read_text())
        logger.info(f"Loaded config file {path} ({len(values)} sections)")
    if overrides:
        values = _deep_merge(values, overrides)
    try:
        return RunConfig(**values)
    except ValidationError as e:
        raise InvalidInputError(f"invalid configuration: {e}") from e
