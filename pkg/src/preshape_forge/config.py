"""Bundled defaults file parsing (ini-style sections of key = value)."""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import GenerationParams
from .scene import RandomizationSpec, WorkspaceConfig
from .taxonomy import DATA_DIR

DEFAULTS_PATH = DATA_DIR / "defaults.cfg"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunDefaults:
    workspace: WorkspaceConfig
    randomization: RandomizationSpec
    generation: GenerationParams
    seed: int
    workers: int


def _floats(s: str, n: int) -> tuple[float, ...]:
    vals = tuple(float(v) for v in s.split())
    if len(vals) != n:
        raise ConfigError(f"expected {n} numbers, got {s!r}")
    return vals


def load_defaults(path: str | Path = DEFAULTS_PATH) -> RunDefaults:
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise ConfigError(f"cannot read defaults file {path}")
    try:
        w = cp["workspace"]
        workspace = WorkspaceConfig(
            room_extents=_floats(w["room_extents"], 3),
            table_top_height=float(w["table_top_height"]),
            table_extents=_floats(w["table_extents"], 2),
            start_plane_distance=float(w["start_plane_distance"]),
            start_plane_window=_floats(w["start_plane_window"], 2),
            camera_fov_deg=float(w["camera_fov_deg"]),
            image_size=tuple(int(v) for v in w["image_size"].split()),
        )
        r = cp["randomization"]
        yaw_deg = _floats(r["object_yaw_range_deg"], 2)
        randomization = RandomizationSpec(
            wall_textures=tuple(r["wall_textures"].split()),
            floor_textures=tuple(r["floor_textures"].split()),
            table_textures=tuple(r["table_textures"].split()),
            light_intensity_range=_floats(r["light_intensity_range"], 2),
            light_direction_cone_deg=float(r["light_direction_cone_deg"]),
            object_yaw_range=tuple(np.radians(yaw_deg)),
            object_xy_jitter=_floats(r["object_xy_jitter"], 2),
        )
        g = cp["generation"]
        generation = GenerationParams(
            per_pair=int(g["per_pair"]),
            duration_s=float(g["duration_s"]),
            fps=float(g["fps"]),
            no_grasp_tail_s=float(g["no_grasp_tail_s"]),
            max_attempts=int(g["max_attempts"]),
            visibility_retries=int(g["visibility_retries"]),
        )
        return RunDefaults(workspace, randomization, generation,
                           seed=int(g["seed"]), workers=int(g["workers"]))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
