"""Randomized scene sampling: room, table, object pose, textures, light.

Every draw happens in a documented fixed order from a Philox stream keyed
by the caller's seed, so a SceneInstance is a pure function of
(config, randomization, object, seed) and parallel generation cannot
perturb it.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import streams
from .geometry import (
    RigidTransform,
    load_obj,
    look_rotation,
    quat_from_axis_angle,
    quat_from_file,
    quat_to_mat,
)
from .renderer import (
    CameraIntrinsics,
    RenderScene,
    object_pixel_stats,
    parse_texture,
    render_frame,
)
from .taxonomy import GraspTaxonomy, ObjectSpec, PartSpec

# The sampling window sits this far above the table top so start views look
# down onto the object rather than edge-on across the surface.
START_WINDOW_LIFT = 0.15

# Face normals steeper than this (w.r.t. the horizontal plane) do not pick
# a preferred table border; the border is drawn from the stream instead.
_HORIZONTAL_EPS = 0.2


class SceneError(ValueError):
    pass


@dataclass(frozen=True)
class WorkspaceConfig:
    room_extents: tuple[float, float, float] = (5.0, 5.0, 3.0)
    table_top_height: float = 0.75
    table_extents: tuple[float, float] = (1.0, 1.0)
    start_plane_distance: float = 0.45
    start_plane_window: tuple[float, float] = (0.7, 0.4)
    camera_fov_deg: float = 69.0
    image_size: tuple[int, int] = (224, 224)

    def __post_init__(self):
        if min(self.room_extents) <= 0 or self.table_top_height <= 0 \
                or min(self.table_extents) <= 0 \
                or self.start_plane_distance <= 0 \
                or min(self.start_plane_window) <= 0:
            raise SceneError("workspace lengths must be positive")
        if not 10.0 < self.camera_fov_deg < 170.0:
            raise SceneError("fov outside (10, 170) degrees")

    def intrinsics(self) -> CameraIntrinsics:
        return CameraIntrinsics(self.image_size, self.camera_fov_deg)


@dataclass(frozen=True)
class RandomizationSpec:
    wall_textures: tuple[str, ...] = (
        "flat:c8b8a0", "flat:9fb4c7", "checker:d8d8d8:b0b0c8:40",
        "flat:b5c9a8", "checker:cfc4b0:a89f90:25",
    )
    floor_textures: tuple[str, ...] = (
        "checker:8a7b66:6e6258:30", "flat:7d7468", "checker:9c9c9c:787878:50",
    )
    table_textures: tuple[str, ...] = (
        "flat:a0784a", "flat:c0c0c0", "checker:b08858:96703f:10",
        "flat:8899aa",
    )
    light_intensity_range: tuple[float, float] = (0.6, 1.3)
    light_direction_cone_deg: float = 35.0
    object_yaw_range: tuple[float, float] = (0.0, 2.0 * np.pi)
    object_xy_jitter: tuple[float, float] = (0.12, 0.12)

    def __post_init__(self):
        for pool in (self.wall_textures, self.floor_textures, self.table_textures):
            if not pool:
                raise SceneError("texture pool must be non-empty")
        lo, hi = self.light_intensity_range
        if hi < lo:
            raise SceneError("empty light intensity interval")
        if self.object_yaw_range[1] < self.object_yaw_range[0]:
            raise SceneError("empty yaw interval")
        if not 0.0 <= self.light_direction_cone_deg <= 90.0:
            raise SceneError("light cone outside [0, 90] degrees")


@dataclass(frozen=True)
class SceneInstance:
    seed: int
    object_name: str
    object_pose: RigidTransform  # resting on the table top
    wall_texture: str
    floor_texture: str
    table_texture: str
    light_intensity: float
    light_direction: tuple[float, float, float]


def object_color(name: str) -> np.ndarray:
    """Stable, distinct flat color per object, derived from the name."""
    h = streams.derive_seed(0x0B1EC7, *name.encode("utf-8"))
    hue = (h & 0xFFFF) / 0xFFFF * 6.0
    sat = 0.45 + ((h >> 16) & 0xFF) / 255.0 * 0.45
    val = 0.55 + ((h >> 24) & 0xFF) / 255.0 * 0.4
    c = val * sat
    x = c * (1 - abs(hue % 2 - 1))
    sector = [(c, x, 0), (x, c, 0), (0, c, x), (0, x, c), (x, 0, c), (c, 0, x)]
    r, g, b = sector[min(5, int(hue))]
    m = val - c
    return np.array([r + m, g + m, b + m])


_MESH_CACHE: dict[str, object] = {}


def load_object_mesh(spec: ObjectSpec):
    key = str(spec.mesh_path)
    if key not in _MESH_CACHE:
        _MESH_CACHE[key] = load_obj(spec.mesh_path)
    return _MESH_CACHE[key]


def sample_scene(cfg: WorkspaceConfig, rand: RandomizationSpec,
                 taxonomy: GraspTaxonomy, object_name: str,
                 seed: int) -> SceneInstance:
    """Draw one scene. Draw order: yaw, xy jitter, textures, light."""
    spec = taxonomy.object(object_name)
    mesh = load_object_mesh(spec)
    gen = streams.generator(seed)

    yaw = float(gen.uniform(*rand.object_yaw_range)) \
        if rand.object_yaw_range[1] > rand.object_yaw_range[0] \
        else rand.object_yaw_range[0]
    jx, jy = rand.object_xy_jitter
    x = float(gen.uniform(-jx, jx)) if jx > 0 else 0.0
    y = float(gen.uniform(-jy, jy)) if jy > 0 else 0.0

    # Resting pose: object origin on the table plane, yaw about +z only.
    pose = RigidTransform(quat_from_axis_angle((0, 0, 1), yaw),
                          np.array([x, y, cfg.table_top_height]))
    verts = pose.apply(mesh.vertices)
    tx, ty = cfg.table_extents
    if np.any(np.abs(verts[:, 0]) > tx / 2) or np.any(np.abs(verts[:, 1]) > ty / 2):
        raise SceneError(
            f"object {object_name} footprint does not fit the table "
            f"(jitter {rand.object_xy_jitter} too large?)")

    wall = rand.wall_textures[int(gen.integers(len(rand.wall_textures)))]
    floor = rand.floor_textures[int(gen.integers(len(rand.floor_textures)))]
    table = rand.table_textures[int(gen.integers(len(rand.table_textures)))]

    lo, hi = rand.light_intensity_range
    intensity = float(gen.uniform(lo, hi)) if hi > lo else lo
    # Uniform direction in a cone around straight down.
    cos_max = np.cos(np.radians(rand.light_direction_cone_deg))
    cz = float(gen.uniform(cos_max, 1.0))
    az = float(gen.uniform(0.0, 2.0 * np.pi))
    sz = np.sqrt(max(0.0, 1.0 - cz * cz))
    light = (sz * np.cos(az), sz * np.sin(az), -cz)

    return SceneInstance(seed, object_name, pose, wall, floor, table,
                         intensity, light)


def part_boxes_world(spec: ObjectSpec, pose: RigidTransform):
    """[(part_id, OrientedBox, GraspType)] for all of the object's parts."""
    return [(p.part_id, p.box_in_frame(pose), p.grasp_type) for p in spec.parts]


def build_render_scene(cfg: WorkspaceConfig, taxonomy: GraspTaxonomy,
                       scene: SceneInstance) -> RenderScene:
    spec = taxonomy.object(scene.object_name)
    mesh = load_object_mesh(spec)
    world = mesh.transformed(scene.object_pose)
    boxes = []
    for k, (_pid, box, _g) in enumerate(part_boxes_world(spec, scene.object_pose)):
        boxes.append((k, quat_to_mat(box.pose.rotation), box.pose.translation,
                      box.half_extents))
    return RenderScene(
        room_extents=np.asarray(cfg.room_extents, dtype=float),
        table_extents=np.asarray(cfg.table_extents, dtype=float),
        table_top=cfg.table_top_height,
        mesh_vertices=world.vertices,
        mesh_triangles=world.triangles,
        part_boxes=boxes,
        wall=parse_texture(scene.wall_texture),
        floor=parse_texture(scene.floor_texture),
        table=parse_texture(scene.table_texture),
        object_color=object_color(scene.object_name),
        light_dir=np.asarray(scene.light_direction, dtype=float),
        light_intensity=scene.light_intensity,
    )


# Camera is rigidly offset from the palm reference point ("below the
# wrist"); identity rotation, so camera forward == palm normal.
CAMERA_OFFSET = RigidTransform(np.array([1.0, 0.0, 0.0, 0.0]),
                               np.array([0.0, -0.03, 0.0]))


def camera_pose(palm: RigidTransform) -> RigidTransform:
    return palm.compose(CAMERA_OFFSET)


_BORDERS = ((0, 1.0), (0, -1.0), (1, 1.0), (1, -1.0))  # (axis, sign)


def start_plane_border(cfg: WorkspaceConfig, approach_normal_world,
                       gen: np.random.Generator) -> tuple[int, float]:
    """Table border nearest the approach side of the target face.

    Near-vertical normals have no preferred side; one is drawn from the
    stream so top-grasp approaches still vary.
    """
    n = np.asarray(approach_normal_world, dtype=float)
    if np.hypot(n[0], n[1]) < _HORIZONTAL_EPS:
        return _BORDERS[int(gen.integers(4))]
    axis = 0 if abs(n[0]) >= abs(n[1]) else 1
    return axis, 1.0 if n[axis] > 0 else -1.0


class VisibilityError(SceneError):
    """Start-pose sampling could not satisfy the visibility predicate."""


def sample_start_pose(cfg: WorkspaceConfig, render_scene: RenderScene,
                      target_center, approach_normal_world, seed: int,
                      max_retries: int = 64) -> RigidTransform:
    """Sample the palm start pose on the start plane.

    The position lies on the vertical plane start_plane_distance out from
    the chosen table border, inside the configured window; the palm looks
    at the target box center. Candidates are redrawn until the rendered
    start view contains at least one object pixel and one background
    pixel.
    """
    gen = streams.generator(seed)
    target = np.asarray(target_center, dtype=float)
    intr = cfg.intrinsics()
    w_width, w_height = cfg.start_plane_window
    z_lo = cfg.table_top_height + START_WINDOW_LIFT

    for _ in range(max_retries):
        axis, sign = start_plane_border(cfg, approach_normal_world, gen)
        u = float(gen.uniform(-w_width / 2, w_width / 2))
        v = float(gen.uniform(0.0, w_height))
        pos = np.empty(3)
        pos[axis] = sign * (cfg.table_extents[axis] / 2 + cfg.start_plane_distance)
        pos[1 - axis] = np.clip(target[1 - axis] + u,
                                -cfg.room_extents[1 - axis] / 2 + 0.1,
                                cfg.room_extents[1 - axis] / 2 - 0.1)
        pos[2] = z_lo + v
        look = target - pos
        palm = RigidTransform(look_rotation(look), pos)
        cam = camera_pose(palm)
        fr = render_frame(render_scene, cam.rotation, cam.translation, intr,
                          labels_only=True)
        obj_px, bg_px = object_pixel_stats(fr)
        if obj_px >= 1 and bg_px >= 1:
            return palm
    raise VisibilityError(
        f"no visible start pose after {max_retries} tries (degenerate scene)")


# ---------------------------------------------------------------------------
# Scene descriptor files (key=value, one per sequence directory)
# ---------------------------------------------------------------------------

def write_scene_descriptor(path: str | Path, scene: SceneInstance) -> None:
    p = scene.object_pose
    q = p.rotation
    t = p.translation
    lines = [
        "format_version=1",
        f"seed={scene.seed}",
        f"object={scene.object_name}",
        "pose=" + " ".join(_fmt(v) for v in (*t, *q)),
        f"wall_texture={scene.wall_texture}",
        f"floor_texture={scene.floor_texture}",
        f"table_texture={scene.table_texture}",
        f"light_intensity={_fmt(scene.light_intensity)}",
        "light_direction=" + " ".join(_fmt(v) for v in scene.light_direction),
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_scene_descriptor(path: str | Path) -> SceneInstance:
    kv: dict[str, str] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        if not value and "=" not in line:
            raise SceneError(f"{path}: malformed line {line!r}")
        kv[key.strip()] = value.strip()
    try:
        if kv.get("format_version") != "1":
            raise SceneError(f"unsupported scene format {kv.get('format_version')!r}")
        pose = [float(v) for v in kv["pose"].split()]
        if len(pose) != 7:
            raise SceneError("pose must have 7 floats")
        light = tuple(float(v) for v in kv["light_direction"].split())
        if len(light) != 3:
            raise SceneError("light_direction must have 3 floats")
        return SceneInstance(
            seed=int(kv["seed"]),
            object_name=kv["object"],
            object_pose=RigidTransform(quat_from_file(pose[3:7]),
                                       np.array(pose[0:3])),
            wall_texture=kv["wall_texture"],
            floor_texture=kv["floor_texture"],
            table_texture=kv["table_texture"],
            light_intensity=float(kv["light_intensity"]),
            light_direction=light,
        )
    except KeyError as exc:
        raise SceneError(f"{path}: missing key {exc}") from exc
    except ValueError as exc:
        raise SceneError(f"{path}: {exc}") from exc


def _fmt(x: float) -> str:
    return f"{x:.9g}"
