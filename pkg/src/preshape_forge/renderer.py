"""Deterministic ray-cast renderer: RGB preview, depth and part labels.

Casts one primary ray per pixel against the closed room, the table box,
the object mesh and (label channel only, on request) the part boxes.
Flat Lambert shading with a single directional light; texture ids map to
flat colors or world-space checkers. Identical inputs produce
byte-identical rasters, independent of any parallel scheduling, since
every pixel is a pure function of the scene.

Label values:
  0 no hit (reserved; unreachable inside a closed room except the
    65.535 m depth clamp), 1 table, 2 object mesh, 3 floor, 4 ceiling,
  5-8 walls (+x, -x, +y, -y), 10+k part box k.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import quat_to_mat

LABEL_NO_HIT = 0
LABEL_TABLE = 1
LABEL_OBJECT = 2
LABEL_FLOOR = 3
LABEL_CEILING = 4
LABEL_WALL_BASE = 5
LABEL_PART_BASE = 10

_AMBIENT = 0.35
_RAY_CHUNK = 2048


class RenderError(ValueError):
    pass


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole camera, square pixels, principal point at the image center."""

    image_size: tuple[int, int] = (224, 224)
    fov_deg: float = 69.0

    def __post_init__(self):
        w, h = self.image_size
        if w < 2 or h < 2:
            raise RenderError("image size too small")
        if not 10.0 < self.fov_deg < 170.0:
            raise RenderError("fov outside (10, 170) degrees")

    @property
    def focal_px(self) -> float:
        w = self.image_size[0]
        return (w / 2.0) / np.tan(np.radians(self.fov_deg) / 2.0)


_RAY_CACHE: dict[tuple[int, int, float], np.ndarray] = {}


def camera_rays(intr: CameraIntrinsics) -> np.ndarray:
    """Unit ray directions in the camera frame, shape (H*W, 3), row-major."""
    key = (*intr.image_size, intr.fov_deg)
    if key not in _RAY_CACHE:
        w, h = intr.image_size
        f = intr.focal_px
        u = (np.arange(w) + 0.5) - w / 2.0
        v = (np.arange(h) + 0.5) - h / 2.0
        uu, vv = np.meshgrid(u, v)  # +x right, +y down, +z forward
        d = np.stack([uu, vv, np.full_like(uu, f)], axis=-1).reshape(-1, 3)
        _RAY_CACHE[key] = d / np.linalg.norm(d, axis=1, keepdims=True)
    return _RAY_CACHE[key]


@dataclass(frozen=True)
class Surface:
    """Appearance of one scene surface: a parsed texture plus its uv plane."""

    kind: str             # "flat" or "checker"
    color_a: np.ndarray   # rgb in [0, 1]
    color_b: np.ndarray
    scale: float          # checker square size in meters

    def base_color(self, points: np.ndarray, axes: tuple[int, int]) -> np.ndarray:
        if self.kind == "flat":
            return np.broadcast_to(self.color_a, points.shape).copy()
        ij = np.floor(points[:, list(axes)] / self.scale).astype(np.int64)
        odd = (ij[:, 0] + ij[:, 1]) & 1
        return np.where(odd[:, None] == 0, self.color_a, self.color_b)


def parse_texture(texture_id: str) -> Surface:
    """Texture ids are self-describing: flat:RRGGBB or checker:A:B:cm."""
    parts = texture_id.split(":")
    try:
        if parts[0] == "flat" and len(parts) == 2:
            return Surface("flat", _hex_rgb(parts[1]), _hex_rgb(parts[1]), 1.0)
        if parts[0] == "checker" and len(parts) == 4:
            return Surface("checker", _hex_rgb(parts[1]), _hex_rgb(parts[2]),
                           float(parts[3]) / 100.0)
    except ValueError:
        pass
    raise RenderError(f"unrecognized texture id {texture_id!r}")


def _hex_rgb(s: str) -> np.ndarray:
    if len(s) != 6:
        raise ValueError(s)
    return np.array([int(s[i:i + 2], 16) for i in (0, 2, 4)], dtype=float) / 255.0


@dataclass
class RenderScene:
    """World geometry and appearance, ready for ray casting."""

    room_extents: np.ndarray          # (3,) full x/y sizes and height
    table_extents: np.ndarray         # (2,) full x/y sizes
    table_top: float
    mesh_vertices: np.ndarray         # (V, 3) world frame
    mesh_triangles: np.ndarray        # (T, 3) int
    part_boxes: list[tuple[int, np.ndarray, np.ndarray, np.ndarray]]
    # (label offset k, rotation matrix, center, half extents), world frame
    wall: Surface
    floor: Surface
    table: Surface
    object_color: np.ndarray          # rgb in [0, 1]
    light_dir: np.ndarray             # unit, direction light travels
    light_intensity: float = 1.0

    def __post_init__(self):
        tri = self.mesh_triangles
        a = self.mesh_vertices[tri[:, 0]]
        self._tri_a = a
        self._tri_e1 = self.mesh_vertices[tri[:, 1]] - a
        self._tri_e2 = self.mesh_vertices[tri[:, 2]] - a
        n = np.cross(self._tri_e1, self._tri_e2)
        self._tri_n = n / np.linalg.norm(n, axis=1, keepdims=True)
        self._mesh_lo = self.mesh_vertices.min(axis=0)
        self._mesh_hi = self.mesh_vertices.max(axis=0)


def _ray_aabb_mask(o, dirs, lo, hi):
    """Rays whose [0, inf) slab interval intersects the AABB."""
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / dirs
        t0 = (lo - o) * inv
        t1 = (hi - o) * inv
    tmin = np.nanmax(np.minimum(t0, t1), axis=1)
    tmax = np.nanmin(np.maximum(t0, t1), axis=1)
    # Axis-parallel rays outside a slab produce +-inf pairs that already
    # collapse the interval, so no special casing is needed.
    return (tmax >= np.maximum(tmin, 0.0))


def _ray_box_enter(o, dirs, lo, hi):
    """Entry distance into an AABB for each ray; inf when missed."""
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / dirs
        t0 = (lo - o) * inv
        t1 = (hi - o) * inv
    near = np.minimum(t0, t1)
    far = np.maximum(t0, t1)
    near = np.where(np.isnan(near), -np.inf, near)
    far = np.where(np.isnan(far), np.inf, far)
    tmin = near.max(axis=1)
    tmax = far.min(axis=1)
    axis = near.argmax(axis=1)
    hit = (tmax >= np.maximum(tmin, 0.0)) & (tmin > 1e-9)
    return np.where(hit, tmin, np.inf), axis


def _ray_mesh(o, dirs, scene: RenderScene):
    """Nearest mesh hit distance and triangle index per ray (inf/-1 if none)."""
    n_rays = len(dirs)
    t_best = np.full(n_rays, np.inf)
    tri_best = np.full(n_rays, -1, dtype=np.int64)
    if len(scene.mesh_triangles) == 0:
        return t_best, tri_best
    cand = np.flatnonzero(_ray_aabb_mask(o, dirs, scene._mesh_lo, scene._mesh_hi))
    if cand.size == 0:
        return t_best, tri_best
    tvec = o - scene._tri_a                      # (T, 3)
    qvec = np.cross(tvec, scene._tri_e1)         # (T, 3)
    t_num = np.einsum("tj,tj->t", scene._tri_e2, qvec)
    eps = 1e-10
    for s in range(0, cand.size, _RAY_CHUNK):
        idx = cand[s:s + _RAY_CHUNK]
        d = dirs[idx]                            # (R, 3)
        pvec = np.cross(d[:, None, :], scene._tri_e2[None, :, :])  # (R, T, 3)
        det = np.einsum("rtj,tj->rt", pvec, scene._tri_e1)
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / det
        u = np.einsum("tj,rtj->rt", tvec, pvec) * inv
        v = (d @ qvec.T) * inv
        t = t_num[None, :] * inv
        ok = (np.abs(det) > 1e-14) & (u >= -eps) & (v >= -eps) \
            & (u + v <= 1.0 + eps) & (t > 1e-9)
        t = np.where(ok, t, np.inf)
        k = t.argmin(axis=1)
        tmin = t[np.arange(len(idx)), k]
        t_best[idx] = tmin
        tri_best[idx] = np.where(np.isfinite(tmin), k, -1)
    return t_best, tri_best


@dataclass
class FrameRender:
    """Rasters of one rendered frame; rgb is None for label-only renders."""

    rgb: np.ndarray | None
    depth: np.ndarray  # uint16, millimeters, 0 = no hit
    labels: np.ndarray  # uint8


def render_frame(scene: RenderScene, cam_rotation, cam_position,
                 intr: CameraIntrinsics, include_part_boxes: bool = False,
                 labels_only: bool = False):
    """Cast primary rays; returns a FrameRender (labels only when asked).

    cam_rotation: unit quaternion; cam_position: world point. Nearest hit
    wins; part boxes affect only the label channel.
    """
    w, h = intr.image_size
    o = np.asarray(cam_position, dtype=float)
    dirs = camera_rays(intr) @ quat_to_mat(cam_rotation).T
    n_rays = len(dirs)

    # Closed room: the camera is inside, so every ray exits through a face.
    rx, ry, rz = scene.room_extents
    lo = np.array([-rx / 2, -ry / 2, 0.0])
    hi = np.array([rx / 2, ry / 2, rz])
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / dirs
        t_planes = np.where(dirs > 0, (hi - o) * inv, (lo - o) * inv)
    t_planes = np.where(np.isnan(t_planes) | (t_planes <= 0), np.inf, t_planes)
    room_axis = t_planes.argmin(axis=1)
    t_room = t_planes[np.arange(n_rays), room_axis]
    room_sign = np.take_along_axis(dirs, room_axis[:, None], axis=1)[:, 0] > 0
    room_label = np.where(
        room_axis == 2,
        np.where(room_sign, LABEL_CEILING, LABEL_FLOOR),
        LABEL_WALL_BASE + room_axis * 2 + (~room_sign).astype(np.int64))
    room_normal_axis = room_axis
    room_normal_sign = np.where(room_sign, -1.0, 1.0)  # inward facing

    # Table: solid box from the floor to the top surface.
    tx, ty = scene.table_extents
    t_table, table_axis = _ray_box_enter(
        o, dirs, np.array([-tx / 2, -ty / 2, 0.0]),
        np.array([tx / 2, ty / 2, scene.table_top]))

    # Object mesh.
    t_mesh, tri_idx = _ray_mesh(o, dirs, scene)

    depth_t = t_room
    label = room_label.astype(np.uint8)
    kind = np.zeros(n_rays, dtype=np.uint8)  # 0 room, 1 table, 2 mesh
    closer = t_table < depth_t
    depth_t = np.where(closer, t_table, depth_t)
    label[closer] = LABEL_TABLE
    kind[closer] = 1
    closer = t_mesh < depth_t
    depth_t = np.where(closer, t_mesh, depth_t)
    label[closer] = LABEL_OBJECT
    kind[closer] = 2

    depth_mm = np.minimum(np.rint(depth_t * 1000.0), 65535.0).astype(np.uint16)

    def finish(label_flat: np.ndarray, rgb: np.ndarray | None) -> FrameRender:
        # Part boxes affect only the label channel, applied last so the
        # shading below still sees the surface labels.
        if include_part_boxes:
            for k, rot, center, half in scene.part_boxes:
                od = (o - center) @ rot
                dd = dirs @ rot
                t_box, _ = _ray_box_enter(od, dd, -half, half)
                label_flat = np.where(t_box < depth_t,
                                      np.uint8(LABEL_PART_BASE + k), label_flat)
        return FrameRender(rgb, depth_mm.reshape(h, w), label_flat.reshape(h, w))

    if labels_only:
        return finish(label, None)

    # Shading: per-pixel surface normal and base color.
    points = o + dirs * depth_t[:, None]
    normal = np.zeros((n_rays, 3))
    room_rows = kind == 0
    normal[room_rows, room_normal_axis[room_rows]] = room_normal_sign[room_rows]
    table_rows = np.flatnonzero(kind == 1)
    if table_rows.size:
        ax = table_axis[table_rows]
        sgn = -np.sign(np.take_along_axis(dirs[table_rows], ax[:, None], 1))[:, 0]
        normal[table_rows, ax] = sgn
    mesh_rows = np.flatnonzero(kind == 2)
    if mesh_rows.size:
        n = scene._tri_n[tri_idx[mesh_rows]]
        facing = np.einsum("ij,ij->i", n, dirs[mesh_rows]) > 0
        normal[mesh_rows] = np.where(facing[:, None], -n, n)

    base = np.empty((n_rays, 3))
    floor_m = label == LABEL_FLOOR
    ceil_m = label == LABEL_CEILING
    wall_m = (label >= LABEL_WALL_BASE) & (label < LABEL_WALL_BASE + 4)
    base[floor_m] = scene.floor.base_color(points[floor_m], (0, 1))
    base[ceil_m] = 0.85
    xw = wall_m & (room_normal_axis == 0)
    yw = wall_m & (room_normal_axis == 1)
    base[xw] = scene.wall.base_color(points[xw], (1, 2))
    base[yw] = scene.wall.base_color(points[yw], (0, 2))
    tb = kind == 1
    base[tb] = scene.table.base_color(points[tb], (0, 1))
    base[kind == 2] = scene.object_color

    lambert = np.maximum(0.0, -normal @ scene.light_dir)
    shade = np.clip(_AMBIENT + (1.0 - _AMBIENT) * lambert * scene.light_intensity,
                    0.0, 1.0)
    rgb = np.clip(base * shade[:, None] * 255.0, 0.0, 255.0).astype(np.uint8)
    return finish(label, rgb.reshape(h, w, 3))


def object_pixel_stats(fr: FrameRender) -> tuple[int, int]:
    """(object pixels, background pixels); background = any non-object hit."""
    labels = fr.labels
    obj = int(np.count_nonzero(labels == LABEL_OBJECT))
    bg = int(np.count_nonzero((labels != LABEL_NO_HIT) & (labels != LABEL_OBJECT)))
    return obj, bg


# ---------------------------------------------------------------------------
# Portable raster formats
# ---------------------------------------------------------------------------

def write_ppm(path: str | Path, rgb: np.ndarray) -> None:
    h, w, _ = rgb.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(rgb, dtype=np.uint8).tobytes())


def write_pgm16(path: str | Path, img: np.ndarray) -> None:
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        fh.write(img.astype(">u2").tobytes())


def write_pgm8(path: str | Path, img: np.ndarray) -> None:
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(img, dtype=np.uint8).tobytes())


def _read_header(fh, magic: bytes):
    if fh.read(2) != magic:
        raise RenderError(f"expected {magic!r} raster")
    vals = []
    while len(vals) < 3:
        line = fh.readline()
        if not line:
            raise RenderError("truncated raster header")
        body = line.split(b"#", 1)[0].split()
        vals.extend(int(v) for v in body)
    return vals[0], vals[1], vals[2]


def read_ppm(path: str | Path) -> np.ndarray:
    with open(path, "rb") as fh:
        w, h, maxval = _read_header(fh, b"P6")
        if maxval != 255:
            raise RenderError("only maxval 255 PPM supported")
        data = np.frombuffer(fh.read(w * h * 3), dtype=np.uint8)
    return data.reshape(h, w, 3)


def read_pgm(path: str | Path) -> np.ndarray:
    with open(path, "rb") as fh:
        w, h, maxval = _read_header(fh, b"P5")
        if maxval == 255:
            data = np.frombuffer(fh.read(w * h), dtype=np.uint8)
        elif maxval == 65535:
            data = np.frombuffer(fh.read(w * h * 2), dtype=">u2").astype(np.uint16)
        else:
            raise RenderError(f"unsupported maxval {maxval}")
    return data.reshape(h, w)
