"""Rigid transforms, oriented boxes, triangle meshes and segment queries.

Conventions used throughout the package:
  world frame : +Z up, floor at z = 0, table centered on the origin.
  camera/palm : +Z forward (optical axis == palm normal), +X right, +Y down.
  quaternions : (qw, qx, qy, qz), unit norm, canonicalized so qw >= 0.

All operations are pure functions on immutable inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

_EPS = 1e-12


class GeometryError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Quaternions
# ---------------------------------------------------------------------------

def quat_normalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = float(np.linalg.norm(q))
    if n < _EPS:
        raise GeometryError("zero-norm quaternion")
    return q / n


def quat_from_file(values, tol: float = 1e-8) -> np.ndarray:
    """Validate a quaternion parsed from text (printed with 9 digits).

    Values are returned untouched: 9-significant-digit decimals carry a
    norm error below 1e-9, and keeping them verbatim makes re-writing a
    loaded file byte-identical. A norm further off than `tol` is file
    corruption, not rounding.
    """
    q = np.asarray(values, dtype=float)
    n = float(np.linalg.norm(q))
    if abs(n - 1.0) > tol:
        raise GeometryError(f"quaternion norm {n} too far from 1")
    return q


def quat_canonical(q) -> np.ndarray:
    """Flip sign so the first nonzero component (starting at qw) is positive."""
    q = np.asarray(q, dtype=float)
    for c in q:
        if abs(c) > _EPS:
            return q if c > 0 else -q
    return q


def quat_mul(a, b) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_conj(q) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_rotate(q, v) -> np.ndarray:
    """Rotate vector(s) v by unit quaternion q. v may be (3,) or (N, 3)."""
    return np.asarray(v, dtype=float) @ quat_to_mat(q).T


def quat_to_mat(q) -> np.ndarray:
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def mat_to_quat(m) -> np.ndarray:
    """Rotation matrix -> unit quaternion (Shepperd's method), canonicalized."""
    m = np.asarray(m, dtype=float)
    t = np.trace(m)
    if t > 0:
        s = np.sqrt(t + 1.0) * 2
        q = np.array([0.25 * s,
                      (m[2, 1] - m[1, 2]) / s,
                      (m[0, 2] - m[2, 0]) / s,
                      (m[1, 0] - m[0, 1]) / s])
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2
        q = np.array([(m[2, 1] - m[1, 2]) / s,
                      0.25 * s,
                      (m[0, 1] + m[1, 0]) / s,
                      (m[0, 2] + m[2, 0]) / s])
    elif m[1, 1] > m[2, 2]:
        s = np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2
        q = np.array([(m[0, 2] - m[2, 0]) / s,
                      (m[0, 1] + m[1, 0]) / s,
                      0.25 * s,
                      (m[1, 2] + m[2, 1]) / s])
    else:
        s = np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2
        q = np.array([(m[1, 0] - m[0, 1]) / s,
                      (m[0, 2] + m[2, 0]) / s,
                      (m[1, 2] + m[2, 1]) / s,
                      0.25 * s])
    return quat_canonical(quat_normalize(q))


def quat_angle(q0, q1) -> float:
    """Geodesic angle in radians between two unit quaternions.

    Uses the relative rotation with atan2, which stays accurate for tiny
    angles where arccos of the dot product loses precision.
    """
    r = quat_mul(quat_conj(q0), q1)
    return 2.0 * float(np.arctan2(np.linalg.norm(r[1:]), abs(r[0])))


def quat_from_axis_angle(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    h = 0.5 * angle
    return np.concatenate([[np.cos(h)], np.sin(h) * axis])


def slerp(q0, q1, s: float) -> np.ndarray:
    """Shortest-arc spherical interpolation between unit quaternions.

    s=0 returns q0, s=1 returns q1 (up to sign); output is unit norm.
    Antipodal representations are resolved by flipping q1's sign.
    """
    q0 = np.asarray(q0, dtype=float)
    q1 = np.asarray(q1, dtype=float)
    d = float(np.dot(q0, q1))
    if d < 0.0:
        q1 = -q1
        d = -d
    if d > 1.0 - 1e-10:
        # Nearly parallel: linear interpolation is exact enough.
        return quat_normalize(q0 + s * (q1 - q0))
    theta = np.arccos(d)
    sin_t = np.sin(theta)
    return quat_normalize((np.sin((1.0 - s) * theta) / sin_t) * q0
                          + (np.sin(s * theta) / sin_t) * q1)


# ---------------------------------------------------------------------------
# Transforms and shapes
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Rotation (unit quaternion, qw >= 0) plus translation in meters."""

    rotation: np.ndarray
    translation: np.ndarray

    def __eq__(self, other):
        return (isinstance(other, RigidTransform)
                and np.array_equal(self.rotation, other.rotation)
                and np.array_equal(self.translation, other.translation))

    def __post_init__(self):
        q = quat_canonical(np.asarray(self.rotation, dtype=float))
        n = float(np.linalg.norm(q))
        if abs(n - 1.0) > 1e-9:
            raise GeometryError(f"quaternion norm {n} not unit within 1e-9")
        object.__setattr__(self, "rotation", q)
        object.__setattr__(self, "translation",
                           np.asarray(self.translation, dtype=float))

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(np.array([1.0, 0.0, 0.0, 0.0]), np.zeros(3))

    def apply(self, points) -> np.ndarray:
        return quat_rotate(self.rotation, points) + self.translation

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self ∘ other: apply `other` first, then `self`."""
        return RigidTransform(
            quat_mul(self.rotation, other.rotation),
            self.apply(other.translation),
        )

    def inverse(self) -> "RigidTransform":
        qi = quat_conj(self.rotation)
        return RigidTransform(qi, -quat_rotate(qi, self.translation))

    def forward_axis(self) -> np.ndarray:
        """+Z of the local frame in world coordinates (camera/palm normal)."""
        return quat_rotate(self.rotation, np.array([0.0, 0.0, 1.0]))


@dataclass(frozen=True)
class OrientedBox:
    """Box with arbitrary pose; half_extents strictly positive."""

    pose: RigidTransform
    half_extents: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.half_extents, dtype=float)
        if not np.all(h > 0):
            raise GeometryError("half_extents must be strictly positive")
        object.__setattr__(self, "half_extents", h)

    def contains(self, points) -> np.ndarray:
        """Boolean inside test for one point (3,) or many (N, 3)."""
        local = np.atleast_2d(points) - self.pose.translation
        local = local @ quat_to_mat(self.pose.rotation)  # world->box: R^T rows
        inside = np.all(np.abs(local) <= self.half_extents + 1e-12, axis=1)
        return inside if np.asarray(points).ndim == 2 else bool(inside[0])

    def face_normal_world(self, face: int) -> np.ndarray:
        """Outward unit normal of face index 0..5 = +x,-x,+y,-y,+z,-z."""
        if not 0 <= face <= 5:
            raise GeometryError(f"face index {face} outside 0..5")
        n = np.zeros(3)
        n[face // 2] = 1.0 if face % 2 == 0 else -1.0
        return quat_rotate(self.pose.rotation, n)


class TargetKind(Enum):
    PART_BOX = "part_box"
    MESH = "mesh"


@dataclass(frozen=True)
class SegmentHit:
    t_enter: float
    target_kind: TargetKind
    target_id: str


@dataclass
class TriangleMesh:
    """Indexed triangle soup; degenerate triangles dropped at construction."""

    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        tris = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if tris.size and (tris.min() < 0 or tris.max() >= len(self.vertices)):
            raise GeometryError("triangle index out of range")
        a = self.vertices[tris[:, 0]]
        ab = self.vertices[tris[:, 1]] - a
        ac = self.vertices[tris[:, 2]] - a
        area2 = np.linalg.norm(np.cross(ab, ac), axis=1)
        self.triangles = tris[area2 > 1e-12]

    def transformed(self, pose: RigidTransform) -> "TriangleMesh":
        return TriangleMesh(pose.apply(self.vertices), self.triangles.copy())

    def aabb(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


def load_obj(path: str | Path) -> TriangleMesh:
    """Load the ASCII OBJ subset used by bundled assets: v and f records.

    Faces with more than three vertices are fan-triangulated; `f` indices
    may carry /vt/vn suffixes, which are ignored.
    """
    vertices: list[list[float]] = []
    faces: list[tuple[int, int, int]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "v":
                if len(parts) < 4:
                    raise GeometryError(f"malformed vertex record: {line!r}")
                vertices.append([float(parts[1]), float(parts[2]), float(parts[3])])
            elif parts[0] == "f":
                idx = [int(tok.split("/")[0]) for tok in parts[1:]]
                idx = [i - 1 if i > 0 else len(vertices) + i for i in idx]
                if len(idx) < 3:
                    raise GeometryError(f"malformed face record: {line!r}")
                for k in range(1, len(idx) - 1):
                    faces.append((idx[0], idx[k], idx[k + 1]))
    if not vertices or not faces:
        raise GeometryError(f"OBJ file {path} has no usable geometry")
    return TriangleMesh(np.array(vertices), np.array(faces))


# ---------------------------------------------------------------------------
# Segment queries
# ---------------------------------------------------------------------------

def _segment_box_interval(p0, p1, box: OrientedBox):
    """Slab intersection interval [t0, t1] of segment with box, or None."""
    rot = quat_to_mat(box.pose.rotation)
    o = (np.asarray(p0, dtype=float) - box.pose.translation) @ rot
    d = (np.asarray(p1, dtype=float) - np.asarray(p0, dtype=float)) @ rot
    t0, t1 = 0.0, 1.0
    for k in range(3):
        h = box.half_extents[k]
        if abs(d[k]) < _EPS:
            if abs(o[k]) > h:
                return None
            continue
        ta = (-h - o[k]) / d[k]
        tb = (h - o[k]) / d[k]
        if ta > tb:
            ta, tb = tb, ta
        t0 = max(t0, ta)
        t1 = min(t1, tb)
        if t0 > t1:
            return None
    return t0, t1


def segment_vs_box(p0, p1, box: OrientedBox,
                   target_id: str = "box") -> SegmentHit | None:
    """First entry of segment p0->p1 into an oriented box (slab method).

    Returns t_enter in [0, 1]; a segment starting inside reports t_enter 0.
    """
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    if np.linalg.norm(p1 - p0) < _EPS:
        raise GeometryError("degenerate segment (p0 == p1)")
    interval = _segment_box_interval(p0, p1, box)
    if interval is None:
        return None
    return SegmentHit(interval[0], TargetKind.PART_BOX, target_id)


def segment_vs_mesh(p0, p1, mesh: TriangleMesh,
                    pose: RigidTransform | None = None,
                    target_id: str = "mesh") -> SegmentHit | None:
    """Smallest-t segment-triangle intersection over all mesh triangles.

    Moller-Trumbore with inclusive barycentric bounds so that hits on
    shared triangle edges are not dropped.
    """
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    d = p1 - p0
    if np.linalg.norm(d) < _EPS:
        raise GeometryError("degenerate segment (p0 == p1)")
    verts = mesh.vertices if pose is None else pose.apply(mesh.vertices)
    tri = mesh.triangles
    a = verts[tri[:, 0]]
    e1 = verts[tri[:, 1]] - a
    e2 = verts[tri[:, 2]] - a
    pvec = np.cross(d, e2)
    det = np.einsum("ij,ij->i", e1, pvec)
    ok = np.abs(det) > 1e-14
    inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    tvec = p0 - a
    u = np.einsum("ij,ij->i", tvec, pvec) * inv
    qvec = np.cross(tvec, e1)
    v = np.dot(qvec, d) * inv
    t = np.einsum("ij,ij->i", e2, qvec) * inv
    eps = 1e-10
    hit = ok & (u >= -eps) & (v >= -eps) & (u + v <= 1.0 + eps) \
        & (t >= 0.0) & (t <= 1.0)
    if not np.any(hit):
        return None
    return SegmentHit(float(t[hit].min()), TargetKind.MESH, target_id)


# ---------------------------------------------------------------------------
# Orientation construction
# ---------------------------------------------------------------------------

def look_rotation(forward, up_hint=(0.0, 0.0, 1.0)) -> np.ndarray:
    """Quaternion whose +Z is `forward`, with roll fixed by `up_hint`.

    The camera convention is +Y down, so the projected up hint maps to -Y.
    """
    f = np.asarray(forward, dtype=float)
    f = f / np.linalg.norm(f)
    u = np.asarray(up_hint, dtype=float)
    u = u - np.dot(u, f) * f  # Gram-Schmidt
    n = np.linalg.norm(u)
    if n < 1e-9:
        raise GeometryError("up_hint parallel to forward axis")
    u /= n
    y = -u
    x = np.cross(y, f)
    return mat_to_quat(np.column_stack([x, y, f]))


def orient_toward(face_normal_world, up_hint=(0.0, 0.0, 1.0)) -> np.ndarray:
    """Camera/palm orientation facing a part-box face.

    The forward axis (+Z, the palm normal) ends up anti-parallel to the
    outward face normal so the palm faces the part.
    """
    n = np.asarray(face_normal_world, dtype=float)
    if abs(np.linalg.norm(n) - 1.0) > 1e-6:
        raise GeometryError("face normal must be unit length")
    return look_rotation(-n, up_hint)
