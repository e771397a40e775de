"""Minimum-jerk approach trajectories and the collision accept/reject rule.

An approach is a straight segment from a sampled start pose to the center
of the target part box, followed with the quintic minimum-jerk time
scaling s(tau) = 10 tau^3 - 15 tau^4 + 6 tau^5 (zero velocity and
acceleration at both ends, bell-shaped speed peaking at 1.875 d/T).
Wrist rotation is synchronized to the same scaling and completes at the
moment of contact, when the palm normal ends up anti-parallel to the
approach face's outward normal.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .geometry import (
    RigidTransform,
    SegmentHit,
    TargetKind,
    orient_toward,
    quat_angle,
    segment_vs_box,
    segment_vs_mesh,
    slerp,
)
from .taxonomy import GRASP_TO_PRESHAPE, GraspType, PreShape


class TrajectoryError(ValueError):
    pass


def min_jerk_s(tau: float) -> float:
    """Quintic minimum-jerk time scaling on [0, 1]."""
    if not 0.0 <= tau <= 1.0:
        raise TrajectoryError(f"tau {tau} outside [0, 1]")
    return tau * tau * tau * (10.0 + tau * (-15.0 + 6.0 * tau))


def min_jerk_s_dot(tau: float) -> float:
    """d s / d tau; peaks at tau = 0.5 with value 1.875."""
    if not 0.0 <= tau <= 1.0:
        raise TrajectoryError(f"tau {tau} outside [0, 1]")
    return 30.0 * tau * tau * (1.0 - tau) * (1.0 - tau)


def cubic_smoothstep(tau: float) -> float:
    return tau * tau * (3.0 - 2.0 * tau)


def discrete_jerk_cost(scaling, n: int = 1000, rest_pad: int = 4) -> float:
    """Sum |p'''|^2 dt of a unit move under a time scaling, by differences.

    The sampled profile is padded with `rest_pad` stationary samples on
    both ends (the hand is at rest before and after the move), so
    scalings that start or stop abruptly pay for their boundary jumps.
    """
    ts = np.linspace(0.0, 1.0, n + 1)
    s = np.array([scaling(t) for t in ts])
    s = np.concatenate([np.zeros(rest_pad), s, np.ones(rest_pad)])
    dt = 1.0 / n
    jerk = np.diff(s, 3) / dt**3
    return float(np.sum(jerk * jerk) * dt)


@dataclass(frozen=True)
class TrajectoryPlan:
    """Per-frame palm poses along the straight approach segment.

    times[k] = k / fps; positions lie on the (start, end) segment; the
    orientation interpolates start -> end with the same bell-shaped
    progress as the position.
    """

    start_pose: RigidTransform
    end_point: np.ndarray
    end_orientation: np.ndarray
    duration_s: float
    fps: float
    times: np.ndarray            # (F,)
    frames: tuple[RigidTransform, ...]
    progress: np.ndarray         # (F,) position parameter s(t/T) per frame

    @property
    def num_frames(self) -> int:
        return len(self.frames)


def plan_trajectory(start: RigidTransform, end_point, end_orientation,
                    duration_s: float, fps: float) -> TrajectoryPlan:
    """Sample the minimum-jerk approach at t = k/fps, k = 0..floor(T*fps)."""
    if duration_s <= 0 or fps <= 0:
        raise TrajectoryError("duration and fps must be positive")
    end_point = np.asarray(end_point, dtype=float)
    n = int(np.floor(duration_s * fps + 1e-9))
    times = np.arange(n + 1) / fps
    p0 = start.translation
    q0 = start.rotation
    frames = []
    progress = np.empty(n + 1)
    for k, t in enumerate(times):
        s = min_jerk_s(min(1.0, t / duration_s))
        progress[k] = s
        frames.append(RigidTransform(
            slerp(q0, end_orientation, s), p0 + s * (end_point - p0)))
    return TrajectoryPlan(start, end_point,
                          np.asarray(end_orientation, dtype=float),
                          duration_s, fps, times, tuple(frames), progress)


def orient_for_face(face_normal_world, start_point, target_point) -> np.ndarray:
    """End orientation of an approach: palm faces the target part.

    Roll is fixed by the world up axis. For near-vertical faces (top
    grasps) that hint degenerates, so the horizontal approach direction
    is used instead: the wrist keeps pointing along the reach.
    """
    n = np.asarray(face_normal_world, dtype=float)
    if abs(n[2]) < 0.99:
        return orient_toward(n, (0.0, 0.0, 1.0))
    d = np.asarray(target_point, dtype=float) - np.asarray(start_point, dtype=float)
    d = np.array([d[0], d[1], 0.0])
    norm = np.linalg.norm(d)
    d = d / norm if norm > 1e-9 else np.array([1.0, 0.0, 0.0])
    return orient_toward(n, d)


class AcceptanceStatus(Enum):
    ACCEPTED = "accepted"
    REJECTED_MESH_FIRST = "rejected_mesh_first"
    REJECTED_WRONG_BOX = "rejected_wrong_box"
    REJECTED_NO_CONTACT = "rejected_no_contact"


@dataclass(frozen=True)
class AcceptanceOutcome:
    status: AcceptanceStatus
    label: tuple[GraspType, PreShape] | None = None
    t_contact: float | None = None
    first_hit: SegmentHit | None = None

    def __post_init__(self):
        if (self.label is not None) != (self.status is AcceptanceStatus.ACCEPTED):
            raise TrajectoryError("label present iff accepted")


def first_hit_along(p0, p1, world_mesh, part_boxes) -> SegmentHit | None:
    """Earliest entry among the object mesh and all part boxes.

    part_boxes: list of (part_id, OrientedBox, GraspType) in world frame.
    Box ties against the mesh go to the box (the box encloses its mesh
    region, so a shared-boundary hit means the box was reached).
    """
    hits: list[SegmentHit] = []
    mesh_hit = segment_vs_mesh(p0, p1, world_mesh)
    if mesh_hit is not None:
        hits.append(mesh_hit)
    for part_id, box, _grasp in part_boxes:
        h = segment_vs_box(p0, p1, box, target_id=part_id)
        if h is not None:
            hits.append(h)
    if not hits:
        return None
    # Stable preference: smallest t, then boxes before mesh.
    return min(hits, key=lambda h: (h.t_enter, h.target_kind is TargetKind.MESH))


def check_acceptance(plan: TrajectoryPlan, world_mesh, part_boxes,
                     target_part_id: str) -> AcceptanceOutcome:
    """Apply the accept/reject-and-label rule along the approach segment."""
    p0 = plan.start_pose.translation
    hit = first_hit_along(p0, plan.end_point, world_mesh, part_boxes)
    if hit is None:
        # The segment ends at the target box center, so some hit must exist.
        raise AssertionError("no contact along a segment ending inside the "
                             "target box; taxonomy authoring error")
    if hit.target_kind is TargetKind.MESH:
        return AcceptanceOutcome(AcceptanceStatus.REJECTED_MESH_FIRST,
                                 first_hit=hit)
    if hit.target_id != target_part_id:
        return AcceptanceOutcome(AcceptanceStatus.REJECTED_WRONG_BOX,
                                 first_hit=hit)
    grasp = next(g for pid, _box, g in part_boxes if pid == target_part_id)
    return AcceptanceOutcome(
        AcceptanceStatus.ACCEPTED,
        label=(grasp, GRASP_TO_PRESHAPE[grasp]),
        t_contact=hit.t_enter,
        first_hit=hit,
    )


def truncate_at_contact(plan: TrajectoryPlan, t_contact: float) -> TrajectoryPlan:
    """Keep frames strictly before contact and finish the wrist rotation there.

    Kept frames are those with position parameter s(t/T) < t_contact (the
    sequence ends the moment before touch). The rotation is re-timed over
    the kept span - still the same bell-shaped profile - so the final
    frame reaches the end orientation exactly.
    """
    if not 0.0 < t_contact <= 1.0:
        raise TrajectoryError(f"t_contact {t_contact} outside (0, 1]")
    keep = plan.progress < t_contact - 1e-12
    n = int(np.sum(keep))
    if n < 2:
        raise TrajectoryError("fewer than 2 frames before contact")
    s_last = plan.progress[n - 1]
    q0 = plan.start_pose.rotation
    frames = []
    for k in range(n):
        r = plan.progress[k] / s_last if s_last > 0 else 0.0
        frames.append(RigidTransform(
            slerp(q0, plan.end_orientation, min(1.0, r)),
            plan.frames[k].translation))
    return replace(plan, times=plan.times[:n], frames=tuple(frames),
                   progress=plan.progress[:n])


def rotation_progress(plan: TrajectoryPlan) -> np.ndarray:
    """Angular distance from the start orientation at every frame."""
    q0 = plan.start_pose.rotation
    return np.array([quat_angle(q0, f.rotation) for f in plan.frames])
