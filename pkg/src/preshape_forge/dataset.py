"""Dataset generation, serialization and the class-balancing sampler.

Directory layout:
    root/manifest.csv
    root/<seq_id>/scene.txt
    root/<seq_id>/poses.csv
    root/<seq_id>/frames/frame_%05d.{rgb.ppm,depth.pgm,label.pgm}   (optional)

seq_id is <object>_<part>_<index>. Every sequence derives its random
streams from (master_seed, pair index, sequence index, attempt), so the
generated bytes do not depend on worker count or scheduling.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import streams
from .geometry import RigidTransform, quat_from_file
from .renderer import render_frame, write_pgm8, write_pgm16, write_ppm
from .scene import (
    RandomizationSpec,
    SceneError,
    SceneInstance,
    VisibilityError,
    WorkspaceConfig,
    build_render_scene,
    camera_pose,
    load_object_mesh,
    part_boxes_world,
    read_scene_descriptor,
    sample_scene,
    sample_start_pose,
    write_scene_descriptor,
)
from .taxonomy import GRASP_TO_PRESHAPE, GraspTaxonomy, GraspType, PreShape
from .trajectory import (
    AcceptanceStatus,
    TrajectoryError,
    check_acceptance,
    orient_for_face,
    plan_trajectory,
    truncate_at_contact,
)

MANIFEST_NAME = "manifest.csv"
MANIFEST_HEADER = ("seq_id,object,part_id,grasp_type,pre_shape,seed,"
                   "num_frames,duration_s,fps,relative_path")
POSES_HEADER = "frame,t_s,px,py,pz,qw,qx,qy,qz,label"
FORMAT_VERSION = 1


class DatasetError(ValueError):
    pass


class UnreachablePartError(DatasetError):
    """No accepted trajectory found within the retry budget."""

    def __init__(self, object_name, part_id, attempts):
        super().__init__(f"part {object_name}/{part_id} unreachable after "
                         f"{attempts} start-pose attempts")
        self.object_name = object_name
        self.part_id = part_id


@dataclass(frozen=True)
class GenerationParams:
    per_pair: int = 47
    duration_s: float = 2.5
    fps: float = 20.0
    no_grasp_tail_s: float = 0.0
    max_attempts: int = 200
    visibility_retries: int = 64
    render: bool = False

    def __post_init__(self):
        if self.per_pair < 1:
            raise DatasetError("per_pair must be >= 1")
        if self.duration_s <= 0 or self.fps <= 0:
            raise DatasetError("duration and fps must be positive")
        if self.no_grasp_tail_s < 0:
            raise DatasetError("no_grasp_tail_s must be >= 0")


@dataclass(frozen=True)
class SequenceRecord:
    seq_id: str
    object_name: str
    part_id: str
    grasp_type: GraspType
    pre_shape: PreShape
    seed: int
    fps: float
    duration_s: float
    times: np.ndarray
    poses: tuple[RigidTransform, ...]   # camera poses, world frame
    labels: tuple[PreShape, ...]        # per-frame labels
    scene: SceneInstance
    render_dir: str | None = None

    def __post_init__(self):
        if len(self.poses) < 2:
            raise DatasetError(f"{self.seq_id}: fewer than 2 frames")
        ok = {self.pre_shape, PreShape.NO_GRASP}
        seen_no_grasp = False
        for lab in self.labels:
            if lab not in ok:
                raise DatasetError(f"{self.seq_id}: label {lab} not allowed")
            if lab is PreShape.NO_GRASP:
                seen_no_grasp = True
            elif seen_no_grasp:
                raise DatasetError(f"{self.seq_id}: NoGrasp frames must be a suffix")


@dataclass(frozen=True)
class ManifestRow:
    seq_id: str
    object_name: str
    part_id: str
    grasp_type: GraspType
    pre_shape: PreShape
    seed: int
    num_frames: int
    duration_s: float
    fps: float
    relative_path: str


@dataclass
class DatasetManifest:
    root: Path
    rows: list[ManifestRow]

    def __post_init__(self):
        ids = [r.seq_id for r in self.rows]
        if len(set(ids)) != len(ids):
            raise DatasetError("duplicate seq_ids in manifest")

    def row(self, seq_id: str) -> ManifestRow:
        for r in self.rows:
            if r.seq_id == seq_id:
                return r
        raise DatasetError(f"unknown seq_id {seq_id!r}")

    def load_record(self, seq_id: str) -> SequenceRecord:
        return read_sequence_dir(self.root, self.row(seq_id))


# ---------------------------------------------------------------------------
# Single-sequence generation
# ---------------------------------------------------------------------------

def generate_sequence(cfg: WorkspaceConfig, rand: RandomizationSpec,
                      taxonomy: GraspTaxonomy, object_name: str, part_id: str,
                      pair_index: int, seq_index: int, master_seed: int,
                      params: GenerationParams) -> SequenceRecord:
    """Rejection-sample scenes and start poses until a trajectory is accepted."""
    spec = taxonomy.object(object_name)
    part = spec.part(part_id)
    mesh = load_object_mesh(spec)

    for attempt in range(params.max_attempts):
        scene_seed = streams.derive_seed(master_seed, streams.ROLE_SCENE,
                                         pair_index, seq_index, attempt)
        start_seed = streams.derive_seed(master_seed, streams.ROLE_START,
                                         pair_index, seq_index, attempt)
        try:
            scene = sample_scene(cfg, rand, taxonomy, object_name, scene_seed)
        except SceneError as exc:
            raise DatasetError(f"{object_name}: {exc}") from exc

        boxes = part_boxes_world(spec, scene.object_pose)
        target_box = next(b for pid, b, _g in boxes if pid == part_id)
        target_center = target_box.pose.translation
        normal = target_box.face_normal_world(part.approach_face)
        render_scene = build_render_scene(cfg, taxonomy, scene)

        try:
            palm0 = sample_start_pose(cfg, render_scene, target_center, normal,
                                      start_seed, params.visibility_retries)
        except VisibilityError:
            continue

        end_q = orient_for_face(normal, palm0.translation, target_center)
        plan = plan_trajectory(palm0, target_center, end_q,
                               params.duration_s, params.fps)
        world_mesh = mesh.transformed(scene.object_pose)
        outcome = check_acceptance(plan, world_mesh, boxes, part_id)
        if outcome.status is not AcceptanceStatus.ACCEPTED:
            continue
        try:
            plan = truncate_at_contact(plan, outcome.t_contact)
        except TrajectoryError:
            continue

        labels = _frame_labels(plan.times, GRASP_TO_PRESHAPE[part.grasp_type],
                               params.no_grasp_tail_s)
        return SequenceRecord(
            seq_id=f"{object_name}_{part_id}_{seq_index:03d}",
            object_name=object_name,
            part_id=part_id,
            grasp_type=part.grasp_type,
            pre_shape=GRASP_TO_PRESHAPE[part.grasp_type],
            seed=scene_seed,
            fps=params.fps,
            duration_s=params.duration_s,
            times=plan.times,
            poses=tuple(camera_pose(f) for f in plan.frames),
            labels=labels,
            scene=scene,
        )
    raise UnreachablePartError(object_name, part_id, params.max_attempts)


def _frame_labels(times: np.ndarray, pre_shape: PreShape,
                  tail_s: float) -> tuple[PreShape, ...]:
    if tail_s <= 0:
        return tuple(pre_shape for _ in times)
    cut = times[-1] - tail_s
    return tuple(PreShape.NO_GRASP if t > cut + 1e-12 else pre_shape
                 for t in times)


# ---------------------------------------------------------------------------
# Whole-dataset generation
# ---------------------------------------------------------------------------

def generate_dataset(cfg: WorkspaceConfig, rand: RandomizationSpec,
                     taxonomy: GraspTaxonomy, out_root: str | Path,
                     master_seed: int, params: GenerationParams,
                     workers: int = 1,
                     progress=None) -> DatasetManifest:
    """Generate per_pair accepted sequences for every (object, part) pair.

    Deterministic in master_seed: worker count only changes wall time.
    """
    out_root = Path(out_root)
    out_root.mkdir(parents=True, exist_ok=True)
    pairs = taxonomy.pairs()
    jobs = [(obj, part, pi, si)
            for pi, (obj, part) in enumerate(pairs)
            for si in range(params.per_pair)]

    if workers <= 1:
        results = [_run_job(cfg, rand, taxonomy, out_root, master_seed,
                            params, job) for job in _iter_progress(jobs, progress)]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_job, cfg, rand, taxonomy, out_root,
                                   master_seed, params, job) for job in jobs]
            results = []
            for fut in _iter_progress(futures, progress):
                results.append(fut.result())

    rows = [row for row in results]
    manifest = DatasetManifest(out_root, rows)
    write_manifest(out_root / MANIFEST_NAME, rows)
    return manifest


def _iter_progress(items, progress):
    for i, item in enumerate(items):
        if progress is not None and i % 25 == 0:
            progress(i, len(items))
        yield item


def _run_job(cfg, rand, taxonomy, out_root, master_seed, params, job) -> ManifestRow:
    obj, part, pair_index, seq_index = job
    record = generate_sequence(cfg, rand, taxonomy, obj, part, pair_index,
                               seq_index, master_seed, params)
    if params.render:
        record = render_sequence(cfg, taxonomy, record, out_root)
    write_sequence_dir(out_root, record)
    return ManifestRow(record.seq_id, obj, part, record.grasp_type,
                       record.pre_shape, record.seed, len(record.poses),
                       record.duration_s, record.fps, record.seq_id)


def render_sequence(cfg: WorkspaceConfig, taxonomy: GraspTaxonomy,
                    record: SequenceRecord, out_root: Path) -> SequenceRecord:
    """Render and write all frames of a sequence; returns the updated record."""
    from dataclasses import replace

    frames_dir = Path(out_root) / record.seq_id / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)
    render_scene = build_render_scene(cfg, taxonomy, record.scene)
    intr = cfg.intrinsics()
    for k, pose in enumerate(record.poses):
        fr = render_frame(render_scene, pose.rotation, pose.translation, intr)
        write_ppm(frames_dir / f"frame_{k:05d}.rgb.ppm", fr.rgb)
        write_pgm16(frames_dir / f"frame_{k:05d}.depth.pgm", fr.depth)
        write_pgm8(frames_dir / f"frame_{k:05d}.label.pgm", fr.labels)
    return replace(record, render_dir="frames")


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return f"{x:.9g}"


def write_manifest(path: str | Path, rows: list[ManifestRow]) -> None:
    lines = [MANIFEST_HEADER]
    for r in rows:
        lines.append(",".join([
            r.seq_id, r.object_name, r.part_id, r.grasp_type.value,
            r.pre_shape.value, str(r.seed), str(r.num_frames),
            _fmt(r.duration_s), _fmt(r.fps), r.relative_path,
        ]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_manifest(root: str | Path) -> DatasetManifest:
    root = Path(root)
    path = root / MANIFEST_NAME
    if not path.is_file():
        raise DatasetError(f"no {MANIFEST_NAME} under {root}")
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != MANIFEST_HEADER.split(","):
            raise DatasetError(f"{path}: unexpected manifest header {header}")
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != 10:
                raise DatasetError(f"{path}:{lineno}: expected 10 fields")
            try:
                rows.append(ManifestRow(
                    seq_id=rec[0], object_name=rec[1], part_id=rec[2],
                    grasp_type=GraspType(rec[3]), pre_shape=PreShape(rec[4]),
                    seed=int(rec[5]), num_frames=int(rec[6]),
                    duration_s=float(rec[7]), fps=float(rec[8]),
                    relative_path=rec[9]))
            except ValueError as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from exc
    return DatasetManifest(root, rows)


def write_sequence_dir(out_root: str | Path, record: SequenceRecord) -> None:
    seq_dir = Path(out_root) / record.seq_id
    seq_dir.mkdir(parents=True, exist_ok=True)
    write_scene_descriptor(seq_dir / "scene.txt", record.scene)
    lines = [POSES_HEADER]
    for k, (t, pose, label) in enumerate(zip(record.times, record.poses,
                                             record.labels)):
        p = pose.translation
        q = pose.rotation  # canonicalized by RigidTransform
        lines.append(",".join([str(k), _fmt(t), _fmt(p[0]), _fmt(p[1]),
                               _fmt(p[2]), _fmt(q[0]), _fmt(q[1]), _fmt(q[2]),
                               _fmt(q[3]), label.value]))
    (seq_dir / "poses.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_sequence_dir(root: str | Path, row: ManifestRow) -> SequenceRecord:
    seq_dir = Path(root) / row.relative_path
    poses_path = seq_dir / "poses.csv"
    scene_path = seq_dir / "scene.txt"
    if not seq_dir.is_dir() or not poses_path.is_file() or not scene_path.is_file():
        raise DatasetError(f"{row.seq_id}: sequence directory incomplete "
                           f"({seq_dir})")
    try:
        scene = read_scene_descriptor(scene_path)
    except SceneError as exc:
        raise DatasetError(f"{row.seq_id}: {exc}") from exc
    times, poses, labels = [], [], []
    with open(poses_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != POSES_HEADER.split(","):
            raise DatasetError(f"{poses_path}: unexpected header {header}")
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != 10:
                raise DatasetError(f"{poses_path}:{lineno}: expected 10 fields")
            try:
                frame = int(rec[0])
                if frame != lineno - 2:
                    raise DatasetError(
                        f"{poses_path}:{lineno}: frames must be contiguous "
                        f"from 0 (got {frame})")
                times.append(float(rec[1]))
                q = quat_from_file([float(v) for v in rec[5:9]])
                if q[0] < 0 or (q[0] == 0 and next(
                        (c for c in q[1:] if c != 0), 1.0) < 0):
                    raise DatasetError(
                        f"{poses_path}:{lineno}: quaternion not canonical")
                poses.append(RigidTransform(
                    q, np.array([float(v) for v in rec[2:5]])))
                labels.append(PreShape(rec[9]))
            except DatasetError:
                raise
            except ValueError as exc:
                raise DatasetError(f"{poses_path}:{lineno}: {exc}") from exc
    if len(times) != row.num_frames:
        raise DatasetError(f"{row.seq_id}: manifest says {row.num_frames} "
                           f"frames, poses.csv has {len(times)}")
    frames_dir = seq_dir / "frames"
    return SequenceRecord(
        seq_id=row.seq_id, object_name=row.object_name, part_id=row.part_id,
        grasp_type=row.grasp_type, pre_shape=row.pre_shape, seed=row.seed,
        fps=row.fps, duration_s=row.duration_s, times=np.array(times),
        poses=tuple(poses), labels=tuple(labels), scene=scene,
        render_dir="frames" if frames_dir.is_dir() else None,
    )


def load_dataset(root: str | Path) -> DatasetManifest:
    """Read and structurally check the manifest; records load lazily."""
    return read_manifest(root)


def validate_dataset(root: str | Path, taxonomy: GraspTaxonomy | None = None
                     ) -> list[str]:
    """Re-check all invariants; returns one message per violation."""
    problems: list[str] = []
    try:
        manifest = read_manifest(root)
    except DatasetError as exc:
        return [str(exc)]
    for row in manifest.rows:
        try:
            record = read_sequence_dir(manifest.root, row)
        except DatasetError as exc:
            problems.append(str(exc))
            continue
        if record.pre_shape is not GRASP_TO_PRESHAPE[record.grasp_type]:
            problems.append(f"{row.seq_id}: pre_shape does not match grasp type")
        if record.scene.object_name != row.object_name:
            problems.append(f"{row.seq_id}: scene object differs from manifest")
        if record.seed != record.scene.seed:
            problems.append(f"{row.seq_id}: scene seed differs from manifest")
        expected_t = np.arange(len(record.times)) / row.fps
        if np.max(np.abs(record.times - expected_t)) > 1e-6:
            problems.append(f"{row.seq_id}: frame times off the k/fps grid")
        if taxonomy is not None:
            try:
                part = taxonomy.object(row.object_name).part(row.part_id)
                if part.grasp_type is not row.grasp_type:
                    problems.append(f"{row.seq_id}: grasp type does not match "
                                    "taxonomy")
            except Exception as exc:
                problems.append(f"{row.seq_id}: {exc}")
    return problems


# ---------------------------------------------------------------------------
# Class balancing
# ---------------------------------------------------------------------------

GRASP_CLASSES = (PreShape.POWER, PreShape.LATERAL, PreShape.PINCH,
                 PreShape.PINCH_3_DIGIT)


@dataclass(frozen=True)
class EpochSample:
    epoch_index: int
    selected: dict[PreShape, tuple[str, ...]]


def balance_epoch(manifest: DatasetManifest, epoch: int, seed: int) -> EpochSample:
    """Downsample every class, without replacement, to the minority count."""
    by_class: dict[PreShape, list[str]] = {c: [] for c in GRASP_CLASSES}
    for row in manifest.rows:
        if row.pre_shape in by_class:
            by_class[row.pre_shape].append(row.seq_id)
    missing = [c.value for c in GRASP_CLASSES if not by_class[c]]
    if missing:
        raise DatasetError(f"classes absent from manifest: {missing}")
    minority = min(len(v) for v in by_class.values())
    gen = streams.generator(streams.derive_seed(seed, streams.ROLE_EPOCH, epoch))
    selected = {}
    for c in GRASP_CLASSES:
        ids = by_class[c]
        order = gen.permutation(len(ids))[:minority]
        selected[c] = tuple(ids[i] for i in order)
    return EpochSample(epoch, selected)
