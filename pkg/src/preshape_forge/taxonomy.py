"""Grasp taxonomy: objects, graspable parts, grasp types and pre-shapes.

The bundled taxonomy covers 15 YCB-style objects with 31 annotated parts.
Each part carries an oriented box in the object frame plus the index of
the external face whose outward normal the palm must align to.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .geometry import GeometryError, OrientedBox, RigidTransform


class TaxonomyError(ValueError):
    pass


class PreShape(Enum):
    POWER = "power"
    LATERAL = "lateral"
    PINCH = "pinch"
    PINCH_3_DIGIT = "pinch_3_digit"
    NO_GRASP = "no_grasp"


class GraspType(Enum):
    # Order matters: it is the column order of the taxonomy table and the
    # tie-break order for modal_grasp.
    ADDUCTED_THUMB = "adducted_thumb"
    LARGE_DIAMETER = "large_diameter"
    SMALL_DIAMETER = "small_diameter"
    MEDIUM_WRAP = "medium_wrap"
    SPHERE_4_FINGERS = "sphere_4_fingers"
    POWER_SPHERE = "power_sphere"
    PRISMATIC_4_FINGERS = "prismatic_4_fingers"
    TRIPOD = "tripod"
    PRISMATIC_2_FINGERS = "prismatic_2_fingers"


# Canonical grasp-type -> pre-shape association. Any taxonomy file whose
# [map] section deviates from this is rejected.
GRASP_TO_PRESHAPE: dict[GraspType, PreShape] = {
    GraspType.ADDUCTED_THUMB: PreShape.LATERAL,
    GraspType.LARGE_DIAMETER: PreShape.POWER,
    GraspType.SMALL_DIAMETER: PreShape.POWER,
    GraspType.MEDIUM_WRAP: PreShape.POWER,
    GraspType.SPHERE_4_FINGERS: PreShape.POWER,
    GraspType.POWER_SPHERE: PreShape.POWER,
    GraspType.PRISMATIC_4_FINGERS: PreShape.PINCH,
    GraspType.TRIPOD: PreShape.PINCH_3_DIGIT,
    GraspType.PRISMATIC_2_FINGERS: PreShape.PINCH_3_DIGIT,
}

DATA_DIR = Path(__file__).parent / "data"
BUNDLED_TAXONOMY = DATA_DIR / "taxonomy.txt"


@dataclass(frozen=True)
class PartSpec:
    """One graspable object part: grasp type plus its box in the object frame."""

    part_id: str
    grasp_type: GraspType
    box_center: np.ndarray
    box_half_extents: np.ndarray
    box_rotation: np.ndarray  # unit quaternion, object frame
    approach_face: int  # 0..5 = +x,-x,+y,-y,+z,-z of the box frame

    def __post_init__(self):
        object.__setattr__(self, "box_center",
                           np.asarray(self.box_center, dtype=float))
        h = np.asarray(self.box_half_extents, dtype=float)
        if not np.all(h > 0):
            raise TaxonomyError(f"part {self.part_id}: non-positive half extents")
        object.__setattr__(self, "box_half_extents", h)
        q = np.asarray(self.box_rotation, dtype=float)
        if abs(np.linalg.norm(q) - 1.0) > 1e-9:
            raise TaxonomyError(f"part {self.part_id}: rotation not unit norm")
        object.__setattr__(self, "box_rotation", q)
        if not 0 <= self.approach_face <= 5:
            raise TaxonomyError(f"part {self.part_id}: bad approach face")

    def box_in_frame(self, frame: RigidTransform) -> OrientedBox:
        """The part box expressed in the frame the object is posed in."""
        local = RigidTransform(self.box_rotation, self.box_center)
        return OrientedBox(frame.compose(local), self.box_half_extents)


@dataclass(frozen=True)
class ObjectSpec:
    name: str
    mesh_path: Path
    parts: tuple[PartSpec, ...]

    def __post_init__(self):
        if not self.parts:
            raise TaxonomyError(f"object {self.name} has no parts")
        ids = [p.part_id for p in self.parts]
        if len(set(ids)) != len(ids):
            raise TaxonomyError(f"object {self.name} has duplicate part ids")

    def part(self, part_id: str) -> PartSpec:
        for p in self.parts:
            if p.part_id == part_id:
                return p
        raise TaxonomyError(f"object {self.name} has no part {part_id!r}")

    def grasp_counts(self) -> dict[GraspType, int]:
        counts: dict[GraspType, int] = {}
        for p in self.parts:
            counts[p.grasp_type] = counts.get(p.grasp_type, 0) + 1
        return counts


@dataclass(frozen=True)
class GraspTaxonomy:
    """Immutable after load; safe to share across workers."""

    objects: tuple[ObjectSpec, ...]
    grasp_to_preshape: dict[GraspType, PreShape]

    def __post_init__(self):
        if self.grasp_to_preshape != GRASP_TO_PRESHAPE:
            raise TaxonomyError("grasp -> pre-shape map deviates from the "
                                "canonical association")
        names = [o.name for o in self.objects]
        if len(set(names)) != len(names):
            raise TaxonomyError("duplicate object names")

    def object(self, name: str) -> ObjectSpec:
        for o in self.objects:
            if o.name == name:
                return o
        raise TaxonomyError(f"unknown object {name!r}")

    def total_parts(self) -> int:
        return sum(len(o.parts) for o in self.objects)

    def pairs(self) -> list[tuple[str, str]]:
        """All (object, part_id) pairs in file order."""
        return [(o.name, p.part_id) for o in self.objects for p in o.parts]

    def is_multigrasp(self, name: str) -> bool:
        """True when the object's parts carry more than one grasp type."""
        return len(self.object(name).grasp_counts()) > 1


def preshape_of(taxonomy: GraspTaxonomy, grasp: GraspType) -> PreShape:
    return taxonomy.grasp_to_preshape[grasp]


def modal_grasp(taxonomy: GraspTaxonomy, object_name: str) -> GraspType:
    """Grasp type held by the most parts; ties go to earlier table column."""
    counts = taxonomy.object(object_name).grasp_counts()
    best = max(counts.values())
    for g in GraspType:
        if counts.get(g, 0) == best:
            return g
    raise AssertionError("unreachable: counts is non-empty")


# ---------------------------------------------------------------------------
# Taxonomy file parsing
# ---------------------------------------------------------------------------
#
# Line-oriented UTF-8 text (grammar documented in docs/formats.md):
#   parts_total <N>                       optional declared part count
#   [object <name>]
#   mesh <relative path>
#   part <id> <grasp_type> cx cy cz hx hy hz qw qx qy qz face=<0..5>
#   [map]
#   <grasp_type> -> <pre_shape>
# '#' starts a comment; blank lines are ignored.

def load_taxonomy(path: str | Path = BUNDLED_TAXONOMY) -> GraspTaxonomy:
    path = Path(path)
    objects: list[ObjectSpec] = []
    mapping: dict[GraspType, PreShape] = {}
    declared_total: int | None = None

    cur_name: str | None = None
    cur_mesh: Path | None = None
    cur_parts: list[PartSpec] = []
    in_map = False

    def flush():
        nonlocal cur_name, cur_mesh, cur_parts
        if cur_name is None:
            return
        if cur_mesh is None:
            raise TaxonomyError(f"object {cur_name}: missing mesh record")
        objects.append(ObjectSpec(cur_name, cur_mesh, tuple(cur_parts)))
        cur_name, cur_mesh, cur_parts = None, None, []

    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                if line.startswith("[object "):
                    flush()
                    in_map = False
                    cur_name = line[len("[object "):].rstrip("]").strip()
                    if not cur_name:
                        raise TaxonomyError("empty object name")
                elif line == "[map]":
                    flush()
                    in_map = True
                elif in_map:
                    lhs, _, rhs = line.partition("->")
                    if not rhs:
                        raise TaxonomyError(f"malformed map line {line!r}")
                    mapping[GraspType(lhs.strip())] = PreShape(rhs.strip())
                elif line.startswith("parts_total "):
                    declared_total = int(line.split()[1])
                elif line.startswith("mesh "):
                    if cur_name is None:
                        raise TaxonomyError("mesh record outside [object]")
                    cur_mesh = path.parent / line[len("mesh "):].strip()
                elif line.startswith("part "):
                    if cur_name is None:
                        raise TaxonomyError("part record outside [object]")
                    toks = line.split()
                    if len(toks) != 14 or not toks[13].startswith("face="):
                        raise TaxonomyError(f"malformed part record {line!r}")
                    nums = [float(t) for t in toks[3:13]]
                    cur_parts.append(PartSpec(
                        part_id=toks[1],
                        grasp_type=GraspType(toks[2]),
                        box_center=nums[0:3],
                        box_half_extents=nums[3:6],
                        box_rotation=nums[6:10],
                        approach_face=int(toks[13][len("face="):]),
                    ))
                else:
                    raise TaxonomyError(f"unrecognized record {line!r}")
            except (ValueError, GeometryError) as exc:
                raise TaxonomyError(f"{path}:{lineno}: {exc}") from exc

    flush()
    if not objects:
        raise TaxonomyError(f"{path}: no objects defined")
    if not mapping:
        raise TaxonomyError(f"{path}: missing [map] section")
    taxonomy = GraspTaxonomy(tuple(objects), mapping)
    if declared_total is not None and taxonomy.total_parts() != declared_total:
        raise TaxonomyError(
            f"{path}: declared parts_total {declared_total} but found "
            f"{taxonomy.total_parts()}")
    return taxonomy
