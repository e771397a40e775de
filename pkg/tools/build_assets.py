#!/usr/bin/env python3
"""Regenerate the bundled object meshes and taxonomy file.

Writes src/preshape_forge/data/meshes/*.obj and data/taxonomy.txt.
Meshes are low-poly stand-ins for the 15 tabletop objects, authored with
the object origin at the bottom center (so a resting pose is z = table
top) and +x as the object's "front". Part boxes enclose their mesh
region with a 5-15 mm margin so an approach ray enters the box before
the surface.

Run from the repo root:  python tools/build_assets.py
"""

from __future__ import annotations

import math
from pathlib import Path

DATA = Path(__file__).resolve().parent.parent / "src" / "preshape_forge" / "data"


# ---------------------------------------------------------------------------
# Mesh primitives (vertices + triangle index triples, 1-based for OBJ)
# ---------------------------------------------------------------------------

class MeshBuilder:
    def __init__(self):
        self.vertices: list[tuple[float, float, float]] = []
        self.faces: list[tuple[int, int, int]] = []

    def add_vertex(self, x, y, z) -> int:
        self.vertices.append((x, y, z))
        return len(self.vertices)

    def add_face(self, a, b, c):
        self.faces.append((a, b, c))

    def add_box(self, cx, cy, cz, hx, hy, hz, yaw=0.0):
        cy_, sy_ = math.cos(yaw), math.sin(yaw)
        corners = []
        for sx in (-1, 1):
            for sy in (-1, 1):
                for sz in (-1, 1):
                    x, y = sx * hx, sy * hy
                    corners.append(self.add_vertex(
                        cx + x * cy_ - y * sy_, cy + x * sy_ + y * cy_, cz + sz * hz))
        # corners indexed by (sx, sy, sz) bits: i = 4*(sx>0) + 2*(sy>0) + (sz>0)
        quads = [
            (0, 1, 3, 2),  # -x
            (4, 6, 7, 5),  # +x
            (0, 4, 5, 1),  # -y
            (2, 3, 7, 6),  # +y
            (0, 2, 6, 4),  # -z
            (1, 5, 7, 3),  # +z
        ]
        for a, b, c, d in quads:
            self.add_face(corners[a], corners[b], corners[c])
            self.add_face(corners[a], corners[c], corners[d])

    def add_cylinder(self, r, length, axis="z", center=(0, 0, 0), n=20):
        """Solid cylinder with flat caps; `center` is the geometric center."""
        cx, cy, cz = center
        ring0, ring1 = [], []
        for i in range(n):
            a = 2 * math.pi * i / n
            u, v = r * math.cos(a), r * math.sin(a)
            if axis == "z":
                p0 = (cx + u, cy + v, cz - length / 2)
                p1 = (cx + u, cy + v, cz + length / 2)
            elif axis == "x":
                p0 = (cx - length / 2, cy + u, cz + v)
                p1 = (cx + length / 2, cy + u, cz + v)
            else:
                p0 = (cx + u, cy - length / 2, cz + v)
                p1 = (cx + u, cy + length / 2, cz + v)
            ring0.append(self.add_vertex(*p0))
            ring1.append(self.add_vertex(*p1))
        if axis == "z":
            c0 = self.add_vertex(cx, cy, cz - length / 2)
            c1 = self.add_vertex(cx, cy, cz + length / 2)
        elif axis == "x":
            c0 = self.add_vertex(cx - length / 2, cy, cz)
            c1 = self.add_vertex(cx + length / 2, cy, cz)
        else:
            c0 = self.add_vertex(cx, cy - length / 2, cz)
            c1 = self.add_vertex(cx, cy + length / 2, cz)
        for i in range(n):
            j = (i + 1) % n
            self.add_face(ring0[i], ring0[j], ring1[j])
            self.add_face(ring0[i], ring1[j], ring1[i])
            self.add_face(c0, ring0[j], ring0[i])
            self.add_face(c1, ring1[i], ring1[j])

    def add_ellipsoid(self, rx, ry, rz, center=(0, 0, 0), n_lat=8, n_lon=14):
        cx, cy, cz = center
        rows = []
        for i in range(1, n_lat):
            phi = math.pi * i / n_lat
            row = []
            for j in range(n_lon):
                theta = 2 * math.pi * j / n_lon
                row.append(self.add_vertex(
                    cx + rx * math.sin(phi) * math.cos(theta),
                    cy + ry * math.sin(phi) * math.sin(theta),
                    cz + rz * math.cos(phi)))
            rows.append(row)
        top = self.add_vertex(cx, cy, cz + rz)
        bot = self.add_vertex(cx, cy, cz - rz)
        for j in range(n_lon):
            k = (j + 1) % n_lon
            self.add_face(top, rows[0][j], rows[0][k])
            self.add_face(bot, rows[-1][k], rows[-1][j])
        for i in range(len(rows) - 1):
            for j in range(n_lon):
                k = (j + 1) % n_lon
                self.add_face(rows[i][j], rows[i + 1][j], rows[i + 1][k])
                self.add_face(rows[i][j], rows[i + 1][k], rows[i][k])

    def write_obj(self, path: Path, header: str):
        lines = [f"# {header}"]
        for v in self.vertices:
            lines.append("v %.6f %.6f %.6f" % v)
        for f in self.faces:
            lines.append("f %d %d %d" % f)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Objects: mesh builders plus part annotations
# ---------------------------------------------------------------------------
# part = (part_id, grasp_type, center, half_extents, face)
# face: 0..5 = +x,-x,+y,-y,+z,-z of the (axis-aligned) part box.

IDQ = "1 0 0 0"


def build_chips_can(m: MeshBuilder):
    m.add_cylinder(0.0375, 0.235, "z", (0, 0, 0.1175), n=20)
    return [
        ("body_lower", "large_diameter", (0, 0, 0.07), (0.05, 0.05, 0.045), 0),
        ("body_upper", "large_diameter", (0, 0, 0.165), (0.05, 0.05, 0.045), 1),
        ("top", "sphere_4_fingers", (0, 0, 0.235), (0.047, 0.047, 0.022), 4),
    ]


def build_mug(m: MeshBuilder):
    m.add_cylinder(0.045, 0.095, "z", (0, 0, 0.0475), n=20)
    m.add_box(0.071, 0, 0.0475, 0.026, 0.008, 0.0275)  # handle tab at +x
    return [
        ("body", "large_diameter", (0, 0, 0.0475), (0.055, 0.055, 0.0425), 1),
        ("top_left", "sphere_4_fingers", (0, 0.027, 0.105), (0.055, 0.025, 0.018), 4),
        ("top_right", "sphere_4_fingers", (0, -0.027, 0.105), (0.055, 0.025, 0.018), 4),
        ("handle", "prismatic_2_fingers", (0.075, 0, 0.0475), (0.024, 0.02, 0.034), 0),
    ]


def build_mustard(m: MeshBuilder):
    m.add_box(0, 0, 0.095, 0.029, 0.0475, 0.095)
    m.add_cylinder(0.016, 0.02, "z", (0, 0, 0.2), n=12)  # cap
    return [
        ("side_front", "large_diameter", (0.0225, 0, 0.085), (0.0225, 0.058, 0.062), 0),
        ("side_back", "large_diameter", (-0.0225, 0, 0.085), (0.0225, 0.058, 0.062), 1),
        ("cap", "tripod", (0, 0, 0.2), (0.024, 0.03, 0.026), 4),
    ]


def build_hammer(m: MeshBuilder):
    m.add_cylinder(0.0125, 0.22, "x", (0.07, 0, 0.0125), n=14)  # handle
    m.add_box(-0.075, 0, 0.025, 0.035, 0.045, 0.025)  # head
    return [
        ("handle", "small_diameter", (0.07, 0, 0.015), (0.075, 0.022, 0.022), 4),
    ]


def build_meat_can(m: MeshBuilder):
    m.add_box(0, 0, 0.0415, 0.0475, 0.029, 0.0415)
    return [
        ("side_near", "medium_wrap", (0, 0.0225, 0.0415), (0.0575, 0.0225, 0.0515), 2),
        ("side_far", "medium_wrap", (0, -0.0225, 0.0415), (0.0575, 0.0225, 0.0515), 3),
        ("lid_front", "sphere_4_fingers", (0.03, 0, 0.088), (0.0275, 0.039, 0.014), 4),
        ("lid_back", "sphere_4_fingers", (-0.03, 0, 0.088), (0.0275, 0.039, 0.014), 4),
    ]


def build_plum(m: MeshBuilder):
    m.add_ellipsoid(0.026, 0.026, 0.026, (0, 0, 0.026))
    return [
        ("whole", "power_sphere", (0, 0, 0.026), (0.034, 0.034, 0.034), 4),
    ]


def build_baseball_ball(m: MeshBuilder):
    m.add_ellipsoid(0.0365, 0.0365, 0.0365, (0, 0, 0.0365))
    return [
        ("whole", "power_sphere", (0, 0, 0.0365), (0.0445, 0.0445, 0.0445), 4),
    ]


def build_spoon(m: MeshBuilder):
    m.add_box(-0.035, 0, 0.0025, 0.06, 0.006, 0.0025)  # handle
    m.add_ellipsoid(0.032, 0.022, 0.008, (0.057, 0, 0.008))  # bowl
    return [
        ("handle", "prismatic_4_fingers", (-0.04, 0, 0.01), (0.055, 0.016, 0.014), 4),
    ]


def build_large_marker(m: MeshBuilder):
    m.add_cylinder(0.009, 0.121, "x", (0, 0, 0.009), n=12)
    return [
        ("body", "prismatic_4_fingers", (0, 0, 0.011), (0.068, 0.016, 0.015), 4),
    ]


def build_scissors(m: MeshBuilder):
    m.add_box(0.048, 0, 0.004, 0.044, 0.011, 0.004)  # blades
    m.add_box(-0.045, 0, 0.006, 0.041, 0.019, 0.006)  # handle loops
    return [
        ("blades", "adducted_thumb", (0.049, 0, 0.009), (0.047, 0.018, 0.013), 4),
        ("handles", "prismatic_4_fingers", (-0.049, 0, 0.009), (0.047, 0.026, 0.013), 4),
    ]


def build_spatula(m: MeshBuilder):
    m.add_box(-0.09, 0, 0.005, 0.07, 0.011, 0.005)  # handle
    m.add_box(0.0675, 0, 0.003, 0.0475, 0.035, 0.003)  # blade
    return [
        ("blade_left", "adducted_thumb", (0.0675, 0.0195, 0.008), (0.0525, 0.0175, 0.012), 4),
        ("blade_right", "adducted_thumb", (0.0675, -0.0195, 0.008), (0.0525, 0.0175, 0.012), 4),
        ("handle", "prismatic_4_fingers", (-0.09, 0, 0.009), (0.0775, 0.017, 0.013), 4),
    ]


def build_banana(m: MeshBuilder):
    m.add_box(-0.042, 0.006, 0.0155, 0.048, 0.0155, 0.0155, yaw=math.radians(12))
    m.add_box(0.042, 0.006, 0.0155, 0.048, 0.0155, 0.0155, yaw=math.radians(-12))
    m.add_box(0.095, -0.004, 0.014, 0.012, 0.008, 0.008, yaw=math.radians(-12))  # stem
    return [
        ("middle", "prismatic_4_fingers", (0, 0.008, 0.016), (0.05, 0.03, 0.021), 4),
        ("stem", "tripod", (0.079, -0.002, 0.016), (0.026, 0.022, 0.021), 4),
    ]


def build_pitcher(m: MeshBuilder):
    m.add_cylinder(0.054, 0.242, "z", (0, 0, 0.121), n=20)
    m.add_box(0.0745, 0, 0.135, 0.0205, 0.009, 0.05)  # handle
    return [
        ("handle", "adducted_thumb", (0.078, 0, 0.135), (0.028, 0.024, 0.062), 0),
        ("top_rim", "prismatic_4_fingers", (0, 0, 0.246), (0.06, 0.06, 0.022), 4),
    ]


def build_plate(m: MeshBuilder):
    m.add_cylinder(0.129, 0.016, "z", (0, 0, 0.008), n=28)
    return [
        ("rim_near", "adducted_thumb", (0, 0.1, 0.012), (0.052, 0.036, 0.018), 4),
        ("rim_far", "adducted_thumb", (0, -0.1, 0.012), (0.052, 0.036, 0.018), 4),
    ]


def build_red_wood_block(m: MeshBuilder):
    m.add_box(0, 0, 0.0225, 0.0225, 0.0225, 0.0225)
    return [
        ("block", "tripod", (0, 0, 0.0225), (0.0305, 0.0305, 0.0305), 4),
    ]


BUILDERS = [
    ("chips_can", build_chips_can),
    ("mug", build_mug),
    ("mustard", build_mustard),
    ("hammer", build_hammer),
    ("meat_can", build_meat_can),
    ("plum", build_plum),
    ("baseball_ball", build_baseball_ball),
    ("spoon", build_spoon),
    ("large_marker", build_large_marker),
    ("scissors", build_scissors),
    ("spatula", build_spatula),
    ("banana", build_banana),
    ("pitcher", build_pitcher),
    ("plate", build_plate),
    ("red_wood_block", build_red_wood_block),
]

MAP_LINES = [
    "adducted_thumb -> lateral",
    "large_diameter -> power",
    "small_diameter -> power",
    "medium_wrap -> power",
    "sphere_4_fingers -> power",
    "power_sphere -> power",
    "prismatic_4_fingers -> pinch",
    "tripod -> pinch_3_digit",
    "prismatic_2_fingers -> pinch_3_digit",
]


def main():
    mesh_dir = DATA / "meshes"
    mesh_dir.mkdir(parents=True, exist_ok=True)
    lines = [
        "# Bundled grasp taxonomy: 15 tabletop objects, 31 graspable parts.",
        "# Object frames: origin at the bottom center (resting face on the",
        "# table plane), +z up, +x front. Part boxes are axis-aligned in the",
        "# object frame; centers/half-extents in meters were authored around",
        "# the low-poly meshes in meshes/ with a 5-15 mm margin.",
        "# face=0..5 selects the box face (+x,-x,+y,-y,+z,-z) whose outward",
        "# normal the palm aligns to at the end of an approach.",
        "",
        "parts_total 31",
    ]
    total = 0
    for name, build in BUILDERS:
        m = MeshBuilder()
        parts = build(m)
        m.write_obj(mesh_dir / f"{name}.obj",
                    f"{name}: {len(m.vertices)} vertices, {len(m.faces)} triangles")
        lines.append("")
        lines.append(f"[object {name}]")
        lines.append(f"mesh meshes/{name}.obj")
        for pid, grasp, c, h, face in parts:
            lines.append(
                "part %s %s %.4f %.4f %.4f %.4f %.4f %.4f %s face=%d"
                % (pid, grasp, c[0], c[1], c[2], h[0], h[1], h[2], IDQ, face))
            total += 1
    lines += ["", "[map]"] + MAP_LINES
    (DATA / "taxonomy.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {len(BUILDERS)} meshes, {total} parts")
    assert total == 31, total


if __name__ == "__main__":
    main()
