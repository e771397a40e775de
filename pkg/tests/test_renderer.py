import numpy as np
import pytest

from preshape_forge.dataset import GenerationParams, generate_sequence
from preshape_forge.renderer import (
    LABEL_OBJECT,
    CameraIntrinsics,
    RenderError,
    RenderScene,
    camera_rays,
    object_pixel_stats,
    parse_texture,
    read_pgm,
    read_ppm,
    render_frame,
    write_pgm8,
    write_pgm16,
    write_ppm,
)
from preshape_forge.geometry import look_rotation, quat_from_axis_angle
from preshape_forge.scene import (
    RandomizationSpec,
    WorkspaceConfig,
    build_render_scene,
    sample_scene,
)


def empty_scene(**kw):
    defaults = dict(
        room_extents=np.array([5.0, 5.0, 3.0]),
        table_extents=np.array([1.0, 1.0]),
        table_top=0.75,
        mesh_vertices=np.zeros((3, 3)),
        mesh_triangles=np.zeros((0, 3), dtype=np.int64),
        part_boxes=[],
        wall=parse_texture("flat:808080"),
        floor=parse_texture("flat:606060"),
        table=parse_texture("flat:a0784a"),
        object_color=np.array([0.8, 0.2, 0.2]),
        light_dir=np.array([0.0, 0.0, -1.0]),
        light_intensity=1.0,
    )
    defaults.update(kw)
    return RenderScene(**defaults)


def scene_with_cube(half=0.1, center=(0, 0, 0.85)):
    cx, cy, cz = center
    verts, tris = [], []
    for sx in (-1, 1):
        for sy in (-1, 1):
            for sz in (-1, 1):
                verts.append([cx + sx * half, cy + sy * half, cz + sz * half])
    for a, b, c, d in [(0, 1, 3, 2), (4, 6, 7, 5), (0, 4, 5, 1),
                       (2, 3, 7, 6), (0, 2, 6, 4), (1, 5, 7, 3)]:
        tris += [(a, b, c), (a, c, d)]
    return empty_scene(mesh_vertices=np.array(verts, dtype=float),
                       mesh_triangles=np.array(tris))


class TestIntrinsics:
    def test_fov_bounds(self):
        with pytest.raises(RenderError):
            CameraIntrinsics((64, 64), 5.0)
        with pytest.raises(RenderError):
            CameraIntrinsics((64, 64), 175.0)

    def test_rays_unit_and_cached(self):
        intr = CameraIntrinsics((32, 24), 60.0)
        rays = camera_rays(intr)
        assert rays.shape == (32 * 24, 3)
        assert np.allclose(np.linalg.norm(rays, axis=1), 1.0, atol=1e-12)
        assert camera_rays(intr) is rays


class TestDepth:
    def test_wall_depth_center_pixel(self):
        # Camera 2 m from the +x wall, looking straight at it.
        scene = empty_scene()
        cam_q = look_rotation((1, 0, 0))
        cam_p = np.array([0.5, 0.0, 1.5])
        intr = CameraIntrinsics((65, 65), 60.0)  # odd size: exact center ray
        fr = render_frame(scene, cam_q, cam_p, intr)
        assert abs(int(fr.depth[32, 32]) - 2000) <= 1

    def test_wall_depth_off_axis_cosine(self):
        scene = empty_scene()
        cam_q = look_rotation((1, 0, 0))
        cam_p = np.array([0.5, 0.0, 1.5])
        intr = CameraIntrinsics((65, 65), 60.0)
        fr = render_frame(scene, cam_q, cam_p, intr)
        rays = camera_rays(intr).reshape(65, 65, 3)
        for (v, u) in [(0, 0), (10, 50), (32, 5), (60, 40)]:
            cos = rays[v, u, 2]  # angle to the optical axis
            expected = 2000.0 / cos
            assert abs(float(fr.depth[v, u]) - expected) <= 1.0

    def test_closed_room_every_pixel_labeled(self):
        scene = empty_scene()
        cam_q = quat_from_axis_angle((0, 0, 1), 0.7)
        fr = render_frame(scene, cam_q, np.array([0.3, -0.2, 1.2]),
                          CameraIntrinsics((48, 48), 80.0))
        assert np.all(fr.labels != 0)
        assert np.all(fr.depth > 0)


class TestDeterminism:
    def test_byte_identical_renders(self, tmp_path):
        scene = scene_with_cube()
        cam_q = look_rotation((0, 0.3, -0.5))
        cam_p = np.array([0.0, -0.9, 1.3])
        intr = CameraIntrinsics((64, 64), 69.0)
        a = render_frame(scene, cam_q, cam_p, intr)
        b = render_frame(scene, cam_q, cam_p, intr)
        for name in ("rgb", "depth", "labels"):
            assert np.array_equal(getattr(a, name), getattr(b, name))
        write_ppm(tmp_path / "a.ppm", a.rgb)
        write_ppm(tmp_path / "b.ppm", b.rgb)
        assert (tmp_path / "a.ppm").read_bytes() == (tmp_path / "b.ppm").read_bytes()


class TestLabels:
    def test_object_and_stats(self):
        scene = scene_with_cube()
        cam_p = np.array([0.0, -0.9, 1.1])
        cam_q = look_rotation(np.array([0, 0, 0.85]) - cam_p)
        fr = render_frame(scene, cam_q, cam_p, CameraIntrinsics((64, 64), 69.0),
                          labels_only=True)
        obj, bg = object_pixel_stats(fr)
        assert obj >= 1 and bg >= 1
        assert obj + bg == 64 * 64
        assert fr.rgb is None

    def test_part_box_layer_only_in_labels(self):
        scene = scene_with_cube()
        scene.part_boxes = [(0, np.eye(3), np.array([0, 0, 0.85]),
                             np.array([0.15, 0.15, 0.15]))]
        cam_p = np.array([0.0, -0.9, 1.1])
        cam_q = look_rotation(np.array([0, 0, 0.85]) - cam_p)
        intr = CameraIntrinsics((64, 64), 69.0)
        with_boxes = render_frame(scene, cam_q, cam_p, intr,
                                  include_part_boxes=True)
        without = render_frame(scene, cam_q, cam_p, intr)
        assert np.any(with_boxes.labels == 10)
        assert np.array_equal(with_boxes.rgb, without.rgb)
        assert np.array_equal(with_boxes.depth, without.depth)
        assert not np.any(with_boxes.labels == LABEL_OBJECT) or \
            np.count_nonzero(with_boxes.labels == LABEL_OBJECT) < \
            np.count_nonzero(without.labels == LABEL_OBJECT)

    def test_label_resolution_independence(self, taxonomy):
        # Downscaled 448x448 labels match 224x224 on a convex scene.
        cfg = WorkspaceConfig()
        scene_inst = sample_scene(cfg, RandomizationSpec(), taxonomy,
                                  "baseball_ball", seed=99)
        rs = build_render_scene(cfg, taxonomy, scene_inst)
        cam_p = np.array([0.0, -0.85, 1.0])
        cam_q = look_rotation(scene_inst.object_pose.translation - cam_p)
        hi = render_frame(rs, cam_q, cam_p, CameraIntrinsics((448, 448), 69.0),
                          labels_only=True)
        lo = render_frame(rs, cam_q, cam_p, CameraIntrinsics((224, 224), 69.0),
                          labels_only=True)
        down = hi.labels[::2, ::2]
        match = np.mean(down == lo.labels)
        assert match >= 0.99


class TestTextures:
    def test_parse_flat_and_checker(self):
        s = parse_texture("flat:ff0080")
        assert np.allclose(s.color_a, [1.0, 0.0, 128 / 255])
        c = parse_texture("checker:000000:ffffff:25")
        assert c.scale == pytest.approx(0.25)
        with pytest.raises(RenderError):
            parse_texture("marble:fancy")

    def test_checker_pattern_alternates(self):
        c = parse_texture("checker:000000:ffffff:100")
        pts = np.array([[0.5, 0.5, 0], [1.5, 0.5, 0], [1.5, 1.5, 0]])
        cols = c.base_color(pts, (0, 1))
        assert np.allclose(cols[0], [0, 0, 0])
        assert np.allclose(cols[1], [1, 1, 1])
        assert np.allclose(cols[2], [0, 0, 0])


class TestRasterIO:
    def test_ppm_round_trip(self, tmp_path):
        gen = np.random.default_rng(0)
        img = gen.integers(0, 256, (24, 32, 3), dtype=np.uint8)
        write_ppm(tmp_path / "x.ppm", img)
        assert np.array_equal(read_ppm(tmp_path / "x.ppm"), img)

    def test_pgm16_round_trip_big_endian(self, tmp_path):
        img = np.array([[0, 1], [258, 65535]], dtype=np.uint16)
        write_pgm16(tmp_path / "x.pgm", img)
        raw = (tmp_path / "x.pgm").read_bytes()
        assert raw.endswith(b"\x00\x00\x00\x01\x01\x02\xff\xff")
        assert np.array_equal(read_pgm(tmp_path / "x.pgm"), img)

    def test_pgm8_round_trip(self, tmp_path):
        img = np.arange(12, dtype=np.uint8).reshape(3, 4)
        write_pgm8(tmp_path / "x.pgm", img)
        assert np.array_equal(read_pgm(tmp_path / "x.pgm"), img)


class TestObjectFractionTrend:
    def test_object_pixels_increase_late_in_approach(self, tmp_path,
                                                     small_workspace,
                                                     randomization):
        # Side-face approach to a convex object: the camera forward axis
        # converges to the travel direction, so the view fills with the
        # object as the hand closes in.
        from preshape_forge.taxonomy import load_taxonomy
        from preshape_forge.taxonomy import DATA_DIR

        tax_file = tmp_path / "sphere.txt"
        tax_file.write_text(
            f"[object baseball_ball]\n"
            f"mesh {DATA_DIR}/meshes/baseball_ball.obj\n"
            "part side power_sphere 0 0 0.0365 0.045 0.045 0.045 1 0 0 0 "
            "face=0\n"
            "[map]\n"
            "adducted_thumb -> lateral\nlarge_diameter -> power\n"
            "small_diameter -> power\nmedium_wrap -> power\n"
            "sphere_4_fingers -> power\npower_sphere -> power\n"
            "prismatic_4_fingers -> pinch\ntripod -> pinch_3_digit\n"
            "prismatic_2_fingers -> pinch_3_digit\n")
        taxonomy = load_taxonomy(tax_file)
        params = GenerationParams(per_pair=1)
        rec = generate_sequence(small_workspace, randomization, taxonomy,
                                "baseball_ball", "side", 0, 0, 424242, params)
        rs = build_render_scene(small_workspace, taxonomy, rec.scene)
        intr = small_workspace.intrinsics()
        n = len(rec.poses)
        start = int(np.floor(0.75 * (n - 1)))
        fractions = []
        for pose in rec.poses[start:]:
            fr = render_frame(rs, pose.rotation, pose.translation, intr,
                              labels_only=True)
            obj, _bg = object_pixel_stats(fr)
            fractions.append(obj)
        assert all(b > a for a, b in zip(fractions, fractions[1:]))
