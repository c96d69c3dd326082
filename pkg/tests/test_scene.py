import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lidarloc.errors import DensityTooLow, ParseError
from lidarloc.scene import (PointCloud, SceneConfig, generate_scene, lidar_subsample,
                            load_cloud, save_cloud)
from lidarloc.se3 import Pose

REFERENCE_SENSOR = Pose(np.eye(3), (10.0, 5.0, 1.8))


def analytic_area(extent, t, spacing, r, n_pillars):
    ex, ey, ez = extent
    lx, ly = ex - 2 * t, ey - 2 * t
    return 2 * lx * ly + 2 * (lx + ly) * ez + n_pillars * 4 * (2 * r) * ez


def test_point_count_matches_surface_area():
    cfg = SceneConfig(extent=(20, 10, 3), point_density_dense=50)
    cloud = generate_scene(cfg)
    # 4 x 2 pillars at x = 2.7, 7.7, 12.7, 17.7 and y = 2.7, 7.7
    assert len(cfg.pillar_centers()) == 8
    area = analytic_area((20, 10, 3), 0.2, 5.0, 0.3, 8)
    # each of the 38 rectangles rounds independently
    assert abs(len(cloud) - area * 50) <= 38 * 0.5


def test_density_scales_linearly():
    a = len(generate_scene(SceneConfig(point_density_dense=50)))
    b = len(generate_scene(SceneConfig(point_density_dense=200)))
    assert abs(b / a - 4) < 0.01


def test_same_seed_is_identical():
    a = generate_scene(SceneConfig(seed=3))
    b = generate_scene(SceneConfig(seed=3))
    assert a.points.tobytes() == b.points.tobytes()
    assert a.intensity.tobytes() == b.intensity.tobytes()
    c = generate_scene(SceneConfig(seed=4))
    assert a.points.tobytes() != c.points.tobytes()


def test_points_inside_extent_and_intensity_classes():
    cfg = SceneConfig()
    cloud = generate_scene(cfg)
    assert (cloud.points >= 0).all()
    assert (cloud.points <= np.array(cfg.extent)).all()
    assert cloud.intensity.min() >= 0.25 - 1e-12 and cloud.intensity.max() <= 0.85 + 1e-12


def test_density_too_low():
    with pytest.raises(DensityTooLow):
        generate_scene(SceneConfig(extent=(3, 3, 1), point_density_dense=1))


def test_single_point_is_kept():
    cloud = PointCloud([[5.0, 0.0, 0.0]])
    out = lidar_subsample(cloud, Pose.identity(), 16, math.radians(0.4))
    assert len(out) == 1


def test_fine_bins_keep_every_visible_point():
    rng = np.random.default_rng(0)
    pts = rng.uniform(-20, 20, size=(500, 3))
    cloud = PointCloud(pts)
    fov = math.radians(15)
    out = lidar_subsample(cloud, Pose.identity(), 100_000, 1e-7)
    elev = np.arctan2(pts[:, 2], np.hypot(pts[:, 0], pts[:, 1]))
    visible = np.abs(elev) < fov
    assert len(out) == visible.sum()
    assert set(map(tuple, out.points)) == set(map(tuple, pts[visible]))


def test_nearest_point_wins():
    cloud = PointCloud([[10.0, 0.0, 0.0], [5.0, 0.0, 0.0], [7.0, 0.0, 0.0]])
    out = lidar_subsample(cloud, Pose.identity(), 16, math.radians(1))
    np.testing.assert_array_equal(out.points, [[5.0, 0.0, 0.0]])


def test_reference_scene_sparsity():
    dense = generate_scene(SceneConfig())
    sparse = lidar_subsample(dense, REFERENCE_SENSOR, 16, math.radians(0.4))
    ratio = len(sparse) / len(dense)
    # golden value from the binning run on the reference scene
    assert ratio == pytest.approx(0.10576, abs=1e-4)
    assert ratio < 0.11


def test_subsample_is_idempotent():
    dense = generate_scene(SceneConfig(point_density_dense=50))
    once = lidar_subsample(dense, REFERENCE_SENSOR, 16, math.radians(0.4))
    twice = lidar_subsample(once, REFERENCE_SENSOR, 16, math.radians(0.4))
    assert once.points.tobytes() == twice.points.tobytes()


def test_subsample_output_is_subset():
    dense = generate_scene(SceneConfig(point_density_dense=50))
    sparse = lidar_subsample(dense, REFERENCE_SENSOR, 16, math.radians(1.0))
    rows = set(map(tuple, dense.points))
    assert all(tuple(p) in rows for p in sparse.points)


def test_load_empty_file(tmp_path):
    p = tmp_path / "empty.txt"
    p.write_text("")
    assert len(load_cloud(p)) == 0


def test_load_single_line(tmp_path):
    p = tmp_path / "one.txt"
    p.write_text("1.0 2.0 3.0 0.5\n")
    cloud = load_cloud(p)
    np.testing.assert_array_equal(cloud.points, [[1.0, 2.0, 3.0]])
    np.testing.assert_array_equal(cloud.intensity, [0.5])


def test_parse_error_names_line(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("1 2 3\n1 2 x\n")
    with pytest.raises(ParseError) as exc:
        load_cloud(p)
    assert exc.value.line == 2


def test_generated_scene_roundtrip(tmp_path):
    cloud = generate_scene(SceneConfig(point_density_dense=20, extent=(10, 8, 3)))
    path = tmp_path / "scene.txt"
    save_cloud(cloud, path)
    back = load_cloud(path)
    assert np.abs(back.points - cloud.points).max() <= 1e-6
    assert np.abs(back.intensity - cloud.intensity).max() <= 1e-6


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(*[st.floats(-1e3, 1e3)] * 4), max_size=20))
def test_roundtrip_property(tmp_path_factory, rows):
    path = tmp_path_factory.mktemp("rt") / "c.txt"
    arr = np.array(rows, dtype=float).reshape(-1, 4)
    cloud = PointCloud(arr[:, :3], arr[:, 3])
    save_cloud(cloud, path)
    back = load_cloud(path)
    assert np.abs(back.points - cloud.points).max(initial=0) <= 1e-6
