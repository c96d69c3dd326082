import hashlib

import numpy as np
import pytest

from lidarloc.dataset import camera_pose
from lidarloc.errors import MissingIntensity
from lidarloc.projector import (CameraIntrinsics, ClipPlanes, NEAR_EPS, inpaint_depth,
                                normalize_depth, project_depth, render_intensity, unproject)
from lidarloc.scene import PointCloud, SceneConfig, generate_scene
from lidarloc.se3 import Pose

K = CameraIntrinsics(fx=100, fy=100, cx=80, cy=60, width=160, height=120)
G = ClipPlanes(0.3, 50.0)
EYE = Pose.identity()


def test_optical_axis_point():
    d = project_depth(PointCloud([[0, 0, 5]]), EYE, K, G)
    assert d[60, 80] == 5.0
    assert np.count_nonzero(d) == 1


def test_off_axis_point():
    # u = 100 * 1 / 5 + 80 = 100
    d = project_depth(PointCloud([[1, 0, 5]]), EYE, K, G)
    assert d[60, 100] == 5.0


def test_zbuffer_keeps_minimum():
    d = project_depth(PointCloud([[0, 0, 5], [0, 0, 4]]), EYE, K, G)
    assert d[60, 80] == 4.0


def test_clipping_and_bounds():
    cloud = PointCloud([[0, 0, 0.1], [0, 0, 60], [0, 0, -5], [100, 0, 5]])
    assert not project_depth(cloud, EYE, K, G).any()


def test_boundary_pixel_discarded():
    # u = -0.5 exactly sits on the outer edge of column 0
    x = (-0.5 - 80) * 5 / 100
    d = project_depth(PointCloud([[x, 0, 5]]), EYE, K, G)
    assert not d.any()


def test_camera_pose_is_applied():
    pose = Pose(np.eye(3), (0, 0, -1))
    d = project_depth(PointCloud([[0, 0, 4]]), pose, K, G)
    assert d[60, 80] == 5.0


def random_pose(rng):
    return Pose.from_euler(rng.uniform(-2, 2, 3), *rng.uniform(-0.3, 0.3, 3))


def test_backprojection_recovers_winners():
    rng = np.random.default_rng(0)
    pose = random_pose(rng)
    k = CameraIntrinsics(fx=rng.uniform(50, 150), fy=rng.uniform(50, 150), cx=40.0, cy=30.0,
                         width=80, height=60)
    cam_pts = np.column_stack([rng.uniform(-3, 3, 1000), rng.uniform(-3, 3, 1000),
                               rng.uniform(1, 10, 1000)])
    cloud = PointCloud(pose.transform(cam_pts))
    depth, winner = project_depth(cloud, pose, k, G, return_index=True)
    rows, cols = np.nonzero(depth)
    src = cloud.points[winner[rows, cols]]
    cam = (src - pose.translation) @ pose.rotation
    u = k.fx * cam[:, 0] / cam[:, 2] + k.cx
    v = k.fy * cam[:, 1] / cam[:, 2] + k.cy
    back = unproject(u, v, depth[rows, cols], pose, k)
    assert np.abs(back - src).max() < 1e-6
    assert np.abs(np.rint(u) - cols).max() == 0


def test_permutation_invariance():
    rng = np.random.default_rng(1)
    cloud = generate_scene(SceneConfig(point_density_dense=30))
    pose = camera_pose((10, 5, 1.5), 0.3)
    perm = rng.permutation(len(cloud))
    a = project_depth(cloud, pose, CameraIntrinsics(), G)
    b = project_depth(cloud.subset(perm), pose, CameraIntrinsics(), G)
    np.testing.assert_array_equal(a, b)


def test_render_intensity_empty_cloud():
    img = render_intensity(PointCloud(np.zeros((0, 3)), np.zeros(0)), EYE, K, G)
    assert img.shape == (120, 160) and not img.any()


def test_render_intensity_splat():
    img = render_intensity(PointCloud([[0, 0, 5]], [0.7]), EYE, K, G, splat_radius=1,
                           diffuse=False)
    np.testing.assert_array_equal(img[59:62, 79:82], 0.7)
    assert np.count_nonzero(img) == 9


def test_render_intensity_needs_intensity():
    with pytest.raises(MissingIntensity):
        render_intensity(PointCloud([[0, 0, 5]]), EYE, K, G)


# regression pin: recorded from this renderer, not an external reference
def test_render_intensity_golden_hash():
    cloud = generate_scene(SceneConfig())
    img = render_intensity(cloud, camera_pose((10, 5, 1.5), 0.0), CameraIntrinsics(), G, 1)
    assert (img > 0).all()
    q = np.rint(img * 255).astype(np.uint8)
    digest = hashlib.sha256(q.tobytes()).hexdigest()
    assert digest == GOLDEN_INTENSITY_SHA256


GOLDEN_INTENSITY_SHA256 = "365b92f7ae70e0e56774f0e986d0a2c9656eea3be539a7c028b15b128f741f75"


def test_inpaint_zero_iterations_identity():
    d = np.array([[0, 1.0], [2.0, 0]])
    np.testing.assert_array_equal(inpaint_depth(d, 0), d)


def test_inpaint_single_hole():
    d = np.full((3, 3), 2.0)
    d[1, 1] = 0
    assert inpaint_depth(d, 1)[1, 1] == 2.0


def test_inpaint_checkerboard():
    d = np.full((6, 6), 5.0)
    d[(np.add.outer(np.arange(6), np.arange(6)) % 2) == 0] = 0
    np.testing.assert_array_equal(inpaint_depth(d, 1), 5.0)


def test_inpaint_preserves_observed_pixels():
    rng = np.random.default_rng(2)
    d = rng.uniform(1, 10, (30, 40)) * (rng.random((30, 40)) < 0.2)
    out = inpaint_depth(d, 3)
    np.testing.assert_array_equal(out[d != 0], d[d != 0])


def test_normalize_depth():
    d = np.array([[0.0, G.near, G.far, (G.near + G.far) / 2]])
    n = normalize_depth(d, G)
    assert n[0, 0] == 0.0
    assert n[0, 1] == NEAR_EPS
    assert n[0, 2] == 1.0
    assert n[0, 3] == pytest.approx(0.5, abs=1e-15)


def test_intrinsics_validation():
    with pytest.raises(ValueError):
        CameraIntrinsics(fx=-1)
    with pytest.raises(ValueError):
        CameraIntrinsics(cx=200)
    with pytest.raises(ValueError):
        ClipPlanes(2.0, 1.0)
