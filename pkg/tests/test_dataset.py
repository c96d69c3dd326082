import math

import numpy as np
import pytest

from lidarloc.dataset import (DatasetConfig, PairSample, aisle_frames, augment_dataset,
                              build_dataset, camera_pose, load_dataset, perturbed_pose,
                              save_dataset, split_dataset, stack_pair, to_arrays, unstack_pair)
from lidarloc.errors import DimensionMismatch, TooFewFrames
from lidarloc.projector import CameraIntrinsics, ClipPlanes, normalize_depth, project_depth
from lidarloc.scene import SceneConfig, generate_scene
from lidarloc.se3 import DeltaPose, PerturbBounds, pose_diff, sample_perturbation

SMALL_CAM = CameraIntrinsics(fx=30, fy=30, cx=20, cy=15, width=40, height=30)
G = ClipPlanes()


@pytest.fixture(scope="module")
def cloud():
    return generate_scene(SceneConfig(point_density_dense=40))


def test_stack_pair_zero_and_channels():
    z = stack_pair(np.zeros((3, 4)), np.zeros((3, 4)))
    assert z.shape == (1, 2, 3, 4) and not z.any()
    s = stack_pair(np.full((3, 4), 0.2), np.full((3, 4), 0.7))
    assert s[0, 0].mean() == pytest.approx(0.2) and s[0, 1].mean() == pytest.approx(0.7)


def test_unstack_roundtrip():
    rng = np.random.default_rng(0)
    i, d = rng.random((5, 6)), rng.random((5, 6))
    a, b = unstack_pair(stack_pair(i, d))
    assert a.tobytes() == i.tobytes() and b.tobytes() == d.tobytes()


def test_stack_pair_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        stack_pair(np.zeros((3, 4)), np.zeros((4, 3)))


def test_perturbed_pose_label_is_the_draw():
    rng = np.random.default_rng(1)
    p_i = camera_pose((10, 5, 1.5), 0.7, 0.02, -0.01)
    for _ in range(50):
        d = sample_perturbation(rng, PerturbBounds())
        label = pose_diff(p_i, perturbed_pose(p_i, d))
        np.testing.assert_allclose(label.as_vector(), d.as_vector(), atol=1e-12)


def frames_for(cloud, n, rng):
    poses = aisle_frames(SceneConfig(), n, rng)
    return [(p, np.full((SMALL_CAM.height, SMALL_CAM.width), 0.5)) for p in poses]


def test_zero_bounds_single_sample(cloud):
    rng = np.random.default_rng(2)
    frames = frames_for(cloud, 1, rng)
    out = augment_dataset(frames, cloud, PerturbBounds(0.0, 0.0, 1), SMALL_CAM, G, rng)
    assert len(out) == 1
    # R^T R round-off is the only thing separating the label from zero
    assert np.abs(out[0].label.as_vector()).max() < 1e-15
    ref = normalize_depth(project_depth(cloud, frames[0][0], SMALL_CAM, G), G)
    assert out[0].depth.tobytes() == ref.tobytes()


def test_ten_frames_fifty_samples_in_envelope(cloud):
    rng = np.random.default_rng(3)
    out = augment_dataset(frames_for(cloud, 10, rng), cloud, PerturbBounds(), SMALL_CAM, G, rng)
    assert len(out) == 500
    labels = np.array([s.label.as_vector() for s in out])
    assert np.abs(labels[:, :3]).max() <= 0.5
    assert np.abs(labels[:, 3:]).max() <= math.radians(5)
    assert sorted({s.frame_id for s in out}) == list(range(10))


def test_empty_render_is_skipped(cloud, caplog):
    blind = camera_pose((10, 5, 100.0), 0.0)  # far above the roof, looking sideways
    out = augment_dataset([(blind, np.zeros((30, 40)))], cloud, PerturbBounds(samples_per_frame=3),
                          SMALL_CAM, G, np.random.default_rng(4))
    assert out == []
    assert "empty depth render" in caplog.text


def fake_samples(n_frames, per=3):
    return [PairSample(np.zeros((2, 2)), np.zeros((2, 2)), DeltaPose.zero(), f, f * per + k)
            for f in range(n_frames) for k in range(per)]


def test_split_ratios_by_frame():
    tr, va, te = split_dataset(fake_samples(10), (0.6, 0.3, 0.1), seed=0)
    frames = [{s.frame_id for s in part} for part in (tr, va, te)]
    assert [len(f) for f in frames] == [6, 3, 1]
    assert not (frames[0] & frames[1] or frames[0] & frames[2] or frames[1] & frames[2])
    ids = sorted(s.sample_id for part in (tr, va, te) for s in part)
    assert ids == list(range(30))


def test_split_deterministic():
    a = split_dataset(fake_samples(10), seed=5)
    b = split_dataset(fake_samples(10), seed=5)
    assert [[s.sample_id for s in p] for p in a] == [[s.sample_id for s in p] for p in b]


def test_split_too_few_frames():
    with pytest.raises(TooFewFrames):
        split_dataset(fake_samples(2))
    with pytest.raises(ValueError):
        split_dataset(fake_samples(10), (0.5, 0.5, 0.5))


TINY = DatasetConfig(scene=SceneConfig(point_density_dense=40), camera=SMALL_CAM,
                     bounds=PerturbBounds(samples_per_frame=3), n_frames=10, seed=7)


def test_build_dataset_deterministic():
    a = build_dataset(TINY)[0]
    b = build_dataset(TINY)[0]
    xa, ya = to_arrays(a)
    xb, yb = to_arrays(b)
    assert xa.tobytes() == xb.tobytes() and ya.tobytes() == yb.tobytes()
    assert xa.shape == (30, 2, 30, 40)


def test_save_load_roundtrip(tmp_path):
    samples = build_dataset(TINY)[0]
    tr, va, te = split_dataset(samples, seed=1)
    save_dataset(tmp_path, {"train": tr, "val": va, "test": te})
    back = load_dataset(tmp_path)
    assert [len(back[k]) for k in ("train", "val", "test")] == [len(tr), len(va), len(te)]
    orig = {s.sample_id: s for s in samples}
    for s in back["train"] + back["val"] + back["test"]:
        o = orig[s.sample_id]
        assert s.frame_id == o.frame_id
        np.testing.assert_array_equal(s.label.as_vector(), o.label.as_vector())
        assert np.abs(s.depth - o.depth).max() <= 0.5 / 65535 + 1e-12
        assert ((s.depth == 0) == (o.depth == 0)).all()
        assert np.abs(s.intensity - o.intensity).max() <= 0.5 / 255 + 1e-12
        np.testing.assert_allclose(s.meta["pose_d"].matrix(), o.meta["pose_d"].matrix(),
                                   atol=1e-12)
    header = (tmp_path / "index.csv").read_text().splitlines()[0]
    assert header.startswith("sample_id,frame_id,split,tx,ty,tz,roll,pitch,yaw")
