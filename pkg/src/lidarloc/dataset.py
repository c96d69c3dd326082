"""Training pairs: pose perturbation, depth rendering, splits and on-disk layout."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import pgm
from .errors import DimensionMismatch, TooFewFrames
from .projector import (CameraIntrinsics, ClipPlanes, inpaint_depth, normalize_depth,
                        project_depth, render_intensity)
from .scene import PointCloud, SceneConfig, build_sparse_map, generate_scene
from .se3 import (DeltaPose, PerturbBounds, Pose, apply_delta, invert, pose_diff,
                  rot_z, sample_perturbation)

log = logging.getLogger(__name__)

# camera optical axes (x right, y down, z forward) for a camera looking along world +x
_LOOK_ALONG_X = np.array([[0.0, 0.0, 1.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]])


@dataclass
class PairSample:
    intensity: np.ndarray
    depth: np.ndarray
    label: DeltaPose
    frame_id: int
    sample_id: int = 0
    garage_id: int = 0
    trajectory_id: int = 0
    meta: dict = field(default_factory=dict)


def camera_pose(position, heading, pitch=0.0, roll=0.0):
    """Camera looking horizontally along ``heading`` (radians from world +x), z up."""
    R = rot_z(heading) @ _LOOK_ALONG_X
    # tilt about the camera's own x (pitch) and z (roll) axes
    c, s = math.cos(pitch), math.sin(pitch)
    tilt = np.array([[1, 0, 0], [0, c, -s], [0, s, c]])
    c, s = math.cos(roll), math.sin(roll)
    spin = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])
    return Pose(R @ tilt @ spin, position)


def aisle_frames(cfg: SceneConfig, n_frames, rng, height=(1.2, 1.8), margin=1.5,
                 lateral=0.8, tilt=math.radians(3)):
    """Random camera poses along the central aisle, any heading."""
    ex, ey, _ = cfg.extent
    poses = []
    for _ in range(n_frames):
        x = rng.uniform(margin, ex - margin)
        y = ey / 2 + rng.uniform(-lateral, lateral)
        z = rng.uniform(*height)
        heading = rng.uniform(-math.pi, math.pi)
        pitch, roll = rng.uniform(-tilt, tilt, size=2)
        poses.append(camera_pose((x, y, z), heading, pitch, roll))
    return poses


def aisle_scan_poses(cfg: SceneConfig, spacing=4.0, height=1.8):
    """LiDAR poses (z up, identity rotation) every ``spacing`` metres along the aisle."""
    ex, ey, _ = cfg.extent
    xs = np.arange(spacing / 2, ex, spacing)
    return [Pose(np.eye(3), (x, ey / 2, height)) for x in xs]


def perturbed_pose(p_i: Pose, d: DeltaPose) -> Pose:
    """Depth-render pose whose difference to ``p_i`` is exactly ``d``."""
    return apply_delta(p_i, _inverse_delta(d))


def _inverse_delta(d: DeltaPose) -> DeltaPose:
    from .se3 import delta_from_pose

    return delta_from_pose(invert(d.to_pose()))


def render_depth_input(cloud, pose, k, g, inpaint_iterations=0):
    depth = project_depth(cloud, pose, k, g)
    if inpaint_iterations:
        depth = inpaint_depth(depth, inpaint_iterations)
    return normalize_depth(depth, g)


def augment_dataset(frames, cloud: PointCloud, bounds: PerturbBounds, k: CameraIntrinsics,
                    g: ClipPlanes, rng: np.random.Generator, inpaint_iterations=0,
                    first_frame_id=0):
    """Expand each ``(pose, intensity)`` frame into ``bounds.samples_per_frame`` pairs.

    For each draw ``d`` the depth image is rendered at the pose whose
    difference to the frame pose is ``d``; the stored label is
    ``pose_diff(P_i, P_d)``.
    """
    samples = []
    for f, (pose_i, intensity) in enumerate(frames):
        frame_id = first_frame_id + f
        for _ in range(bounds.samples_per_frame):
            d = sample_perturbation(rng, bounds)
            pose_d = perturbed_pose(pose_i, d)
            depth = render_depth_input(cloud, pose_d, k, g, inpaint_iterations)
            if not depth.any():
                log.warning("frame %d: empty depth render, sample skipped", frame_id)
                continue
            samples.append(PairSample(intensity, depth, pose_diff(pose_i, pose_d), frame_id,
                                      sample_id=len(samples),
                                      meta={"pose_i": pose_i, "pose_d": pose_d}))
    return samples


def stack_pair(intensity, depth):
    """(H, W) intensity and normalised depth -> (1, 2, H, W)."""
    intensity = np.asarray(intensity, dtype=float)
    depth = np.asarray(depth, dtype=float)
    if intensity.shape != depth.shape:
        raise DimensionMismatch(f"intensity {intensity.shape} vs depth {depth.shape}")
    return np.stack([intensity, depth])[None]


def unstack_pair(stacked):
    return stacked[0, 0].copy(), stacked[0, 1].copy()


def to_arrays(samples):
    x = np.stack([np.stack([s.intensity, s.depth]) for s in samples]) if samples \
        else np.zeros((0, 2, 0, 0))
    y = np.array([s.label.as_vector() for s in samples]).reshape(-1, 6)
    return x, y


def split_dataset(samples, fractions=(0.6, 0.3, 0.1), seed=0):
    """Partition by frame id so augmentations of one frame never straddle splits."""
    if len(fractions) != 3 or abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("split fractions must be three values summing to 1")
    frames = sorted({s.frame_id for s in samples})
    rng = np.random.default_rng(seed)
    order = [frames[i] for i in rng.permutation(len(frames))]
    n = len(order)
    n_train = int(round(fractions[0] * n))
    n_val = int(round(fractions[1] * n))
    n_test = n - n_train - n_val
    if min(n_train, n_val, n_test) < 1:
        raise TooFewFrames(f"{n} frames cannot fill a {fractions} split")
    groups = (set(order[:n_train]), set(order[n_train:n_train + n_val]),
              set(order[n_train + n_val:]))
    return tuple([s for s in samples if s.frame_id in grp] for grp in groups)


@dataclass(frozen=True)
class DatasetConfig:
    """Everything that determines a rendered dataset."""
    scene: SceneConfig = SceneConfig()
    camera: CameraIntrinsics = CameraIntrinsics()
    clip: ClipPlanes = ClipPlanes()
    bounds: PerturbBounds = PerturbBounds()
    n_frames: int = 40
    azimuth_step: float = math.radians(0.4)
    scan_spacing: float = 4.0
    splat_radius: int = 1
    inpaint_iterations: int = 1
    seed: int = 0


def build_maps(cfg: DatasetConfig, dense=None, sparse=None):
    dense = generate_scene(cfg.scene) if dense is None else dense
    if sparse is None:
        sparse = build_sparse_map(dense, aisle_scan_poses(cfg.scene, cfg.scan_spacing),
                                  cfg.scene.beam_count, cfg.azimuth_step)
    return dense, sparse


def render_frames(cfg: DatasetConfig, dense, rng):
    poses = aisle_frames(cfg.scene, cfg.n_frames, rng)
    return [(p, render_intensity(dense, p, cfg.camera, cfg.clip, cfg.splat_radius))
            for p in poses]


def build_dataset(cfg: DatasetConfig, dense=None, sparse=None):
    """Scene -> sparse map -> frames -> augmented samples, all from ``cfg.seed``."""
    dense, sparse = build_maps(cfg, dense, sparse)
    rng = np.random.default_rng(cfg.seed)
    frames = render_frames(cfg, dense, rng)
    samples = augment_dataset(frames, sparse, cfg.bounds, cfg.camera, cfg.clip, rng,
                              cfg.inpaint_iterations)
    return samples, frames, dense, sparse


INDEX_FIELDS = ["sample_id", "frame_id", "split", "tx", "ty", "tz", "roll", "pitch", "yaw",
                "intensity_file", "depth_file"]


def save_dataset(directory, splits, frames=None):
    """Write PGM images plus ``index.csv``; ``splits`` maps split name -> samples."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = set()
    with open(directory / "index.csv", "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(INDEX_FIELDS)
        for split in ("train", "val", "test"):
            for s in sorted(splits.get(split, []), key=lambda s: s.sample_id):
                ifile = f"frame_{s.frame_id:05d}_intensity.pgm"
                dfile = f"sample_{s.sample_id:06d}_depth.pgm"
                if ifile not in written:
                    pose_i = s.meta.get("pose_i")
                    pgm.save_intensity_pgm(directory / ifile, s.intensity, pose_i)
                    written.add(ifile)
                pgm.save_depth_pgm(directory / dfile, s.depth, s.meta.get("pose_d"))
                wr.writerow([s.sample_id, s.frame_id, split,
                             *(repr(float(v)) for v in s.label.as_vector()), ifile, dfile])


def load_dataset(directory):
    """Inverse of :func:`save_dataset`: returns split name -> list of PairSample."""
    directory = Path(directory)
    splits = {"train": [], "val": [], "test": []}
    cache = {}
    with open(directory / "index.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            ifile = row["intensity_file"]
            if ifile not in cache:
                img, comments = pgm.load_intensity_pgm(directory / ifile)
                cache[ifile] = (img, pgm.pose_from_comments(comments))
            intensity, pose_i = cache[ifile]
            depth, comments = pgm.load_depth_pgm(directory / row["depth_file"])
            label = DeltaPose.from_vector([float(row[k]) for k in
                                           ("tx", "ty", "tz", "roll", "pitch", "yaw")])
            splits[row["split"]].append(PairSample(
                intensity, depth, label, int(row["frame_id"]), int(row["sample_id"]),
                meta={"pose_i": pose_i, "pose_d": pgm.pose_from_comments(comments)}))
    return splits
