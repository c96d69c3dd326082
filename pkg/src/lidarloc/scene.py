"""Point clouds, a synthetic parking-garage generator and LiDAR sparsity."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DensityTooLow, ParseError
from .se3 import Pose, invert

log = logging.getLogger(__name__)

SURFACE_INTENSITY = {"floor": 0.3, "ceiling": 0.3, "wall": 0.8, "pillar": 0.5}
INTENSITY_NOISE = 0.05
MIN_SCENE_POINTS = 1000


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray
    intensity: np.ndarray | None = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).reshape(-1, 3)
        if not np.isfinite(pts).all():
            raise ValueError("point coordinates must be finite")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)
        if self.intensity is not None:
            inten = np.array(self.intensity, dtype=float).reshape(-1)
            if len(inten) != len(pts):
                raise ValueError(
                    f"intensity length {len(inten)} != point count {len(pts)}")
            inten.flags.writeable = False
            object.__setattr__(self, "intensity", inten)

    def __len__(self):
        return len(self.points)

    def subset(self, index):
        inten = None if self.intensity is None else self.intensity[index]
        return PointCloud(self.points[index], inten)

    @classmethod
    def concat(cls, clouds):
        clouds = list(clouds)
        pts = np.concatenate([c.points for c in clouds]) if clouds else np.zeros((0, 3))
        if clouds and all(c.intensity is not None for c in clouds):
            return cls(pts, np.concatenate([c.intensity for c in clouds]))
        return cls(pts)


@dataclass(frozen=True)
class SceneConfig:
    extent: tuple = (20.0, 10.0, 3.0)
    pillar_spacing: float = 5.0
    pillar_radius: float = 0.3
    wall_thickness: float = 0.2
    point_density_dense: float = 200.0
    beam_count: int = 16
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "extent", tuple(float(v) for v in self.extent))
        if len(self.extent) != 3 or min(self.extent) <= 0:
            raise ValueError("extent must be three positive lengths")
        for name in ("pillar_spacing", "pillar_radius", "wall_thickness",
                     "point_density_dense"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.beam_count < 1:
            raise ValueError("beam_count must be >= 1")
        inner = min(self.extent[0], self.extent[1]) - 2 * self.wall_thickness
        if inner <= 0:
            raise ValueError("walls leave no interior")

    def pillar_centers(self):
        """Pillar lattice inside the walls, offset half a spacing from the wall."""
        ex, ey, _ = self.extent
        t, s, r = self.wall_thickness, self.pillar_spacing, self.pillar_radius
        xs = np.arange(t + s / 2, ex - t - r, s)
        ys = np.arange(t + s / 2, ey - t - r, s)
        xs = xs[xs + r < ex - t]
        ys = ys[ys + r < ey - t]
        return np.array([(x, y) for x in xs for y in ys]).reshape(-1, 2)

    def surfaces(self):
        """Axis-aligned rectangles ``(class, origin, u_vec, v_vec)`` making up the scene."""
        ex, ey, ez = self.extent
        t, r = self.wall_thickness, self.pillar_radius
        lx, ly = ex - 2 * t, ey - 2 * t
        out = [
            ("floor", (t, t, 0.0), (lx, 0, 0), (0, ly, 0)),
            ("ceiling", (t, t, ez), (lx, 0, 0), (0, ly, 0)),
            ("wall", (t, t, 0.0), (lx, 0, 0), (0, 0, ez)),
            ("wall", (t, ey - t, 0.0), (lx, 0, 0), (0, 0, ez)),
            ("wall", (t, t, 0.0), (0, ly, 0), (0, 0, ez)),
            ("wall", (ex - t, t, 0.0), (0, ly, 0), (0, 0, ez)),
        ]
        for cx, cy in self.pillar_centers():
            out += [
                ("pillar", (cx - r, cy - r, 0.0), (2 * r, 0, 0), (0, 0, ez)),
                ("pillar", (cx - r, cy + r, 0.0), (2 * r, 0, 0), (0, 0, ez)),
                ("pillar", (cx - r, cy - r, 0.0), (0, 2 * r, 0), (0, 0, ez)),
                ("pillar", (cx + r, cy - r, 0.0), (0, 2 * r, 0), (0, 0, ez)),
            ]
        return out

    def expected_point_count(self):
        total = 0
        for _, _, u, v in self.surfaces():
            area = float(np.linalg.norm(np.cross(u, v)))
            total += int(round(area * self.point_density_dense))
        return total


def generate_scene(cfg: SceneConfig) -> PointCloud:
    """Sample a dense garage cloud: floor, ceiling, four walls and square pillars.

    Each rectangle gets ``round(area * density)`` uniform samples, and every
    point carries its surface-class intensity plus seeded uniform noise.
    """
    rng = np.random.default_rng(cfg.seed)
    chunks, inten = [], []
    for cls, origin, u, v in cfg.surfaces():
        area = float(np.linalg.norm(np.cross(u, v)))
        n = int(round(area * cfg.point_density_dense))
        ab = rng.random((n, 2))
        pts = np.asarray(origin) + ab[:, :1] * np.asarray(u) + ab[:, 1:] * np.asarray(v)
        chunks.append(pts)
        noise = rng.uniform(-INTENSITY_NOISE, INTENSITY_NOISE, size=n)
        inten.append(np.clip(SURFACE_INTENSITY[cls] + noise, 0.0, 1.0))
    pts = np.concatenate(chunks)
    if len(pts) < MIN_SCENE_POINTS:
        raise DensityTooLow(f"scene has {len(pts)} points, need >= {MIN_SCENE_POINTS}")
    return PointCloud(pts, np.concatenate(inten))


def lidar_subsample(cloud: PointCloud, sensor_pose: Pose, beam_count: int,
                    azimuth_step: float, fov=(-math.radians(15), math.radians(15))):
    """Keep the nearest point per (elevation beam, azimuth) cell seen from the sensor.

    The sensor frame has z up. Elevations outside ``fov`` are dropped. Ties on
    range go to the lower point index.
    """
    if beam_count < 1:
        raise ValueError("beam_count must be >= 1")
    if len(cloud) == 0:
        return cloud
    local = invert(sensor_pose).transform(cloud.points)
    rng_xy = np.hypot(local[:, 0], local[:, 1])
    dist = np.linalg.norm(local, axis=1)
    elev = np.arctan2(local[:, 2], rng_xy)
    azim = np.arctan2(local[:, 1], local[:, 0])
    lo, hi = fov
    beam_w = (hi - lo) / beam_count
    beam = np.floor((elev - lo) / beam_w).astype(np.int64)
    # the upper FOV edge belongs to the top beam
    beam[elev == hi] = beam_count - 1
    keep = (beam >= 0) & (beam < beam_count) & (dist > 0)
    n_az = int(math.ceil(2 * math.pi / azimuth_step))
    az = np.floor((azim + math.pi) / azimuth_step).astype(np.int64) % n_az
    idx = np.nonzero(keep)[0]
    cell = beam[idx] * n_az + az[idx]
    order = np.lexsort((idx, dist[idx], cell))
    cell_sorted = cell[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = cell_sorted[1:] != cell_sorted[:-1]
    chosen = np.sort(idx[order[first]])
    return cloud.subset(chosen)


def build_sparse_map(cloud: PointCloud, sensor_poses, beam_count: int,
                     azimuth_step: float):
    """Union of single scans from several sensor poses, like a scan-accumulated map."""
    chosen = set()
    base = np.arange(len(cloud))
    for pose in sensor_poses:
        scan = _subsample_index(cloud, base, pose, beam_count, azimuth_step)
        chosen.update(scan.tolist())
    return cloud.subset(np.array(sorted(chosen), dtype=np.int64))


def _subsample_index(cloud, base, pose, beam_count, azimuth_step):
    tagged = PointCloud(cloud.points, base.astype(float))
    sub = lidar_subsample(tagged, pose, beam_count, azimuth_step)
    return sub.intensity.astype(np.int64)


def save_cloud(cloud: PointCloud, path):
    """One ``x y z [intensity]`` line per point, exact to float64."""
    rows = cloud.points if cloud.intensity is None else \
        np.column_stack([cloud.points, cloud.intensity])
    np.savetxt(path, rows.reshape(-1, rows.shape[1] if rows.ndim == 2 else 3), fmt="%.17g")


def load_cloud(path) -> PointCloud:
    text = Path(path).read_text()
    pts, inten = [], []
    width = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) not in (3, 4):
            raise ParseError(f"expected 3 or 4 fields, got {len(parts)}", lineno)
        if width is None:
            width = len(parts)
        elif len(parts) != width:
            raise ParseError("mixed rows with and without intensity", lineno)
        try:
            vals = [float(v) for v in parts]
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
        if not all(math.isfinite(v) for v in vals):
            raise ParseError("non-finite value", lineno)
        pts.append(vals[:3])
        if width == 4:
            inten.append(vals[3])
    if width == 4:
        return PointCloud(np.array(pts), np.array(inten))
    return PointCloud(np.array(pts).reshape(-1, 3))
