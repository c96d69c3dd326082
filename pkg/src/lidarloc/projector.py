"""Pinhole projection of point clouds into depth and intensity images.

Camera frames follow the optical convention: +z along the viewing axis,
+x to the right, +y down. A camera :class:`~lidarloc.se3.Pose` maps camera
coordinates into the world.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MissingIntensity
from .scene import PointCloud
from .se3 import Pose, invert

NEAR_EPS = 1e-6


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float = 120.0
    fy: float = 120.0
    cx: float = 80.0
    cy: float = 60.0
    width: int = 160
    height: int = 120

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    def matrix(self):
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    def scaled(self, factor):
        """Intrinsics for an image resized by ``factor``."""
        return CameraIntrinsics(self.fx * factor, self.fy * factor, self.cx * factor,
                                self.cy * factor, int(round(self.width * factor)),
                                int(round(self.height * factor)))


@dataclass(frozen=True)
class ClipPlanes:
    near: float = 0.3
    far: float = 50.0

    def __post_init__(self):
        if not 0 < self.near < self.far:
            raise ValueError("clip planes need 0 < near < far")


def _rasterize(cloud, pose, k, g):
    """Pixel rows, cols, depths and source indices of points inside the frustum."""
    cam = invert(pose).transform(cloud.points)
    z = cam[:, 2]
    ok = (z >= g.near) & (z <= g.far)
    idx = np.nonzero(ok)[0]
    cam = cam[idx]
    u = k.fx * cam[:, 0] / cam[:, 2] + k.cx
    v = k.fy * cam[:, 1] / cam[:, 2] + k.cy
    # strict inequalities discard points on the outer pixel boundary
    inside = (u > -0.5) & (u < k.width - 0.5) & (v > -0.5) & (v < k.height - 0.5)
    u, v, idx, z = u[inside], v[inside], idx[inside], cam[inside, 2]
    cols = np.floor(u + 0.5).astype(np.int64)
    rows = np.floor(v + 0.5).astype(np.int64)
    return rows, cols, z, idx


def _zbuffer(rows, cols, z, idx, width):
    """Winner per pixel: minimum depth, ties to the lowest point index."""
    pix = rows * width + cols
    order = np.lexsort((idx, z, pix))
    pix_s = pix[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = pix_s[1:] != pix_s[:-1]
    return order[first]


def project_depth(cloud: PointCloud, pose: Pose, k: CameraIntrinsics, g: ClipPlanes,
                  return_index=False):
    """Z-buffered sparse depth image; 0 marks pixels with no return.

    With ``return_index`` also returns an (H, W) array of winning point indices
    (-1 where empty).
    """
    depth = np.zeros((k.height, k.width))
    winner = np.full((k.height, k.width), -1, dtype=np.int64)
    if len(cloud):
        rows, cols, z, idx = _rasterize(cloud, pose, k, g)
        if len(idx):
            w = _zbuffer(rows, cols, z, idx, k.width)
            depth[rows[w], cols[w]] = z[w]
            winner[rows[w], cols[w]] = idx[w]
    if return_index:
        return depth, winner
    return depth


def unproject(u, v, depth, pose: Pose, k: CameraIntrinsics):
    """World coordinates of pixel (u, v) at the given depth."""
    u, v, depth = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (u, v, depth)))
    cam = np.stack([(u - k.cx) / k.fx * depth, (v - k.cy) / k.fy * depth, depth], axis=-1)
    return pose.transform(cam.reshape(-1, 3)).reshape(cam.shape)


def _splat(cloud, pose, k, g, splat_radius):
    """Z-buffered square splats: ``(rows, cols, depth, point index)`` of the winners."""
    rows, cols, z, idx = _rasterize(cloud, pose, k, g)
    r = int(splat_radius)
    offs = [(dr, dc) for dr in range(-r, r + 1) for dc in range(-r, r + 1)]
    R = np.concatenate([rows + dr for dr, dc in offs])
    C = np.concatenate([cols + dc for dr, dc in offs])
    Z = np.tile(z, len(offs))
    I = np.tile(idx, len(offs))
    ok = (R >= 0) & (R < k.height) & (C >= 0) & (C < k.width)
    R, C, Z, I = R[ok], C[ok], Z[ok], I[ok]
    w = _zbuffer(R, C, Z, I, k.width)
    return R[w], C[w], Z[w], I[w]


def render_intensity(cloud: PointCloud, pose: Pose, k: CameraIntrinsics, g: ClipPlanes,
                     splat_radius: int = 1, diffusion_iters: int = 100, diffuse=True):
    """Dense grey image from per-point intensities.

    Each visible point is splatted over a (2r+1)^2 square with depth testing,
    then remaining holes are filled by iterative neighbor averaging.
    """
    if cloud.intensity is None:
        raise MissingIntensity("render_intensity needs per-point intensity")
    img = np.zeros((k.height, k.width))
    if len(cloud) == 0:
        return img
    rows, cols, _, idx = _splat(cloud, pose, k, g, splat_radius)
    img[rows, cols] = cloud.intensity[idx]
    if diffuse:
        filled = np.zeros(img.shape, dtype=bool)
        filled[rows, cols] = True
        img = _fill_holes(img, filled, diffusion_iters)
    return np.clip(img, 0.0, 1.0)


def render_surface_depth(cloud: PointCloud, pose: Pose, k: CameraIntrinsics, g: ClipPlanes,
                         splat_radius: int = 1, diffusion_iters: int = 100):
    """Hole-free depth of the visible surfaces, rasterized like :func:`render_intensity`.

    Unlike :func:`project_depth`, splatting stops far points from showing
    through gaps between the samples of a nearer surface.
    """
    depth = np.zeros((k.height, k.width))
    if len(cloud) == 0:
        return depth
    rows, cols, z, _ = _splat(cloud, pose, k, g, splat_radius)
    depth[rows, cols] = z
    filled = depth != 0
    return _fill_holes(depth, filled, diffusion_iters)


def _neighbor_mean(values, mask):
    """Mean of 4-neighbors that are set in ``mask``; count of such neighbors."""
    vals = np.where(mask, values, 0.0)
    pv = np.pad(vals, 1)
    pm = np.pad(mask.astype(float), 1)
    s = pv[:-2, 1:-1] + pv[2:, 1:-1] + pv[1:-1, :-2] + pv[1:-1, 2:]
    n = pm[:-2, 1:-1] + pm[2:, 1:-1] + pm[1:-1, :-2] + pm[1:-1, 2:]
    return s, n


def _fill_holes(img, known, iters):
    img = img.copy()
    known = known.copy()
    for _ in range(iters):
        if known.all():
            break
        s, n = _neighbor_mean(img, known)
        grow = (~known) & (n > 0)
        if not grow.any():
            break
        img[grow] = s[grow] / n[grow]
        known |= grow
    return img


def inpaint_depth(d, iterations: int):
    """Grow observed depth into empty pixels by 4-neighbor averaging."""
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    out = np.array(d, dtype=float)
    for _ in range(iterations):
        known = out != 0
        s, n = _neighbor_mean(out, known)
        grow = (~known) & (n > 0)
        if not grow.any():
            break
        out[grow] = s[grow] / n[grow]
    return out


def normalize_depth(d, g: ClipPlanes):
    """Map depths into [0, 1]; the near plane lands on ``NEAR_EPS`` so it stays nonzero."""
    d = np.asarray(d, dtype=float)
    out = np.zeros_like(d)
    nz = d != 0
    out[nz] = np.maximum((d[nz] - g.near) / (g.far - g.near), NEAR_EPS)
    return out


def denormalize_depth(n, g: ClipPlanes):
    n = np.asarray(n, dtype=float)
    out = np.zeros_like(n)
    nz = n != 0
    out[nz] = g.near + n[nz] * (g.far - g.near)
    return out
