"""Filter-and-entropy registration of an intensity image against projected depth.

This is the classical pipeline that works on dense depth and degrades on
sparse LiDAR depth: blur / contrast-normalise / Sobel the images, score
candidate poses by normalised mutual information, keep the argmax.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionMismatch, EmptyOverlap, ImageTooSmall
from .projector import (CameraIntrinsics, ClipPlanes, inpaint_depth, project_depth,
                        render_intensity, render_surface_depth)
from .scene import SceneConfig, generate_scene, lidar_subsample
from .se3 import DeltaPose, Pose, apply_delta


def gaussian_kernel(sigma):
    radius = int(math.ceil(3 * sigma))
    x = np.arange(-radius, radius + 1, dtype=float)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def _convolve_axis(img, kernel, axis):
    r = len(kernel) // 2
    pad = [(0, 0), (0, 0)]
    pad[axis] = (r, r)
    p = np.pad(img, pad, mode="symmetric")
    out = np.zeros_like(img, dtype=float)
    n = img.shape[axis]
    for i, kv in enumerate(kernel):
        sl = [slice(None), slice(None)]
        sl[axis] = slice(i, i + n)
        out += kv * p[tuple(sl)]
    return out


def gaussian_blur(img, sigma):
    """Separable Gaussian blur, kernel cut at 3 sigma, mirrored borders."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    img = np.asarray(img, dtype=float)
    if sigma == 0:
        return img.copy()
    k = gaussian_kernel(sigma)
    return _convolve_axis(_convolve_axis(img, k, 0), k, 1)


def local_contrast_normalize(img, window=9):
    """``(v - mean) / (std + 1e-6)`` over a square window around each pixel."""
    if window < 3 or window % 2 == 0:
        raise ValueError("window must be odd and >= 3")
    img = np.asarray(img, dtype=float)
    r = window // 2
    p = np.pad(img, r, mode="symmetric")
    win = sliding_window_view(p, (window, window))
    mu = win.mean(axis=(2, 3))
    sd = win.std(axis=(2, 3))
    return (img - mu) / (sd + 1e-6)


SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
SOBEL_Y = SOBEL_X.T


def sobel_gradient(img):
    """Return ``(magnitude, orientation)`` from the 3x3 Sobel pair."""
    img = np.asarray(img, dtype=float)
    if img.ndim != 2 or min(img.shape) < 3:
        raise ImageTooSmall(f"Sobel needs at least 3x3, got {img.shape}")
    p = np.pad(img, 1, mode="symmetric")
    win = sliding_window_view(p, (3, 3))
    gx = np.einsum("ijkl,kl->ij", win, SOBEL_X)
    gy = np.einsum("ijkl,kl->ij", win, SOBEL_Y)
    return np.hypot(gx, gy), np.arctan2(gy, gx)


def _bin(values, bins):
    lo, hi = values.min(), values.max()
    if hi == lo:
        return np.zeros(len(values), dtype=np.int64)
    idx = np.floor((values - lo) / (hi - lo) * bins).astype(np.int64)
    return np.clip(idx, 0, bins - 1)


def _entropy(counts):
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def nmi_similarity(a, b, bins=16, mask=None):
    """Normalised mutual information ``(H(a) + H(b)) / H(a, b)`` in [1, 2].

    Pixels where either image is exactly zero (no depth return) are left out
    unless an explicit boolean ``mask`` of valid pixels is given.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.shape} vs {b.shape}")
    if bins < 2:
        raise ValueError("bins must be >= 2")
    valid = (a != 0) & (b != 0) if mask is None else np.asarray(mask, dtype=bool)
    if not valid.any():
        raise EmptyOverlap("no pixel pairs to compare")
    ia = _bin(a[valid], bins)
    ib = _bin(b[valid], bins)
    joint = np.bincount(ia * bins + ib, minlength=bins * bins).astype(float)
    h_ab = _entropy(joint)
    if h_ab == 0:
        return 1.0
    h_a = _entropy(np.bincount(ia, minlength=bins).astype(float))
    h_b = _entropy(np.bincount(ib, minlength=bins).astype(float))
    return (h_a + h_b) / h_ab


def prepare_intensity(intensity, blur_sigma=1.0, edges=False):
    out = gaussian_blur(intensity, blur_sigma)
    if edges:
        out = sobel_gradient(out)[0]
    return out


def prepare_depth(depth, inpaint_iterations=0, blur_sigma=0.0, edges=False):
    out = inpaint_depth(depth, inpaint_iterations) if inpaint_iterations else depth
    if edges:
        valid = out != 0
        out = sobel_gradient(gaussian_blur(out, blur_sigma))[0]
        out = np.where(valid, out, 0.0)
    return out


def grid_search_register(intensity, cloud, center, grid, k, g, bins=16, blur_sigma=1.0,
                         inpaint_iterations=0, edges=True, renderer=project_depth):
    """Score every candidate ``apply_delta(center, d)`` by NMI; return ``(best, scores)``.

    ``renderer(cloud, pose, k, g)`` produces the depth image of a candidate.
    Candidates with no overlap score ``-inf``. Ties go to the candidate with the
    smallest 6-vector norm, then to grid order.
    """
    grid = list(grid)
    if not grid:
        raise ValueError("empty candidate grid")
    ref = prepare_intensity(intensity, blur_sigma, edges)
    scores = []
    for d in grid:
        depth = renderer(cloud, apply_delta(center, d), k, g)
        depth = prepare_depth(depth, inpaint_iterations, blur_sigma, edges)
        valid = depth != 0
        try:
            scores.append(nmi_similarity(ref, depth, bins, mask=valid))
        except EmptyOverlap:
            scores.append(-math.inf)
    s = np.array(scores)
    best = max(range(len(grid)),
               key=lambda i: (s[i], -np.linalg.norm(grid[i].as_vector()), -i))
    return grid[best], scores


def x_offset_grid(extent=1.0, step=0.1):
    n = int(round(extent / step))
    return [DeltaPose((0, 0, 0), (i * step, 0, 0)) for i in range(-n, n + 1)]


def paired_registration_trial(seed, k=CameraIntrinsics(), g=ClipPlanes(), grid=None,
                              azimuth_step=math.radians(0.4), bins=16, blur_sigma=1.0,
                              inpaint_iterations=0, edges=True):
    """Register one seeded scene view against dense and sparse depth.

    The dense side renders the full cloud as a hole-filled surface; the sparse
    side projects a single level scan taken at the camera position. Returns
    ``(dense_hit, sparse_hit)``: whether each argmax lands on the true pose.
    """
    from .dataset import aisle_frames

    cfg = SceneConfig(seed=seed)
    cloud = generate_scene(cfg)
    pose = aisle_frames(cfg, 1, np.random.default_rng(seed))[0]
    scan = lidar_subsample(cloud, Pose(np.eye(3), pose.translation), cfg.beam_count,
                           azimuth_step)
    intensity = render_intensity(cloud, pose, k, g)
    grid = x_offset_grid() if grid is None else grid
    hits = []
    for c, renderer in ((cloud, render_surface_depth), (scan, project_depth)):
        best, _ = grid_search_register(intensity, c, pose, grid, k, g, bins, blur_sigma,
                                       inpaint_iterations, edges, renderer)
        hits.append(bool(np.linalg.norm(best.as_vector()) < 1e-9))
    return tuple(hits)
