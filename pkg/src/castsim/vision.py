"""Camera-to-workspace calibration.

The overhead camera sees the target plane, so pixel and world coordinates
are related by a plane projective map (homography) estimated from point
correspondences with the normalized DLT.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .control import TargetObservation
from .errors import DegenerateGeometryError


@dataclass(frozen=True)
class Homography:
    H: np.ndarray            # pixel -> world, H[2,2] = 1
    rms_px: float            # reprojection residual in pixels
    rms_world: float         # forward-mapped residual in meters


def _normalizer(pts: np.ndarray) -> np.ndarray:
    """Similarity T moving pts to centroid 0 and mean radius sqrt(2)."""
    c = pts.mean(axis=0)
    d = np.sqrt(((pts - c) ** 2).sum(axis=1)).mean()
    if d < 1e-12:
        raise DegenerateGeometryError("correspondence points coincide")
    s = np.sqrt(2.0) / d
    return np.array([[s, 0.0, -s * c[0]],
                     [0.0, s, -s * c[1]],
                     [0.0, 0.0, 1.0]])


def apply_homography(H: np.ndarray, pts) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    ph = np.column_stack([pts, np.ones(len(pts))]) @ np.asarray(H).T
    w = ph[:, 2]
    if np.any(np.abs(w) < 1e-12):
        raise DegenerateGeometryError("point maps to the line at infinity")
    out = ph[:, :2] / w[:, None]
    return out[0] if single else out


def estimate_homography(pixel_pts, world_pts) -> Homography:
    """Normalized DLT from >= 4 pixel/world correspondences."""
    uv = np.asarray(pixel_pts, dtype=float)
    xy = np.asarray(world_pts, dtype=float)
    if uv.shape != xy.shape or uv.ndim != 2 or uv.shape[1] != 2:
        raise ValueError("need matching (N, 2) pixel and world arrays")
    n = len(uv)
    if n < 4:
        raise DegenerateGeometryError("homography needs at least 4 points")
    T_uv = _normalizer(uv)
    T_xy = _normalizer(xy)
    a = apply_homography(T_uv, uv)
    b = apply_homography(T_xy, xy)

    rows = np.zeros((2 * n, 9))
    rows[0::2, 0:2] = a
    rows[0::2, 2] = 1.0
    rows[0::2, 6:8] = -a * b[:, :1]
    rows[0::2, 8] = -b[:, 0]
    rows[1::2, 3:5] = a
    rows[1::2, 5] = 1.0
    rows[1::2, 6:8] = -a * b[:, 1:2]
    rows[1::2, 8] = -b[:, 1]
    _, sv, vt = np.linalg.svd(rows)
    if sv[-2] < 1e-10 * sv[0]:
        raise DegenerateGeometryError("correspondences are degenerate "
                                      "(collinear or coincident points)")
    Hn = vt[-1].reshape(3, 3)
    H = np.linalg.inv(T_xy) @ Hn @ T_uv
    if abs(H[2, 2]) < 1e-12:
        raise DegenerateGeometryError("homography is not normalizable")
    H = H / H[2, 2]

    world_hat = apply_homography(H, uv)
    rms_world = float(np.sqrt(np.mean(np.sum((world_hat - xy) ** 2,
                                             axis=1))))
    px_hat = apply_homography(np.linalg.inv(H), xy)
    rms_px = float(np.sqrt(np.mean(np.sum((px_hat - uv) ** 2, axis=1))))
    return Homography(H=H, rms_px=rms_px, rms_world=rms_world)


def load_correspondences_csv(path):
    """Rows of u, v, x, y; a non-numeric first row is taken as a header."""
    uv, xy = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or not row[0].strip():
                continue
            try:
                vals = [float(c) for c in row[:4]]
            except ValueError:
                if not uv:
                    continue
                raise
            if len(vals) != 4:
                raise ValueError(f"expected u,v,x,y row, got {row!r}")
            uv.append(vals[:2])
            xy.append(vals[2:])
    if not uv:
        raise ValueError(f"no correspondences in {path}")
    return np.asarray(uv), np.asarray(xy)


def synth_observer(world_path, t0: float, t1: float, H_true: np.ndarray,
                   H_est: np.ndarray, sigma_px: float = 0.0,
                   period: float = 0.0625, quantize: bool = True,
                   rng: np.random.Generator | None = None):
    """Simulated camera: sample the true target path on the frame clock,
    render to pixels through the true map, corrupt with sensor noise, and
    report world-frame observations through the estimated map."""
    if rng is None:
        rng = np.random.default_rng(0)
    H_world_to_px = np.linalg.inv(H_true)
    obs = []
    t = t0
    while t <= t1 + 1e-12:
        xy = np.asarray(world_path(t), dtype=float)
        px = apply_homography(H_world_to_px, xy[None, :])[0]
        px = px + rng.normal(0.0, sigma_px, 2)
        if quantize:
            px = np.round(px)
        est = apply_homography(H_est, px[None, :])[0]
        obs.append(TargetObservation(t=t, x=float(est[0]), y=float(est[1])))
        t += period
    return obs
