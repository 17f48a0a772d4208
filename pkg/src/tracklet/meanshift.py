"""Kernel-histogram mean-shift localisation of a single target.

The target model ``q`` is an Epanechnikov-weighted colour histogram over an
elliptical window of half-sizes (hx, hy). Each step moves the candidate
centre to the mean of window pixel positions weighted by sqrt(q/p), where
``p`` is the same histogram taken at the current candidate centre.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .frame_io import Frame
from .regions import bin_indices, histogram_size


class EmptyWindow(ValueError):
    pass


class ZeroWeightField(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TargetModel:
    q: np.ndarray
    hx: float
    hy: float
    bins_per_channel: int = 8


@dataclass
class TrackResult:
    position: tuple[float, float]
    iterations: int
    converged: bool
    step: float


def _window(frame: Frame, center, hx: float, hy: float):
    """Pixels strictly inside the kernel ellipse: coords, kernel weights, bins."""
    cx, cy = center
    x0 = max(0, math.ceil(cx - hx))
    x1 = min(frame.width - 1, math.floor(cx + hx))
    y0 = max(0, math.ceil(cy - hy))
    y1 = min(frame.height - 1, math.floor(cy + hy))
    if x0 > x1 or y0 > y1:
        return None
    ys, xs = np.mgrid[y0:y1 + 1, x0:x1 + 1]
    r = ((xs - cx) / hx) ** 2 + ((ys - cy) / hy) ** 2
    inside = r < 1.0
    if not inside.any():
        return None
    xs, ys, r = xs[inside], ys[inside], r[inside]
    return xs, ys, 1.0 - r, frame.data[ys, xs]


def kernel_histogram(frame: Frame, center, hx: float, hy: float, bins_per_channel: int = 8):
    """Epanechnikov-weighted, unit-sum histogram around ``center``; None if the window is empty."""
    win = _window(frame, center, hx, hy)
    if win is None:
        return None
    _, _, k, values = win
    size = histogram_size(frame.channels, bins_per_channel)
    h = np.bincount(bin_indices(values, bins_per_channel), weights=k, minlength=size)
    total = h.sum()
    if total <= 0:
        return None
    return h / total


def bhattacharyya(p, q) -> float:
    return float(np.sum(np.sqrt(np.asarray(p) * np.asarray(q))))


def build_target_model(frame: Frame, center, hx: float, hy: float, bins_per_channel: int = 8) -> TargetModel:
    if hx < 1 or hy < 1:
        raise ValueError("window half-sizes must be >= 1")
    q = kernel_histogram(frame, center, hx, hy, bins_per_channel)
    if q is None:
        raise EmptyWindow(f"no support pixels around {center}")
    return TargetModel(q, float(hx), float(hy), bins_per_channel)


def weight_field(frame: Frame, model: TargetModel, y, hx=None, hy=None):
    """Window coordinates and their sqrt(q/p) weights at candidate centre ``y``."""
    hx = model.hx if hx is None else hx
    hy = model.hy if hy is None else hy
    win = _window(frame, y, hx, hy)
    if win is None:
        raise EmptyWindow(f"no support pixels around {y}")
    xs, ys, k, values = win
    bins = bin_indices(values, model.bins_per_channel)
    p = np.bincount(bins, weights=k, minlength=len(model.q))
    p /= p.sum()
    pb = p[bins]
    w = np.zeros(len(bins))
    ok = pb > 0
    w[ok] = np.sqrt(model.q[bins[ok]] / pb[ok])
    return xs, ys, w


def track_step(frame: Frame, model: TargetModel, y0) -> tuple[float, float]:
    xs, ys, w = weight_field(frame, model, y0)
    total = w.sum()
    if total <= 0:
        raise ZeroWeightField(f"target appearance absent around {y0}")
    return float(np.dot(xs, w) / total), float(np.dot(ys, w) / total)


def track(frame: Frame, model: TargetModel, y_init, epsilon: float = 0.1, max_iter: int = 20) -> TrackResult:
    """Iterate :func:`track_step` until the step is shorter than ``epsilon``."""
    if epsilon <= 0 or max_iter < 1:
        raise ValueError("epsilon must be > 0 and max_iter >= 1")
    y0 = (float(y_init[0]), float(y_init[1]))
    d = math.inf
    for k in range(1, max_iter + 1):
        y1 = track_step(frame, model, y0)
        d = math.hypot(y1[0] - y0[0], y1[1] - y0[1])
        y0 = y1
        if d < epsilon:
            return TrackResult(y0, k, True, d)
    return TrackResult(y0, max_iter, False, d)


def estimate_geometry(frame: Frame, model: TargetModel, y, scale: float = 2.0) -> tuple[float, float, float]:
    """Width, height and orientation (degrees, [0, 180)) from weight-image moments.

    Moments are taken over the model window enlarged by ``scale``; at the
    model's own size the converged weights are nearly uniform and only
    reproduce the kernel outline. Width and height are 4 standard deviations
    along the major and minor principal axes.
    """
    xs, ys, w = weight_field(frame, model, y, model.hx * scale, model.hy * scale)
    total = w.sum()
    if total <= 0:
        raise ZeroWeightField(f"target appearance absent around {y}")
    mx = np.dot(xs, w) / total
    my = np.dot(ys, w) / total
    dx, dy = xs - mx, ys - my
    cov = np.array([
        [np.dot(w, dx * dx), np.dot(w, dx * dy)],
        [np.dot(w, dx * dy), np.dot(w, dy * dy)],
    ]) / total
    evals, evecs = np.linalg.eigh(cov)
    minor, major = np.maximum(evals, 0.0)
    vx, vy = evecs[:, 1]
    # y grows downward; report the angle as seen on screen
    angle = math.degrees(math.atan2(-vy, vx)) % 180.0
    if angle >= 180.0:
        angle = 0.0
    return 4.0 * math.sqrt(major), 4.0 * math.sqrt(minor), angle


def reseed(model: TargetModel, y_final, geometry, gamma: float = 0.1) -> TargetModel:
    """Blend the window toward half the estimated extents for the next frame.

    The major axis feeds ``hx`` when it lies within 45 degrees of horizontal,
    ``hy`` otherwise. ``y_final`` is where the next search starts; the caller
    keeps it.
    """
    width, height, angle = geometry
    if 45.0 <= angle < 135.0:
        ext_x, ext_y = height, width
    else:
        ext_x, ext_y = width, height
    hx = (1 - gamma) * model.hx + gamma * ext_x / 2
    hy = (1 - gamma) * model.hy + gamma * ext_y / 2
    return replace(model, hx=max(1.0, hx), hy=max(1.0, hy))
