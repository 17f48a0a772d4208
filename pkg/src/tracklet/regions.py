"""Connected regions of a foreground mask and their appearance features.

Histograms are flat float arrays. For RGB frames with ``c`` bins per channel
the layout is ``r_bin * c**2 + g_bin * c + b_bin`` (length ``c**3``); for
gray frames it is just the ``c`` intensity bins.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .frame_io import Frame

_EIGHT = np.ones((3, 3), dtype=bool)


class EmptyComponent(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


class IndivisibleBins(ValueError):
    pass


@dataclass(frozen=True)
class BoundingBox:
    x_min: int
    y_min: int
    x_max: int
    y_max: int

    @property
    def width(self) -> int:
        return self.x_max - self.x_min + 1

    @property
    def height(self) -> int:
        return self.y_max - self.y_min + 1

    def intersects(self, other: "BoundingBox") -> bool:
        return not (
            self.x_max < other.x_min or other.x_max < self.x_min
            or self.y_max < other.y_min or other.y_max < self.y_min
        )

    def as_list(self) -> list[int]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]


@dataclass(frozen=True, eq=False)
class RegionFeatures:
    label: int
    bbox: BoundingBox
    area: int
    centroid: tuple[float, float]
    hist_upper: np.ndarray
    hist_lower: np.ndarray


def label_components(mask: np.ndarray) -> list[np.ndarray]:
    """8-connected components of ``mask``.

    Each component is an (n, 2) int array of ``(y, x)`` rows in raster order;
    components are ordered by the raster position of their first pixel.
    """
    mask = np.asarray(mask, dtype=bool)
    labels, count = ndimage.label(mask, structure=_EIGHT)
    if count == 0:
        return []
    ys, xs = np.nonzero(labels)  # raster order
    lab = labels[ys, xs]
    order = np.argsort(lab, kind="stable")
    bounds = np.searchsorted(lab[order], np.arange(1, count + 2))
    comps = [
        np.stack([ys[order[a:b]], xs[order[a:b]]], axis=1)
        for a, b in zip(bounds[:-1], bounds[1:])
    ]
    comps.sort(key=lambda c: (c[0, 0], c[0, 1]))
    return comps


def bin_indices(pixels: np.ndarray, bins_per_channel: int) -> np.ndarray:
    """Flat histogram bin of each pixel value (rows of 1 or 3 channels)."""
    q = pixels.astype(np.int64) * bins_per_channel // 256
    if q.ndim == 1 or q.shape[1] == 1:
        return q.reshape(-1)
    c = bins_per_channel
    return q[:, 0] * c * c + q[:, 1] * c + q[:, 2]


def histogram_size(channels: int, bins_per_channel: int) -> int:
    return bins_per_channel ** 3 if channels == 3 else bins_per_channel


def color_histogram(pixels: np.ndarray, bins_per_channel: int, channels: int) -> np.ndarray:
    size = histogram_size(channels, bins_per_channel)
    if len(pixels) == 0:
        return np.zeros(size)
    counts = np.bincount(bin_indices(pixels, bins_per_channel), minlength=size).astype(np.float64)
    return counts / counts.sum()


def extract_features(component: np.ndarray, frame: Frame, bins_per_channel: int = 8, label: int = 0) -> RegionFeatures:
    comp = np.asarray(component)
    if comp.size == 0:
        raise EmptyComponent("component has no pixels")
    ys, xs = comp[:, 0], comp[:, 1]
    bbox = BoundingBox(int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max()))
    centroid = (float(xs.sum()) / len(xs), float(ys.sum()) / len(ys))
    values = frame.data[ys, xs]
    upper = ys < bbox.y_min + bbox.height / 2
    return RegionFeatures(
        label=label,
        bbox=bbox,
        area=len(comp),
        centroid=centroid,
        hist_upper=color_histogram(values[upper], bins_per_channel, frame.channels),
        hist_lower=color_histogram(values[~upper], bins_per_channel, frame.channels),
    )


def detect_regions(mask: np.ndarray, frame: Frame, min_area: int = 15, bins_per_channel: int = 8) -> list[RegionFeatures]:
    """Label ``mask``, drop components smaller than ``min_area``, extract features."""
    kept = [c for c in label_components(mask) if len(c) >= min_area]
    return [extract_features(c, frame, bins_per_channel, label=i) for i, c in enumerate(kept)]


def l1_distance(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise LengthMismatch(f"{a.shape} vs {b.shape}")
    return float(np.abs(a - b).sum())


def d_total(a: RegionFeatures, b: RegionFeatures) -> float:
    return l1_distance(a.hist_upper, b.hist_upper) + l1_distance(a.hist_lower, b.hist_lower)


def downsample_histogram(h, target_bins: int, mode: str = "sample") -> np.ndarray:
    """Reduce an N-bin histogram to ``target_bins`` and renormalise.

    ``sample`` keeps every (N/C)-th bin, 1-based, i.e. bins N/C, 2N/C, ..., N.
    ``pool`` sums consecutive groups of N/C bins instead.
    """
    h = np.asarray(h, dtype=np.float64)
    n = len(h)
    if target_bins < 1 or n % target_bins:
        raise IndivisibleBins(f"{target_bins} does not divide {n}")
    stride = n // target_bins
    if mode == "sample":
        out = h[stride - 1::stride].copy()
    elif mode == "pool":
        out = h.reshape(target_bins, stride).sum(axis=1)
    else:
        raise ValueError(f"unknown downsample mode {mode!r}")
    total = out.sum()
    return out / total if total > 0 else np.zeros(target_bins)
