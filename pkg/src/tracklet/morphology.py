"""Binary morphology with a square structuring element and clipped borders.

Windows are clipped at the image edge: erosion only looks at in-image
neighbours (as if padded with 1), dilation likewise (as if padded with 0).
"""

from __future__ import annotations

import numpy as np


def _sweep(mask: np.ndarray, radius: int, reduce, pad_value: bool) -> np.ndarray:
    out = np.asarray(mask, dtype=bool)
    # the square window is separable: one pass per axis
    for axis in (0, 1):
        n = out.shape[axis]
        pad = [(0, 0), (0, 0)]
        pad[axis] = (radius, radius)
        padded = np.pad(out, pad, constant_values=pad_value)
        acc = None
        for shift in range(2 * radius + 1):
            sl = [slice(None), slice(None)]
            sl[axis] = slice(shift, shift + n)
            view = padded[tuple(sl)]
            acc = view.copy() if acc is None else reduce(acc, view)
        out = acc
    return out


def _check_radius(radius: int):
    if radius < 1:
        raise ValueError("radius must be >= 1")


def erode(mask: np.ndarray, radius: int = 1) -> np.ndarray:
    _check_radius(radius)
    return _sweep(mask, radius, np.logical_and, True)


def dilate(mask: np.ndarray, radius: int = 1) -> np.ndarray:
    _check_radius(radius)
    return _sweep(mask, radius, np.logical_or, False)


def opening(mask: np.ndarray, radius: int = 1) -> np.ndarray:
    return dilate(erode(mask, radius), radius)


def closing(mask: np.ndarray, radius: int = 1) -> np.ndarray:
    return erode(dilate(mask, radius), radius)


def open_close(mask: np.ndarray, radius: int = 1) -> np.ndarray:
    """Opening (kills speckle) followed by closing (fills pinholes)."""
    return closing(opening(mask, radius), radius)


def clean(mask: np.ndarray, radius: int) -> np.ndarray:
    """Pipeline entry point; ``radius == 0`` disables post-processing."""
    if radius == 0:
        return np.asarray(mask, dtype=bool)
    return open_close(mask, radius)
