"""Per-pixel background models producing binary foreground masks.

Two models are provided:

* :class:`AdaptiveModel` -- running-mean background ``B`` with a per-pixel
  adaptive threshold ``T``; a pixel is foreground when ``|I - B| > T``.
  Grayscale only.
* :class:`MixtureModel` -- per-pixel mixture of up to K weighted Gaussians
  with a single shared variance per component (gray or RGB).

Masks are plain ``bool`` arrays of shape (H, W); ``True`` marks foreground.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .frame_io import Frame


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class GmmParams:
    alpha: float = 0.02
    rho: float = 0.01
    deviation_sq_threshold: float = 49.0
    init_variance: float = 3.0
    init_mixprop: float = 1e-5
    background_threshold: float = 0.9
    component_threshold: int = 10
    variance_floor: float = 0.75

    def __post_init__(self):
        if not 0 < self.alpha < 1 or not 0 < self.rho < 1:
            raise ValueError("alpha and rho must lie in (0, 1)")
        if self.component_threshold < 1:
            raise ValueError("component_threshold must be >= 1")
        if self.init_variance <= 0 or self.variance_floor <= 0:
            raise ValueError("variances must be positive")


def _check_shape(shape, frame: Frame):
    if frame.data.shape[:2] != tuple(shape):
        raise DimensionMismatch(f"frame is {frame.data.shape[:2]}, model is {tuple(shape)}")


class AdaptiveModel:
    """Running-average background with adaptive per-pixel thresholds.

    For background pixels both estimates are exponential running means::

        B <- (1 - a) B + a I
        T <- clamp((1 - a) T + a * gain * |I - B_old|, t_floor, 255)

    Foreground pixels leave ``B`` and ``T`` untouched.
    """

    def __init__(self, background, threshold=None, alpha_bg=0.05, t_floor=10.0, t_gain=5.0):
        if not 0 < alpha_bg < 1:
            raise ValueError("alpha_bg must lie in (0, 1)")
        if t_floor <= 0 or t_gain <= 0:
            raise ValueError("t_floor and t_gain must be positive")
        self.B = np.clip(np.asarray(background, dtype=np.float64), 0, 255).copy()
        if threshold is None:
            threshold = np.full(self.B.shape, t_floor)
        self.T = np.clip(np.broadcast_to(np.asarray(threshold, dtype=np.float64), self.B.shape), t_floor, 255).copy()
        self.alpha_bg = alpha_bg
        self.t_floor = t_floor
        self.t_gain = t_gain

    @classmethod
    def from_frame(cls, frame: Frame, **kwargs) -> "AdaptiveModel":
        if frame.channels != 1:
            raise DimensionMismatch("adaptive model needs a grayscale frame")
        return cls(frame.data, **kwargs)

    @property
    def shape(self):
        return self.B.shape

    def classify(self, frame: Frame) -> np.ndarray:
        _check_shape(self.shape, frame)
        if frame.channels != 1:
            raise DimensionMismatch("adaptive model needs a grayscale frame")
        return np.abs(frame.data.astype(np.float64) - self.B) > self.T

    def update(self, frame: Frame, mask: np.ndarray) -> None:
        _check_shape(self.shape, frame)
        if mask.shape != self.shape:
            raise DimensionMismatch(f"mask is {mask.shape}, model is {self.shape}")
        a = self.alpha_bg
        img = frame.data.astype(np.float64)
        bg = ~np.asarray(mask, dtype=bool)
        diff = np.abs(img - self.B)
        new_b = (1 - a) * self.B + a * img
        new_t = np.clip((1 - a) * self.T + a * self.t_gain * diff, self.t_floor, 255)
        self.B = np.where(bg, new_b, self.B)
        self.T = np.where(bg, new_t, self.T)

    def apply(self, frame: Frame) -> np.ndarray:
        mask = self.classify(frame)
        self.update(frame, mask)
        return mask


def classify_adaptive(model: AdaptiveModel, frame: Frame) -> np.ndarray:
    return model.classify(frame)


def update_adaptive(model: AdaptiveModel, frame: Frame, mask: np.ndarray) -> None:
    model.update(frame, mask)


class MixtureModel:
    """Per-pixel Gaussian mixture background, vectorised over the pixel grid.

    State arrays (P = H*W pixels, K components) are kept sorted per pixel by
    ``w / sigma`` in non-increasing order; unused slots sit at the tail with
    ``active == False`` and zero weight.
    """

    def __init__(self, height: int, width: int, channels: int = 3, params: GmmParams | None = None):
        if channels not in (1, 3):
            raise ValueError("channels must be 1 or 3")
        self.params = params or GmmParams()
        self.height, self.width, self.channels = height, width, channels
        k = self.params.component_threshold
        n = height * width
        self.weight = np.zeros((n, k))
        self.mean = np.zeros((n, k, channels))
        self.var = np.ones((n, k))
        self.active = np.zeros((n, k), dtype=bool)

    @property
    def shape(self):
        return (self.height, self.width)

    def components(self, y: int, x: int) -> list[dict]:
        """Active components of one pixel in rank order."""
        p = y * self.width + x
        return [
            {"weight": float(self.weight[p, k]), "mean": self.mean[p, k].tolist(), "variance": float(self.var[p, k])}
            for k in range(self.params.component_threshold)
            if self.active[p, k]
        ]

    def apply(self, frame: Frame) -> np.ndarray:
        _check_shape(self.shape, frame)
        if frame.channels != self.channels:
            raise DimensionMismatch(f"frame has {frame.channels} channels, model has {self.channels}")
        prm = self.params
        n, k = self.weight.shape
        rows = np.arange(n)
        x = frame.data.reshape(n, self.channels).astype(np.float64)

        d2 = np.sum((x[:, None, :] - self.mean) ** 2, axis=2)
        hits = self.active & (d2 <= prm.deviation_sq_threshold * self.var)
        matched = hits.any(axis=1)
        slot = np.argmax(hits, axis=1)

        m = rows[matched]
        ms = slot[matched]
        self.weight[m] *= 1 - prm.alpha
        self.weight[m, ms] += prm.alpha
        mu = (1 - prm.rho) * self.mean[m, ms] + prm.rho * x[m]
        self.mean[m, ms] = mu
        dev = np.sum((x[m] - mu) ** 2, axis=1)
        self.var[m, ms] = np.maximum((1 - prm.rho) * self.var[m, ms] + prm.rho * dev, prm.variance_floor)

        # unmatched: fill the first free slot, else replace the lowest-ranked one
        u = rows[~matched]
        free = np.minimum(self.active[u].sum(axis=1), k - 1)
        self.weight[u, free] = prm.init_mixprop
        self.mean[u, free] = x[u]
        self.var[u, free] = prm.init_variance
        self.active[u, free] = True
        slot[u] = free

        self.weight /= self.weight.sum(axis=1, keepdims=True)

        key = np.where(self.active, self.weight / np.sqrt(self.var), -np.inf)
        order = np.argsort(-key, axis=1, kind="stable")
        self.weight = np.take_along_axis(self.weight, order, axis=1)
        self.var = np.take_along_axis(self.var, order, axis=1)
        self.active = np.take_along_axis(self.active, order, axis=1)
        self.mean = np.take_along_axis(self.mean, order[:, :, None], axis=1)
        rank = np.argmax(order == slot[:, None], axis=1)

        cum = np.cumsum(self.weight, axis=1)
        over = cum > prm.background_threshold
        n_bg = np.where(over.any(axis=1), np.argmax(over, axis=1) + 1, k)
        foreground = ~matched | (rank >= n_bg)
        return foreground.reshape(self.height, self.width)


def classify_and_update_gmm(model: MixtureModel, frame: Frame) -> np.ndarray:
    return model.apply(frame)
