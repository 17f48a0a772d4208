"""Binary netpbm (P5/P6) frame codec and the Frame raster type."""

from __future__ import annotations

import os
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np


class FrameError(Exception):
    pass


class MalformedHeader(FrameError):
    pass


class TruncatedPayload(FrameError):
    pass


class UnsupportedMaxval(FrameError):
    pass


class AlreadyGray(FrameError):
    pass


class IoFailure(FrameError):
    pass


class SequenceError(FrameError):
    pass


@dataclass(frozen=True, eq=False)
class Frame:
    """An immutable raster. ``data`` is uint8, shape (H, W) or (H, W, 3)."""

    data: np.ndarray
    index: int = 0

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim == 3 and arr.shape[2] == 1:
            arr = arr[:, :, 0]
        if arr.ndim not in (2, 3) or (arr.ndim == 3 and arr.shape[2] != 3):
            raise ValueError(f"unsupported frame shape {arr.shape}")
        if arr.dtype != np.uint8:
            if np.any(arr < 0) or np.any(arr > 255):
                raise ValueError("intensities must lie in [0, 255]")
            arr = arr.astype(np.uint8)
        if arr is self.data:
            arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        if self.index < 0:
            raise ValueError("frame index must be >= 0")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.data.ndim == 2 else 3

    def __eq__(self, other):
        if not isinstance(other, Frame):
            return NotImplemented
        return (
            self.index == other.index
            and self.data.shape == other.data.shape
            and np.array_equal(self.data, other.data)
        )

    def __repr__(self):
        return f"Frame(w={self.width}, h={self.height}, ch={self.channels}, index={self.index})"

    def with_index(self, index: int) -> "Frame":
        return Frame(self.data, index)


_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*")


def _next_token(buf: bytes, pos: int) -> tuple[bytes, int]:
    pos = _TOKEN.match(buf, pos).end()
    end = pos
    while end < len(buf) and buf[end:end + 1] not in b" \t\r\n#":
        end += 1
    if end == pos:
        raise MalformedHeader("unexpected end of header")
    return buf[pos:end], end


def decode(buf: bytes, index: int = 0) -> Frame:
    if buf[:2] not in (b"P5", b"P6"):
        raise MalformedHeader(f"bad magic {buf[:2]!r}")
    channels = 1 if buf[:2] == b"P5" else 3
    pos = 2
    values = []
    for _ in range(3):
        tok, pos = _next_token(buf, pos)
        if not tok.isdigit():
            raise MalformedHeader(f"non-numeric header field {tok!r}")
        values.append(int(tok))
    width, height, maxval = values
    if width <= 0 or height <= 0:
        raise MalformedHeader(f"bad dimensions {width}x{height}")
    if maxval != 255:
        raise UnsupportedMaxval(f"maxval {maxval}")
    # exactly one whitespace byte separates maxval from the raster
    if pos >= len(buf) or buf[pos:pos + 1] not in b" \t\r\n":
        raise MalformedHeader("missing whitespace after maxval")
    pos += 1
    need = width * height * channels
    payload = buf[pos:pos + need]
    if len(payload) < need:
        raise TruncatedPayload(f"expected {need} bytes, got {len(payload)}")
    arr = np.frombuffer(payload, dtype=np.uint8)
    shape = (height, width) if channels == 1 else (height, width, 3)
    return Frame(arr.reshape(shape).copy(), index)


def encode(frame: Frame) -> bytes:
    magic = b"P5" if frame.channels == 1 else b"P6"
    header = b"%s\n%d %d\n255\n" % (magic, frame.width, frame.height)
    return header + frame.data.tobytes()


def read_frame(path, index: int = 0) -> Frame:
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return decode(buf, index)


def write_frame(frame: Frame, path) -> None:
    try:
        Path(path).write_bytes(encode(frame))
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def to_grayscale(frame: Frame) -> Frame:
    """Luma conversion: round(0.299 R + 0.587 G + 0.114 B)."""
    if frame.channels == 1:
        raise AlreadyGray("frame is already single-channel")
    rgb = frame.data.astype(np.float64)
    luma = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    out = np.clip(np.floor(luma + 0.5), 0, 255).astype(np.uint8)
    return Frame(out, frame.index)


def to_rgb(frame: Frame) -> Frame:
    if frame.channels == 3:
        return frame
    return Frame(np.repeat(frame.data[:, :, None], 3, axis=2), frame.index)


@dataclass
class SequenceManifest:
    """A numbered frame sequence on disk, e.g. ``frame_%06d.ppm``."""

    directory: Path
    pattern: str = "frame_%06d.ppm"
    first: int = 0
    count: int = 0
    channels: int = 0

    def __post_init__(self):
        self.directory = Path(self.directory)
        if self.count <= 0:
            n = 0
            while (self.directory / (self.pattern % (self.first + n))).is_file():
                n += 1
            self.count = n
        if self.count < 1:
            raise SequenceError(f"no frames matching {self.pattern!r} in {self.directory}")
        missing = [p for p in self.paths() if not p.is_file()]
        if missing:
            raise SequenceError(f"missing frame file {missing[0]}")

    def paths(self) -> list[Path]:
        return [self.directory / (self.pattern % (self.first + i)) for i in range(self.count)]

    def __len__(self):
        return self.count

    def __iter__(self) -> Iterator[Frame]:
        shape = None
        for i, path in enumerate(self.paths()):
            frame = read_frame(path, index=i)
            if self.channels and frame.channels != self.channels:
                raise SequenceError(
                    f"{os.fspath(path)}: {frame.channels} channels, manifest declares {self.channels}"
                )
            if shape is None:
                shape = frame.data.shape
            elif frame.data.shape != shape:
                raise SequenceError(f"{os.fspath(path)}: shape {frame.data.shape} differs from {shape}")
            yield frame
