import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tracklet.frame_io import (
    AlreadyGray,
    Frame,
    IoFailure,
    MalformedHeader,
    SequenceError,
    SequenceManifest,
    TruncatedPayload,
    UnsupportedMaxval,
    decode,
    encode,
    read_frame,
    to_grayscale,
    write_frame,
)


def test_read_p5(tmp_path):
    path = tmp_path / "a.pgm"
    path.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 64, 128, 255]))
    f = read_frame(path)
    assert (f.width, f.height, f.channels) == (2, 2, 1)
    assert f.data.reshape(-1).tolist() == [0, 64, 128, 255]


def test_read_p6_single_red(tmp_path):
    path = tmp_path / "a.ppm"
    path.write_bytes(b"P6 1 1 255\n" + bytes([255, 0, 0]))
    f = read_frame(path)
    assert (f.width, f.height, f.channels) == (1, 1, 3)
    assert f.data.reshape(-1).tolist() == [255, 0, 0]


def test_truncated_payload():
    with pytest.raises(TruncatedPayload):
        decode(b"P5\n4 4\n255\n" + bytes(10))


@pytest.mark.parametrize("buf", [b"P3\n1 1\n255\n\x00", b"P5\nx 1\n255\n\x00", b"P5\n0 1\n255\n", b"P5\n1 1\n255"])
def test_malformed_header(buf):
    with pytest.raises(MalformedHeader):
        decode(buf)


def test_unsupported_maxval():
    with pytest.raises(UnsupportedMaxval):
        decode(b"P5\n1 1\n65535\n\x00\x00")


def test_header_comments_skipped():
    f = decode(b"P5\n# made by hand\n2 1 # trailing\n255\n\x07\x09")
    assert f.data.tolist() == [[7, 9]]


def test_write_payload_order(tmp_path):
    path = tmp_path / "o.pgm"
    write_frame(Frame(np.array([[7, 9]], dtype=np.uint8)), path)
    raw = path.read_bytes()
    assert raw.endswith(b"\n" + bytes([7, 9]))
    assert raw[-2:] == bytes([7, 9])


def test_write_unwritable(tmp_path):
    with pytest.raises(IoFailure):
        write_frame(Frame(np.zeros((1, 1), np.uint8)), tmp_path / "missing" / "dir" / "x.pgm")


@settings(max_examples=60, deadline=None)
@given(
    arrays(np.uint8, st.tuples(st.integers(1, 9), st.integers(1, 9))),
    st.booleans(),
)
def test_roundtrip(data, rgb):
    if rgb:
        data = np.stack([data, data[::-1], 255 - data], axis=2)
    f = Frame(data)
    assert decode(encode(f)) == f


@pytest.mark.parametrize("rgb,gray", [((255, 255, 255), 255), ((0, 0, 0), 0), ((255, 0, 0), 76)])
def test_grayscale_examples(rgb, gray):
    f = Frame(np.array([[rgb]], dtype=np.uint8))
    assert to_grayscale(f).data[0, 0] == gray


def test_grayscale_red_oracle():
    # round(0.299 * 255) by hand: 76.245 -> 76
    assert round(0.299 * 255) == 76


@settings(max_examples=50, deadline=None)
@given(arrays(np.uint8, (4, 5, 3)))
def test_grayscale_within_channel_range(data):
    g = to_grayscale(Frame(data)).data.astype(int)
    assert np.all(g >= data.min(axis=2)) and np.all(g <= data.max(axis=2))


def test_grayscale_rejects_gray():
    with pytest.raises(AlreadyGray):
        to_grayscale(Frame(np.zeros((2, 2), np.uint8)))


def test_frame_is_immutable():
    src = np.zeros((2, 2), np.uint8)
    f = Frame(src)
    src[0, 0] = 9
    assert f.data[0, 0] == 0
    with pytest.raises(ValueError):
        f.data[0, 0] = 1


def test_frame_rejects_out_of_range():
    with pytest.raises(ValueError):
        Frame(np.array([[300]]))


def test_manifest_iterates_in_order(tmp_path):
    for i in range(3):
        write_frame(Frame(np.full((2, 3), i, np.uint8)), tmp_path / f"frame_{i:06d}.ppm")
    seq = SequenceManifest(tmp_path)
    assert len(seq) == 3
    frames = list(seq)
    assert [f.index for f in frames] == [0, 1, 2]
    assert [int(f.data[0, 0]) for f in frames] == [0, 1, 2]


def test_manifest_missing_files(tmp_path):
    with pytest.raises(SequenceError):
        SequenceManifest(tmp_path)
    write_frame(Frame(np.zeros((2, 2), np.uint8)), tmp_path / "frame_000000.ppm")
    with pytest.raises(SequenceError):
        SequenceManifest(tmp_path, count=2)


def test_manifest_shape_mismatch(tmp_path):
    write_frame(Frame(np.zeros((2, 2), np.uint8)), tmp_path / "frame_000000.ppm")
    write_frame(Frame(np.zeros((3, 2), np.uint8)), tmp_path / "frame_000001.ppm")
    with pytest.raises(SequenceError):
        list(SequenceManifest(tmp_path))
    assert os.path.exists(tmp_path / "frame_000001.ppm")
