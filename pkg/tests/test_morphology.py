import numpy as np
import pytest

from tracklet.morphology import clean, closing, dilate, erode, open_close, opening


def brute(mask, r, op):
    h, w = mask.shape
    out = np.zeros_like(mask, dtype=bool)
    for y in range(h):
        for x in range(w):
            win = mask[max(0, y - r):y + r + 1, max(0, x - r):x + r + 1]
            out[y, x] = op(win)
    return out


def random_masks(n, shape=(12, 14), seed=0):
    rng = np.random.default_rng(seed)
    return [rng.random(shape) < rng.uniform(0.2, 0.8) for _ in range(n)]


def test_erode_constant_mask():
    assert erode(np.ones((5, 5), bool)).all()


def test_erode_lone_pixel():
    m = np.zeros((5, 5), bool)
    m[2, 2] = True
    assert not erode(m).any()


def test_erode_block_leaves_inner():
    m = np.zeros((10, 10), bool)
    m[3:7, 3:7] = True
    got = erode(m, 1)
    assert np.array_equal(got, brute(m, 1, np.all))
    expected = np.zeros_like(m)
    expected[4:6, 4:6] = True
    assert np.array_equal(got, expected)


def test_dilate_examples():
    assert not dilate(np.zeros((6, 6), bool)).any()
    m = np.zeros((11, 11), bool)
    m[5, 5] = True
    expected = np.zeros_like(m)
    expected[4:7, 4:7] = True
    assert np.array_equal(dilate(m, 1), expected)


@pytest.mark.parametrize("r", [1, 2, 3])
def test_against_window_bruteforce(r):
    for m in random_masks(20, seed=r):
        assert np.array_equal(erode(m, r), brute(m, r, np.all))
        assert np.array_equal(dilate(m, r), brute(m, r, np.any))


def test_order_laws():
    for m in random_masks(100, seed=1):
        opened = dilate(erode(m))
        closed = erode(dilate(m))
        assert np.all(opened <= m) and np.all(m <= closed)
        assert np.all(erode(m) <= m) and np.all(m <= dilate(m))


def test_monotone():
    for m in random_masks(50, seed=2):
        sub = m & (np.random.default_rng(0).random(m.shape) < 0.7)
        assert np.all(erode(sub) <= erode(m))
        assert np.all(dilate(sub) <= dilate(m))


def test_speckle_removed():
    m = np.zeros((12, 12), bool)
    m[1, 1] = m[5, 8] = m[10, 3] = True
    assert not open_close(m).any()


def test_hole_filled():
    # a 6x6 foreground with one interior hole; oracle composes the brute-force primitives
    m = np.ones((6, 6), bool)
    m[2, 3] = False
    oracle = brute(brute(brute(brute(m, 1, np.all), 1, np.any), 1, np.any), 1, np.all)
    assert oracle.all()
    assert np.array_equal(open_close(m, 1), oracle)


def test_open_close_idempotent():
    for m in random_masks(100, seed=4):
        once = open_close(m)
        assert np.array_equal(open_close(once), once)


def test_opening_closing_compose():
    m = random_masks(1, seed=9)[0]
    assert np.array_equal(open_close(m), closing(opening(m)))


def test_radius_validation_and_disable():
    m = random_masks(1)[0]
    with pytest.raises(ValueError):
        erode(m, 0)
    assert np.array_equal(clean(m, 0), m)
