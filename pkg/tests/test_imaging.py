import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eusml.imaging import (
    ChannelHistograms,
    ImageBuffer,
    compute_histogram,
    hist_bhattacharyya,
    hist_intersection,
    mean_intensity,
    read_png,
    resize_bilinear,
    to_grayscale,
    write_png,
)


def make_image(arr):
    return ImageBuffer.from_array(np.asarray(arr))


def random_image(rng, h=32, w=32, channels=3):
    return make_image(rng.integers(0, 256, size=(h, w, channels)))


# ---------------------------------------------------------------------------
# buffers
# ---------------------------------------------------------------------------

def test_buffer_validates_shape():
    with pytest.raises(ValueError):
        ImageBuffer(width=2, height=2, channels=1, data=np.zeros((2, 3, 1), dtype=np.uint8))
    with pytest.raises(ValueError):
        ImageBuffer(width=0, height=1, channels=1, data=np.zeros((1, 0, 1), dtype=np.uint8))
    with pytest.raises(ValueError):
        make_image(np.zeros((2, 2, 2)))  # 2 channels unsupported


def test_buffer_is_readonly():
    img = make_image(np.zeros((4, 4)))
    with pytest.raises(ValueError):
        img.data[0, 0, 0] = 1


# ---------------------------------------------------------------------------
# grayscale
# ---------------------------------------------------------------------------

def test_grayscale_white_and_black():
    white = make_image(np.full((5, 5, 3), 255))
    black = make_image(np.zeros((5, 5, 3)))
    assert (to_grayscale(white).data == 255).all()
    assert (to_grayscale(black).data == 0).all()


def test_grayscale_luma_formula():
    # 0.299*100 + 0.587*150 + 0.114*200 = 140.75 -> 141
    img = make_image(np.tile([100, 150, 200], (4, 4, 1)))
    assert (to_grayscale(img).data == 141).all()


def test_grayscale_passthrough_single_channel():
    img = make_image(np.arange(16).reshape(4, 4))
    assert to_grayscale(img) is img


# ---------------------------------------------------------------------------
# histograms
# ---------------------------------------------------------------------------

def test_histogram_uniform_gray():
    img = make_image(np.full((8, 8), 128))
    h = compute_histogram(img, 64)
    assert h.hist.shape == (1, 64)
    assert h.hist[0, 32] == 1.0
    assert h.hist[0].sum() == 1.0


def test_histogram_checkerboard():
    board = np.indices((8, 8)).sum(axis=0) % 2 * 255
    h = compute_histogram(make_image(board), 64)
    assert h.hist[0, 0] == 0.5
    assert h.hist[0, 63] == 0.5


def test_histogram_bins_validation():
    img = make_image(np.zeros((2, 2)))
    for bad in (0, 257, -1):
        with pytest.raises(ValueError):
            compute_histogram(img, bad)


def counting_histogram_oracle(img, bins):
    """Naive per-pixel counting, entirely independent of the bincount path."""
    hists = np.zeros((img.channels, bins))
    for y in range(img.height):
        for x in range(img.width):
            for c in range(img.channels):
                v = int(img.data[y, x, c])
                hists[c, v * bins // 256] += 1
    return hists / (img.width * img.height)


def test_histogram_matches_counting_oracle():
    rng = np.random.default_rng(42)
    for _ in range(10):
        img = random_image(rng)
        h = compute_histogram(img, 64)
        np.testing.assert_array_equal(h.hist, counting_histogram_oracle(img, 64))


@settings(max_examples=30, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    bins=st.sampled_from([1, 7, 64, 256]),
    channels=st.sampled_from([1, 3]),
)
def test_histogram_normalization_property(seed, bins, channels):
    rng = np.random.default_rng(seed)
    img = random_image(rng, h=9, w=13, channels=channels)
    h = compute_histogram(img, bins)
    np.testing.assert_allclose(h.hist.sum(axis=1), 1.0, atol=1e-9)
    assert (h.hist >= 0).all()


# ---------------------------------------------------------------------------
# comparison measures
# ---------------------------------------------------------------------------

def test_intersection_identical_is_channel_count():
    rng = np.random.default_rng(0)
    img = random_image(rng)
    h = compute_histogram(img, 64)
    assert hist_intersection(h, h) == pytest.approx(3.0, abs=1e-12)


def test_intersection_disjoint_is_zero():
    a = compute_histogram(make_image(np.zeros((4, 4, 3))), 64)
    b = compute_histogram(make_image(np.full((4, 4, 3), 255)), 64)
    assert hist_intersection(a, b) == 0.0


def test_intersection_hand_case():
    # per channel: min(0.5,0.25)+min(0.5,0.25)+min(0,0.5) = 0.5 -> 1.5 over 3 channels
    a = np.zeros((3, 64))
    b = np.zeros((3, 64))
    a[:, 0], a[:, 1] = 0.5, 0.5
    b[:, 0], b[:, 1], b[:, 2] = 0.25, 0.25, 0.5
    ha = ChannelHistograms(64, a)
    hb = ChannelHistograms(64, b)
    assert hist_intersection(ha, hb) == pytest.approx(1.5, abs=1e-12)
    assert hist_intersection(hb, ha) == pytest.approx(1.5, abs=1e-12)


def test_bhattacharyya_identical_and_disjoint():
    rng = np.random.default_rng(1)
    img = random_image(rng)
    h = compute_histogram(img, 64)
    assert hist_bhattacharyya(h, h) == pytest.approx(0.0, abs=1e-9)
    a = compute_histogram(make_image(np.zeros((4, 4, 3))), 64)
    b = compute_histogram(make_image(np.full((4, 4, 3), 255)), 64)
    assert hist_bhattacharyya(a, b) == 1.0


def test_bhattacharyya_hand_case():
    # sqrt(1 - sqrt(0.5)) for a=(0.5,0.5) vs b=(1,0), single channel
    a = ChannelHistograms(2, np.array([[0.5, 0.5]]))
    b = ChannelHistograms(2, np.array([[1.0, 0.0]]))
    expected = np.sqrt(1.0 - np.sqrt(0.5))
    assert hist_bhattacharyya(a, b) == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(0.5412, abs=5e-5)


def test_measure_shape_mismatch():
    a = ChannelHistograms(2, np.array([[0.5, 0.5]]))
    b = ChannelHistograms(3, np.array([[0.4, 0.3, 0.3]]))
    with pytest.raises(ValueError):
        hist_intersection(a, b)
    with pytest.raises(ValueError):
        hist_bhattacharyya(a, b)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_measure_symmetry_and_ranges(seed):
    rng = np.random.default_rng(seed)
    ha = compute_histogram(random_image(rng, 8, 8), 64)
    hb = compute_histogram(random_image(rng, 8, 8), 64)
    i_ab = hist_intersection(ha, hb)
    assert i_ab == pytest.approx(hist_intersection(hb, ha), abs=1e-12)
    assert 0.0 <= i_ab <= 3.0 + 1e-12
    d_ab = hist_bhattacharyya(ha, hb)
    assert d_ab == pytest.approx(hist_bhattacharyya(hb, ha), abs=1e-12)
    assert -1e-12 <= d_ab <= 1.0 + 1e-12


# ---------------------------------------------------------------------------
# mean intensity
# ---------------------------------------------------------------------------

def test_mean_intensity_extremes():
    assert mean_intensity(make_image(np.zeros((4, 4)))) == 0.0
    assert mean_intensity(make_image(np.full((4, 4, 3), 255))) == 255.0


def test_mean_intensity_at_threshold():
    plane = np.zeros((2, 4))
    plane[:, 2:] = 24
    assert mean_intensity(make_image(plane)) == 12.0


# ---------------------------------------------------------------------------
# resize + png io
# ---------------------------------------------------------------------------

def test_resize_bilinear_constant_and_identity():
    plane = np.full((6, 6), 77.0)
    np.testing.assert_allclose(resize_bilinear(plane, 13, 9), 77.0)
    rng = np.random.default_rng(3)
    plane = rng.uniform(0, 255, (8, 8))
    np.testing.assert_allclose(resize_bilinear(plane, 8, 8), plane, atol=1e-12)


@pytest.mark.parametrize("channels", [1, 3])
def test_png_round_trip(tmp_path, channels):
    rng = np.random.default_rng(9)
    img = random_image(rng, 16, 12, channels)
    path = tmp_path / "img.png"
    write_png(img, path)
    back = read_png(path)
    assert back.channels == channels
    np.testing.assert_array_equal(back.data, img.data)
