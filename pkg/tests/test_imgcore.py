import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image

from mrigrade.imgcore import (
    DimensionMismatchError,
    GrayImage,
    MalformedHeaderError,
    UnsupportedFormatError,
    apply_mapping,
    check_same_shape,
    compute_histogram,
    load_image,
    mean_intensity,
    round_half_up_ratio,
    save_image,
)


def test_load_p5_bytes(tmp_path):
    p = tmp_path / "a.pgm"
    p.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 128, 255, 7]))
    img = load_image(p)
    assert (img.width, img.height) == (2, 2)
    assert img.pixels.ravel().tolist() == [0, 128, 255, 7]


def test_header_comments_and_whitespace(tmp_path):
    p = tmp_path / "c.pgm"
    p.write_bytes(b"P5 # made by hand\n3\t1 # width height\n255\n" + bytes([1, 2, 3]))
    assert load_image(p).pixels.tolist() == [[1, 2, 3]]


def test_maxval_65535_rejected(tmp_path):
    p = tmp_path / "wide.pgm"
    p.write_bytes(b"P5\n1 1\n65535\n\x00\x01")
    with pytest.raises(UnsupportedFormatError):
        load_image(p)


def test_ascii_pgm_rejected(tmp_path):
    p = tmp_path / "ascii.pgm"
    p.write_bytes(b"P2\n1 1\n255\n7\n")
    with pytest.raises(UnsupportedFormatError):
        load_image(p)


@pytest.mark.parametrize(
    "data",
    [b"P5\n2 2\n255\n\x00\x01", b"P5\n2", b"P5\n2 x\n255\n\x00\x00", b"P5\n0 3\n255\n"],
)
def test_malformed_pgm(tmp_path, data):
    p = tmp_path / "bad.pgm"
    p.write_bytes(data)
    with pytest.raises(MalformedHeaderError):
        load_image(p)


def test_unknown_format(tmp_path):
    p = tmp_path / "x.bin"
    p.write_bytes(b"GIF89a")
    with pytest.raises(UnsupportedFormatError):
        load_image(p)


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_image(tmp_path / "nope.pgm")


def test_round_trip_random_64(tmp_path):
    rng = np.random.default_rng(1)
    img = GrayImage(rng.integers(0, 256, (64, 64)).astype(np.uint8))
    for suffix in (".pgm", ".png"):
        p = tmp_path / f"r{suffix}"
        save_image(img, p)
        assert load_image(p) == img


def test_single_pixel(tmp_path):
    p = tmp_path / "one.pgm"
    save_image(GrayImage(np.array([[42]], dtype=np.uint8)), p)
    assert p.read_bytes() == b"P5\n1 1\n255\n*"
    assert load_image(p).pixels.tolist() == [[42]]


def test_write_failure(tmp_path):
    img = GrayImage(np.zeros((2, 2), dtype=np.uint8))
    with pytest.raises(OSError):
        save_image(img, tmp_path)  # a directory
    with pytest.raises(OSError):
        save_image(img, tmp_path / "missing_dir" / "x.pgm")


@pytest.mark.skipif(os.geteuid() == 0, reason="root ignores permission bits")
def test_write_read_only_dir(tmp_path):
    ro = tmp_path / "ro"
    ro.mkdir()
    ro.chmod(0o500)
    with pytest.raises(OSError):
        save_image(GrayImage(np.zeros((1, 1), dtype=np.uint8)), ro / "x.pgm")


def test_color_png_rejected(tmp_path):
    p = tmp_path / "rgb.png"
    Image.fromarray(np.zeros((3, 3, 3), dtype=np.uint8)).save(p)
    with pytest.raises(UnsupportedFormatError):
        load_image(p)
    p16 = tmp_path / "wide.png"
    Image.fromarray(np.zeros((3, 3), dtype=np.uint16)).save(p16)
    with pytest.raises(UnsupportedFormatError):
        load_image(p16)


def test_gray_image_validation():
    with pytest.raises(ValueError):
        GrayImage(np.zeros((0, 3), dtype=np.uint8))
    with pytest.raises(ValueError):
        GrayImage(np.array([[256]]))
    with pytest.raises(ValueError):
        GrayImage(np.array([[0.5]]))
    img = GrayImage(np.array([[1, 2]]))
    assert img.pixels.dtype == np.uint8
    with pytest.raises(ValueError):
        img.pixels[0, 0] = 3
    assert GrayImage.from_flat(2, 1, [1, 2]) == img
    with pytest.raises(ValueError):
        GrayImage.from_flat(3, 1, [1, 2])


def test_histogram_examples():
    h = compute_histogram(GrayImage(np.zeros((4, 4), dtype=np.uint8)))
    assert h.counts[0] == 16 and h.counts[1:].sum() == 0
    h = compute_histogram(GrayImage.from_flat(2, 2, [5, 5, 7, 9]))
    assert (h.counts[5], h.counts[7], h.counts[9]) == (2, 1, 1)
    assert h.total == 4
    assert h.cdf()[9] == 1.0
    assert h.occupied().tolist() == [5, 7, 9]


def test_mean_examples():
    assert mean_intensity(GrayImage(np.full((3, 5), 77, dtype=np.uint8))) == 77.0
    assert mean_intensity(GrayImage.from_flat(2, 1, [0, 255])) == 127.5


@settings(max_examples=200, deadline=None)
@given(arrays(np.uint8, st.tuples(st.integers(1, 40), st.integers(1, 40))))
def test_histogram_and_mean_properties(a):
    img = GrayImage(a)
    h = compute_histogram(img)
    assert h.total == a.size
    assert np.all(h.counts >= 0)
    vals = a.ravel().tolist()
    assert abs(mean_intensity(img) - sum(vals) / len(vals)) <= 1e-9


@settings(max_examples=100, deadline=None)
@given(arrays(np.uint8, st.tuples(st.integers(1, 20), st.integers(1, 20))))
def test_pgm_round_trip_property(tmp_path_factory, a):
    p = tmp_path_factory.mktemp("rt") / "x.pgm"
    save_image(GrayImage(a), p)
    assert np.array_equal(load_image(p).pixels, a)


def test_check_same_shape():
    a = GrayImage(np.zeros((2, 3), dtype=np.uint8))
    with pytest.raises(DimensionMismatchError):
        check_same_shape(a, GrayImage(np.zeros((3, 2), dtype=np.uint8)))


def test_apply_mapping_and_rounding():
    img = GrayImage.from_flat(3, 1, [0, 1, 2])
    assert apply_mapping(img, np.arange(256)[::-1]).pixels.tolist() == [[255, 254, 253]]
    assert round_half_up_ratio(np.array([1, 3, 5, -1]), 2).tolist() == [1, 2, 3, 0]
