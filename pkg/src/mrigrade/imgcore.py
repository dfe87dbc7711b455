"""Gray image and histogram containers, PGM/PNG I/O and small pixel helpers."""

from __future__ import annotations

import os
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

LEVELS = 256
MAX_LEVEL = LEVELS - 1


class ImageFormatError(ValueError):
    """Raised when an image file cannot be decoded as 8-bit grayscale."""


class UnsupportedFormatError(ImageFormatError):
    pass


class MalformedHeaderError(ImageFormatError):
    pass


class DimensionMismatchError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Immutable 8-bit grayscale image.

    ``pixels`` is a read-only ``(height, width)`` uint8 array stored
    row-major.
    """

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"expected a non-empty 2-D array, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if not np.issubdtype(arr.dtype, np.integer):
                raise ValueError(f"pixel values must be integers, got {arr.dtype}")
            if arr.min() < 0 or arr.max() > MAX_LEVEL:
                raise ValueError("pixel values must lie in [0, 255]")
            arr = arr.astype(np.uint8)
        arr = np.array(arr, dtype=np.uint8, copy=True, order="C")
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def size(self) -> int:
        return self.pixels.size

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )

    def __hash__(self):
        return hash((self.pixels.shape, self.pixels.tobytes()))

    def __repr__(self):
        return f"GrayImage(width={self.width}, height={self.height})"

    @classmethod
    def from_flat(cls, width: int, height: int, values) -> "GrayImage":
        arr = np.asarray(values)
        if arr.size != width * height:
            raise ValueError(f"{arr.size} values do not fill a {width}x{height} image")
        return cls(arr.reshape(height, width))


def as_image(img) -> GrayImage:
    """Accept a GrayImage or anything array-like and return a GrayImage."""
    if isinstance(img, GrayImage):
        return img
    return GrayImage(np.asarray(img))


def check_same_shape(a: GrayImage, b: GrayImage) -> None:
    if a.pixels.shape != b.pixels.shape:
        raise DimensionMismatchError(
            f"image sizes differ: {a.width}x{a.height} vs {b.width}x{b.height}"
        )


@dataclass(frozen=True, eq=False)
class Histogram:
    """256-bin gray-level histogram with PDF/CDF views."""

    counts: np.ndarray

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64, copy=True)
        if counts.shape != (LEVELS,) or (counts < 0).any():
            raise ValueError("histogram needs 256 non-negative counts")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.counts)

    def pdf(self) -> np.ndarray:
        return self.counts / self.total

    def cdf(self) -> np.ndarray:
        return self.cumulative() / self.total

    def occupied(self) -> np.ndarray:
        """Gray levels with at least one pixel, ascending."""
        return np.flatnonzero(self.counts)

    def mean(self) -> float:
        return float(np.dot(np.arange(LEVELS, dtype=np.int64), self.counts)) / self.total


def compute_histogram(img: GrayImage) -> Histogram:
    img = as_image(img)
    return Histogram(np.bincount(img.pixels.ravel(), minlength=LEVELS))


def mean_intensity(img: GrayImage) -> float:
    """Arithmetic mean of the pixel values.

    The pixel sum is accumulated as an exact integer, so the result is the
    correctly rounded double of the rational mean.
    """
    img = as_image(img)
    return int(img.pixels.sum(dtype=np.int64)) / img.size


def apply_mapping(img: GrayImage, mapping: np.ndarray) -> GrayImage:
    mapping = np.asarray(mapping)
    if mapping.shape != (LEVELS,):
        raise ValueError("a gray-level mapping needs exactly 256 entries")
    return GrayImage(mapping.astype(np.uint8)[as_image(img).pixels])


def round_half_up_ratio(num, den):
    """floor(num/den + 1/2) in exact integer arithmetic (den > 0)."""
    num = np.asarray(num, dtype=np.int64)
    return (2 * num + den) // (2 * den)


# --------------------------------------------------------------------------
# file I/O

_PGM_HEADER = re.compile(rb"\A(P[1-7])")


def _pgm_tokens(data: bytes, count: int):
    """Read ``count`` whitespace separated header tokens after the magic.

    Returns the tokens and the offset of the single whitespace byte that
    terminates the last token.
    """
    pos = 2
    tokens = []
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos < n and data[pos : pos + 1] == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise MalformedHeaderError("truncated PGM header")
        tokens.append(data[start:pos])
    if pos >= n or not data[pos : pos + 1].isspace():
        raise MalformedHeaderError("PGM header must end with a single whitespace byte")
    return tokens, pos


def _decode_pgm(data: bytes) -> GrayImage:
    magic = _PGM_HEADER.match(data)
    if magic is None:
        raise MalformedHeaderError("missing PGM magic number")
    if magic.group(1) != b"P5":
        raise UnsupportedFormatError(f"only binary P5 PGM is supported, got {magic.group(1).decode()}")
    tokens, pos = _pgm_tokens(data, 3)
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError:
        raise MalformedHeaderError(f"non-numeric PGM header fields {tokens!r}") from None
    if width < 1 or height < 1:
        raise MalformedHeaderError(f"invalid PGM size {width}x{height}")
    if maxval != MAX_LEVEL:
        raise UnsupportedFormatError(f"PGM maxval must be 255, got {maxval}")
    body = data[pos + 1 :]
    if len(body) < width * height:
        raise MalformedHeaderError(
            f"PGM body holds {len(body)} bytes, {width * height} expected"
        )
    arr = np.frombuffer(body, dtype=np.uint8, count=width * height)
    return GrayImage(arr.reshape(height, width))


def _encode_pgm(img: GrayImage) -> bytes:
    header = f"P5\n{img.width} {img.height}\n{MAX_LEVEL}\n".encode("ascii")
    return header + img.pixels.tobytes()


def _load_png(path: Path) -> GrayImage:
    from PIL import Image

    with Image.open(path) as im:
        if im.format != "PNG":
            raise UnsupportedFormatError(f"{path}: not a PNG file")
        if im.mode != "L":
            raise UnsupportedFormatError(
                f"{path}: only 8-bit single-channel PNG is supported, got mode {im.mode}"
            )
        return GrayImage(np.asarray(im, dtype=np.uint8))


def load_image(path) -> GrayImage:
    """Load a binary PGM (P5, maxval 255) or 8-bit grayscale PNG.

    Color, palette, 16-bit and ASCII inputs are rejected with
    :class:`UnsupportedFormatError` rather than converted.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        data = fh.read()
    if data.startswith(b"\x89PNG\r\n\x1a\n"):
        return _load_png(path)
    if data[:1] == b"P":
        return _decode_pgm(data)
    raise UnsupportedFormatError(f"{path}: not a PGM or PNG file")


def save_image(img: GrayImage, path) -> None:
    """Write ``img`` as P5 PGM, or as grayscale PNG when the suffix is .png."""
    img = as_image(img)
    path = Path(path)
    if path.suffix.lower() == ".png":
        from PIL import Image

        Image.fromarray(np.ascontiguousarray(img.pixels)).save(path, format="PNG")
        return
    tmp = path.with_name(path.name + f".tmp{os.getpid()}")
    try:
        with open(tmp, "wb") as fh:
            fh.write(_encode_pgm(img))
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()
