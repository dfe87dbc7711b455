"""Shape, first-order intensity and GLCM texture features of a tumor ROI."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, fields

import numpy as np

from .imgcore import LEVELS, DimensionMismatchError, GrayImage, as_image
from .segment import EmptyMaskError, RoiMask, boundary, largest_component

FEATURE_NAMES = (
    "white_pixels",
    "area",
    "perimeter",
    "contrast",
    "correlation",
    "energy",
    "homogeneity",
    "mean",
    "standard_deviation",
    "entropy",
    "rms",
    "variance",
    "smoothness",
    "kurtosis",
    "skewness",
    "idm",
)

DEFAULT_GLCM_LEVELS = 8
DEFAULT_GLCM_OFFSET = (0, 1)


class DegenerateGlcmError(ValueError):
    """No pixel pair satisfies the offset and mask constraints."""


@dataclass(frozen=True)
class FeatureVector:
    white_pixels: int
    area: int
    perimeter: float
    contrast: float
    correlation: float
    energy: float
    homogeneity: float
    mean: float
    standard_deviation: float
    entropy: float
    rms: float
    variance: float
    smoothness: float
    kurtosis: float
    skewness: float
    idm: float
    # not one of the 16 table rows; kept for inspection
    glcm_entropy: float = 0.0

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, name) for name in FEATURE_NAMES)

    def as_array(self) -> np.ndarray:
        return np.array(self.as_tuple(), dtype=np.float64)

    @classmethod
    def from_sequence(cls, values) -> "FeatureVector":
        values = list(values)
        if len(values) != len(FEATURE_NAMES):
            raise ValueError(f"expected {len(FEATURE_NAMES)} feature values, got {len(values)}")
        kw = dict(zip(FEATURE_NAMES, values))
        kw["white_pixels"] = int(kw["white_pixels"])
        kw["area"] = int(kw["area"])
        return cls(**{k: (v if k in ("white_pixels", "area") else float(v)) for k, v in kw.items()})


@dataclass(frozen=True, eq=False)
class Glcm:
    levels: int
    probabilities: np.ndarray


def _check_mask(img: GrayImage, mask: RoiMask) -> None:
    if img.pixels.shape != mask.bits.shape:
        raise DimensionMismatchError(
            f"mask {mask.width}x{mask.height} does not match image {img.width}x{img.height}"
        )
    if not mask.bits.any():
        raise EmptyMaskError("mask has no pixels")


def shape_features(mask: RoiMask) -> dict:
    """White pixel count, largest-component area and its boundary length.

    The perimeter counts component pixels that touch a non-component pixel
    through a 4-neighbour or sit on the image border.
    """
    if not mask.bits.any():
        raise EmptyMaskError("mask has no pixels")
    blob = largest_component(mask, connectivity=8).bits
    return {
        "white_pixels": int(mask.bits.sum()),
        "area": int(blob.sum()),
        "perimeter": float(boundary(blob).sum()),
    }


def intensity_features(img: GrayImage, mask: RoiMask, variance_scale: str = "normalized") -> dict:
    """First-order statistics of the masked pixels.

    ``variance`` is ``std**2 / 255**2`` by default (``variance_scale="raw"``
    keeps intensity squared units); smoothness ``1 - 1/(1 + variance)`` uses
    the same variance.  Kurtosis is non-excess.  Entropy is in bits.
    """
    img = as_image(img)
    _check_mask(img, mask)
    if variance_scale not in ("normalized", "raw"):
        raise ValueError(f"unknown variance scale {variance_scale!r}")
    x = img.pixels[mask.bits].astype(np.float64)
    n = x.size
    mean = float(x.sum() / n)
    dev = x - mean
    m2 = float(np.sum(dev**2) / n)
    std = math.sqrt(m2)
    if std > 0:
        skew = float(np.sum(dev**3) / n) / std**3
        kurt = float(np.sum(dev**4) / n) / m2**2
    else:
        skew = kurt = 0.0
    variance = m2 / 255.0**2 if variance_scale == "normalized" else m2
    counts = np.bincount(img.pixels[mask.bits], minlength=LEVELS)
    p = counts[counts > 0] / n
    entropy = float(-np.sum(p * np.log2(p))) + 0.0
    return {
        "mean": mean,
        "standard_deviation": std,
        "variance": variance,
        "rms": math.sqrt(float(np.sum(x * x)) / n),
        "skewness": skew,
        "kurtosis": kurt,
        "smoothness": 1.0 - 1.0 / (1.0 + variance),
        "entropy": entropy,
    }


def quantize(pixels: np.ndarray, levels: int) -> np.ndarray:
    return (pixels.astype(np.int64) * levels) // LEVELS


def compute_glcm(img: GrayImage, mask: RoiMask | None = None, offset=DEFAULT_GLCM_OFFSET, levels=DEFAULT_GLCM_LEVELS) -> Glcm:
    """Symmetric, normalized co-occurrence matrix for one pixel offset.

    Gray level g is quantized to ``floor(g * levels / 256)``.  A pair
    ``(p, p + offset)`` counts when both ends are inside the image and,
    given a mask, both are inside the mask.
    """
    img = as_image(img)
    dy, dx = (int(v) for v in offset)
    if dy == 0 and dx == 0:
        raise ValueError("offset must be nonzero")
    if not 2 <= levels <= LEVELS:
        raise ValueError("levels must lie in [2, 256]")
    if mask is not None and img.pixels.shape != mask.bits.shape:
        raise DimensionMismatchError("mask does not match image")
    q = quantize(img.pixels, levels)
    h, w = q.shape
    if abs(dy) >= h or abs(dx) >= w:
        raise DegenerateGlcmError(f"offset {offset} leaves no pixel pairs in a {w}x{h} image")
    rows = slice(max(0, -dy), h - max(0, dy))
    cols = slice(max(0, -dx), w - max(0, dx))
    rows2 = slice(rows.start + dy, rows.stop + dy)
    cols2 = slice(cols.start + dx, cols.stop + dx)
    a, b = q[rows, cols], q[rows2, cols2]
    if mask is not None:
        valid = mask.bits[rows, cols] & mask.bits[rows2, cols2]
        a, b = a[valid], b[valid]
    a, b = a.ravel(), b.ravel()
    if a.size == 0:
        raise DegenerateGlcmError("no pixel pairs inside the mask for this offset")
    counts = np.bincount(a * levels + b, minlength=levels * levels).reshape(levels, levels)
    counts = counts + counts.T
    return Glcm(levels, counts / counts.sum())


def texture_features(g: Glcm) -> dict:
    """Haralick-style descriptors of a GLCM.

    Correlation is defined as 1 when either marginal has zero spread.
    """
    P = g.probabilities
    i, j = np.indices(P.shape, dtype=np.float64)
    mu_i = float(np.sum(i * P))
    mu_j = float(np.sum(j * P))
    sd_i = math.sqrt(float(np.sum((i - mu_i) ** 2 * P)))
    sd_j = math.sqrt(float(np.sum((j - mu_j) ** 2 * P)))
    if sd_i * sd_j > 0:
        correlation = float(np.sum((i - mu_i) * (j - mu_j) * P)) / (sd_i * sd_j)
    else:
        correlation = 1.0
    nz = P[P > 0]
    return {
        "contrast": float(np.sum((i - j) ** 2 * P)),
        "correlation": correlation,
        "energy": float(np.sum(P * P)),
        "homogeneity": float(np.sum(P / (1.0 + np.abs(i - j)))),
        "glcm_entropy": float(-np.sum(nz * np.log2(nz))) + 0.0,
        "idm": float(np.sum(P / (1.0 + (i - j) ** 2))),
    }


def extract_all(
    img: GrayImage,
    mask: RoiMask,
    levels: int = DEFAULT_GLCM_LEVELS,
    offset=DEFAULT_GLCM_OFFSET,
    variance_scale: str = "normalized",
) -> FeatureVector:
    """All 16 features of the masked region, in table order.

    The ``entropy`` entry is the first-order (intensity) entropy; the GLCM
    entropy is carried separately as ``glcm_entropy``.
    """
    img = as_image(img)
    _check_mask(img, mask)
    values = {}
    values.update(shape_features(mask))
    values.update(intensity_features(img, mask, variance_scale))
    values.update(texture_features(compute_glcm(img, mask, offset, levels)))
    return FeatureVector(**values)


def features_to_csv(rows, header: bool = True) -> str:
    """CSV of ``(name, FeatureVector)`` rows with an ``image`` first column."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if header:
        writer.writerow(("image",) + FEATURE_NAMES)
    for name, fv in rows:
        writer.writerow([name] + [format_value(v) for v in fv.as_tuple()])
    return buf.getvalue()


def format_value(v) -> str:
    """Integers verbatim, floats with 17 significant digits."""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def format_table(rows) -> str:
    """Parameters down, images across, as in a printed feature table."""
    rows = list(rows)
    names = [name for name, _ in rows]
    width = max(len(n) for n in FEATURE_NAMES) + 2
    col = max([12] + [len(n) + 2 for n in names])
    lines = ["Parameters".ljust(width) + "".join(n.rjust(col) for n in names)]
    for f in fields(FeatureVector):
        if f.name not in FEATURE_NAMES:
            continue
        cells = []
        for _, fv in rows:
            v = getattr(fv, f.name)
            cells.append((str(v) if isinstance(v, int) else f"{v:.4f}").rjust(col))
        lines.append(f.name.ljust(width) + "".join(cells))
    return "\n".join(lines) + "\n"
