"""Synthetic MRI-like phantoms with known tumor masks.

A phantom is a dark background, a mid-gray elliptical "brain" and a bright
elliptical "tumor" inside it, plus Gaussian noise.  Used for end-to-end
tests and demos since no public test images accompany the method.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imgcore import GrayImage
from .segment import RoiMask


@dataclass(frozen=True)
class Phantom:
    image: GrayImage
    truth: RoiMask
    tumor_area: int
    grade: str


def _ellipse(h, w, cy, cx, ay, ax, angle=0.0):
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    y, x = yy - cy, xx - cx
    c, s = np.cos(angle), np.sin(angle)
    u = c * x + s * y
    v = -s * x + c * y
    return (u / ax) ** 2 + (v / ay) ** 2 <= 1.0


def make_phantom(
    rng: np.random.Generator,
    size: int = 256,
    tumor_radius: float | None = None,
    noise: float = 8.0,
    background: float = 15.0,
    brain: float = 90.0,
    tumor: float = 185.0,
    malignant_radius: float = 17.0,
) -> Phantom:
    """Draw one phantom.

    ``tumor_radius`` is the mean semi-axis in pixels at ``size=256`` (scaled
    for other sizes); when omitted it is drawn from ``[8, 14] U [20, 30]``.
    Tumors with mean semi-axis above ``malignant_radius`` are labeled
    Malignant.
    """
    h = w = size
    scale = size / 256.0
    if tumor_radius is None:
        tumor_radius = rng.uniform(8, 14) if rng.random() < 0.5 else rng.uniform(20, 30)
    grade = "Malignant" if tumor_radius > malignant_radius else "Benign"
    cy, cx = h / 2 + rng.uniform(-6, 6) * scale, w / 2 + rng.uniform(-6, 6) * scale
    by, bx = rng.uniform(0.38, 0.44) * h, rng.uniform(0.32, 0.38) * w
    brain_mask = _ellipse(h, w, cy, cx, by, bx, rng.uniform(-0.2, 0.2))

    r = tumor_radius * scale
    elong = rng.uniform(0.8, 1.25)
    ty, tx = r * elong, r / elong
    # keep the tumor well inside the brain
    room_y, room_x = max(by - ty - 8 * scale, 0), max(bx - tx - 8 * scale, 0)
    tcy = cy + rng.uniform(-0.6, 0.6) * room_y
    tcx = cx + rng.uniform(-0.6, 0.6) * room_x
    tumor_mask = _ellipse(h, w, tcy, tcx, ty, tx, rng.uniform(0, np.pi)) & brain_mask

    base = np.full((h, w), background)
    base[brain_mask] = brain
    base[tumor_mask] = tumor
    img = np.clip(np.rint(base + rng.normal(0.0, noise, size=(h, w))), 0, 255).astype(np.uint8)
    return Phantom(GrayImage(img), RoiMask(tumor_mask), int(tumor_mask.sum()), grade)


def phantom_corpus(n: int, seed: int = 0, size: int = 256, **kwargs) -> list:
    rng = np.random.default_rng(seed)
    return [make_phantom(rng, size=size, **kwargs) for _ in range(n)]


def low_contrast_image(rng: np.random.Generator, size: int | None = None) -> GrayImage:
    """Image whose gray levels occupy a narrow band, with a varied histogram shape."""
    if size is None:
        size = int(rng.integers(32, 129))
    width = int(rng.integers(16, 64))
    lo = int(rng.integers(0, 256 - width))
    kind = rng.integers(0, 3)
    n = size * size
    if kind == 0:
        vals = rng.normal(lo + width / 2, width / 6, n)
    elif kind == 1:
        split = rng.uniform(0.2, 0.8)
        a = rng.normal(lo + width * 0.25, width / 10, n)
        b = rng.normal(lo + width * 0.75, width / 10, n)
        vals = np.where(rng.random(n) < split, a, b)
    else:
        vals = lo + width * rng.beta(rng.uniform(0.5, 4), rng.uniform(0.5, 4), n)
    vals = np.clip(np.rint(vals), lo, lo + width)
    return GrayImage(vals.reshape(size, size).astype(np.uint8))
