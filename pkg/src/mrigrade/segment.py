"""Gray-level K-means segmentation, ROI extraction and outlining."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .imgcore import LEVELS, DimensionMismatchError, GrayImage, as_image, compute_histogram


class TooManyClustersError(ValueError):
    pass


class EmptyMaskError(ValueError):
    pass


_LEVEL_VALUES = np.arange(LEVELS, dtype=np.float64)


@dataclass(frozen=True, eq=False)
class LabelMap:
    """K-means result: per-pixel cluster index and ascending centroids."""

    labels: np.ndarray
    centroids: np.ndarray
    iterations: int
    converged: bool
    # within-cluster sum of squares after each sweep
    objective_history: tuple = field(default_factory=tuple)

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def k(self) -> int:
        return len(self.centroids)

    def visualize(self) -> GrayImage:
        """Image with every pixel replaced by its rounded centroid value."""
        values = np.floor(self.centroids + 0.5).clip(0, 255).astype(np.uint8)
        return GrayImage(values[self.labels])


@dataclass(frozen=True, eq=False)
class RoiMask:
    bits: np.ndarray
    source_cluster: int | None = None

    def __post_init__(self):
        bits = np.array(self.bits, dtype=bool, copy=True)
        if bits.ndim != 2:
            raise ValueError("mask must be 2-D")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def count(self) -> int:
        return int(self.bits.sum())

    @property
    def empty(self) -> bool:
        return not self.bits.any()

    def __eq__(self, other):
        if not isinstance(other, RoiMask):
            return NotImplemented
        return self.bits.shape == other.bits.shape and bool(np.array_equal(self.bits, other.bits))

    __hash__ = None

    def to_image(self) -> GrayImage:
        return GrayImage(np.where(self.bits, 255, 0).astype(np.uint8))

    @classmethod
    def from_image(cls, img: GrayImage) -> "RoiMask":
        """Any nonzero pixel is in the mask."""
        return cls(as_image(img).pixels > 0)


def nearest_centroid(values: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Index of the closest centroid for each value; ties go to the lower index."""
    d = (np.asarray(values, dtype=np.float64)[:, None] - centroids[None, :]) ** 2
    return np.argmin(d, axis=1)


def initial_centroids(lo: int, hi: int, k: int, init: str = "even", seed: int = 0, levels=None) -> np.ndarray:
    if init == "even":
        if k == 1:
            return np.array([(lo + hi) / 2.0])
        return lo + np.arange(k, dtype=np.float64) * (hi - lo) / (k - 1)
    if init == "random":
        rng = np.random.default_rng(seed)
        pool = np.asarray(levels if levels is not None else np.arange(lo, hi + 1))
        return np.sort(rng.choice(pool, size=k, replace=False).astype(np.float64))
    raise ValueError(f"unknown init {init!r}")


def _reseed_empty(centroids, weights, empty):
    """Move each empty centroid onto the occupied level farthest from its nearest centroid.

    Levels already holding a centroid are skipped; ties go to the lower level.
    """
    occupied = weights > 0
    for j in empty:
        nearest = nearest_centroid(_LEVEL_VALUES, centroids)
        resid = (_LEVEL_VALUES - centroids[nearest]) ** 2
        resid[~occupied] = -1.0
        resid[np.isin(_LEVEL_VALUES, centroids)] = -1.0
        centroids[j] = float(np.argmax(resid))
    return centroids


def _objective(centroids, labels_per_level, weights) -> float:
    return float(np.sum(weights * (_LEVEL_VALUES - centroids[labels_per_level]) ** 2))


def kmeans(
    img: GrayImage,
    k: int,
    max_iter: int = 100,
    tol: float = 0.25,
    init: str = "even",
    seed: int = 0,
) -> LabelMap:
    """Lloyd's K-means on pixel intensities, run over the 256-bin histogram.

    Each distinct gray level is a point weighted by its pixel count, which
    gives the same assignments and centroids as clustering every pixel.
    Initial centroids are evenly spaced over ``[min, max]`` of the image
    (``init="random"`` draws distinct occupied levels with ``seed``).
    Clusters that empty out are re-seeded at the occupied level farthest
    from its nearest centroid.  Iteration stops once centroids move by at
    most ``tol`` and the assignment is stable.
    """
    img = as_image(img)
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or k < 1:
        raise ValueError(f"K must be a positive integer, got {k!r}")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if tol < 0:
        raise ValueError("tol must be >= 0")
    weights = compute_histogram(img).counts.astype(np.float64)
    occupied = np.flatnonzero(weights)
    if k > occupied.size:
        raise TooManyClustersError(
            f"K={k} exceeds the {occupied.size} distinct gray values in the image"
        )
    centroids = initial_centroids(int(occupied[0]), int(occupied[-1]), k, init, seed, occupied)
    level_weights = weights
    history = []
    converged = False
    iterations = 0
    labels = nearest_centroid(_LEVEL_VALUES, centroids)
    for iterations in range(1, max_iter + 1):
        sums = np.bincount(labels, weights=level_weights * _LEVEL_VALUES, minlength=k)
        counts = np.bincount(labels, weights=level_weights, minlength=k)
        new = centroids.copy()
        nonempty = counts > 0
        new[nonempty] = sums[nonempty] / counts[nonempty]
        empty = np.flatnonzero(~nonempty)
        if empty.size:
            new = _reseed_empty(new, level_weights, empty)
        history.append(_objective(new, labels, level_weights))
        move = float(np.max(np.abs(new - centroids)))
        centroids = new
        new_labels = nearest_centroid(_LEVEL_VALUES, centroids)
        stable = np.array_equal(new_labels[occupied], labels[occupied])
        labels = new_labels
        if move <= tol and stable and empty.size == 0:
            converged = True
            break

    # Lloyd keeps 1-D centroids ordered; re-seeding may not
    centroids = np.sort(centroids)
    labels = nearest_centroid(_LEVEL_VALUES, centroids)
    centroids, labels = _merge_ties(centroids, labels)
    return LabelMap(
        labels=labels[img.pixels],
        centroids=centroids,
        iterations=iterations,
        converged=converged,
        objective_history=tuple(history),
    )


def _merge_ties(centroids, labels):
    keep = np.concatenate(([True], np.diff(centroids) > 0))
    if keep.all():
        return centroids, labels
    new_index = np.cumsum(keep) - 1
    return centroids[keep], new_index[labels]


def extract_roi(img: GrayImage, lm: LabelMap, strategy="brightest") -> RoiMask:
    """Mask of one cluster.

    ``strategy`` is ``"brightest"`` (largest centroid) or an explicit
    cluster index.
    """
    img = as_image(img)
    if lm.labels.shape != img.pixels.shape:
        raise ValueError("label map does not match the image size")
    if strategy in ("brightest", "brightest_centroid"):
        chosen = lm.k - 1
    else:
        try:
            chosen = int(strategy)
        except (TypeError, ValueError):
            raise ValueError(f"unknown ROI strategy {strategy!r}") from None
        if not 0 <= chosen < lm.k:
            raise IndexError(f"cluster index {chosen} out of range for K={lm.k}")
    return RoiMask(lm.labels == chosen, source_cluster=chosen)


def _structure(connectivity: int) -> np.ndarray:
    if connectivity == 4:
        return ndimage.generate_binary_structure(2, 1)
    if connectivity == 8:
        return ndimage.generate_binary_structure(2, 2)
    raise ValueError(f"connectivity must be 4 or 8, got {connectivity!r}")


def largest_component(mask: RoiMask, connectivity: int = 8) -> RoiMask:
    """Keep the biggest connected component.

    Ties go to the component whose first pixel comes earliest in row-major
    order (scipy numbers components in that order).
    """
    bits = mask.bits
    if not bits.any():
        raise EmptyMaskError("mask has no pixels")
    labeled, n = ndimage.label(bits, structure=_structure(connectivity))
    sizes = np.bincount(labeled.ravel(), minlength=n + 1)
    sizes[0] = 0
    best = int(np.argmax(sizes))
    return RoiMask(labeled == best, source_cluster=mask.source_cluster)


def boundary(bits: np.ndarray) -> np.ndarray:
    """Mask pixels with an off-mask 4-neighbour or lying on the image border."""
    bits = np.asarray(bits, dtype=bool)
    padded = np.pad(bits, 1, constant_values=False)
    interior = (
        padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    )
    return bits & ~interior


def outline(img: GrayImage, mask: RoiMask) -> GrayImage:
    img = as_image(img)
    if img.pixels.shape != mask.bits.shape:
        raise DimensionMismatchError(
            f"mask {mask.width}x{mask.height} does not match image {img.width}x{img.height}"
        )
    out = img.pixels.copy()
    out[boundary(mask.bits)] = 255
    return GrayImage(out)


def dice(a, b) -> float:
    a = np.asarray(getattr(a, "bits", a), dtype=bool)
    b = np.asarray(getattr(b, "bits", b), dtype=bool)
    denom = int(a.sum()) + int(b.sum())
    if denom == 0:
        return 1.0
    return 2.0 * int(np.sum(a & b)) / denom


def segment_roi(
    img: GrayImage,
    k: int = 3,
    roi="brightest",
    largest: bool = True,
    connectivity: int = 8,
    max_iter: int = 100,
    tol: float = 0.25,
    init: str = "even",
    seed: int = 0,
):
    """K-means, cluster selection and optional largest-blob filtering.

    Returns ``(label_map, mask)``.
    """
    lm = kmeans(img, k, max_iter=max_iter, tol=tol, init=init, seed=seed)
    mask = extract_roi(img, lm, roi)
    if largest:
        mask = largest_component(mask, connectivity)
    return lm, mask
