"""Global histogram equalizers: HE, BBHE, RMSHE and DHE.

Every method is expressed as a monotone 256-entry gray-level mapping built
from the image histogram, so outputs depend on the histogram only.

Shared conventions:

* rounding is round-half-up, evaluated in exact integer arithmetic;
* a sub-range ``[lo, hi]`` with output range ``[out_lo, out_hi]`` maps level
  ``k`` to ``out_lo + round((out_hi - out_lo) * subcdf(k))``;
* mean split points are ``floor(mean)`` and the split level joins the lower
  part.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .imgcore import (
    LEVELS,
    MAX_LEVEL,
    GrayImage,
    Histogram,
    apply_mapping,
    as_image,
    compute_histogram,
    round_half_up_ratio,
)

METHODS = ("HE", "BBHE", "RMSHE", "DHE")
MAX_RMSHE_DEPTH = 7


class EmptyHistogramError(ValueError):
    pass


class InvalidDepthError(ValueError):
    pass


@dataclass
class OpCounter:
    """Additions and multiplications performed by one equalizer run.

    Divisions count as multiplications; comparisons and table lookups are
    free.
    """

    additions: int = 0
    multiplications: int = 0

    def add(self, n: int = 1) -> None:
        self.additions += int(n)

    def mul(self, n: int = 1) -> None:
        self.multiplications += int(n)


@dataclass(frozen=True, eq=False)
class TransferFunction:
    mapping: np.ndarray

    def __post_init__(self):
        m = np.array(self.mapping, dtype=np.int64, copy=True)
        if m.shape != (LEVELS,):
            raise ValueError("transfer function needs 256 entries")
        if m.min() < 0 or m.max() > MAX_LEVEL:
            raise ValueError("transfer function outputs must lie in [0, 255]")
        m.setflags(write=False)
        object.__setattr__(self, "mapping", m)

    def is_monotone(self) -> bool:
        return bool(np.all(np.diff(self.mapping) >= 0))

    def __call__(self, img: GrayImage) -> GrayImage:
        return apply_mapping(img, self.mapping)


@dataclass(frozen=True)
class SubHistogramPartition:
    """Input gray-level segments and the output ranges they are equalized into.

    ``segments[i]`` is trimmed to the occupied levels of the part;
    ``ranges[i]`` is the inclusive output interval assigned to it.
    """

    segments: tuple = field(default_factory=tuple)
    ranges: tuple = field(default_factory=tuple)

    def __len__(self):
        return len(self.segments)


def _ops(ops):
    return ops if ops is not None else OpCounter()


def _count_pixels(img: GrayImage, ops: OpCounter) -> Histogram:
    ops.add(img.size)
    return compute_histogram(img)


def _floor_mean(counts: np.ndarray, lo: int, hi: int, ops: OpCounter) -> int:
    sub = counts[lo : hi + 1]
    w = hi - lo + 1
    ops.mul(w + 1)
    ops.add(2 * (w - 1))
    weighted = int(np.dot(np.arange(lo, hi + 1, dtype=np.int64), sub))
    return weighted // int(sub.sum())


def _equalize_range(counts, lo, hi, out_lo, out_hi, mapping, ops: OpCounter) -> None:
    """Write the HE mapping of ``counts[lo:hi+1]`` onto ``[out_lo, out_hi]``."""
    sub = counts[lo : hi + 1]
    total = int(sub.sum())
    if total == 0:
        mapping[lo : hi + 1] = np.clip(np.arange(lo, hi + 1), out_lo, out_hi)
        return
    w = hi - lo + 1
    cum = np.cumsum(sub)
    ops.add(w - 1)
    scaled = round_half_up_ratio((out_hi - out_lo) * cum, total)
    ops.mul(w)
    if out_lo:
        scaled = scaled + out_lo
        ops.add(w)
    mapping[lo : hi + 1] = scaled


def _mapping_from_partition(counts, part: SubHistogramPartition, ops: OpCounter) -> np.ndarray:
    """Compose per-segment mappings; levels between segments hold the last value."""
    mapping = np.zeros(LEVELS, dtype=np.int64)
    prev_end, prev_val = -1, 0
    for (lo, hi), (out_lo, out_hi) in zip(part.segments, part.ranges):
        mapping[prev_end + 1 : lo] = prev_val
        _equalize_range(counts, lo, hi, out_lo, out_hi, mapping, ops)
        prev_end, prev_val = hi, mapping[hi]
    mapping[prev_end + 1 :] = prev_val
    return mapping


# --------------------------------------------------------------------------
# HE


def he_transfer(hist: Histogram, ops: OpCounter | None = None) -> TransferFunction:
    """Plain CDF scaling ``round(255 * CDF(k))``; no cdf-min renormalization."""
    ops = _ops(ops)
    total = hist.total
    if total < 1:
        raise EmptyHistogramError("cannot equalize an empty histogram")
    mapping = np.zeros(LEVELS, dtype=np.int64)
    _equalize_range(hist.counts, 0, MAX_LEVEL, 0, MAX_LEVEL, mapping, ops)
    return TransferFunction(mapping)


def equalize_he(img: GrayImage, ops: OpCounter | None = None) -> GrayImage:
    img = as_image(img)
    ops = _ops(ops)
    return he_transfer(_count_pixels(img, ops), ops)(img)


# --------------------------------------------------------------------------
# BBHE / RMSHE


def _trim(counts, lo, hi):
    occ = np.flatnonzero(counts[lo : hi + 1])
    if occ.size == 0:
        return None
    return lo + int(occ[0]), lo + int(occ[-1])


def rmshe_partition(hist: Histogram, r: int, ops: OpCounter | None = None) -> SubHistogramPartition:
    """Recursive mean separation of ``[0, 255]`` to depth ``r``.

    A part is split at the floor of the mean of its own pixels.  Empty parts
    and parts whose split would reproduce themselves are not split further,
    so fewer than ``2**r`` segments may result.  Output ranges equal the
    input ranges of the leaves; only occupied leaves are listed.
    """
    if not isinstance(r, (int, np.integer)) or isinstance(r, bool) or r < 0:
        raise InvalidDepthError(f"recursion depth must be a non-negative integer, got {r!r}")
    if r > MAX_RMSHE_DEPTH:
        raise InvalidDepthError(f"recursion depth {r} exceeds {MAX_RMSHE_DEPTH}")
    ops = _ops(ops)
    counts = hist.counts
    leaves = []

    def split(lo, hi, depth):
        if depth == 0 or lo == hi or counts[lo : hi + 1].sum() == 0:
            leaves.append((lo, hi))
            return
        m = _floor_mean(counts, lo, hi, ops)
        if m >= hi:
            leaves.append((lo, hi))
            return
        split(lo, m, depth - 1)
        split(m + 1, hi, depth - 1)

    split(0, MAX_LEVEL, int(r))
    segments, ranges = [], []
    for lo, hi in leaves:
        trimmed = _trim(counts, lo, hi)
        if trimmed is not None:
            segments.append(trimmed)
            ranges.append((lo, hi))
    return SubHistogramPartition(tuple(segments), tuple(ranges))


def _rmshe_mapping(hist: Histogram, r: int, ops: OpCounter) -> np.ndarray:
    part = rmshe_partition(hist, r, ops)
    mapping = np.arange(LEVELS, dtype=np.int64)
    for (lo, hi), (out_lo, out_hi) in zip(part.segments, part.ranges):
        # leaves tile [0, 255]; unoccupied leaves keep the identity
        _equalize_range(hist.counts, out_lo, out_hi, out_lo, out_hi, mapping, ops)
    return mapping


def equalize_rmshe(img: GrayImage, r: int = 2, ops: OpCounter | None = None) -> GrayImage:
    """Recursive mean-separate HE.  ``r=0`` is HE, ``r=1`` is BBHE."""
    img = as_image(img)
    ops = _ops(ops)
    if not isinstance(r, (int, np.integer)) or isinstance(r, bool) or not 0 <= r <= MAX_RMSHE_DEPTH:
        raise InvalidDepthError(f"recursion depth must be an integer in [0, {MAX_RMSHE_DEPTH}], got {r!r}")
    hist = _count_pixels(img, ops)
    return apply_mapping(img, _rmshe_mapping(hist, r, ops))


def equalize_bbhe(img: GrayImage, ops: OpCounter | None = None) -> GrayImage:
    """Bi-histogram equalization split at ``floor(mean)``.

    Levels ``<= Xm`` are equalized onto ``[0, Xm]`` and the rest onto
    ``[Xm + 1, 255]``.  A constant image is returned unchanged.
    """
    return equalize_rmshe(img, 1, ops)


# --------------------------------------------------------------------------
# DHE


def _smoothed(counts: np.ndarray, ops: OpCounter) -> np.ndarray:
    # 3-tap box filter, zero padded; kept as integer sums (the /3 does not
    # change where the minima are)
    padded = np.concatenate(([0], counts, [0]))
    ops.add(2 * LEVELS)
    return padded[:-2] + padded[1:-1] + padded[2:]


def _minima_partitions(counts, smooth, first, last):
    """Split ``[first, last]`` after every interior local minimum.

    A level is a minimum when it is not above its left neighbour and is
    strictly below its right one; on a flat valley floor this picks the
    right end, giving one split per valley.
    """
    cuts = []
    for k in range(first + 1, last):
        if smooth[k] <= smooth[k - 1] and smooth[k] < smooth[k + 1]:
            cuts.append(k)
    bounds = [first - 1] + cuts + [last]
    parts = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        trimmed = _trim(counts, a + 1, b)
        if trimmed is not None:
            parts.append(trimmed)
    return parts


def _resplit_dominating(counts, parts, spread_factor, min_width, ops):
    total = int(counts.sum())
    while True:
        ops.mul(2)
        threshold = spread_factor * total / len(parts)
        changed = False
        out = []
        for lo, hi in parts:
            pop = int(counts[lo : hi + 1].sum())
            ops.add(hi - lo)
            if pop > threshold and hi - lo + 1 > min_width:
                m = _floor_mean(counts, lo, hi, ops)
                # lo <= m < hi since the part has >= 2 occupied levels at its ends
                out.append(_trim(counts, lo, m))
                out.append(_trim(counts, m + 1, hi))
                changed = True
            else:
                out.append((lo, hi))
        parts = out
        if not changed:
            return parts


def _allocate(counts, parts, allocation, ops):
    """Give each part ``1 + share`` output levels, shares proportional to weight.

    Shares of the ``256 - n`` spare levels are cut from the cumulative weight
    with round-half-up so they always sum exactly.
    """
    n = len(parts)
    spare = LEVELS - n
    spans = [hi - lo for lo, hi in parts]
    if allocation == "span":
        weights = spans
    elif allocation == "span_log_population":
        weights = [
            s * math.log10(1 + int(counts[lo : hi + 1].sum())) for s, (lo, hi) in zip(spans, parts)
        ]
    else:
        raise ValueError(f"unknown DHE allocation {allocation!r}")
    if sum(weights) <= 0:
        weights = [1] * n
    ops.add(n)
    ops.mul(n)
    ranges = []
    start = 0
    acc = 0
    prev_share = 0
    wsum = sum(weights)
    for w in weights:
        acc += w
        if allocation == "span" or isinstance(wsum, int):
            share = (2 * spare * acc + wsum) // (2 * wsum)
        else:
            share = math.floor(spare * acc / wsum + 0.5)
        width = 1 + share - prev_share
        prev_share = share
        ranges.append((start, start + width - 1))
        start += width
    return ranges


def dhe_partition(
    hist: Histogram,
    spread_factor: float = 3.0,
    min_partition_width: int = 3,
    allocation: str = "span",
    ops: OpCounter | None = None,
) -> SubHistogramPartition:
    """Partition the histogram for dynamic histogram equalization.

    1. smooth with a 3-tap mean and cut after each interior local minimum;
    2. a part dominates when its population exceeds
       ``spread_factor * total / n_parts``; dominating parts wider than
       ``min_partition_width`` levels are re-split at their floor mean,
       repeatedly;
    3. output ranges are allocated proportionally to each part's gray-level
       span (``allocation="span"``), or to span times
       ``log10(1 + population)`` with ``allocation="span_log_population"``.

    A single-level histogram returns one part mapped onto itself.
    """
    if not spread_factor > 0:
        raise ValueError("spread_factor must be positive")
    if not 1 <= min_partition_width <= MAX_LEVEL:
        raise ValueError("min_partition_width must lie in [1, 255]")
    ops = _ops(ops)
    counts = hist.counts
    occ = hist.occupied()
    if occ.size == 0:
        raise EmptyHistogramError("cannot equalize an empty histogram")
    first, last = int(occ[0]), int(occ[-1])
    if first == last:
        return SubHistogramPartition(((first, first),), ((first, first),))
    smooth = _smoothed(counts, ops)
    parts = _minima_partitions(counts, smooth, first, last)
    parts = _resplit_dominating(counts, parts, spread_factor, min_partition_width, ops)
    ranges = _allocate(counts, parts, allocation, ops)
    return SubHistogramPartition(tuple(parts), tuple(ranges))


def _dhe_mapping(hist, spread_factor, min_partition_width, allocation, ops) -> np.ndarray:
    part = dhe_partition(hist, spread_factor, min_partition_width, allocation, ops)
    if len(part) == 1 and part.segments[0][0] == part.segments[0][1] == part.ranges[0][0]:
        return np.arange(LEVELS, dtype=np.int64)
    return _mapping_from_partition(hist.counts, part, ops)


def equalize_dhe(
    img: GrayImage,
    spread_factor: float = 3.0,
    min_partition_width: int = 3,
    allocation: str = "span",
    ops: OpCounter | None = None,
) -> GrayImage:
    img = as_image(img)
    ops = _ops(ops)
    hist = _count_pixels(img, ops)
    return apply_mapping(img, _dhe_mapping(hist, spread_factor, min_partition_width, allocation, ops))


# --------------------------------------------------------------------------
# dispatch


def normalize_method(method: str) -> str:
    name = str(method).upper()
    if name not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")
    return name


def transfer_of(method: str, img: GrayImage, ops: OpCounter | None = None, **params) -> TransferFunction:
    """Composite mapping that reproduces ``enhance(method, img, **params)`` pixel-wise.

    Accepted params: ``r`` for RMSHE; ``spread_factor``,
    ``min_partition_width`` and ``allocation`` for DHE.
    """
    method = normalize_method(method)
    img = as_image(img)
    ops = _ops(ops)
    hist = _count_pixels(img, ops)
    if method == "HE":
        return he_transfer(hist, ops)
    if method == "BBHE":
        return TransferFunction(_rmshe_mapping(hist, 1, ops))
    if method == "RMSHE":
        r = params.get("r", 2)
        rmshe_partition(hist, r)  # validates depth before any work
        return TransferFunction(_rmshe_mapping(hist, r, ops))
    return TransferFunction(
        _dhe_mapping(
            hist,
            params.get("spread_factor", 3.0),
            params.get("min_partition_width", 3),
            params.get("allocation", "span"),
            ops,
        )
    )


def partition_of(method: str, img: GrayImage, **params) -> SubHistogramPartition:
    """Segments and output ranges used by a method (HE is one full-range part)."""
    method = normalize_method(method)
    hist = compute_histogram(img)
    if method == "HE":
        lo, hi = int(hist.occupied()[0]), int(hist.occupied()[-1])
        return SubHistogramPartition(((lo, hi),), ((0, MAX_LEVEL),))
    if method == "BBHE":
        return rmshe_partition(hist, 1)
    if method == "RMSHE":
        return rmshe_partition(hist, params.get("r", 2))
    return dhe_partition(
        hist,
        params.get("spread_factor", 3.0),
        params.get("min_partition_width", 3),
        params.get("allocation", "span"),
    )


def enhance(method: str, img: GrayImage, ops: OpCounter | None = None, **params) -> GrayImage:
    """Run one of the four equalizers by name."""
    img = as_image(img)
    return transfer_of(method, img, ops, **params)(img)
