import numpy as np
import pytest

from corpus import image_corpus
from oracles import bbhe_oracle, he_oracle, histogram_list, rmshe_oracle
from mrigrade.enhance import (
    METHODS,
    EmptyHistogramError,
    InvalidDepthError,
    OpCounter,
    dhe_partition,
    enhance,
    equalize_bbhe,
    equalize_dhe,
    equalize_he,
    equalize_rmshe,
    he_transfer,
    partition_of,
    rmshe_partition,
    transfer_of,
)
from mrigrade.imgcore import GrayImage, Histogram, compute_histogram

CORPUS = image_corpus(60, seed=7, max_side=96)


def img_of(values, shape=None):
    a = np.asarray(values, dtype=np.uint8)
    return GrayImage(a.reshape(shape) if shape else a.reshape(1, -1))


def test_he_four_levels():
    out = equalize_he(img_of([0, 1, 2, 3]))
    assert out.pixels.ravel().tolist() == [64, 128, 191, 255]


def test_he_half_and_half():
    img = img_of([0, 0, 255, 255])
    m = he_transfer(compute_histogram(img)).mapping
    assert (m[0], m[255]) == (128, 255)


@pytest.mark.parametrize("v", [0, 1, 77, 254, 255])
def test_constant_images(v):
    img = GrayImage(np.full((5, 7), v, dtype=np.uint8))
    assert np.all(equalize_he(img).pixels == 255)
    assert equalize_bbhe(img) == img
    for r in range(0, 8):
        out = equalize_rmshe(img, r)
        assert out == (img if r > 0 else equalize_he(img))
    assert equalize_dhe(img) == img


def test_bbhe_half_and_half():
    out = equalize_bbhe(img_of([0, 0, 255, 255]))
    assert out.pixels.ravel().tolist() == [127, 127, 255, 255]


def test_empty_histogram():
    with pytest.raises(EmptyHistogramError):
        he_transfer(Histogram(np.zeros(256, dtype=np.int64)))


@pytest.mark.parametrize("r", [-1, 8, 9, 1.5, True])
def test_invalid_depth(r):
    with pytest.raises(InvalidDepthError):
        equalize_rmshe(img_of([1, 2]), r)


def test_unknown_method():
    with pytest.raises(ValueError):
        enhance("CLAHE", img_of([1, 2]))


@pytest.mark.parametrize("idx", range(len(CORPUS)))
def test_against_rational_oracles(idx):
    img = CORPUS[idx]
    counts = histogram_list(img.pixels)
    assert transfer_of("HE", img).mapping.tolist() == he_oracle(counts)
    bb, _ = bbhe_oracle(counts)
    assert transfer_of("BBHE", img).mapping.tolist() == bb
    for r in (0, 1, 2, 3, 5):
        assert transfer_of("RMSHE", img, r=r).mapping.tolist() == rmshe_oracle(counts, r)


@pytest.mark.parametrize("idx", range(len(CORPUS)))
def test_equivalences_and_transfer(idx):
    img = CORPUS[idx]
    assert equalize_rmshe(img, 0) == equalize_he(img)
    assert equalize_rmshe(img, 1) == equalize_bbhe(img)
    for m in METHODS:
        tf = transfer_of(m, img)
        assert tf.is_monotone()
        out = enhance(m, img)
        assert tf(img) == out
        assert out.pixels.shape == img.pixels.shape


@pytest.mark.parametrize("idx", range(len(CORPUS)))
def test_partition_confinement(idx):
    img = CORPUS[idx]
    occupied = set(compute_histogram(img).occupied().tolist())
    for method, params in [("BBHE", {}), ("RMSHE", {"r": 2}), ("RMSHE", {"r": 4}), ("DHE", {})]:
        part = partition_of(method, img, **params)
        mapping = transfer_of(method, img, **params).mapping
        covered = set()
        prev_hi, prev_out = -1, -1
        for (lo, hi), (olo, ohi) in zip(part.segments, part.ranges):
            assert prev_hi < lo <= hi and prev_out < olo <= ohi <= 255
            prev_hi, prev_out = hi, ohi
            covered |= {k for k in range(lo, hi + 1) if k in occupied}
            seg = mapping[lo : hi + 1]
            assert seg.min() >= olo and seg.max() <= ohi
        assert covered == occupied
        assert all(any(lo <= k <= hi for lo, hi in part.segments) for k in occupied)


@pytest.mark.parametrize("idx", range(len(CORPUS)))
def test_bbhe_confinement_at_mean(idx):
    img = CORPUS[idx]
    _, xm = bbhe_oracle(histogram_list(img.pixels))
    src = img.pixels
    out = equalize_bbhe(img).pixels
    assert np.all(out[src <= xm] <= xm)
    assert np.all(out[src > xm] >= xm + 1)


def test_permutation_invariance():
    rng = np.random.default_rng(3)
    for img in CORPUS[:20]:
        flat = img.pixels.ravel()
        perm = rng.permutation(flat.size)
        shuffled = GrayImage(flat[perm].reshape(img.pixels.shape))
        for m in METHODS:
            a = enhance(m, img).pixels.ravel()[perm]
            b = enhance(m, shuffled).pixels.ravel()
            assert np.array_equal(a, b)


def test_he_reaches_255_when_nonconstant():
    for img in CORPUS:
        if len(compute_histogram(img).occupied()) >= 2:
            assert equalize_he(img).pixels.max() == 255


def _flatness(img):
    c = compute_histogram(img).counts
    occ = c[c > 0]
    return occ.max() / occ.mean()


@pytest.mark.parametrize("n_levels", [2, 4, 8, 16, 32, 64, 128])
def test_he_flatness_on_uniform_histogram(n_levels):
    step = 256 // n_levels
    levels = np.arange(step - 1, 256, step, dtype=np.uint8)
    img = GrayImage(np.repeat(levels, 1024 // n_levels).reshape(32, 32))
    assert _flatness(img) == 1.0
    assert _flatness(equalize_he(img)) <= _flatness(img)


def test_rmshe_partition_sizes():
    img = GrayImage(np.arange(256, dtype=np.uint8).reshape(16, 16))
    for r in range(0, 6):
        assert len(rmshe_partition(compute_histogram(img), r)) == 2**r
    two = img_of([10, 200])
    # further splits of single occupied levels are impossible
    assert len(rmshe_partition(compute_histogram(two), 5)) == 2


def test_dhe_unimodal_equals_he():
    counts = [1, 2, 3, 4, 5, 6, 5, 4, 3, 2, 1]
    vals = np.repeat(np.arange(100, 111), counts)
    img = img_of(vals)
    assert len(partition_of("DHE", img)) == 1
    assert equalize_dhe(img) == equalize_he(img)


def test_dhe_bimodal_gap():
    rng = np.random.default_rng(0)
    a = rng.integers(10, 21, 500)
    b = rng.integers(200, 241, 500)
    img = img_of(np.concatenate([a, b]))
    part = partition_of("DHE", img)
    # the empty gap between the modes always separates the parts
    assert any(hi <= 20 for _, hi in part.segments) and any(lo >= 200 for lo, _ in part.segments)
    out = equalize_dhe(img).pixels.ravel()
    assert out[:500].max() < out[500:].min()


def test_dhe_two_levels():
    img = img_of([0, 255])
    assert transfer_of("DHE", img).is_monotone()
    out = equalize_dhe(img).pixels.ravel()
    assert out[0] < out[1]


def test_dhe_allocation_option():
    rng = np.random.default_rng(5)
    img = img_of(np.concatenate([rng.integers(10, 60, 300), rng.integers(150, 160, 3000)]))
    for alloc in ("span", "span_log_population"):
        tf = transfer_of("DHE", img, allocation=alloc)
        assert tf.is_monotone()
        part = dhe_partition(compute_histogram(img), allocation=alloc)
        assert part.ranges[0][0] == 0 and part.ranges[-1][1] == 255
    with pytest.raises(ValueError):
        equalize_dhe(img, allocation="cdf")
    with pytest.raises(ValueError):
        equalize_dhe(img, spread_factor=0)


def test_dhe_domination_resplit():
    # one wide, heavily populated part next to a sparse one: the heavy part
    # is split at its mean
    rng = np.random.default_rng(2)
    heavy = rng.integers(100, 200, 20000)
    light = rng.integers(10, 20, 50)
    img = img_of(np.concatenate([light, heavy]))
    loose = dhe_partition(compute_histogram(img), spread_factor=1e9)
    tight = dhe_partition(compute_histogram(img), spread_factor=1.0)
    assert len(tight) > len(loose)


# --------------------------------------------------------------------------
# operation counts


def counts_of(method, img, **params):
    ops = OpCounter()
    enhance(method, img, ops, **params)
    return ops.additions, ops.multiplications


def test_he_op_count_formula():
    for img in CORPUS[:20]:
        assert counts_of("HE", img) == (img.size + 255, 256)


@pytest.mark.parametrize("v", [0, 1, 100, 254, 255])
def test_constant_image_op_counts(v):
    img = GrayImage(np.full((6, 9), v, dtype=np.uint8))
    n = img.size
    assert counts_of("BBHE", img) == (n + 510 + v, 258 + v)
    extra = (2 * v, v + 2) if 0 < v < 255 else (0, 0)
    for r in (2, 3, 7):
        assert counts_of("RMSHE", img, r=r) == (n + 510 + v + extra[0], 258 + v + extra[1])
    assert counts_of("DHE", img) == (n, 0)


def test_op_count_ordering():
    for img in CORPUS:
        if len(compute_histogram(img).occupied()) < 2:
            continue
        he = sum(counts_of("HE", img))
        bb = sum(counts_of("BBHE", img))
        r2 = sum(counts_of("RMSHE", img, r=2))
        assert he <= bb <= r2


def test_op_counts_deterministic():
    img = CORPUS[0]
    for m in METHODS:
        assert counts_of(m, img) == counts_of(m, img)


# --------------------------------------------------------------------------
# properties over arbitrary images

from hypothesis import given, settings  # noqa: E402
from hypothesis import strategies as st  # noqa: E402
from hypothesis.extra.numpy import arrays  # noqa: E402


@settings(max_examples=150, deadline=None)
@given(
    arrays(np.uint8, st.tuples(st.integers(1, 24), st.integers(1, 24))),
    st.integers(0, 7),
)
def test_properties_any_image(a, r):
    img = GrayImage(a)
    assert equalize_rmshe(img, 0) == equalize_he(img)
    assert equalize_rmshe(img, 1) == equalize_bbhe(img)
    for m, params in [("HE", {}), ("BBHE", {}), ("RMSHE", {"r": r}), ("DHE", {})]:
        tf = transfer_of(m, img, **params)
        assert tf.is_monotone()
        out = enhance(m, img, **params)
        assert out.pixels.shape == a.shape
        assert tf(img) == out
