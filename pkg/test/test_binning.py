import pytest
import numpy as np
from hypothesis import given, settings, strategies as st

from src.SPDC_g2.binning import (
    BinningKind,
    BinningScheme,
    Direction,
    bin_anchored,
    bin_consecutive,
    bin_record,
    random_offsets,
    sample_anchors,
    sample_bins,
    window_counts,
)
from src.SPDC_g2.errors import RecordRangeError
from src.SPDC_g2.simulator import generate_coherent_control
from src.SPDC_g2.timetag_model import ChannelId, TagRecord


@pytest.fixture
def record():
    # A at 0, 10, 25; B at 10, 39; C at 5
    return TagRecord.from_arrays([0, 0, 0, 1, 1, 2], [0, 10, 25, 10, 39, 5], duration=40)


def test_consecutive_bins_are_half_open(record):
    """
    Test that a tag on a bin edge belongs to the bin that starts there.
    """

    bins = bin_consecutive(record, tau=10, n_bins=4)

    np.testing.assert_array_equal(bins.c_a, [1, 1, 1, 0])
    np.testing.assert_array_equal(bins.c_b, [0, 1, 0, 1])
    np.testing.assert_array_equal(bins.c_c, [1, 0, 0, 0])
    np.testing.assert_array_equal(bins.bin_index, [0, 1, 2, 3])
    assert bins.common_tau() == 10


def test_consecutive_offset(record):
    """
    Test that the offset shifts every bin.
    """

    bins = bin_consecutive(record, tau=10, n_bins=3, offset=5)

    np.testing.assert_array_equal(bins.c_a, [1, 0, 1])
    np.testing.assert_array_equal(bins.c_c, [1, 0, 0])


def test_consecutive_out_of_range(record):
    """
    Test that bins extending past the duration are refused.
    """

    with pytest.raises(RecordRangeError):
        bin_consecutive(record, tau=10, n_bins=5)

    with pytest.raises(ValueError):
        bin_consecutive(record, tau=0, n_bins=1)


def test_anchored_forward_and_backward(record):
    """
    Test cumulative windows grown in both directions from a fixed point.
    """

    forward = bin_anchored(record, anchor=10, tau=10, n_steps=3, direction=Direction.FORWARD)
    backward = bin_anchored(record, anchor=20, tau=10, n_steps=2, direction=Direction.BACKWARD)

    np.testing.assert_array_equal(forward.c_a, [1, 2, 2])
    np.testing.assert_array_equal(forward.c_b, [1, 1, 2])
    np.testing.assert_array_equal(forward.tau, [10, 20, 30])
    np.testing.assert_array_equal(forward.bin_index, [1, 2, 3])

    np.testing.assert_array_equal(backward.c_a, [1, 2])
    np.testing.assert_array_equal(backward.c_c, [0, 1])


def test_anchored_edges_are_half_open():
    """
    Test that a tag exactly at the anchor belongs to the forward windows only, and that a tag
    at anchor - 2 * tau first enters the second backward window.
    """

    # A at 10 and 20; B at 15
    record = TagRecord.from_arrays([0, 0, 1], [10, 20, 15], duration=40)

    forward = bin_anchored(record, anchor=20, tau=5, n_steps=2, direction=Direction.FORWARD)
    backward = bin_anchored(record, anchor=20, tau=5, n_steps=3, direction=Direction.BACKWARD)

    np.testing.assert_array_equal(forward.c_a, [1, 1])
    np.testing.assert_array_equal(forward.c_b, [0, 0])

    np.testing.assert_array_equal(backward.c_a, [0, 1, 1])
    np.testing.assert_array_equal(backward.c_b, [1, 1, 1])


def test_anchored_out_of_range(record):
    """
    Test that windows leaving [0, duration] are refused.
    """

    with pytest.raises(RecordRangeError):
        bin_anchored(record, anchor=30, tau=10, n_steps=2)

    with pytest.raises(RecordRangeError):
        bin_anchored(record, anchor=10, tau=10, n_steps=2, direction="backward")


def test_sampled_bins_are_reproducible():
    """
    Test that sampled bins repeat for a fixed seed and are tallied at the offsets drawn by
    random_offsets().
    """

    record = TagRecord.from_arrays(np.zeros(1000, dtype=int), np.arange(0, 10_000, 10), duration=10_000)

    first = sample_bins(record, tau=20, n_samples=400, seed=3)
    second = sample_bins(record, tau=20, n_samples=400, seed=3)

    np.testing.assert_array_equal(first.c_a, second.c_a)

    starts = random_offsets(record.duration, 20, 400, np.random.default_rng(3))
    np.testing.assert_array_equal(first.c_a, window_counts(record, starts, 20)[0])


@given(
    st.integers(0, 60),
    st.integers(1, 1000),
    st.integers(0, 100_000),
    st.integers(0, 2**32 - 1),
)
@settings(max_examples=300, deadline=None)
def test_random_offsets_are_disjoint(n_samples, tau, slack, seed):
    """
    Property: sampled windows are sorted, never overlap and stay inside [0, duration).
    """

    duration = n_samples * tau + slack
    starts = random_offsets(duration, tau, n_samples, np.random.default_rng(seed))

    assert starts.size == n_samples
    if n_samples:
        assert np.all(starts[1:] >= starts[:-1] + tau)
        assert starts[0] >= 0
        assert starts[-1] + tau <= duration


def test_sampled_bins_mean_matches_rate():
    """
    Test that the mean counts of 1000 sampled bins of a control record match rate * tau
    within 5 standard errors.
    """

    record = generate_coherent_control(1e6, 2e6, 0.0, duration=10_000_000_000, seed=11)
    bins = sample_bins(record, tau=1_000_000, n_samples=1000, seed=2)

    # Poisson counts: the variance equals the mean rate * tau
    for counts, expected in ((bins.c_a, 1.0), (bins.c_b, 2.0)):
        assert abs(counts.mean() - expected) < 5 * np.sqrt(expected / 1000)


def test_sampled_bins_too_many(record):
    """
    Test that more disjoint bins than fit in the record are refused.
    """
    with pytest.raises(RecordRangeError):
        sample_bins(record, tau=10, n_samples=5, seed=0)


def test_sample_anchors_leave_room():
    """
    Test that anchors leave room for windows of the given reach on both sides.
    """

    anchors = sample_anchors(TagRecord.empty(1000), reach=300, n_samples=500, seed=1)

    assert anchors.min() >= 300
    assert anchors.max() <= 700
    assert np.all(np.diff(anchors) >= 0)

    with pytest.raises(RecordRangeError):
        sample_anchors(TagRecord.empty(1000), reach=600, n_samples=1, seed=1)


def test_bin_record_dispatch(record):
    """
    Test that bin_record follows the scheme.
    """

    consecutive = bin_record(record, BinningScheme(BinningKind.CONSECUTIVE, tau=10, n_bins=4))
    anchored = bin_record(record, BinningScheme("anchored", tau=10, n_bins=3, anchor=10))

    assert list(consecutive) == list(bin_consecutive(record, 10, 4))
    assert list(anchored) == list(bin_anchored(record, 10, 10, 3))

    with pytest.raises(RecordRangeError):
        bin_record(record, BinningScheme("anchored", tau=1, n_bins=1, anchor=41))

    with pytest.raises(ValueError):
        BinningScheme("consecutive", tau=10, n_bins=0)


@given(
    st.lists(st.tuples(st.integers(0, 2), st.integers(0, 999)), max_size=300),
    st.sampled_from([1, 7, 10, 100, 250, 1000]),
)
@settings(max_examples=200, deadline=None)
def test_count_conservation(tags, tau):
    """
    Property: bins tiling [0, duration) reproduce the per-channel tag counts.
    """

    record = TagRecord.from_arrays([c for c, _ in tags], [t for _, t in tags], duration=1000)
    n_bins = -(-1000 // tau)

    # Extend the span so the last partial bin is covered
    bins = bin_consecutive(TagRecord(record.channels, record.timestamps, n_bins * tau), tau, n_bins)
    counts = record.channel_counts()

    assert bins.c_a.sum() == counts[ChannelId.A]
    assert bins.c_b.sum() == counts[ChannelId.B]
    assert bins.c_c.sum() == counts[ChannelId.C]


@given(st.integers(0, 500), st.integers(1, 50), st.integers(1, 10))
@settings(max_examples=100, deadline=None)
def test_anchored_monotonicity(anchor, tau, n_steps):
    """
    Property: counts in windows grown from a fixed point never decrease with the step.
    """

    rng = np.random.default_rng(anchor)
    record = TagRecord.from_arrays(rng.integers(0, 3, 200), rng.integers(0, 1000, 200), duration=1000)

    forward_fits = anchor + n_steps * tau <= 1000
    if forward_fits:
        bins = bin_anchored(record, anchor, tau, n_steps, Direction.FORWARD)
        for counts in (bins.c_a, bins.c_b, bins.c_c):
            assert np.all(np.diff(counts) >= 0)

    if anchor - n_steps * tau >= 0:
        bins = bin_anchored(record, anchor, tau, n_steps, Direction.BACKWARD)
        for counts in (bins.c_a, bins.c_b, bins.c_c):
            assert np.all(np.diff(counts) >= 0)
