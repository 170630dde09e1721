import pytest
import numpy as np
from fractions import Fraction

from src.SPDC_g2.timetag_model import (
    BinCensus,
    BinCounts,
    BinSeries,
    CensusMode,
    ChannelId,
    G2Estimate,
    TagRecord,
    TimeTag,
    validate_record,
)


def test_channel_labels():
    """
    Test that channel labels parse case-insensitively and that unknown labels are rejected.
    """

    assert ChannelId.from_label("a") is ChannelId.A
    assert ChannelId.from_label(" C ") is ChannelId.C

    with pytest.raises(ValueError):
        ChannelId.from_label("D")


def test_time_tag_rejects_negative_timestamp():
    """
    Test that a TimeTag cannot carry a negative timestamp.
    """
    with pytest.raises(ValueError):
        TimeTag(ChannelId.A, -1)


def test_record_sorts_by_timestamp_then_channel():
    """
    Test that from_arrays orders tags by timestamp and breaks ties in A < B < C order.
    """

    record = TagRecord.from_arrays([2, 0, 1, 0], [5, 5, 3, 9], duration=10)

    assert [(tag.channel, tag.timestamp) for tag in record] == [
        (ChannelId.B, 3),
        (ChannelId.A, 5),
        (ChannelId.C, 5),
        (ChannelId.A, 9),
    ]
    assert validate_record(record) == []


def test_record_behaves_as_a_sequence():
    """
    Test indexing, slicing and length of a TagRecord.
    """

    tags = [TimeTag(ChannelId.A, 1), TimeTag(ChannelId.B, 2), TimeTag(ChannelId.C, 4)]
    record = TagRecord.from_tags(tags, duration=5)

    assert len(record) == 3
    assert record[1] == TimeTag(ChannelId.B, 2)
    assert record[-1] == TimeTag(ChannelId.C, 4)
    assert record[:2] == tags[:2]
    assert record.channel_counts() == {ChannelId.A: 1, ChannelId.B: 1, ChannelId.C: 1}


def test_record_arrays_are_read_only():
    """
    Test that the arrays backing a record cannot be modified in place.
    """

    record = TagRecord.from_arrays([0, 1], [1, 2], duration=3)

    with pytest.raises(ValueError):
        record.timestamps[0] = 7


def test_record_equality_includes_metadata():
    """
    Test that records with the same tags but different metadata compare unequal, while
    same_tags() ignores the metadata.
    """

    first = TagRecord.from_arrays([0, 1], [1, 2], duration=3, meta={"seed": "1"})
    second = first.with_meta(seed=2)

    assert first != second
    assert first.same_tags(second)
    assert second.meta["seed"] == "2"


def test_validate_record_reports_every_violation():
    """
    Test that validate_record names each offending index without raising.
    """

    record = TagRecord([0, 1, 0, 2], [4, 2, 12, 12], duration=10)

    assert validate_record(record) == [
        "unsorted at index 1",
        "tag beyond duration at index 2",
        "tag beyond duration at index 3",
    ]


def test_validate_record_flags_channel_tie_order():
    """
    Test that equal timestamps in C-before-A order are reported as unsorted.
    """
    record = TagRecord([2, 0], [3, 3], duration=10)
    assert validate_record(record) == ["unsorted at index 1"]


def test_record_rejects_unknown_channel():
    """
    Test that channel identifiers other than A, B and C are rejected.
    """
    with pytest.raises(ValueError):
        TagRecord([3], [0], duration=1)


def test_bin_counts_invariants():
    """
    Test that negative counts and non-positive widths are rejected.
    """

    with pytest.raises(ValueError):
        BinCounts(-1, 0, 0)

    with pytest.raises(ValueError):
        BinCounts(0, 0, 0, tau=0)

    assert BinCounts(2, 1, 3).signal == 3
    assert BinCounts(2, 1, 3).total == 6


def test_bin_series_round_trip_from_bins():
    """
    Test that a BinSeries built from BinCounts yields the same bins back.
    """

    bins = [BinCounts(1, 0, 0, 0, 5), BinCounts(0, 2, 1, 1, 5)]
    series = BinSeries.from_bins(bins)

    assert list(series) == bins
    assert series.common_tau() == 5
    assert list(series[1:]) == bins[1:]
    assert list(series.to_frame().columns) == ["bin_index", "tau_ps", "c_a", "c_b", "c_c"]


def test_bin_series_mixed_tau():
    """
    Test that common_tau() rejects mixed and empty series.
    """

    series = BinSeries.from_bins([BinCounts(1, 0, 0, 0, 5), BinCounts(1, 0, 0, 1, 6)])

    with pytest.raises(ValueError, match="Mixed tau"):
        series.common_tau()

    with pytest.raises(ValueError):
        BinSeries.from_bins([]).common_tau()


def test_undefined_estimate():
    """
    Test that an estimate without contributing bins is undefined and carries no value.
    """

    estimate = G2Estimate.undefined(4)

    assert not estimate.is_defined
    assert estimate.value is None
    assert estimate.standard_error is None

    with pytest.raises(ValueError):
        G2Estimate(value=0.0, n_w=0, n_total=4)


def test_estimate_value_must_match_terms():
    """
    Test that the value of an estimate is the mean of its per-bin terms.
    """

    estimate = G2Estimate(value=1.0, n_w=2, n_total=3, per_bin_terms=np.array([0.0, 2.0]), std_dev=np.sqrt(2.0))
    assert estimate.standard_error == pytest.approx(1.0)

    with pytest.raises(ValueError):
        G2Estimate(value=0.5, n_w=2, n_total=3, per_bin_terms=np.array([0.0, 2.0]))

    with pytest.raises(ValueError):
        G2Estimate(value=1.0, n_w=4, n_total=3)


def test_census_fractions_are_exact():
    """
    Test that census fractions are exact rationals summing to one.
    """

    census = BinCensus(n_no=1, n_single=1, n_multi=1, tau=10, mode=CensusMode.UNHERALDED)

    assert census.single_photon == Fraction(1, 3)
    assert census.no_photon + census.single_photon + census.multi_photon == 1
    assert census.n_total == 3

    with pytest.raises(ValueError):
        BinCensus(n_no=0, n_single=0, n_multi=0, tau=10, mode="heralded")
