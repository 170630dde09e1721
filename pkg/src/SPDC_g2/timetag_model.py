from __future__ import annotations

from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from fractions import Fraction
from types import MappingProxyType
from typing import Optional

import numpy as np
import pandas as pd

# Column layout of bin dumps
BIN_COLUMNS = ["bin_index", "tau_ps", "c_a", "c_b", "c_c"]


class ChannelId(IntEnum):
    """
    Detector identity. A and B are the beam-splitter outputs, C is the herald. The integer
    values double as the tie-break order for equal timestamps.
    """

    A = 0
    B = 1
    C = 2

    @classmethod
    def from_label(cls, label: str) -> "ChannelId":
        """
        Parses a channel label ('A', 'B' or 'C').

        Args:
            label (str): The label to parse.

        Returns:
            ChannelId: The matching channel.

        Raises:
            ValueError: If the label does not name a channel.
        """
        try:
            return cls[str(label).strip().upper()]
        except KeyError:
            raise ValueError(
                f"'{label}' is not a valid channel. Valid channels are {[c.name for c in cls]}."
            ) from None


class CensusMode(str, Enum):
    UNHERALDED = "unheralded"
    HERALDED = "heralded"


@dataclass(frozen=True)
class TimeTag:
    """
    One detection event.

    Args:
        channel (ChannelId): The detector that fired.
        timestamp (int): Picoseconds since the start of the acquisition.
    """

    channel: ChannelId
    timestamp: int

    def __post_init__(self):
        object.__setattr__(self, "channel", ChannelId(self.channel))
        object.__setattr__(self, "timestamp", int(self.timestamp))
        if self.timestamp < 0:
            raise ValueError(f"Timestamps must be non-negative, got {self.timestamp}.")


def _frozen(values, dtype) -> np.ndarray:
    array = np.array(values, dtype=dtype).reshape(-1)
    array.setflags(write=False)
    return array


class TagRecord(Sequence):
    """
    An ordered multi-channel stream of detection events plus acquisition metadata.

    Construction does not enforce ordering or range invariants; use validate_record() to
    obtain a report of violations.

    Args:
        channels (Iterable[int]): Channel identity of each tag (0=A, 1=B, 2=C).
        timestamps (Iterable[int]): Timestamp of each tag in picoseconds.
        duration (int): Total acquisition span in picoseconds.
        meta (Mapping[str, str], optional): Acquisition metadata.

    Raises:
        ValueError: If the arrays differ in length, a channel is not representable or the duration is negative.
    """

    __slots__ = ("_channels", "_timestamps", "_duration", "_meta")

    def __init__(
        self,
        channels: Iterable[int],
        timestamps: Iterable[int],
        duration: int,
        meta: Optional[Mapping[str, str]] = None,
    ):
        channels = _frozen(channels, np.int64)
        timestamps = _frozen(timestamps, np.int64)

        if channels.shape != timestamps.shape:
            raise ValueError("The channel and timestamp arrays must have the same length.")

        if channels.size and (channels.min() < 0 or channels.max() > ChannelId.C):
            raise ValueError("Only channels A, B and C are representable.")

        if int(duration) < 0:
            raise ValueError(f"The duration must be non-negative, got {duration}.")

        self._channels = _frozen(channels, np.uint8)
        self._timestamps = timestamps
        self._duration = int(duration)
        self._meta = MappingProxyType({str(k): str(v) for k, v in (meta or {}).items()})

    @classmethod
    def from_arrays(
        cls,
        channels: Iterable[int],
        timestamps: Iterable[int],
        duration: int,
        meta: Optional[Mapping[str, str]] = None,
        sort: bool = True,
    ) -> "TagRecord":
        """
        Builds a record from parallel arrays, sorting by (timestamp, channel) if requested.
        """
        channels = np.asarray(channels, dtype=np.int64).reshape(-1)
        timestamps = np.asarray(timestamps, dtype=np.int64).reshape(-1)

        if sort and timestamps.size:
            # Primary key is the last one given to lexsort
            order = np.lexsort((channels, timestamps))
            channels, timestamps = channels[order], timestamps[order]

        return cls(channels, timestamps, duration, meta)

    @classmethod
    def from_tags(
        cls,
        tags: Iterable[TimeTag],
        duration: int,
        meta: Optional[Mapping[str, str]] = None,
        sort: bool = False,
    ) -> "TagRecord":
        """
        Builds a record from TimeTag objects, keeping their order unless sort is True.
        """
        tags = list(tags)
        channels = [int(tag.channel) for tag in tags]
        timestamps = [tag.timestamp for tag in tags]
        return cls.from_arrays(channels, timestamps, duration, meta, sort=sort)

    @classmethod
    def empty(cls, duration: int, meta: Optional[Mapping[str, str]] = None) -> "TagRecord":
        return cls([], [], duration, meta)

    @property
    def channels(self) -> np.ndarray:
        return self._channels

    @property
    def timestamps(self) -> np.ndarray:
        return self._timestamps

    @property
    def duration(self) -> int:
        return self._duration

    @property
    def meta(self) -> Mapping[str, str]:
        return self._meta

    def __len__(self) -> int:
        return int(self._timestamps.size)

    def __getitem__(self, index):
        if isinstance(index, slice):
            return [self[i] for i in range(*index.indices(len(self)))]
        return TimeTag(ChannelId(int(self._channels[index])), int(self._timestamps[index]))

    def __iter__(self) -> Iterator[TimeTag]:
        for channel, timestamp in zip(self._channels.tolist(), self._timestamps.tolist()):
            yield TimeTag(ChannelId(channel), timestamp)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TagRecord):
            return NotImplemented
        return self.same_tags(other) and dict(self._meta) == dict(other._meta)

    __hash__ = None

    def __repr__(self) -> str:
        return f"TagRecord(n_tags={len(self)}, duration={self._duration}, meta={dict(self._meta)})"

    def same_tags(self, other: "TagRecord") -> bool:
        """
        Compares tags and duration, ignoring metadata.
        """
        return (
            self._duration == other._duration
            and np.array_equal(self._channels, other._channels)
            and np.array_equal(self._timestamps, other._timestamps)
        )

    def channel_timestamps(self, channel: ChannelId) -> np.ndarray:
        """
        Returns the timestamps recorded on one channel, in record order.
        """
        return self._timestamps[self._channels == int(channel)]

    def channel_counts(self) -> dict:
        """
        Returns the number of tags per channel.
        """
        counts = np.bincount(self._channels, minlength=len(ChannelId))
        return {channel: int(counts[channel]) for channel in ChannelId}

    def with_meta(self, **items) -> "TagRecord":
        """
        Returns a copy of the record with updated metadata.
        """
        meta = dict(self._meta)
        meta.update({key: str(value) for key, value in items.items()})
        return TagRecord(self._channels, self._timestamps, self._duration, meta)


def validate_record(record: TagRecord) -> list[str]:
    """
    Checks the invariants of a record.

    Args:
        record (TagRecord): The record to check.

    Returns:
        list[str]: One message per violation, ordered by tag index. Empty if the record is valid.
    """

    timestamps = record.timestamps.astype(np.int64)
    channels = record.channels.astype(np.int64)

    violations = []

    for index in np.flatnonzero(timestamps < 0):
        violations.append((int(index), f"negative timestamp at index {index}"))

    for index in np.flatnonzero(timestamps >= record.duration):
        violations.append((int(index), f"tag beyond duration at index {index}"))

    # Sorted by timestamp, ties broken by channel order
    if timestamps.size > 1:
        earlier = timestamps[1:] < timestamps[:-1]
        tie_misordered = (timestamps[1:] == timestamps[:-1]) & (channels[1:] < channels[:-1])
        for index in np.flatnonzero(earlier | tie_misordered) + 1:
            violations.append((int(index), f"unsorted at index {index}"))

    violations.sort(key=lambda item: item[0])

    return [message for _, message in violations]


@dataclass(frozen=True)
class BinCounts:
    """
    Per-channel counts for one time bin.

    Args:
        c_a (int): Counts on detector A.
        c_b (int): Counts on detector B.
        c_c (int): Counts on the herald detector C.
        bin_index (int): Position of the bin in the sequence that produced it.
        tau (int): Bin width in picoseconds.
    """

    c_a: int
    c_b: int
    c_c: int
    bin_index: int = 0
    tau: int = 1

    def __post_init__(self):
        for name in ("c_a", "c_b", "c_c", "bin_index", "tau"):
            object.__setattr__(self, name, int(getattr(self, name)))

        if min(self.c_a, self.c_b, self.c_c) < 0:
            raise ValueError("Bin counts must be non-negative.")

        if self.tau <= 0:
            raise ValueError(f"The bin width must be positive, got {self.tau}.")

    @property
    def signal(self) -> int:
        return self.c_a + self.c_b

    @property
    def total(self) -> int:
        return self.c_a + self.c_b + self.c_c


class BinSeries(Sequence):
    """
    An immutable, array-backed sequence of BinCounts.

    Args:
        c_a, c_b, c_c (Iterable[int]): Counts per bin for each channel.
        bin_index (Iterable[int]): Index of each bin.
        tau (Iterable[int] | int): Width of each bin in picoseconds (a scalar applies to every bin).
    """

    __slots__ = ("c_a", "c_b", "c_c", "bin_index", "tau")

    def __init__(self, c_a, c_b, c_c, bin_index, tau):
        c_a = _frozen(c_a, np.int64)
        n = c_a.size
        tau = np.broadcast_to(np.asarray(tau, dtype=np.int64), (n,)) if np.ndim(tau) == 0 else tau

        self.c_a = c_a
        self.c_b = _frozen(c_b, np.int64)
        self.c_c = _frozen(c_c, np.int64)
        self.bin_index = _frozen(bin_index, np.int64)
        self.tau = _frozen(tau, np.int64)

        if not all(array.size == n for array in (self.c_b, self.c_c, self.bin_index, self.tau)):
            raise ValueError("All bin arrays must have the same length.")

        if n and min(self.c_a.min(), self.c_b.min(), self.c_c.min()) < 0:
            raise ValueError("Bin counts must be non-negative.")

        if n and self.tau.min() <= 0:
            raise ValueError("Bin widths must be positive.")

    @classmethod
    def from_bins(cls, bins: Iterable[BinCounts]) -> "BinSeries":
        """
        Converts any iterable of BinCounts into a BinSeries (returned as is if it already is one).
        """
        if isinstance(bins, BinSeries):
            return bins

        bins = list(bins)
        return cls(
            [b.c_a for b in bins],
            [b.c_b for b in bins],
            [b.c_c for b in bins],
            [b.bin_index for b in bins],
            np.array([b.tau for b in bins], dtype=np.int64),
        )

    def __len__(self) -> int:
        return int(self.c_a.size)

    def __getitem__(self, index):
        if isinstance(index, slice):
            return BinSeries(
                self.c_a[index], self.c_b[index], self.c_c[index], self.bin_index[index], self.tau[index]
            )
        return BinCounts(
            int(self.c_a[index]),
            int(self.c_b[index]),
            int(self.c_c[index]),
            int(self.bin_index[index]),
            int(self.tau[index]),
        )

    def __repr__(self) -> str:
        return f"BinSeries(n_bins={len(self)})"

    def common_tau(self) -> int:
        """
        Returns the bin width shared by every bin.

        Raises:
            ValueError: If the series is empty or mixes bin widths.
        """
        if not len(self):
            raise ValueError("The bin sequence is empty.")

        if np.any(self.tau != self.tau[0]):
            raise ValueError(f"Mixed tau values: {sorted(set(self.tau.tolist()))}.")

        return int(self.tau[0])

    def to_frame(self) -> pd.DataFrame:
        """
        Returns the bins as a DataFrame with the bin dump columns.
        """
        return pd.DataFrame(
            {
                "bin_index": self.bin_index,
                "tau_ps": self.tau,
                "c_a": self.c_a,
                "c_b": self.c_b,
                "c_c": self.c_c,
            },
            columns=BIN_COLUMNS,
        )


@dataclass(frozen=True)
class G2Estimate:
    """
    A bin-averaged correlation estimate.

    Args:
        value (float | None): Mean of the per-bin terms, or None when no bin contributed (undefined).
        n_w (int): Number of contributing bins.
        n_total (int): Number of bins examined.
        per_bin_terms (np.ndarray, optional): Terms of the contributing bins.
        std_dev (float, optional): Sample standard deviation of the terms (n - 1 form).
    """

    value: Optional[float]
    n_w: int
    n_total: int
    per_bin_terms: Optional[np.ndarray] = field(default=None, compare=False, repr=False)
    std_dev: Optional[float] = None

    def __post_init__(self):

        if self.n_total < 1:
            raise ValueError("An estimate needs at least one examined bin.")

        if not 0 <= self.n_w <= self.n_total:
            raise ValueError(f"n_w must lie in [0, n_total], got n_w={self.n_w}, n_total={self.n_total}.")

        if self.n_w == 0 and self.value is not None:
            raise ValueError("An estimate without contributing bins is undefined and cannot carry a value.")

        if self.n_w > 0 and (self.value is None or self.value < 0):
            raise ValueError("A defined estimate needs a non-negative value.")

        if self.std_dev is not None and self.std_dev < 0:
            raise ValueError("The standard deviation must be non-negative.")

        if self.per_bin_terms is not None:
            terms = _frozen(self.per_bin_terms, np.float64)
            if terms.size != self.n_w:
                raise ValueError("There must be one per-bin term per contributing bin.")
            if terms.size and not np.isclose(terms.mean(), self.value, rtol=1e-12, atol=0.0):
                raise ValueError("The value must be the mean of the per-bin terms.")
            object.__setattr__(self, "per_bin_terms", terms)

    @classmethod
    def undefined(cls, n_total: int) -> "G2Estimate":
        return cls(value=None, n_w=0, n_total=n_total)

    @property
    def is_defined(self) -> bool:
        return self.n_w > 0

    @property
    def standard_error(self) -> Optional[float]:
        if self.std_dev is None:
            return None
        return self.std_dev / np.sqrt(self.n_w)


@dataclass(frozen=True)
class BinCensus:
    """
    Classification of bins into no-photon, single-photon and multi-photon bins.

    The fractions are exact rationals computed from the integer tallies, so they always sum to one.

    Args:
        n_no (int): Number of no-photon bins.
        n_single (int): Number of single-photon bins.
        n_multi (int): Number of multi-photon bins.
        tau (int): Bin width in picoseconds.
        mode (CensusMode): Unheralded or heralded classification.
    """

    n_no: int
    n_single: int
    n_multi: int
    tau: int
    mode: CensusMode

    def __post_init__(self):
        object.__setattr__(self, "mode", CensusMode(self.mode))

        if min(self.n_no, self.n_single, self.n_multi) < 0:
            raise ValueError("Census tallies must be non-negative.")

        if self.n_total == 0:
            raise ValueError("A census needs at least one bin.")

    @property
    def n_total(self) -> int:
        return self.n_no + self.n_single + self.n_multi

    @property
    def no_photon(self) -> Fraction:
        return Fraction(self.n_no, self.n_total)

    @property
    def single_photon(self) -> Fraction:
        return Fraction(self.n_single, self.n_total)

    @property
    def multi_photon(self) -> Fraction:
        return Fraction(self.n_multi, self.n_total)
