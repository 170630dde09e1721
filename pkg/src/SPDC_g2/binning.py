from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import RecordRangeError
from .timetag_model import BinSeries, ChannelId, TagRecord


class BinningKind(str, Enum):
    CONSECUTIVE = "consecutive"
    ANCHORED = "anchored"


class Direction(str, Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


def window_counts(record: TagRecord, starts: np.ndarray, widths) -> tuple:
    """
    Counts the tags of each channel in the windows [start, start + width).

    Args:
        record (TagRecord): A sorted record.
        starts (np.ndarray): Window start times in picoseconds.
        widths (np.ndarray | int): Window widths in picoseconds.

    Returns:
        tuple[np.ndarray, np.ndarray, np.ndarray]: Counts on A, B and C for every window.
    """

    starts = np.asarray(starts, dtype=np.int64)
    ends = starts + np.asarray(widths, dtype=np.int64)

    counts = []
    for channel in ChannelId:
        times = record.channel_timestamps(channel)
        counts.append(np.searchsorted(times, ends, side="left") - np.searchsorted(times, starts, side="left"))

    return tuple(counts)


def _check_tau(tau: int) -> int:
    if int(tau) < 1:
        raise ValueError(f"The bin width must be at least 1 ps, got {tau}.")
    return int(tau)


def bin_consecutive(record: TagRecord, tau: int, n_bins: int, offset: int = 0) -> BinSeries:
    """
    Tallies consecutive disjoint bins; bin k covers [offset + k * tau, offset + (k + 1) * tau).

    Args:
        record (TagRecord): A sorted record.
        tau (int): Bin width in picoseconds.
        n_bins (int): Number of bins.
        offset (int, optional): Start of the first bin. Defaults to 0.

    Returns:
        BinSeries: Exactly n_bins bins.

    Raises:
        RecordRangeError: If the bins extend beyond the record.
    """

    tau = _check_tau(tau)

    if n_bins < 0 or offset < 0:
        raise ValueError("The number of bins and the offset must be non-negative.")

    if offset + n_bins * tau > record.duration:
        raise RecordRangeError(
            f"{n_bins} bins of {tau} ps from offset {offset} exceed the record duration of {record.duration} ps."
        )

    starts = offset + tau * np.arange(n_bins, dtype=np.int64)
    c_a, c_b, c_c = window_counts(record, starts, tau)

    return BinSeries(c_a, c_b, c_c, np.arange(n_bins), tau)


def bin_anchored(
    record: TagRecord,
    anchor: int,
    tau: int,
    n_steps: int,
    direction: Direction = Direction.FORWARD,
) -> BinSeries:
    """
    Tallies windows grown from a fixed point: step k (1..n_steps) covers [anchor, anchor + k * tau)
    forward or [anchor - k * tau, anchor) backward. The counts are cumulative in k.

    Args:
        record (TagRecord): A sorted record.
        anchor (int): The fixed point in picoseconds.
        tau (int): Growth step in picoseconds.
        n_steps (int): Number of nested windows.
        direction (Direction, optional): Growth direction. Defaults to forward.

    Returns:
        BinSeries: One entry per step, with bin_index k and tau k * tau.

    Raises:
        RecordRangeError: If the largest window leaves [0, duration].
    """

    tau = _check_tau(tau)
    direction = Direction(direction)
    widths = tau * np.arange(1, n_steps + 1, dtype=np.int64)

    if direction is Direction.FORWARD:
        starts = np.full(n_steps, anchor, dtype=np.int64)
        outside = anchor < 0 or anchor + n_steps * tau > record.duration
    else:
        starts = anchor - widths
        outside = anchor > record.duration or anchor - n_steps * tau < 0

    if outside:
        raise RecordRangeError(
            f"{n_steps} steps of {tau} ps {direction.value} from {anchor} ps leave the record [0, {record.duration}]."
        )

    c_a, c_b, c_c = window_counts(record, starts, widths)

    return BinSeries(c_a, c_b, c_c, np.arange(1, n_steps + 1), widths)


def random_offsets(span: int, width: int, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    """
    Draws n_samples non-overlapping windows of a given width inside [0, span).

    The free length span - n_samples * width is split by sorted uniform draws, so every
    arrangement of disjoint windows is reachable and no rejection is needed.

    Returns:
        np.ndarray: Sorted window start times.
    """
    slack = span - n_samples * width
    gaps = np.sort(rng.integers(0, slack + 1, size=n_samples, dtype=np.int64))
    return gaps + width * np.arange(n_samples, dtype=np.int64)


def sample_bins(record: TagRecord, tau: int, n_samples: int, seed: int) -> BinSeries:
    """
    Tallies n_samples disjoint bins placed at random non-overlapping offsets.

    Args:
        record (TagRecord): A sorted record.
        tau (int): Bin width in picoseconds.
        n_samples (int): Number of bins.
        seed (int | np.random.SeedSequence): Seed of the placement.

    Returns:
        BinSeries: The sampled bins in time order.

    Raises:
        RecordRangeError: If the record is too short for n_samples disjoint bins.
    """

    tau = _check_tau(tau)

    if n_samples < 0:
        raise ValueError(f"The number of samples must be non-negative, got {n_samples}.")

    if n_samples * tau > record.duration:
        raise RecordRangeError(
            f"{n_samples} disjoint bins of {tau} ps do not fit in a record of {record.duration} ps."
        )

    starts = random_offsets(record.duration, tau, n_samples, np.random.default_rng(seed))
    c_a, c_b, c_c = window_counts(record, starts, tau)

    return BinSeries(c_a, c_b, c_c, np.arange(n_samples), tau)


def sample_anchors(record: TagRecord, reach: int, n_samples: int, seed: int) -> np.ndarray:
    """
    Draws fixed points for bidirectional sweeps, far enough from both ends of the record
    for windows of length reach to be grown in either direction.

    Returns:
        np.ndarray: Sorted anchor times in picoseconds.
    """

    if reach < 0 or 2 * reach > record.duration:
        raise RecordRangeError(f"Windows of {reach} ps on both sides of an anchor do not fit in the record.")

    rng = np.random.default_rng(seed)
    return np.sort(rng.integers(reach, record.duration - reach + 1, size=n_samples, dtype=np.int64))


@dataclass(frozen=True)
class BinningScheme:
    """
    Description of how a record is cut into bins.

    Args:
        kind (BinningKind): Consecutive disjoint bins or windows anchored at a fixed point.
        tau (int): Bin width (or growth step) in picoseconds.
        n_bins (int): Number of bins (consecutive) or nested widths (anchored).
        anchor (int, optional): Fixed point, used iff anchored.
        direction (Direction, optional): Growth direction, used iff anchored.
    """

    kind: BinningKind
    tau: int
    n_bins: int
    anchor: int = 0
    direction: Direction = Direction.FORWARD

    def __post_init__(self):
        object.__setattr__(self, "kind", BinningKind(self.kind))
        object.__setattr__(self, "direction", Direction(self.direction))
        _check_tau(self.tau)
        if self.n_bins < 1:
            raise ValueError(f"The number of bins must be positive, got {self.n_bins}.")

    def validate(self, record: TagRecord) -> None:
        if self.kind is BinningKind.ANCHORED and not 0 <= self.anchor <= record.duration:
            raise RecordRangeError(f"The anchor {self.anchor} ps lies outside the record [0, {record.duration}].")


def bin_record(record: TagRecord, scheme: BinningScheme, offset: int = 0) -> BinSeries:
    """
    Bins a record according to a scheme.
    """
    scheme.validate(record)
    if scheme.kind is BinningKind.CONSECUTIVE:
        return bin_consecutive(record, scheme.tau, scheme.n_bins, offset)
    return bin_anchored(record, scheme.anchor, scheme.tau, scheme.n_bins, scheme.direction)
