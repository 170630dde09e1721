import logging
from typing import Optional

import numpy as np

from .errors import ConfigError
from .source_config import PS_PER_S, SourceConfig
from .timetag_model import ChannelId, TagRecord

logger = logging.getLogger(__name__)

# Spawn keys of the independent random streams derived from one seed
STREAMS = {"pairs": 0, "routing": 1, "jitter": 2, "dark": 3, "control": 4}


def stream_generator(seed: int, stream: str) -> np.random.Generator:
    """
    Returns the generator of one named random stream of a seed.

    Args:
        seed (int): The master seed.
        stream (str): One of the keys of STREAMS.

    Returns:
        np.random.Generator: An independent generator.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(STREAMS[stream],)))


def poisson_times(rate: float, duration: int, rng: np.random.Generator) -> np.ndarray:
    """
    Draws the event times of a homogeneous Poisson process on the picosecond grid.

    Integer draws that coincide are merged, so the output is strictly increasing.

    Args:
        rate (float): Events per second.
        duration (int): Span in picoseconds; events lie in [0, duration).
        rng (np.random.Generator): The random generator.

    Returns:
        np.ndarray: Sorted int64 timestamps.
    """

    if duration <= 0 or rate <= 0:
        return np.empty(0, dtype=np.int64)

    # Given the count, Poisson event times are independent and uniform over the span
    count = rng.poisson(rate * duration / PS_PER_S)
    times = rng.integers(0, duration, size=count, dtype=np.int64)

    return np.unique(times)


def _check_config(config) -> SourceConfig:
    if not isinstance(config, SourceConfig):
        raise ConfigError(f"Expected a SourceConfig, got {type(config).__name__}.")
    return config


def generate_pairs(config: SourceConfig, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """
    Generates pair emission times.

    Args:
        config (SourceConfig): Supplies pair_rate, duration and seed.
        rng (np.random.Generator, optional): Generator to draw from. Defaults to the 'pairs' stream of config.seed.

    Returns:
        np.ndarray: Strictly increasing int64 timestamps in [0, duration).
    """
    config = _check_config(config)
    rng = rng if rng is not None else stream_generator(config.seed, "pairs")
    return poisson_times(config.pair_rate, config.duration, rng)


def route_and_detect(
    pairs: np.ndarray,
    config: SourceConfig,
    rng: Optional[np.random.Generator] = None,
) -> TagRecord:
    """
    Routes every pair to the detectors and adds jitter and dark counts (no dead time yet).

    Args:
        pairs (np.ndarray): Sorted pair emission times in picoseconds.
        config (SourceConfig): Efficiencies, jitter, pair delay, dark rates and duration.
        rng (np.random.Generator, optional): Generator to draw from. Defaults to streams derived from config.seed.

    Returns:
        TagRecord: The sorted detection record.

    Raises:
        ConfigError: If the configuration is not a SourceConfig.
        ValueError: If the pair times are not sorted.
    """

    config = _check_config(config)
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1)

    if pairs.size > 1 and np.any(np.diff(pairs) < 0):
        raise ValueError("The pair emission times must be sorted.")

    routing_rng = rng if rng is not None else stream_generator(config.seed, "routing")
    jitter_rng = rng if rng is not None else stream_generator(config.seed, "jitter")
    dark_rng = rng if rng is not None else stream_generator(config.seed, "dark")

    # Signal photon: A with probability eta_a, B with probability eta_b, lost otherwise
    u = routing_rng.random(pairs.size)
    to_a = u < config.eta_a
    to_b = (u >= config.eta_a) & (u < config.eta_a + config.eta_b)

    # Idler photon, independently of the signal
    heralded = routing_rng.random(pairs.size) < config.eta_c

    photon_times = {
        ChannelId.A: pairs[to_a],
        ChannelId.B: pairs[to_b],
        ChannelId.C: pairs[heralded] + config.pair_delay,
    }

    dark_rates = {
        ChannelId.A: config.dark_rate_a,
        ChannelId.B: config.dark_rate_b,
        ChannelId.C: config.dark_rate_c,
    }

    channels, timestamps = [], []

    for channel in ChannelId:

        times = photon_times[channel]

        if config.jitter_sigma > 0 and times.size:
            times = np.rint(times + jitter_rng.normal(0.0, config.jitter_sigma, times.size)).astype(np.int64)

        if times.size:
            times = np.clip(times, 0, config.duration - 1)

        times = np.concatenate([times, poisson_times(dark_rates[channel], config.duration, dark_rng)])

        channels.append(np.full(times.size, int(channel), dtype=np.int64))
        timestamps.append(times)

    return TagRecord.from_arrays(
        np.concatenate(channels),
        np.concatenate(timestamps),
        config.duration,
        {"creation_mode": "simulated", "config_hash": config.config_hash(), "seed": config.seed},
        sort=True,
    )


def _non_paralyzable_mask(times: list, dead_time: int) -> np.ndarray:
    """
    Marks the tags of one channel that survive a non-paralyzable dead time.

    Tags whose predecessor is at least dead_time away are always kept, so only the others
    are resolved sequentially against the last kept tag.
    """

    keep = np.ones(len(times), dtype=bool)
    anchor = None

    for i in (np.flatnonzero(np.diff(times) < dead_time) + 1).tolist():
        if keep[i - 1]:
            anchor = times[i - 1]
        keep[i] = times[i] - anchor >= dead_time

    return keep


def apply_dead_time(record: TagRecord, dead_time: int) -> TagRecord:
    """
    Applies a non-paralyzable dead time to every channel independently.

    A tag is discarded when it falls less than dead_time after the last kept tag of its
    channel. The output is a subsequence of the input.

    Args:
        record (TagRecord): A valid (sorted) record.
        dead_time (int): Dead time in picoseconds.

    Returns:
        TagRecord: The thinned record.

    Raises:
        ValueError: If the dead time is negative.
    """

    if dead_time < 0:
        raise ValueError(f"The dead time must be non-negative, got {dead_time}.")

    if dead_time == 0 or len(record) == 0:
        return record

    keep = np.zeros(len(record), dtype=bool)

    for channel in ChannelId:
        indices = np.flatnonzero(record.channels == int(channel))
        if indices.size:
            keep[indices] = _non_paralyzable_mask(record.timestamps[indices].tolist(), int(dead_time))

    logger.debug(f"Dead time of {dead_time} ps removed {int((~keep).sum())} of {len(record)} tags")

    return TagRecord(record.channels[keep], record.timestamps[keep], record.duration, record.meta)


def simulate(config: SourceConfig) -> TagRecord:
    """
    Simulates a complete acquisition: pair generation, routing and detection, then dead time.

    Args:
        config (SourceConfig): The source configuration.

    Returns:
        TagRecord: The simulated record. Its metadata holds the configuration hash and the seed.
    """

    config = _check_config(config)

    pairs = generate_pairs(config)
    record = apply_dead_time(route_and_detect(pairs, config), config.dead_time)

    counts = record.channel_counts()
    logger.info(
        f"Simulated {pairs.size} pairs over {config.duration_s:.3e} s: "
        f"A={counts[ChannelId.A]}, B={counts[ChannelId.B]}, C={counts[ChannelId.C]}"
    )

    return record


def generate_coherent_control(
    rate_a: float,
    rate_b: float,
    rate_c: float,
    duration: int,
    seed: int,
) -> TagRecord:
    """
    Generates three mutually independent Poisson streams (no pair correlation).

    Args:
        rate_a (float): Rate on A in counts per second.
        rate_b (float): Rate on B in counts per second.
        rate_c (float): Rate on C in counts per second.
        duration (int): Span in picoseconds.
        seed (int): Seed of the random number generator.

    Returns:
        TagRecord: The sorted control record.

    Raises:
        ConfigError: If a rate or the duration is negative.
    """

    rates = {ChannelId.A: rate_a, ChannelId.B: rate_b, ChannelId.C: rate_c}

    for channel, rate in rates.items():
        if not rate >= 0:
            raise ConfigError(f"The rate of channel {channel.name} must be non-negative, got {rate}.")

    if duration < 0:
        raise ConfigError(f"The duration must be non-negative, got {duration}.")

    rng = stream_generator(seed, "control")
    times = {channel: poisson_times(rate, duration, rng) for channel, rate in rates.items()}

    return TagRecord.from_arrays(
        np.concatenate([np.full(t.size, int(channel), dtype=np.int64) for channel, t in times.items()]),
        np.concatenate(list(times.values())),
        duration,
        {"creation_mode": "simulated", "source": "coherent_control", "seed": seed},
        sort=True,
    )
