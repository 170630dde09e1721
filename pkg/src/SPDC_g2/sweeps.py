import logging
from concurrent.futures import ProcessPoolExecutor, as_completed
from enum import Enum
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd

from .binning import bin_consecutive, sample_anchors, sample_bins, window_counts
from .errors import ConfigError, RecordRangeError
from .estimator import EstimatorKind
from .g2_estimators import g2_binned
from .simulator import simulate
from .source_config import SourceConfig
from .timetag_model import BinSeries, TagRecord

logger = logging.getLogger(__name__)

POWER_COLUMNS = ["pair_rate", "tau_ps", "min_g2_mean", "min_g2_std", "n_defined"]

# Spawn-key prefixes that keep the seeds of different sweep types apart
TAU_SWEEP_KEY = 101
POWER_SWEEP_KEY = 102


class SamplingScheme(str, Enum):
    SAMPLED = "sampled"
    CONSECUTIVE = "consecutive"


def cell_seed(seed: int, *cell: int) -> np.random.SeedSequence:
    """
    Derives the seed of one sweep cell from the master seed and the cell index.
    """
    return np.random.SeedSequence(seed, spawn_key=tuple(int(index) for index in cell))


def derived_seed(seed: int, *cell: int) -> int:
    """
    Derives an integer record seed (for SourceConfig.seed) from the master seed and a cell index.
    """
    return int(cell_seed(seed, *cell).generate_state(1, np.uint64)[0])


def sweep_tau(
    record: TagRecord,
    taus: Sequence[int],
    n_samples: int,
    kind: Union[EstimatorKind, str],
    seed: int = 0,
    scheme: Union[SamplingScheme, str] = SamplingScheme.SAMPLED,
    strict_herald: bool = False,
) -> dict:
    """
    Computes the fixed-bin estimate at several bin widths.

    Args:
        record (TagRecord): A sorted record.
        taus (Sequence[int]): Bin widths in picoseconds.
        n_samples (int): Number of bins per width.
        kind (EstimatorKind | str): unheralded_binned or heralded_binned.
        seed (int, optional): Master seed of the bin placement. Defaults to 0.
        scheme (SamplingScheme | str, optional): Random disjoint bins or consecutive bins from the start. Defaults to sampled.
        strict_herald (bool, optional): Strict contributing-bin rule for heralded estimates. Defaults to False.

    Returns:
        dict[int, G2Estimate]: One estimate per width, in the order given.

    Raises:
        ConfigError: If a width appears more than once.
    """

    scheme = SamplingScheme(scheme)

    widths = [int(tau) for tau in taus]
    repeated = sorted({tau for tau in widths if widths.count(tau) > 1})
    if repeated:
        raise ConfigError(f"Bin widths must be distinct, got repeated widths {repeated}.")

    table = {}

    for index, tau in enumerate(taus):

        if scheme is SamplingScheme.SAMPLED:
            bins = sample_bins(record, tau, n_samples, cell_seed(seed, TAU_SWEEP_KEY, index))
        else:
            bins = bin_consecutive(record, tau, n_samples)

        table[int(tau)] = g2_binned(bins, kind, strict_herald)

    return table


def sweep_bidirectional(
    record: TagRecord,
    tau: int,
    n_steps: int,
    n_samples: int,
    kind: Union[EstimatorKind, str],
    seed: int = 0,
    strict_herald: bool = False,
) -> dict:
    """
    Grows windows in both directions from n_samples random fixed points.

    Step k averages over the windows [anchor, anchor + k * tau) of every anchor (reported
    at +k * tau) and over [anchor - k * tau, anchor) (reported at -k * tau).

    Args:
        record (TagRecord): A sorted record.
        tau (int): Growth step in picoseconds.
        n_steps (int): Number of steps in each direction.
        n_samples (int): Number of fixed points.
        kind (EstimatorKind | str): unheralded_binned or heralded_binned.
        seed (int, optional): Seed of the fixed points. Defaults to 0.
        strict_herald (bool, optional): Strict contributing-bin rule for heralded estimates. Defaults to False.

    Returns:
        dict[int, G2Estimate]: Estimates keyed by signed width, from -n_steps * tau to +n_steps * tau.
    """

    anchors = sample_anchors(record, n_steps * tau, n_samples, cell_seed(seed, TAU_SWEEP_KEY))

    backward, forward = {}, {}

    for k in range(1, n_steps + 1):
        width = k * tau
        for table, starts in ((forward, anchors), (backward, anchors - width)):
            c_a, c_b, c_c = window_counts(record, starts, width)
            bins = BinSeries(c_a, c_b, c_c, np.arange(n_samples), width)
            table[width] = g2_binned(bins, kind, strict_herald)

    table = {-width: backward[width] for width in sorted(backward, reverse=True)}
    table.update(forward)

    return table


def minimum_g2(
    record: TagRecord,
    tau: int,
    n_samples: int,
    sweep_steps: int,
    kind: Union[EstimatorKind, str],
    strict_herald: bool,
    seed: np.random.SeedSequence,
) -> float:
    """
    Returns the smallest defined estimate over the widths tau, 2 tau, ..., sweep_steps * tau
    (NaN when none is defined).
    """

    values = []

    for step, seed_k in enumerate(seed.spawn(sweep_steps), start=1):
        estimate = g2_binned(sample_bins(record, step * tau, n_samples, seed_k), kind, strict_herald)
        if estimate.is_defined:
            values.append(estimate.value)

    return min(values) if values else np.nan


def _power_cell(task: tuple) -> np.ndarray:
    """
    Simulates one record and returns its minimum estimate for every width.
    """

    config, taus, n_samples, sweep_steps, kind, strict_herald, seed = task
    record = simulate(config)

    return np.array(
        [
            minimum_g2(record, tau, n_samples, sweep_steps, kind, strict_herald, seed_t)
            for tau, seed_t in zip(taus, seed.spawn(len(taus)))
        ]
    )


def sweep_power(
    configs: Sequence[SourceConfig],
    taus: Sequence[int],
    n_samples: int,
    n_repeats: int,
    kind: Union[EstimatorKind, str],
    seed: int = 0,
    sweep_steps: int = 1,
    strict_herald: bool = False,
    max_workers: Optional[int] = 1,
) -> pd.DataFrame:
    """
    Minimum fixed-bin estimate versus source rate, with its dispersion over independent records.

    Each (configuration, repeat) cell simulates its own record, samples n_samples bins at each
    width tau * k (k = 1..sweep_steps) and keeps the smallest defined estimate. The mean and
    sample standard deviation are taken over the repeats whose minimum is defined.

    Args:
        configs (Sequence[SourceConfig]): Source configurations (one per rate).
        taus (Sequence[int]): Smallest bin width of each sweep, in picoseconds.
        n_samples (int): Bins sampled per estimate.
        n_repeats (int): Independent records per configuration.
        kind (EstimatorKind | str): unheralded_binned or heralded_binned.
        seed (int, optional): Master seed; the configuration seeds are replaced per cell. Defaults to 0.
        sweep_steps (int, optional): Number of widths per sweep. Defaults to 1.
        strict_herald (bool, optional): Strict contributing-bin rule for heralded estimates. Defaults to False.
        max_workers (int, optional): Worker processes; 1 runs in the calling process, None uses all cores. Defaults to 1.

    Returns:
        pd.DataFrame: Columns pair_rate, tau_ps, min_g2_mean, min_g2_std, n_defined (NaN where undefined).

    Raises:
        RecordRangeError: If a configuration is too short for the requested sampling.
    """

    configs, taus = list(configs), [int(tau) for tau in taus]

    for config in configs:
        if taus and n_samples * max(taus) * sweep_steps > config.duration:
            raise RecordRangeError(
                f"{n_samples} bins of up to {max(taus) * sweep_steps} ps do not fit in {config.duration} ps."
            )

    # One task per (configuration, repeat), each with its own record and bin seeds
    tasks, keys = [], []
    for i, config in enumerate(configs):
        for repeat in range(n_repeats):
            cell = cell_seed(seed, POWER_SWEEP_KEY, i, repeat)
            record_seed = derived_seed(seed, POWER_SWEEP_KEY, i, repeat)
            tasks.append((config.replace(seed=record_seed), taus, n_samples, sweep_steps, kind, strict_herald, cell))
            keys.append((i, repeat))

    # Pre-fill with NaNs to mark failed cells clearly
    results = np.full((len(configs), n_repeats, len(taus)), np.nan)

    if max_workers == 1:
        for (i, repeat), task in zip(keys, tasks):
            results[i, repeat] = _power_cell(task)
    else:
        with ProcessPoolExecutor(max_workers=max_workers) as executor:

            # Submit all cells to the executor
            future_to_key = {executor.submit(_power_cell, task): key for key, task in zip(keys, tasks)}

            # Collect results as they are completed
            for future in as_completed(future_to_key):
                i, repeat = future_to_key[future]
                try:
                    result = future.result()
                except Exception as e:
                    logger.error(f"Cell (config {i}, repeat {repeat}) generated an exception: {e}")
                else:
                    results[i, repeat] = result

    rows = []
    for i, config in enumerate(configs):
        for j, tau in enumerate(taus):
            minima = results[i, :, j]
            defined = minima[~np.isnan(minima)]
            rows.append(
                {
                    "pair_rate": config.pair_rate,
                    "tau_ps": tau,
                    "min_g2_mean": float(defined.mean()) if defined.size else np.nan,
                    "min_g2_std": float(defined.std(ddof=1)) if defined.size >= 2 else np.nan,
                    "n_defined": int(defined.size),
                }
            )
        logger.info(f"Finished {n_repeats} repeats at pair rate {config.pair_rate:.3e}/s")

    return pd.DataFrame(rows, columns=POWER_COLUMNS)
