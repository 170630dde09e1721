import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import pandas as pd

from .binning import bin_consecutive
from .estimator import EstimatorKind
from .g2_estimators import BINNED_KINDS, census, census_to_frame, estimates_to_frame
from .simulator import simulate
from .source_config import (
    PUMP_POWER_ANCHORS,
    SourceConfig,
    pair_rate_for_count_rate,
    pair_rate_for_pump_power,
)
from .sweeps import derived_seed, sweep_bidirectional, sweep_power, sweep_tau
from .timetag_model import CensusMode

logger = logging.getLogger(__name__)

NS = 1_000
MS = 1_000_000_000

# Single-mode fiber: 1.5 Mcps recorded on A+B at 30 mW. eta_c backs out the 4x single-photon bin ratio.
SINGLE_MODE_MCPS = PUMP_POWER_ANCHORS[("single_mode", 30.0)]
SINGLE_MODE_BASE = SourceConfig(eta_a=0.1, eta_b=0.1, eta_c=0.25)

# Multi-mode fiber: higher collection, same detectors
MULTI_MODE_MCPS = tuple(mcps for (fiber, _), mcps in sorted(PUMP_POWER_ANCHORS.items()) if fiber == "multi_mode")
MULTI_MODE_BASE = SourceConfig(eta_a=0.15, eta_b=0.15, eta_c=0.3)


def single_mode_config(duration: int, seed: int, mcps: float = SINGLE_MODE_MCPS) -> SourceConfig:
    """
    Single-mode source tuned to a recorded A+B rate in Mcps.
    """
    return SINGLE_MODE_BASE.replace(
        pair_rate=pair_rate_for_count_rate(mcps, SINGLE_MODE_BASE), duration=duration, seed=seed
    )


def multi_mode_config(mcps: float, duration: int, seed: int) -> SourceConfig:
    """
    Multi-mode source tuned to a recorded A+B rate in Mcps.
    """
    return MULTI_MODE_BASE.replace(
        pair_rate=pair_rate_for_count_rate(mcps, MULTI_MODE_BASE), duration=duration, seed=seed
    )


@dataclass
class PipelineResult:
    """
    Tables produced by a protocol, keyed by file name, with the parameters that produced them.
    """

    frames: dict
    parameters: dict = field(default_factory=dict)
    config: Optional[SourceConfig] = None


def _with_columns(frame: pd.DataFrame, **columns) -> pd.DataFrame:
    for position, (name, value) in enumerate(columns.items()):
        frame.insert(position, name, value)
    return frame


def run_bidirectional(
    seed: int = 0,
    max_workers: int = 1,
    tau: int = 30 * NS,
    n_steps: int = 10,
    n_samples: int = 200,
    duration: int = 2 * MS,
) -> PipelineResult:
    """
    Correlation versus bin width grown in both directions from fixed points of a 1.5 Mcps record.

    Returns one row per (estimator, signed width).
    """

    config = single_mode_config(duration, seed)
    record = simulate(config)

    frames = []
    for kind in BINNED_KINDS:
        table = sweep_bidirectional(record, tau, n_steps, n_samples, kind, seed)
        frames.append(_with_columns(estimates_to_frame(table), kind=kind.value))

    return PipelineResult(
        frames={"bidirectional.csv": pd.concat(frames, ignore_index=True)},
        parameters={"tau_ps": tau, "n_steps": n_steps, "n_samples": n_samples, "duration_ps": duration},
        config=config,
    )


def run_herald_comparison(
    seed: int = 0,
    max_workers: int = 1,
    powers_mw: tuple = (10.0, 20.0, 30.0),
    taus: tuple = tuple(range(30 * NS, 301 * NS, 30 * NS)),
    n_samples: int = 200,
    duration: int = 2 * MS,
) -> PipelineResult:
    """
    Heralded and unheralded estimates side by side at several single-mode pump powers.
    """

    frames = []
    for i, power in enumerate(powers_mw):

        config = SINGLE_MODE_BASE.replace(
            pair_rate=pair_rate_for_pump_power(power, "single_mode", SINGLE_MODE_BASE),
            duration=duration,
            seed=derived_seed(seed, i),
        )
        record = simulate(config)

        for k, kind in enumerate(BINNED_KINDS):
            table = sweep_tau(record, taus, n_samples, kind, derived_seed(seed, i, k))
            frames.append(
                _with_columns(estimates_to_frame(table), pump_mw=power, pair_rate=config.pair_rate, kind=kind.value)
            )

    return PipelineResult(
        frames={"herald_comparison.csv": pd.concat(frames, ignore_index=True)},
        parameters={
            "powers_mw": ",".join(str(power) for power in powers_mw),
            "taus_ps": ",".join(str(tau) for tau in taus),
            "n_samples": n_samples,
            "duration_ps": duration,
        },
        config=SINGLE_MODE_BASE,
    )


def run_multimode(
    seed: int = 0,
    max_workers: int = 1,
    taus: tuple = tuple(range(30 * NS, 301 * NS, 30 * NS)),
    inset_taus: tuple = tuple(range(10 * NS, 101 * NS, 10 * NS)),
    n_samples: int = 1000,
) -> PipelineResult:
    """
    Unheralded estimates at the multi-mode count rates, on a coarse and a fine width grid.
    """

    duration = 4 * n_samples * max(max(taus), max(inset_taus))
    main, inset = [], []

    for i, mcps in enumerate(MULTI_MODE_MCPS):

        config = multi_mode_config(mcps, duration, derived_seed(seed, i))
        record = simulate(config)

        for grid, rows, key in ((taus, main, 0), (inset_taus, inset, 1)):
            table = sweep_tau(record, grid, n_samples, EstimatorKind.UNHERALDED_BINNED, derived_seed(seed, i, key))
            rows.append(_with_columns(estimates_to_frame(table), count_rate_mcps=mcps, pair_rate=config.pair_rate))

    return PipelineResult(
        frames={
            "multimode.csv": pd.concat(main, ignore_index=True),
            "multimode_inset.csv": pd.concat(inset, ignore_index=True),
        },
        parameters={
            "rates_mcps": ",".join(str(mcps) for mcps in MULTI_MODE_MCPS),
            "n_samples": n_samples,
            "duration_ps": duration,
        },
        config=MULTI_MODE_BASE,
    )


def run_census(
    seed: int = 0,
    max_workers: int = 1,
    taus: tuple = (10 * NS, 30 * NS, 100 * NS, 300 * NS),
    n_bins: int = 100_000,
) -> PipelineResult:
    """
    Census of no-, single- and multi-photon bins, unheralded and heralded, with the ratio of
    single-photon fractions.
    """

    config = single_mode_config(n_bins * max(taus), seed)
    record = simulate(config)

    censuses, ratios = [], []

    for tau in taus:
        bins = bin_consecutive(record, tau, n_bins)
        unheralded = census(bins, CensusMode.UNHERALDED)
        heralded = census(bins, CensusMode.HERALDED)
        censuses += [unheralded, heralded]

        ratio = unheralded.single_photon / heralded.single_photon if heralded.n_single else None
        ratios.append(
            {
                "tau_ps": tau,
                "unheralded_single": float(unheralded.single_photon),
                "heralded_single": float(heralded.single_photon),
                "single_ratio": float(ratio) if ratio is not None else np.nan,
            }
        )

    # census_to_frame checks that every census partitions its bins
    return PipelineResult(
        frames={"census.csv": census_to_frame(censuses), "census_ratio.csv": pd.DataFrame(ratios)},
        parameters={"taus_ps": ",".join(str(tau) for tau in taus), "n_bins": n_bins},
        config=config,
    )


def run_power(
    seed: int = 0,
    max_workers: int = 1,
    taus: tuple = (10 * NS, 20 * NS, 30 * NS),
    n_samples: int = 1000,
    n_repeats: int = 100,
    sweep_steps: int = 3,
) -> PipelineResult:
    """
    Mean minimum unheralded estimate and its spread over repeats of 1000 bins, at the
    multi-mode count rates.
    """

    duration = 4 * n_samples * max(taus) * sweep_steps
    configs = [multi_mode_config(mcps, duration, seed) for mcps in MULTI_MODE_MCPS]

    frame = sweep_power(
        configs,
        taus,
        n_samples,
        n_repeats,
        EstimatorKind.UNHERALDED_BINNED,
        seed=seed,
        sweep_steps=sweep_steps,
        max_workers=max_workers,
    )

    rates = {config.pair_rate: mcps for config, mcps in zip(configs, MULTI_MODE_MCPS)}
    frame.insert(0, "count_rate_mcps", frame["pair_rate"].map(rates))

    return PipelineResult(
        frames={"power.csv": frame},
        parameters={
            "taus_ps": ",".join(str(tau) for tau in taus),
            "n_samples": n_samples,
            "n_repeats": n_repeats,
            "sweep_steps": sweep_steps,
            "duration_ps": duration,
        },
        config=MULTI_MODE_BASE,
    )


@dataclass(frozen=True)
class Protocol:
    name: str
    alias: str
    description: str
    run: Callable[..., PipelineResult]


PROTOCOLS = {
    protocol.name: protocol
    for protocol in (
        Protocol("bidirectional", "fig2", "estimates versus width grown both ways from fixed points", run_bidirectional),
        Protocol("herald-comparison", "fig3", "heralded versus unheralded estimates at three pump powers", run_herald_comparison),
        Protocol("multimode", "fig4", "unheralded estimates at the multi-mode count rates", run_multimode),
        Protocol("census", "fig5", "single-, multi- and no-photon bin fractions", run_census),
        Protocol("power", "fig6", "minimum estimate versus rate over 100 repeats of 1000 bins", run_power),
    )
}


def resolve_protocol(target: str) -> Protocol:
    """
    Looks a protocol up by name or alias.

    Raises:
        ValueError: If the target is unknown.
    """

    for protocol in PROTOCOLS.values():
        if target in (protocol.name, protocol.alias):
            return protocol

    valid = [name for protocol in PROTOCOLS.values() for name in (protocol.name, protocol.alias)]
    raise ValueError(f"'{target}' is not a valid target. Valid targets are {valid}.")
