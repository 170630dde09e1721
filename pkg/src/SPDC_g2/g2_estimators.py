from typing import Iterable, Optional, Union

import numpy as np
import pandas as pd

from .estimator import AggregateEstimator, BinnedEstimator, Estimator, EstimatorKind
from .implementations.heralded_binned import HeraldedBinned
from .implementations.three_detector import ThreeDetector
from .implementations.two_detector import TwoDetector
from .implementations.unheralded_binned import UnheraldedBinned
from .timetag_model import BinCensus, BinCounts, BinSeries, CensusMode, G2Estimate, TagRecord

ESTIMATORS = {
    EstimatorKind.TWO_DETECTOR: TwoDetector,
    EstimatorKind.THREE_DETECTOR: ThreeDetector,
    EstimatorKind.UNHERALDED_BINNED: UnheraldedBinned,
    EstimatorKind.HERALDED_BINNED: HeraldedBinned,
}

BINNED_KINDS = (EstimatorKind.UNHERALDED_BINNED, EstimatorKind.HERALDED_BINNED)
AGGREGATE_KINDS = (EstimatorKind.TWO_DETECTOR, EstimatorKind.THREE_DETECTOR)

ESTIMATE_COLUMNS = ["tau_ps", "g2", "n_w", "n_total", "std"]
CENSUS_COLUMNS = ["tau_ps", "mode", "no_photon", "single", "multi"]


def make_estimator(kind: Union[EstimatorKind, str], **parameters) -> Estimator:
    """
    Instantiates the estimator of a kind with explicit parameters.

    Args:
        kind (EstimatorKind | str): The estimator kind.
        **parameters: Estimator parameters (e.g. strict_herald, window_ps).

    Returns:
        Estimator: The estimator.
    """

    return ESTIMATORS[EstimatorKind(kind)](parameters=parameters)


def binned_estimator(kind: Union[EstimatorKind, str], strict_herald: bool = False) -> BinnedEstimator:
    """
    Instantiates a fixed-bin estimator.

    Raises:
        ValueError: If the kind is not a fixed-bin estimator.
    """

    kind = EstimatorKind(kind)

    if kind not in BINNED_KINDS:
        raise ValueError(f"'{kind.value}' is not a fixed-bin estimator. Valid kinds are {[k.value for k in BINNED_KINDS]}.")

    if kind is EstimatorKind.HERALDED_BINNED:
        return make_estimator(kind, strict_herald=strict_herald)

    return make_estimator(kind)


def unheralded_term(bin: BinCounts) -> Optional[float]:
    """
    Per-bin unheralded term min(C_A, C_B) * (C_A + C_B) / (C_A * C_B).

    Returns:
        float | None: The term, or None for a bin without detections on A or B.
    """
    return binned_estimator(EstimatorKind.UNHERALDED_BINNED).term(bin)


def heralded_term(bin: BinCounts, strict_herald: bool = False) -> Optional[float]:
    """
    Per-bin heralded term C_ABC * C_C / (C_AC * C_BC).

    Returns:
        float | None: The term, or None for a bin that does not contribute.
    """
    return binned_estimator(EstimatorKind.HERALDED_BINNED, strict_herald).term(bin)


def g2_binned(
    bins: Union[BinSeries, Iterable[BinCounts]],
    kind: Union[EstimatorKind, str],
    strict_herald: bool = False,
) -> G2Estimate:
    """
    Averages the per-bin terms over the contributing bins.

    Args:
        bins (BinSeries | Iterable[BinCounts]): Bins of a common width.
        kind (EstimatorKind | str): unheralded_binned or heralded_binned.
        strict_herald (bool, optional): Heralded bins contribute only with a herald detection. Defaults to False.

    Returns:
        G2Estimate: The estimate (undefined when no bin contributes).
    """
    return binned_estimator(kind, strict_herald).estimate(bins)


def g2_aggregate(record: TagRecord, kind: Union[EstimatorKind, str], window_ps: int) -> float:
    """
    Conventional full-record estimator (two- or three-detector).

    Args:
        record (TagRecord): A sorted, non-empty record.
        kind (EstimatorKind | str): two_detector or three_detector.
        window_ps (int): Coincidence window in picoseconds.

    Returns:
        float: The correlation ratio.
    """

    kind = EstimatorKind(kind)

    if kind not in AGGREGATE_KINDS:
        raise ValueError(f"'{kind.value}' is not a full-record estimator. Valid kinds are {[k.value for k in AGGREGATE_KINDS]}.")

    estimator: AggregateEstimator = make_estimator(kind, window_ps=window_ps)

    return estimator.estimate(record)


def census(bins: Union[BinSeries, Iterable[BinCounts]], mode: Union[CensusMode, str]) -> BinCensus:
    """
    Classifies bins by the number of signal detections s = C_A + C_B.

    Unheralded: s = 0 no-photon, s = 1 single-photon, s >= 2 multi-photon. Heralded: the
    same classes, but only bins with a herald detection (C_C >= 1) can be single- or
    multi-photon; the others are no-photon bins.

    Args:
        bins (BinSeries | Iterable[BinCounts]): Bins of a common width.
        mode (CensusMode | str): unheralded or heralded.

    Returns:
        BinCensus: Integer tallies and exact fractions.

    Raises:
        ValueError: If there are no bins or the bins mix widths.
    """

    mode = CensusMode(mode)
    bins = BinSeries.from_bins(bins)
    tau = bins.common_tau()

    signal = bins.c_a + bins.c_b
    eligible = bins.c_c >= 1 if mode is CensusMode.HERALDED else np.ones(len(bins), dtype=bool)

    n_single = int(np.count_nonzero(eligible & (signal == 1)))
    n_multi = int(np.count_nonzero(eligible & (signal >= 2)))

    return BinCensus(
        n_no=len(bins) - n_single - n_multi,
        n_single=n_single,
        n_multi=n_multi,
        tau=tau,
        mode=mode,
    )


def estimates_to_frame(table: dict) -> pd.DataFrame:
    """
    Lays out {tau: G2Estimate} as rows tau_ps, g2, n_w, n_total, std (NaN where undefined).
    """

    rows = []
    for tau, estimate in table.items():
        rows.append(
            {
                "tau_ps": int(tau),
                "g2": estimate.value if estimate.is_defined else np.nan,
                "n_w": estimate.n_w,
                "n_total": estimate.n_total,
                "std": estimate.std_dev if estimate.std_dev is not None else np.nan,
            }
        )

    return pd.DataFrame(rows, columns=ESTIMATE_COLUMNS)


def census_to_frame(censuses: Iterable[BinCensus]) -> pd.DataFrame:
    """
    Lays out censuses as rows tau_ps, mode, no_photon, single, multi.

    Raises:
        ValueError: If a census does not partition its bins.
    """

    rows = []
    for entry in censuses:

        # Exact partition of the examined bins
        if entry.no_photon + entry.single_photon + entry.multi_photon != 1:
            raise ValueError(f"The census at tau={entry.tau} ps does not partition its bins.")

        rows.append(
            {
                "tau_ps": entry.tau,
                "mode": entry.mode.value,
                "no_photon": float(entry.no_photon),
                "single": float(entry.single_photon),
                "multi": float(entry.multi_photon),
            }
        )

    return pd.DataFrame(rows, columns=CENSUS_COLUMNS)
