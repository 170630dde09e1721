import logging
from abc import ABC, abstractmethod
from enum import Enum
from typing import Callable, Iterable, Optional, Union

import numpy as np

from .timetag_model import BinCounts, BinSeries, G2Estimate, TagRecord

logger = logging.getLogger(__name__)


class EstimatorKind(str, Enum):
    """
    The four correlation estimators: the conventional full-record two- and three-detector
    ratios, and the fixed-bin unheralded and heralded averages.
    """

    TWO_DETECTOR = "two_detector"
    THREE_DETECTOR = "three_detector"
    UNHERALDED_BINNED = "unheralded_binned"
    HERALDED_BINNED = "heralded_binned"


def count_calls(foo: Callable) -> Callable:
    """
    Decorator that increments and stores the number of calls to a method.

    Args:
        foo (Callable): The function to count the number of calls to.

    Returns:
        Callable: The decorated function.
    """

    def wrapper(self, *args, **kwargs):

        # Increment the number of calls
        self.nb_calls += 1

        # Call the original function
        return foo(self, *args, **kwargs)

    wrapper.__doc__ = foo.__doc__
    wrapper.__name__ = foo.__name__

    return wrapper


def constructor(foo: Callable):
    """
    Calls the base constructor after executing the subclass constructor.

    Args:
        foo (Callable): The subclass constructor to be executed before calling the base constructor.

    Returns:
        Callable: The wrapper function that executes the given function and calls the base constructor.
    """

    def wrapper(self, **kwargs):

        # Initialize parameters
        self.parameters = {}

        # Call the subclass constructor
        foo(self, **kwargs)

        # Call the base constructor
        Estimator.__init__(self)

    return wrapper


class Estimator(ABC):
    """
    Base class of the correlation estimators.

    Attributes:
        kind (EstimatorKind): The estimator implemented by the subclass.
        parameters (dict): Validated parameters of the estimator.
        nb_calls (int): Number of estimates computed so far.
    """

    kind: EstimatorKind

    def __init__(self):

        if not hasattr(self, "parameters"):
            self.parameters = {}

        # Initialize the number of estimates
        self.nb_calls: int = 0

    def validate_parameters(self, parameters: dict, default_params: dict):
        """
        Validates the parameters of the estimator and stores them, applying defaults where needed.

        Args:
            parameters (dict): The parameters to validate.
            default_params (dict): The default parameters of the estimator.

        Raises:
            ValueError: If a parameter is not a parameter of the estimator.
        """

        # Make sure that all the provided parameters are also in the default parameters
        for parameter_name in parameters:
            if parameter_name not in default_params:
                raise ValueError(
                    f"'{parameter_name}' is not a valid parameter. Valid parameters are {list(default_params)}."
                )

        # Store the parameters and set default values as required
        for parameter_name in default_params:
            if parameter_name in parameters:
                self.parameters[parameter_name] = parameters[parameter_name]
            else:
                default_value = default_params[parameter_name]
                logger.warning(
                    f"The '{parameter_name}' parameter is not set. Default value of {default_value} is used instead."
                )
                self.parameters[parameter_name] = default_value

    @abstractmethod
    def estimate(self, data):
        """
        Computes the estimate from the given data.
        """
        pass

    def __call__(self, data):
        return self.estimate(data)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.parameters})"


class BinnedEstimator(Estimator):
    """
    Estimator averaging a per-bin term over the bins that contribute to N_w.

    Subclasses provide the vectorized term and the contributing-bin predicate. Both are used
    unchanged by the expectation oracle, so the N_w rule lives in exactly one place.
    """

    @abstractmethod
    def terms(self, c_a: np.ndarray, c_b: np.ndarray, c_c: np.ndarray) -> np.ndarray:
        """
        Computes the per-bin term for arrays of counts (meaningful where the bin contributes).

        Args:
            c_a, c_b, c_c (np.ndarray): Counts on A, B and C.

        Returns:
            np.ndarray: The term of every bin (float64).
        """
        pass

    @abstractmethod
    def contributes(self, c_a: np.ndarray, c_b: np.ndarray, c_c: np.ndarray) -> np.ndarray:
        """
        Tells which bins count in N_w.

        Args:
            c_a, c_b, c_c (np.ndarray): Counts on A, B and C.

        Returns:
            np.ndarray: Boolean mask of contributing bins.
        """
        pass

    def term(self, bin: BinCounts) -> Optional[float]:
        """
        Computes the term of a single bin.

        Args:
            bin (BinCounts): The bin.

        Returns:
            float | None: The term, or None if the bin contributes nothing.
        """
        c_a, c_b, c_c = (np.array([count]) for count in (bin.c_a, bin.c_b, bin.c_c))
        if not self.contributes(c_a, c_b, c_c)[0]:
            return None
        return float(self.terms(c_a, c_b, c_c)[0])

    @count_calls
    def estimate(self, bins: Union[BinSeries, Iterable[BinCounts]]) -> G2Estimate:
        """
        Averages the per-bin terms over the contributing bins.

        Args:
            bins (BinSeries | Iterable[BinCounts]): Bins of a common width.

        Returns:
            G2Estimate: The estimate, undefined if no bin contributes.

        Raises:
            ValueError: If there are no bins or the bins mix widths.
        """

        bins = BinSeries.from_bins(bins)
        bins.common_tau()

        mask = self.contributes(bins.c_a, bins.c_b, bins.c_c)
        n_w = int(mask.sum())

        if n_w == 0:
            return G2Estimate.undefined(len(bins))

        per_bin_terms = self.terms(bins.c_a[mask], bins.c_b[mask], bins.c_c[mask])
        std_dev = float(np.std(per_bin_terms, ddof=1)) if n_w >= 2 else None

        return G2Estimate(
            value=float(per_bin_terms.sum() / n_w),
            n_w=n_w,
            n_total=len(bins),
            per_bin_terms=per_bin_terms,
            std_dev=std_dev,
        )


class AggregateEstimator(Estimator):
    """
    Estimator computed from detection probabilities over the full record, with coincidences
    defined by a time window.
    """

    @count_calls
    def estimate(self, record: TagRecord) -> float:
        """
        Computes the full-record correlation ratio.

        Args:
            record (TagRecord): A sorted record.

        Returns:
            float: The ratio, 0 when no coincidence was found.

        Raises:
            ValueError: If the record is empty or the window is not positive.
        """

        if len(record) == 0:
            raise ValueError("The record is empty.")

        if self.parameters["window_ps"] <= 0:
            raise ValueError(f"The coincidence window must be positive, got {self.parameters['window_ps']}.")

        return self.ratio(record)

    @abstractmethod
    def ratio(self, record: TagRecord) -> float:
        pass

    @staticmethod
    def match_pairs(first: np.ndarray, second: np.ndarray, window: int) -> int:
        """
        Counts twofold coincidences, pairing tags greedily earliest-first. Each tag is used at most once.

        Args:
            first, second (np.ndarray): Sorted timestamps of two channels.
            window (int): Largest accepted time difference in picoseconds.

        Returns:
            int: Number of coincidences.
        """

        first, second = first.tolist(), second.tolist()
        i = j = matches = 0

        while i < len(first) and j < len(second):
            if abs(first[i] - second[j]) <= window:
                matches += 1
                i += 1
                j += 1
            elif first[i] < second[j]:
                i += 1
            else:
                j += 1

        return matches

    @staticmethod
    def match_triples(first: np.ndarray, second: np.ndarray, third: np.ndarray, window: int) -> int:
        """
        Counts threefold coincidences (all three tags within the window), greedily earliest-first.

        Returns:
            int: Number of coincidences.
        """

        streams = [first.tolist(), second.tolist(), third.tolist()]
        positions = [0, 0, 0]
        matches = 0

        while all(position < len(stream) for position, stream in zip(positions, streams)):
            heads = [stream[position] for position, stream in zip(positions, streams)]
            if max(heads) - min(heads) <= window:
                matches += 1
                positions = [position + 1 for position in positions]
            else:
                # The earliest tag cannot match anything later within the window
                positions[heads.index(min(heads))] += 1

        return matches
