# External libraries
import numpy as np

# Internal classes
from .. import estimator as est

DEFAULT_PARAMETERS = {"strict_herald": False}


class HeraldedBinned(est.BinnedEstimator):
    """
    Fixed-bin heralded correlation estimator.

    With C_ABC = min(C_A, C_B, C_C), C_AC = min(C_A, C_C) and C_BC = min(C_B, C_C), the per-bin term is

        C_ABC * C_C / (C_AC * C_BC)

    and the estimate is its average over the contributing bins.

    Attributes:
        parameters (dict): 'strict_herald' selects the contributing-bin rule. When False (default)
            any detection on A, B or C makes the bin contribute; when True the bin needs a herald
            detection (C_C >= 1).

    Methods:
        terms(c_a, c_b, c_c) -> np.ndarray:
            Computes the term of every bin.
        contributes(c_a, c_b, c_c) -> np.ndarray:
            Applies the contributing-bin rule.
    """

    kind = est.EstimatorKind.HERALDED_BINNED

    @est.constructor
    def __init__(self, parameters: dict = {}):

        # Validate the parameters and apply default values if necessary
        self.validate_parameters(parameters, DEFAULT_PARAMETERS)

    def terms(self, c_a: np.ndarray, c_b: np.ndarray, c_c: np.ndarray) -> np.ndarray:

        c_a = np.asarray(c_a, dtype=np.int64)
        c_b = np.asarray(c_b, dtype=np.int64)
        c_c = np.asarray(c_c, dtype=np.int64)

        threefold = np.minimum(np.minimum(c_a, c_b), c_c)

        # Both twofold counts are positive wherever the threefold count is
        denominator = np.where(threefold > 0, np.minimum(c_a, c_c) * np.minimum(c_b, c_c), 1)

        return np.where(threefold > 0, threefold * c_c / denominator, 0.0)

    def contributes(self, c_a: np.ndarray, c_b: np.ndarray, c_c: np.ndarray) -> np.ndarray:

        if self.parameters["strict_herald"]:
            return np.asarray(c_c) > 0

        return (np.asarray(c_a) + np.asarray(c_b) + np.asarray(c_c)) > 0
