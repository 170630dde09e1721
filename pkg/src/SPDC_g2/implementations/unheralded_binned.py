# External libraries
import numpy as np

# Internal classes
from .. import estimator as est

DEFAULT_PARAMETERS = {}


class UnheraldedBinned(est.BinnedEstimator):
    """
    Fixed-bin unheralded correlation estimator.

    Within a bin, the detection probabilities are the counts normalized by C_A + C_B and the
    coincidence count is C_AB = min(C_A, C_B), which reduces the per-bin ratio to

        C_AB * (C_A + C_B) / (C_A * C_B)

    The estimate is the average of this term over the bins with at least one detection on A or B.
    A bin with detections on a single arm has C_AB = 0 and contributes a zero term.

    Methods:
        terms(c_a, c_b, c_c) -> np.ndarray:
            Computes the term of every bin.
        contributes(c_a, c_b, c_c) -> np.ndarray:
            Flags the bins with at least one detection on A or B.
    """

    kind = est.EstimatorKind.UNHERALDED_BINNED

    @est.constructor
    def __init__(self, parameters: dict = {}):

        # No parameters: validation only refuses unknown names
        self.validate_parameters(parameters, DEFAULT_PARAMETERS)

    def terms(self, c_a: np.ndarray, c_b: np.ndarray, c_c: np.ndarray) -> np.ndarray:

        c_a = np.asarray(c_a, dtype=np.int64)
        c_b = np.asarray(c_b, dtype=np.int64)

        coincidences = np.minimum(c_a, c_b)

        # A zero coincidence count forces a zero term before any division
        product = np.where(coincidences > 0, c_a * c_b, 1)

        return np.where(coincidences > 0, coincidences * (c_a + c_b) / product, 0.0)

    def contributes(self, c_a: np.ndarray, c_b: np.ndarray, c_c: np.ndarray) -> np.ndarray:
        return (np.asarray(c_a) + np.asarray(c_b)) > 0
