# Internal classes
from .. import estimator as est
from ..timetag_model import ChannelId, TagRecord

DEFAULT_PARAMETERS = {"window_ps": 1000}


class TwoDetector(est.AggregateEstimator):
    """
    Conventional two-detector (HBT) estimator over the full record.

    P_A and P_B are the fractions of the A+B events recorded on each detector and P_AB is the
    number of A-B coincidences (greedy earliest-first matching within the window) over the same
    total. The estimate is P_AB / (P_A * P_B).

    Attributes:
        parameters (dict): 'window_ps', the coincidence window in picoseconds.

    Reference:
        Baseline for the fixed-bin estimators, which replace the full-record probabilities by per-bin ones.
    """

    kind = est.EstimatorKind.TWO_DETECTOR

    @est.constructor
    def __init__(self, parameters: dict = {}):

        # Validate the parameters and apply default values if necessary
        self.validate_parameters(parameters, DEFAULT_PARAMETERS)

    def ratio(self, record: TagRecord) -> float:

        a = record.channel_timestamps(ChannelId.A)
        b = record.channel_timestamps(ChannelId.B)

        coincidences = self.match_pairs(a, b, self.parameters["window_ps"])

        # A zero numerator gives zero regardless of the marginals
        if coincidences == 0:
            return 0.0

        total = a.size + b.size
        p_a, p_b, p_ab = a.size / total, b.size / total, coincidences / total

        return p_ab / (p_a * p_b)
