# Internal classes
from .. import estimator as est
from ..timetag_model import ChannelId, TagRecord

DEFAULT_PARAMETERS = {"window_ps": 1000}


class ThreeDetector(est.AggregateEstimator):
    """
    Conventional heralded (three-detector) estimator over the full record.

    P_AC, P_BC and P_ABC are the twofold and threefold coincidence counts (greedy earliest-first
    within the window) divided by the total number of A, B and C events. The estimate is
    P_ABC / (P_AC * P_BC).

    Attributes:
        parameters (dict): 'window_ps', the coincidence window in picoseconds.
    """

    kind = est.EstimatorKind.THREE_DETECTOR

    @est.constructor
    def __init__(self, parameters: dict = {}):

        # Validate the parameters and apply default values if necessary
        self.validate_parameters(parameters, DEFAULT_PARAMETERS)

    def ratio(self, record: TagRecord) -> float:

        window = self.parameters["window_ps"]

        a = record.channel_timestamps(ChannelId.A)
        b = record.channel_timestamps(ChannelId.B)
        c = record.channel_timestamps(ChannelId.C)

        threefold = self.match_triples(a, b, c, window)

        if threefold == 0:
            return 0.0

        total = a.size + b.size + c.size
        p_ac = self.match_pairs(a, c, window) / total
        p_bc = self.match_pairs(b, c, window) / total

        return (threefold / total) / (p_ac * p_bc)
