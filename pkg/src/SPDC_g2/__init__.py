__version__ = "0.1.0"

# Installs the colored console handler on the package logger
from . import logs

# Re-exports for the top-level API
from .implementations.heralded_binned import HeraldedBinned as _HeraldedBinned
HeraldedBinned: type[_HeraldedBinned] = _HeraldedBinned

from .implementations.three_detector import ThreeDetector as _ThreeDetector
ThreeDetector: type[_ThreeDetector] = _ThreeDetector

from .implementations.two_detector import TwoDetector as _TwoDetector
TwoDetector: type[_TwoDetector] = _TwoDetector

from .implementations.unheralded_binned import UnheraldedBinned as _UnheraldedBinned
UnheraldedBinned: type[_UnheraldedBinned] = _UnheraldedBinned

from .g2_estimators import census, g2_aggregate, g2_binned, heralded_term, unheralded_term
from .oracle import CountModel, exact_expected_census, exact_expected_g2
from .simulator import generate_coherent_control, simulate
from .source_config import SourceConfig
from .sweeps import sweep_bidirectional, sweep_power, sweep_tau
from .timetag_model import BinCensus, BinCounts, ChannelId, G2Estimate, TagRecord, TimeTag

__all__ = ["HeraldedBinned", "ThreeDetector", "TwoDetector", "UnheraldedBinned"]


def show_all() -> None:
    """
    Helper function to list all estimators available in the package.
    """
    for entry in __all__:
        print(entry)
