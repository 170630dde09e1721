import hashlib
import logging
import os
from dataclasses import asdict, dataclass, fields, replace
from typing import Union

from .errors import ConfigError

logger = logging.getLogger(__name__)

PS_PER_S = 1_000_000_000_000

# Recorded A+B count rates (Mcps) of the reference source, keyed by (fiber, pump power in mW).
# Empirical anchors for picking simulator rates, not a physical model.
PUMP_POWER_ANCHORS = {
    ("single_mode", 30.0): 1.5,
    ("multi_mode", 4.0): 5.4,
    ("multi_mode", 16.0): 17.2,
    ("multi_mode", 28.0): 25.6,
}

FIBER_MODES = ("single_mode", "multi_mode")


@dataclass(frozen=True)
class SourceConfig:
    """
    Parameters of the simulated pair source and detectors.

    Behaves like a read-only dictionary (iteration over field names, item access by name).

    Args:
        pair_rate (float): Pair emission rate in pairs per second (stands in for the pump power).
        eta_a (float): Probability that a signal photon is detected on A (includes the 50:50 split).
        eta_b (float): Probability that a signal photon is detected on B (includes the 50:50 split).
        eta_c (float): Probability that an idler photon is detected on the herald C.
        dead_time (int): Non-paralyzable dead time of every detector in picoseconds.
        dark_rate_a (float): Dark count rate of A in counts per second.
        dark_rate_b (float): Dark count rate of B in counts per second.
        dark_rate_c (float): Dark count rate of C in counts per second.
        jitter_sigma (float): Standard deviation of the Gaussian timing jitter in picoseconds.
        pair_delay (int): Idler arrival offset relative to the signal photon in picoseconds.
        duration (int): Acquisition span in picoseconds.
        seed (int): Seed of the random number generator.

    Raises:
        ConfigError: If a value violates the invariants of the configuration.
    """

    pair_rate: float = 1.0e6
    eta_a: float = 0.1
    eta_b: float = 0.1
    eta_c: float = 0.25
    dead_time: int = 22_000
    dark_rate_a: float = 100.0
    dark_rate_b: float = 100.0
    dark_rate_c: float = 100.0
    jitter_sigma: float = 0.0
    pair_delay: int = 0
    duration: int = 10_000_000_000
    seed: int = 0

    def __post_init__(self):

        # Coerce to the declared field types (values may come from text files)
        for f in fields(self):
            value = getattr(self, f.name)
            try:
                coerced = _coerce(value, f.type)
            except (TypeError, ValueError):
                raise ConfigError(f"'{f.name}' must be {_type_name(f.type)}, got {value!r}.") from None
            object.__setattr__(self, f.name, coerced)

        for name in ("eta_a", "eta_b", "eta_c"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"'{name}' must lie in [0, 1], got {getattr(self, name)}.")

        # A signal photon reaches at most one of A and B
        if self.eta_a + self.eta_b > 1.0:
            raise ConfigError(f"eta_a + eta_b must not exceed 1, got {self.eta_a + self.eta_b}.")

        for name in ("pair_rate", "dark_rate_a", "dark_rate_b", "dark_rate_c", "jitter_sigma"):
            if not getattr(self, name) >= 0.0:
                raise ConfigError(f"'{name}' must be non-negative, got {getattr(self, name)}.")

        for name in ("dead_time", "duration"):
            if getattr(self, name) < 0:
                raise ConfigError(f"'{name}' must be non-negative, got {getattr(self, name)}.")

        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"'seed' must be a 64-bit unsigned integer, got {self.seed}.")

    # Implement dictionary-like behavior
    def __iter__(self):
        return iter(asdict(self))

    def __getitem__(self, key):
        if key not in self.__dataclass_fields__:
            raise KeyError(key)
        return getattr(self, key)

    def __contains__(self, key) -> bool:
        return key in self.__dataclass_fields__

    @property
    def duration_s(self) -> float:
        return self.duration / PS_PER_S

    def replace(self, **changes) -> "SourceConfig":
        """
        Returns a copy of the configuration with some fields changed.
        """
        unknown = set(changes) - set(self.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"Unknown configuration keys: {sorted(unknown)}.")
        return replace(self, **changes)

    def to_text(self) -> str:
        """
        Serializes the configuration as flat key=value lines.
        """
        return "".join(f"{key}={self[key]!r}\n" for key in self)

    def config_hash(self) -> str:
        """
        Returns a short digest of the configuration (seed included).
        """
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()[:16]

    @classmethod
    def parse_text(cls, text: str) -> dict:
        """
        Parses flat key=value text into a dictionary of the keys it sets. Blank lines and lines
        starting with '#' are ignored.

        Raises:
            ConfigError: If a line is malformed or a key is unknown.
        """

        values = {}

        for number, raw_line in enumerate(text.splitlines(), start=1):
            line = raw_line.split("#", 1)[0].strip()
            if not line:
                continue

            if "=" not in line:
                raise ConfigError(f"Line {number}: expected key=value, got '{raw_line.strip()}'.")

            key, value = (part.strip() for part in line.split("=", 1))
            if key not in cls.__dataclass_fields__:
                raise ConfigError(
                    f"Line {number}: '{key}' is not a valid key. Valid keys are {list(cls.__dataclass_fields__)}."
                )
            values[key] = value

        return values

    @classmethod
    def from_text(cls, text: str, base: "SourceConfig" = None) -> "SourceConfig":
        """
        Parses flat key=value text.

        Args:
            text (str): The configuration text.
            base (SourceConfig, optional): Values used for keys absent from the text. Defaults to the built-in defaults.

        Returns:
            SourceConfig: The parsed configuration.

        Raises:
            ConfigError: If a line is malformed, a key is unknown or a value is invalid.
        """

        return (base or cls()).replace(**cls.parse_text(text))

    @classmethod
    def from_file(cls, path: Union[str, os.PathLike], base: "SourceConfig" = None) -> "SourceConfig":
        """
        Reads a key=value configuration file.
        """
        with open(path, "r", encoding="utf-8") as file:
            config = cls.from_text(file.read(), base)
        logger.info(f"Loaded source configuration from {path}")
        return config


def _is_int(declared) -> bool:
    return declared is int or declared == "int"


def _type_name(declared) -> str:
    return "an integer" if _is_int(declared) else "a real number"


def _coerce(value, declared):
    """
    Converts a value (possibly a string from a file or the command line) to int or float.
    """

    if _is_int(declared):
        if isinstance(value, str):
            # Accept scientific notation for large integer quantities (e.g. 1e10 ps)
            number = float(value) if any(ch in value for ch in ".eE") else int(value, 10)
        else:
            number = value
        if isinstance(number, float):
            if not number.is_integer():
                raise ValueError(value)
            number = int(number)
        if isinstance(number, bool) or not isinstance(number, int):
            number = int(number)
        return number

    if isinstance(value, bool):
        raise TypeError(value)

    return float(value)


def pair_rate_for_count_rate(mcps: float, config: SourceConfig) -> float:
    """
    Converts a recorded A+B count rate into the pair rate that produces it with the given
    efficiencies, undoing the non-paralyzable dead-time loss of each detector.

    The recorded rate is split between A and B in proportion to eta_a and eta_b. For each
    detector the true rate n is recovered from the recorded rate m as n = m / (1 - m * dead_time).

    Args:
        mcps (float): Recorded A+B rate in mega-counts per second.
        config (SourceConfig): Supplies eta_a, eta_b and dead_time.

    Returns:
        float: Pair rate in pairs per second.

    Raises:
        ConfigError: If the efficiencies are zero or the recorded rate saturates the detectors.
    """

    efficiency = config.eta_a + config.eta_b
    if efficiency <= 0.0:
        raise ConfigError("eta_a + eta_b must be positive to reach a non-zero count rate.")

    if mcps < 0:
        raise ConfigError(f"The count rate must be non-negative, got {mcps}.")

    dead_time_s = config.dead_time / PS_PER_S
    true_rate = 0.0

    for eta in (config.eta_a, config.eta_b):
        recorded = mcps * 1e6 * eta / efficiency
        if recorded * dead_time_s >= 1.0:
            raise ConfigError(f"A recorded rate of {recorded:.3e}/s saturates a detector with {config.dead_time} ps dead time.")
        true_rate += recorded / (1.0 - recorded * dead_time_s)

    return true_rate / efficiency


def pair_rate_for_pump_power(power_mw: float, fiber: str, config: SourceConfig) -> float:
    """
    Estimates the pair rate at a pump power, scaling linearly from the closest empirical
    anchor of the same fiber type (pair generation is linear in pump power).

    Args:
        power_mw (float): Pump power in milliwatts.
        fiber (str): 'single_mode' or 'multi_mode'.
        config (SourceConfig): Supplies the efficiencies and the dead time.

    Returns:
        float: Pair rate in pairs per second.
    """

    if fiber not in FIBER_MODES:
        raise ConfigError(f"'{fiber}' is not a valid fiber mode. Valid modes are {FIBER_MODES}.")

    if power_mw < 0:
        raise ConfigError(f"The pump power must be non-negative, got {power_mw}.")

    anchors = {power: mcps for (mode, power), mcps in PUMP_POWER_ANCHORS.items() if mode == fiber}
    closest = min(anchors, key=lambda power: abs(power - power_mw))

    # Linear through the origin in pair rate (recorded rates are not linear because of dead time)
    return pair_rate_for_count_rate(anchors[closest], config) * power_mw / closest
