import logging
from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np
from scipy.stats import poisson

from .errors import ConfigError
from .estimator import EstimatorKind
from .g2_estimators import binned_estimator
from .timetag_model import CensusMode

logger = logging.getLogger(__name__)

# Largest probability mass allowed outside the truncated grid, summed over the channels
TAIL_TOLERANCE = 1e-12

# Pair-count weights below this are skipped when building the paired distribution
NEGLIGIBLE_WEIGHT = 1e-18


class CountModelKind(str, Enum):
    INDEPENDENT_POISSON = "independent_poisson"
    PAIRED_PLUS_POISSON = "paired_plus_poisson"


@dataclass(frozen=True)
class CountModel:
    """
    Parametric distribution of the counts of one bin.

    independent_poisson: C_A, C_B and C_C are independent Poisson variables with means
    lambda_a, lambda_b and lambda_c (the coherent control).

    paired_plus_poisson: Poisson(mu_pair) pairs per bin, each routed like the simulator does
    (signal to A with probability eta_a, else to B with probability eta_b; idler to C with
    probability eta_c), plus independent Poisson backgrounds lambda_a, lambda_b, lambda_c.

    Args:
        kind (CountModelKind): The model.
        lambda_a (float): Mean background count on A.
        lambda_b (float): Mean background count on B.
        lambda_c (float): Mean background count on C.
        mu_pair (float): Mean number of pairs per bin (paired model only).
        eta_a (float): Signal routing probability to A (paired model only).
        eta_b (float): Signal routing probability to B (paired model only).
        eta_c (float): Idler detection probability (paired model only).
        truncation_cap (int): Largest count of the summation grid on every channel.

    Raises:
        ConfigError: If a parameter is invalid or the probability mass beyond the cap exceeds TAIL_TOLERANCE.
    """

    kind: CountModelKind = CountModelKind.INDEPENDENT_POISSON
    lambda_a: float = 0.5
    lambda_b: float = 0.5
    lambda_c: float = 0.5
    mu_pair: float = 0.0
    eta_a: float = 0.5
    eta_b: float = 0.5
    eta_c: float = 1.0
    truncation_cap: int = 40

    def __post_init__(self):

        try:
            object.__setattr__(self, "kind", CountModelKind(self.kind))
        except ValueError:
            raise ConfigError(
                f"'{self.kind}' is not a valid count model. Valid models are {[k.value for k in CountModelKind]}."
            ) from None

        for name in ("lambda_a", "lambda_b", "lambda_c", "mu_pair"):
            if not getattr(self, name) >= 0.0:
                raise ConfigError(f"'{name}' must be non-negative, got {getattr(self, name)}.")

        for name in ("eta_a", "eta_b", "eta_c"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"'{name}' must lie in [0, 1], got {getattr(self, name)}.")

        if self.eta_a + self.eta_b > 1.0:
            raise ConfigError(f"eta_a + eta_b must not exceed 1, got {self.eta_a + self.eta_b}.")

        if isinstance(self.truncation_cap, bool) or int(self.truncation_cap) != self.truncation_cap or self.truncation_cap < 1:
            raise ConfigError(f"'truncation_cap' must be a positive integer, got {self.truncation_cap}.")
        object.__setattr__(self, "truncation_cap", int(self.truncation_cap))

        tail = self.tail_mass()
        if tail > TAIL_TOLERANCE:
            raise ConfigError(
                f"A truncation cap of {self.truncation_cap} neglects a probability mass of {tail:.3e}; increase the cap."
            )

    def marginal_means(self) -> tuple:
        """
        Returns the mean counts on A, B and C.
        """

        if self.kind is CountModelKind.INDEPENDENT_POISSON:
            return self.lambda_a, self.lambda_b, self.lambda_c

        return (
            self.mu_pair * self.eta_a + self.lambda_a,
            self.mu_pair * self.eta_b + self.lambda_b,
            self.mu_pair * self.eta_c + self.lambda_c,
        )

    def tail_mass(self) -> float:
        """
        Upper bound on the probability mass outside the summation grid.
        """
        return float(sum(poisson.sf(self.truncation_cap, mean) for mean in self.marginal_means()))


def _shifted(pmf: np.ndarray, shift: int) -> np.ndarray:
    """
    Returns the pmf of N + shift on the same grid (mass pushed beyond the grid is dropped).
    """
    out = np.zeros_like(pmf)
    if shift < pmf.size:
        out[shift:] = pmf[: pmf.size - shift]
    return out


def joint_pmf(model: CountModel) -> np.ndarray:
    """
    Computes the joint pmf of (C_A, C_B, C_C) on the grid {0..cap}^3.

    In the paired model every pair falls into one of independent Poisson categories.
    With X pairs seen on A and C, Y pairs seen on B and C, and the remaining detections
    (including backgrounds) pooled per channel as A', B', C':

        C_A = A' + X,  C_B = B' + Y,  C_C = C' + X + Y

    The joint pmf is the mixture over (X, Y) of the shifted independent product.

    Args:
        model (CountModel): The count model.

    Returns:
        np.ndarray: Array of shape (cap + 1,) * 3 indexed [c_a, c_b, c_c].
    """

    grid = np.arange(model.truncation_cap + 1)

    if model.kind is CountModelKind.INDEPENDENT_POISSON:
        p_a, p_b, p_c = (poisson.pmf(grid, mean) for mean in (model.lambda_a, model.lambda_b, model.lambda_c))
        return np.einsum("i,j,k->ijk", p_a, p_b, p_c)

    mu, eta_a, eta_b, eta_c = model.mu_pair, model.eta_a, model.eta_b, model.eta_c

    p_x = poisson.pmf(grid, mu * eta_a * eta_c)
    p_y = poisson.pmf(grid, mu * eta_b * eta_c)
    p_a = poisson.pmf(grid, mu * eta_a * (1.0 - eta_c) + model.lambda_a)
    p_b = poisson.pmf(grid, mu * eta_b * (1.0 - eta_c) + model.lambda_b)
    p_c = poisson.pmf(grid, mu * (1.0 - eta_a - eta_b) * eta_c + model.lambda_c)

    pmf = np.zeros((grid.size,) * 3)

    for x in grid:
        for y in grid[: grid.size - x]:
            weight = p_x[x] * p_y[y]
            if weight < NEGLIGIBLE_WEIGHT:
                continue
            pmf += weight * np.einsum("i,j,k->ijk", _shifted(p_a, x), _shifted(p_b, y), _shifted(p_c, x + y))

    return pmf


def _count_grids(model: CountModel) -> tuple:
    grid = np.arange(model.truncation_cap + 1)
    return np.meshgrid(grid, grid, grid, indexing="ij")


def exact_expected_g2(
    model: CountModel,
    kind: Union[EstimatorKind, str],
    strict_herald: bool = False,
) -> float:
    """
    Computes the expectation of the per-bin term conditioned on the bin contributing.

    This is the large-sample limit of g2_binned on bins drawn from the model.

    Args:
        model (CountModel): The count model.
        kind (EstimatorKind | str): unheralded_binned or heralded_binned.
        strict_herald (bool, optional): Strict contributing-bin rule for heralded estimates. Defaults to False.

    Returns:
        float: E[term | contributing].

    Raises:
        ValueError: If no bin can contribute under the model.
    """

    estimator = binned_estimator(kind, strict_herald)
    c_a, c_b, c_c = _count_grids(model)
    pmf = joint_pmf(model)

    mask = estimator.contributes(c_a, c_b, c_c)
    p_contributing = float(pmf[mask].sum())

    if p_contributing <= 0.0:
        raise ValueError(f"No bin contributes under {model}; the expectation is undefined.")

    terms = estimator.terms(c_a, c_b, c_c)
    expectation = float((pmf * terms)[mask].sum() / p_contributing)

    logger.info(f"Exact {estimator.kind.value} expectation {expectation:.12g} (contributing mass {p_contributing:.6g})")

    return expectation


def exact_expected_census(model: CountModel, mode: Union[CensusMode, str]) -> dict:
    """
    Computes the expected census fractions of bins drawn from the model.

    Args:
        model (CountModel): The count model.
        mode (CensusMode | str): unheralded or heralded (single- and multi-photon bins need C_C >= 1).

    Returns:
        dict[str, float]: Probabilities of 'no_photon', 'single' and 'multi' bins, summing to 1.
    """

    mode = CensusMode(mode)
    c_a, c_b, c_c = _count_grids(model)
    pmf = joint_pmf(model)

    # Renormalize over the grid
    pmf = pmf / pmf.sum()

    signal = c_a + c_b
    eligible = c_c >= 1 if mode is CensusMode.HERALDED else np.ones_like(signal, dtype=bool)

    single = float(pmf[eligible & (signal == 1)].sum())
    multi = float(pmf[eligible & (signal >= 2)].sum())

    return {"no_photon": 1.0 - single - multi, "single": single, "multi": multi}
