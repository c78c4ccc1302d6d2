"""
Harmonic-mean approximation.

A multi-type system S is replaced by a single-type auxiliary system S* whose
hop and exit probabilities are the a_k-weighted harmonic means of the per-type
values. The densities and flow of S* are taken as the approximation for S.
Only S* is solved, so the approximation stays available when S itself is too
large to enumerate.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import stats

from src.lattice.exact import Observables, analyze
from src.lattice.model import SystemParams, TypeSpec, validate
from src.settings import DEFAULTS

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AuxiliaryParams:
    """The single-type system S* and the harmonic values it was built from."""

    params: SystemParams
    hop_prob: float
    exit_prob: float


@dataclass(frozen=True)
class ComparisonReport:
    """Exact and approximate observables side by side, with their gaps."""

    exact: Observables
    approximate: Observables
    density_abs_error: np.ndarray
    density_rel_error: np.ndarray
    flow_abs_error: float
    flow_rel_error: float

    @property
    def max_abs_error(self) -> float:
        return float(max(np.max(self.density_abs_error), self.flow_abs_error))


def harmonic_mean(weights: tuple[float, ...], values: tuple[float, ...]) -> float:
    """Weighted harmonic mean 1 / sum(w_k / v_k) for weights summing to 1."""
    return float(stats.hmean(values, weights=weights))


def reduce(params: SystemParams) -> AuxiliaryParams:
    """Build S*: same N and alpha, one type with p* and beta* the weighted harmonic means."""
    if params.n_types == 1:
        (only,) = params.types
        return AuxiliaryParams(params=params, hop_prob=only.hop_prob, exit_prob=only.exit_prob)

    hop_star = harmonic_mean(params.arrival_weights, params.hop_probs)
    exit_star = harmonic_mean(params.arrival_weights, params.exit_probs)
    auxiliary = SystemParams(
        n_cells=params.n_cells,
        alpha=params.alpha,
        types=(TypeSpec(arrival_weight=1.0, hop_prob=hop_star, exit_prob=exit_star),),
    )
    logger.debug(f"Auxiliary system: p*={hop_star:.6f}, beta*={exit_star:.6f}")
    return AuxiliaryParams(params=auxiliary, hop_prob=hop_star, exit_prob=exit_star)


def approximate_observables(
    params: SystemParams,
    cap: int = DEFAULTS.state_cap,
    dense_cap: int = DEFAULTS.dense_cap,
) -> Observables:
    """Densities and flow of S*, used as the approximation for S."""
    validate(params)
    auxiliary = reduce(params)
    return analyze(auxiliary.params, cap=cap, dense_cap=dense_cap).observables


def _relative(error: np.ndarray | float, reference: np.ndarray | float) -> np.ndarray:
    reference = np.asarray(reference, dtype=float)
    error = np.asarray(error, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(reference != 0.0, error / np.abs(reference), 0.0)


def compare(
    params: SystemParams,
    cap: int = DEFAULTS.state_cap,
    dense_cap: int = DEFAULTS.dense_cap,
) -> ComparisonReport:
    """Run the exact pipeline on S and on S* and report absolute and relative errors."""
    exact = analyze(params, cap=cap, dense_cap=dense_cap).observables
    approximate = approximate_observables(params, cap=cap, dense_cap=dense_cap)

    density_abs = np.abs(exact.density - approximate.density)
    flow_abs = abs(exact.flow - approximate.flow)
    report = ComparisonReport(
        exact=exact,
        approximate=approximate,
        density_abs_error=density_abs,
        density_rel_error=_relative(density_abs, exact.density),
        flow_abs_error=flow_abs,
        flow_rel_error=float(_relative(flow_abs, exact.flow)),
    )
    logger.info(f"Approximation gap: max absolute error {report.max_abs_error:.2e}")
    return report
