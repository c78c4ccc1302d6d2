"""
Stationary analysis of the finite chain.

Two independent solvers are provided: a dense direct solve of the balance
system with one equation replaced by the normalization, and power iteration
from the uniform vector. Observables (per-cell densities and the three flow
estimators) are derived from either.
"""

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from src.lattice.errors import DimensionError, NumericalError, StateSpaceError
from src.lattice.model import (
    SystemParams,
    TransitionKernel,
    build_kernel,
    state_digits,
    state_space_label,
    validate,
)
from src.settings import DEFAULTS

logger = logging.getLogger(__name__)

DIRECT_RESIDUAL_TOL = 1e-12
NEGATIVE_TOL = 1e-12


@dataclass(frozen=True)
class StationaryDistribution:
    """Stationary vector over codec-ordered states plus solver metadata."""

    probabilities: np.ndarray
    residual: float
    method: str
    iterations: int = 0

    @property
    def n_states(self) -> int:
        return self.probabilities.shape[0]


@dataclass(frozen=True)
class Observables:
    """Per-cell densities and flow-rate estimators."""

    density: np.ndarray
    density_by_type: np.ndarray
    flow_in: float
    flow_cross: np.ndarray
    flow_out: float

    @property
    def flow(self) -> float:
        return self.flow_in

    @property
    def flow_mismatch(self) -> float:
        """Largest deviation of any bond or exit estimator from flow_in."""
        estimates = np.append(self.flow_cross, self.flow_out)
        return float(np.max(np.abs(estimates - self.flow_in)))


@dataclass(frozen=True)
class ExactResult:
    params: SystemParams
    distribution: StationaryDistribution
    observables: Observables


def stationarity_residual(kernel: TransitionKernel, probabilities: np.ndarray) -> float:
    """max |pi - pi P|"""
    return float(np.max(np.abs(probabilities - kernel.matrix.T @ probabilities)))


def _clean(probabilities: np.ndarray) -> np.ndarray:
    if probabilities.min() < -NEGATIVE_TOL:
        raise NumericalError(
            f"solver produced a negative probability {probabilities.min():.3e}", "SINGULAR"
        )
    probabilities = np.clip(probabilities, 0.0, None)
    return probabilities / probabilities.sum()


def solve_direct(
    kernel: TransitionKernel,
    dense_cap: int = DEFAULTS.dense_cap,
    tol: float = DIRECT_RESIDUAL_TOL,
) -> StationaryDistribution:
    """
    Solve (P^T - I) pi = 0 with the last equation replaced by sum(pi) = 1.

    Raises:
        StateSpaceError: if the chain has more than `dense_cap` states
        NumericalError: if the system is singular or the residual exceeds `tol`
    """
    n_states = kernel.n_states
    if n_states > dense_cap:
        raise StateSpaceError(
            f"state space exceeds dense cap ({n_states} > {dense_cap})", "DENSE_CAP"
        )

    system = kernel.toarray().T - np.eye(n_states)
    system[-1, :] = 1.0
    rhs = np.zeros(n_states)
    rhs[-1] = 1.0

    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", linalg.LinAlgWarning)
            probabilities = linalg.solve(system, rhs)
    except (linalg.LinAlgError, linalg.LinAlgWarning) as e:
        raise NumericalError(f"singular balance system: {e}", "SINGULAR")

    probabilities = _clean(probabilities)
    residual = stationarity_residual(kernel, probabilities)
    if residual > tol:
        raise NumericalError(
            f"direct solve residual {residual:.3e} exceeds {tol:.0e}", "RESIDUAL", residual
        )
    logger.info(f"Direct solve: {n_states} states, residual {residual:.2e}")
    return StationaryDistribution(probabilities=probabilities, residual=residual, method="direct")


def solve_power(
    kernel: TransitionKernel,
    tol: float = DEFAULTS.power_tol,
    max_iters: int = DEFAULTS.power_max_iters,
) -> StationaryDistribution:
    """
    Iterate pi <- pi P from the uniform vector until the max-norm change is <= tol.

    Raises:
        NumericalError: "did not converge" after `max_iters` iterations
    """
    n_states = kernel.n_states
    transposed = kernel.matrix.T.tocsr()
    probabilities = np.full(n_states, 1.0 / n_states)
    change = np.inf

    for iteration in range(1, max_iters + 1):
        updated = transposed @ probabilities
        updated /= updated.sum()
        change = float(np.max(np.abs(updated - probabilities)))
        probabilities = updated
        if change <= tol:
            break
        if iteration % 100_000 == 0:
            logger.debug(f"Power iteration {iteration}: change {change:.3e}")
    else:
        raise NumericalError(
            f"did not converge after {max_iters} iterations (last change {change:.3e})",
            "NOT_CONVERGED",
            change,
        )

    residual = stationarity_residual(kernel, probabilities)
    logger.info(f"Power iteration: {iteration} iterations, residual {residual:.2e}")
    return StationaryDistribution(
        probabilities=probabilities, residual=residual, method="power", iterations=iteration
    )


def solve(
    kernel: TransitionKernel,
    dense_cap: int = DEFAULTS.dense_cap,
    tol: float = DEFAULTS.power_tol,
    max_iters: int = DEFAULTS.power_max_iters,
) -> StationaryDistribution:
    """Direct solve within the dense cap, power iteration above it."""
    if kernel.n_states <= dense_cap:
        return solve_direct(kernel, dense_cap)
    logger.info(f"{kernel.n_states} states exceed dense cap {dense_cap}; using power iteration")
    return solve_power(kernel, tol, max_iters)


def observables(
    dist: StationaryDistribution | np.ndarray,
    params: SystemParams,
    cap: int = DEFAULTS.state_cap,
) -> Observables:
    """
    Densities and flow estimators of a distribution over the params' state space.

    Raises:
        DimensionError: if the vector length is not (K+1)^N
    """
    probabilities = dist.probabilities if isinstance(dist, StationaryDistribution) else dist
    probabilities = np.asarray(probabilities, dtype=float)
    if probabilities.shape != (params.n_states,):
        raise DimensionError(
            f"distribution has shape {probabilities.shape}, "
            f"expected {state_space_label(params)} entries"
        )

    digits = state_digits(params, cap)
    density_by_type = np.column_stack(
        [probabilities @ (digits == k) for k in range(1, params.n_types + 1)]
    )
    density = density_by_type.sum(axis=1)

    hop = np.array((0.0,) + params.hop_probs)
    leave = np.array((0.0,) + params.exit_probs)
    movable = hop[digits[:, :-1]] * (digits[:, 1:] == 0)

    return Observables(
        density=density,
        density_by_type=density_by_type,
        flow_in=float(params.alpha * (1.0 - density[0])),
        flow_cross=probabilities @ movable,
        flow_out=float(probabilities @ leave[digits[:, -1]]),
    )


def check_flow_conservation(obs: Observables, tol: float = DEFAULTS.check_tol) -> None:
    """Raise NumericalError when the flow estimators disagree by more than `tol`."""
    mismatch = obs.flow_mismatch
    if mismatch > tol:
        raise NumericalError(
            f"flow estimators disagree by {mismatch:.3e}", "FLOW_MISMATCH", mismatch
        )


def analyze(
    params: SystemParams,
    cap: int = DEFAULTS.state_cap,
    dense_cap: int = DEFAULTS.dense_cap,
    tol: float = DEFAULTS.power_tol,
    max_iters: int = DEFAULTS.power_max_iters,
    force: bool = False,
) -> ExactResult:
    """validate -> build_kernel -> solve -> observables"""
    validate(params, force=force)
    kernel = build_kernel(params, cap)
    distribution = solve(kernel, dense_cap, tol, max_iters)
    return ExactResult(
        params=params,
        distribution=distribution,
        observables=observables(distribution, params, cap),
    )


def single_cell_density(alpha: float, beta: float) -> float:
    """Occupancy of a one-cell lattice with one type: alpha / (alpha + beta)."""
    return alpha / (alpha + beta)
