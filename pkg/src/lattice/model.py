"""
Process definition for the multi-type synchronous exclusion process.

Holds the parameter models, the base-(K+1) state codec and the one-step
successor distribution under the parallel update rule. Every enabling
condition reads the time-t configuration only: a cell vacated during a step
cannot be entered during the same step.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Annotated, Any

import numpy as np
from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, WithJsonSchema
from scipy import sparse

from src.lattice.errors import NumericalError, ParameterError, StateSpaceError
from src.settings import DEFAULTS

logger = logging.getLogger(__name__)

LatticeState = tuple[int, ...]

WEIGHT_SUM_TOL = 1e-12
STOCHASTIC_TOL = 1e-12


def parse_probability(value: Any) -> Any:
    """
    Accept floats, ints, Fractions and exact rational strings such as "3/7".

    Strings are parsed with Fraction so "3/7" carries no decimal rounding
    before the final float conversion.
    """
    if isinstance(value, bool):
        raise ValueError("expected a number, got a boolean")
    if isinstance(value, Fraction):
        return float(value)
    if isinstance(value, str):
        try:
            return float(Fraction(value.strip()))
        except (ValueError, ZeroDivisionError):
            raise ValueError(f"not a number or rational: {value!r}")
    return value


_PROBABILITY_SCHEMA = {
    "anyOf": [
        {"type": "number", "minimum": 0, "maximum": 1},
        {"type": "string", "pattern": r"^\s*[0-9.]+(\s*/\s*[0-9]+)?\s*$"},
    ]
}

Probability = Annotated[
    float,
    BeforeValidator(parse_probability),
    Field(ge=0.0, le=1.0),
    WithJsonSchema(_PROBABILITY_SCHEMA),
]


class TypeSpec(BaseModel):
    """One particle type: arrival weight a_k, hop probability p_k, exit probability beta_k."""

    model_config = ConfigDict(frozen=True, populate_by_name=True, extra="forbid")

    arrival_weight: Probability = Field(alias="a")
    hop_prob: Probability = Field(alias="p")
    exit_prob: Probability = Field(alias="beta")


class SystemParams(BaseModel):
    """
    Full model parameters.

    The schema only bounds probabilities to [0, 1]; the open ranges that make
    the chain ergodic are checked by `validate`, so that forced exploratory
    runs can still be described by the same document.
    """

    model_config = ConfigDict(frozen=True, populate_by_name=True, extra="forbid")

    n_cells: int
    alpha: Probability
    types: tuple[TypeSpec, ...]

    @property
    def n_types(self) -> int:
        return len(self.types)

    @property
    def n_states(self) -> int:
        return (self.n_types + 1) ** self.n_cells

    @property
    def arrival_weights(self) -> tuple[float, ...]:
        return tuple(spec.arrival_weight for spec in self.types)

    @property
    def hop_probs(self) -> tuple[float, ...]:
        return tuple(spec.hop_prob for spec in self.types)

    @property
    def exit_probs(self) -> tuple[float, ...]:
        return tuple(spec.exit_prob for spec in self.types)

    def to_config(self) -> dict[str, Any]:
        """Return the canonical configuration document for these parameters."""
        return self.model_dump(by_alias=True, mode="json")


@dataclass(frozen=True)
class EventSet:
    """
    Independent Bernoulli events enabled in one configuration.

    `moves` holds zero-based indices i of occupied cells whose right
    neighbour i + 1 is vacant. Each event writes its own pair of cells.
    """

    arrival: bool
    moves: tuple[int, ...]
    exit: bool


@dataclass(frozen=True)
class TransitionKernel:
    """Sparse row-stochastic matrix over the codec-ordered state space."""

    params: SystemParams
    matrix: sparse.csr_matrix

    @property
    def n_states(self) -> int:
        return self.matrix.shape[0]

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=1)).ravel()

    def max_row_deviation(self) -> float:
        return float(np.max(np.abs(self.row_sums() - 1.0)))

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()


def validate(params: SystemParams, force: bool = False) -> SystemParams:
    """
    Check parameter invariants and return the params unchanged.

    Raises ParameterError for the first violated invariant. With `force`, the
    ergodicity ranges (alpha in (0, 1), p_k > 0, beta_k > 0) only produce a
    warning; structural invariants are always enforced.
    """
    if params.n_cells < 1:
        raise ParameterError(f"n_cells must be at least 1, got {params.n_cells}", "N_CELLS_RANGE")
    if not params.types:
        raise ParameterError("at least one particle type is required", "NO_TYPES")

    problems: list[ParameterError] = []
    if not 0.0 < params.alpha < 1.0:
        problems.append(
            ParameterError(f"alpha out of open interval (0, 1): {params.alpha}", "ALPHA_RANGE")
        )
    for k, spec in enumerate(params.types, start=1):
        if not 0.0 < spec.arrival_weight <= 1.0:
            raise ParameterError(
                f"arrival weight a_{k} must be in (0, 1], got {spec.arrival_weight}",
                "WEIGHT_RANGE",
            )
        if not 0.0 < spec.hop_prob <= 1.0:
            problems.append(
                ParameterError(
                    f"hop probability p_{k} must be in (0, 1], got {spec.hop_prob}", "HOP_RANGE"
                )
            )
        if not 0.0 < spec.exit_prob <= 1.0:
            problems.append(
                ParameterError(
                    f"exit probability beta_{k} must be in (0, 1], got {spec.exit_prob}",
                    "EXIT_RANGE",
                )
            )

    total = math.fsum(params.arrival_weights)
    if abs(total - 1.0) > WEIGHT_SUM_TOL:
        raise ParameterError(f"arrival weights must sum to 1, got {total!r}", "WEIGHT_SUM")

    if problems:
        if not force:
            raise problems[0]
        for problem in problems:
            logger.warning(f"Forced run with non-ergodic parameters: {problem.message}")
    return params


def state_space_label(params: SystemParams) -> str:
    return f"{params.n_types + 1}^{params.n_cells}"


def check_state_space(params: SystemParams, cap: int = DEFAULTS.state_cap) -> int:
    """Return the state count, raising StateSpaceError above `cap`."""
    base = params.n_types + 1
    n_states = 1
    for _ in range(params.n_cells):
        n_states *= base
        if n_states > cap:
            raise StateSpaceError(
                f"state space too large; use simulator "
                f"({state_space_label(params)} states exceed cap {cap})"
            )
    return n_states


def encode(state: LatticeState, n_types: int) -> int:
    """Map a state to its base-(K+1) code, cell 1 most significant."""
    base = n_types + 1
    code = 0
    for value in state:
        if not 0 <= value <= n_types:
            raise ParameterError(f"cell value {value} outside 0..{n_types}", "STATE_RANGE")
        code = code * base + value
    return code


def decode(code: int, n_cells: int, n_types: int) -> LatticeState:
    """Inverse of `encode`."""
    base = n_types + 1
    if not 0 <= code < base**n_cells:
        raise ParameterError(f"state code {code} outside the state space", "STATE_RANGE")
    cells = [0] * n_cells
    for i in range(n_cells - 1, -1, -1):
        code, cells[i] = divmod(code, base)
    return tuple(cells)


def enumerate_states(params: SystemParams, cap: int = DEFAULTS.state_cap) -> list[LatticeState]:
    """All (K+1)^N states in ascending codec order."""
    check_state_space(params, cap)
    return list(itertools.product(range(params.n_types + 1), repeat=params.n_cells))


def state_digits(params: SystemParams, cap: int = DEFAULTS.state_cap) -> np.ndarray:
    """(M, N) integer array whose row l is decode(l)."""
    n_states = check_state_space(params, cap)
    base = params.n_types + 1
    powers = base ** np.arange(params.n_cells - 1, -1, -1, dtype=np.int64)
    codes = np.arange(n_states, dtype=np.int64)
    return (codes[:, None] // powers[None, :]) % base


def _check_state(state: LatticeState, params: SystemParams) -> None:
    if len(state) != params.n_cells:
        raise ParameterError(
            f"state has {len(state)} cells, expected {params.n_cells}", "STATE_RANGE"
        )
    for value in state:
        if not 0 <= value <= params.n_types:
            raise ParameterError(f"cell value {value} outside 0..{params.n_types}", "STATE_RANGE")


def enabled_events(state: LatticeState) -> EventSet:
    """Events enabled by the time-t configuration."""
    last = len(state) - 1
    moves = tuple(i for i in range(last) if state[i] and not state[i + 1])
    return EventSet(arrival=state[0] == 0, moves=moves, exit=state[last] != 0)


def successors(state: LatticeState, params: SystemParams) -> list[tuple[LatticeState, float]]:
    """
    One-step successor distribution of `state`.

    The distribution is the product measure over the enabled events; an
    arrival additionally branches over the particle types with weights a_k.
    Zero-probability branches are dropped and identical successors merged.

    Returns:
        (state, probability) pairs in ascending codec order
    """
    _check_state(state, params)
    events = enabled_events(state)
    last = params.n_cells - 1
    hop = (0.0,) + params.hop_probs
    leave = (0.0,) + params.exit_probs

    # Each entry lists the outcomes of one event as (cell writes, probability).
    outcomes: list[list[tuple[tuple[tuple[int, int], ...], float]]] = []
    if events.arrival:
        arrival = [((), 1.0 - params.alpha)]
        for k, weight in enumerate(params.arrival_weights, start=1):
            arrival.append((((0, k),), params.alpha * weight))
        outcomes.append(arrival)
    for i in events.moves:
        k = state[i]
        outcomes.append([((), 1.0 - hop[k]), (((i, 0), (i + 1, k)), hop[k])])
    if events.exit:
        k = state[last]
        outcomes.append([((), 1.0 - leave[k]), (((last, 0),), leave[k])])

    distribution: dict[LatticeState, float] = {}
    for combination in itertools.product(*outcomes):
        cells = list(state)
        probability = 1.0
        for writes, p in combination:
            probability *= p
            for index, value in writes:
                cells[index] = value
        if probability == 0.0:
            continue
        target = tuple(cells)
        distribution[target] = distribution.get(target, 0.0) + probability

    return sorted(distribution.items(), key=lambda item: encode(item[0], params.n_types))


def build_kernel(params: SystemParams, cap: int = DEFAULTS.state_cap) -> TransitionKernel:
    """
    Assemble the sparse transition matrix; row l holds successors(decode(l)).

    Raises:
        StateSpaceError: if (K+1)^N exceeds `cap`
        NumericalError: if a row fails to sum to 1 within 1e-12
    """
    states = enumerate_states(params, cap)
    n_states = len(states)
    rows: list[int] = []
    cols: list[int] = []
    data: list[float] = []
    for row, state in enumerate(states):
        for target, probability in successors(state, params):
            rows.append(row)
            cols.append(encode(target, params.n_types))
            data.append(probability)

    matrix = sparse.csr_matrix((data, (rows, cols)), shape=(n_states, n_states))
    kernel = TransitionKernel(params=params, matrix=matrix)

    deviation = kernel.max_row_deviation()
    if deviation > STOCHASTIC_TOL:
        raise NumericalError(
            f"kernel row sums deviate from 1 by {deviation:.3e}", "NOT_STOCHASTIC", deviation
        )
    logger.info(f"Built kernel: {n_states} states, {matrix.nnz} transitions")
    return kernel
