"""
Seeded Monte Carlo simulation of the process.

Random numbers come from numpy's Philox4x64-10 counter-based generator, so a
seed reproduces the same stream on every platform. Each step consumes exactly
N + 2 uniforms in a fixed order: arrival coin, type selector, one coin per
bond from left to right, exit coin. Events fire when enabled by the time-t
configuration and their coin falls below the event probability.
"""

import bisect
import itertools
import logging
import os
from collections import Counter
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import stats

from src.lattice.errors import ParameterError
from src.lattice.model import LatticeState, SystemParams, successors, validate
from src.settings import DEFAULTS

logger = logging.getLogger(__name__)

GENERATOR_NAME = "Philox4x64-10"
CHUNK_STEPS = 65_536
MIN_CHI_SQUARE_DRAWS = 10_000


class SimConfig(BaseModel):
    """Seed, run length and batch count of one simulation."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    seed: int = Field(default=DEFAULTS.seed, ge=0, lt=2**64)
    warmup_steps: int = Field(default=10_000, ge=0)
    sample_steps: int = Field(default=1_000_000, ge=2)
    batches: int = Field(default=20, ge=2)

    @model_validator(mode="after")
    def _batches_fit(self) -> "SimConfig":
        if self.sample_steps < self.batches:
            raise ValueError(
                f"sample_steps ({self.sample_steps}) must be at least batches ({self.batches})"
            )
        return self


@dataclass(frozen=True)
class StepRecord:
    """What happened during one step: arriving type, exiting type (0 = none), moved bonds."""

    arrived: int
    exited: int
    moves: tuple[int, ...]


@dataclass(frozen=True)
class SimEstimate:
    """
    Batch-means estimates of densities and flow.

    Batch arrays keep per-batch sums so independent replicas can be pooled.
    """

    density: np.ndarray
    density_stderr: np.ndarray
    density_by_type: np.ndarray
    flow: float
    flow_stderr: float
    flow_cross: np.ndarray
    flow_cross_stderr: np.ndarray
    flow_out: float
    flow_out_stderr: float
    total_steps: int
    seed: int
    batch_lengths: np.ndarray
    batch_occupancy: np.ndarray
    batch_type_occupancy: np.ndarray
    batch_arrivals: np.ndarray
    batch_crossings: np.ndarray
    batch_exits: np.ndarray


@dataclass(frozen=True)
class ChiSquareReport:
    state: LatticeState
    draws: int
    statistic: float
    dof: int
    critical_value: float
    p_value: float
    impossible: int
    passed: bool


@dataclass(frozen=True)
class _Tables:
    alpha: float
    cumulative: tuple[float, ...]
    hop: tuple[float, ...]
    leave: tuple[float, ...]

    @classmethod
    def from_params(cls, params: SystemParams) -> "_Tables":
        return cls(
            alpha=params.alpha,
            cumulative=tuple(itertools.accumulate(params.arrival_weights)),
            hop=(0.0,) + params.hop_probs,
            leave=(0.0,) + params.exit_probs,
        )


def make_rng(seed: int | np.random.SeedSequence) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def _advance(
    cells: Sequence[int], uniforms: Sequence[float], tables: _Tables
) -> tuple[list[int], int, int, list[int]]:
    n_cells = len(cells)
    updated = list(cells)

    arrived = 0
    if cells[0] == 0 and uniforms[0] < tables.alpha:
        n_types = len(tables.cumulative)
        arrived = min(bisect.bisect_right(tables.cumulative, uniforms[1]) + 1, n_types)
        updated[0] = arrived

    moved = []
    for i in range(n_cells - 1):
        k = cells[i]
        if k and not cells[i + 1] and uniforms[2 + i] < tables.hop[k]:
            updated[i] = 0
            updated[i + 1] = k
            moved.append(i)

    exited = cells[-1]
    if exited and uniforms[n_cells + 1] < tables.leave[exited]:
        updated[-1] = 0
    else:
        exited = 0
    return updated, arrived, exited, moved


def step(
    state: LatticeState, params: SystemParams, rng: np.random.Generator
) -> tuple[LatticeState, StepRecord]:
    """Advance one state by one synchronous step."""
    uniforms = rng.random(params.n_cells + 2).tolist()
    updated, arrived, exited, moved = _advance(state, uniforms, _Tables.from_params(params))
    return tuple(updated), StepRecord(arrived=arrived, exited=exited, moves=tuple(moved))


def _batch_bounds(sample_steps: int, batches: int) -> np.ndarray:
    """End offsets of equal contiguous blocks; the last block absorbs the remainder."""
    size = sample_steps // batches
    ends = np.arange(1, batches + 1) * size
    ends[-1] = sample_steps
    return ends


def _summarize(
    batch_lengths: np.ndarray,
    batch_type_occupancy: np.ndarray,
    batch_arrivals: np.ndarray,
    batch_crossings: np.ndarray,
    batch_exits: np.ndarray,
    seed: int,
    total_steps: int,
) -> SimEstimate:
    n_batches = batch_lengths.shape[0]
    steps = batch_lengths.sum()
    batch_occupancy = batch_type_occupancy.sum(axis=2)

    def stderr(sums: np.ndarray) -> np.ndarray:
        lengths = batch_lengths.reshape((-1,) + (1,) * (sums.ndim - 1))
        return np.std(sums / lengths, axis=0, ddof=1) / np.sqrt(n_batches)

    return SimEstimate(
        density=batch_occupancy.sum(axis=0) / steps,
        density_stderr=stderr(batch_occupancy),
        density_by_type=batch_type_occupancy.sum(axis=0) / steps,
        flow=float(batch_arrivals.sum() / steps),
        flow_stderr=float(stderr(batch_arrivals)),
        flow_cross=batch_crossings.sum(axis=0) / steps,
        flow_cross_stderr=stderr(batch_crossings),
        flow_out=float(batch_exits.sum() / steps),
        flow_out_stderr=float(stderr(batch_exits)),
        total_steps=total_steps,
        seed=seed,
        batch_lengths=batch_lengths,
        batch_occupancy=batch_occupancy,
        batch_type_occupancy=batch_type_occupancy,
        batch_arrivals=batch_arrivals,
        batch_crossings=batch_crossings,
        batch_exits=batch_exits,
    )


def run(params: SystemParams, config: SimConfig, force: bool = False) -> SimEstimate:
    """
    Simulate from the empty lattice, discard warmup, and estimate densities and flow.

    Occupancy is recorded per cell and type after every sampled step. Flow is
    counted at the entrance (the reported J), across each bond, and at the exit.
    """
    validate(params, force=force)
    tables = _Tables.from_params(params)
    rng = make_rng(config.seed)
    n_cells, n_types = params.n_cells, params.n_types

    ends = _batch_bounds(config.sample_steps, config.batches).tolist()
    batch_type_occupancy = np.zeros((config.batches, n_cells, n_types))
    batch_arrivals = np.zeros(config.batches)
    batch_crossings = np.zeros((config.batches, n_cells - 1))
    batch_exits = np.zeros(config.batches)

    cells = [0] * n_cells
    total = config.warmup_steps + config.sample_steps
    batch = 0
    sampled = 0
    occupancy = [[0] * n_types for _ in range(n_cells)]
    crossings = [0] * (n_cells - 1)
    arrivals = exits = 0

    for start in range(0, total, CHUNK_STEPS):
        count = min(CHUNK_STEPS, total - start)
        for index, uniforms in enumerate(rng.random((count, n_cells + 2)).tolist(), start):
            cells, arrived, exited, moved = _advance(cells, uniforms, tables)
            if index < config.warmup_steps:
                continue
            for i, value in enumerate(cells):
                if value:
                    occupancy[i][value - 1] += 1
            for i in moved:
                crossings[i] += 1
            arrivals += arrived > 0
            exits += exited > 0
            sampled += 1
            if sampled == ends[batch]:
                batch_type_occupancy[batch] = occupancy
                batch_arrivals[batch] = arrivals
                batch_crossings[batch] = crossings
                batch_exits[batch] = exits
                occupancy = [[0] * n_types for _ in range(n_cells)]
                crossings = [0] * (n_cells - 1)
                arrivals = exits = 0
                batch += 1

    lengths = np.diff([0, *ends]).astype(float)
    estimate = _summarize(
        lengths,
        batch_type_occupancy,
        batch_arrivals,
        batch_crossings,
        batch_exits,
        config.seed,
        total,
    )
    logger.info(
        f"Simulated {total} steps (seed {config.seed}): J={estimate.flow:.4f} "
        f"+/- {estimate.flow_stderr:.4f}"
    )
    return estimate


def pool_estimates(estimates: Sequence[SimEstimate], seed: int) -> SimEstimate:
    """Pool replicas: overall means from summed counts, errors from all batch means."""
    return _summarize(
        np.concatenate([e.batch_lengths for e in estimates]),
        np.concatenate([e.batch_type_occupancy for e in estimates]),
        np.concatenate([e.batch_arrivals for e in estimates]),
        np.concatenate([e.batch_crossings for e in estimates]),
        np.concatenate([e.batch_exits for e in estimates]),
        seed,
        sum(e.total_steps for e in estimates),
    )


def replica_seeds(seed: int, replicas: int) -> list[int]:
    """Independent 64-bit seeds spawned from one root seed."""
    children = np.random.SeedSequence(seed).spawn(replicas)
    return [int(child.generate_state(1, np.uint64)[0]) for child in children]


def run_replicas(
    params: SystemParams,
    config: SimConfig,
    replicas: int,
    force: bool = False,
    max_workers: int | None = None,
) -> SimEstimate:
    """Run independent replicas in a process pool and pool their batch means."""
    if replicas < 1:
        raise ParameterError(f"replicas must be at least 1, got {replicas}", "REPLICAS_RANGE")
    if replicas == 1:
        return run(params, config, force)

    seeds = replica_seeds(config.seed, replicas)
    configs = [config.model_copy(update={"seed": seed}) for seed in seeds]
    workers = max_workers or min(replicas, os.cpu_count() or 1)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        estimates = list(pool.map(run, [params] * replicas, configs, [force] * replicas))
    return pool_estimates(estimates, config.seed)


def chi_square_transition_test(
    params: SystemParams,
    state: LatticeState,
    draws: int,
    seed: int = DEFAULTS.seed,
    expected: Sequence[tuple[LatticeState, float]] | None = None,
    level: float = 0.999,
) -> ChiSquareReport:
    """
    Compare empirical successor frequencies of `state` with the model's probabilities.

    Args:
        expected: successor distribution to test against; the model's when omitted
        level: confidence level of the critical value

    Returns:
        Report with the Pearson statistic, degrees of freedom and verdict. Any
        observed successor outside the expected support fails the test.
    """
    if draws < MIN_CHI_SQUARE_DRAWS:
        raise ParameterError(
            f"draws must be at least {MIN_CHI_SQUARE_DRAWS}, got {draws}", "DRAWS_RANGE"
        )
    expected = list(expected) if expected is not None else successors(state, params)
    tables = _Tables.from_params(params)
    rng = make_rng(seed)

    counts: Counter[LatticeState] = Counter()
    for start in range(0, draws, CHUNK_STEPS):
        count = min(CHUNK_STEPS, draws - start)
        for uniforms in rng.random((count, params.n_cells + 2)).tolist():
            counts[tuple(_advance(state, uniforms, tables)[0])] += 1

    support = {target for target, _ in expected}
    impossible = sum(n for target, n in counts.items() if target not in support)
    observed = np.array([counts[target] for target, _ in expected], dtype=float)
    predicted = draws * np.array([probability for _, probability in expected])

    dof = len(expected) - 1
    if dof == 0:
        statistic, critical, p_value = 0.0, 0.0, 1.0
    else:
        statistic = float(np.sum((observed - predicted) ** 2 / predicted))
        critical = float(stats.chi2.ppf(level, dof))
        p_value = float(stats.chi2.sf(statistic, dof))

    return ChiSquareReport(
        state=tuple(state),
        draws=draws,
        statistic=statistic,
        dof=dof,
        critical_value=critical,
        p_value=p_value,
        impossible=impossible,
        passed=impossible == 0 and statistic <= critical,
    )
