"""
Tests for the process definition: parameters, codec and one-step kernel.
"""

import itertools
import logging
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.lattice.errors import ParameterError, StateSpaceError
from src.lattice.model import (
    SystemParams,
    TypeSpec,
    build_kernel,
    check_state_space,
    decode,
    enabled_events,
    encode,
    enumerate_states,
    state_digits,
    successors,
    validate,
)


def make_params(n_cells, alpha, types):
    return SystemParams(
        n_cells=n_cells,
        alpha=alpha,
        types=tuple(TypeSpec(arrival_weight=a, hop_prob=p, exit_prob=b) for a, p, b in types),
    )


@st.composite
def systems(draw, max_cells=4, max_types=2):
    """Random ergodic systems with weights normalized to sum to one."""
    n_cells = draw(st.integers(1, max_cells))
    n_types = draw(st.integers(1, max_types))
    probability = st.floats(0.05, 1.0)
    raw = [draw(st.floats(0.1, 1.0)) for _ in range(n_types)]
    weights = [w / sum(raw) for w in raw]
    weights[-1] = 1.0 - sum(weights[:-1])
    return make_params(
        n_cells,
        draw(st.floats(0.05, 0.95)),
        [(w, draw(probability), draw(probability)) for w in weights],
    )


class TestParameters:
    """Parameter models and validation."""

    def test_rational_strings_parse_exactly(self):
        """Test that "3/7" strings become the float of the exact rational."""
        params = SystemParams.model_validate(
            {
                "n_cells": 2,
                "alpha": "2/5",
                "types": [
                    {"a": "3/7", "p": "3/5", "beta": "3/10"},
                    {"a": "4/7", "p": 0.8, "beta": 0.4},
                ],
            }
        )
        assert params.alpha == float(Fraction(2, 5))
        assert params.arrival_weights[0] == float(Fraction(3, 7))
        assert params.n_types == 2
        assert params.n_states == 9

    def test_to_config_uses_aliases(self):
        """Test that the canonical config uses the short keys."""
        params = make_params(1, 0.5, [(1.0, 0.5, 0.5)])
        config = params.to_config()
        assert config["types"] == [{"a": 1.0, "p": 0.5, "beta": 0.5}]
        assert SystemParams.model_validate(config) == params

    def test_validate_accepts_unit_probabilities(self):
        """Test that p_k = 1 and beta_k = 1 are allowed."""
        params = make_params(3, 0.5, [(1.0, 1.0, 1.0)])
        assert validate(params) is params

    @pytest.mark.parametrize(
        "n_cells,alpha,types,code",
        [
            (0, 0.5, [(1.0, 0.5, 0.5)], "N_CELLS_RANGE"),
            (2, 0.5, [], "NO_TYPES"),
            (2, 0.0, [(1.0, 0.5, 0.5)], "ALPHA_RANGE"),
            (2, 1.0, [(1.0, 0.5, 0.5)], "ALPHA_RANGE"),
            (2, 0.5, [(1.0, 0.0, 0.5)], "HOP_RANGE"),
            (2, 0.5, [(1.0, 0.5, 0.0)], "EXIT_RANGE"),
            (2, 0.5, [(0.0, 0.5, 0.5), (1.0, 0.5, 0.5)], "WEIGHT_RANGE"),
            (2, 0.5, [(0.4, 0.5, 0.5), (0.5, 0.5, 0.5)], "WEIGHT_SUM"),
        ],
    )
    def test_validate_rejects(self, n_cells, alpha, types, code):
        """Test that each violated invariant raises with its own code."""
        with pytest.raises(ParameterError) as exc_info:
            validate(make_params(n_cells, alpha, types))
        assert exc_info.value.code == code
        assert exc_info.value.exit_status == 2

    def test_force_downgrades_ergodicity_checks(self, caplog):
        """Test that --force turns range errors into warnings."""
        params = make_params(2, 0.0, [(1.0, 0.5, 0.5)])
        with caplog.at_level(logging.WARNING):
            assert validate(params, force=True) is params
        assert "alpha out of open interval" in caplog.text

    def test_force_keeps_weight_sum(self):
        """Test that --force never relaxes the weight sum."""
        with pytest.raises(ParameterError, match="sum to 1"):
            validate(make_params(2, 0.5, [(0.3, 0.5, 0.5), (0.3, 0.5, 0.5)]), force=True)


class TestCodec:
    """Base-(K+1) state codec."""

    def test_cell_one_is_most_significant(self):
        """Test the big-endian digit order."""
        assert encode((1, 0), 2) == 3
        assert encode((0, 2), 2) == 2
        assert encode((2, 2, 1), 2) == 25
        assert decode(25, 3, 2) == (2, 2, 1)

    def test_enumeration_is_codec_order(self):
        """Test that enumerate_states lists states by ascending code."""
        params = make_params(3, 0.5, [(0.5, 0.5, 0.5), (0.5, 0.5, 0.5)])
        states = enumerate_states(params)
        assert [encode(s, 2) for s in states] == list(range(27))
        assert np.array_equal(state_digits(params), np.array(states))

    def test_out_of_range_values(self):
        """Test that invalid digits and codes raise STATE_RANGE."""
        with pytest.raises(ParameterError, match="outside"):
            encode((3, 0), 2)
        with pytest.raises(ParameterError, match="outside"):
            decode(9, 2, 2)

    def test_state_space_cap(self):
        """Test that enumeration refuses spaces above the cap."""
        params = make_params(21, 0.5, [(1.0, 0.5, 0.5)])
        with pytest.raises(StateSpaceError, match="use simulator"):
            enumerate_states(params, cap=2**20)

    def test_long_lattice_above_cap(self):
        """Test that a ten-thousand-cell, two-type space is refused by size alone."""
        params = make_params(10_000, 0.5, [(0.5, 0.5, 0.5), (0.5, 0.7, 0.5)])
        with pytest.raises(StateSpaceError, match=r"use simulator \(3\^10000 states") as exc_info:
            check_state_space(params)
        assert exc_info.value.code == "STATE_SPACE_TOO_LARGE"
        assert exc_info.value.exit_status == 2

    def test_cap_boundary_is_inclusive(self):
        """Test that a space of exactly cap states is allowed."""
        params = make_params(4, 0.5, [(1.0, 0.5, 0.5)])
        assert check_state_space(params, cap=16) == 16
        with pytest.raises(StateSpaceError):
            check_state_space(params, cap=15)


class TestSuccessors:
    """One-step successor distribution under the parallel rule."""

    @pytest.fixture
    def two_types(self):
        return make_params(2, 0.4, [(0.25, 0.6, 0.3), (0.75, 0.8, 0.5)])

    def test_enabled_events(self):
        """Test enabling conditions read the time-t configuration."""
        events = enabled_events((0, 1, 0, 2))
        assert events.arrival
        assert events.moves == (1,)
        assert events.exit

    def test_empty_lattice(self, two_types):
        """Test that only the arrival event fires from the empty lattice."""
        probabilities = dict(successors((0, 0), two_types))
        assert probabilities[(0, 0)] == pytest.approx(0.6)
        assert probabilities[(1, 0)] == pytest.approx(0.4 * 0.25)
        assert probabilities[(2, 0)] == pytest.approx(0.4 * 0.75)

    def test_exit_uses_type_in_last_cell(self, two_types):
        """Test that the exit probability is beta of the exiting particle."""
        probabilities = dict(successors((1, 2), two_types))
        assert probabilities == pytest.approx({(1, 0): 0.5, (1, 2): 0.5})

    def test_vacated_cell_not_refilled_in_same_step(self, two_types):
        """Test that a particle leaving cell 1 does not let an arrival in."""
        probabilities = dict(successors((1, 0), two_types))
        assert set(probabilities) == {(1, 0), (0, 1)}
        assert probabilities[(0, 1)] == pytest.approx(0.6)

    def test_arrival_and_exit_together(self, two_types):
        """Test that arrival and exit are independent in one step."""
        probabilities = dict(successors((0, 2), two_types))
        assert probabilities[(1, 0)] == pytest.approx(0.4 * 0.25 * 0.5)
        assert probabilities[(2, 2)] == pytest.approx(0.4 * 0.75 * 0.5)
        assert probabilities[(0, 2)] == pytest.approx(0.6 * 0.5)
        assert sum(probabilities.values()) == pytest.approx(1.0)

    def test_single_cell(self):
        """Test the single-cell chain [[1-alpha, alpha], [beta, 1-beta]]."""
        params = make_params(1, 0.3, [(1.0, 0.9, 0.2)])
        assert build_kernel(params).toarray() == pytest.approx(np.array([[0.7, 0.3], [0.2, 0.8]]))

    def test_deterministic_limit_has_two_successors(self):
        """Test that with p = beta = 1 only the arrival coin is random."""
        params = make_params(4, 0.3, [(1.0, 1.0, 1.0)])
        for state in enumerate_states(params):
            targets = successors(state, params)
            assert len(targets) == (2 if state[0] == 0 else 1)

    def test_sorted_in_codec_order(self, two_types):
        """Test that successors are listed by ascending code."""
        codes = [encode(s, 2) for s, _ in successors((0, 1), two_types)]
        assert codes == sorted(codes)

    def test_wrong_length_state(self, two_types):
        """Test that a state of the wrong length is rejected."""
        with pytest.raises(ParameterError):
            successors((0, 0, 0), two_types)


class TestKernel:
    """Sparse transition matrix."""

    @pytest.mark.parametrize("n_cells,n_types", itertools.product(range(1, 5), range(1, 3)))
    def test_rows_sum_to_one_exhaustively(self, n_cells, n_types):
        """Test every row of every small kernel sums to 1 within 1e-12."""
        rng = np.random.Generator(np.random.Philox(n_cells * 10 + n_types))
        weights = rng.dirichlet(np.ones(n_types))
        weights[-1] = 1.0 - weights[:-1].sum()
        params = make_params(
            n_cells,
            float(rng.uniform(0.05, 0.95)),
            [(float(w), float(rng.uniform(0.05, 1)), float(rng.uniform(0.05, 1))) for w in weights],
        )
        kernel = build_kernel(params)
        assert kernel.n_states == (n_types + 1) ** n_cells
        assert np.max(np.abs(kernel.row_sums() - 1.0)) <= 1e-12
        assert kernel.matrix.min() >= 0.0

    def test_row_matches_successors(self):
        """Test that row l holds successors(decode(l))."""
        params = make_params(3, 0.4, [(0.5, 0.6, 0.3), (0.5, 0.8, 0.5)])
        dense = build_kernel(params).toarray()
        for code, state in enumerate(enumerate_states(params)):
            for target, probability in successors(state, params):
                assert dense[code, encode(target, 2)] == pytest.approx(probability)

    def test_cap_is_enforced(self):
        """Test that build_kernel refuses a state space above the cap."""
        params = make_params(3, 0.4, [(1.0, 0.5, 0.5)])
        with pytest.raises(StateSpaceError):
            build_kernel(params, cap=4)

    @pytest.mark.property
    @settings(max_examples=40, deadline=None)
    @given(systems())
    def test_random_kernels_are_stochastic(self, params):
        """Test row sums on randomized instances."""
        kernel = build_kernel(params)
        assert kernel.max_row_deviation() <= 1e-12

    def test_single_type_two_cell_oracle(self):
        """Test the two-cell, one-type kernel entrywise against a hand-written matrix."""
        alpha, hop, leave = 0.3, 0.7, 0.4
        expected = np.array(
            [
                [1 - alpha, 0.0, alpha, 0.0],
                [
                    (1 - alpha) * leave,
                    (1 - alpha) * (1 - leave),
                    alpha * leave,
                    alpha * (1 - leave),
                ],
                [0.0, hop, 1 - hop, 0.0],
                [0.0, 0.0, leave, 1 - leave],
            ]
        )
        kernel = build_kernel(make_params(2, alpha, [(1.0, hop, leave)]))
        assert np.allclose(kernel.toarray(), expected, atol=1e-15)

    def test_two_type_two_cell_oracle(self):
        """Test the two-cell, two-type kernel entrywise against a hand-written matrix."""
        alpha, (a1, a2), (p1, p2), (b1, b2) = 0.4, (0.25, 0.75), (0.6, 0.8), (0.3, 0.5)
        q = 1 - alpha
        # Rows and columns: (0,0) (0,1) (0,2) (1,0) (1,1) (1,2) (2,0) (2,1) (2,2)
        expected = np.array(
            [
                [q, 0, 0, alpha * a1, 0, 0, alpha * a2, 0, 0],
                [
                    q * b1,
                    q * (1 - b1),
                    0,
                    alpha * a1 * b1,
                    alpha * a1 * (1 - b1),
                    0,
                    alpha * a2 * b1,
                    alpha * a2 * (1 - b1),
                    0,
                ],
                [
                    q * b2,
                    0,
                    q * (1 - b2),
                    alpha * a1 * b2,
                    0,
                    alpha * a1 * (1 - b2),
                    alpha * a2 * b2,
                    0,
                    alpha * a2 * (1 - b2),
                ],
                [0, p1, 0, 1 - p1, 0, 0, 0, 0, 0],
                [0, 0, 0, b1, 1 - b1, 0, 0, 0, 0],
                [0, 0, 0, b2, 0, 1 - b2, 0, 0, 0],
                [0, 0, p2, 0, 0, 0, 1 - p2, 0, 0],
                [0, 0, 0, 0, 0, 0, b1, 1 - b1, 0],
                [0, 0, 0, 0, 0, 0, b2, 0, 1 - b2],
            ],
            dtype=float,
        )
        params = make_params(2, alpha, [(a1, p1, b1), (a2, p2, b2)])
        assert np.allclose(build_kernel(params).toarray(), expected, rtol=0, atol=1e-15)

    def test_ten_cells_two_types(self):
        """Test the size of a larger enumerated space."""
        params = make_params(10, 0.5, [(0.5, 0.5, 0.5), (0.5, 0.5, 0.5)])
        assert len(enumerate_states(params)) == 59049


class TestTransitionInvariants:
    """Structural properties of every positive-probability transition."""

    @pytest.mark.property
    @settings(max_examples=40, deadline=None)
    @given(systems(max_cells=5, max_types=3), st.data())
    def test_particles_move_one_cell_right_keeping_type(self, params, data):
        """Test exclusion, type conservation and the one-in, one-out particle count."""
        state = tuple(
            data.draw(
                st.lists(
                    st.integers(0, params.n_types),
                    min_size=params.n_cells,
                    max_size=params.n_cells,
                )
            )
        )
        for target, probability in successors(state, params):
            assert probability > 0.0
            for i, value in enumerate(target):
                if value == 0:
                    continue
                stayed = state[i] == value
                moved_in = i > 0 and state[i - 1] == value and state[i] == 0
                arrived = i == 0 and state[0] == 0
                assert stayed or moved_in or arrived
            before = sum(v > 0 for v in state)
            after = sum(v > 0 for v in target)
            assert before - 1 <= after <= before + 1
