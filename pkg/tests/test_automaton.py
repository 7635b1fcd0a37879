"""Tests for flat automata: cell rules, direct and staged stepping, verification.

This module tests:
    - CellRule construction, validation and evaluation
    - step_direct() on hand-evaluated slices
    - The shift stage and the pointwise stage separately
    - evaluate_global() trajectories (light cone, fixed points, rotations)
    - verify_factorization() in exhaustive and random mode, including a
      deliberately corrupted argument order
    - Staged/direct equivalence on generated rule tables (hypothesis)
"""

from collections.abc import Sequence

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nested_automata.automaton import (
    MAX_RECORDED_MISMATCHES,
    Alphabet,
    Automaton,
    CapExceededError,
    CellRule,
    HistoryError,
    RuleError,
    ShiftStage,
    Trajectory,
    VerificationReport,
    apply_pointwise_stage,
    build_shift_stage,
    configuration_count,
    enumerate_windows,
    evaluate_direct,
    evaluate_global,
    iterate_global,
    step_direct,
    step_staged,
    verify_factorization,
)
from nested_automata.spacetime import Boundary, Shift, ShiftStructure, SpaceTimeFrame

BINARY = Alphabet(2)
LEFT_RIGHT = ShiftStructure((Shift((-1,)), Shift((1,))))


def bits(text: str) -> np.ndarray:
    """Digit string -> 1-D symbol array."""
    return np.array([int(c) for c in text], dtype=np.int64)


def as_text(plane: np.ndarray) -> str:
    """Width-1 slice -> digit string."""
    return "".join(str(int(v)) for v in plane[..., 0].reshape(-1))


def window(automaton: Automaton, *slices: str) -> Trajectory:
    return Trajectory.from_window(automaton.frame, [bits(s) for s in slices])


def stage_of(*slices: str) -> ShiftStage:
    return ShiftStage(
        np.stack([bits(s) for s in slices]),
        np.zeros((0, len(slices[0])), dtype=np.int64),
    )


# =============================================================================
# A. Cell Rule Tests
# =============================================================================


@pytest.mark.unit
class TestCellRule:
    """Tests for CellRule validation and scalar evaluation."""

    def test_builtin_xor(self) -> None:
        """Test that xor sums its arguments modulo 2."""
        rule = CellRule.from_builtin("xor", BINARY, 3)

        assert rule.evaluate((1, 1, 1)) == ((1,), ())
        assert rule.evaluate((1, 0, 1)) == ((0,), ())

    def test_builtin_threshold(self) -> None:
        """Test that threshold compares the argument sum against theta."""
        rule = CellRule.from_builtin("threshold", BINARY, 3, parameter=2)

        assert rule.evaluate((1, 0, 1)) == ((1,), ())
        assert rule.evaluate((0, 0, 1)) == ((0,), ())

    def test_builtin_sum_mod(self) -> None:
        """Test that sum_mod reduces modulo |S|."""
        rule = CellRule.from_builtin("sum_mod", Alphabet(3), 2)

        assert rule.evaluate((2, 2)) == ((1,), ())

    def test_builtin_projection_reads_inputs(self) -> None:
        """Test that projection indexes state arguments, then inputs."""
        rule = CellRule.from_builtin(
            "projection", Alphabet(3, inputs=3), 1, arity_input=1, parameter=2
        )

        assert rule.evaluate((1,), (2,)) == ((2,), (0,))

    def test_builtin_outputs_first_component(self) -> None:
        """Test that built-in outputs repeat the first state component mod |Y|."""
        rule = CellRule.from_builtin("xor", Alphabet(2, inputs=2, outputs=2), 1, 2)

        assert rule.evaluate((1,), (0, 0)) == ((1,), (1, 1))

    def test_table_mixed_radix_index(self) -> None:
        """Test that states are the high digits and inputs the low digits."""
        rule = CellRule.from_table(
            Alphabet(2, inputs=2, outputs=2),
            1,
            [0, 1, 1, 0],
            arity_input=1,
            output=[[0], [1], [1], [0]],
        )

        assert rule.table_index((1,), (0,)) == 2
        assert rule.evaluate((1,), (0,)) == ((1,), (1,))
        assert rule.kind == "table"

    def test_table_vector_rows(self) -> None:
        """Test that list rows give a vector-valued rule."""
        rule = CellRule.from_table(BINARY, 1, [[0, 1], [1, 1]])

        assert rule.state_width == 2
        assert rule.evaluate((1,)) == ((1, 1), ())

    def test_table_size(self) -> None:
        """Test |S|^k x |X|^l."""
        rule = CellRule.from_builtin("xor", Alphabet(3, inputs=2), 2, 1)

        assert rule.table_size == 18

    @pytest.mark.parametrize(
        ("kwargs", "match"),
        [
            ({"builtin": "majority"}, "Unknown built-in"),
            ({"builtin": "threshold"}, "requires a parameter"),
            ({"builtin": "xor", "parameter": 1}, "takes no parameter"),
            ({"builtin": "identity", "state_width": 1}, "identity"),
            ({"builtin": "constant", "parameter": 5}, "constant symbol"),
            ({"builtin": "projection", "parameter": 3}, "projection index"),
        ],
    )
    def test_builtin_validation(self, kwargs: dict, match: str) -> None:
        """Test that malformed built-in rules are rejected."""
        with pytest.raises(RuleError, match=match):
            CellRule(alphabet=BINARY, arity_state=2, **kwargs)

    def test_table_wrong_length(self) -> None:
        """Test that the table must cover every argument tuple."""
        with pytest.raises(RuleError, match="expected"):
            CellRule.from_table(BINARY, 2, [0, 1, 1])

    def test_table_symbol_out_of_alphabet(self) -> None:
        """Test that table rows stay in the state alphabet."""
        with pytest.raises(RuleError, match="leaves the state alphabet"):
            CellRule.from_table(BINARY, 1, [0, 2])

    def test_needs_exactly_one_representation(self) -> None:
        """Test that a rule without builtin, table or function is rejected."""
        with pytest.raises(RuleError, match="exactly one"):
            CellRule(alphabet=BINARY, arity_state=1)

    def test_evaluate_arity_mismatch(self) -> None:
        """Test that evaluate() checks the argument counts."""
        rule = CellRule.from_builtin("xor", BINARY, 2)

        with pytest.raises(RuleError, match="expects 2 state"):
            rule.evaluate((1,))


@pytest.mark.unit
class TestAutomatonValidation:
    """Tests for Automaton cross-field checks."""

    def test_default_taps_are_position_matched(self) -> None:
        """Test that argument i reads component min(i, m)."""
        rule = CellRule.from_builtin("identity", BINARY, 2, state_width=2)
        automaton = Automaton(SpaceTimeFrame((4,)), LEFT_RIGHT, rule)

        assert automaton.taps == (1, 2)
        assert automaton.slice_shape() == (4, 2)

    def test_rule_arity_must_match_structure(self) -> None:
        """Test that k and l of rule and structure agree."""
        with pytest.raises(RuleError, match="does not match structure"):
            Automaton(
                SpaceTimeFrame((4,)),
                LEFT_RIGHT,
                CellRule.from_builtin("xor", BINARY, 3),
            )

    def test_taps_out_of_range(self) -> None:
        """Test that taps address existing components."""
        with pytest.raises(RuleError, match="out of range"):
            Automaton(
                SpaceTimeFrame((4,)),
                LEFT_RIGHT,
                CellRule.from_builtin("xor", BINARY, 2),
                taps=(1, 2),
            )

    def test_boundary_symbol_must_be_state(self) -> None:
        """Test that the fixed boundary symbol belongs to S."""
        with pytest.raises(RuleError, match="boundary symbol"):
            Automaton(
                SpaceTimeFrame((4,), boundary=Boundary.fixed(2)),
                LEFT_RIGHT,
                CellRule.from_builtin("xor", BINARY, 2),
            )

    def test_shift_deeper_than_horizon(self) -> None:
        """Test that the horizon covers the deepest shift."""
        with pytest.raises(ValueError, match="horizon"):
            Automaton(
                SpaceTimeFrame((4,)),
                ShiftStructure((Shift((0,), 2),)),
                CellRule.from_builtin("identity", BINARY, 1),
            )


# =============================================================================
# B. Direct Stepping Tests
# =============================================================================


@pytest.mark.unit
class TestStepDirect:
    """Tests for the local recurrence."""

    def test_xor_stencil(self, xor_automaton: Automaton) -> None:
        """Test xor, N=8 periodic: 00010000 -> 00101000."""
        result = step_direct(xor_automaton, window(xor_automaton, "00010000"), 1)

        assert as_text(result.states) == "00101000"
        assert result.outputs.shape == (8, 0)

    def test_identity_maps_slice_to_itself(self, identity_automaton: Automaton) -> None:
        """Test that identity with a zero shift is a fixed point."""
        result = step_direct(
            identity_automaton, window(identity_automaton, "012210"), 1
        )

        assert as_text(result.states) == "012210"

    def test_projection_rotates(self) -> None:
        """Test that projection(1) with dr=1 rotates the slice by one cell."""
        automaton = Automaton(
            SpaceTimeFrame((5,)),
            ShiftStructure((Shift((1,)),)),
            CellRule.from_builtin("projection", BINARY, 1, parameter=1),
        )

        result = step_direct(automaton, window(automaton, "11000"), 1)

        assert as_text(result.states) == "01100"

    def test_missing_history(self, xor_automaton: Automaton) -> None:
        """Test that a step without the previous slice fails."""
        with pytest.raises(HistoryError, match="missing slices"):
            step_direct(xor_automaton, window(xor_automaton, "00010000"), 2)


# =============================================================================
# C. Shift Stage and Pointwise Stage Tests
# =============================================================================


@pytest.mark.unit
class TestStages:
    """Tests for build_shift_stage() and apply_pointwise_stage()."""

    def test_zero_shift_copies_previous_slice(
        self, identity_automaton: Automaton
    ) -> None:
        """Test that a single (0, 1) shift yields the previous slice."""
        stage = build_shift_stage(
            identity_automaton, window(identity_automaton, "012210"), 1
        )

        assert stage.state_args.tolist() == [bits("012210").tolist()]

    def test_left_right_shift_copies(self, xor_automaton: Automaton) -> None:
        """Test shifts (-1, 1), (+1, 1) on 00010000 -> (00100000, 00001000)."""
        stage = build_shift_stage(xor_automaton, window(xor_automaton, "00010000"), 1)

        assert stage.state_args.tolist() == [
            bits("00100000").tolist(),
            bits("00001000").tolist(),
        ]
        assert stage.input_args.shape == (0, 8)

    def test_fixed_boundary_enters_at_edge(self) -> None:
        """Test fixed(0), shift (+1, 1), slice 1111 -> 0111."""
        automaton = Automaton(
            SpaceTimeFrame((4,), boundary=Boundary.fixed(0)),
            ShiftStructure((Shift((1,)),)),
            CellRule.from_builtin("projection", BINARY, 1, parameter=1),
        )

        stage = build_shift_stage(automaton, window(automaton, "1111"), 1)

        assert stage.state_args.tolist() == [bits("0111").tolist()]

    def test_pointwise_xor(self) -> None:
        """Test xor on (00100000, 00001000) -> 00101000."""
        rule = CellRule.from_builtin("xor", BINARY, 2)

        result = apply_pointwise_stage(rule, stage_of("00100000", "00001000"))

        assert as_text(result.states) == "00101000"

    def test_pointwise_constant(self) -> None:
        """Test that a constant rule yields a uniform slice."""
        rule = CellRule.from_builtin("constant", Alphabet(3), 2, parameter=2)

        result = apply_pointwise_stage(rule, stage_of("0120", "2101"))

        assert as_text(result.states) == "2222"

    def test_pointwise_projection(self) -> None:
        """Test that projection(1) returns the first slice unchanged."""
        rule = CellRule.from_builtin("projection", BINARY, 2, parameter=1)

        result = apply_pointwise_stage(rule, stage_of("0110", "1001"))

        assert as_text(result.states) == "0110"

    def test_pointwise_arity_mismatch(self) -> None:
        """Test that the stage must carry k + l arguments."""
        rule = CellRule.from_builtin("xor", BINARY, 3)

        with pytest.raises(RuleError, match="rule expects"):
            apply_pointwise_stage(rule, stage_of("0110", "1001"))

    def test_vectorized_table_matches_scalar(self) -> None:
        """Test that rule.apply() agrees with evaluate() on every cell."""
        table = [(a * b + 1) % 3 for a in range(3) for b in range(3)]
        rule = CellRule.from_table(Alphabet(3), 2, table)
        stage = stage_of("012012012", "000111222")

        states, _ = rule.apply(stage.state_args, stage.input_args)

        expected = [
            rule.evaluate((int(a), int(b)))[0][0]
            for a, b in zip(stage.state_args[0], stage.state_args[1])
        ]
        assert states[:, 0].tolist() == expected

    def test_permuted_stage(self, xor_automaton: Automaton) -> None:
        """Test that permuted() reorders state arguments only."""
        stage = build_shift_stage(xor_automaton, window(xor_automaton, "00010000"), 1)

        swapped = stage.permuted((2, 1))

        assert swapped.state_args[0].tolist() == stage.state_args[1].tolist()
        assert swapped.state_args[1].tolist() == stage.state_args[0].tolist()


# =============================================================================
# D. Global Evaluation Tests
# =============================================================================


@pytest.mark.unit
class TestEvaluateGlobal:
    """Tests for evaluate_global() trajectories."""

    def test_xor_light_cone(self, xor_automaton: Automaton) -> None:
        """Test the Pascal-triangle-mod-2 cone of a delta at cell 4."""
        trajectory = evaluate_global(
            xor_automaton, window(xor_automaton, "00001000"), 4
        )

        assert [as_text(trajectory.states[t]) for t in trajectory.times] == [
            "00001000",
            "00010100",
            "00100010",
            "01010101",
            "00000000",
        ]

    def test_identity_is_constant_in_time(self, identity_automaton: Automaton) -> None:
        """Test that identity leaves every slice equal to the initial one."""
        trajectory = evaluate_global(
            identity_automaton, window(identity_automaton, "012210"), 10
        )

        assert trajectory.times == list(range(11))
        assert {as_text(s) for s in trajectory.states.values()} == {"012210"}

    def test_projection_full_rotation(self) -> None:
        """Test that N steps of a one-cell rotation restore the slice."""
        automaton = Automaton(
            SpaceTimeFrame((5,)),
            ShiftStructure((Shift((1,)),)),
            CellRule.from_builtin("projection", Alphabet(3), 1, parameter=1),
        )

        trajectory = evaluate_global(automaton, window(automaton, "21000"), 5)

        assert as_text(trajectory.states[5]) == "21000"
        assert as_text(trajectory.states[1]) == "02100"

    def test_rule_90_table_equals_xor(self, xor_automaton: Automaton) -> None:
        """Test that elementary rule 90 as a table reproduces the xor cone."""
        rule_90 = CellRule.from_table(BINARY, 3, [(90 >> i) & 1 for i in range(8)])
        automaton = Automaton(
            SpaceTimeFrame((8,)),
            ShiftStructure((Shift((1,)), Shift((0,)), Shift((-1,)))),
            rule_90,
        )

        table_run = evaluate_global(automaton, window(automaton, "00001000"), 6)
        xor_run = evaluate_global(xor_automaton, window(xor_automaton, "00001000"), 6)

        for t in range(7):
            assert table_run.states[t].tolist() == xor_run.states[t].tolist()

    def test_inputs_and_outputs(self) -> None:
        """Test that input slices feed the rule and outputs are recorded."""
        automaton = Automaton(
            SpaceTimeFrame((5,)),
            ShiftStructure((Shift((0,)),), input_shifts=(Shift((0,)),)),
            CellRule.from_builtin("xor", Alphabet(2, inputs=2, outputs=2), 1, 1),
        )
        inputs = {0: np.array([[1], [0], [1], [0], [0]], dtype=np.int64)}

        trajectory = evaluate_global(automaton, window(automaton, "11000"), 1, inputs)

        assert as_text(trajectory.states[1]) == "01100"
        assert trajectory.outputs[1][:, 0].tolist() == [0, 1, 1, 0, 0]

    def test_initial_window_too_shallow(self) -> None:
        """Test that a depth-2 structure needs two initial slices."""
        automaton = Automaton(
            SpaceTimeFrame((4,), horizon=2),
            ShiftStructure((Shift((0,), 2),)),
            CellRule.from_builtin("identity", BINARY, 1),
        )

        with pytest.raises(HistoryError):
            evaluate_global(automaton, window(automaton, "0101"), 3)

    def test_iterate_global_streams_slices(self, xor_automaton: Automaton) -> None:
        """Test that iterate_global() yields consecutive times lazily."""
        stream = iterate_global(xor_automaton, window(xor_automaton, "00001000"), 3)

        times = [t for t, _ in stream]

        assert times == [1, 2, 3]

    def test_direct_and_staged_agree_on_second_order_rule(self) -> None:
        """Test a rule reading both t-1 and t-2."""
        automaton = Automaton(
            SpaceTimeFrame((6,), horizon=2),
            ShiftStructure((Shift((1,), 1), Shift((0,), 2))),
            CellRule.from_builtin("xor", BINARY, 2),
        )
        initial = window(automaton, "100000", "010000")

        staged = evaluate_global(automaton, initial, 8)
        direct = evaluate_direct(automaton, initial, 8)

        for t in staged.times:
            assert staged.states[t].tolist() == direct.states[t].tolist()


# =============================================================================
# E. Verification Tests
# =============================================================================


@pytest.mark.unit
class TestVerifyFactorization:
    """Tests for verify_factorization()."""

    def test_xor_exhaustive(self, xor_automaton: Automaton) -> None:
        """Test all 256 initial slices of the xor automaton, 16 steps each."""
        report = verify_factorization(xor_automaton, "exhaustive", steps=16)

        assert report.passed
        assert report.configurations == 256
        assert report.steps == 16
        assert report.seed is None

    def test_identity_random(self, identity_automaton: Automaton) -> None:
        """Test that identity passes in random mode and records the seed."""
        report = verify_factorization(
            identity_automaton, "random", steps=4, samples=25, seed=7
        )

        assert report.passed
        assert report.configurations == 25
        assert report.seed == 7

    def test_corrupted_argument_order(self) -> None:
        """Test F(a, b) = a AND NOT b with swapped arguments fails with locations."""
        automaton = Automaton(
            SpaceTimeFrame((4,)),
            LEFT_RIGHT,
            CellRule.from_table(BINARY, 2, [0, 0, 1, 0]),
        )

        report = verify_factorization(
            automaton, "exhaustive", steps=2, argument_order=(2, 1)
        )

        assert not report.passed
        assert report.mismatch_count == len(report.mismatches)
        first = report.mismatches[0]
        assert 0 <= first.r[0] < 4
        assert first.t in (1, 2)
        assert first.component == "state"

    def test_unpermuted_order_passes(self) -> None:
        """Test that the identity permutation injects no fault."""
        automaton = Automaton(
            SpaceTimeFrame((4,)),
            LEFT_RIGHT,
            CellRule.from_table(BINARY, 2, [0, 0, 1, 0]),
        )

        assert verify_factorization(automaton, steps=2, argument_order=(1, 2)).passed

    def test_vector_state_with_taps(self) -> None:
        """Test a width-2 identity automaton exhaustively."""
        automaton = Automaton(
            SpaceTimeFrame((3,)),
            LEFT_RIGHT,
            CellRule.from_builtin("identity", BINARY, 2, state_width=2),
        )

        report = verify_factorization(automaton, steps=4)

        assert report.passed
        assert report.configurations == 64

    def test_fixed_boundary(self) -> None:
        """Test staged/direct agreement under a fixed boundary."""
        automaton = Automaton(
            SpaceTimeFrame((6,), boundary=Boundary.fixed(1)),
            LEFT_RIGHT,
            CellRule.from_builtin("xor", BINARY, 2),
        )

        assert verify_factorization(automaton, steps=6).passed

    def test_two_dimensional_random(self) -> None:
        """Test a 3 x 3 sum_mod automaton on seeded random windows."""
        automaton = Automaton(
            SpaceTimeFrame((3, 3)),
            ShiftStructure((Shift((1, 0)), Shift((0, 1)), Shift((-1, -1)))),
            CellRule.from_builtin("sum_mod", Alphabet(3), 3),
        )

        report = verify_factorization(automaton, "random", steps=3, samples=20)

        assert report.passed

    def test_random_inputs(self) -> None:
        """Test that random mode draws input slices and compares outputs."""
        automaton = Automaton(
            SpaceTimeFrame((5,)),
            ShiftStructure((Shift((1,)),), input_shifts=(Shift((-1,)),)),
            CellRule.from_builtin("xor", Alphabet(2, inputs=2, outputs=2), 1, 1),
        )

        report = verify_factorization(automaton, "random", steps=4, samples=10)

        assert report.passed

    def test_cap_exceeded(self, xor_automaton: Automaton) -> None:
        """Test that exhaustive mode refuses more windows than the cap."""
        with pytest.raises(CapExceededError, match="above the cap of 100"):
            verify_factorization(xor_automaton, "exhaustive", max_configs=100)

    def test_unknown_mode(self, xor_automaton: Automaton) -> None:
        """Test that only exhaustive and random modes exist."""
        with pytest.raises(ValueError, match="Unknown verification mode"):
            verify_factorization(xor_automaton, "sampled")

    def test_configuration_count(self) -> None:
        """Test |S|^(m x |R| x depth)."""
        assert configuration_count(2, 8, 1, 1) == 256
        assert configuration_count(3, 2, 2, 2) == 3**8

    def test_random_windows_are_seeded(self) -> None:
        """Test that the same seed yields the same windows."""
        first = list(enumerate_windows((1, 4, 1), 2, "random", 5, 3, 10))
        second = list(enumerate_windows((1, 4, 1), 2, "random", 5, 3, 10))

        assert [w.tolist() for w in first] == [w.tolist() for w in second]

    def test_report_to_dict(self) -> None:
        """Test the serialized report fields."""
        report = VerificationReport(check="factorization", mode="exhaustive")
        report.record(0, 1, np.zeros((3, 1)), np.array([[0], [1], [0]]))

        document = report.to_dict()

        assert document["passed"] is False
        assert document["mismatch_count"] == 1
        assert document["mismatches"] == [
            {"config": 0, "r": [1], "t": 1, "component": "state"}
        ]

    def test_report_caps_recorded_mismatches(self) -> None:
        """Test that only the first mismatches are stored individually."""
        report = VerificationReport(check="factorization", mode="random")
        ones = np.ones((MAX_RECORDED_MISMATCHES + 5, 1))

        report.record(0, 1, np.zeros_like(ones), ones)

        assert report.mismatch_count == MAX_RECORDED_MISMATCHES + 5
        assert len(report.mismatches) == MAX_RECORDED_MISMATCHES

    def test_report_rejects_shape_mismatch(self) -> None:
        """Test that slices of different shape cannot be compared."""
        report = VerificationReport(check="factorization", mode="random")

        with pytest.raises(ValueError, match="Cannot compare"):
            report.record(0, 1, np.zeros((3, 1)), np.zeros((4, 1)))


# =============================================================================
# F. Property Tests
# =============================================================================


@pytest.mark.unit
class TestStagedDirectProperty:
    """Staged evaluation equals the local recurrence for arbitrary tables."""

    @settings(max_examples=60, deadline=None)
    @given(
        table=st.lists(st.integers(0, 2), min_size=27, max_size=27),
        plane=st.lists(st.integers(0, 2), min_size=7, max_size=7),
        offsets=st.lists(st.integers(-3, 3), min_size=3, max_size=3),
    )
    def test_one_step_agrees(
        self, table: Sequence[int], plane: Sequence[int], offsets: Sequence[int]
    ) -> None:
        """Test step_staged == step_direct for a random ternary 3-argument rule."""
        automaton = Automaton(
            SpaceTimeFrame((7,)),
            ShiftStructure(tuple(Shift((d,)) for d in offsets)),
            CellRule.from_table(Alphabet(3), 3, table),
        )
        history = Trajectory.from_window(automaton.frame, [np.array(plane)])

        staged = step_staged(automaton, history, 1)
        direct = step_direct(automaton, history, 1)

        assert staged.states.tolist() == direct.states.tolist()
