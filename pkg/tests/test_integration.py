"""Integration tests for nested-automata.

This module runs the acceptance checks end to end, through the library and
the CLI, on committed fixtures and seeded random data.

Test Categories:
    - TestFactorization: staged vs direct evaluation on the xor automaton
    - TestNestingSoundness: flattening oracle at depth 2 and depth 3
    - TestSpeedFormulas: nested speeds, limits and the Pythagorean closure
    - TestTranslationLaw: closed form vs unrolled back-translation
    - TestIdentityCollapses: processed and general cases reducing to case a
    - TestDeterminism: byte-identical CLI outputs across runs
    - TestTextHierarchy: a 1 kB ASCII corpus round trip

Everything is seeded, so failures reproduce exactly.
"""

import math
import time
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from nested_automata.automaton import Automaton, verify_factorization
from nested_automata.cli import cli
from nested_automata.hierarchy import decode_text, encode_text
from nested_automata.kinematics import (
    NestedSpeedSpec,
    SpeedExceedsLimit,
    nested_speed,
)
from nested_automata.nesting import (
    NestedAutomaton,
    NestingError,
    compose_nested,
    verify_flattening,
)
from nested_automata.parser import SpecValidationError, parse_spec
from nested_automata.propagation import (
    NestedCoordinate,
    NestedField,
    SignalPath,
    back_translate,
    back_translate_loop,
    general_formula,
    processing_rule,
    propagate_multi,
    propagate_processed,
    propagate_pure,
)
from nested_automata.spacetime import Shift, ShiftStructure, SpaceTimeFrame

# =============================================================================
# Constants
# =============================================================================

SEED = 20240611

# Word characters of the corpus; "." would close a sentence.
CORPUS_LETTERS = [c for c in (chr(code) for code in range(0x21, 0x7F)) if c != "."]


# =============================================================================
# Helper Functions
# =============================================================================


def random_coordinate(rng: np.random.Generator, depth: int) -> NestedCoordinate:
    """A query point with non-negative times on every level."""
    return NestedCoordinate.of(
        *(
            ((float(rng.uniform(-5, 5)),), float(rng.uniform(0, 20)))
            for _ in range(depth)
        )
    )


def random_speeds(rng: np.random.Generator, u: float, count: int) -> tuple[float, ...]:
    """Level speeds whose squares stay below u^2."""
    remaining = u * u
    speeds = []
    for _ in range(count):
        piece = remaining * float(rng.uniform(0.0, 0.9))
        speeds.append(math.sqrt(piece))
        remaining -= piece
    return tuple(speeds)


def ascii_corpus(seed: int = SEED) -> str:
    """Five paragraphs of five ten-word sentences."""
    rng = np.random.default_rng(seed)
    paragraphs = []
    for _ in range(5):
        sentences = []
        for _ in range(5):
            words = [
                "".join(rng.choice(CORPUS_LETTERS, size=int(rng.integers(1, 9))))
                for _ in range(10)
            ]
            sentences.append(" ".join(words) + ".")
        paragraphs.append(" ".join(sentences))
    return "\n".join(paragraphs)


# =============================================================================
# A. Factorization
# =============================================================================


@pytest.mark.integration
class TestFactorization:
    """Staged (shift then rule) evaluation equals direct local stepping."""

    def test_xor_all_initial_slices(self, xor_automaton: Automaton) -> None:
        """Test all 256 slices of xor over 16 steps with exact equality."""
        started = time.perf_counter()

        report = verify_factorization(xor_automaton, "exhaustive", steps=16)

        elapsed = time.perf_counter() - started
        assert report.passed
        assert report.configurations == 256
        assert report.steps == 16
        assert elapsed < 5.0

    def test_fault_is_detected_through_cli(
        self, runner: CliRunner, fixtures_dir: Path
    ) -> None:
        """Test that the fault fixture fails exhaustive verification."""
        result = runner.invoke(
            cli, ["verify", "--spec", str(fixtures_dir / "fault_flat.json")]
        )

        assert result.exit_code == 1
        assert "FAIL" in result.output


# =============================================================================
# B. Nesting Soundness
# =============================================================================


@pytest.mark.integration
class TestNestingSoundness:
    """step_nested() agrees with the flattened automaton."""

    def test_depth_two_exhaustive(self, fixtures_dir: Path) -> None:
        """Test every neighbor-block combination of the 2 x 1 xor block."""
        spec = parse_spec(fixtures_dir / "nested_depth2.json")
        assert isinstance(spec.automaton, NestedAutomaton)

        report = verify_flattening(spec.automaton, "exhaustive", steps=16)

        assert report.passed
        assert report.configurations == 64

    @pytest.mark.slow
    def test_depth_three_random_histories(self, fixtures_dir: Path) -> None:
        """Test the depth-3 instance on 1000 seeded random histories."""
        spec = parse_spec(fixtures_dir / "nested_depth3.json")
        assert isinstance(spec.automaton, NestedAutomaton)

        report = verify_flattening(
            spec.automaton, "random", steps=4, samples=1000, seed=SEED
        )

        assert report.passed
        assert report.configurations == 1000

    def test_k_mismatch_is_rejected(self, fixtures_dir: Path) -> None:
        """Test that three outer shifts over a four-position block fail."""
        with pytest.raises(SpecValidationError, match="does not match"):
            parse_spec(fixtures_dir / "nested_k3_bad.json")

    def test_k_mismatch_in_library(self, xor_inner_leaf: NestedAutomaton) -> None:
        """Test the same check when composing by hand."""
        three = ShiftStructure((Shift((-1,)), Shift((0,)), Shift((1,))))

        with pytest.raises(NestingError, match="does not match"):
            compose_nested(three, SpaceTimeFrame((4,)), xor_inner_leaf)


# =============================================================================
# C. Speed Formulas
# =============================================================================


@pytest.mark.integration
class TestSpeedFormulas:
    """Nested speeds against the displayed formulas."""

    def test_documented_values(self) -> None:
        """Test 0.8 at level 1 and 0.64 at level 2."""
        assert nested_speed(NestedSpeedSpec(1.0, (0.6,)), 1) == pytest.approx(
            0.8, abs=1e-12
        )
        assert nested_speed(NestedSpeedSpec(1.0, (0.6, 0.48)), 2) == pytest.approx(
            0.64, abs=1e-12
        )

    def test_exceeds_limit(self) -> None:
        """Test that a level speed of 1.2 under u=1 is rejected."""
        with pytest.raises(SpeedExceedsLimit):
            nested_speed(NestedSpeedSpec(1.0, (1.2,)), 1)

    def test_pythagorean_closure_random_pairs(self) -> None:
        """Test eff^2 + v^2 = u^2 for 1000 random valid pairs."""
        rng = np.random.default_rng(SEED)

        for _ in range(1000):
            u = float(rng.uniform(0.01, 1.0))
            v = float(rng.uniform(0.0, u))
            effective = nested_speed(NestedSpeedSpec(u, (v,)), 1)

            assert effective * effective + v * v == pytest.approx(u * u, abs=1e-12)


# =============================================================================
# D. Translation Law
# =============================================================================


@pytest.mark.integration
class TestTranslationLaw:
    """Closed-form back-translation equals n-step unrolling."""

    def test_closed_form_matches_loop_on_random_specs(self) -> None:
        """Test 100 random specs at up to 100 steps, tolerance 1e-12."""
        rng = np.random.default_rng(SEED)

        for _ in range(100):
            depth = int(rng.integers(1, 4))
            u = float(rng.uniform(0.1, 1.0))
            path = SignalPath.of(
                random_speeds(rng, u, max(1, depth - 1)),
                tuple(float(d) for d in rng.uniform(0.25, 1.0, size=depth)),
            )
            coord = random_coordinate(rng, depth)
            steps = int(rng.integers(0, 101))

            closed = back_translate(coord, u, path, steps).as_vector()
            looped = back_translate_loop(coord, u, path, steps).as_vector()

            np.testing.assert_allclose(closed, looped, rtol=1e-12, atol=1e-12)

    def test_evaluation_methods_agree(self) -> None:
        """Test propagate_pure() closed and loop on a step field."""
        spec = NestedSpeedSpec(1.0, (0.6, 0.48))
        field = NestedField.step(0.5, levels=3)
        rng = np.random.default_rng(SEED)

        for _ in range(50):
            coord = random_coordinate(rng, 3)
            steps = int(rng.integers(0, 20))

            assert propagate_pure(
                field, spec, coord, steps, method="closed"
            ) == propagate_pure(field, spec, coord, steps, method="loop")


# =============================================================================
# E. Identity Collapses
# =============================================================================


@pytest.mark.integration
class TestIdentityCollapses:
    """The processed and general cases reduce to pure propagation."""

    QUERIES = [
        NestedCoordinate.of(((float(r),), float(t)), ((0.5,), 2.0))
        for r in range(-3, 4)
        for t in range(0, 6)
    ]

    def test_identity_processing_equals_pure(self) -> None:
        """Test case b with identity F against case a."""
        spec = NestedSpeedSpec(1.0, (0.5,))
        field = NestedField.step(0.0, levels=2)
        identity = processing_rule("identity")

        for coord in self.QUERIES:
            for steps in range(4):
                assert propagate_processed(
                    field, spec, identity, coord, steps
                ) == propagate_pure(field, spec, coord, steps)

    def test_general_step_matches_multi_and_pure(self) -> None:
        """Test one general step against the case c and case a evaluators."""
        field = NestedField.step(0.0, levels=2)
        signal = SignalPath.of((0.5,))
        first = processing_rule("first")
        spec = NestedSpeedSpec(1.0, (0.5,))

        for coord in self.QUERIES:
            general = general_formula(field, 1.0, first, [signal], coord)

            assert general == propagate_multi(field, 1.0, first, [signal], coord, 1)
            assert general == propagate_pure(field, spec, coord, 1)


# =============================================================================
# F. Determinism
# =============================================================================


@pytest.mark.integration
class TestDeterminism:
    """The same inputs give byte-identical outputs."""

    def test_run_twice(
        self, runner: CliRunner, fixtures_dir: Path, tmp_path: Path
    ) -> None:
        """Test two runs of the nested depth-2 spec."""
        outputs = [tmp_path / "first.json", tmp_path / "second.json"]

        for out in outputs:
            result = runner.invoke(
                cli,
                [
                    "run",
                    "--spec",
                    str(fixtures_dir / "nested_depth2.json"),
                    "--steps",
                    "8",
                    "--out",
                    str(out),
                ],
            )
            assert result.exit_code == 0, result.output

        assert outputs[0].read_bytes() == outputs[1].read_bytes()

    def test_verify_twice(
        self, runner: CliRunner, fixtures_dir: Path, tmp_path: Path
    ) -> None:
        """Test two seeded random verification reports."""
        outputs = [tmp_path / "first.json", tmp_path / "second.json"]

        for out in outputs:
            result = runner.invoke(
                cli,
                [
                    "verify",
                    "--spec",
                    str(fixtures_dir / "fault_flat.json"),
                    "--mode",
                    "random",
                    "--samples",
                    "20",
                    "--seed",
                    "3",
                    "--out",
                    str(out),
                ],
            )
            assert result.exit_code == 1

        assert outputs[0].read_bytes() == outputs[1].read_bytes()


# =============================================================================
# G. Text Hierarchy
# =============================================================================


@pytest.mark.integration
class TestTextHierarchy:
    """Encoding and decoding a realistic corpus."""

    def test_one_kilobyte_corpus(self) -> None:
        """Test the identity round trip on more than 1000 ASCII characters."""
        corpus = ascii_corpus()

        encoded = encode_text(corpus, (24, 32, 16, 8))

        assert len(corpus.encode("ascii")) > 1000
        assert decode_text(encoded) == corpus

    def test_corpus_through_cli(self, runner: CliRunner, tmp_path: Path) -> None:
        """Test encode-text and decode-text on the same corpus via files."""
        source = tmp_path / "corpus.txt"
        source.write_text(ascii_corpus(), encoding="utf-8")
        encoded = tmp_path / "corpus.json"
        decoded = tmp_path / "decoded.txt"

        first = runner.invoke(
            cli,
            [
                "encode-text",
                "--extents",
                "24,32,16,8",
                "--input",
                str(source),
                "--out",
                str(encoded),
            ],
        )
        second = runner.invoke(
            cli, ["decode-text", "--input", str(encoded), "--out", str(decoded)]
        )

        assert first.exit_code == 0, first.output
        assert second.exit_code == 0, second.output
        assert decoded.read_text(encoding="utf-8") == ascii_corpus()
