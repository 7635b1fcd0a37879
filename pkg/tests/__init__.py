"""Test suite for nested-automata.

This package contains unit tests, integration tests, and test fixtures for
the nested-automata library and CLI.

Test Organization:
    - test_spacetime.py: Frames, shifts, boundaries and block indexing
    - test_automaton.py: Alphabets, cell rules, direct and staged stepping
    - test_nesting.py: Nested composition, stepping and flattening
    - test_kinematics.py: Shift speeds, nested speeds and rationalization
    - test_propagation.py: Back-translation and propagation cases
    - test_parser.py: Spec document parsing and serialization
    - test_hierarchy.py: Text hierarchy encoding
    - test_config.py: Configuration management
    - test_writer.py: Deterministic JSON and CSV writers
    - test_cli.py: Tests for CLI commands
    - test_integration.py: End-to-end acceptance checks
    - fixtures/: Spec documents and golden files

Test Categories:
    - @pytest.mark.unit: Fast, isolated unit tests
    - @pytest.mark.integration: End-to-end tests on committed fixtures
    - @pytest.mark.slow: Long-running tests

Running Tests:
    $ uv run pytest                       # All tests
    $ uv run pytest -m "not integration"  # Unit tests only
    $ uv run pytest -m integration        # Integration tests only
    $ uv run pytest -m "not slow"         # Skip the long random sweeps
"""
