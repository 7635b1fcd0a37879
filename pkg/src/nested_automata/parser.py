"""Spec document parser and serializer.

A spec document is a JSON file (schema ``nested-automata/1``) describing an
automaton of one or more nesting levels, outermost first:

    {
      "version": "nested-automata/1",
      "alphabet": {"states": 2},
      "levels": [
        {"frame": {"extents": [8], "horizon": 1, "boundary": "periodic"},
         "structure": {"state_shifts": [{"dr": [-1], "dt": 1},
                                        {"dr": [1], "dt": 1}]}}
      ],
      "rule": {"builtin": "xor"},
      "initial": {"slices": ["00001000"]}
    }

The parser handles:
    - Structural validation with unknown keys rejected at every level
    - Building the validated object graph (Automaton or NestedAutomaton)
    - Initial conditions given inline, by file, or as a trajectory document
    - Serialization back to the same schema (parse -> serialize -> parse is
      the identity on the object graph)

Every validation failure raises SpecValidationError carrying the field path
of the offending entry, such as ``levels[0].structure.state_shifts``.
"""

import json
import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union, cast

import numpy as np

from .automaton import (
    BUILTIN_RULES,
    SYMBOL_DTYPE,
    Alphabet,
    Automaton,
    CellRule,
)
from .nesting import NestedAutomaton, compose_nested
from .spacetime import Boundary, Shift, ShiftStructure, SpaceTimeFrame

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "nested-automata/1"
DIGITS = "0123456789abcdefghijklmnopqrstuvwxyz"

TOP_LEVEL_KEYS = {
    "version",
    "alphabet",
    "levels",
    "rule",
    "u",
    "initial",
    "fault",
    "text",
}
ALPHABET_KEYS = {"states", "inputs", "outputs"}
LEVEL_KEYS = {"frame", "structure", "taps"}
FRAME_KEYS = {"extents", "horizon", "boundary"}
STRUCTURE_KEYS = {"state_shifts", "input_shifts"}
SHIFT_KEYS = {"dr", "dt"}
RULE_KEYS = {"builtin", "parameter", "table", "state_width"}
TABLE_KEYS = {"transition", "output"}
INITIAL_KEYS = {"slices", "file"}
FAULT_KEYS = {"argument_order"}
TEXT_KEYS = {"letters", "extents"}

AnyAutomaton = Union[Automaton, NestedAutomaton]


class SpecValidationError(ValueError):
    """Raised when a spec document is malformed or inconsistent.

    Attributes:
        path: Field path of the offending entry ("" for the whole document).
        message: What was expected and what was found.
    """

    def __init__(self, path: str, message: str) -> None:
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}" if path else message)


@dataclass(frozen=True)
class TextSpec:
    """Letter table and extents for the text hierarchy demo.

    Attributes:
        letters: Letters in code order; codes start after the reserved ones.
        extents: Maximum (letters per word, words per sentence, sentences per
            paragraph, paragraphs per document).
    """

    letters: str
    extents: tuple[int, int, int, int]


@dataclass
class ParsedSpec:
    """A validated spec document.

    Attributes:
        automaton: Flat Automaton for one level, NestedAutomaton otherwise.
        u: Global speed, if given.
        initial: Initial history window (slices at t = 0, 1, ...), if given.
        argument_order: Staged-path argument permutation (fault fixture).
        text: Text hierarchy settings, if given.
        source: File the spec was read from.
    """

    automaton: AnyAutomaton
    u: Optional[float] = None
    initial: Optional[list[np.ndarray]] = None
    argument_order: Optional[tuple[int, ...]] = None
    text: Optional[TextSpec] = None
    source: Optional[Path] = field(default=None, compare=False)

    @property
    def alphabet(self) -> Alphabet:
        return self.automaton.alphabet

    @property
    def depth(self) -> int:
        return 1 if isinstance(self.automaton, Automaton) else self.automaton.depth

    @property
    def nested(self) -> NestedAutomaton:
        """The automaton as a NestedAutomaton (a leaf for flat specs)."""
        if isinstance(self.automaton, Automaton):
            return NestedAutomaton.from_automaton(self.automaton)
        return self.automaton


def get_data_from_file(file_path: Union[str, Path]) -> dict[str, Any]:
    """Read and parse a JSON document.

    Raises:
        FileNotFoundError: If the file does not exist.
        SpecValidationError: If the JSON is malformed or not an object.
    """
    path = Path(file_path)
    if not path.exists():
        raise FileNotFoundError(f"{path.name} not found at path: {file_path}")
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise SpecValidationError(
            "", f"Failed to parse {path.name}: invalid JSON at {file_path}. Error: {e}"
        ) from e
    if not isinstance(data, dict):
        raise SpecValidationError("", f"{path.name} must contain a JSON object")
    return cast(dict[str, Any], data)


# ----------------------------------------------------------------------
# Field helpers
# ----------------------------------------------------------------------


def _object(
    value: Any, path: str, allowed: set[str], required: Sequence[str] = ()
) -> dict[str, Any]:
    if not isinstance(value, dict):
        raise SpecValidationError(
            path, f"expected an object, got {type(value).__name__}"
        )
    unknown = sorted(set(value) - allowed)
    if unknown:
        raise SpecValidationError(
            f"{path}.{unknown[0]}" if path else unknown[0],
            f"unknown field (allowed: {', '.join(sorted(allowed))})",
        )
    for key in required:
        if key not in value:
            raise SpecValidationError(
                f"{path}.{key}" if path else key, "required field is missing"
            )
    return value


def _int(value: Any, path: str, minimum: Optional[int] = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SpecValidationError(path, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise SpecValidationError(path, f"must be >= {minimum}, got {value}")
    return value


def _int_list(value: Any, path: str, minimum: Optional[int] = None) -> tuple[int, ...]:
    if not isinstance(value, list):
        raise SpecValidationError(path, f"expected a list of integers, got {value!r}")
    return tuple(_int(v, f"{path}[{i}]", minimum) for i, v in enumerate(value))


# ----------------------------------------------------------------------
# Parsing
# ----------------------------------------------------------------------


def _parse_alphabet(value: Any) -> Alphabet:
    data = _object(value, "alphabet", ALPHABET_KEYS, ("states",))
    return Alphabet(
        states=_int(data["states"], "alphabet.states", 1),
        inputs=_int(data.get("inputs", 1), "alphabet.inputs", 1),
        outputs=_int(data.get("outputs", 1), "alphabet.outputs", 1),
    )


def _parse_boundary(value: Any, path: str) -> Boundary:
    if value == "periodic":
        return Boundary.periodic()
    if isinstance(value, dict):
        data = _object(value, path, {"fixed"}, ("fixed",))
        return Boundary.fixed(_int(data["fixed"], f"{path}.fixed", 0))
    raise SpecValidationError(
        path, f'expected "periodic" or {{"fixed": symbol}}, got {value!r}'
    )


def _parse_frame(value: Any, path: str) -> SpaceTimeFrame:
    data = _object(value, path, FRAME_KEYS, ("extents",))
    extents = _int_list(data["extents"], f"{path}.extents", 1)
    if not extents:
        raise SpecValidationError(f"{path}.extents", "needs at least one axis")
    return SpaceTimeFrame(
        extents=extents,
        horizon=_int(data.get("horizon", 1), f"{path}.horizon", 1),
        boundary=_parse_boundary(data.get("boundary", "periodic"), f"{path}.boundary"),
    )


def _parse_shift(value: Any, path: str) -> Shift:
    data = _object(value, path, SHIFT_KEYS, ("dr",))
    raw = data["dr"]
    if isinstance(raw, int):
        dr: tuple[int, ...] = (_int(raw, f"{path}.dr"),)
    else:
        dr = _int_list(raw, f"{path}.dr")
    return Shift(dr, _int(data.get("dt", 1), f"{path}.dt", 1))


def _parse_shifts(value: Any, path: str) -> tuple[Shift, ...]:
    if not isinstance(value, list):
        raise SpecValidationError(path, "expected a list of shifts")
    return tuple(_parse_shift(v, f"{path}[{i}]") for i, v in enumerate(value))


def _parse_structure(value: Any, path: str) -> ShiftStructure:
    data = _object(value, path, STRUCTURE_KEYS, ("state_shifts",))
    state_path = f"{path}.state_shifts"
    state_shifts = _parse_shifts(data["state_shifts"], state_path)
    input_shifts = _parse_shifts(data.get("input_shifts", []), f"{path}.input_shifts")
    try:
        return ShiftStructure(state_shifts, input_shifts)
    except ValueError as e:
        raise SpecValidationError(state_path, str(e)) from e


def _parse_rule(
    value: Any, alphabet: Alphabet, structure: ShiftStructure
) -> CellRule:
    data = _object(value, "rule", RULE_KEYS)
    k, l = structure.k, structure.l
    try:
        if "builtin" in data:
            if "table" in data:
                raise SpecValidationError(
                    "rule", "give either builtin or table, not both"
                )
            name = data["builtin"]
            if name not in BUILTIN_RULES:
                raise SpecValidationError(
                    "rule.builtin",
                    f"unknown rule {name!r} (available: {', '.join(BUILTIN_RULES)})",
                )
            parameter = data.get("parameter")
            if parameter is not None:
                parameter = _int(parameter, "rule.parameter")
            default_width = k if name == "identity" else 1
            width = _int(data.get("state_width", default_width), "rule.state_width", 1)
            return CellRule.from_builtin(name, alphabet, k, l, width, parameter)
        if "table" not in data:
            raise SpecValidationError("rule", "needs a builtin or a table")
        if "parameter" in data:
            raise SpecValidationError(
                "rule.parameter", "only built-in rules take a parameter"
            )
        table = _object(data["table"], "rule.table", TABLE_KEYS, ("transition",))
        transition = table["transition"]
        if not isinstance(transition, list):
            raise SpecValidationError(
                "rule.table.transition", "expected a list of rows"
            )
        rule = CellRule.from_table(alphabet, k, transition, l, table.get("output"))
        if "state_width" in data and data["state_width"] != rule.state_width:
            raise SpecValidationError(
                "rule.state_width",
                f"declared {data['state_width']} but table rows have {rule.state_width} "
                f"components",
            )
        return rule
    except SpecValidationError:
        raise
    except (TypeError, ValueError) as e:
        raise SpecValidationError("rule", str(e)) from e


def _parse_taps(value: Any, path: str) -> tuple[int, ...]:
    if value is None:
        return ()
    return _int_list(value, path, 1)


def _build_automaton(
    alphabet: Alphabet, levels: Any, rule_value: Any
) -> AnyAutomaton:
    if not isinstance(levels, list) or not levels:
        raise SpecValidationError("levels", "expected a non-empty list of levels")
    parsed = []
    for i, level in enumerate(levels):
        path = f"levels[{i}]"
        data = _object(level, path, LEVEL_KEYS, ("frame", "structure"))
        try:
            frame = _parse_frame(data["frame"], f"{path}.frame")
        except SpecValidationError:
            raise
        except ValueError as e:
            raise SpecValidationError(f"{path}.frame", str(e)) from e
        structure = _parse_structure(data["structure"], f"{path}.structure")
        taps = _parse_taps(data.get("taps"), f"{path}.taps")
        parsed.append((path, frame, structure, taps))

    leaf_path, frame, structure, taps = parsed[-1]
    rule = _parse_rule(rule_value, alphabet, structure)
    try:
        if len(parsed) == 1:
            return Automaton(frame, structure, rule, taps)
        node = NestedAutomaton.leaf(frame, structure, rule, taps)
    except ValueError as e:
        raise SpecValidationError(leaf_path, str(e)) from e

    for path, frame, structure, taps in reversed(parsed[:-1]):
        try:
            node = compose_nested(structure, frame, node, taps)
        except ValueError as e:
            raise SpecValidationError(path, str(e)) from e
    return node


def decode_slice(
    raw: Any, shape: tuple[int, ...], states: int, path: str
) -> np.ndarray:
    """Decode one slice: a digit string (1-D, width 1) or nested lists.

    Args:
        raw: The encoded slice.
        shape: Expected ``extents + (width,)``.
        states: |S|, bound for every symbol.
        path: Field path for error messages.
    """
    extents, width = shape[:-1], shape[-1]
    if isinstance(raw, str):
        if len(extents) != 1 or width != 1:
            raise SpecValidationError(
                path,
                "digit strings encode 1-D slices of width 1 only; use nested lists",
            )
        if len(raw) != extents[0]:
            raise SpecValidationError(
                path, f"slice has {len(raw)} cells, expected {extents[0]}"
            )
        try:
            values = [int(c, 36) for c in raw]
        except ValueError as e:
            raise SpecValidationError(path, f"invalid symbol digit in {raw!r}") from e
        array = np.asarray(values, dtype=SYMBOL_DTYPE)[:, None]
    else:
        try:
            array = np.asarray(raw, dtype=SYMBOL_DTYPE)
        except (TypeError, ValueError) as e:
            raise SpecValidationError(path, f"malformed slice: {e}") from e
        if array.shape == extents:
            array = array[..., None]
    if array.shape != shape:
        raise SpecValidationError(
            path, f"slice has shape {array.shape}, expected {shape}"
        )
    if np.any((array < 0) | (array >= states)):
        raise SpecValidationError(
            path, f"slice contains symbols outside 0..{states - 1}"
        )
    return array


def encode_slice(array: np.ndarray, states: int) -> Union[str, list[Any]]:
    """Inverse of decode_slice(): digit strings where possible, lists otherwise."""
    if array.ndim == 2 and array.shape[1] == 1 and states <= len(DIGITS):
        return "".join(DIGITS[int(v)] for v in array[:, 0])
    if array.shape[-1] == 1:
        return cast(list[Any], array[..., 0].tolist())
    return cast(list[Any], array.tolist())


def _slices_from_document(data: dict[str, Any], path: str) -> list[Any]:
    if "payload" in data:
        payload = data["payload"]
        if not isinstance(payload, dict) or "states" not in payload:
            raise SpecValidationError(path, "trajectory document has no payload.states")
        return list(payload["states"])
    entry = _object(data, path, {"slices"}, ("slices",))
    if not isinstance(entry["slices"], list):
        raise SpecValidationError(f"{path}.slices", "expected a list of slices")
    return list(entry["slices"])


def load_initial_file(
    file_path: Union[str, Path], path: str = "initial.file"
) -> list[Any]:
    """Read raw slices from a file.

    JSON files hold ``{"slices": [...]}`` or a trajectory document (all of
    its state slices are used); any other file holds one digit string per
    non-empty line.
    """
    file = Path(file_path)
    if file.suffix == ".json":
        return _slices_from_document(get_data_from_file(file), path)
    if not file.exists():
        raise FileNotFoundError(f"{file.name} not found at path: {file_path}")
    lines = file.read_text(encoding="utf-8").splitlines()
    return [line.strip() for line in lines if line.strip()]


def decode_initial(
    raw_slices: Sequence[Any], automaton: AnyAutomaton, path: str = "initial.slices"
) -> list[np.ndarray]:
    """Decode an initial window and check that it is deep enough.

    Raises:
        SpecValidationError: If a slice is malformed or the window is
            shallower than the deepest top-level shift.
    """
    depth = automaton.structure.depth
    if len(raw_slices) < depth:
        raise SpecValidationError(
            path,
            f"initial window needs {depth} slices (deepest dt), "
            f"got {len(raw_slices)}",
        )
    shape = automaton.slice_shape()
    states = automaton.alphabet.states
    return [
        decode_slice(raw, shape, states, f"{path}[{i}]")
        for i, raw in enumerate(raw_slices)
    ]


def parse_initial_option(
    value: str, automaton: AnyAutomaton, base_dir: Optional[Path] = None
) -> list[np.ndarray]:
    """Read an --initial value: a file path, or comma-separated digit strings."""
    candidate = Path(value)
    if base_dir is not None and not candidate.is_absolute() and not candidate.exists():
        candidate = base_dir / candidate
    if candidate.exists():
        raw_slices = load_initial_file(candidate, "--initial")
        return decode_initial(raw_slices, automaton, "--initial")
    return decode_initial([s.strip() for s in value.split(",")], automaton, "--initial")


def _parse_initial(
    value: Any, automaton: AnyAutomaton, base_dir: Optional[Path]
) -> list[np.ndarray]:
    data = _object(value, "initial", INITIAL_KEYS)
    if ("slices" in data) == ("file" in data):
        raise SpecValidationError("initial", "give exactly one of slices or file")
    if "slices" in data:
        if not isinstance(data["slices"], list):
            raise SpecValidationError("initial.slices", "expected a list of slices")
        return decode_initial(data["slices"], automaton)
    file = Path(data["file"])
    if base_dir is not None and not file.is_absolute():
        file = base_dir / file
    return decode_initial(load_initial_file(file), automaton, "initial.file")


def _parse_fault(value: Any, automaton: AnyAutomaton) -> tuple[int, ...]:
    data = _object(value, "fault", FAULT_KEYS, ("argument_order",))
    if not isinstance(automaton, Automaton):
        raise SpecValidationError(
            "fault", "argument_order applies to flat automata only"
        )
    order = _int_list(data["argument_order"], "fault.argument_order", 1)
    if sorted(order) != list(range(1, automaton.structure.k + 1)):
        raise SpecValidationError(
            "fault.argument_order",
            f"expected a permutation of 1..{automaton.structure.k}, got {list(order)}",
        )
    return order


def _parse_text(value: Any) -> TextSpec:
    data = _object(value, "text", TEXT_KEYS, ("letters", "extents"))
    letters = data["letters"]
    if not isinstance(letters, str) or not letters:
        raise SpecValidationError("text.letters", "expected a non-empty string")
    if len(set(letters)) != len(letters):
        raise SpecValidationError("text.letters", "letters must be distinct")
    extents = _int_list(data["extents"], "text.extents", 1)
    if len(extents) != 4:
        raise SpecValidationError(
            "text.extents", "expected [word, sentence, paragraph, document] extents"
        )
    return TextSpec(letters, (extents[0], extents[1], extents[2], extents[3]))


def parse_spec_document(
    data: dict[str, Any], base_dir: Optional[Path] = None
) -> ParsedSpec:
    """Validate a spec document and build its object graph.

    Args:
        data: Decoded JSON object.
        base_dir: Directory that relative file references resolve against.

    Raises:
        SpecValidationError: On any structural or cross-field violation.
        FileNotFoundError: If a referenced initial-condition file is missing.
    """
    _object(data, "", TOP_LEVEL_KEYS, ("version", "alphabet", "levels", "rule"))
    if data["version"] != SCHEMA_VERSION:
        raise SpecValidationError(
            "version",
            f"unsupported version {data['version']!r}, expected {SCHEMA_VERSION!r}",
        )
    alphabet = _parse_alphabet(data["alphabet"])
    automaton = _build_automaton(alphabet, data["levels"], data["rule"])

    u = None
    if "u" in data:
        raw_u = data["u"]
        if isinstance(raw_u, bool) or not isinstance(raw_u, (int, float)) or raw_u <= 0:
            raise SpecValidationError("u", f"expected a positive number, got {raw_u!r}")
        u = float(raw_u)

    initial = None
    if "initial" in data:
        initial = _parse_initial(data["initial"], automaton, base_dir)
    fault = _parse_fault(data["fault"], automaton) if "fault" in data else None
    text = _parse_text(data["text"]) if "text" in data else None
    return ParsedSpec(
        automaton=automaton, u=u, initial=initial, argument_order=fault, text=text
    )


def parse_spec(file_path: Union[str, Path]) -> ParsedSpec:
    """Parse and validate a spec file.

    Raises:
        FileNotFoundError: If the file does not exist.
        SpecValidationError: If the document is malformed or inconsistent.

    Example:
        >>> spec = parse_spec("tests/fixtures/xor_flat.json")
        >>> spec.automaton.structure.k
        2
    """
    path = Path(file_path)
    parsed = parse_spec_document(get_data_from_file(path), base_dir=path.parent)
    parsed.source = path
    logger.debug("Parsed %s: depth %d", path, parsed.depth)
    return parsed


# ----------------------------------------------------------------------
# Serialization
# ----------------------------------------------------------------------


def _boundary_document(boundary: Boundary) -> Any:
    if boundary.is_periodic:
        return "periodic"
    return {"fixed": boundary.symbol}


def _shift_document(shift: Shift) -> dict[str, Any]:
    return {"dr": list(shift.dr), "dt": shift.dt}


def _level_document(
    frame: SpaceTimeFrame, structure: ShiftStructure, taps: tuple[int, ...]
) -> dict[str, Any]:
    return {
        "frame": {
            "extents": list(frame.extents),
            "horizon": frame.horizon,
            "boundary": _boundary_document(frame.boundary),
        },
        "structure": {
            "state_shifts": [_shift_document(s) for s in structure.state_shifts],
            "input_shifts": [_shift_document(s) for s in structure.input_shifts],
        },
        "taps": list(taps),
    }


def _rule_document(rule: CellRule) -> dict[str, Any]:
    if rule.builtin is not None:
        document: dict[str, Any] = {
            "builtin": rule.builtin,
            "state_width": rule.state_width,
        }
        if rule.parameter is not None:
            document["parameter"] = rule.parameter
        return document
    if rule.transition is None:
        raise ValueError("Synthesized rules have no table and cannot be serialized")
    rows: list[Any] = [
        row[0] if rule.state_width == 1 else list(row) for row in rule.transition
    ]
    table: dict[str, Any] = {"transition": rows}
    if rule.arity_input:
        table["output"] = [list(row) for row in rule.output or ()]
    return {"table": table, "state_width": rule.state_width}


def serialize_automaton(automaton: AnyAutomaton) -> dict[str, Any]:
    """The alphabet, levels and rule entries of a spec document."""
    levels = []
    if isinstance(automaton, Automaton):
        levels.append(
            _level_document(automaton.frame, automaton.structure, automaton.taps)
        )
        rule = automaton.rule
    else:
        leaf_rule = None
        for level in automaton.levels():
            levels.append(_level_document(level.frame, level.structure, level.taps))
            leaf_rule = level.rule
        assert leaf_rule is not None
        rule = leaf_rule
    alphabet = automaton.alphabet
    return {
        "alphabet": {
            "states": alphabet.states,
            "inputs": alphabet.inputs,
            "outputs": alphabet.outputs,
        },
        "levels": levels,
        "rule": _rule_document(rule),
    }


def serialize_spec(spec: ParsedSpec) -> dict[str, Any]:
    """Render a ParsedSpec back into a schema document.

    Raises:
        ValueError: If the rule is synthesized (no table to write).
    """
    document: dict[str, Any] = {"version": SCHEMA_VERSION}
    document.update(serialize_automaton(spec.automaton))
    if spec.u is not None:
        document["u"] = spec.u
    if spec.initial is not None:
        states = spec.alphabet.states
        slices = [encode_slice(s, states) for s in spec.initial]
        document["initial"] = {"slices": slices}
    if spec.argument_order is not None:
        document["fault"] = {"argument_order": list(spec.argument_order)}
    if spec.text is not None:
        document["text"] = {
            "letters": spec.text.letters,
            "extents": list(spec.text.extents),
        }
    return document
