"""Command-line interface for nested-automata.

Commands:
    run          - Evolve a spec's automaton and write the trajectory
    verify       - Check staged vs direct evaluation (flat) or the
                   flattening oracle (nested); exit 1 on any mismatch
    speeds       - Per-level, per-shift speed table as CSV
    trace        - Propagation trace (cases a, b, c, general) as CSV
    flatten      - Emit the flattened spec of a nested automaton
    encode-text  - Encode text into the letter/word/sentence/paragraph hierarchy
    decode-text  - Decode a hierarchy document back into text

Usage:
    $ nested-automata run --spec xor.json --steps 4 --out xor.trajectory.json
    $ nested-automata verify --spec xor.json --mode exhaustive
    $ nested-automata speeds --spec nested.json --u 1
    $ nested-automata trace --case a --speed 0.5 --coord 2:4 --coord 0:4

Exit codes: 0 success, 1 verification mismatch, 2 validation error,
3 I/O error.
"""

import logging
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any, Callable, Optional

import click

from . import __version__
from .automaton import Automaton, Trajectory, evaluate_global, verify_factorization
from .config import (
    DEFAULT_MAX_CONFIGS,
    DEFAULT_MAX_TABLE_SIZE,
    DEFAULT_MODE,
    DEFAULT_RUN_STEPS,
    DEFAULT_SAMPLES,
    DEFAULT_SEED,
    DEFAULT_U,
    DEFAULT_VERIFY_STEPS,
    ENV_MAX_CONFIGS,
    ENV_SEED,
    build_default_map,
    flatten_config,
    load_yaml_config,
)
from .hierarchy import DEFAULT_LETTERS, HierarchyText, decode_text, encode_text
from .kinematics import NestedSpeedSpec, speed_table
from .nesting import evaluate_nested, flatten, verify_flattening
from .parser import (
    ParsedSpec,
    SpecValidationError,
    get_data_from_file,
    parse_initial_option,
    parse_spec,
    serialize_spec,
)
from .propagation import (
    NestedCoordinate,
    NestedField,
    SignalPath,
    general_formula,
    processing_rule,
    propagate_multi,
    propagate_processed,
    propagate_pure,
    trace_general,
    trace_multi,
    trace_processed,
    trace_pure,
)
from .writer import (
    dumps_json,
    metadata,
    report_document,
    spec_hash,
    speed_table_csv,
    trace_csv,
    trajectory_document,
    write_text,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_VALIDATION = 2
EXIT_IO = 3

# Mismatches echoed to the terminal; the report file lists all recorded ones.
MAX_ECHOED_MISMATCHES = 20

TRACE_CASES = ("a", "b", "c", "general")


def configure_logging(verbose: int) -> None:
    """WARNING by default, INFO at -v, DEBUG at -vv; always on stderr."""
    level = logging.WARNING
    if verbose == 1:
        level = logging.INFO
    elif verbose > 1:
        level = logging.DEBUG
    logging.basicConfig(
        level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr
    )
    logging.getLogger("nested_automata").setLevel(level)


def load_config_callback(
    ctx: click.Context, param: click.Parameter, value: Optional[str]
) -> Optional[str]:
    """Load the config file and install its values as option defaults.

    Raises:
        click.BadParameter: If an explicit file is missing or invalid.
    """
    config_path = Path(value) if value else None
    if config_path is not None and not config_path.exists():
        raise click.BadParameter(
            f"Config file not found: {config_path}", param=param, param_hint="--config"
        )
    try:
        yaml_config = load_yaml_config(config_path)
    except ValueError as e:
        raise click.BadParameter(str(e), param=param, param_hint="--config") from e

    if yaml_config:
        command_defaults = build_default_map(flatten_config(yaml_config)).get(
            ctx.info_name or "", {}
        )
        merged = dict(ctx.default_map or {})
        merged.update(command_defaults)
        ctx.default_map = merged
    return value


config_option = click.option(
    "--config",
    "-c",
    callback=load_config_callback,
    is_eager=True,
    expose_value=False,
    help="Path to config file (default: .nested-automata.yml)",
    type=click.Path(dir_okay=False),
)

spec_option = click.option(
    "--spec",
    "spec_path",
    required=True,
    help="Path to the spec document (JSON, schema nested-automata/1)",
    type=click.Path(dir_okay=False),
)

out_option = click.option(
    "--out",
    default=None,
    help="Output file (default: write to stdout)",
    type=click.Path(dir_okay=False),
)


def run_command(action: Callable[[], int]) -> None:
    """Run a command body and exit with the code for its outcome."""
    try:
        code = action()
    except SpecValidationError as e:
        click.echo(f"Error: invalid spec: {e}", err=True)
        code = EXIT_VALIDATION
    except OSError as e:
        click.echo(f"Error: {e}", err=True)
        code = EXIT_IO
    except ValueError as e:
        click.echo(f"Error: {e}", err=True)
        code = EXIT_VALIDATION
    sys.exit(code)


def emit(text: str, out: Optional[str], summary: str) -> None:
    """Write ``text`` to ``out`` and echo a summary, or echo text to stdout."""
    if out is None:
        click.echo(text, nl=False)
    else:
        write_text(text, out)
        click.echo(summary)


def _spec_sha256(spec: ParsedSpec) -> str:
    return spec_hash(serialize_spec(spec))


@click.group()
@click.version_option(version=__version__, prog_name="nested-automata")
@click.option(
    "--verbose",
    "-v",
    count=True,
    help="Increase log verbosity (-v info, -vv debug)",
)
def cli(verbose: int) -> None:
    """nested-automata: simulate and verify nested cellular automata.

    Evaluates automata by local recurrence and by the factorized global map,
    composes them into nested space-times, and computes nested propagation
    speeds.
    """
    configure_logging(verbose)


@cli.command()
@config_option
@spec_option
@click.option(
    "--initial",
    default=None,
    help=(
        "Initial window: a file, or comma-separated digit strings "
        "(default: from spec)"
    ),
)
@click.option(
    "--steps",
    default=DEFAULT_RUN_STEPS,
    show_default=True,
    help="Number of slices to evolve",
    type=click.IntRange(min=0),
)
@out_option
def run(spec_path: str, initial: Optional[str], steps: int, out: Optional[str]) -> None:
    """Evolve the automaton and write its trajectory as JSON.

    Example:
        \b
        $ nested-automata run --spec xor.json --initial 00001000 --steps 4
    """

    def action() -> int:
        spec = parse_spec(spec_path)
        automaton = spec.automaton
        if initial is not None:
            window = parse_initial_option(initial, automaton, Path(spec_path).parent)
        elif spec.initial is not None:
            window = spec.initial
        else:
            raise SpecValidationError(
                "initial", "no initial condition: give --initial or an initial entry"
            )
        history = Trajectory.from_window(automaton.frame, window)
        if isinstance(automaton, Automaton):
            trajectory = evaluate_global(automaton, history, steps)
        else:
            trajectory = evaluate_nested(automaton, history, steps)
        document = trajectory_document(
            trajectory, spec.alphabet.states, _spec_sha256(spec)
        )
        summary = f"Wrote {len(trajectory.times)} slices to {out}"
        emit(dumps_json(document), out, summary)
        return EXIT_OK

    run_command(action)


@cli.command()
@config_option
@spec_option
@click.option(
    "--mode",
    default=DEFAULT_MODE,
    show_default=True,
    type=click.Choice(["exhaustive", "random"]),
    help="Enumerate every initial window or sample seeded random ones",
)
@click.option(
    "--samples",
    default=DEFAULT_SAMPLES,
    show_default=True,
    type=click.IntRange(min=1),
    help="Windows drawn in random mode",
)
@click.option(
    "--seed",
    envvar=ENV_SEED,
    default=DEFAULT_SEED,
    show_default=True,
    type=int,
    help=f"Random-mode seed (env: {ENV_SEED})",
)
@click.option(
    "--max-configs",
    envvar=ENV_MAX_CONFIGS,
    default=DEFAULT_MAX_CONFIGS,
    show_default=True,
    type=click.IntRange(min=1),
    help=f"Cap on exhaustive enumeration (env: {ENV_MAX_CONFIGS})",
)
@click.option(
    "--steps",
    default=DEFAULT_VERIFY_STEPS,
    show_default=True,
    type=click.IntRange(min=1),
    help="Slices compared per initial window",
)
@click.option(
    "--max-table-size",
    default=DEFAULT_MAX_TABLE_SIZE,
    show_default=True,
    type=click.IntRange(min=1),
    help="Largest explicit table built when flattening nested specs",
)
@out_option
def verify(
    spec_path: str,
    mode: str,
    samples: int,
    seed: int,
    max_configs: int,
    steps: int,
    max_table_size: int,
    out: Optional[str],
) -> None:
    """Verify a spec: factorization for flat automata, flattening for nested.

    Exits 0 on full agreement and 1 with a mismatch listing otherwise.
    """

    def action() -> int:
        spec = parse_spec(spec_path)
        automaton = spec.automaton
        if isinstance(automaton, Automaton):
            report = verify_factorization(
                automaton,
                mode=mode,
                steps=steps,
                samples=samples,
                seed=seed,
                max_configs=max_configs,
                argument_order=spec.argument_order,
            )
        else:
            report = verify_flattening(
                automaton,
                mode=mode,
                steps=steps,
                samples=samples,
                seed=seed,
                max_configs=max_configs,
                max_table_size=max_table_size,
            )
        if out is not None:
            write_text(dumps_json(report_document(report, _spec_sha256(spec))), out)

        status = "PASS" if report.passed else "FAIL"
        click.echo(
            f"{status}: {report.check} check ({report.mode}), "
            f"{report.configurations} configurations x {report.steps} steps, "
            f"{report.mismatch_count} mismatches"
        )
        for mismatch in report.mismatches[:MAX_ECHOED_MISMATCHES]:
            click.echo(
                f"  mismatch: config={mismatch.config} r={list(mismatch.r)} "
                f"t={mismatch.t} ({mismatch.component})"
            )
        return EXIT_OK if report.passed else EXIT_MISMATCH

    run_command(action)


@cli.command()
@config_option
@spec_option
@click.option(
    "--u",
    "u",
    default=None,
    type=click.FloatRange(min=0, min_open=True),
    help=f"Global speed u (default: spec value, else {DEFAULT_U})",
)
@out_option
def speeds(spec_path: str, u: Optional[float], out: Optional[str]) -> None:
    """Write the per-level, per-shift speed table as CSV."""

    def action() -> int:
        spec = parse_spec(spec_path)
        global_speed = u if u is not None else (spec.u or DEFAULT_U)
        rows = speed_table(spec.automaton, global_speed)
        emit(speed_table_csv(rows), out, f"Wrote {len(rows)} rows to {out}")
        flagged = sum(1 for row in rows if row.flagged)
        if flagged:
            click.echo(
                f"Warning: {flagged} flagged rows exceed u={global_speed}", err=True
            )
        return EXIT_OK

    run_command(action)


def _parse_point(value: str, option: str) -> tuple[tuple[float, ...], float]:
    try:
        space, time = value.split(":")
        return tuple(float(c) for c in space.split(",")), float(time)
    except ValueError as e:
        raise click.BadParameter(
            f"expected r:t with comma-separated axes, got {value!r}",
            param_hint=option,
        ) from e


def _parse_speeds(value: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in value.split(":"))
    except ValueError as e:
        raise click.BadParameter(
            f"expected level speeds separated by ':', got {value!r}",
            param_hint="--speed",
        ) from e


def _build_field(
    field_kind: str, sites: Sequence[str], threshold: float, depth: int
) -> NestedField:
    if field_kind == "step":
        return NestedField.step(threshold, depth)
    if sites:
        points = [_parse_point(s, "--site") for s in sites]
    else:
        points = [((0.0,), 0.0)] * depth
    site = NestedCoordinate.of(*points)
    if site.depth != depth:
        raise click.BadParameter(
            f"--site gives {site.depth} levels, --coord gives {depth}",
            param_hint="--site",
        )
    return NestedField.delta(site)


@cli.command()
@config_option
@click.option(
    "--case",
    "case",
    type=click.Choice(TRACE_CASES),
    default="a",
    show_default=True,
    help="a: pure, b: processed, c: multiple signals, general: one general step",
)
@click.option(
    "--speed",
    "speed_values",
    multiple=True,
    required=True,
    help="Level speeds of one signal, e.g. 0.6:0.48 (repeat per signal for c/general)",
)
@click.option(
    "--coord",
    "coords",
    multiple=True,
    required=True,
    help="Query point per level, outermost first, as r:t (axes comma-separated)",
)
@click.option(
    "--u",
    "u",
    default=None,
    type=click.FloatRange(min=0, min_open=True),
    help=f"Global speed u (default: spec value, else {DEFAULT_U})",
)
@click.option(
    "--spec",
    "spec_path",
    default=None,
    type=click.Path(dir_okay=False),
    help="Optional spec providing u",
)
@click.option(
    "--field",
    "field_kind",
    type=click.Choice(["delta", "step"]),
    default="delta",
    show_default=True,
    help="Base field template",
)
@click.option(
    "--site",
    "sites",
    multiple=True,
    help="Delta site per level as r:t (default: origin)",
)
@click.option(
    "--threshold",
    default=0.0,
    show_default=True,
    type=float,
    help="Step field threshold",
)
@click.option(
    "--rule",
    "rule_name",
    default=None,
    help="Processing rule (default: identity for b, first for c/general)",
)
@click.option(
    "--states",
    default=2,
    show_default=True,
    type=click.IntRange(min=1),
    help="Symbol count for processing rules",
)
@click.option(
    "--steps",
    default=4,
    show_default=True,
    type=click.IntRange(min=0),
    help="Unrolled propagation steps",
)
@click.option(
    "--delay",
    "delays",
    multiple=True,
    type=float,
    help="Per-level per-step delay (default 1)",
)
@out_option
def trace(
    case: str,
    speed_values: tuple[str, ...],
    coords: tuple[str, ...],
    u: Optional[float],
    spec_path: Optional[str],
    field_kind: str,
    sites: tuple[str, ...],
    threshold: float,
    rule_name: Optional[str],
    states: int,
    steps: int,
    delays: tuple[float, ...],
    out: Optional[str],
) -> None:
    """Write a propagation trace (step, level coordinates, value) as CSV.

    Example:
        \b
        $ nested-automata trace --case a --speed 0.5 --coord 2:4 --coord 0:4
    """

    def action() -> int:
        global_speed = u
        if global_speed is None and spec_path is not None:
            global_speed = parse_spec(spec_path).u
        global_speed = global_speed or DEFAULT_U
        coord = NestedCoordinate.of(*(_parse_point(c, "--coord") for c in coords))
        field = _build_field(field_kind, sites, threshold, coord.depth)
        level_delays: Optional[tuple[float, ...]] = tuple(delays) if delays else None
        signals = [SignalPath.of(_parse_speeds(v), level_delays) for v in speed_values]

        if case in ("a", "b"):
            spec = NestedSpeedSpec(global_speed, signals[0].speeds)
            if case == "a":
                rows = trace_pure(field, spec, coord, steps, level_delays)
                value = propagate_pure(field, spec, coord, steps, level_delays)
            else:
                rule = processing_rule(rule_name or "identity", states)
                rows = trace_processed(field, spec, rule, coord, steps, level_delays)
                value = propagate_processed(
                    field, spec, rule, coord, steps, level_delays
                )
        else:
            rule = processing_rule(rule_name or "first", states)
            if case == "c":
                rows = trace_multi(field, global_speed, signals, coord, steps)
                value = propagate_multi(
                    field, global_speed, rule, signals, coord, steps
                )
            else:
                rows = trace_general(field, global_speed, signals, coord)
                value = general_formula(field, global_speed, rule, signals, coord)

        emit(trace_csv(rows), out, f"Wrote {len(rows)} trace rows to {out}")
        click.echo(f"value: {value}", err=True)
        return EXIT_OK

    run_command(action)


@cli.command(name="flatten")
@config_option
@spec_option
@click.option(
    "--max-table-size",
    default=DEFAULT_MAX_TABLE_SIZE,
    show_default=True,
    type=click.IntRange(min=1),
    help="Largest explicit table to build",
)
@out_option
def flatten_command(spec_path: str, max_table_size: int, out: Optional[str]) -> None:
    """Emit the flattened (single-level) spec with an explicit rule table."""

    def action() -> int:
        spec = parse_spec(spec_path)
        flat = flatten(spec.nested, max_table_size, explicit=True)
        flattened = ParsedSpec(
            automaton=flat, u=spec.u, initial=spec.initial, text=spec.text
        )
        emit(
            dumps_json(serialize_spec(flattened)),
            out,
            f"Wrote flattened spec (k={flat.structure.k}, m={flat.width}) to {out}",
        )
        return EXIT_OK

    run_command(action)


def _text_settings(
    spec_path: Optional[str], extents: Optional[str]
) -> tuple[tuple[int, ...], str]:
    letters = DEFAULT_LETTERS
    sizes: Optional[tuple[int, ...]] = None
    if spec_path is not None:
        spec = parse_spec(spec_path)
        if spec.text is not None:
            letters, sizes = spec.text.letters, spec.text.extents
    if extents is not None:
        try:
            sizes = tuple(int(e) for e in extents.split(","))
        except ValueError as e:
            raise click.BadParameter(str(e), param_hint="--extents") from e
    if sizes is None or len(sizes) != 4:
        raise click.BadParameter(
            "give word,sentence,paragraph,document extents (or a spec with text)",
            param_hint="--extents",
        )
    return sizes, letters


@cli.command(name="encode-text")
@click.option(
    "--spec",
    "spec_path",
    default=None,
    type=click.Path(dir_okay=False),
    help="Spec with a text entry (letters and extents)",
)
@click.option(
    "--extents", default=None, help="word,sentence,paragraph,document extents"
)
@click.option(
    "--max-symbols",
    default=None,
    type=click.IntRange(min=2),
    help="Alphabet size bound",
)
@click.option(
    "--input",
    "input_path",
    default=None,
    type=click.Path(dir_okay=False),
    help="Read text from a file",
)
@click.argument("text", required=False)
@out_option
def encode_text_command(
    spec_path: Optional[str],
    extents: Optional[str],
    max_symbols: Optional[int],
    input_path: Optional[str],
    text: Optional[str],
    out: Optional[str],
) -> None:
    """Encode text into the nested hierarchy (JSON)."""

    def action() -> int:
        sizes, letters = _text_settings(spec_path, extents)
        if input_path is not None:
            source = Path(input_path).read_text(encoding="utf-8")
        else:
            source = text or ""
        encoded = encode_text(source, sizes, letters, max_symbols)
        payload = encoded.to_payload()
        document: dict[str, Any] = {"metadata": metadata(None), "payload": payload}
        emit(dumps_json(document), out, f"Encoded {len(source)} characters to {out}")
        return EXIT_OK

    run_command(action)


@cli.command(name="decode-text")
@click.option(
    "--input",
    "input_path",
    required=True,
    type=click.Path(dir_okay=False),
    help="Hierarchy document",
)
@out_option
def decode_text_command(input_path: str, out: Optional[str]) -> None:
    """Decode a hierarchy document back into text."""

    def action() -> int:
        data = get_data_from_file(input_path)
        text = decode_text(HierarchyText.from_payload(data.get("payload", data)))
        emit(text, out, f"Decoded {len(text)} characters to {out}")
        return EXIT_OK

    run_command(action)


def main() -> None:
    cli()


if __name__ == "__main__":
    main()

