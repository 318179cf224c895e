import os
import json
import logging
import tempfile
import warnings
import typer

from contextlib import contextmanager
from enum import Enum
from pathlib import Path
from typing import Iterable, List, Optional, Union

from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table
from rich.text import Text

from itgpy import projection, render, simulation
from itgpy.dsl import ITGReader, ITGWriter, ParseDiagnostic
from itgpy.model import (
    Diagnostic,
    SystemModel,
    entity_sets,
    interfaces,
    reachability_lint,
    validate,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_DIAGNOSTICS = 1
EXIT_USAGE = 2
EXIT_IO = 3

COLOR_ENV = "SBC_ITG_COLOR"

app = typer.Typer(
    help="Compile, project and simulate interaction transition graphs.",
    add_completion=False,
    no_args_is_help=True,
)


class View(str, Enum):
    ibd = "ibd"
    smd = "smd"
    ad = "ad"
    itgr = "itgr"


class OutputFormat(str, Enum):
    csv = "csv"
    dot = "dot"
    json = "json"


class PolicyChoice(str, Enum):
    uniform = "uniform"
    roundrobin = "roundrobin"


def _color_enabled() -> bool:
    value = os.environ.get(COLOR_ENV, "auto").strip().lower()
    if value not in ("never", "auto"):
        logger.warning(
            "%s=%r is not one of never, auto; using auto", COLOR_ENV, value
        )
        return True
    return value == "auto"


def _console(stderr: bool = True) -> Console:
    if _color_enabled():
        return Console(stderr=stderr, highlight=False)
    return Console(
        stderr=stderr, no_color=True, color_system=None, highlight=False
    )


def _configure_logging(verbose: bool) -> None:
    handler = RichHandler(
        console=_console(), show_path=False, show_time=False, markup=False
    )
    package_logger = logging.getLogger("itgpy")
    package_logger.handlers = [handler]
    package_logger.setLevel(logging.DEBUG if verbose else logging.WARNING)
    package_logger.propagate = False


@contextmanager
def _logged_warnings():
    """Route `warnings.warn` calls made inside the block to the logger."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        yield
    for warning in caught:
        logger.warning("%s", warning.message)


def _print_diagnostics(
    path: Path,
    diagnostics: Iterable[Union[Diagnostic, ParseDiagnostic]],
) -> None:
    console = _console()
    for diagnostic in diagnostics:
        if isinstance(diagnostic, ParseDiagnostic):
            code, span = diagnostic.code, diagnostic.span
            style = "bold red"
        else:
            code, span = diagnostic.rule, diagnostic.span
            style = "bold red" if diagnostic.severity == "error" else "yellow"
        line, column = (span.line, span.column) if span else (1, 1)
        console.print(
            Text.assemble(
                f"{path}:{line}:{column}: ", (code, style),
                f": {diagnostic.message}",
            ),
            soft_wrap=True,
        )


def _load(path: Path) -> SystemModel:
    """Read and parse a model file, exiting on I/O or parse errors."""
    try:
        reader = ITGReader(itg_file=path)
    except (OSError, UnicodeDecodeError) as error:
        _console().print(
            Text(f"{path}: cannot read file: {error}"), soft_wrap=True
        )
        raise typer.Exit(EXIT_IO)
    parse_errors = reader.get_diagnostics()
    if parse_errors:
        _print_diagnostics(path, parse_errors)
        raise typer.Exit(EXIT_DIAGNOSTICS)
    return reader.get_model()


def _load_valid(path: Path) -> SystemModel:
    model = _load(path)
    diagnostics = validate(model)
    if diagnostics:
        _print_diagnostics(path, diagnostics)
        raise typer.Exit(EXIT_DIAGNOSTICS)
    return model


def _emit(text: str, out: Optional[Path], default_name: str) -> None:
    """Write to standard output, or atomically to `out`.

    The text goes to a temporary file in the target directory first and
    replaces the target only once fully written.
    """
    if out is None:
        typer.echo(text, nl=False)
        return
    target = out / default_name if out.is_dir() else out
    tmp_name = None
    try:
        with tempfile.NamedTemporaryFile(
            "w", dir=target.parent, prefix=f".{target.name}.", suffix=".tmp",
            delete=False, encoding="utf-8", newline="",
        ) as tmp:
            tmp_name = tmp.name
            tmp.write(text)
        os.replace(tmp_name, target)
    except OSError as error:
        if tmp_name is not None and os.path.exists(tmp_name):
            os.unlink(tmp_name)
        _console().print(
            Text(f"{target}: cannot write file: {error}"), soft_wrap=True
        )
        raise typer.Exit(EXIT_IO)
    logger.info("wrote %s", target)


@app.callback()
def main(
    verbose: bool = typer.Option(
        False, "--verbose", "-v", help="Log debug messages to stderr."
    ),
):
    _configure_logging(verbose)


@app.command("validate")
def validate_command(
    model_path: Path = typer.Argument(..., help="Path to a .itg model."),
):
    """Check a model and print one line per diagnostic.

    Unreachable states are reported as warnings and do not fail the check.
    """
    model = _load(model_path)
    diagnostics = validate(model)
    _print_diagnostics(model_path, diagnostics)
    if diagnostics:
        logger.info("%s: %d diagnostic(s)", model_path, len(diagnostics))
        raise typer.Exit(EXIT_DIAGNOSTICS)
    _print_diagnostics(model_path, reachability_lint(model))
    logger.info("%s: valid", model_path)


@app.command("project")
def project_command(
    model_path: Path = typer.Argument(..., help="Path to a .itg model."),
    view: View = typer.Argument(..., help="View to project."),
    fmt: OutputFormat = typer.Option(
        OutputFormat.csv, "--format", "-f", help="Output format."
    ),
    out: Optional[Path] = typer.Option(
        None, "--out", "-o",
        help="Output file, or a directory for <model>.<view>.<format>.",
    ),
):
    """Project a view of a valid model and render it."""
    model = _load_valid(model_path)
    relation = projection.project(model, view.value)
    if fmt == OutputFormat.csv:
        text = render.to_csv(relation).text
    elif fmt == OutputFormat.json:
        text = json.dumps(render.to_json(relation), indent=1) + "\n"
    elif view == View.ibd:
        text = render.to_dot_ibd(relation, model).text
    elif view == View.smd:
        text = render.to_dot_smd(relation, model).text
    elif view == View.ad:
        text = render.to_dot_ad(relation, model).text
    else:
        text = render.to_dot_itg(model).text
    logger.info(
        "projected %s of %s: %d rows", view.value, model.name, len(relation)
    )
    _emit(text, out, render.artifact_name(model.name, view.value, fmt.value))


@app.command("simulate")
def simulate_command(
    model_path: Path = typer.Argument(..., help="Path to a .itg model."),
    steps: int = typer.Option(
        10, "--steps", "-n", min=0, help="Maximum number of steps."
    ),
    policy: PolicyChoice = typer.Option(
        PolicyChoice.roundrobin, "--policy", help="Choice policy."
    ),
    seed: Optional[int] = typer.Option(
        None, "--seed", min=0, max=2**64 - 1,
        help="Seed for the uniform policy.",
    ),
):
    """Run a model and print the trace, one tab-separated step per line."""
    if policy == PolicyChoice.uniform and seed is None:
        raise typer.BadParameter(
            "the uniform policy requires a seed", param_hint="--seed"
        )
    model = _load_valid(model_path)
    if policy == PolicyChoice.uniform:
        choice = simulation.Policy.uniform_random(seed)
    else:
        choice = simulation.Policy.round_robin()
    sim = simulation.ITGSim(model, choice)
    trace = sim.run(steps)
    if len(trace) < steps:
        _console().print(
            Text(
                f"deadlock after {len(trace)} step(s) at {sim.configuration}"
            ),
            soft_wrap=True,
        )
    logger.info("simulated %d step(s) of %s", len(trace), model.name)
    typer.echo(simulation.format_trace(trace), nl=False)


def _unknown_names(model: SystemModel, labels) -> List[str]:
    problems = []
    for number, (caller, channel, callee) in enumerate(labels, start=1):
        for agent in (caller, callee):
            if agent not in model.agent_index:
                problems.append(f"step {number}: unknown agent '{agent}'")
        if channel not in model.channel_index:
            problems.append(f"step {number}: unknown channel '{channel}'")
    return problems


@app.command("accepts")
def accepts_command(
    model_path: Path = typer.Argument(..., help="Path to a .itg model."),
    trace_path: Path = typer.Argument(
        ..., help="Trace file with caller<TAB>channel<TAB>callee lines."
    ),
):
    """Decide whether the model can produce a trace."""
    model = _load_valid(model_path)
    try:
        text = trace_path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as error:
        _console().print(
            Text(f"{trace_path}: cannot read file: {error}"), soft_wrap=True
        )
        raise typer.Exit(EXIT_IO)
    try:
        labels = simulation.read_trace(text)
    except ValueError as error:
        _console().print(Text(f"{trace_path}: {error}"), soft_wrap=True)
        raise typer.Exit(EXIT_DIAGNOSTICS)
    problems = _unknown_names(model, labels)
    if problems:
        console = _console()
        for problem in problems:
            console.print(Text(f"{trace_path}: {problem}"), soft_wrap=True)
        raise typer.Exit(EXIT_DIAGNOSTICS)
    result = simulation.accepts(model, labels)
    if not result.accepted:
        typer.echo(f"rejected at step {result.rejected_at}")
        raise typer.Exit(EXIT_DIAGNOSTICS)
    typer.echo("accepted")
    for config in result.witness:
        typer.echo(str(config))


@app.command("print")
def print_command(
    model_path: Path = typer.Argument(..., help="Path to a .itg model."),
    out: Optional[Path] = typer.Option(
        None, "--out", "-o", help="Output file."
    ),
):
    """Reformat a model as canonical .itg text."""
    model = _load(model_path)
    with _logged_warnings():
        text = ITGWriter(model).get_itg()
    _emit(text, out, f"{model.name}.itg")


@app.command("info")
def info_command(
    model_path: Path = typer.Argument(..., help="Path to a .itg model."),
):
    """Show entity-set sizes and the channel interface of every agent."""
    model = _load_valid(model_path)
    console = _console(stderr=False)

    counts = Table(title=f"{model.name} entity sets")
    counts.add_column("entity set")
    counts.add_column("size", justify="right")
    for name, size in entity_sets(model).counts().items():
        counts.add_row(name, str(size))
    console.print(counts)

    agents = Table(title="interfaces")
    agents.add_column("agent")
    agents.add_column("kind")
    agents.add_column("required")
    agents.add_column("provided")
    for agent_id, interface in interfaces(model).items():
        agent = model.agent_index.get(agent_id)
        agents.add_row(
            agent_id,
            agent.kind if agent else "",
            ", ".join(interface.required),
            ", ".join(interface.provided),
        )
    console.print(agents)


if __name__ == "__main__":
    app()
