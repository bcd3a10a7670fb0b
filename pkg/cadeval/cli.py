import json
import logging
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, List, Optional

import typer
from pydantic import ValidationError

from cadeval.config import EvalConfig
from cadeval.errors import INPUT_ERROR, AcceptanceMismatch, CadEvalError
from cadeval.report import (
    render_metric_report,
    render_table1,
    render_trend,
    render_trend_svg,
    render_weight_fit,
)
from cadeval.schemas import ReportFormatEnum
from cadeval.services import EvaluationService, ModelService, fixture_trend_pairs
from cadeval.similarity import DEFAULT_WEIGHT_GROUPS
from cadeval.utils import configure_logging, parse_weights

logger = logging.getLogger(__name__)

app = typer.Typer(
    help="Evaluate CAD models by structural complexity and geometric similarity.",
    add_completion=False,
    no_args_is_help=True,
)


class CliState:
    """Settings and output options shared by every command."""

    def __init__(
        self,
        settings: EvalConfig,
        fmt: Optional[ReportFormatEnum],
        out: Optional[Path],
    ):
        self.settings = settings
        self.fmt = fmt
        self.out = out

    def emit(self, text: str) -> None:
        if self.out is None:
            typer.echo(text, nl=False)
        else:
            self.out.write_text(text, encoding="utf-8")
            logger.info("Wrote report to %s", self.out)


def _fail(error: Exception, code: int = INPUT_ERROR) -> typer.Exit:
    typer.echo(f"Error: {error}", err=True)
    return typer.Exit(code)


@contextmanager
def _reported_errors() -> Iterator[None]:
    """Turn evaluation and file system errors into an error line and exit code."""
    try:
        yield
    except CadEvalError as e:
        raise _fail(e, e.exit_code) from e
    except OSError as e:
        raise _fail(e) from e


def _load_settings(config_file: Optional[Path]) -> EvalConfig:
    if config_file is None:
        return EvalConfig()
    try:
        values = json.loads(config_file.read_text(encoding="utf-8"))
    except (OSError, ValueError) as e:
        raise _fail(f"Cannot read config file {config_file}: {e}") from e
    if not isinstance(values, dict):
        raise _fail(f"Config file {config_file} must hold a JSON object")
    try:
        return EvalConfig(**values)
    except ValidationError as e:
        raise _fail(f"Invalid config file {config_file}: {e}") from e


@app.callback()
def main(
    ctx: typer.Context,
    fmt: Optional[ReportFormatEnum] = typer.Option(
        None, "--format", help="Report format (json, csv or md)."
    ),
    weights_similarity: Optional[str] = typer.Option(
        None, "--weights-similarity", help="K1,K2,K3,K4,K5 for the final score."
    ),
    weights_complexity: Optional[str] = typer.Option(
        None, "--weights-complexity", help="K1,K2,K3 for the composite score."
    ),
    icp_max_iter: Optional[int] = typer.Option(None, "--icp-max-iter", min=1),
    icp_tol: Optional[float] = typer.Option(None, "--icp-tol", min=0.0),
    weld_tol: Optional[float] = typer.Option(None, "--weld-tol", min=0.0),
    out: Optional[Path] = typer.Option(None, "--out", help="Write output here."),
    config_file: Optional[Path] = typer.Option(
        None, "--config", help="JSON file with configuration values."
    ),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging."),
):
    """Global options apply to every command."""
    settings = _load_settings(config_file)
    configure_logging("DEBUG" if verbose else settings.log_level)

    update = {}
    try:
        if weights_similarity is not None:
            update["similarity_weights"] = parse_weights(weights_similarity, 5)
        if weights_complexity is not None:
            update["complexity_weights"] = parse_weights(weights_complexity, 3)
    except ValueError as e:
        raise _fail(e) from e
    if icp_max_iter is not None:
        update["icp_max_iter"] = icp_max_iter
    if icp_tol is not None:
        update["icp_tolerance"] = icp_tol
    if weld_tol is not None:
        update["weld_tolerance"] = weld_tol
    if update:
        logger.debug("Overriding settings: %s", update)
        try:
            settings = EvalConfig(**{**settings.model_dump(), **update})
        except ValidationError as e:
            raise _fail(f"Invalid option: {e}") from e
    ctx.obj = CliState(settings, fmt, out)


@app.command()
def complexity(
    ctx: typer.Context,
    model: Path = typer.Argument(..., help="Model file (.stl or .scad)."),
):
    """Structural complexity of one model."""
    state: CliState = ctx.obj
    with _reported_errors():
        report = EvaluationService(state.settings).complexity(model)
        state.emit(render_metric_report(report, state.fmt or ReportFormatEnum.json))


@app.command()
def compare(
    ctx: typer.Context,
    generated: Path = typer.Argument(..., help="Generated model."),
    truth: Path = typer.Argument(..., help="Ground-truth model."),
):
    """Similarity of a generated model against the ground truth."""
    state: CliState = ctx.obj
    with _reported_errors():
        report = EvaluationService(state.settings).compare(generated, truth)
        state.emit(render_metric_report(report, state.fmt or ReportFormatEnum.json))


@app.command("repro-table1")
def repro_table1(ctx: typer.Context):
    """Re-evaluate the bundled models and check the published table."""
    state: CliState = ctx.obj
    with _reported_errors():
        report = EvaluationService(state.settings).repro_table1()
        state.emit(render_table1(report, state.fmt or ReportFormatEnum.md))
    if not report.passed:
        mismatches = [
            f"{row.modality}: {m}" for row in report.rows for m in row.mismatches
        ]
        error = AcceptanceMismatch("; ".join(mismatches))
        raise _fail(error, error.exit_code)


@app.command()
def trend(
    ctx: typer.Context,
    truth: Path = typer.Argument(..., help="Ground-truth model."),
    model: List[str] = typer.Option(
        [], "--model", "-m", help="LABEL=PATH of a generated model, in order."
    ),
    fixtures: bool = typer.Option(
        False, "--fixtures", help="Use the bundled models, in listing order."
    ),
    svg: Optional[Path] = typer.Option(
        None, "--svg", help="Also write an SVG chart."
    ),
):
    """Similarity series of several generated models against one truth."""
    state: CliState = ctx.obj
    pairs = list(fixture_trend_pairs()) if fixtures else []
    for item in model:
        label, sep, path = item.partition("=")
        if not sep or not label or not path:
            raise _fail(f"Expected LABEL=PATH, got '{item}'")
        pairs.append((label, Path(path)))
    with _reported_errors():
        series = EvaluationService(state.settings).trend(pairs, truth)
        state.emit(render_trend(series, state.fmt or ReportFormatEnum.csv))
        if svg is not None:
            svg.write_text(render_trend_svg(series), encoding="utf-8")
            logger.info("Wrote trend chart to %s", svg)


@app.command("fit-weights")
def fit_weights(
    ctx: typer.Context,
    rows: Optional[Path] = typer.Argument(
        None, help="CSV rows with a 'final' column; the published table if omitted."
    ),
    free: bool = typer.Option(
        False, "--free", help="Fit all five weights independently."
    ),
):
    """Least-squares similarity weights reproducing the final scores."""
    state: CliState = ctx.obj
    groups = [[k] for k in range(5)] if free else DEFAULT_WEIGHT_GROUPS
    with _reported_errors():
        fit = EvaluationService(state.settings).fit_weights(rows, groups)
        state.emit(render_weight_fit(fit, state.fmt or ReportFormatEnum.json))


@app.command()
def scad2stl(
    ctx: typer.Context,
    scad: Path = typer.Argument(..., help="Model in the supported OpenSCAD subset."),
    out: Path = typer.Argument(..., help="STL file to write."),
    ascii: bool = typer.Option(
        False, "--ascii", help="Write ASCII instead of binary."
    ),
):
    """Evaluate a .scad model and write its boundary mesh as STL."""
    state: CliState = ctx.obj
    with _reported_errors():
        document = ModelService(state.settings).scad_to_stl(
            scad, out, "ascii" if ascii else "binary"
        )
    typer.echo(f"Wrote {len(document)} facets to {out}", err=True)


if __name__ == "__main__":
    app()
