"""
hlmax Command Line
Evaluate averaging, maximal and integral-functions, run p-sweeps and
verification suites, and emit CSV, JSON and SVG artifacts
"""
import argparse
import dataclasses
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from hlmax import __version__
from hlmax.analysis.catalog import make_function, make_weight
from hlmax.analysis.operators import PExponent, integral_values, p_sweep, uses_exact_path
from hlmax.analysis.quadrature import EstimateKind
from hlmax.analysis.spaces import SpaceInstance, SpacePoint, geodesic_segment, parse_space
from hlmax.analysis.verify import run_suite, summarize
from hlmax.config import QuadratureConfig, get_config, load_config_file
from hlmax.errors import (
    ConfigurationError,
    DomainError,
    NumericError,
    ParseError,
    UnsupportedInputError,
    UsageError,
    ValidationError,
)
from hlmax.utils.io_utils import csv_text, dumps_report, emit, read_csv_rows
from hlmax.utils.logger import LoggerContext, package_logger, setup_logger
from hlmax.utils.metrics import TimingCollector
from hlmax.utils.plotting import profile_svg, save_svg, sweep_svg

logger = setup_logger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3

EVAL_HEADER = ("space", "function", "weight", "p", "point", "value", "error_bound", "kind", "seed")
SWEEP_HEADER = ("p", "i_value", "normalized", "gap_to_max", "maximal")

DEFAULT_SWEEP = "1,2,4,8,16,32,64,128,256"

_QUADRATURE_FIELDS = {f.name for f in dataclasses.fields(QuadratureConfig)}


@dataclass
class RunConfig:
    """Resolved settings of one invocation"""
    command: str
    space: str = "real-line"
    function: Optional[str] = None
    weight: str = "exp"
    p: Optional[str] = None
    points: Sequence[str] = ("e",)
    grid: Optional[str] = None
    suite: str = "all"
    out: Optional[str] = None
    plot: Optional[str] = None
    input: Optional[str] = None
    include_timing: bool = False
    quadrature: QuadratureConfig = dataclasses.field(default_factory=QuadratureConfig)


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--space", help="real-line, euclidean:<n>, affine-left or affine-right")
    shared.add_argument("--function", help="Test function descriptor, e.g. indicator-ball:0:1")
    shared.add_argument("--weight", help="Radius weight: exp, gauss, uniform:<R>, table:<path>, adaptive")
    shared.add_argument("--p", help="Exponent or comma-separated exponents (>= 1 or inf)")
    shared.add_argument("--point", action="append", dest="points", help="Point encoding (repeatable)")
    shared.add_argument("--grid", help="<center>:<radius>:<n> points on a geodesic segment")
    shared.add_argument("--seed", type=int, help="Master seed (default 42)")
    shared.add_argument("--mc-samples", type=int, dest="mc_samples", help="Monte Carlo samples per ball (default 100000)")
    shared.add_argument("--threads", type=int, help="Worker threads (default HLMAX_THREADS or physical cores)")
    shared.add_argument("--out", help="Output file (stdout when omitted)")
    shared.add_argument("--plot", help="SVG output file")
    shared.add_argument("--config", help="JSON run configuration; flags take precedence")
    shared.add_argument("--suite", help="Verification suite")
    shared.add_argument("--input", help="CSV produced by eval or sweep (plot command)")
    shared.add_argument("--include-timing", action="store_true", default=None, dest="include_timing",
                        help="Attach elapsed_ms to verification reports")
    shared.add_argument("-v", "--verbose", action="store_true", help="Debug logging")

    parser = argparse.ArgumentParser(
        prog="hlmax",
        description="Hardy-Littlewood maximal and integral-functions on metric measure spaces",
    )
    parser.add_argument("--version", action="version", version=f"hlmax {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("eval", parents=[shared], help="Evaluate I_{p,w}f (p=inf gives Mf) at points")
    commands.add_parser("sweep", parents=[shared], help="p-sweep of I_{p,w}f(x) against Mf(x)")
    commands.add_parser("verify", parents=[shared], help="Run a verification suite")
    commands.add_parser("plot", parents=[shared], help="Plot an eval or sweep CSV")
    return parser


def resolve(args: argparse.Namespace) -> RunConfig:
    """
    Merge flags, the optional config file, environment and defaults

    Args:
        args: Parsed command line

    Returns:
        RunConfig
    """
    file_values: Dict[str, Any] = load_config_file(Path(args.config)) if args.config else {}
    flag_names = {"space", "function", "weight", "p", "point", "points", "grid", "seed", "mc_samples",
                  "threads", "out", "plot", "suite", "input", "include_timing"}
    unknown = set(file_values) - flag_names - _QUADRATURE_FIELDS
    if unknown:
        raise ConfigurationError(f"Unknown config keys: {', '.join(sorted(unknown))}")

    def pick(name: str, default: Any = None) -> Any:
        flag = getattr(args, name, None)
        if flag is not None:
            return flag
        return file_values.get(name, default)

    points = args.points or file_values.get("points") or file_values.get("point") or ["e"]
    if isinstance(points, str):
        points = [points]

    p_value = pick("p")
    if isinstance(p_value, (list, tuple)):
        p_value = ",".join(str(v) for v in p_value)

    overrides = {k: v for k, v in file_values.items() if k in _QUADRATURE_FIELDS}
    overrides.update({
        "master_seed": pick("seed"),
        "mc_samples": pick("mc_samples"),
        "threads": pick("threads"),
    })
    try:
        quadrature = get_config().quadrature(**overrides)
    except TypeError as e:
        raise ConfigurationError(str(e)) from e

    return RunConfig(
        command=args.command,
        space=pick("space", "real-line"),
        function=pick("function"),
        weight=pick("weight", "exp"),
        p=None if p_value is None else str(p_value),
        points=[str(p) for p in points],
        grid=pick("grid"),
        suite=pick("suite", "all"),
        out=pick("out"),
        plot=pick("plot"),
        input=pick("input"),
        include_timing=bool(pick("include_timing", False)),
        quadrature=quadrature,
    )


def parse_exponents(text: str) -> List[PExponent]:
    tokens = [t for t in text.split(",") if t.strip()]
    if not tokens:
        raise ParseError("Empty exponent list", text)
    return [PExponent.parse(t) for t in tokens]


def parse_grid(space: SpaceInstance, text: str) -> List[tuple]:
    """
    Parse <center>:<radius>:<n>

    Returns:
        List of (signed geodesic coordinate, SpacePoint)
    """
    parts = text.rsplit(":", 2)
    if len(parts) != 3:
        raise ParseError("Grid must be <center>:<radius>:<n>", text)
    center = space.parse_point(parts[0])
    try:
        radius = float(parts[1])
        n = int(parts[2])
    except ValueError as e:
        raise ParseError("Invalid grid radius or size", text) from e
    if n < 1 or not radius >= 0:
        raise ParseError("Grid needs n >= 1 and radius >= 0", text)
    return geodesic_segment(space, center, radius, n)


def _require_function(run: RunConfig) -> str:
    if not run.function:
        raise UsageError(f"{run.command} needs --function")
    return run.function


def cmd_eval(run: RunConfig) -> int:
    """
    Evaluate I_{p,w}f at points; one CSV row per (point, p)

    Returns:
        Exit code
    """
    cfg = run.quadrature
    space = parse_space(run.space)
    f = make_function(space, _require_function(run))
    w = make_weight(run.weight, space, cfg)
    exponents = parse_exponents(run.p or "1")

    if run.grid:
        segment = parse_grid(space, run.grid)
        coords = [t for t, _ in segment]
        points: List[SpacePoint] = [pt for _, pt in segment]
    else:
        points = [space.parse_point(text) for text in run.points]
        coords = list(range(len(points)))

    X = np.array([pt.as_array() for pt in points])
    fields = integral_values(space, f, w, exponents, X, cfg)
    exact = f.is_zero or uses_exact_path(space, f)
    kind = EstimateKind.DETERMINISTIC if exact else EstimateKind.MONTE_CARLO

    rows = []
    for i, pt in enumerate(points):
        for p in exponents:
            field = fields[p]
            rows.append((space.descriptor, f.descriptor, w.name, str(p), str(pt),
                         float(field.values[i]), float(field.error_bounds[i]), kind.value, cfg.master_seed))
    emit(csv_text(EVAL_HEADER, rows), run.out)

    if run.plot:
        first = fields[exponents[0]]
        label = "Mf" if exponents[0].is_infinite else f"I_{exponents[0]},{w.name} f"
        save_svg(profile_svg(coords, first.values.tolist(), first.error_bounds.tolist(),
                             title=f"{label} on {space.descriptor}", ylabel=label), run.plot)

    logger.info(f"eval: {len(rows)} values ({kind.value})")
    return EXIT_OK


def cmd_sweep(run: RunConfig) -> int:
    """
    p-sweep at one point; CSV rows p,i_value,normalized,gap_to_max,maximal

    Returns:
        Exit code
    """
    cfg = run.quadrature
    space = parse_space(run.space)
    f = make_function(space, _require_function(run))
    w = make_weight(run.weight, space, cfg)
    x = space.parse_point(run.points[0])

    rows = p_sweep(space, f, w, x, parse_exponents(run.p or DEFAULT_SWEEP), cfg)
    table = [(str(r.p), r.i_value.value, r.normalized, r.gap_to_max, r.maximal.value) for r in rows]
    emit(csv_text(SWEEP_HEADER, table), run.out)

    if run.plot:
        svg = sweep_svg([r.p.value for r in rows], [r.normalized for r in rows], rows[0].maximal.value,
                        title=f"{f.descriptor} at {x} ({w.name} weight)")
        save_svg(svg, run.plot)
    return EXIT_OK


def cmd_verify(run: RunConfig) -> int:
    """
    Run a suite and write the JSON report

    Returns:
        0 when no check failed (inconclusive checks do not fail the run), else 1
    """
    collector = TimingCollector()
    reports = run_suite(run.suite, run.quadrature, include_timing=run.include_timing, collector=collector)
    emit(dumps_report([r.to_dict() for r in reports]) + "\n", run.out)

    counts = summarize(reports)
    sys.stderr.write(
        f"verify {run.suite}: {len(reports)} checks, {counts['pass']} pass, "
        f"{counts['inconclusive']} inconclusive, {counts['fail']} fail\n"
    )
    return EXIT_OK if counts["fail"] == 0 else 1


def _profile_axis(points: List[str]) -> List[float]:
    """First coordinate that varies along the rows (row index when none does)"""
    coords = [[float(c) for c in text.split(",")] for text in points]
    for axis in range(len(coords[0])):
        column = [c[axis] for c in coords]
        if len(set(column)) > 1:
            return column
    return [float(i) for i in range(len(coords))]


def cmd_plot(run: RunConfig) -> int:
    """
    Re-plot a CSV written by eval or sweep

    Returns:
        Exit code
    """
    if not run.input or not run.plot:
        raise UsageError("plot needs --input <csv> and --plot <svg>")
    rows = read_csv_rows(run.input)
    if not rows:
        raise ParseError("CSV has no data rows", run.input)

    try:
        if set(SWEEP_HEADER) <= set(rows[0]):
            p_values = [PExponent.parse(r["p"]).value for r in rows]
            svg = sweep_svg(p_values, [float(r["normalized"]) for r in rows], float(rows[0]["maximal"]))
        elif set(EVAL_HEADER) <= set(rows[0]):
            wanted = run.p or rows[0]["p"]
            selected = [r for r in rows if r["p"] == str(PExponent.parse(wanted))]
            if not selected:
                raise UsageError(f"No rows with p={wanted} in {run.input}")
            svg = profile_svg(_profile_axis([r["point"] for r in selected]),
                              [float(r["value"]) for r in selected],
                              [float(r["error_bound"]) for r in selected],
                              title=f"{selected[0]['function']} on {selected[0]['space']}")
        else:
            raise ParseError("CSV header matches neither eval nor sweep output", ",".join(rows[0]))
    except (KeyError, ValueError) as e:
        if isinstance(e, (ParseError, UsageError)):
            raise
        raise ParseError(f"Malformed CSV row: {e}", run.input) from e

    save_svg(svg, run.plot)
    return EXIT_OK


COMMANDS = {
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
    "plot": cmd_plot,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run the command line

    Args:
        argv: Arguments (sys.argv[1:] when None)

    Returns:
        Exit code: 0 success, 1 failed checks, 2 usage or parse error, 3 numeric failure
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    env = get_config()
    level = "DEBUG" if args.verbose else env.LOG_LEVEL

    with LoggerContext(package_logger(env.LOG_FILE), level):
        try:
            run = resolve(args)
            logger.debug(f"Resolved run: {run}")
            return COMMANDS[run.command](run)
        except (ParseError, UsageError, ConfigurationError, DomainError, UnsupportedInputError,
                ValidationError) as e:
            sys.stderr.write(f"hlmax {args.command}: error: {e}\n")
            return EXIT_USAGE
        except NumericError as e:
            sys.stderr.write(f"hlmax {args.command}: numeric failure: {e}\n")
            return EXIT_NUMERIC
        except Exception as e:
            logger.error(f"Unexpected failure in {args.command}: {e}", exc_info=True)
            return EXIT_NUMERIC


def run_cli():
    """Console-script entry point"""
    sys.exit(main())


if __name__ == "__main__":
    run_cli()
