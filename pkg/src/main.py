"""
Main entry point for the quantum-graph NLS workbench.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

# Add the parent directory to Python path so modules can be found
current_dir = Path(__file__).resolve().parent
if str(current_dir) not in sys.path:
    sys.path.append(str(current_dir))

from errors import WorkbenchError
from export import FORMATS
from scenarios import PRESETS
from workbench import EXIT_ERROR, Workbench

logger = logging.getLogger("main")


def parse_value(text: str) -> Any:
    """Scenario parameter from text: int, float, comma list of floats, or string."""
    if "," in text:
        return [float(part) for part in text.split(",") if part.strip()]
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def parse_params(items: Optional[List[str]]) -> Dict[str, Any]:
    params = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise argparse.ArgumentTypeError(f"expected key=value, got '{item}'")
        params[key.strip().replace("-", "_")] = parse_value(value.strip())
    return params


def parse_expect(text: str) -> Tuple[int, Optional[int]]:
    """Expected Morse index from 'n,z'; 'n' alone accepts any zero count."""
    parts = [part.strip() for part in text.split(",")]
    try:
        if len(parts) == 1:
            return int(parts[0]), None
        if len(parts) == 2:
            return int(parts[0]), int(parts[1])
    except ValueError:
        pass
    raise argparse.ArgumentTypeError(f"expected n,z, got '{text}'")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qgnls", description="Edge-localized states of the cubic NLS on metric graphs")
    parser.add_argument("--config", type=Path, help="configuration file (default $QGNLS_CONFIG or ~/.qgnls/config.json)")
    parser.add_argument("--graph", help="graph file in the text format")
    parser.add_argument("--scenario", dest="preset", choices=sorted(PRESETS), help="preset graph instead of --graph")
    parser.add_argument("--param", action="append", metavar="KEY=VALUE", help="preset parameter, repeatable")
    parser.add_argument("--select", nargs="+", metavar="EDGE", help="pulse edges, overrides the file's select line")
    parser.add_argument("--allow-fake-vertices", action="store_true", help="accept degree-2 vertices in --graph")
    parser.add_argument("--eps", type=float, default=8.0, help="scaling parameter (default 8)")
    parser.add_argument("--h", type=float, help="grid step in scaled units")
    parser.add_argument("--tol", type=float, help="Newton residual tolerance")
    parser.add_argument("--out", type=Path, help="output directory")
    parser.add_argument("--seed", type=int, help="seed for random homotopy rays")
    parser.add_argument("--format", dest="formats", action="append", choices=FORMATS,
                        help="extra output format, repeatable; csv is always written")

    # Global options repeated after the command; unset ones keep the global value
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--graph", default=argparse.SUPPRESS)
    shared.add_argument("--scenario", dest="preset", choices=sorted(PRESETS), default=argparse.SUPPRESS)
    shared.add_argument("--eps", type=float, default=argparse.SUPPRESS)
    shared.add_argument("--h", type=float, default=argparse.SUPPRESS)
    shared.add_argument("--tol", type=float, default=argparse.SUPPRESS)
    shared.add_argument("--seed", type=int, default=argparse.SUPPRESS)

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[shared], help="check graph structure and the length assumptions")
    asym = sub.add_parser("asym", parents=[shared], help="leading-order Dirichlet data as CSV")
    asym.add_argument("--refine", action="store_true", help="one fixed-point step with shot bumps")
    period = sub.add_parser("period", parents=[shared], help="T_+ and its partial derivatives as CSV")
    period.add_argument("--p", type=float, required=True, help="boundary value")
    period.add_argument("--q", type=float, required=True, help="boundary flux")
    bump = sub.add_parser("bump", parents=[shared], help="shoot a single monotone bump")
    bump.add_argument("--ell", type=float, default=1.0, help="edge length, span = eps * ell (default 1)")
    bump.add_argument("--p", type=float, required=True, help="boundary value")
    bump.add_argument("--out", dest="out_file", help="sample file (default bump_eps<eps>.csv)")
    bump.add_argument("--reflect", action="store_true", help="write the even extension on [-span, span]")
    solve = sub.add_parser("solve", parents=[shared], help="Newton solve and verify the state")
    solve.add_argument("--out", dest="out_file", help="state file (default <scenario>_eps<eps>.csv)")
    spectrum = sub.add_parser("spectrum", parents=[shared], help="low spectrum, certificates and trace")
    spectrum.add_argument("--alpha-scan", action="store_true", help="scan the configured alpha grid and rays")
    spectrum.add_argument("--out", dest="out_file", help="trace file (default <scenario>_eps<eps>_trace.csv)")
    morse = sub.add_parser("morse", parents=[shared], help="Morse index (n, z) of the state")
    morse.add_argument("--expect", type=parse_expect, metavar="N,Z", help="fail with exit code 1 on a mismatch")
    show = sub.add_parser("scenario", help="print a preset graph")
    show.add_argument("name", choices=sorted(PRESETS))
    show.add_argument("--write", action="store_true", help="also write the graph file to the output directory")
    sweep = sub.add_parser("sweep", parents=[shared], help="run the pipeline over an eps ladder")
    sweep.add_argument("--ladder", type=float, nargs="+", help="eps values (default: scenario ladder)")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point.

    Returns:
        Exit code: 0 success, 1 failed expectation, 2 error
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        params = parse_params(args.param)
    except argparse.ArgumentTypeError as e:
        parser.error(str(e))

    # Logging is configured by the workbench from the loaded configuration
    workbench = Workbench(args.config, overrides={
        "grid_step": args.h, "newton_tol": args.tol, "seed": args.seed,
        "output_dir": str(args.out) if args.out else None,
    })
    if not workbench.initialize():
        logger.error("Failed to initialize workbench")
        return EXIT_ERROR

    formats = tuple(args.formats or ("csv",))
    out_file = getattr(args, "out_file", None)
    try:
        if args.command == "period":
            return workbench.period(args.p, args.q)
        if args.command == "bump":
            return workbench.bump(args.eps, args.ell, args.p, out_file, args.reflect)

        name = args.name if args.command == "scenario" else args.preset
        sc = workbench.load_scenario(args.graph, name, params, args.select,
                                     args.allow_fake_vertices, strict=args.command != "validate")
        if args.command == "validate":
            return workbench.validate(sc)
        if args.command == "asym":
            return workbench.asym(sc, args.eps, args.refine)
        if args.command == "solve":
            return workbench.solve(sc, args.eps, formats, out_file)
        if args.command == "morse":
            return workbench.morse(sc, args.eps, args.expect)
        if args.command == "spectrum":
            return workbench.spectrum(sc, args.eps, formats, args.alpha_scan, out_file)
        if args.command == "scenario":
            return workbench.show_scenario(sc, args.write)
        return workbench.sweep(sc, args.ladder, formats)

    except WorkbenchError as e:
        logger.error("%s", e)
        return EXIT_ERROR
    except OSError as e:
        logger.error("I/O error: %s", e)
        return EXIT_ERROR
    except ValueError as e:
        logger.error("Invalid input: %s", e)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
