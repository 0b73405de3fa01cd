"""
Command-line entry point.

    python main.py analyze  --spec test_data/null_wave_spec.yaml
    python main.py evolve   --preset linear-kg --s-end 4 --out runs/linear-kg
    python main.py verify   --selection frames --seed 1
    python main.py operators

Exit codes: 0 ok, 1 check failed, 2 usage or parse error, 3 numerical
breakdown.
"""

import argparse
import logging
import sys
import time
from typing import List, Optional

import settings
from commands import analyze, evolve, operators, verify
from models.run import RunConfig
from models.verification import SELECTIONS
from services.monitoring import RunMetrics, configure_logging
from services.presets import list_presets
from storage.run_store import open_store
from utils.helpers import handle_lab_error

logger = logging.getLogger(__name__)

COMMANDS = {
    "analyze": "Decide the null and non-blow-up conditions of a system spec",
    "evolve": "Evolve a system on the hyperboloidal foliation",
    "verify": "Run the identity and inequality verification suites",
    "operators": "Print commutator tables and the evolution-chart wave operator",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="solver config YAML")
    common.add_argument("--spec", help="system spec YAML")
    common.add_argument("--preset", choices=list_presets(), help="built-in configuration")
    common.add_argument("--out", help="output directory (default $HYPERFOL_OUTPUT_DIR or ./runs)")
    common.add_argument("--seed", type=int, default=0, help="seed for every random sample")
    common.add_argument("--threads", type=int, help="worker threads ($HYPERFOL_THREADS wins)")
    common.add_argument("--verbose", "-v", action="store_true", help="log at DEBUG")

    parser = argparse.ArgumentParser(description="Hyperboloidal foliation numerical lab")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("analyze", parents=[common], help=COMMANDS["analyze"])

    evolve_parser = sub.add_parser("evolve", parents=[common], help=COMMANDS["evolve"])
    evolve_parser.add_argument("--force", action="store_true", help="evolve even if the structure analysis fails")
    evolve_parser.add_argument("--resolution", type=float, help="grid spacing h")
    evolve_parser.add_argument("--s-end", type=float, help="final slice label")
    evolve_parser.add_argument("--order", type=int, choices=(2, 4), help="stencil order")
    evolve_parser.add_argument("--zi-order", type=int, choices=(0, 1, 2, 3), help="max |I| of the Z^I energies")

    verify_parser = sub.add_parser("verify", parents=[common], help=COMMANDS["verify"])
    verify_parser.add_argument("--selection", action="append", choices=SELECTIONS,
                               help="suite to run; repeatable (default all)")
    verify_parser.add_argument("--resolution", type=float, help="coarsest spacing of the convergence studies")
    verify_parser.add_argument("--order", type=int, choices=(2, 4), default=4, help="stencil order")

    sub.add_parser("operators", parents=[common], help=COMMANDS["operators"])
    return parser


def run_command(args: argparse.Namespace) -> int:
    config = RunConfig(
        command=args.command,
        spec_path=args.spec,
        config_path=args.config,
        preset=args.preset,
        output_dir=settings.get_output_dir(args.out),
        selections=getattr(args, "selection", None) or ["all"],
        seed=args.seed,
        threads=settings.get_thread_count(args.threads),
        force=getattr(args, "force", False),
    )
    store = open_store(config.output_dir)
    if config.command == "analyze":
        return analyze.run(config, store)
    if config.command == "evolve":
        config = evolve.resolve(config, args.resolution, args.order, args.zi_order, args.s_end)
        return evolve.run(config, store)
    if config.command == "verify":
        return verify.run(config, store, resolution=args.resolution, order=args.order)
    return operators.run(config, store)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(verbose=args.verbose)
    start_time = time.time()
    try:
        code = run_command(args)
    except Exception as e:
        code = handle_lab_error(e)
    RunMetrics.record(f"command:{args.command}", time.time() - start_time)
    logger.info(f"{args.command} finished with exit code {code} in {time.time() - start_time:.2f}s")
    return code


if __name__ == "__main__":
    sys.exit(main())
