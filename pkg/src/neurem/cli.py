"""Command-line entry point: ``neurem {simulate,spectrum,complete,report,pipeline}``.

Exit codes: 0 success, 2 configuration or validation error, 3 numerical abort.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import pipeline
from .config import ConfigError, PipelineConfig, load_config, parse_config

EXIT_OK, EXIT_INVALID, EXIT_ABORT = 0, 2, 3

log = logging.getLogger("neurem")


def _jobs_default() -> int:
    raw = os.environ.get("NEUREM_JOBS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON config or run manifest")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--out", type=Path, default=Path("run"), help="run directory")
    common.add_argument("--baseline", choices=["somp"], help="also run the SOMP baseline")
    common.add_argument("--trials", type=int, help="Monte-Carlo spectrum trials")
    common.add_argument("--jobs", type=int, default=_jobs_default(),
                        help="worker processes (default: $NEUREM_JOBS or 1)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="neurem", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, text in [
        ("simulate", "generate ground-truth maps, sensor masks and band plans"),
        ("spectrum", "recover sub-band spectra from multi-coset samples"),
        ("complete", "complete the sparse maps with the neural Tucker solver"),
        ("report", "aggregate metrics and render heatmaps for a finished run"),
        ("pipeline", "simulate, spectrum, complete and report in sequence"),
    ]:
        sub.add_parser(name, parents=[common], help=text)
    return p


def resolve_config(args) -> PipelineConfig:
    if args.config is not None:
        cfg = load_config(args.config)
    elif args.command == "report" and (args.out / "manifest.json").exists():
        cfg = load_config(args.out / "manifest.json")
    else:
        cfg = parse_config({})
    over = {}
    if args.seed is not None:
        over["seed"] = args.seed
    if args.trials is not None:
        over["trials"] = args.trials
    if args.baseline is not None:
        over["baseline"] = args.baseline
    if over:
        cfg = parse_config({**cfg.to_dict(), **over})
    if args.jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    return cfg


def run(args) -> dict | None:
    cfg = resolve_config(args)
    out: Path = args.out
    if args.command == "simulate":
        pipeline.write_manifest(cfg, out / "manifest.json", "simulate")
        pipeline.simulate(cfg, out)
    elif args.command == "spectrum":
        pipeline.write_manifest(cfg, out / "manifest.json", "spectrum")
        return pipeline.spectrum(cfg, out, args.jobs)
    elif args.command == "complete":
        pipeline._load_simulation(cfg, out)          # validate before writing anything
        pipeline.complete(cfg, out, args.jobs)
    elif args.command == "report":
        pipeline.report(cfg, out)
    else:
        pipeline.run_pipeline(cfg, out, args.jobs)
    return None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        summary = run(args)
    except ConfigError as exc:
        print(f"neurem: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except pipeline.StageAbort as exc:
        print(f"neurem: numerical abort: {exc}; loss history in {exc.history_path}",
              file=sys.stderr)
        return EXIT_ABORT
    if summary is not None:
        print(json.dumps(summary, indent=2))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
