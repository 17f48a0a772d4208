"""Command-line entry point: ``tracklet run`` and ``tracklet synth``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, PipelineConfig, dump_config, load_config
from .frame_io import FrameError
from .pipeline import InputError, PipelineError, emit_results, run_pipeline
from .synthgen import ObjectOutOfBounds, ScriptError, parse_script, write_sequence

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INPUT = 3
EXIT_RUNTIME = 4

log = logging.getLogger("tracklet")


def _cmd_run(args) -> int:
    try:
        config = load_config(args.config) if args.config else PipelineConfig()
        overrides = {}
        if args.input:
            overrides["input"] = args.input
        if args.out:
            overrides["output"] = args.out
        if args.annotate:
            overrides["annotate"] = True
        config = config.replace(**overrides)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    if args.dump_config:
        sys.stdout.write(dump_config(config))
        return EXIT_OK
    try:
        n = emit_results(run_pipeline(config), config.output)
    except InputError as exc:
        log.error("input error: %s", exc)
        return EXIT_INPUT
    except PipelineError as exc:
        log.error("aborted at frame %d: %s", exc.frame_index, exc.cause)
        return EXIT_RUNTIME
    except FrameError as exc:
        log.error("output error: %s", exc)
        return EXIT_RUNTIME
    log.info("processed %d frames into %s", n, config.output)
    return EXIT_OK


def _cmd_synth(args) -> int:
    try:
        text = Path(args.script).read_text()
        script = parse_script(text, base_dir=Path(args.script).parent)
    except (OSError, ScriptError, FrameError) as exc:
        log.error("script error: %s", exc)
        return EXIT_CONFIG
    try:
        write_sequence(script, args.out)
    except (ObjectOutOfBounds, ScriptError) as exc:
        log.error("script error: %s", exc)
        return EXIT_CONFIG
    except (OSError, FrameError) as exc:
        log.error("write failed: %s", exc)
        return EXIT_RUNTIME
    log.info("wrote %d frames to %s", script.frame_count, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tracklet", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="track objects through a frame sequence")
    run.add_argument("--config", help="flat key = value config file")
    run.add_argument("--input", help="directory of numbered PPM/PGM frames")
    run.add_argument("--out", help="output directory")
    run.add_argument("--annotate", action="store_true", help="write ann_%%06d.ppm frames")
    run.add_argument("--dump-config", action="store_true", help="print the resolved configuration and exit")
    run.set_defaults(func=_cmd_run)

    synth = sub.add_parser("synth", help="render a synthetic scene script")
    synth.add_argument("--script", required=True)
    synth.add_argument("--out", required=True)
    synth.set_defaults(func=_cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
