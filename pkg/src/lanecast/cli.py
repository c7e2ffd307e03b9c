"""Command line entry point.

One executable with pipeline verbs::

    lanecast <verb> --config pipeline.cfg [key=value ...] [--threads N]

Verbs: sim, label, split, select, train-clf, eval-clf, train-pred,
eval-pred, predict, report, all.  Exit codes: 0 success, 1 validation
error, 2 runtime error, 64 unknown verb.
"""

from __future__ import annotations

import sys
import traceback

from .config import ConfigError, parse_config
from .pipeline import VERBS, run_all, run_predict

USAGE = """usage: lanecast <verb> --config FILE [key=value ...] [--threads N]

verbs:
  sim         generate the synthetic dataset
  label       recompute lane-crossing times and maneuver labels
  split       build maneuver folds and the position train/test split
  select      construct feature sets A-D
  train-clf   train the three maneuver classifiers
  eval-clf    classifier metrics, ROC working points, detection times
  train-pred  fit position experts, integrated and confidence mixtures
  eval-pred   position log-likelihoods, spatial errors, confidence
  predict     map a feature CSV to per-horizon position distributions
              (--input FILE --output FILE [--dump-mixtures FILE])
  report      merge metric files and verify the report manifest
  all         run every verb above in order
"""

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2
EXIT_USAGE = 64


def _parse_flags(args: list[str]) -> tuple[dict, list[str]]:
    flags = {"config": None, "threads": 1, "input": None, "output": None,
             "dump_mixtures": None}
    overrides = []
    i = 0
    while i < len(args):
        arg = args[i]
        if arg in ("--config", "--threads", "--input", "--output", "--dump-mixtures"):
            if i + 1 >= len(args):
                raise ConfigError(f"flag {arg} needs a value")
            key = arg[2:].replace("-", "_")
            flags[key] = args[i + 1]
            i += 2
        elif arg in ("-h", "--help"):
            flags["help"] = True
            i += 1
        elif "=" in arg and not arg.startswith("-"):
            overrides.append(arg)
            i += 1
        else:
            raise ConfigError(f"unrecognized argument {arg!r}")
    flags["threads"] = int(flags["threads"])
    return flags, overrides


def main(argv: list[str] | None = None) -> int:
    args = list(sys.argv[1:] if argv is None else argv)
    if not args or args[0] in ("-h", "--help"):
        print(USAGE)
        return EXIT_OK
    verb = args[0]
    known = set(VERBS) | {"all", "predict"}
    if verb not in known:
        print(f"unknown verb {verb!r}\n", file=sys.stderr)
        print(USAGE, file=sys.stderr)
        return EXIT_USAGE
    try:
        flags, overrides = _parse_flags(args[1:])
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    if flags.get("help"):
        print(USAGE)
        return EXIT_OK
    try:
        cfg = parse_config(flags["config"], overrides)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    try:
        if verb == "all":
            summary = run_all(cfg, threads=flags["threads"])
        elif verb == "predict":
            if not flags["input"] or not flags["output"]:
                print("error: predict needs --input and --output", file=sys.stderr)
                return EXIT_VALIDATION
            summary = run_predict(cfg, flags["input"], flags["output"],
                                  threads=flags["threads"],
                                  dump_mixtures=flags["dump_mixtures"])
        else:
            summary = VERBS[verb](cfg, threads=flags["threads"])
    except (ConfigError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:
        traceback.print_exc()
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(summary)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
