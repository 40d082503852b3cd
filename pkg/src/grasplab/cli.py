"""Command-line front end: train, evaluate, render-frame, dump-schedule.

Exit codes group failures by category so scripts can react without parsing
stderr:

* 0: success
* 2: configuration problems (bad keys, bad values, unknown preset)
* 3: non-finite training signal (run aborted, last good checkpoint kept)
* 4: filesystem problems
* 5: checkpoint/architecture mismatch
* 6: other domain errors (range, dimension, schedule violations)
* 1: anything unexpected
"""

from __future__ import annotations

import argparse
import sys

from grasplab.errors import (
    ConfigError,
    GrasplabError,
    NonFiniteError,
    SpecMismatch,
)
from grasplab.harness.config import PRESETS, RunConfig, load_config
from grasplab.harness.loops import (
    OUT_ENV_VAR,
    evaluate,
    render_frame_files,
    resolve_out_dir,
    schedule_rows,
    train,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NONFINITE = 3
EXIT_IO = 4
EXIT_SPEC_MISMATCH = 5
EXIT_DOMAIN = 6
EXIT_UNEXPECTED = 1


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat-key YAML config file")
    parser.add_argument(
        "--preset",
        choices=sorted(PRESETS),
        help="named experiment preset (file and overrides still win)",
    )
    parser.add_argument("--seed", type=int, help="run seed")
    parser.add_argument(
        "--override",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="set one config key; repeatable",
    )
    parser.add_argument(
        "--out",
        help=f"output directory (default: ${OUT_ENV_VAR} or ./runs)",
    )


def _resolve(args: argparse.Namespace) -> RunConfig:
    extra: dict = {}
    if args.preset:
        extra["preset"] = args.preset
    if args.seed is not None:
        extra["seed"] = args.seed
    if args.out is not None:
        extra["out_dir"] = args.out
    return load_config(args.config, tuple(args.override), extra)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="grasplab",
        description="Deterministic block-reaching laboratory: training and tooling.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    p_train = sub.add_parser("train", help="run one training job to its step budget")
    _add_common(p_train)
    p_train.add_argument(
        "--resume", metavar="DIR", help="resume state directory from a prior run"
    )

    p_eval = sub.add_parser("evaluate", help="roll out the deterministic policy")
    _add_common(p_eval)
    p_eval.add_argument("--checkpoint", help="policy checkpoint to load")
    p_eval.add_argument(
        "--oracle", action="store_true", help="use the built-in oracle instead"
    )
    p_eval.add_argument("--episodes", type=int, help="number of evaluation episodes")

    p_frame = sub.add_parser(
        "render-frame", help="dump the first observation of an episode as images"
    )
    _add_common(p_frame)

    p_sched = sub.add_parser(
        "dump-schedule", help="print the lesson schedule as CSV"
    )
    _add_common(p_sched)

    return parser


def _run(args: argparse.Namespace) -> int:
    cfg = _resolve(args)

    if args.verb == "train":
        result = train(cfg, resume_from=args.resume)
        print(result.to_json())
        if result.status != "completed":
            print(f"training aborted: {result.status}", file=sys.stderr)
            return EXIT_NONFINITE
        return EXIT_OK

    if args.verb == "evaluate":
        report = evaluate(
            cfg,
            checkpoint_path=args.checkpoint,
            oracle=args.oracle,
            episodes=args.episodes,
        )
        print(report.to_json())
        return EXIT_OK

    if args.verb == "render-frame":
        for path in render_frame_files(cfg, resolve_out_dir(cfg)):
            print(path)
        return EXIT_OK

    # dump-schedule
    rows = schedule_rows(cfg)
    lines = ["lesson,xy_tol,z_lo,z_hi,yaw_tol,threshold"]
    for row in rows:
        lines.append(
            f"{row['lesson']},{row['xy_tol']:.10g},{row['z_lo']:.10g},"
            f"{row['z_hi']:.10g},{row['yaw_tol']:.10g},{row['threshold']:.10g}"
        )
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SpecMismatch as exc:
        print(f"checkpoint mismatch: {exc}", file=sys.stderr)
        return EXIT_SPEC_MISMATCH
    except NonFiniteError as exc:
        print(f"non-finite signal: {exc}", file=sys.stderr)
        return EXIT_NONFINITE
    except GrasplabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
