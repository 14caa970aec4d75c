"""Command-line entry point.

Subcommands: ``simulate``, ``evaluate``, ``render``, ``validate-dataset``,
``ingest-external``. Exit codes are a stable contract: 0 success, 1 usage or
configuration error, 2 I/O error, 3 validation error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .config import UsageError, documented_keys, load_run_config
from .validation import ValidationError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_VALIDATION = 3

THREADS_ENV_VAR = "SONOSYNTH_THREADS"


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on usage errors; the CLI contract says 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _resolve_threads(value: int | None) -> int:
    if value is not None:
        threads = value
    elif os.environ.get(THREADS_ENV_VAR):
        try:
            threads = int(os.environ[THREADS_ENV_VAR])
        except ValueError:
            raise UsageError(
                f"{THREADS_ENV_VAR}={os.environ[THREADS_ENV_VAR]!r} is not an integer"
            ) from None
    else:
        threads = os.cpu_count() or 1
    if threads < 1:
        raise UsageError(f"--threads must be >= 1, got {threads}")
    return threads


def _add_config_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", metavar="FILE", help="config file with 'key = value' lines")
    p.add_argument(
        "--set",
        dest="overrides",
        metavar="KEY=VALUE",
        action="append",
        default=[],
        help="override a config key (repeatable, wins over --config)",
    )


def _split_type(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("split must be three comma-separated fractions")
    try:
        return tuple(float(p) for p in parts)  # type: ignore[return-value]
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse split {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="sonosynth",
        description="Simulated ultrasound phantom imaging and segmentation datasets.",
        epilog="exit codes: 0 success, 1 usage/config error, 2 I/O error, 3 validation error",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser(
        "simulate",
        help="generate a seeded train/val/test dataset",
        description="Simulate phantoms end-to-end and write a dataset tree with a manifest.",
    )
    p_sim.add_argument("--n", type=int, required=True, help="number of images to simulate")
    p_sim.add_argument("--seed", type=int, default=0, help="master RNG seed (default 0)")
    p_sim.add_argument("--out", required=True, metavar="DIR", help="dataset root to create")
    p_sim.add_argument(
        "--split",
        type=_split_type,
        default=(0.6, 0.15, 0.25),
        metavar="TR,VA,TE",
        help="train,val,test fractions (default 0.6,0.15,0.25)",
    )
    p_sim.add_argument("--threads", type=int, default=None, help=f"worker threads (default: {THREADS_ENV_VAR} or all cores)")
    p_sim.add_argument("--quiet", action="store_true", help="suppress per-image progress")
    _add_config_flags(p_sim)

    p_eval = sub.add_parser(
        "evaluate",
        help="score predicted masks against a dataset's ground truth",
        description="Score <id>.mask.u8 predictions against the manifest's masks and write a report.",
    )
    p_eval.add_argument("--dataset", required=True, metavar="DIR", help="dataset root (simulated or ingested)")
    p_eval.add_argument("--pred", required=True, metavar="DIR", help="directory of predicted masks")
    p_eval.add_argument("--modality", choices=("envelope", "bmode"), default="envelope")
    p_eval.add_argument("--split", choices=("train", "val", "test"), default="test")
    p_eval.add_argument("--out", metavar="DIR", help="where to write report.json/report.txt (default: --pred)")
    p_eval.add_argument("--per-image", action="store_true", help="append a per-image score listing")

    p_render = sub.add_parser(
        "render",
        help="write inspection PNGs for dataset images",
        description="Render envelope/B-mode/mask panels (plus predictions when given) to PNG.",
    )
    p_render.add_argument("--dataset", required=True, metavar="DIR")
    p_render.add_argument("--id", required=True, dest="image_id", help="image id to render")
    p_render.add_argument("--out", required=True, metavar="DIR")
    p_render.add_argument("--pred-envelope", metavar="DIR", help="predictions from the envelope-trained model")
    p_render.add_argument("--pred-bmode", metavar="DIR", help="predictions from the B-mode-trained model")

    p_val = sub.add_parser(
        "validate-dataset",
        help="check a dataset tree against its manifest",
        description="Verify manifest coverage, file shapes, value ranges, and label sets.",
    )
    p_val.add_argument("--root", required=True, metavar="DIR")

    p_ing = sub.add_parser(
        "ingest-external",
        help="preprocess externally acquired images and masks",
        description=(
            "Read a JSON array of records ({image_id, modality, image, mask, note}) and "
            "build an evaluation-ready dataset with the standard preprocessing."
        ),
    )
    p_ing.add_argument("--records", required=True, metavar="FILE", help="JSON record list")
    p_ing.add_argument("--out", required=True, metavar="DIR", help="dataset root to create")

    p_keys = sub.add_parser(
        "config-keys",
        help="list every documented config key with its default",
        description="Print the dotted config keys accepted by --config files and --set.",
    )
    p_keys.add_argument("--json", action="store_true", help="emit JSON instead of text")

    return parser


def _cmd_simulate(args) -> int:
    from .datasets import build_dataset

    if args.n < 1:
        raise UsageError(f"--n must be >= 1, got {args.n}")
    run_config = load_run_config(args.config, args.overrides)
    threads = _resolve_threads(args.threads)
    progress = None if args.quiet else lambda image_id: print(f"  generated {image_id}")
    manifest = build_dataset(
        args.out,
        n_images=args.n,
        seed=args.seed,
        split=args.split,
        run_config=run_config,
        threads=threads,
        progress=progress,
    )
    counts = manifest.to_dict()["split_counts"]
    print(f"manifest: {Path(args.out) / 'manifest.json'}")
    print(f"split counts: train={counts['train']} val={counts['val']} test={counts['test']}")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    from .datasets import evaluate_predictions
    from .metrics import format_per_image_listing, format_report_table

    report = evaluate_predictions(args.dataset, args.pred, args.modality, args.split)
    out_dir = Path(args.out or args.pred)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(report.to_json() + "\n")
    table = format_report_table([report])
    if args.per_image:
        table += "\n" + format_per_image_listing(report)
    (out_dir / "report.txt").write_text(table)
    print(table, end="")
    print(f"report: {out_dir / 'report.json'}")
    return EXIT_OK


def _cmd_render(args) -> int:
    from .render import render_example

    try:
        path = render_example(
            args.dataset,
            args.image_id,
            args.out,
            pred_envelope_dir=args.pred_envelope,
            pred_bmode_dir=args.pred_bmode,
        )
    except KeyError as exc:
        raise ValidationError(str(exc)) from exc
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    from .datasets import validate_dataset

    problems = validate_dataset(args.root)
    if problems:
        for p in problems:
            print(f"INVALID: {p}", file=sys.stderr)
        return EXIT_VALIDATION
    print(f"dataset at {args.root} is valid")
    return EXIT_OK


def _cmd_ingest(args) -> int:
    from .datasets import ingest_external, load_external_records

    records = load_external_records(args.records)
    manifest = ingest_external(records, args.out)
    print(f"ingested {manifest.n_images} record(s) into {args.out}")
    print(f"manifest: {Path(args.out) / 'manifest.json'}")
    return EXIT_OK


def _cmd_config_keys(args) -> int:
    keys = documented_keys()
    if args.json:
        print(json.dumps(keys, indent=2, sort_keys=True))
    else:
        width = max(len(k) for k in keys)
        for key in sorted(keys):
            print(f"{key.ljust(width)}  (default: {keys[key]!r})")
    return EXIT_OK


_HANDLERS = {
    "simulate": _cmd_simulate,
    "evaluate": _cmd_evaluate,
    "render": _cmd_render,
    "validate-dataset": _cmd_validate,
    "ingest-external": _cmd_ingest,
    "config-keys": _cmd_config_keys,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (OSError, json.JSONDecodeError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
