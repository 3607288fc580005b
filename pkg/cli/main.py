"""
main.py - operator command line.

    python -m cli.main synth-data --out DIR --frames N --seed S [--scene plane]
    python -m cli.main train --data DIR --out DIR [--config F] [--preset desk] [overrides...]
    python -m cli.main eval --ckpt F --data DIR [--no-scale] [--cap M] [--out DIR] [--png]
    python -m cli.main infer --ckpt F --image F --out STEM [--domain day|night]
    python -m cli.main translate --in DIR --out DIR --seed S

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

#####################################
# Import Modules
#####################################

# Import packages from Python Standard Library
import argparse
import pathlib
import sys
from typing import Any, Optional, Sequence

# Import external packages
import torch

# Import functions from local modules
from consumers.eval_consumer import EvalFlags, colorize_depth, evaluate
from consumers.train_consumer import fit, load_checkpoint, model_from_checkpoint
from producers.night_producer import (
    frame_seed,
    translate_day_to_night,
    translate_directory,
    translate_night_to_day,
)
from producers.sequence_producer import PreprocessConfig, load_image_tensor, night_style, preprocess
from producers.synth_producer import SCENES, synth_generate
from utils.utils_config import (
    PRESETS,
    EncoderDesign,
    FusionMode,
    PairMode,
    SourceAggregation,
    TranslatorKind,
    build_training_config,
    get_default_workers,
    get_output_root,
    read_config_file,
)
from utils.utils_errors import GlocalFuseError
from utils.utils_io import write_depth
from utils.utils_logger import logger

#####################################
# Exit Codes
#####################################

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class UsageError(Exception):
    pass


class CliParser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors through an exception instead of exit(2)."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        raise UsageError(message)


#####################################
# Argument Parsing
#####################################


def _choices(enum_type: Any) -> list[str]:
    return [member.value for member in enum_type]


def build_parser() -> CliParser:
    parser = CliParser(prog="glocalfuse", description="Day-night fused monocular depth.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=CliParser)

    synth = sub.add_parser("synth-data", help="render a synthetic sequence with ground truth")
    synth.add_argument("--out", type=pathlib.Path, default=None)
    synth.add_argument("--frames", type=int, default=20)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--scene", choices=sorted(SCENES), default="default")
    synth.add_argument("--height", type=int, default=None)
    synth.add_argument("--width", type=int, default=None)

    train = sub.add_parser("train", help="self-supervised training on a sequence directory")
    train.add_argument("--data", type=pathlib.Path, required=True)
    train.add_argument("--out", type=pathlib.Path, default=None)
    train.add_argument("--config", type=pathlib.Path, default=None)
    train.add_argument("--preset", choices=sorted(PRESETS), default="desk")
    train.add_argument("--resume", type=pathlib.Path, default=None)
    train.add_argument("--epochs", type=int)
    train.add_argument("--max-steps", dest="max_steps", type=int)
    train.add_argument("--batch-size", dest="batch_size", type=int)
    train.add_argument("--lr", dest="lr_peak", type=float)
    train.add_argument("--seed", type=int)
    train.add_argument("--workers", type=int)
    train.add_argument("--checkpoint-every", dest="checkpoint_every", type=int)
    train.add_argument("--ablation", dest="encoder_design", choices=_choices(EncoderDesign))
    train.add_argument("--fusion", dest="fusion_mode", choices=_choices(FusionMode))
    train.add_argument("--pair-mode", dest="pair_mode", choices=_choices(PairMode))
    train.add_argument("--translator", choices=_choices(TranslatorKind))
    train.add_argument("--night-dir", dest="night_dir")
    train.add_argument("--aggregation", dest="source_aggregation", choices=_choices(SourceAggregation))
    crop = train.add_mutually_exclusive_group()
    crop.add_argument("--crop", dest="crop", action="store_true", default=None)
    crop.add_argument("--no-crop", dest="crop", action="store_false", default=None)

    ev = sub.add_parser("eval", help="depth metrics for day and night splits")
    ev.add_argument("--ckpt", type=pathlib.Path, required=True)
    ev.add_argument("--data", type=pathlib.Path, required=True)
    ev.add_argument("--out", type=pathlib.Path, default=None)
    ev.add_argument("--no-scale", dest="scale", action="store_false")
    ev.add_argument("--cap", type=float, default=60.0)
    ev.add_argument("--gt-density", dest="gt_density", type=float, default=0.05)
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--png", action="store_true")

    infer = sub.add_parser("infer", help="predict depth for one image")
    infer.add_argument("--ckpt", type=pathlib.Path, required=True)
    infer.add_argument("--image", type=pathlib.Path, required=True)
    infer.add_argument("--out", type=pathlib.Path, required=True, help="output stem (.png and .bin)")
    infer.add_argument("--domain", choices=["day", "night"], default="day")
    infer.add_argument("--seed", type=int, default=0)

    translate = sub.add_parser("translate", help="stub day-to-night translation of a folder")
    translate.add_argument("--in", dest="in_dir", type=pathlib.Path, required=True)
    translate.add_argument("--out", type=pathlib.Path, required=True)
    translate.add_argument("--seed", type=int, default=0)
    return parser


#####################################
# Subcommands
#####################################

TRAIN_OVERRIDES = (
    "epochs",
    "max_steps",
    "batch_size",
    "lr_peak",
    "seed",
    "workers",
    "checkpoint_every",
    "encoder_design",
    "fusion_mode",
    "pair_mode",
    "translator",
    "night_dir",
    "source_aggregation",
    "crop",
)


def run_synth(args: argparse.Namespace) -> None:
    out = args.out or get_output_root() / "synth"
    synth_generate(out, args.frames, args.seed, args.scene, args.height, args.width)


def run_train(args: argparse.Namespace) -> None:
    overrides = {name: getattr(args, name) for name in TRAIN_OVERRIDES}
    if overrides["workers"] is None:
        overrides["workers"] = get_default_workers()

    if args.resume is not None and args.config is None:
        base = load_checkpoint(args.resume)["config"]
        cfg = build_training_config(args.preset, file_values=base, overrides=overrides)
    else:
        file_values = read_config_file(args.config) if args.config else None
        cfg = build_training_config(args.preset, file_values=file_values, overrides=overrides)

    out = args.out or get_output_root() / "train"
    fit(cfg, args.data, out, resume=args.resume)


def run_eval(args: argparse.Namespace) -> None:
    flags = EvalFlags(
        scale=args.scale,
        cap=args.cap,
        gt_density=args.gt_density,
        seed=args.seed,
        out_dir=args.out or get_output_root() / "eval",
        emit_png=args.png,
    )
    report = evaluate(args.ckpt, args.data, flags)
    print(report.summary.to_string(index=False))


def run_infer(args: argparse.Namespace) -> None:
    model, cfg = model_from_checkpoint(load_checkpoint(args.ckpt))
    model.eval()
    image, _ = preprocess(load_image_tensor(args.image), None, PreprocessConfig.from_training(cfg))
    style = night_style(cfg)
    if args.domain == "day":
        day, night = image, translate_day_to_night(image, frame_seed(args.seed, 0), style)
    else:
        day, night = translate_night_to_day(image, style), image
    with torch.no_grad():
        depth = model.predict_depth(day[None], night[None])[0, 0].numpy()

    stem = args.out.with_suffix("") if args.out.suffix in {".png", ".bin"} else args.out
    write_depth(stem.with_name(stem.name + ".bin"), depth)
    colorize_depth(depth, stem.with_name(stem.name + ".png"))
    logger.info(f"Wrote {stem}.png and {stem}.bin")


def run_translate(args: argparse.Namespace) -> None:
    translate_directory(args.in_dir, args.out, args.seed)


COMMANDS = {
    "synth-data": run_synth,
    "train": run_train,
    "eval": run_eval,
    "infer": run_infer,
    "translate": run_translate,
}


#####################################
# Main Function
#####################################


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        logger.error(f"Usage error: {e}")
        return EXIT_USAGE
    except SystemExit as e:  # --help
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    logger.info(f"START {args.command}.")
    try:
        COMMANDS[args.command](args)
    except GlocalFuseError as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_RUNTIME
    except OSError as e:
        logger.error(f"{args.command} failed with an I/O error: {e}")
        return EXIT_RUNTIME
    except Exception:
        logger.exception(f"{args.command} failed unexpectedly")
        return EXIT_RUNTIME
    logger.info(f"END {args.command}.")
    return EXIT_OK


#####################################
# Conditional Execution
#####################################

if __name__ == "__main__":
    sys.exit(main())
