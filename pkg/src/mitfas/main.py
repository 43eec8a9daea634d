# src/mitfas/main.py
import argparse
import sys
import traceback
from typing import List, Optional

from dotenv import load_dotenv

from mitfas import __version__
from mitfas.errors import MitfasError
from mitfas.pipeline import run_pipeline
from mitfas.settings import build_config
from mitfas.synth import MotionSpec, generate_sequence, make_sprite, parse_path, parse_size, write_fixture
from mitfas.tools.measure_tool import MeasureTool
from mitfas.utils.logger import setup_logger

logger = setup_logger()

EXIT_OK = 0
EXIT_RUNTIME = 4


def _floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mitfas", description="MI temporal feature alignment and frame sampling")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="Log DEBUG messages to the console")
    sub = parser.add_subparsers(dest="command", required=True)

    align = sub.add_parser("align", help="Align an actor across a frame sequence and sample informative frames")
    align.add_argument("--frames", required=True, help="Directory of frame_NNNNNN.{png,pgm,ppm} files")
    align.add_argument("--bboxes", required=True, help="Annotation file with at least the frame-0 seed box")
    align.add_argument("--out", required=True, help="Output directory")
    align.add_argument("--config", help="YAML or JSON config file; flags override it")
    # None means "not given" so the config layers underneath stay in effect
    align.add_argument("--bins", type=int)
    align.add_argument("--stride", type=int)
    align.add_argument("--scales", type=_floats)
    align.add_argument("--thetas", type=_floats)
    align.add_argument("--expansion", type=float)
    align.add_argument("--relocalize-every", type=int)
    align.add_argument("--relocalize-mi-floor", type=float)
    align.add_argument("--measure", choices=MeasureTool.names())
    align.add_argument("--refine", action=argparse.BooleanOptionalAction, default=None,
                       help="Follow the stride grid with a stride-1 pass around its best window")
    align.add_argument("--alpha", type=float)
    align.add_argument("--beta", type=float)
    align.add_argument("--n-frames", type=int)
    align.add_argument("--seed", type=int)
    align.add_argument("--stride-max", type=int)
    align.add_argument("--sampler", choices=["mis", "random", "uniform"])
    align.add_argument("--patch-format", choices=["pgm", "png"])
    align.add_argument("--sample-raw", action="store_true", default=None,
                       help="Sample raw grayscale frames instead of aligned patches; sampled/ then holds those frames")

    synth = sub.add_parser("synth", help="Write a synthetic fixture with ground-truth motion")
    synth.add_argument("--out", required=True)
    synth.add_argument("--frames", type=int, default=32)
    synth.add_argument("--size", default="320x240", help="WIDTHxHEIGHT")
    synth.add_argument("--sprite", default="48x64", help="Sprite WIDTHxHEIGHT")
    synth.add_argument("--path", default="linear:4,0", help="static | linear:dx,dy | jitter:dx,dy,amp")
    synth.add_argument("--noise", type=float, default=0.0, help="Gaussian noise sigma")
    synth.add_argument("--background", choices=["textured-noise", "gradient"], default="textured-noise")
    synth.add_argument("--seed", type=int, default=0)
    return parser


def run_align(args: argparse.Namespace) -> int:
    overrides = {
        "bins": args.bins,
        "stride": args.stride,
        "scales": args.scales,
        "thetas": args.thetas,
        "expansion": args.expansion,
        "relocalize_every": args.relocalize_every,
        "relocalize_mi_floor": args.relocalize_mi_floor,
        "measure": args.measure,
        "refine": args.refine,
        "alpha": args.alpha,
        "beta": args.beta,
        "n_frames": args.n_frames,
        "seed": args.seed,
        "stride_max": args.stride_max,
        "sampler": args.sampler,
        "patch_format": args.patch_format,
        "sample_raw": args.sample_raw,
    }
    config = build_config(args.config, overrides)
    manifest = run_pipeline(args.frames, args.bboxes, args.out, config)
    print(f"Aligned {manifest.fingerprint.frame_count} frames; sampled {manifest.sample.indices}")
    return EXIT_OK


def run_synth(args: argparse.Namespace) -> int:
    width, height = parse_size(args.size)
    sprite_w, sprite_h = parse_size(args.sprite)
    spec = MotionSpec(path=parse_path(args.path, args.frames, args.seed), noise_sigma=args.noise,
                      background=args.background, seed=args.seed)
    frames, boxes = generate_sequence((width, height), make_sprite(sprite_w, sprite_h, args.seed), spec)
    write_fixture(args.out, frames, boxes)
    print(f"Wrote {len(frames)} frames to {args.out}")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    if args.verbose:
        for handler in logger.handlers:
            handler.setLevel("DEBUG")
    logger.info(f"Starting mitfas {args.command}")
    try:
        if args.command == "align":
            return run_align(args)
        return run_synth(args)
    except MitfasError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"Error: {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.error(f"Unexpected failure: {e}\n{traceback.format_exc()}")
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
