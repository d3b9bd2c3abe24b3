"""
Command-line entry point.

Examples::

    detlink tests/data/lab
    detlink --max_age 2 --time_pattern 'frame_{:d}.txt' --interpolate tests/data/lab
    detlink -s --shape 1228,1027 left.csv right.csv -o stereo
    detlink -c --no-track detector_a detector_b detector_c
"""
import argparse
import math
import sys
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

from loguru import logger

from .__about__ import __name__ as package_name
from .__about__ import __version__
from .affinity import DEFAULT_SCALE, AffinityConfig
from .assign import DEFAULT_CUTOFF
from .exceptions import ConfigurationError, DetlinkError, UsageError
from .fusion import (
    DEFAULT_DISPARITY_FACTOR,
    ConsensusConfig,
    StereoConfig,
    consensus_all,
    consensus_track,
    stereo_link_all,
    stereo_track,
)
from .ingest import TimePattern, load_sources
from .model import ImageShape
from .tracking import DEFAULT_MAX_AGE, TrackerConfig, run
from .writers import Results, write_outputs

__all__ = ("CliOptions", "build_parser", "main", "run_cli")

EXIT_OK = 0
EXIT_DATA_ERROR = 1
EXIT_USAGE_ERROR = 2

LOG_LEVELS = ("WARNING", "INFO", "DEBUG")


@dataclass(frozen=True)
class CliOptions:
    """
    Validated command-line options.
    """

    inputs: Tuple[str, ...]
    stereo: bool = False
    consensus: bool = False
    no_track: bool = False
    scale: float = DEFAULT_SCALE
    cutoff: float = DEFAULT_CUTOFF
    max_age: int = DEFAULT_MAX_AGE
    time_pattern: Optional[TimePattern] = None
    interpolate: bool = False
    unknown: Optional[str] = None
    shape: Optional[ImageShape] = None
    output_base: Optional[str] = None
    min_support: Optional[int] = None
    disparity_factor: float = DEFAULT_DISPARITY_FACTOR
    n_jobs: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        if not self.inputs:
            raise UsageError("at least one input is required")
        if self.stereo and self.consensus:
            raise UsageError("-s and -c cannot be combined")
        if self.stereo and len(self.inputs) != 2:
            raise UsageError(
                "-s expects exactly two inputs (left, then right), got {}".format(
                    len(self.inputs)
                )
            )
        if self.consensus and len(self.inputs) < 2:
            raise UsageError("-c expects at least two inputs")
        if not (self.stereo or self.consensus) and len(self.inputs) != 1:
            raise UsageError("several inputs need -s (stereo) or -c (consensus)")
        if self.no_track and not (self.stereo or self.consensus):
            raise UsageError("--no-track only applies with -s or -c")
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise UsageError("--scale must be a positive number")
        if not (math.isfinite(self.disparity_factor) and self.disparity_factor > 0):
            raise UsageError("--disparity_factor must be a positive number")
        if not 0.0 <= self.cutoff < 1.0:
            raise UsageError("--cutoff must be in [0, 1)")
        if self.max_age < 0:
            raise UsageError("--max_age must not be negative")
        if self.min_support is not None and not self.consensus:
            raise UsageError("--min_support only applies with -c")
        if self.min_support is not None and not (
            1 <= self.min_support <= len(self.inputs)
        ):
            raise UsageError(
                "--min_support must be between 1 and the number of inputs"
            )

    @property
    def track(self) -> bool:
        return not self.no_track

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "CliOptions":
        return cls(
            inputs=args.inputs,
            stereo=args.stereo,
            consensus=args.consensus,
            no_track=args.no_track,
            scale=args.scale,
            cutoff=args.cutoff,
            max_age=args.max_age,
            time_pattern=None
            if args.time_pattern is None
            else TimePattern(args.time_pattern),
            interpolate=args.interpolate,
            unknown=args.unknown,
            shape=None if args.shape is None else ImageShape.parse(args.shape),
            output_base=args.output,
            min_support=args.min_support,
            disparity_factor=args.disparity_factor,
            n_jobs=args.n_jobs,
        )

    def tracker_config(self) -> TrackerConfig:
        return TrackerConfig(
            affinity=AffinityConfig(scale=self.scale),
            cutoff=self.cutoff,
            max_age=self.max_age,
            interpolate=self.interpolate,
            unknown_label=self.unknown,
        )

    def stereo_config(self) -> StereoConfig:
        return StereoConfig(
            affinity=AffinityConfig(scale=self.scale, cx_factor=self.disparity_factor),
            cutoff=self.cutoff,
            track=self.track,
        )

    def consensus_config(self) -> ConsensusConfig:
        return ConsensusConfig(
            affinity=AffinityConfig(scale=self.scale),
            cutoff=self.cutoff,
            min_support=self.min_support,
            track=self.track,
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=package_name,
        description="Track objects through detector output, link stereo "
        "detections and merge detector ensembles.",
    )
    parser.add_argument(
        "inputs",
        nargs="+",
        help="YOLO annotation directories, pixel-based .csv files or .frames files",
    )
    mode = parser.add_argument_group("modes")
    mode.add_argument(
        "-s",
        "--stereo",
        action="store_true",
        help="link a stereo pair; give the left input before the right one",
    )
    mode.add_argument(
        "-c",
        "--consensus",
        action="store_true",
        help="merge the output of several detectors",
    )
    mode.add_argument(
        "--no-track",
        dest="no_track",
        action="store_true",
        help="with -s or -c, only link per frame; do not track over time",
    )

    matching = parser.add_argument_group("matching")
    matching.add_argument(
        "--scale",
        type=float,
        default=DEFAULT_SCALE,
        help="Gaussian width in fractional image units; reduce it for "
        "stricter matching (default: %(default)s)",
    )
    matching.add_argument(
        "--cutoff",
        type=float,
        default=DEFAULT_CUTOFF,
        help="minimum score for a link (extension, default: %(default)s)",
    )
    matching.add_argument(
        "--disparity_factor",
        type=float,
        default=DEFAULT_DISPARITY_FACTOR,
        help="widening of the horizontal scale for stereo linking "
        "(extension, default: %(default)s)",
    )
    matching.add_argument(
        "--min_support",
        type=int,
        default=None,
        help="detectors needed for a consensus detection (extension, "
        "default: a majority)",
    )

    tracking = parser.add_argument_group("tracking")
    tracking.add_argument(
        "--max_age",
        type=int,
        default=DEFAULT_MAX_AGE,
        help="number of missing frames a track may bridge (default: %(default)s)",
    )
    tracking.add_argument(
        "--time_pattern",
        default=None,
        help="frame name template with one {:d} placeholder, e.g. frame_{:d}.txt",
    )
    tracking.add_argument(
        "--interpolate",
        action="store_true",
        help="fill track gaps with interpolated boxes of confidence 0.0000",
    )
    tracking.add_argument(
        "--unknown",
        default=None,
        help="label that should not become a track's consensus class",
    )

    io = parser.add_argument_group("input/output")
    io.add_argument(
        "--shape",
        default=None,
        help="image size W,H for pixel-based input, e.g. 1228,1027",
    )
    io.add_argument(
        "-o",
        "--output",
        default=None,
        help="write OUTPUT.frames, OUTPUT.tracks and OUTPUT.pred instead of "
        "printing frames to stdout",
    )
    io.add_argument(
        "--n_jobs",
        type=int,
        default=None,
        help="parallel jobs for reading and per-frame linking (-1: all CPUs)",
    )
    io.add_argument(
        "-v",
        "--verbose",
        action="count",
        default=0,
        help="log progress (-v) or details (-vv) to stderr",
    )
    io.add_argument(
        "--version", action="version", version="%(prog)s {}".format(__version__)
    )
    return parser


def _configure_logging(verbosity: int) -> None:
    logger.enable(package_name)
    logger.remove()
    logger.add(
        sys.stderr,
        level=LOG_LEVELS[min(verbosity, len(LOG_LEVELS) - 1)],
        format="{level}: {message}",
    )


def _run_pipeline(options: CliOptions) -> Results:
    sources = load_sources(
        options.inputs, options.shape, options.time_pattern, n_jobs=options.n_jobs
    )
    tcfg = options.tracker_config()

    if options.stereo:
        left, right = sources
        cfg = options.stereo_config()
        if cfg.track:
            return stereo_track(left, right, cfg, tcfg, n_jobs=options.n_jobs)
        return stereo_link_all(left, right, cfg, n_jobs=options.n_jobs)

    if options.consensus:
        cfg = options.consensus_config()
        if cfg.track:
            return consensus_track(sources, cfg, tcfg, n_jobs=options.n_jobs)
        return consensus_all(sources, cfg, n_jobs=options.n_jobs)

    return run(sources[0], tcfg)


def run_cli(options: CliOptions) -> int:
    """
    Run the pipeline selected by ``options`` and write its outputs.

    :return: 0 on success, 1 if reading, linking or writing failed.
    """
    try:
        results = _run_pipeline(options)
        write_outputs(
            results, options.output_base, tracked=options.track, unknown=options.unknown
        )
    except (DetlinkError, OSError) as e:
        logger.error("{}", e)
        return EXIT_DATA_ERROR
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.verbose)
    try:
        options = CliOptions.from_args(args)
    except (UsageError, ConfigurationError) as e:
        parser.error(str(e))
    return run_cli(options)
