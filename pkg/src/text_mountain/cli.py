"""Command-line entry point: ``text-mountain <command> ...``.

Commands print their results to stdout; diagnostics go through logging to stderr.
Exit status is 0 on success, 2 on a usage error and 1 on a runtime error.
"""

import argparse
import logging
import sys
import time
from collections.abc import Callable, Sequence
from dataclasses import asdict
from pathlib import Path

import numpy as np
import pandas as pd

from text_mountain import __version__
from text_mountain.config import (
    DetectMode,
    GraphSource,
    GroupConfig,
    LossWeights,
    RunConfig,
    default_log_level,
)
from text_mountain.detect import Detection, detect_pipeline
from text_mountain.errors import MapFormatError, TextMountainError
from text_mountain.evaluation import evaluate_dataset
from text_mountain.geometry import TextPolygon
from text_mountain.grouping import (
    extract_peaks,
    filter_peaks,
    group_baseline,
    group_parallel,
    group_sequential,
    next_from_tcbp,
    next_from_tcd,
    score_instances,
    text_mask,
)
from text_mountain.labelgen import generate_labels
from text_mountain.loss import compute_losses, decode_tcd
from text_mountain.maps import InstanceMap, MapBundle, RasterMap
from text_mountain.services.annotations import parse_annotations
from text_mountain.services.map_io import (
    read_detections,
    read_ground_truth,
    read_label_set,
    read_map,
    read_map_bundle,
    scene_dirs,
    write_detections,
    write_label_set,
)
from text_mountain.services.render import render_maps
from text_mountain.services.synth import (
    NOISE_STREAM,
    SynthConfig,
    SyntheticSceneGenerator,
    add_noise,
    write_scene,
)

logger = logging.getLogger(__name__)

Handler = Callable[[argparse.Namespace, RunConfig], int]


def parse_size(value: str) -> tuple[int, int]:
    """Parse ``WxH`` into ``(width, height)``."""
    try:
        width, height = (int(part) for part in value.lower().split("x"))
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected WxH, got {value!r}") from e
    if width < 1 or height < 1:
        raise argparse.ArgumentTypeError(f"size must be positive, got {value!r}")
    return width, height


def _positive_int(value: str) -> int:
    try:
        number = int(value)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected an integer, got {value!r}") from e
    if number < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value!r}")
    return number


def _unit_value(value: str, low_open: bool) -> float:
    try:
        number = float(value)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected a number, got {value!r}") from e
    inside = 0.0 < number < 1.0 if low_open else 0.0 <= number <= 1.0
    if not inside:
        interval = "(0, 1)" if low_open else "[0, 1]"
        raise argparse.ArgumentTypeError(f"expected a value in {interval}, got {value!r}")
    return number


def _open_unit(value: str) -> float:
    return _unit_value(value, low_open=True)


def _closed_unit(value: str) -> float:
    return _unit_value(value, low_open=False)


def _group_config(args: argparse.Namespace, base: GroupConfig) -> GroupConfig:
    return GroupConfig(
        gamma=args.gamma if args.gamma is not None else base.gamma,
        instance_score_min=(
            args.instance_min if args.instance_min is not None else base.instance_score_min
        ),
        ts_border_min=args.ts_min if args.ts_min is not None else base.ts_border_min,
        graph_source=GraphSource(args.source),
        min_peak_area=(
            args.min_peak_area if args.min_peak_area is not None else base.min_peak_area
        ),
        peak_core_min=args.peak_core if args.peak_core is not None else base.peak_core_min,
    )


def _load_prediction(directory: Path, sigmoid_tcd: bool) -> MapBundle:
    maps = read_map_bundle(directory)
    if sigmoid_tcd and maps.tcd is not None:
        return MapBundle(maps.ts, maps.tcbp, RasterMap(decode_tcd(maps.tcd.data)))
    return maps


def cmd_gen_labels(args: argparse.Namespace, run: RunConfig) -> int:
    polygons = parse_annotations(args.annotations)
    labels = generate_labels(polygons, args.size, workers=run.workers)
    out = write_label_set(labels, args.output, polygons)
    print(
        f"Wrote labels for {labels.instance_gt.count} text instance(s) "
        f"({len(polygons)} polygon(s), {labels.skipped} skipped) to {out}"
    )
    return 0


def cmd_synth(args: argparse.Namespace, run: RunConfig) -> int:
    width, height = args.size
    config = SynthConfig(
        width=width,
        height=height,
        max_texts=args.max_texts,
        curved_ratio=args.curved_ratio,
        dont_care_ratio=args.dont_care_ratio,
    )
    generator = SyntheticSceneGenerator(config, seed=run.seed)
    noisy = args.noise > 0 or args.angle_noise > 0
    total = 0
    for index, scene in enumerate(generator.scenes(args.n, workers=run.workers)):
        predicted = None
        if noisy:
            rng = generator.rng(index, NOISE_STREAM)
            predicted = add_noise(scene.labels.as_bundle(), args.noise, args.angle_noise, rng)
        write_scene(scene, args.output, predicted)
        total += len(scene.polygons)
    print(f"Wrote {args.n} scene(s) with {total} text(s) to {args.output}")
    return 0


def _detect_scene(directory: Path, args: argparse.Namespace, run: RunConfig) -> list[Detection]:
    maps = _load_prediction(directory, args.sigmoid_tcd)
    return detect_pipeline(maps, run.group, run.mode, run.workers)


def cmd_detect(args: argparse.Namespace, run: RunConfig) -> int:
    scenes = scene_dirs(args.maps)
    if len(scenes) == 1 and scenes[0] == Path(args.maps):
        dets = _detect_scene(scenes[0], args, run)
        write_detections(dets, args.output)
        count = len(dets)
    else:
        by_scene = {scene.name: _detect_scene(scene, args, run) for scene in scenes}
        write_detections(by_scene, args.output)
        count = sum(len(d) for d in by_scene.values())
    print(f"Wrote {count} detection(s) from {len(scenes)} scene(s) to {args.output}")
    return 0


def _ground_truth(path: Path) -> dict[str, list[TextPolygon]]:
    if path.is_file():
        return {"": parse_annotations(path)}
    scenes = scene_dirs(path)
    if len(scenes) == 1 and scenes[0] == path:
        return {"": read_ground_truth(path)}
    return {scene.name: read_ground_truth(scene) for scene in scenes}


def cmd_eval(args: argparse.Namespace, run: RunConfig) -> int:
    dets = read_detections(args.detections)
    gts = _ground_truth(Path(args.ground_truth))
    if list(gts) == [""]:
        samples = {"": ([d for scene in dets.values() for d in scene], gts[""])}
    else:
        unknown = sorted(set(dets) - set(gts))
        if unknown:
            logger.warning("Detections for unknown scene(s) ignored: %s", ", ".join(unknown))
        samples = {name: (dets.get(name, []), polys) for name, polys in gts.items()}
    result = evaluate_dataset(samples, iou_min=args.iou, ignore_dont_care=not args.keep_dont_care)
    if args.per_image:
        print(result.per_image.to_string(index=False))
    print(result.summary())
    return 0


def cmd_loss(args: argparse.Namespace, run: RunConfig) -> int:
    preds = scene_dirs(args.pred)
    gts = {scene.name: scene for scene in scene_dirs(args.gt)}
    rows = []
    for pred_dir in preds:
        gt_dir = gts.get(pred_dir.name) if len(gts) > 1 else next(iter(gts.values()))
        if gt_dir is None:
            raise TextMountainError(f"No ground truth for scene {pred_dir.name}.")
        report = compute_losses(
            _load_prediction(pred_dir, args.sigmoid_tcd),
            read_label_set(gt_dir),
            run.weights,
            run.group.gamma,
            gt_border_mask=args.gt_border_mask,
        )
        rows.append({"scene": pred_dir.name, **asdict(report)})
    table = pd.DataFrame(rows)
    print(table.to_string(index=False, float_format=lambda v: f"{v:.6f}"))
    if len(rows) > 1:
        print(f"mean total={table['total'].mean():.6f}")
    return 0


def _time_ms(fn: Callable[[], object], repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best * 1000.0


def cmd_bench(args: argparse.Namespace, run: RunConfig) -> int:
    cfg = run.group
    worker_counts = sorted(set(args.workers_list or [run.workers]))
    rows = []
    for scene in scene_dirs(args.maps):
        maps = _load_prediction(scene, args.sigmoid_tcd)
        text = text_mask(maps.ts, cfg)
        peaks = extract_peaks(maps.tcbp, maps.ts, cfg).seeds
        seeds = score_instances(filter_peaks(peaks, maps.tcbp, cfg), maps.ts, cfg)
        if cfg.graph_source is GraphSource.TCD:
            if maps.tcd is None:
                raise MapFormatError(f"{scene} has no TCD map for --source tcd.")
            next_map = next_from_tcd(maps.tcd)
        else:
            next_map = next_from_tcbp(maps.tcbp, text)
        # First calls compile the kernels.
        reference = group_sequential(seeds, next_map, text)
        group_parallel(seeds, next_map, text, worker_counts[-1])
        sequential_ms = _time_ms(lambda: group_sequential(seeds, next_map, text), args.repeat)
        parallel_ms: dict[str, float] = {}
        for workers in worker_counts:
            parallel_ms[f"parallel_{workers}_ms"] = _time_ms(
                lambda w=workers: group_parallel(seeds, next_map, text, w), args.repeat
            )
            result = group_parallel(seeds, next_map, text, workers)
            if not np.array_equal(result.labels, reference.labels):
                raise TextMountainError(
                    f"Parallel grouping with {workers} worker(s) differs from sequential on {scene.name}."
                )
        rows.append(
            {
                "scene": scene.name,
                "pixels": int(text.sum()),
                "sequential_ms": sequential_ms,
                **parallel_ms,
                "baseline_ms": _time_ms(lambda: group_baseline(maps.ts, cfg), args.repeat),
                "speedup": sequential_ms / max(min(parallel_ms.values()), 1e-9),
            }
        )
    table = pd.DataFrame(rows)
    print(table.to_string(index=False, float_format=lambda v: f"{v:.3f}"))
    if len(rows) > 1:
        print(f"mean speedup={table['speedup'].mean():.2f}x")
    return 0


def cmd_render(args: argparse.Namespace, run: RunConfig) -> int:
    raster = read_map(args.map)
    target: RasterMap | InstanceMap = InstanceMap.from_raster(raster) if args.instances else raster
    out = render_maps(target, args.output)
    print(f"Wrote {out}")
    return 0


def _add_group_options(parser: argparse.ArgumentParser, sources: Sequence[str]) -> None:
    parser.add_argument("--source", choices=list(sources), default=GraphSource.TCBP.value,
                        help="map used to build the climbing graph (ts = no climbing)")
    parser.add_argument("--gamma", type=_open_unit, help="mountain peak threshold on TCBP")
    parser.add_argument("--instance-min", type=_open_unit, help="minimum mean TS of a peak")
    parser.add_argument("--ts-min", type=_open_unit, help="TS threshold of text pixels")
    parser.add_argument("--min-peak-area", type=_positive_int, help="smallest peak used as a seed, in pixels")
    parser.add_argument("--peak-core", type=_closed_unit, help="TCBP a peak must reach to be used as a seed")
    parser.add_argument("--sigmoid-tcd", action="store_true",
                        help="TCD maps hold sigmoid outputs in [0, 1]; decode before use")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="text-mountain",
        description="Scene text label generation, losses, grouping, detection and evaluation.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--log-level", help="logging level (default: TM_LOG_LEVEL or WARNING)")
    common.add_argument("--workers", type=_positive_int, help="worker threads (default: TM_WORKERS)")
    common.add_argument("--seed", type=int, help="synthetic scene seed (default: TM_SEED or 0)")

    p = sub.add_parser("gen-labels", parents=[common], help="ground-truth maps from an annotation file")
    p.add_argument("annotations", type=Path)
    p.add_argument("size", type=parse_size, help="image size as WxH")
    p.add_argument("-o", "--output", type=Path, required=True)
    p.set_defaults(handler=cmd_gen_labels)

    p = sub.add_parser("synth", parents=[common], help="random scenes with exact (or noisy) maps")
    p.add_argument("--n", type=_positive_int, default=1)
    p.add_argument("--size", type=parse_size, default=(640, 640))
    p.add_argument("--noise", type=float, default=0.0, help="Gaussian sigma on TS and TCBP")
    p.add_argument("--angle-noise", type=float, default=0.0, help="TCD rotation sigma in degrees")
    p.add_argument("--max-texts", type=_positive_int, default=8)
    p.add_argument("--curved-ratio", type=float, default=0.0)
    p.add_argument("--dont-care-ratio", type=float, default=0.0)
    p.add_argument("-o", "--output", type=Path, required=True)
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("detect", parents=[common], help="group maps into text polygons")
    p.add_argument("maps", type=Path, help="scene directory or directory of scenes")
    _add_group_options(p, [s.value for s in GraphSource])
    p.add_argument("--mode", choices=[m.value for m in DetectMode], default=DetectMode.QUAD.value)
    p.add_argument("-o", "--output", type=Path, required=True)
    p.set_defaults(handler=cmd_detect)

    p = sub.add_parser("eval", parents=[common], help="precision, recall and F-measure of detections")
    p.add_argument("detections", type=Path)
    p.add_argument("ground_truth", type=Path, help="gt.txt, scene directory or directory of scenes")
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--keep-dont-care", action="store_true",
                   help="score ### regions like other text")
    p.add_argument("--per-image", action="store_true")
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("loss", parents=[common], help="loss terms between predicted and ground-truth maps")
    p.add_argument("pred", type=Path)
    p.add_argument("gt", type=Path)
    p.add_argument("--gamma", type=_open_unit)
    p.add_argument("--gt-border-mask", action="store_true",
                   help="select the TCD border with ground-truth TCBP")
    p.add_argument("--sigmoid-tcd", action="store_true")
    p.set_defaults(handler=cmd_loss)

    p = sub.add_parser("bench", parents=[common], help="time sequential, parallel and baseline grouping")
    p.add_argument("maps", type=Path)
    _add_group_options(p, [GraphSource.TCBP.value, GraphSource.TCD.value])
    p.add_argument("--worker-counts", dest="workers_list", type=_positive_int, nargs="+")
    p.add_argument("--repeat", type=_positive_int, default=3)
    p.set_defaults(handler=cmd_bench)

    p = sub.add_parser("render", parents=[common], help="write a map as a P6 portable pixmap")
    p.add_argument("map", type=Path)
    p.add_argument("--instances", action="store_true", help="the map holds instance ids")
    p.add_argument("-o", "--output", type=Path, required=True)
    p.set_defaults(handler=cmd_render)
    return parser


def _run_config(args: argparse.Namespace) -> RunConfig:
    base = RunConfig.from_env()
    group = base.group
    if hasattr(args, "source"):
        group = _group_config(args, base.group)
    elif getattr(args, "gamma", None) is not None:
        group = GroupConfig(gamma=args.gamma)
    return RunConfig(
        group=group,
        weights=LossWeights(),
        mode=DetectMode(getattr(args, "mode", base.mode.value)),
        workers=args.workers or base.workers,
        seed=args.seed if args.seed is not None else base.seed,
    )


def dispatch(argv: Sequence[str] | None = None) -> int:
    """Parse ``argv`` and run one command.

    Returns:
        int: 0 on success, 2 on a usage error, 1 on a runtime error.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2

    level = (args.log_level or default_log_level()).upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        run = _run_config(args)
        handler: Handler = args.handler
        return handler(args, run)
    except (TextMountainError, OSError) as e:
        logger.debug("Command %s failed", args.command, exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return 1


def main() -> None:
    # Load environment variables for local development
    try:
        from dotenv import load_dotenv

        load_dotenv()
    except ImportError:
        pass
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
