"""Command-line entry point (``hma``).

Exit status: 0 on success, 1 when a processing stage fails, 2 on usage,
configuration or file-format errors.
"""

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import fileio, plotting
from .classifier import ColorHistogramClassifier, augment_brightness, evaluate, make_view_protocol, preprocess
from .config import RunConfig
from .errors import ParseError, PerceptionError, StageError
from .localization import localize
from .report import Report, accuracy_rows
from .segmentation import run_pipeline
from .simulate import color_objects, object_dataset, render_scene, synth_array_signal

log = logging.getLogger("hma_perception")


def _config(args):
    cfg = RunConfig.load(getattr(args, "config", None))
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    return cfg


def _figure_path(report_path, name):
    p = Path(report_path)
    return p.with_name(f"{p.stem}.{name}.png")


def _finish(args, report, figures=()):
    fileio.ensure_parent(args.report)
    report.write(args.report)
    if not args.no_figures:
        for name, draw in figures:
            draw(_figure_path(args.report, name))
    log.info("wrote %s", args.report)


def cmd_simulate_scene(args):
    cfg = _config(args)
    cloud, truth = render_scene(cfg.scene())
    for p in (args.out_cloud, args.out_rgb, args.out_truth):
        fileio.ensure_parent(p)
    fileio.write_cloud(args.out_cloud, cloud)
    fileio.write_ppm(args.out_rgb, cloud.image)
    ids_path = Path(args.out_truth).with_suffix(".ids.pgm")
    fileio.write_pgm(ids_path, truth.object_ids)
    objs = cfg.scene().objects
    fileio.dump_json(args.out_truth, {
        "plane_camera": None if truth.plane is None else {
            "normal": truth.plane.normal.tolist(), "offset": truth.plane.offset},
        "camera_to_world": {"rotation": truth.camera_to_world.rotation.tolist(),
                            "translation": truth.camera_to_world.translation.tolist()},
        "objects": [{"id": 2 + k, "class_id": o.class_id,
                     "centroid_camera": None if c is None else c.tolist(),
                     "centroid_world": None if w is None else w.tolist()}
                    for k, (o, c, w) in enumerate(zip(objs, truth.centroids_camera, truth.centroids_world))],
        "object_ids": ids_path.name,
    })
    return 0


def cmd_simulate_dataset(args):
    cfg = _config(args)
    d = cfg.dataset
    n_views = args.n_views if args.n_views is not None else int(d["n_views"])
    step = args.step if args.step is not None else float(d["step_degrees"])
    jitter = args.jitter if args.jitter is not None else int(d["rgb_jitter"])
    angles = [a + args.offset for a in make_view_protocol(n_views, step)]
    ds = object_dataset(color_objects(int(d["n_classes"])), angles, tuple(d["image_size"]),
                        cfg.seed, jitter)
    fileio.write_dataset(args.out, ds)
    print(f"{len(ds)} images, {len(ds.classes)} classes -> {args.out}")
    return 0


def cmd_augment(args):
    cfg = _config(args)
    ds = fileio.read_dataset(args.dataset)
    out = augment_brightness(ds, tuple(cfg.classifier["brightness_factors"]))
    fileio.write_dataset(args.out, out)
    print(f"{len(ds)} -> {len(out)} images")
    return 0


def cmd_train(args):
    cfg = _config(args)
    ds = fileio.read_dataset(args.dataset)
    model = ColorHistogramClassifier(int(cfg.classifier["bins"])).train(ds)
    fileio.ensure_parent(args.model)
    fileio.save_model(args.model, model)
    print(f"trained on {len(ds)} images, {len(ds.classes)} classes -> {args.model}")
    return 0


def cmd_classify(args):
    model = fileio.load_model(args.model)
    label, score = model.classify(preprocess(fileio.read_ppm(args.image)))
    print(f"{label}\t{model.classes[label]}\t{score:.6f}")
    return 0


def _read_predictions(path):
    """TSV ``file<TAB>predicted class name`` lines, one per test-set image."""
    preds = {}
    for i, line in enumerate(Path(path).read_text().splitlines()):
        if not line.strip() or line.startswith("#"):
            continue
        f = line.split("\t")
        if len(f) < 2:
            raise ParseError("expected 'file<TAB>class'", f"line {i + 1}", path)
        preds[f[0]] = f[1]
    return preds


def cmd_evaluate(args):
    cfg = _config(args)
    test = fileio.read_dataset(args.testset)
    subset = args.classes.split(",") if args.classes else cfg.classifier["eval_classes"]
    if args.predictions:
        from .classifier import tally
        manifest = fileio.load_json(Path(args.testset) / fileio.MANIFEST)
        preds = _read_predictions(args.predictions)
        keep = subset or list(test.classes)
        names = sorted(set(preds.values()) | set(keep))
        truth, predicted = [], []
        for entry, im in zip(manifest["images"], test.images):
            name = test.classes[im.label]
            if name not in keep:
                continue
            if entry["file"] not in preds:
                raise ParseError(f"no prediction for {entry['file']}", None, args.predictions)
            truth.append(keep.index(name))
            predicted.append(names.index(preds[entry["file"]]))
        table = tally(keep, names, truth, predicted)
        method = "external"
    else:
        model = fileio.load_model(args.model)
        table = evaluate(model, test, subset)
        method = "color-histogram"
    rep = Report("evaluate", not args.no_timestamp)
    header, rows = accuracy_rows(table, method)
    rep.add_kv("summary", [("classes", table.n_classes), ("trials", sum(table.trials)),
                           ("correct", sum(table.true)), ("accuracy_percent", table.accuracy),
                           ("accuracy_display", table.accuracy_display)])
    rep.add_table("accuracy_table", header, rows)
    rep.add_table("classes", ["number", "name", "true", "false"],
                  [[i + 1, n, t, f] for i, (n, t, f) in enumerate(zip(table.classes, table.true, table.false))])
    _finish(args, rep, [("confusion", lambda p: plotting.plot_confusion(table, p))])
    print(f"accuracy {table.accuracy_display} %")
    return 0


def _candidate_rows(result, class_names=None):
    rows = []
    for i, (c, g) in enumerate(zip(result.candidates, result.targets)):
        name = class_names[c.label] if (class_names and c.label is not None) else None
        rows.append([i, int(c.point_indices.size), *c.roi, *map(float, c.centroid_camera),
                     *map(float, g.position_robot), *map(float, g.approach_axis),
                     c.label, name, None if c.score is None else float(c.score)])
    return rows


CANDIDATE_HEADER = ["index", "n_points", "u_min", "v_min", "u_max", "v_max",
                    "cam_x", "cam_y", "cam_z", "robot_x", "robot_y", "robot_z",
                    "approach_x", "approach_y", "approach_z", "label", "class", "score"]


def _segment_report(args, command, cloud, result, class_names=None):
    rep = Report(command, not args.no_timestamp)
    rep.add_kv("plane", [("normal_x", float(result.plane.normal[0])), ("normal_y", float(result.plane.normal[1])),
                         ("normal_z", float(result.plane.normal[2])), ("offset", result.plane.offset),
                         ("inliers", int(result.plane_inliers.size))])
    rep.add_kv("summary", [("valid_points", int(cloud.valid.sum())), ("candidates", len(result.candidates))])
    rep.add_table("candidates", CANDIDATE_HEADER, _candidate_rows(result, class_names))
    if getattr(args, "out_candidates", None):
        out = Path(args.out_candidates)
        out.mkdir(parents=True, exist_ok=True)
        for i, c in enumerate(result.candidates):
            fileio.write_ppm(out / f"candidate_{i:02d}.ppm", c.crop)
    _finish(args, rep, [("candidates", lambda p: plotting.plot_candidates(
        cloud.image, result.candidates, p, class_names))])


def cmd_segment(args):
    cfg = _config(args)
    cloud = fileio.read_cloud(args.cloud)
    result = run_pipeline(cloud, cfg.pipeline())
    _segment_report(args, "segment", cloud, result)
    print(f"{len(result.candidates)} candidates")
    return 0


def cmd_pipeline(args):
    cfg = _config(args)
    cloud = fileio.read_cloud(args.cloud)
    model = fileio.load_model(args.model)
    result = run_pipeline(cloud, cfg.pipeline(), model)
    _segment_report(args, "pipeline", cloud, result, model.classes)
    for i, (c, g) in enumerate(zip(result.candidates, result.targets)):
        print(f"{i}\t{model.classes[c.label]}\t" + " ".join(f"{v:.4f}" for v in g.position_robot))
    return 0


def cmd_simulate_audio(args):
    cfg = _config(args)
    sig = synth_array_signal(cfg.mic_array(), cfg.audio())
    peak = np.abs(sig.channels).max()
    if peak >= 1.0:
        log.warning("signal peak %.3f clips at 16-bit full scale", peak)
    fileio.ensure_parent(args.out)
    fileio.write_wav(args.out, sig)
    return 0


def cmd_localize(args):
    cfg = _config(args)
    sig = fileio.read_wav(args.wav)
    array = cfg.mic_array()
    if sig.sample_rate != array.sample_rate:
        raise ParseError(f"WAV rate {sig.sample_rate} Hz differs from array rate {array.sample_rate} Hz",
                         None, args.wav)
    params = cfg.localization()
    try:
        res = localize(sig, array, params)
    except PerceptionError as e:
        raise StageError("localize", e) from e
    rep = Report("localize", not args.no_timestamp)
    rep.add_kv("localization", [("channels", sig.n_channels), ("samples", sig.n_samples),
                                ("frames", res.n_frames), ("band_low_hz", res.spectrum.band[0]),
                                ("band_high_hz", res.spectrum.band[1]), ("n_sources", params.n_sources),
                                ("grid_step_deg", params.grid_step)])
    power = res.spectrum.power
    az_index = {float(a): i for i, a in enumerate(res.spectrum.azimuths)}
    rep.add_table("peaks", ["rank", "azimuth_deg", "power"],
                  [[i + 1, a, float(power[az_index[a]])] for i, a in enumerate(res.azimuths)])
    rep.add_table("spectrum", ["azimuth_deg", "power"],
                  [[float(a), float(p)] for a, p in zip(res.spectrum.azimuths, power)])
    _finish(args, rep, [("spectrum", lambda p: plotting.plot_spatial_spectrum(res.spectrum, res.azimuths, p))])
    print("azimuths: " + ", ".join(f"{a:.1f}" for a in res.azimuths))
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="hma", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=fn)
        return p

    def reporting(p):
        p.add_argument("--report", required=True)
        p.add_argument("--no-timestamp", action="store_true", help="omit the timestamp line")
        p.add_argument("--no-figures", action="store_true", help="skip PNG figures next to the report")

    def seeded(p, config_required=False):
        p.add_argument("--config", required=config_required)
        p.add_argument("--seed", type=int, help="overrides config seed and HMA_SEED")

    p = add("simulate-scene", cmd_simulate_scene, "render a tabletop RGB-D scene")
    seeded(p)
    p.add_argument("--out-cloud", required=True)
    p.add_argument("--out-rgb", required=True)
    p.add_argument("--out-truth", required=True)

    p = add("simulate-dataset", cmd_simulate_dataset, "render multi-view object images")
    seeded(p)
    p.add_argument("--out", required=True)
    p.add_argument("--n-views", type=int)
    p.add_argument("--step", type=float)
    p.add_argument("--offset", type=float, default=0.0, help="azimuth added to every view")
    p.add_argument("--jitter", type=int)

    p = add("segment", cmd_segment, "extract object candidates from a cloud file")
    seeded(p)
    p.add_argument("--cloud", required=True)
    p.add_argument("--out-candidates")
    reporting(p)

    p = add("train", cmd_train, "train the colour-histogram baseline")
    seeded(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--model", required=True)

    p = add("classify", cmd_classify, "classify one PPM image")
    p.add_argument("--model", required=True)
    p.add_argument("--image", required=True)

    p = add("augment", cmd_augment, "brightness-augment a dataset")
    seeded(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)

    p = add("evaluate", cmd_evaluate, "per-class True/False evaluation table")
    seeded(p)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--model")
    src.add_argument("--predictions", help="TSV of file<TAB>class from an external classifier")
    p.add_argument("--testset", required=True)
    p.add_argument("--classes", help="comma-separated subset of test classes")
    reporting(p)

    p = add("simulate-audio", cmd_simulate_audio, "synthesize a microphone-array recording")
    seeded(p)
    p.add_argument("--out", required=True)

    p = add("localize", cmd_localize, "MUSIC source localization on a WAV file")
    seeded(p)
    p.add_argument("--wav", required=True)
    reporting(p)

    p = add("pipeline", cmd_pipeline, "segmentation + classification + grasp targets")
    seeded(p)
    p.add_argument("--cloud", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out-candidates")
    reporting(p)
    return ap


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ParseError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except StageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except PerceptionError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
