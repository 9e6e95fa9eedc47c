"""The featpipe command-line tool.

One executable, eight subcommands covering the full pipeline:
extraction, training, tuning, prediction, evaluation, learning
curves, baseline comparisons, and filter visualization. Settings come
from an optional JSON config file; every config key a subcommand
reads is exposed as a flag of the same dotted name and listed in its
help text.

Exit codes: 0 success, 1 internal error, 2 configuration error,
3 data error, 4 model or bundle error.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import os
import sys

import numpy as np

from . import render, svm, tuner
from .bundle import load_bundle
from .config import SCHEMA, RunConfig
from .errors import (
    BundleError,
    ConfigError,
    DataError,
    DecodeError,
    ModelError,
    ShapeError,
)
from .features_io import FeatureRecord, read_features, write_features
from .graph import FEATURE_DIM, builtin_alexnet_graph, conv1_montage, extract_features
from .imaging import (
    INPUT_HEIGHT,
    INPUT_WIDTH,
    encode_png,
    load_manifest,
    read_image,
    resize_bilinear,
    to_input_tensor,
)
from .methods import (
    BofMethod,
    CnnFeatures,
    Sample,
    SoftmaxMethod,
    SvmMethod,
    raw_pixel_features,
)
from .evaluation import confusion, learning_curve

FEATURES_FILE = "features.csv"
MODEL_FILE = "model.json"
TRACE_FILE = "tune_trace.csv"
PREDICTIONS_FILE = "predictions.csv"
CONFUSION_CSV = "confusion.csv"
CONFUSION_SVG = "confusion.svg"
CURVE_CSV = "learning_curve.csv"
CURVE_SVG = "learning_curve.svg"
MONTAGE_FILE = "conv1_montage.png"

PREDICTIONS_HEADER = ("image_id", "label", "predicted")

# Config keys each subcommand reads; mirrored verbatim in its help text
# and checked against RunConfig.read_keys() by the integration tests.
COMMAND_KEYS = {
    "extract": (
        "bundle", "classes", "manifest", "mean", "out", "skip_bad", "threads",
    ),
    "train": (
        "classes", "out", "svm.C", "svm.gamma", "svm.kernel",
        "svm.max_passes", "svm.tol",
    ),
    "tune": (
        "classes", "out", "tuner.budget", "tuner.folds", "tuner.seed",
    ),
    "predict": ("out",),
    "evaluate": ("classes", "out"),
    "learning-curve": (
        "bof.descriptor_cap", "bof.k", "bof.kmeans_iters", "bof.patch",
        "bof.stride", "bundle", "classes", "curve.fractions",
        "curve.methods", "manifest", "mean", "out", "seed",
        "softmax.epochs", "softmax.lr", "svm.C", "svm.gamma",
        "svm.kernel", "svm.max_passes", "svm.tol", "threads",
    ),
    "baseline": (
        "bof.descriptor_cap", "bof.k", "bof.kmeans_iters", "bof.patch",
        "bof.stride", "bundle", "classes", "manifest", "mean", "out",
        "seed", "softmax.epochs", "softmax.lr", "svm.C", "svm.gamma",
        "svm.kernel", "svm.max_passes", "svm.tol", "threads",
    ),
    "visualize": ("bundle", "out"),
}

COMMAND_OUTPUTS = {
    "extract": (FEATURES_FILE,),
    "train": (MODEL_FILE,),
    "tune": (MODEL_FILE, TRACE_FILE),
    "predict": (PREDICTIONS_FILE,),
    "evaluate": (CONFUSION_CSV, CONFUSION_SVG),
    "learning-curve": (CURVE_CSV, CURVE_SVG),
    "baseline": (CONFUSION_CSV, CONFUSION_SVG),
    "visualize": (MONTAGE_FILE,),
}


def _epilog(command: str) -> str:
    keys = ", ".join(COMMAND_KEYS[command])
    outputs = ", ".join(COMMAND_OUTPUTS[command])
    return f"config keys: {keys}\nwrites: {outputs} (under the out directory)"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="featpipe",
        description="CNN-feature image classification pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_command(name, help_text, **extra_flags):
        p = sub.add_parser(
            name,
            help=help_text,
            description=help_text,
            epilog=_epilog(name),
            formatter_class=argparse.RawDescriptionHelpFormatter,
        )
        p.add_argument("--config", metavar="PATH", help="JSON config file")
        for key in COMMAND_KEYS[name]:
            p.add_argument(
                f"--{key}",
                dest=key,
                metavar="VALUE",
                help=f"override config key {key}",
            )
        for flag, (metavar, help_msg) in extra_flags.items():
            p.add_argument(flag, metavar=metavar, help=help_msg)
        return p

    add_command("extract", "compute one feature vector per manifest image")
    add_command(
        "train",
        "train an SVM on an extracted feature file",
        **{"--features": ("PATH", f"feature file (default <out>/{FEATURES_FILE})")},
    )
    add_command(
        "tune",
        "random-search SVM hyperparameters by cross validation",
        **{"--features": ("PATH", f"feature file (default <out>/{FEATURES_FILE})")},
    )
    add_command(
        "predict",
        "classify a feature file with a trained model",
        **{
            "--features": ("PATH", f"feature file (default <out>/{FEATURES_FILE})"),
            "--model": ("PATH", f"model file (default <out>/{MODEL_FILE})"),
        },
    )
    add_command(
        "evaluate",
        "score a predictions file and render the confusion matrix",
        **{
            "--predictions": (
                "PATH",
                f"predictions file (default <out>/{PREDICTIONS_FILE})",
            )
        },
    )
    add_command(
        "learning-curve",
        "accuracy versus training-set size for one or more methods",
    )
    baseline = add_command(
        "baseline",
        "run one comparator method through the evaluate path",
    )
    baseline.add_argument(
        "method", choices=("bof", "rawsvm", "softmax"), help="comparator to run"
    )
    add_command("visualize", "render the first-layer filters as a montage PNG")
    return parser


def _load_config(args) -> RunConfig:
    config = RunConfig.load(args.config)
    values = vars(args)
    for key in SCHEMA:
        raw = values.get(key)
        if raw is not None:
            config.override(key, raw)
    return config


def _read_command_keys(config: RunConfig, command: str) -> dict:
    return {key: config.get(key) for key in COMMAND_KEYS[command]}


def _out_dir(values: dict) -> str:
    out = values["out"] or "."
    os.makedirs(out, exist_ok=True)
    return out


def _required(values: dict, key: str) -> str:
    value = values[key]
    if not value:
        raise ConfigError(f"config key {key!r} is required but not set")
    return value


def _existing_path(values: dict, key: str) -> str:
    value = _required(values, key)
    if not os.path.exists(value):
        raise ConfigError(f"config key {key!r} points to a missing path: {value!r}")
    return value


def _two_classes(values: dict) -> tuple:
    classes = values["classes"]
    if len(classes) != 2 or classes[0] == classes[1]:
        raise ConfigError(f"exactly two distinct class names required, got {classes}")
    return tuple(classes)


def _thread_count(config: RunConfig) -> int:
    return config.threads()


def _kernel_from(values: dict, dim: int) -> svm.KernelSpec:
    name = values["svm.kernel"]
    if name == "linear":
        return svm.KernelSpec("linear")
    if name == "rbf":
        gamma = values["svm.gamma"]
        return svm.KernelSpec("rbf", gamma if gamma is not None else 1.0 / dim)
    raise ConfigError(f"unknown SVM kernel {name!r}")


def _signed_labels(labels, classes) -> np.ndarray:
    class_set = set(classes)
    for label in labels:
        if label not in class_set:
            raise DataError(f"label {label!r} is not one of {list(classes)}")
    return np.array([1.0 if label == classes[0] else -1.0 for label in labels])


def _class_map(classes) -> dict:
    return {1: classes[0], -1: classes[1]}


def cmd_extract(args, config: RunConfig) -> int:
    values = _read_command_keys(config, "extract")
    classes = _two_classes(values)
    out = _out_dir(values)
    threads = _thread_count(config)
    bundle = load_bundle(_required(values, "bundle"))
    graph = builtin_alexnet_graph()
    manifest = load_manifest(_existing_path(values, "manifest"), classes=classes)
    manifest_dir = os.path.dirname(os.path.abspath(values["manifest"]))
    mean = tuple(values["mean"])

    def one(item):
        index, record = item
        image_id = os.path.relpath(record.path, manifest_dir)
        try:
            raster = read_image(record.path)
        except DecodeError:
            if not values["skip_bad"]:
                raise
            return index, image_id, record.label, None
        frame = resize_bilinear(raster, INPUT_WIDTH, INPUT_HEIGHT)
        vector = extract_features(
            graph, bundle, to_input_tensor(frame, mean=mean), image_id=image_id
        )
        return index, image_id, record.label, np.asarray(vector.values)

    items = list(enumerate(manifest.records))

    def collect(results):
        records = []
        for index, image_id, label, vector in results:
            if vector is None:
                print(f"warning: skipping unreadable image {image_id}", file=sys.stderr)
                continue
            print(f"[{index + 1}/{len(items)}] {image_id}", file=sys.stderr)
            records.append(FeatureRecord(image_id=image_id, label=label, values=vector))
        return records

    if threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            records = collect(pool.map(one, items))
    else:
        records = collect(map(one, items))
    if not records:
        raise DataError("no images could be read from the manifest")
    path = os.path.join(out, FEATURES_FILE)
    write_features(records, path)
    print(f"extracted {len(records)} feature vectors -> {path}")
    return 0


def _features_path(args, out: str) -> str:
    return args.features if args.features else os.path.join(out, FEATURES_FILE)


def cmd_train(args, config: RunConfig) -> int:
    values = _read_command_keys(config, "train")
    classes = _two_classes(values)
    out = _out_dir(values)
    records = read_features(_features_path(args, out))
    x = np.vstack([r.values for r in records])
    y = _signed_labels([r.label for r in records], classes)
    model = svm.smo_train(
        x,
        y,
        C=values["svm.C"],
        kernel=_kernel_from(values, x.shape[1]),
        tol=values["svm.tol"],
        max_passes=values["svm.max_passes"],
        class_map=_class_map(classes),
    )
    path = os.path.join(out, MODEL_FILE)
    with open(path, "wb") as handle:
        handle.write(svm.serialize(model))
    print(f"trained model with {len(model.dual_coefs)} support vectors -> {path}")
    return 0


def cmd_tune(args, config: RunConfig) -> int:
    values = _read_command_keys(config, "tune")
    classes = _two_classes(values)
    out = _out_dir(values)
    records = read_features(_features_path(args, out))
    x = np.vstack([r.values for r in records])
    y = _signed_labels([r.label for r in records], classes)
    budget = config.positive_int("tuner.budget")
    folds = config.positive_int("tuner.folds")
    winner, trace = tuner.optimize(
        tuner.SearchSpace(), x, y, budget=budget, seed=values["tuner.seed"], folds=folds
    )
    model = svm.smo_train(
        x,
        y,
        C=winner.C,
        kernel=winner.kernel_spec(),
        class_map=_class_map(classes),
    )
    model_path = os.path.join(out, MODEL_FILE)
    with open(model_path, "wb") as handle:
        handle.write(svm.serialize(model))
    trace_path = os.path.join(out, TRACE_FILE)
    tuner.write_trace_csv(trace, trace_path)
    best = trace.records[-1].incumbent_objective
    print(f"best objective {best:.9g} after {budget} evaluations -> {model_path}")
    return 0


def cmd_predict(args, config: RunConfig) -> int:
    values = _read_command_keys(config, "predict")
    out = _out_dir(values)
    records = read_features(_features_path(args, out))
    model_path = args.model if args.model else os.path.join(out, MODEL_FILE)
    try:
        with open(model_path, "rb") as handle:
            model = svm.deserialize(handle.read())
    except OSError as exc:
        raise ModelError(f"cannot read model file {model_path!r}: {exc}") from exc
    width = records[0].values.shape[0]
    expected = model.support_vectors.shape[1]
    if width != expected:
        raise ShapeError(
            "feature file does not match the model",
            dimension="features",
            expected=expected,
            found=width,
        )
    predictions = svm.predict_many(model, np.vstack([r.values for r in records]))
    path = os.path.join(out, PREDICTIONS_FILE)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(PREDICTIONS_HEADER)
        for record, predicted in zip(records, predictions):
            writer.writerow([record.image_id, record.label, predicted])
    print(f"predicted {len(records)} images -> {path}")
    return 0


def _read_predictions(path: str) -> tuple:
    try:
        with open(path, "r", encoding="utf-8", newline="") as handle:
            rows = list(csv.reader(handle))
    except OSError as exc:
        raise DataError(f"cannot read predictions file {path!r}: {exc}") from exc
    if not rows or tuple(rows[0]) != PREDICTIONS_HEADER:
        raise DataError(f"predictions file {path!r} lacks the expected header")
    actual, predicted = [], []
    for number, row in enumerate(rows[1:], start=2):
        if len(row) != 3:
            raise DataError(f"predictions file {path!r} row {number} is malformed")
        actual.append(row[1])
        predicted.append(row[2])
    if not actual:
        raise DataError(f"predictions file {path!r} has no data rows")
    return predicted, actual


def _write_confusion_outputs(matrix, out: str) -> None:
    render.write_confusion_csv(matrix, os.path.join(out, CONFUSION_CSV))
    render.render_confusion(matrix, os.path.join(out, CONFUSION_SVG))


def _accuracy_line(matrix) -> str:
    correct = int(matrix.counts.trace())
    return f"accuracy {matrix.accuracy():.4f} ({correct}/{matrix.total()})"


def cmd_evaluate(args, config: RunConfig) -> int:
    values = _read_command_keys(config, "evaluate")
    classes = _two_classes(values)
    out = _out_dir(values)
    path = args.predictions if args.predictions else os.path.join(out, PREDICTIONS_FILE)
    predicted, actual = _read_predictions(path)
    matrix = confusion(predicted, actual, classes=classes)
    _write_confusion_outputs(matrix, out)
    print(_accuracy_line(matrix))
    return 0


def _manifest_samples(values: dict, classes) -> tuple:
    manifest = load_manifest(_existing_path(values, "manifest"), classes=classes)
    manifest_dir = os.path.dirname(os.path.abspath(values["manifest"]))

    def to_samples(records):
        return [
            Sample(
                image_id=os.path.relpath(record.path, manifest_dir),
                label=record.label,
                raster=read_image(record.path),
            )
            for record in records
        ]

    train = to_samples(manifest.subset("train"))
    test = to_samples(manifest.subset("test"))
    if not train:
        raise DataError("manifest has no records with split=train")
    if not test:
        raise DataError("manifest has no records with split=test")
    return train, test


def _build_method(name: str, values: dict, shared: dict):
    """Construct one method adapter; CNN-based ones share the extractor."""
    if name in ("cnn_svm", "softmax") and "features" not in shared:
        bundle = load_bundle(_required(values, "bundle"))
        shared["features"] = CnnFeatures(
            builtin_alexnet_graph(), bundle, mean=tuple(values["mean"])
        )
    if name == "cnn_svm":
        return SvmMethod(
            "cnn_svm",
            shared["features"],
            FEATURE_DIM,
            C=values["svm.C"],
            kernel=_kernel_from(values, FEATURE_DIM),
            tol=values["svm.tol"],
            max_passes=values["svm.max_passes"],
        )
    if name == "raw_svm" or name == "rawsvm":
        return SvmMethod(
            "raw_svm",
            raw_pixel_features,
            FEATURE_DIM,
            C=values["svm.C"],
            kernel=_kernel_from(values, FEATURE_DIM),
            tol=values["svm.tol"],
            max_passes=values["svm.max_passes"],
        )
    if name == "bof":
        return BofMethod(
            k=values["bof.k"],
            C=values["svm.C"],
            kernel=_kernel_from(values, values["bof.k"]),
            tol=values["svm.tol"],
            max_passes=values["svm.max_passes"],
            patch_size=values["bof.patch"],
            grid_step=values["bof.stride"],
            kmeans_iters=values["bof.kmeans_iters"],
            descriptor_cap=values["bof.descriptor_cap"],
            seed=values["seed"],
        )
    if name == "softmax":
        return SoftmaxMethod(
            shared["features"],
            lr=values["softmax.lr"],
            epochs=values["softmax.epochs"],
            seed=values["seed"],
        )
    raise ConfigError(f"unknown method {name!r}")


def _warm_feature_cache(shared: dict, samples, threads: int) -> None:
    features = shared.get("features")
    if features is None or threads <= 1:
        return
    with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
        list(pool.map(features, samples))


def cmd_learning_curve(args, config: RunConfig) -> int:
    values = _read_command_keys(config, "learning-curve")
    classes = _two_classes(values)
    out = _out_dir(values)
    threads = _thread_count(config)
    fractions = values["curve.fractions"]
    method_names = values["curve.methods"]
    if not method_names:
        raise ConfigError("curve.methods must name at least one method")
    train, test = _manifest_samples(values, classes)

    shared: dict = {}
    methods = [_build_method(name, values, shared) for name in method_names]
    _warm_feature_cache(shared, train + test, threads)

    all_points = []
    series = []
    for method in methods:
        points = learning_curve(method, train, test, fractions, seed=values["seed"])
        all_points.extend(points)
        series.append((method.name, [(p.fraction, p.accuracy) for p in points]))
        print(f"{method.name}: accuracy {points[-1].accuracy:.4f} at f={points[-1].fraction:g}")

    render.write_curve_csv(all_points, os.path.join(out, CURVE_CSV))
    render.render_line_chart(
        series,
        os.path.join(out, CURVE_SVG),
        title="learning curves",
        x_label="fraction of training images",
        y_label="test accuracy",
    )
    return 0


def cmd_baseline(args, config: RunConfig) -> int:
    values = _read_command_keys(config, "baseline")
    classes = _two_classes(values)
    out = _out_dir(values)
    threads = _thread_count(config)
    train, test = _manifest_samples(values, classes)
    shared: dict = {}
    method = _build_method(args.method, values, shared)
    _warm_feature_cache(shared, train + test, threads)
    method.fit(train)
    predicted = method.predict(test)
    matrix = confusion(predicted, [s.label for s in test], classes=classes)
    _write_confusion_outputs(matrix, out)
    print(_accuracy_line(matrix))
    return 0


def cmd_visualize(args, config: RunConfig) -> int:
    values = _read_command_keys(config, "visualize")
    out = _out_dir(values)
    bundle = load_bundle(_required(values, "bundle"))
    montage = conv1_montage(bundle)
    path = os.path.join(out, MONTAGE_FILE)
    with open(path, "wb") as handle:
        handle.write(encode_png(montage))
    print(f"wrote conv1 montage -> {path}")
    return 0


COMMANDS = {
    "extract": cmd_extract,
    "train": cmd_train,
    "tune": cmd_tune,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "learning-curve": cmd_learning_curve,
    "baseline": cmd_baseline,
    "visualize": cmd_visualize,
}


def run(argv=None, config_out: list = None) -> int:
    """Parse arguments and dispatch; raises pipeline errors upward.

    config_out, when given, receives the RunConfig once built, so
    tests can inspect which keys the command actually read.
    """
    args = build_parser().parse_args(argv)
    config = _load_config(args)
    if config_out is not None:
        config_out.append(config)
    return COMMANDS[args.command](args, config)


def main(argv=None) -> int:
    try:
        return run(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataError, ShapeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except (BundleError, ModelError) as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return 4
    except SystemExit:
        raise
    except Exception as exc:  # pragma: no cover - the catch-all contract
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
