"""End-to-end behavior of the featpipe command line."""

import csv
import json
import os
import re

import numpy as np
import pytest

from featpipe import cli
from featpipe.features_io import FeatureRecord, write_features
from featpipe.imaging import decode_image, encode_png
from featpipe.svm import deserialize

from synth import disc_raster

CLASSES = ("hookah", "nonhookah")


def write_paper_predictions(path):
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["image_id", "label", "predicted"])
        for i in range(208):
            writer.writerow([f"h{i}", "hookah", "hookah"])
        for i in range(2):
            writer.writerow([f"hx{i}", "hookah", "nonhookah"])
        for i in range(210):
            writer.writerow([f"n{i}", "nonhookah", "nonhookah"])


def write_images_and_manifest(directory, per_class_train, per_class_test, seed=3):
    rng = np.random.default_rng(seed)
    rows = ["path,label,split"]
    total = per_class_train + per_class_test
    for i in range(total):
        split = "train" if i < per_class_train else "test"
        for present, label in ((True, CLASSES[0]), (False, CLASSES[1])):
            name = f"{label}_{i}.png"
            with open(os.path.join(directory, name), "wb") as handle:
                handle.write(encode_png(disc_raster(rng, present)))
            rows.append(f"{name},{label},{split}")
    manifest = os.path.join(directory, "manifest.csv")
    with open(manifest, "w") as handle:
        handle.write("\n".join(rows) + "\n")
    return manifest


def write_separable_features(path, per_class=6, width=6):
    rng = np.random.default_rng(1)
    records = []
    for i in range(per_class):
        for sign, label in ((1.0, CLASSES[0]), (-1.0, CLASSES[1])):
            values = rng.normal(scale=0.2, size=width)
            values[0] += 2.0 * sign
            records.append(
                FeatureRecord(image_id=f"{label}_{i}", label=label, values=values)
            )
    write_features(records, path)


@pytest.fixture(scope="module")
def small_corpus(tmp_path_factory):
    """Four train + four test images with a manifest."""
    directory = tmp_path_factory.mktemp("small_corpus")
    manifest = write_images_and_manifest(str(directory), 2, 2)
    return str(directory), manifest


@pytest.fixture(scope="module")
def curve_corpus(tmp_path_factory):
    """Twenty train + six test images for raw-feature curves."""
    directory = tmp_path_factory.mktemp("curve_corpus")
    manifest = write_images_and_manifest(str(directory), 10, 3)
    return str(directory), manifest


@pytest.fixture(scope="module")
def features_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("features") / "features.csv"
    write_separable_features(str(path))
    return str(path)


@pytest.fixture(scope="module")
def model_file(tmp_path_factory, features_file):
    out = tmp_path_factory.mktemp("model_out")
    code = cli.main(["train", "--features", features_file, "--out", str(out)])
    assert code == 0
    return str(out / cli.MODEL_FILE)


def subcommand_help(capsys, command):
    with pytest.raises(SystemExit) as excinfo:
        cli.build_parser().parse_args([command, "--help"])
    assert excinfo.value.code == 0
    return capsys.readouterr().out


def documented_keys(help_text):
    match = re.search(r"config keys: (.+)", help_text)
    assert match, "help text must list its config keys"
    return {key.strip() for key in match.group(1).split(",")}


class TestHelp:
    @pytest.mark.parametrize("command", sorted(cli.COMMAND_KEYS))
    def test_help_lists_exact_key_set(self, capsys, command):
        text = subcommand_help(capsys, command)
        assert documented_keys(text) == set(cli.COMMAND_KEYS[command])
        assert "writes:" in text

    def test_top_level_help(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            cli.build_parser().parse_args(["--help"])
        assert excinfo.value.code == 0
        out = capsys.readouterr().out
        for command in cli.COMMAND_KEYS:
            assert command in out


class TestDocumentedKeysEqualReadKeys:
    """The spec's integration contract: help text == keys actually read."""

    def invoke_and_read_keys(self, argv):
        holder = []
        code = cli.run(argv, config_out=holder)
        assert code == 0
        return holder[0].read_keys()

    def check(self, capsys, command, argv):
        read = self.invoke_and_read_keys(argv)
        documented = documented_keys(subcommand_help(capsys, command))
        assert read == documented

    def test_extract(self, capsys, tmp_path, alexnet_bundle_dir, small_corpus):
        _, manifest = small_corpus
        self.check(
            capsys,
            "extract",
            [
                "extract", "--bundle", alexnet_bundle_dir,
                "--manifest", manifest, "--out", str(tmp_path),
            ],
        )

    def test_train(self, capsys, tmp_path, features_file):
        self.check(
            capsys,
            "train",
            ["train", "--features", features_file, "--out", str(tmp_path)],
        )

    def test_tune(self, capsys, tmp_path, features_file):
        self.check(
            capsys,
            "tune",
            [
                "tune", "--features", features_file, "--out", str(tmp_path),
                "--tuner.budget", "3", "--tuner.folds", "2",
            ],
        )

    def test_predict(self, capsys, tmp_path, features_file, model_file):
        self.check(
            capsys,
            "predict",
            [
                "predict", "--features", features_file,
                "--model", model_file, "--out", str(tmp_path),
            ],
        )

    def test_evaluate(self, capsys, tmp_path):
        predictions = tmp_path / "predictions.csv"
        write_paper_predictions(str(predictions))
        self.check(
            capsys,
            "evaluate",
            ["evaluate", "--predictions", str(predictions), "--out", str(tmp_path)],
        )

    def test_learning_curve(self, capsys, tmp_path, curve_corpus):
        _, manifest = curve_corpus
        self.check(
            capsys,
            "learning-curve",
            [
                "learning-curve", "--manifest", manifest, "--out", str(tmp_path),
                "--curve.methods", "raw_svm", "--curve.fractions", "0.5,1.0",
            ],
        )

    def test_baseline(self, capsys, tmp_path, curve_corpus):
        _, manifest = curve_corpus
        self.check(
            capsys,
            "baseline",
            ["baseline", "rawsvm", "--manifest", manifest, "--out", str(tmp_path)],
        )

    def test_visualize(self, capsys, tmp_path, alexnet_bundle_dir):
        self.check(
            capsys,
            "visualize",
            ["visualize", "--bundle", alexnet_bundle_dir, "--out", str(tmp_path)],
        )


class TestEvaluateCommand:
    def test_paper_matrix_stdout(self, capsys, tmp_path):
        predictions = tmp_path / "predictions.csv"
        write_paper_predictions(str(predictions))
        code = cli.main(
            ["evaluate", "--predictions", str(predictions), "--out", str(tmp_path)]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "accuracy 0.9952 (418/420)" in out

    def test_artifacts_written(self, tmp_path):
        predictions = tmp_path / "predictions.csv"
        write_paper_predictions(str(predictions))
        cli.main(["evaluate", "--predictions", str(predictions), "--out", str(tmp_path)])
        svg = (tmp_path / cli.CONFUSION_SVG).read_text()
        for needle in ("49.5%", "0.5%", "50.0%", "99.5%"):
            assert needle in svg
        lines = (tmp_path / cli.CONFUSION_CSV).read_text().splitlines()
        assert lines[0] == "actual,predicted,count"
        assert len(lines) == 5


class TestExitCodes:
    def test_config_error_is_2(self, tmp_path):
        assert cli.main(["visualize", "--out", str(tmp_path)]) == 2

    def test_bad_config_file_is_2(self, tmp_path):
        config = tmp_path / "cfg.json"
        config.write_text("{broken")
        assert cli.main(["evaluate", "--config", str(config)]) == 2

    def test_data_error_is_3(self, tmp_path):
        argv = ["evaluate", "--predictions", str(tmp_path / "nope.csv"), "--out", str(tmp_path)]
        assert cli.main(argv) == 3

    def test_missing_bundle_is_4_and_names_manifest(self, capsys, tmp_path, small_corpus):
        _, manifest = small_corpus
        missing = str(tmp_path / "nobundle")
        code = cli.main(
            ["extract", "--bundle", missing, "--manifest", manifest, "--out", str(tmp_path)]
        )
        assert code == 4
        assert "manifest.json" in capsys.readouterr().err

    def test_corrupt_model_is_4(self, tmp_path, features_file):
        model = tmp_path / "model.json"
        model.write_text("{}")
        argv = ["predict", "--features", features_file, "--model", str(model), "--out", str(tmp_path)]
        assert cli.main(argv) == 4

    def test_internal_error_is_1(self, monkeypatch, tmp_path):
        def boom(args, config):
            raise RuntimeError("wat")

        monkeypatch.setitem(cli.COMMANDS, "evaluate", boom)
        assert cli.main(["evaluate", "--out", str(tmp_path)]) == 1

    def test_wrong_dimension_is_3_and_names_dimension(
        self, capsys, tmp_path, model_file
    ):
        wide = tmp_path / "wide.csv"
        write_separable_features(str(wide), per_class=2, width=9)
        code = cli.main(
            ["predict", "--features", str(wide), "--model", model_file, "--out", str(tmp_path)]
        )
        assert code == 3
        err = capsys.readouterr().err
        assert "expected 6" in err and "found 9" in err


class TestExtractCommand:
    def test_writes_features(self, capsys, tmp_path, alexnet_bundle_dir, small_corpus):
        _, manifest = small_corpus
        code = cli.main(
            ["extract", "--bundle", alexnet_bundle_dir, "--manifest", manifest,
             "--out", str(tmp_path)]
        )
        assert code == 0
        captured = capsys.readouterr()
        assert "extracted 8 feature vectors" in captured.out
        assert "[1/8]" in captured.err
        lines = (tmp_path / cli.FEATURES_FILE).read_text().splitlines()
        assert len(lines) == 9
        assert lines[0].endswith(",f4095")

    def test_skip_bad_downgrades(self, capsys, tmp_path, alexnet_bundle_dir):
        corpus = tmp_path / "corpus"
        corpus.mkdir()
        manifest = write_images_and_manifest(str(corpus), 1, 1)
        (corpus / "broken.png").write_bytes(b"not an image")
        with open(manifest, "a") as handle:
            handle.write("broken.png,hookah,train\n")
        out_strict = tmp_path / "strict"
        code = cli.main(
            ["extract", "--bundle", alexnet_bundle_dir, "--manifest", manifest,
             "--out", str(out_strict)]
        )
        assert code == 3
        capsys.readouterr()
        out_skip = tmp_path / "skip"
        code = cli.main(
            ["extract", "--bundle", alexnet_bundle_dir, "--manifest", manifest,
             "--out", str(out_skip), "--skip_bad", "true"]
        )
        assert code == 0
        captured = capsys.readouterr()
        assert "skipping unreadable image" in captured.err
        assert "extracted 4 feature vectors" in captured.out

    def test_rerun_byte_identical(self, tmp_path, alexnet_bundle_dir, small_corpus):
        _, manifest = small_corpus
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            code = cli.main(
                ["extract", "--bundle", alexnet_bundle_dir, "--manifest", manifest,
                 "--out", str(out), "--threads", "1"]
            )
            assert code == 0
            outs.append((out / cli.FEATURES_FILE).read_bytes())
        assert outs[0] == outs[1]


class TestTrainPredictTune:
    def test_train_writes_loadable_model(self, capsys, tmp_path, features_file):
        code = cli.main(["train", "--features", features_file, "--out", str(tmp_path)])
        assert code == 0
        assert "support vectors" in capsys.readouterr().out
        model = deserialize((tmp_path / cli.MODEL_FILE).read_bytes())
        assert set(model.class_map.values()) == set(CLASSES)

    def test_predict_then_evaluate(self, capsys, tmp_path, features_file, model_file):
        code = cli.main(
            ["predict", "--features", features_file, "--model", model_file,
             "--out", str(tmp_path)]
        )
        assert code == 0
        lines = (tmp_path / cli.PREDICTIONS_FILE).read_text().splitlines()
        assert lines[0] == "image_id,label,predicted"
        assert len(lines) == 13
        code = cli.main(["evaluate", "--out", str(tmp_path)])
        assert code == 0
        assert "accuracy 1.0000 (12/12)" in capsys.readouterr().out

    def test_tune_writes_trace_and_model(self, tmp_path, features_file):
        code = cli.main(
            ["tune", "--features", features_file, "--out", str(tmp_path),
             "--tuner.budget", "4", "--tuner.folds", "2"]
        )
        assert code == 0
        lines = (tmp_path / cli.TRACE_FILE).read_text().splitlines()
        assert lines[0] == "eval_index,C,gamma,kernel,objective,incumbent"
        assert len(lines) == 5
        deserialize((tmp_path / cli.MODEL_FILE).read_bytes())

    def test_rbf_kernel_flag(self, tmp_path, features_file):
        code = cli.main(
            ["train", "--features", features_file, "--out", str(tmp_path),
             "--svm.kernel", "rbf", "--svm.gamma", "0.5"]
        )
        assert code == 0
        model = deserialize((tmp_path / cli.MODEL_FILE).read_bytes())
        assert model.kernel.kind == "rbf"

    def test_config_file_drives_training(self, tmp_path, features_file):
        config = tmp_path / "cfg.json"
        config.write_text(json.dumps({"svm": {"C": 2.5}, "out": str(tmp_path)}))
        code = cli.main(["train", "--config", str(config), "--features", features_file])
        assert code == 0
        model = deserialize((tmp_path / cli.MODEL_FILE).read_bytes())
        assert model.training_meta.get("C") == 2.5


class TestLearningCurveCommand:
    def test_default_fractions_give_ten_rows(self, tmp_path, curve_corpus):
        _, manifest = curve_corpus
        code = cli.main(
            ["learning-curve", "--manifest", manifest, "--out", str(tmp_path),
             "--curve.methods", "raw_svm"]
        )
        assert code == 0
        rows = (tmp_path / cli.CURVE_CSV).read_text().splitlines()
        assert rows[0] == "method,fraction,n_images,n_features,accuracy,seed"
        assert len(rows) == 11
        svg = (tmp_path / cli.CURVE_SVG).read_text()
        assert svg.count("<polyline") == 1

    def test_two_methods_two_series(self, tmp_path, curve_corpus):
        _, manifest = curve_corpus
        code = cli.main(
            ["learning-curve", "--manifest", manifest, "--out", str(tmp_path),
             "--curve.methods", "raw_svm,bof", "--curve.fractions", "0.5,1.0",
             "--bof.k", "8", "--bof.kmeans_iters", "5"]
        )
        assert code == 0
        rows = (tmp_path / cli.CURVE_CSV).read_text().splitlines()[1:]
        assert sum(row.startswith("raw_svm,") for row in rows) == 2
        assert sum(row.startswith("bof,") for row in rows) == 2
        assert (tmp_path / cli.CURVE_SVG).read_text().count("<polyline") == 2

    def test_unknown_method_is_config_error(self, tmp_path, curve_corpus):
        _, manifest = curve_corpus
        code = cli.main(
            ["learning-curve", "--manifest", manifest, "--out", str(tmp_path),
             "--curve.methods", "zebra"]
        )
        assert code == 2

    def test_rerun_byte_identical(self, tmp_path, curve_corpus):
        _, manifest = curve_corpus
        payloads = []
        for name in ("a", "b"):
            out = tmp_path / name
            code = cli.main(
                ["learning-curve", "--manifest", manifest, "--out", str(out),
                 "--curve.methods", "raw_svm", "--curve.fractions", "0.5,1.0",
                 "--threads", "1"]
            )
            assert code == 0
            payloads.append(
                (out / cli.CURVE_CSV).read_bytes() + (out / cli.CURVE_SVG).read_bytes()
            )
        assert payloads[0] == payloads[1]


class TestBaselineCommand:
    def test_rawsvm_through_evaluate_path(self, capsys, tmp_path, curve_corpus):
        _, manifest = curve_corpus
        code = cli.main(
            ["baseline", "rawsvm", "--manifest", manifest, "--out", str(tmp_path)]
        )
        assert code == 0
        assert re.search(r"accuracy \d\.\d{4} \(\d+/\d+\)", capsys.readouterr().out)
        assert (tmp_path / cli.CONFUSION_CSV).exists()
        assert (tmp_path / cli.CONFUSION_SVG).exists()

    def test_bof_runs(self, tmp_path, curve_corpus):
        _, manifest = curve_corpus
        code = cli.main(
            ["baseline", "bof", "--manifest", manifest, "--out", str(tmp_path),
             "--bof.k", "8", "--bof.kmeans_iters", "5"]
        )
        assert code == 0

    def test_unknown_baseline_rejected_by_parser(self, capsys, tmp_path):
        with pytest.raises(SystemExit) as excinfo:
            cli.build_parser().parse_args(["baseline", "zebra"])
        assert excinfo.value.code == 2


class TestVisualizeCommand:
    def test_montage_png(self, tmp_path, alexnet_bundle_dir):
        code = cli.main(["visualize", "--bundle", alexnet_bundle_dir, "--out", str(tmp_path)])
        assert code == 0
        raster = decode_image((tmp_path / cli.MONTAGE_FILE).read_bytes())
        assert (raster.width, raster.height) == (143, 95)
