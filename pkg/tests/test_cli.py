"""
End-to-end CLI tests through viraliency.main.main.
"""
import csv
import json
from pathlib import Path

import pytest

from viraliency.main import main
from viraliency.services.checkpoint import load_checkpoint

CONFIGS_DIR = Path(__file__).resolve().parents[1] / "configs"

SYNTH_FLAGS = [
    "--image_height", "16", "--image_width", "16", "--num_images", "30",
    "--blob_radius_min", "2", "--blob_radius_max", "3",
    "--train_pairs", "20", "--test_pairs", "6", "--extremes_k", "8", "--seed", "1",
]


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.reader(f))


def error_line(capsys):
    lines = [line for line in capsys.readouterr().err.splitlines() if line.strip()]
    assert len(lines) == 1
    return lines[0]


@pytest.fixture
def dataset_dir(tmp_path):
    out = tmp_path / "data"
    assert main(["synth", "--out", str(out)] + SYNTH_FLAGS) == 0
    return out


@pytest.fixture
def run_config(tmp_path, dataset_dir):
    config = {
        "model": {
            "input_channels": 3,
            "input_height": 16,
            "input_width": 16,
            "conv_layers": [
                {"out_channels": 4, "kernel": 3, "stride": 2, "padding": 1},
                {"out_channels": 5, "kernel": 3, "stride": 1, "padding": 1},
            ],
            "eta_init": 0.5,
        },
        "train": {"base_lr": 0.01, "max_iters": 6, "batch_size": 4, "eta_snapshot_every": 3, "grad_chunks": 2},
        "paths": {"dataset_dir": str(dataset_dir), "output_dir": str(tmp_path / "run")},
        "threads": 1,
    }
    path = tmp_path / "run.json"
    path.write_text(json.dumps(config), encoding="utf-8")
    return path


@pytest.fixture
def trained(run_config):
    assert main(["train", "--config", str(run_config)]) == 0
    return run_config.parent / "run"


class TestSynth:

    def test_layout(self, dataset_dir):
        assert len(list((dataset_dir / "images").glob("*.png"))) == 30
        assert read_csv(dataset_dir / "pairs_train.csv")[0] == ["id_a", "id_b", "label"]
        assert len(read_csv(dataset_dir / "pairs_test.csv")) == 7

    def test_invalid_flag_value(self, tmp_path, capsys):
        assert main(["synth", "--out", str(tmp_path / "x"), "--num_images", "1"]) == 2
        assert error_line(capsys).startswith("error code=CONFIG_ERROR")


class TestTrain:

    def test_artifacts(self, trained):
        assert (trained / "model.lena").is_file()
        loss_rows = read_csv(trained / "loss.csv")
        assert loss_rows[0] == ["iteration", "lr", "loss"]
        assert len(loss_rows) == 7
        eta_rows = read_csv(trained / "eta.csv")
        assert [row[0] for row in eta_rows[1:]] == ["0", "3", "6"]
        resolved = json.loads((trained / "run_config.json").read_text(encoding="utf-8"))
        assert resolved["train"]["max_iters"] == 6

    def test_flag_overrides_config(self, run_config, tmp_path):
        out = tmp_path / "other"
        args = ["train", "--config", str(run_config), "--train.max_iters", "2", "--seed", "4",
                "--paths.output_dir", str(out)]
        assert main(args) == 0
        resolved = json.loads((out / "run_config.json").read_text(encoding="utf-8"))
        assert resolved["train"]["max_iters"] == 2
        assert resolved["train"]["seed"] == 4

    def test_same_seed_same_checkpoint(self, run_config, tmp_path):
        outputs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert main(["train", "--config", str(run_config), "--paths.output_dir", str(out)]) == 0
            outputs.append((out / "model.lena").read_bytes())
        assert outputs[0] == outputs[1]

    def test_unknown_config_key(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"train": {"bogus": 1}}), encoding="utf-8")
        assert main(["train", "--config", str(path)]) == 2
        assert error_line(capsys).startswith("error code=CONFIG_ERROR")


class TestAfterTraining:

    def test_predict(self, trained, dataset_dir, tmp_path):
        out = tmp_path / "pred"
        args = ["predict", "--checkpoint", str(trained / "model.lena"),
                "--pairs", str(dataset_dir / "pairs_test.csv"), "--dataset-dir", str(dataset_dir),
                "--out", str(out)]
        assert main(args) == 0
        predictions = read_csv(out / "predictions.csv")
        assert predictions[0] == ["id_a", "id_b", "label", "logit", "correct"]
        assert len(predictions) == 7
        accuracy = read_csv(out / "accuracy.csv")
        assert accuracy[1][0] == "6"

    def test_map(self, trained, dataset_dir, tmp_path):
        image = sorted((dataset_dir / "images").glob("*.png"))[0]
        out = tmp_path / "maps" / "heat.png"
        args = ["map", "--checkpoint", str(trained / "model.lena"), "--image", str(image),
                "--out", str(out), "--channels", "0,1"]
        assert main(args) == 0
        assert out.is_file()
        assert out.with_suffix(".csv").is_file()
        assert (out.parent / "heat_support_1.png").is_file()

    def test_map_bad_channel(self, trained, dataset_dir, tmp_path, capsys):
        image = sorted((dataset_dir / "images").glob("*.png"))[0]
        args = ["map", "--checkpoint", str(trained / "model.lena"), "--image", str(image),
                "--out", str(tmp_path / "heat.png"), "--channels", "99"]
        assert main(args) == 1
        assert error_line(capsys).startswith("error code=SHAPE_MISMATCH")

    def test_eval_local(self, trained, dataset_dir, tmp_path):
        out = tmp_path / "loc"
        args = ["eval-local", "--checkpoint", str(trained / "model.lena"), "--dataset-dir", str(dataset_dir),
                "--pairs", str(dataset_dir / "pairs_test.csv"), "--top", "3", "--out", str(out)]
        assert main(args) == 0
        rows = read_csv(out / "localization.csv")
        assert len(rows) == 5
        assert rows[-1][0] == "mean"

    def test_eta_hist(self, trained, tmp_path):
        out = tmp_path / "hist.csv"
        assert main(["eta-hist", "--eta-csv", str(trained / "eta.csv"), "--bins", "4", "--out", str(out)]) == 0
        rows = read_csv(out)
        assert rows[0] == ["bin_lo", "bin_hi", "count", "mass"]
        assert sum(int(row[2]) for row in rows[1:]) == 5

    def test_eta_hist_row_out_of_range(self, trained, tmp_path, capsys):
        args = ["eta-hist", "--eta-csv", str(trained / "eta.csv"), "--row", "10", "--out", str(tmp_path / "h.csv")]
        assert main(args) == 2
        assert "out of range" in error_line(capsys)

    def test_checkpoint_loads(self, trained):
        assert load_checkpoint(trained / "model.lena").config.num_channels == 5


class TestGradcheck:

    def test_passes(self, tmp_path):
        out = tmp_path / "gc"
        args = ["gradcheck", "--config", str(CONFIGS_DIR / "gradcheck.json"), "--paths.output_dir", str(out)]
        assert main(args) == 0
        rows = read_csv(out / "gradcheck.csv")
        assert rows[0] == ["group", "size", "max_rel_error", "tolerance", "oracle", "passed"]
        assert rows[-1][0] == "eta"
        assert all(row[5] == "1" for row in rows[1:])

    def test_failure_exit_code(self, tmp_path, capsys):
        args = ["gradcheck", "--config", str(CONFIGS_DIR / "gradcheck.json"),
                "--paths.output_dir", str(tmp_path / "gc"), "--tolerance", "0", "--step", "0.5"]
        assert main(args) == 4
        assert error_line(capsys).startswith("error code=GRADCHECK_FAILED")
        assert (tmp_path / "gc" / "gradcheck.csv").exists()

    @pytest.mark.parametrize("flag", ["--tolerance=-1e-6", "--eta-tolerance=-1", "--step=0"])
    def test_rejects_invalid_thresholds(self, tmp_path, capsys, flag):
        out = tmp_path / "gc"
        args = ["gradcheck", "--config", str(CONFIGS_DIR / "gradcheck.json"), "--paths.output_dir", str(out), flag]
        assert main(args) == 2
        assert error_line(capsys).startswith("error code=CONFIG_ERROR")
        assert not out.exists()


class TestErrors:

    def test_missing_checkpoint(self, tmp_path, capsys):
        args = ["predict", "--checkpoint", str(tmp_path / "none.lena"), "--pairs", "p.csv",
                "--dataset-dir", str(tmp_path), "--out", str(tmp_path / "o")]
        assert main(args) == 2
        assert error_line(capsys).startswith("error code=PARSE_ERROR")

    def test_unknown_command(self, capsys):
        assert main(["frobnicate"]) == 2
        assert error_line(capsys).startswith("error code=CONFIG_ERROR")

    def test_help(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--help"])
        assert exc.value.code == 0
        assert "eta-hist" in capsys.readouterr().out


@pytest.mark.slow
def test_bench(tmp_path):
    out = tmp_path / "bench.csv"
    args = ["bench", "--channels", "4,8", "--size", "7", "--repeats", "2", "--out", str(out)]
    assert main(args) == 0
    rows = read_csv(out)
    assert rows[0] == ["mode", "channels", "height", "width", "repeats", "mean_ms"]
    assert len(rows) == 1 + 2 * 4
