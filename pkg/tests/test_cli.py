"""End-to-end tests for the command line, run in process via main(argv)."""

import json
from pathlib import Path

import numpy as np
import pytest

from sonarprop.cli import main, parse_threshold_grid
from sonarprop.dataset import load_dataset
from sonarprop.evaluate import CURVE_CSV_HEADER, read_curve_csv
from sonarprop.nn import load_checkpoint
from sonarprop.pgm import read_pgm, write_pgm
from sonarprop.proposals import PROPOSAL_CSV_HEADER, read_proposals_csv
from sonarprop.synth import SceneConfig

N_FRAMES = 12
TRAIN_SEED = 3


@pytest.fixture(scope="session")
def scene_json(tmp_path_factory):
    path = tmp_path_factory.mktemp("scene") / "scene.json"
    cfg = SceneConfig(count_min=1, count_max=1, seed=5)
    path.write_text(cfg.to_json() + "\n")
    return path


@pytest.fixture(scope="session")
def dataset_dir(tmp_path_factory, scene_json):
    out = tmp_path_factory.mktemp("data") / "ds"
    rc = main(["synth", "--config", str(scene_json), "--frames", str(N_FRAMES), "--out", str(out)])
    assert rc == 0
    return out

@pytest.fixture(scope="session")
def checkpoint(tmp_path_factory, dataset_dir):
    out = tmp_path_factory.mktemp("model") / "net.ckpt"
    rc = main([
        "train", "--dataset", str(dataset_dir), "--out", str(out),
        "--epochs", "1", "--lr", "0.002", "--seed", str(TRAIN_SEED),
    ])
    assert rc == 0
    return out


def dataset_bytes(root: Path) -> dict:
    return {
        p.relative_to(root).as_posix(): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file() and p.name != "manifest.json"
    }


class TestThresholdGridFlag:
    def test_default_grid_is_inclusive(self):
        grid = parse_threshold_grid("0:1:0.05")
        assert len(grid) == 21
        assert grid[0] == 0.0
        assert grid[-1] == 1.0

    def test_small_grid(self):
        assert parse_threshold_grid("0:0.5:0.25") == [0.0, 0.25, 0.5]

    def test_rejects_malformed(self):
        with pytest.raises(ValueError, match="start:stop:step"):
            parse_threshold_grid("0,1,0.05")
        with pytest.raises(ValueError, match="step"):
            parse_threshold_grid("0:1:0")
        with pytest.raises(ValueError, match="stop"):
            parse_threshold_grid("0.6:0.2:0.1")


class TestArgumentErrors:
    def test_no_subcommand_exits_one(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 1

    def test_unknown_flag_exits_one(self):
        with pytest.raises(SystemExit) as exc:
            main(["synth", "--frames", "3", "--out", "x", "--bogus"])
        assert exc.value.code == 1

    def test_image_and_dataset_are_exclusive(self):
        with pytest.raises(SystemExit) as exc:
            main(["propose", "--checkpoint", "c", "--image", "a", "--dataset", "b", "--out", "o"])
        assert exc.value.code == 1

    def test_version_exits_zero(self):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0


class TestSynth:
    def test_dataset_layout(self, dataset_dir):
        assert (dataset_dir / "dataset.json").is_file()
        assert (dataset_dir / "scene_config.json").is_file()
        assert (dataset_dir / "manifest.json").is_file()
        frames = load_dataset(dataset_dir)
        assert len(frames) == N_FRAMES
        assert all(len(f.boxes) == 1 for f in frames)

    def test_manifest_contents(self, dataset_dir):
        doc = json.loads((dataset_dir / "manifest.json").read_text())
        assert doc["subcommand"] == "synth"
        assert doc["config"]["frames"] == N_FRAMES
        assert doc["seeds"] == {"scene": 5}
        assert "tool_version" in doc and "wall_seconds" in doc

    def test_rerun_is_byte_identical(self, tmp_path, scene_json, dataset_dir):
        again = tmp_path / "ds2"
        rc = main(["synth", "--config", str(scene_json), "--frames", str(N_FRAMES), "--out", str(again)])
        assert rc == 0
        assert dataset_bytes(again) == dataset_bytes(dataset_dir)

    def test_threads_do_not_change_output(self, tmp_path, scene_json, dataset_dir):
        threaded = tmp_path / "ds4"
        rc = main([
            "synth", "--config", str(scene_json), "--frames", str(N_FRAMES),
            "--out", str(threaded), "--threads", "4",
        ])
        assert rc == 0
        assert dataset_bytes(threaded) == dataset_bytes(dataset_dir)

    def test_seed_flag_changes_frames(self, tmp_path, scene_json, dataset_dir):
        other = tmp_path / "ds3"
        rc = main([
            "synth", "--config", str(scene_json), "--frames", str(N_FRAMES),
            "--out", str(other), "--seed", "99",
        ])
        assert rc == 0
        assert dataset_bytes(other) != dataset_bytes(dataset_dir)

    def test_missing_config_is_data_error(self, tmp_path, capsys):
        rc = main(["synth", "--config", str(tmp_path / "absent.json"), "--frames", "2", "--out", str(tmp_path / "o")])
        assert rc == 2
        assert "absent.json" in capsys.readouterr().err


class TestTrain:
    def test_checkpoint_loads_and_outputs_exist(self, checkpoint):
        net, meta = load_checkpoint(checkpoint)
        assert meta["epochs_run"] == 1
        losses = (checkpoint.parent / (checkpoint.name + ".losses.csv")).read_text().splitlines()
        assert losses[0] == "epoch trainLoss valLoss"
        assert len(losses) == 2
        manifest = json.loads((checkpoint.parent / (checkpoint.name + ".manifest.json")).read_text())
        assert manifest["subcommand"] == "train"
        assert manifest["config"]["lr"] == 0.002
        assert manifest["seeds"] == {"train": TRAIN_SEED}
        split = manifest["outputs"]["split"]
        assert len(split["train"]) + len(split["val"]) + len(split["test"]) == N_FRAMES

    def test_same_seed_gives_identical_checkpoint(self, tmp_path, dataset_dir, checkpoint):
        again = tmp_path / "net2.ckpt"
        rc = main([
            "train", "--dataset", str(dataset_dir), "--out", str(again),
            "--epochs", "1", "--lr", "0.002", "--seed", str(TRAIN_SEED),
        ])
        assert rc == 0
        assert again.read_bytes() == checkpoint.read_bytes()

    def test_missing_dataset_is_data_error(self, tmp_path, capsys):
        rc = main(["train", "--dataset", str(tmp_path / "nope"), "--out", str(tmp_path / "n.ckpt")])
        assert rc == 2
        assert "dataset" in capsys.readouterr().err

    def test_bad_batch_size_is_usage_error(self, dataset_dir, tmp_path):
        rc = main([
            "train", "--dataset", str(dataset_dir), "--out", str(tmp_path / "n.ckpt"),
            "--batch", "0",
        ])
        assert rc == 1


class TestPropose:
    def test_threshold_one_writes_header_only(self, checkpoint, dataset_dir, tmp_path):
        out = tmp_path / "none.csv"
        rc = main([
            "propose", "--checkpoint", str(checkpoint), "--dataset", str(dataset_dir),
            "--out", str(out), "--threshold", "1.0",
        ])
        assert rc == 0
        assert out.read_text() == PROPOSAL_CSV_HEADER + "\n"

    def test_zero_threshold_covers_every_window(self, checkpoint, dataset_dir, tmp_path):
        out = tmp_path / "all.csv"
        rc = main([
            "propose", "--checkpoint", str(checkpoint), "--dataset", str(dataset_dir),
            "--out", str(out), "--threshold", "0.0",
        ])
        assert rc == 0
        rows = read_proposals_csv(out)
        assert len(rows) > 0
        assert {fid for fid, _ in rows} == {f.frame_id for f in load_dataset(dataset_dir)}

    def test_single_image_with_overlay(self, checkpoint, dataset_dir, tmp_path):
        image = next((dataset_dir / "images").glob("*.pgm"))
        out = tmp_path / "one.csv"
        overlay = tmp_path / "overlay.pgm"
        rc = main([
            "propose", "--checkpoint", str(checkpoint), "--image", str(image),
            "--out", str(out), "--threshold", "0.0", "--nms", "--overlay", str(overlay),
        ])
        assert rc == 0
        rows = read_proposals_csv(out)
        assert all(fid == image.stem for fid, _ in rows)
        assert read_pgm(overlay).shape == read_pgm(image).shape

    def test_garbage_checkpoint_is_data_error(self, dataset_dir, tmp_path, capsys):
        bad = tmp_path / "bad.ckpt"
        bad.write_bytes(b"not a checkpoint")
        rc = main([
            "propose", "--checkpoint", str(bad), "--dataset", str(dataset_dir),
            "--out", str(tmp_path / "x.csv"),
        ])
        assert rc == 2
        assert capsys.readouterr().err != ""


class TestHeatmap:
    def test_dims_border_and_determinism(self, checkpoint, dataset_dir, tmp_path):
        image = next((dataset_dir / "images").glob("*.pgm"))
        out_a = tmp_path / "a.pgm"
        out_b = tmp_path / "b.pgm"
        for out in (out_a, out_b):
            rc = main(["heatmap", "--checkpoint", str(checkpoint), "--image", str(image), "--out", str(out)])
            assert rc == 0
        hm = read_pgm(out_a)
        assert hm.shape == read_pgm(image).shape
        # window centers start 48 px in, so the outer 44 px are never painted
        assert np.all(hm[:44, :] == 255)
        assert np.all(hm[:, :44] == 255)
        assert out_a.read_bytes() == out_b.read_bytes()

    def test_too_small_image_is_data_error(self, checkpoint, tmp_path):
        small = tmp_path / "small.pgm"
        write_pgm(small, np.zeros((32, 32), dtype=np.uint8))
        rc = main(["heatmap", "--checkpoint", str(checkpoint), "--image", str(small), "--out", str(tmp_path / "h.pgm")])
        assert rc == 2


class TestEval:
    def run_eval(self, checkpoint, dataset_dir, out, extra=()):
        return main([
            "eval", "--checkpoint", str(checkpoint), "--dataset", str(dataset_dir),
            "--out", str(out), "--seed", str(TRAIN_SEED),
            "--thresholds", "0:1:0.25", *extra,
        ])

    def test_outputs_and_summary(self, checkpoint, dataset_dir, tmp_path):
        out = tmp_path / "eval"
        assert self.run_eval(checkpoint, dataset_dir, out) == 0
        for name in ("curve_learned.csv", "curve_learned_nms.csv", "curve_baseline.csv"):
            records = read_curve_csv(out / name)
            assert len(records) == 5
            raw = (out / name).read_bytes()
            assert raw.startswith(CURVE_CSV_HEADER.encode() + b"\n")
        summary = json.loads((out / "summary.json").read_text())
        assert summary["split"] == "test"
        assert summary["n_frames"] == 4
        assert summary["n_objects"] == 4
        assert len(summary["checkpoint_sha256"]) == 64
        assert set(summary["curves"]) == {"learned", "learned_nms", "baseline"}
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["outputs"]["scoring_seconds_per_frame"] > 0

    def test_baseline_none_skips_the_reference_curve(self, checkpoint, dataset_dir, tmp_path):
        out = tmp_path / "eval_nb"
        assert self.run_eval(checkpoint, dataset_dir, out, ("--baseline", "none")) == 0
        assert not (out / "curve_baseline.csv").exists()
        summary = json.loads((out / "summary.json").read_text())
        assert set(summary["curves"]) == {"learned", "learned_nms"}

    def test_threads_do_not_change_curves(self, checkpoint, dataset_dir, tmp_path):
        out1 = tmp_path / "t1"
        out4 = tmp_path / "t4"
        assert self.run_eval(checkpoint, dataset_dir, out1, ("--threads", "1")) == 0
        assert self.run_eval(checkpoint, dataset_dir, out4, ("--threads", "4")) == 0
        for name in ("curve_learned.csv", "curve_learned_nms.csv", "curve_baseline.csv"):
            assert (out1 / name).read_bytes() == (out4 / name).read_bytes()

    def test_split_all_uses_every_frame(self, checkpoint, dataset_dir, tmp_path):
        out = tmp_path / "eval_all"
        assert self.run_eval(checkpoint, dataset_dir, out, ("--split", "all")) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["n_frames"] == N_FRAMES

    def test_bad_threshold_grid_is_usage_error(self, checkpoint, dataset_dir, tmp_path, capsys):
        rc = main([
            "eval", "--checkpoint", str(checkpoint), "--dataset", str(dataset_dir),
            "--out", str(tmp_path / "e"), "--thresholds", "1:0:0.1",
        ])
        assert rc == 1
        assert "usage error" in capsys.readouterr().err
