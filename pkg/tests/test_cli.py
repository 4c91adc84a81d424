"""Tests for the command-line interface."""

import json
from collections.abc import Iterator
from pathlib import Path

import pytest

from anchor_scene.cli import create_parser, main
from anchor_scene.config import reset_config
from anchor_scene.infrastructure.scene_repository import NdjsonSceneRepository
from anchor_scene.services.evaluation_service import read_reports

from tests.conftest import TINY_CODEC, TINY_GENERATOR


@pytest.fixture(autouse=True)
def fresh_app_config() -> Iterator[None]:
    """Each test reads the environment anew."""
    reset_config()
    yield
    reset_config()


@pytest.fixture
def config_file(tmp_path: Path) -> Path:
    """Run configuration with a coarse floor grid, tiny models and a low occupancy threshold."""
    path = tmp_path / "run.json"
    document = {
        "scene": {"grid": 32, "min_objects": 2, "max_objects": 4},
        "codec": TINY_CODEC,
        "generator": TINY_GENERATOR,
        "training": {"batch_size": 2, "epochs": 1},
        "evaluation": {
            "n_scenes": 2,
            "grid_resolution": 8,
            "threshold": 0.001,
            "diversity_runs": 2,
            "diversity_masks": 1,
        },
    }
    path.write_text(json.dumps(document), encoding="utf-8")
    return path


class TestParser:
    """Argument parsing."""

    def test_gen_data(self) -> None:
        """Defaults apply to omitted options."""
        args = create_parser().parse_args(["gen-data", "--out", "scenes.ndjson"])
        assert args.command == "gen-data"
        assert args.count == 100
        assert args.seed == 0
        assert not args.force

    def test_generate_needs_a_mask(self) -> None:
        """Exactly one mask source is required."""
        with pytest.raises(SystemExit):
            create_parser().parse_args(["generate", "--model", "m", "--out", "s.json"])

    def test_no_command(self, capsys: pytest.CaptureFixture[str]) -> None:
        """Without a command the help is printed."""
        assert main([]) == 1
        assert "gen-data" in capsys.readouterr().out


class TestCommands:
    """Commands on small inputs."""

    def test_gen_data(self, tmp_path: Path, config_file: Path) -> None:
        """A corpus and its sidecar are written; reruns need --force."""
        out = tmp_path / "data" / "scenes.ndjson"
        args = ["gen-data", "--config", str(config_file), "--out", str(out), "--count", "2", "--seed", "3"]
        assert main(args) == 0
        repository = NdjsonSceneRepository(out)
        assert len(repository.load_all()) == 2
        assert repository.sidecar()["seed"] == 3
        assert main(args) == 2
        assert main([*args, "--force"]) == 0

    def test_bad_config(self, tmp_path: Path) -> None:
        """An unreadable configuration exits with the config error code."""
        out = tmp_path / "scenes.ndjson"
        assert main(["gen-data", "--config", str(tmp_path / "missing.json"), "--out", str(out)]) == 2

    def test_eval_on_corpus(self, tmp_path: Path, config_file: Path) -> None:
        """Corpus metrics are written one per line; unknown metrics are refused."""
        data = tmp_path / "scenes.ndjson"
        assert main(["gen-data", "--config", str(config_file), "--out", str(data), "--count", "2"]) == 0
        report = tmp_path / "metrics.jsonl"
        common = ["eval", "--config", str(config_file), "--data", str(data), "--on-corpus", "--out", str(report)]
        assert main([*common, "--metrics", "collision,ckl"]) == 0
        collision, ckl = read_reports(report)
        assert collision["metric"] == "collision"
        assert collision["value"] == 0.0
        assert ckl["value"] == pytest.approx(0.0, abs=1e-12)
        assert main([*common, "--metrics", "volume", "--force"]) == 3

    def test_eval_needs_model(self, tmp_path: Path, config_file: Path) -> None:
        """Generated-scene evaluation requires a generator."""
        data = tmp_path / "scenes.ndjson"
        main(["gen-data", "--config", str(config_file), "--out", str(data), "--count", "1"])
        args = ["eval", "--config", str(config_file), "--data", str(data), "--out", str(tmp_path / "m.jsonl")]
        assert main(args) == 3

    def test_checkpoints_default_to_home(
        self, tmp_path: Path, config_file: Path, monkeypatch: pytest.MonkeyPatch, caplog: pytest.LogCaptureFixture
    ) -> None:
        """Without --model the generator is looked up under RD_HOME."""
        monkeypatch.setenv("RD_HOME", str(tmp_path / "home"))
        data = tmp_path / "scenes.ndjson"
        assert main(["gen-data", "--config", str(config_file), "--out", str(data), "--count", "1"]) == 0
        args = ["generate", "--config", str(config_file), "--mask-from-scene", str(data)]
        args += ["--out", str(tmp_path / "s.json")]
        assert main(args) == 3
        assert str(tmp_path / "home" / "generator") in caplog.text


@pytest.mark.slow
class TestPipeline:
    """Corpus to codec to generator to scenes and metrics."""

    def test_full_pipeline(self, tmp_path: Path, config_file: Path) -> None:
        """Every stage runs on the tiny configuration and leaves its artifacts."""
        config = ["--config", str(config_file)]
        raw, encoded = tmp_path / "raw.ndjson", tmp_path / "encoded.ndjson"
        codec, generator = tmp_path / "codec", tmp_path / "generator"

        assert main(["gen-data", *config, "--out", str(raw), "--count", "3"]) == 0
        assert main(["train-codec", *config, "--data", str(raw), "--out", str(codec)]) == 0
        assert (codec / "codec.rdck").exists()
        assert (codec / "loss.csv").exists()
        assert main(["gen-data", *config, "--out", str(encoded), "--count", "3", "--codec", str(codec)]) == 0
        assert all(f.shape is not None for s in NdjsonSceneRepository(encoded) for f in s.furniture)

        scene_args = ["train-scene", *config, "--data", str(encoded), "--codec", str(codec), "--out", str(generator)]
        assert main(scene_args) == 0
        assert main(["train-scene", *config, "--data", str(raw), "--codec", str(codec), "--out", str(generator)]) == 3

        out = tmp_path / "scene.json"
        generate = ["generate", *config, "--model", str(generator), "--mask-from-scene", str(encoded)]
        generate += ["--out", str(out)]
        assert main(generate) == 0
        assert out.exists()
        assert main(generate) == 2

        correct = ["correct", *config, "--model", str(generator), "--scene", str(encoded), "--out"]
        assert main([*correct, str(tmp_path / "corrected.json"), "--threshold-pct", "50"]) == 0

        report = tmp_path / "metrics.jsonl"
        evaluate = ["eval", *config, "--model", str(generator), "--codec", str(codec), "--data", str(encoded)]
        assert main([*evaluate, "--metrics", "collision,ckl,inside,diversity", "--out", str(report)]) == 0
        assert [r["metric"] for r in read_reports(report)] == ["collision", "ckl", "inside", "diversity"]

        edit = ["edit", *config, "--codec", str(codec), "--shape-a", "chair:1", "--shape-b", "table:2"]
        assert main([*edit, "--region", "-1,0,-1,1,1,1", "--out", str(tmp_path / "edit")]) == 0
        assert (tmp_path / "edit" / "mixed.obj").exists()
