import json

import numpy as np
import pytest

from protomm.cli import main
from protomm.config import (
    ConfigError,
    DATA_ROOT_ENV,
    load_config,
    resolve_config,
    save_resolved,
)


class TestConfig:
    def test_defaults_resolve(self):
        cfg = resolve_config()
        assert cfg["training"]["learning_rate"] == 1e-5
        assert cfg["loss"]["alpha"] == 0.5
        assert cfg["prototypes"]["count"] == 512
        assert cfg.origins["training.learning_rate"] == "paper"
        assert cfg.origins["prototypes.count"] == "default"

    def test_user_override_flagged(self):
        cfg = resolve_config({"loss": {"alpha": 0.3}})
        assert cfg["loss"]["alpha"] == 0.3
        assert cfg.origins["loss.alpha"] == "user"

    def test_alpha_out_of_range_cites_path(self):
        with pytest.raises(ConfigError, match="loss.alpha"):
            resolve_config({"loss": {"alpha": 1.5}})

    def test_unknown_key_rejected_with_path(self):
        with pytest.raises(ConfigError, match="training.warmup"):
            resolve_config({"training": {"warmup": 5}})
        with pytest.raises(ConfigError, match="optimizer"):
            resolve_config({"optimizer": {}})

    def test_type_violation_cites_path(self):
        with pytest.raises(ConfigError, match="training.batch_size"):
            resolve_config({"training": {"batch_size": "big"}})

    def test_env_data_root(self, monkeypatch):
        monkeypatch.setenv(DATA_ROOT_ENV, "/data/somewhere")
        assert resolve_config()["data"]["root"] == "/data/somewhere"
        assert resolve_config({"data": {"root": "/x"}})["data"]["root"] == "/x"

    def test_load_and_save_roundtrip(self, tmp_path):
        with open(tmp_path / "c.json", "w") as f:
            json.dump({"training": {"seed": 7}}, f)
        cfg = load_config(tmp_path / "c.json")
        assert cfg["training"]["seed"] == 7
        path = save_resolved(cfg, tmp_path / "run")
        saved = json.loads(path.read_text())
        assert saved["config"]["training"]["seed"] == 7
        assert saved["origins"]["training.seed"] == "user"


@pytest.fixture
def tiny_config(tmp_path):
    cfg = {
        "data": {"synthetic": {"n_subjects": 3, "duration_s": 48.0}},
        "encoder": {"embed_dim": 16, "base_width": 4},
        "prototypes": {"count": 8},
        "training": {"learning_rate": 1e-3, "batch_size": 8, "max_epochs": 2,
                     "val_fraction": 0.34},
        "evaluation": {"folds": 2},
        "interpret": {"k": 3},
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


class TestCli:
    def test_invalid_alpha_exit_code_and_message(self, tmp_path, capsys, caplog):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"loss": {"alpha": 1.5}}))
        rc = main(["synth", "--config", str(bad), "--out", str(tmp_path / "o")])
        assert rc == 2
        assert "loss.alpha" in caplog.text

    def test_missing_manifest_nonzero(self, tmp_path):
        rc = main(["pretrain", "--data", str(tmp_path / "nope"), "--out", str(tmp_path / "r")])
        assert rc != 0

    def test_full_pipeline(self, tiny_config, tmp_path):
        data = tmp_path / "data"
        assert main(["synth", "--config", str(tiny_config), "--out", str(data)]) == 0
        assert (data / "manifest.json").exists()
        assert (data / "resolved_config.json").exists()

        run = tmp_path / "run"
        assert main(["pretrain", "--config", str(tiny_config),
                     "--data", str(data), "--out", str(run)]) == 0
        assert (run / "metrics.jsonl").exists()
        best = json.loads((run / "best.json").read_text())
        ckpt = best["archive"]

        report = tmp_path / "report.json"
        assert main(["probe", "--config", str(tiny_config), "--data", str(data),
                     "--checkpoint", ckpt, "--composition", "P+A",
                     "--out", str(report)]) == 0
        rep = json.loads(report.read_text())
        assert rep["composition"] == "concat_PA"
        assert 0.0 <= rep["metrics"]["macro_f1"] <= 1.0

        interp = tmp_path / "interp"
        assert main(["interpret", "--config", str(tiny_config), "--data", str(data),
                     "--checkpoint", ckpt, "--out", str(interp)]) == 0
        for name in ("coords.csv", "neighbors.json", "consistency.json"):
            assert (interp / name).exists()

    def test_pretrain_determinism(self, tiny_config, tmp_path):
        data = tmp_path / "data"
        main(["synth", "--config", str(tiny_config), "--out", str(data)])
        vals = []
        for name in ("r1", "r2"):
            run = tmp_path / name
            assert main(["pretrain", "--config", str(tiny_config),
                         "--data", str(data), "--out", str(run)]) == 0
            lines = (run / "metrics.jsonl").read_text().splitlines()
            vals.append(json.loads(lines[-1])["val_loss"])
        assert vals[0] == vals[1]

    def test_seed_flag_overrides(self, tiny_config, tmp_path):
        data = tmp_path / "data"
        main(["synth", "--config", str(tiny_config), "--out", str(data)])
        resolved = json.loads((data / "resolved_config.json").read_text())
        assert resolved["origins"]["data.synthetic.n_subjects"] == "user"
        data2 = tmp_path / "data2"
        main(["synth", "--config", str(tiny_config), "--seed", "9", "--out", str(data2)])
        r2 = json.loads((data2 / "resolved_config.json").read_text())
        assert r2["config"]["data"]["synthetic"]["seed"] == 9
