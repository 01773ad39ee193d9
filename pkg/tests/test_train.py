import json

import numpy as np
import pytest

from protomm.data import DatasetManifest, Modality, SyntheticGenConfig, generate_synthetic
from protomm.losses import LossConfig
from protomm.models import (
    MultimodalModel,
    checkpoint_fingerprint,
    load_checkpoint,
    save_checkpoint,
)
from protomm.train import (
    CheckpointRecord,
    TrainConfig,
    evaluate_loss,
    pretrain,
    select_best,
    split_subjects,
)

TINY_ENC = {"embed_dim": 16, "base_width": 4}


def _manifest(n_subjects=3, duration_s=48.0, seed=0):
    return generate_synthetic(
        SyntheticGenConfig(n_subjects=n_subjects, duration_s=duration_s, seed=seed)
    )


def _cfg(**kw):
    base = dict(
        learning_rate=1e-3,
        batch_size=8,
        max_epochs=1,
        seed=0,
        n_prototypes=8,
        encoder=TINY_ENC,
        loss=LossConfig(objective="protomm", alpha=0.5),
    )
    base.update(kw)
    return TrainConfig(**base)


def _only(manifest, mod):
    samples = [
        type(s)({mod: s.windows[mod]}, s.subject_id, s.window_start_s, s.label)
        for s in manifest.samples
    ]
    return DatasetManifest(samples, split=manifest.split, task=manifest.task)


class TestSelectBest:
    def _rec(self, epoch, val):
        return CheckpointRecord(epoch, 0.0, val, None, "f")

    def test_argmin(self):
        recs = [self._rec(i, v) for i, v in enumerate([3.1, 2.7, 2.9])]
        assert select_best(recs).epoch == 1

    def test_tie_earliest(self):
        recs = [self._rec(0, 2.0), self._rec(1, 2.0)]
        assert select_best(recs).epoch == 0

    def test_single(self):
        rec = self._rec(0, 1.0)
        assert select_best([rec]) is rec

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            select_best([])

    def test_nonfinite_val_loss_rejected(self):
        with pytest.raises(ValueError):
            CheckpointRecord(0, 0.0, float("nan"), None, "f")


class TestPretrainContract:
    def test_same_seed_same_epoch0_loss(self):
        tr, va = split_subjects(_manifest(), seed=0)
        r1, _ = pretrain(tr, va, _cfg())
        r2, _ = pretrain(tr, va, _cfg())
        assert r1[0].train_loss == r2[0].train_loss
        assert r1[0].val_loss == r2[0].val_loss

    def test_empty_val_rejected(self):
        tr = _manifest()
        with pytest.raises(ValueError, match="validation"):
            pretrain(tr, DatasetManifest([], split="val"), _cfg())

    def test_less_than_one_batch_rejected(self):
        tr, va = split_subjects(_manifest(), seed=0)
        with pytest.raises(ValueError, match="full batch"):
            pretrain(tr, va, _cfg(batch_size=10_000))

    def test_nonfinite_loss_halts_with_batch_id(self):
        tr, va = split_subjects(_manifest(), seed=0)
        model = MultimodalModel(
            [Modality.PPG, Modality.ACCEL], "protomm", n_prototypes=8,
            encoder_overrides=TINY_ENC,
        )
        model.encoders[Modality.PPG].fc.w.data[...] = np.nan
        with pytest.raises(RuntimeError, match="epoch 0, batch 0"):
            pretrain(tr, va, _cfg(), model=model)

    def test_prototypes_unit_norm_after_steps(self):
        tr, va = split_subjects(_manifest(), seed=0)
        _, model = pretrain(tr, va, _cfg())
        norms = np.linalg.norm(model.bank.matrix.data, axis=0)
        np.testing.assert_allclose(norms, 1.0, atol=1e-5)

    def test_run_dir_artifacts(self, tmp_path):
        tr, va = split_subjects(_manifest(), seed=0)
        recs, _ = pretrain(tr, va, _cfg(max_epochs=2), out_dir=tmp_path / "run")
        lines = (tmp_path / "run" / "metrics.jsonl").read_text().splitlines()
        assert len(lines) == 2
        rec = json.loads(lines[0])
        assert {"epoch", "train_loss", "val_loss", "wall_s"} <= set(rec)
        assert json.loads((tmp_path / "run" / "config.json").read_text())["batch_size"] == 8
        for r in recs:
            assert (tmp_path / "run" / "checkpoints" / f"epoch_{r.epoch:04d}" / "params.npz").exists()

    def test_validation_mutates_nothing(self, tmp_path):
        tr, va = split_subjects(_manifest(), seed=0)
        model = MultimodalModel(
            [Modality.PPG, Modality.ACCEL], "protomm", n_prototypes=8,
            encoder_overrides=TINY_ENC,
        )
        save_checkpoint(model, tmp_path / "c")
        before = checkpoint_fingerprint(tmp_path / "c")
        evaluate_loss(model, va, _cfg())
        save_checkpoint(model, tmp_path / "c")
        assert checkpoint_fingerprint(tmp_path / "c") == before

    def test_step0_protomm_loss_in_uniform_regime_band(self):
        # random init, random data: assignments near uniform over P prototypes.
        # needs full-width (512-d) embeddings — cosine scores concentrate as
        # 1/sqrt(E), which is what makes the assignments near uniform
        tr, va = split_subjects(_manifest(seed=5), seed=0)
        enc = {"embed_dim": 512, "base_width": 4}
        for P in (8, 16):
            model = MultimodalModel(
                [Modality.PPG, Modality.ACCEL], "protomm", n_prototypes=P,
                encoder_overrides=enc,
            )
            loss = evaluate_loss(model, va, _cfg(n_prototypes=P, encoder=enc))
            assert 0.5 * np.log(P) <= loss <= 2.0 * np.log(P)


class TestAlphaOneDecomposition:
    def test_joint_loss_is_mean_of_unimodal_losses_at_shared_params(self):
        # with alpha = 1 the objective splits into independent per-modality
        # swapped-prediction terms; at identical parameters the joint loss
        # equals the average of the two unimodal losses (the 1/(A*M)
        # normalization accounts for the modality count)
        manifest = _manifest(n_subjects=2, duration_s=32.0, seed=7)
        cfg = _cfg(loss=LossConfig(objective="protomm", alpha=1.0))
        joint = MultimodalModel(
            [Modality.PPG, Modality.ACCEL], "protomm", n_prototypes=8,
            encoder_overrides=TINY_ENC, seed=cfg.seed,
        )
        parts = []
        for mod in (Modality.PPG, Modality.ACCEL):
            uni = MultimodalModel(
                [mod], "protomm", n_prototypes=8, encoder_overrides=TINY_ENC, seed=cfg.seed
            )
            parts.append(evaluate_loss(uni, _only(manifest, mod), cfg))
        joint_loss = evaluate_loss(joint, manifest, cfg)
        assert joint_loss == pytest.approx(np.mean(parts), abs=1e-9)


class TestBaselineObjectives:
    @pytest.mark.parametrize("objective", ["simclr", "clip", "slip"])
    def test_one_epoch_runs_and_is_finite(self, objective):
        tr, va = split_subjects(_manifest(n_subjects=2, duration_s=32.0), seed=0)
        cfg = _cfg(batch_size=4, loss=LossConfig(objective=objective))
        recs, model = pretrain(tr, va, cfg)
        assert np.isfinite(recs[0].train_loss) and np.isfinite(recs[0].val_loss)
        if objective in ("clip", "slip"):
            assert model.log_temperature is not None

    def test_clip_needs_two_modalities(self):
        m = _only(_manifest(n_subjects=2, duration_s=32.0), Modality.PPG)
        tr, va = split_subjects(m, seed=0)
        with pytest.raises(ValueError, match="two modalities"):
            pretrain(tr, va, _cfg(batch_size=4, loss=LossConfig(objective="clip")))


class TestCheckpointIO:
    def test_roundtrip_identical_embeddings(self, tmp_path):
        tr, va = split_subjects(_manifest(), seed=0)
        _, model = pretrain(tr, va, _cfg())
        save_checkpoint(model, tmp_path / "c")
        back = load_checkpoint(tmp_path / "c")
        x = np.asarray(
            [s.windows[Modality.PPG].samples.T for s in va.samples[:4]], dtype=np.float32
        )
        np.testing.assert_array_equal(
            model.encoders[Modality.PPG].encode(x), back.encoders[Modality.PPG].encode(x)
        )
        assert back.fingerprint() == model.fingerprint()

    def test_blocks_are_le_float32(self, tmp_path):
        model = MultimodalModel([Modality.PPG], "protomm", n_prototypes=4,
                                encoder_overrides=TINY_ENC)
        save_checkpoint(model, tmp_path / "c")
        with np.load(tmp_path / "c" / "params.npz") as arrays:
            for key in arrays.files:
                assert arrays[key].dtype == np.dtype("<f4")


class TestSplitSubjects:
    def test_subject_disjoint_and_nonempty(self):
        tr, va = split_subjects(_manifest(n_subjects=5), val_fraction=0.2, seed=1)
        assert set(tr.subjects()).isdisjoint(va.subjects())
        assert tr.samples and va.samples

    def test_single_subject_rejected(self):
        with pytest.raises(ValueError):
            split_subjects(_manifest(n_subjects=1))


class TestTrainConfigValidation:
    def test_bad_values_rejected(self):
        with pytest.raises(ValueError):
            TrainConfig(learning_rate=0.0)
        with pytest.raises(ValueError):
            TrainConfig(num_views=1)
        with pytest.raises(ValueError):
            TrainConfig(wall_clock_budget_hours=0.0)


@pytest.mark.slow
class TestLossDescent:
    def test_train_loss_moving_average_non_increasing(self):
        # Ten epochs on an easy synthetic task: the 3-epoch moving average
        # of the training loss must never increase.
        manifest = _manifest(n_subjects=4, duration_s=96.0, seed=3)
        tr, va = split_subjects(manifest, val_fraction=0.25, seed=3)
        cfg = _cfg(
            learning_rate=1e-3,
            batch_size=32,
            max_epochs=10,
            n_prototypes=16,
            encoder={"embed_dim": 64, "base_width": 4},
        )
        records, _ = pretrain(tr, va, cfg)
        losses = np.array([r.train_loss for r in records])
        moving = np.convolve(losses, np.ones(3) / 3, mode="valid")
        assert np.all(np.diff(moving) <= 1e-6), f"moving average not descending: {moving}"
