"""Self-supervised pre-training loop.

Per step: sample a batch, draw A augmented views per modality, encode every
view, evaluate the configured objective, apply one Adam update, and
renormalize the prototype columns.  Losses are computed per batch and
aggregated per epoch; one checkpoint is written per epoch and the one with
the lowest validation loss is selected afterwards.

View randomness is derived per (phase, epoch, sample, modality), so a
modality sees identical views whether it is trained alone or jointly —
which is what makes the alpha = 1 decomposition into independent unimodal
runs exactly testable at shared parameters.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .augment import ViewSamplerConfig, apply, choose_spec
from .data import DatasetManifest, Modality
from .losses import (
    LossConfig,
    clip_loss_with_grad,
    mpp_from_embeddings,
    nt_xent_with_grad,
)
from .models import MultimodalModel, save_checkpoint, _MODALITY_SEED_TAG
from .nn.optim import Adam
from .prototypes import AssignmentConfig

logger = logging.getLogger(__name__)

_TRAIN_PHASE, _VAL_PHASE = 1, 2


@dataclass
class TrainConfig:
    learning_rate: float = 1e-5
    weight_decay: float = 0.0
    batch_size: int = 256
    max_epochs: int = 100
    wall_clock_budget_hours: float = 96.0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    num_views: int = 2
    n_prototypes: int = 512
    freeze_prototype_epochs: int = 0  # off by default
    encoder: dict = field(default_factory=dict)
    loss: LossConfig = field(default_factory=LossConfig)
    assignment: AssignmentConfig = field(default_factory=AssignmentConfig)

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 1 or self.max_epochs < 1:
            raise ValueError("learning_rate, batch_size and max_epochs must be positive")
        if self.wall_clock_budget_hours <= 0:
            raise ValueError("wall_clock_budget_hours must be positive")
        if self.num_views < 2:
            raise ValueError("num_views must be >= 2")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["loss"] = asdict(self.loss)
        d["assignment"] = asdict(self.assignment)
        return d


@dataclass
class CheckpointRecord:
    epoch: int
    train_loss: float
    val_loss: float
    archive_path: str | None
    fingerprint: str

    def __post_init__(self):
        if not np.isfinite(self.val_loss):
            raise ValueError("val_loss must be finite")


def select_best(records) -> CheckpointRecord:
    """Lowest validation loss; ties broken by earliest epoch."""
    records = list(records)
    if not records:
        raise ValueError("no checkpoint records")
    return min(records, key=lambda r: (r.val_loss, r.epoch))


# ---------------------------------------------------------------------------
# view construction
# ---------------------------------------------------------------------------

def _batch_views(samples, indices, modalities, view_cfg, seed, phase, epoch):
    """Stack A augmented views per modality into (B, C, T) arrays keyed by
    (modality, view_index).  Randomness depends only on
    (seed, phase, epoch, sample_index, modality)."""
    views = {}
    for mod in modalities:
        pool = view_cfg.applicable(mod)
        if not pool:
            raise ValueError(f"no applicable augmentations for {mod.value}")
        per_view = [[] for _ in range(view_cfg.num_views_A)]
        for idx in indices:
            rng = np.random.default_rng(
                [seed, phase, epoch, int(idx), _MODALITY_SEED_TAG[mod]]
            )
            window = samples[int(idx)].windows[mod]
            for a in range(view_cfg.num_views_A):
                w = apply(choose_spec(pool, rng), window, rng)
                per_view[a].append(w.samples.T)  # (C, T)
        for a in range(view_cfg.num_views_A):
            views[(mod, a)] = np.ascontiguousarray(np.stack(per_view[a]))
    return views


# ---------------------------------------------------------------------------
# objectives: loss + backward through encoders (and heads)
# ---------------------------------------------------------------------------

def _objective_step(model, views, cfg, train):
    """Forward all views, compute the configured objective, and (if train)
    accumulate gradients into every parameter.  Returns the scalar loss."""
    embeddings, caches = {}, {}
    for key, x in views.items():
        mod = key[0]
        emb, cache = model.encoders[mod].forward(x, train)
        embeddings[key] = emb
        caches[key] = cache

    def encoder_backward(key, gemb):
        mod = key[0]
        model.encoders[mod].backward(caches[key], gemb.astype(embeddings[key].dtype))

    obj = cfg.loss.objective
    mods = model.modalities
    if obj == "protomm":
        emb64 = {k: e.astype(np.float64) for k, e in embeddings.items()}
        loss, g_emb, g_P, _ = mpp_from_embeddings(emb64, model.bank, cfg.assignment, cfg.loss)
        if train:
            model.bank.matrix.grad += g_P.astype(model.bank.matrix.grad.dtype)
            for key in views:
                encoder_backward(key, g_emb[key])
        return loss

    # contrastive baselines go through per-modality projection heads
    z, head_caches = {}, {}
    for key, emb in embeddings.items():
        z[key], head_caches[key] = model.heads[key[0]].forward(emb, train)

    def head_backward(key, gz):
        gemb = model.heads[key[0]].backward(head_caches[key], gz.astype(z[key].dtype))
        encoder_backward(key, gemb)

    if obj == "simclr":
        total = 0.0
        for mod in mods:
            loss, g1, g2 = nt_xent_with_grad(z[(mod, 0)], z[(mod, 1)], cfg.loss.nt_xent_temperature)
            total += loss
            if train:
                head_backward((mod, 0), g1)
                head_backward((mod, 1), g2)
        return total
    if obj in ("clip", "slip"):
        if len(mods) != 2:
            raise ValueError(f"{obj} objective needs exactly two modalities")
        logt = float(model.log_temperature.data)
        total, grads = 0.0, {}
        if obj == "slip":
            for mod in mods:
                loss, g1, g2 = nt_xent_with_grad(
                    z[(mod, 0)], z[(mod, 1)], cfg.loss.nt_xent_temperature
                )
                total += loss
                grads[(mod, 0)] = grads.get((mod, 0), 0.0) + g1
                grads[(mod, 1)] = grads.get((mod, 1), 0.0) + g2
        closs, ga, gb, g_logt = clip_loss_with_grad(z[(mods[0], 0)], z[(mods[1], 0)], logt)
        total += closs
        grads[(mods[0], 0)] = grads.get((mods[0], 0), 0.0) + ga
        grads[(mods[1], 0)] = grads.get((mods[1], 0), 0.0) + gb
        if train:
            model.log_temperature.grad += g_logt
            for key, g in grads.items():
                head_backward(key, g)
        return total
    raise ValueError(f"unknown objective {obj!r}")  # pragma: no cover


# ---------------------------------------------------------------------------
# the loop
# ---------------------------------------------------------------------------

def _epoch_batches(n, batch_size, rng=None, drop_last=True):
    order = rng.permutation(n) if rng is not None else np.arange(n)
    batches = [order[i : i + batch_size] for i in range(0, n, batch_size)]
    if drop_last:
        batches = [b for b in batches if len(b) == batch_size]
    else:
        batches = [b for b in batches if len(b) >= 2]
    return batches


def pretrain(
    train_manifest: DatasetManifest,
    val_manifest: DatasetManifest,
    cfg: TrainConfig,
    out_dir=None,
    view_cfg: ViewSamplerConfig | None = None,
    model: MultimodalModel | None = None,
):
    """Run the pre-training loop; returns (records, model).

    Labels are ignored.  The final incomplete training batch is dropped
    (the equipartition target assumes a known batch size).  Stops at
    max_epochs or the wall-clock budget, whichever comes first.
    """
    if not val_manifest.samples:
        raise ValueError("validation set is empty")
    n_train = len(train_manifest.samples)
    if n_train < cfg.batch_size:
        raise ValueError(
            f"need at least one full batch: {n_train} samples < batch_size {cfg.batch_size}"
        )
    view_cfg = view_cfg or ViewSamplerConfig(num_views_A=cfg.num_views)
    modalities = sorted(train_manifest.modalities(), key=lambda m: m.value)
    if model is None:
        model = MultimodalModel(
            modalities,
            objective=cfg.loss.objective,
            n_prototypes=cfg.n_prototypes,
            seed=cfg.seed,
            encoder_overrides=cfg.encoder,
            assignment=cfg.assignment,
        )
    optimizer = Adam(
        model.named_params(),
        lr=cfg.learning_rate,
        beta1=cfg.beta1,
        beta2=cfg.beta2,
        eps=cfg.adam_eps,
        weight_decay=cfg.weight_decay,
    )
    fingerprint = model.fingerprint()
    out_dir = Path(out_dir) if out_dir is not None else None
    metrics_f = None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "config.json", "w", encoding="utf-8") as f:
            json.dump(cfg.to_dict(), f, indent=1)
        metrics_f = open(out_dir / "metrics.jsonl", "a", encoding="utf-8")

    shuffle_rng = np.random.default_rng([cfg.seed, 3])
    budget_s = cfg.wall_clock_budget_hours * 3600.0
    t0 = time.monotonic()
    records = []
    try:
        for epoch in range(cfg.max_epochs):
            batch_losses = []
            for b, idxs in enumerate(
                _epoch_batches(n_train, cfg.batch_size, shuffle_rng, drop_last=True)
            ):
                views = _batch_views(
                    train_manifest.samples, idxs, modalities, view_cfg,
                    cfg.seed, _TRAIN_PHASE, epoch,
                )
                model.zero_grad()
                loss = _objective_step(model, views, cfg, train=True)
                if not np.isfinite(loss):
                    raise RuntimeError(f"non-finite loss at epoch {epoch}, batch {b}")
                if model.bank is not None and epoch < cfg.freeze_prototype_epochs:
                    model.bank.matrix.grad[...] = 0
                optimizer.step()
                if model.bank is not None:
                    model.bank.renormalize(np.random.default_rng([cfg.seed, 4, epoch, b]))
                batch_losses.append(loss)
            train_loss = float(np.mean(batch_losses))
            val_loss = evaluate_loss(model, val_manifest, cfg, view_cfg, epoch)
            wall_s = time.monotonic() - t0
            archive = None
            if out_dir is not None:
                archive = str(out_dir / "checkpoints" / f"epoch_{epoch:04d}")
                save_checkpoint(
                    model, archive,
                    extra={"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss},
                )
            records.append(CheckpointRecord(epoch, train_loss, val_loss, archive, fingerprint))
            if metrics_f is not None:
                metrics_f.write(
                    json.dumps(
                        {"epoch": epoch, "train_loss": train_loss,
                         "val_loss": val_loss, "wall_s": wall_s}
                    ) + "\n"
                )
                metrics_f.flush()
            logger.info(
                "epoch %d: train %.5f val %.5f (%.1f s)", epoch, train_loss, val_loss, wall_s
            )
            if wall_s > budget_s:
                logger.warning("wall-clock budget exhausted after epoch %d", epoch)
                break
    finally:
        if metrics_f is not None:
            metrics_f.close()
    return records, model


def evaluate_loss(model, manifest, cfg, view_cfg=None, epoch=0) -> float:
    """Objective value in evaluation mode; mutates no trainable state."""
    if not manifest.samples:
        raise ValueError("empty evaluation set")
    view_cfg = view_cfg or ViewSamplerConfig(num_views_A=cfg.num_views)
    modalities = sorted(manifest.modalities(), key=lambda m: m.value)
    losses, weights = [], []
    for idxs in _epoch_batches(len(manifest.samples), cfg.batch_size, drop_last=False):
        views = _batch_views(
            manifest.samples, idxs, modalities, view_cfg, cfg.seed, _VAL_PHASE, epoch
        )
        losses.append(_objective_step(model, views, cfg, train=False))
        weights.append(len(idxs))
    if not losses:
        raise ValueError("evaluation set has no usable batch (need >= 2 samples)")
    return float(np.average(losses, weights=weights))


def split_subjects(manifest: DatasetManifest, val_fraction: float = 0.1, seed: int = 0):
    """Subject-wise pre-training split: at least one subject held out."""
    subjects = manifest.subjects()
    if len(subjects) < 2:
        raise ValueError("need at least two subjects for a subject-wise split")
    rng = np.random.default_rng([seed, 5])
    order = list(rng.permutation(subjects))
    n_val = max(1, int(round(val_fraction * len(subjects))))
    val_subj = set(order[:n_val])
    tr = [s for s in manifest.samples if s.subject_id not in val_subj]
    va = [s for s in manifest.samples if s.subject_id in val_subj]
    return (
        DatasetManifest(tr, split="train", task=manifest.task),
        DatasetManifest(va, split="val", task=manifest.task),
    )
