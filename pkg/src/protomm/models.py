"""Multimodal model assembly and checkpoint archives.

A model bundles one encoder per modality with the objective-specific
trainable extras: the shared prototype bank (protomm), per-modality
projection heads (contrastive baselines), and a scalar log-temperature
(clip/slip).  Checkpoints are directories holding named 32-bit
little-endian parameter blocks plus a JSON manifest, and can be loaded
without the training loop.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .data import MODALITY_CHANNELS, Modality
from .losses import LossConfig
from .nn.layers import L2Normalize, Linear, Param
from .nn.resnet import EncoderConfig, ResNet1d
from .prototypes import AssignmentConfig, PrototypeBank

# fixed per-modality seed tags so a modality's encoder init is identical
# whether it is trained alone or jointly with others
_MODALITY_SEED_TAG = {Modality.PPG: 1, Modality.ACCEL: 2}
_BANK_SEED_TAG = 100
_HEAD_SEED_TAG = 200
_FORMAT_VERSION = 1


def _derived_seed(*entropy) -> int:
    return int(np.random.SeedSequence(list(entropy)).generate_state(1)[0])


def config_fingerprint(config: dict) -> str:
    """Stable hash of a JSON-serializable config."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


class ProjectionHead:
    """Single affine map followed by L2 normalization (baselines only)."""

    def __init__(self, dim: int, rng, dtype):
        self.fc = Linear(dim, dim, rng=rng, dtype=dtype)
        self.norm = L2Normalize()

    def forward(self, x, train):
        h, c1 = self.fc.forward(x, train)
        z, c2 = self.norm.forward(h, train)
        return z, (c1, c2)

    def backward(self, cache, gz):
        c1, c2 = cache
        return self.fc.backward(c1, self.norm.backward(c2, gz))

    def params(self):
        yield from self.fc.params()


class MultimodalModel:
    """One ResNet1d per modality plus objective-specific extras."""

    def __init__(
        self,
        modalities,
        objective: str = "protomm",
        n_prototypes: int = 512,
        seed: int = 0,
        encoder_overrides: dict | None = None,
        assignment: AssignmentConfig | None = None,
    ):
        self.modalities = sorted(set(modalities), key=lambda m: m.value)
        if not self.modalities:
            raise ValueError("need at least one modality")
        self.objective = objective
        self.n_prototypes = n_prototypes
        self.seed = seed
        self.encoder_overrides = dict(encoder_overrides or {})
        self.assignment = assignment or AssignmentConfig()

        self.encoders = {}
        for mod in self.modalities:
            cfg = EncoderConfig(in_channels=MODALITY_CHANNELS[mod], **self.encoder_overrides)
            self.encoders[mod] = ResNet1d(cfg, seed=_derived_seed(seed, _MODALITY_SEED_TAG[mod]))
        self.embed_dim = next(iter(self.encoders.values())).config.embed_dim
        dtype = next(iter(self.encoders.values())).config.np_dtype()

        self.bank = None
        self.heads = {}
        self.log_temperature = None
        if objective == "protomm":
            self.bank = PrototypeBank(
                self.embed_dim, n_prototypes, seed=_derived_seed(seed, _BANK_SEED_TAG), dtype=dtype
            )
        else:
            for i, mod in enumerate(self.modalities):
                rng = np.random.default_rng(_derived_seed(seed, _HEAD_SEED_TAG + i))
                self.heads[mod] = ProjectionHead(self.embed_dim, rng, dtype)
            if objective in ("clip", "slip"):
                self.log_temperature = Param(np.zeros((), dtype=np.float64))

    # -- parameter access ---------------------------------------------------

    def named_params(self):
        out = []
        for mod in self.modalities:
            for name, p in self.encoders[mod].named_params():
                out.append((f"enc.{mod.value}.{name}", p))
        for mod, head in self.heads.items():
            for name, p in head.params():
                out.append((f"head.{mod.value}.{name}", p))
        if self.bank is not None:
            out.append(("prototypes", self.bank.matrix))
        if self.log_temperature is not None:
            out.append(("log_temperature", self.log_temperature))
        return out

    def zero_grad(self):
        for _, p in self.named_params():
            p.grad[...] = 0

    def _state_blocks(self):
        """All persisted arrays: trainable params plus BN running statistics."""
        blocks = dict(self.named_params())
        stats = {}
        for name, p in blocks.items():
            stats[name] = p.data
        for mod in self.modalities:
            for bn_name, bn in self.encoders[mod].bn_layers():
                stats[f"enc.{mod.value}.{bn_name}.running_mean"] = bn.running_mean
                stats[f"enc.{mod.value}.{bn_name}.running_var"] = bn.running_var
        return stats

    def load_state(self, arrays: dict):
        params = dict(self.named_params())
        for name, p in params.items():
            if name not in arrays:
                raise ValueError(f"checkpoint missing parameter block {name!r}")
            p.data[...] = arrays[name].reshape(p.data.shape).astype(p.data.dtype)
        for mod in self.modalities:
            for bn_name, bn in self.encoders[mod].bn_layers():
                bn.running_mean[...] = arrays[f"enc.{mod.value}.{bn_name}.running_mean"]
                bn.running_var[...] = arrays[f"enc.{mod.value}.{bn_name}.running_var"]

    def config_dict(self) -> dict:
        enc_cfg = next(iter(self.encoders.values())).config.to_dict()
        enc_cfg.pop("in_channels")  # per-modality, implied by the modality list
        return {
            "modalities": [m.value for m in self.modalities],
            "objective": self.objective,
            "n_prototypes": self.n_prototypes,
            "seed": self.seed,
            "encoder": enc_cfg,
            "assignment": {
                "temperature": self.assignment.temperature,
                "sinkhorn_epsilon": self.assignment.sinkhorn_epsilon,
                "sinkhorn_iters": self.assignment.sinkhorn_iters,
            },
        }

    def fingerprint(self) -> str:
        return config_fingerprint(self.config_dict())


def save_checkpoint(model: MultimodalModel, out_dir, extra: dict | None = None) -> Path:
    """Write named float32 little-endian blocks plus a JSON manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    blocks = {k: np.ascontiguousarray(v, dtype="<f4") for k, v in model._state_blocks().items()}
    np.savez(out_dir / "params.npz", **blocks)
    manifest = {
        "format_version": _FORMAT_VERSION,
        "config": model.config_dict(),
        "fingerprint": model.fingerprint(),
    }
    if extra:
        manifest.update(extra)
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=1)
    return out_dir


def load_checkpoint(path) -> MultimodalModel:
    path = Path(path)
    with open(path / "manifest.json", encoding="utf-8") as f:
        manifest = json.load(f)
    cfg = manifest["config"]
    model = MultimodalModel(
        modalities=[Modality(m) for m in cfg["modalities"]],
        objective=cfg["objective"],
        n_prototypes=cfg["n_prototypes"],
        seed=cfg["seed"],
        encoder_overrides=cfg["encoder"],
        assignment=AssignmentConfig(**cfg["assignment"]),
    )
    with np.load(path / "params.npz") as arrays:
        model.load_state(dict(arrays))
    return model


def checkpoint_fingerprint(path) -> str:
    """Hash of the stored parameter bytes — detects any mutation."""
    path = Path(path)
    h = hashlib.sha256()
    with np.load(path / "params.npz") as arrays:
        for key in sorted(arrays.files):
            h.update(key.encode("utf-8"))
            h.update(np.ascontiguousarray(arrays[key]).tobytes())
    return h.hexdigest()[:16]
