"""Training objectives: multimodal prototype prediction (MPP) plus the
NT-Xent, CLIP and SLIP contrastive baselines.

Conventions fixed here once: in every cross-entropy term the Sinkhorn
target V is the constant and the softmax prediction U receives gradient;
logarithms are floored at 1e-12.  Each objective comes with an analytic
gradient used by the training loop and validated against central finite
differences in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .prototypes import AssignmentConfig, PrototypeBank, project, sinkhorn_targets, soft_probs, soft_probs_backward

LOG_FLOOR = 1e-12

OBJECTIVES = ("protomm", "simclr", "clip", "slip")


@dataclass
class LossConfig:
    objective: str = "protomm"
    alpha: float = 0.5
    nt_xent_temperature: float = 0.1
    clip_temperature_init: float = 1.0

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise ValueError(f"unknown objective {self.objective!r}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")


@dataclass
class ViewBundle:
    """Per-(modality, view) prediction and target distributions for a batch.

    U and V are keyed by (modality_key, view_index) with view indices
    0..A-1 forming a complete grid over every modality key.
    """

    U: dict
    V: dict

    def __post_init__(self):
        if set(self.U) != set(self.V):
            raise ValueError("U and V must share the same (modality, view) keys")
        mods = self.modalities
        views = sorted({a for _, a in self.U})
        expected = {(m, a) for m in mods for a in views}
        if expected != set(self.U) or views != list(range(len(views))):
            raise ValueError("incomplete (modality, view) grid")
        shapes = {u.shape for u in self.U.values()} | {v.shape for v in self.V.values()}
        if len(shapes) != 1:
            raise ValueError(f"inconsistent matrix shapes: {shapes}")

    @property
    def modalities(self):
        return sorted({m for m, _ in self.U}, key=str)

    @property
    def M(self) -> int:
        return len(self.modalities)

    @property
    def A(self) -> int:
        return len({a for _, a in self.U})


# ---------------------------------------------------------------------------
# MPP objective
# ---------------------------------------------------------------------------

def ce_term(V: np.ndarray, U: np.ndarray) -> float:
    """Batch-mean cross entropy -sum_j V log U with V treated as constant."""
    return float(-(V * np.log(np.maximum(U, LOG_FLOOR))).sum(axis=1).mean())


def _ce_grad_U(V: np.ndarray, U: np.ndarray) -> np.ndarray:
    g = np.where(U > LOG_FLOOR, -V / np.maximum(U, LOG_FLOOR), 0.0)
    return g / V.shape[0]


def _within_pairs(bundle: ViewBundle):
    for m in bundle.modalities:
        for a in range(bundle.A):
            for b in range(bundle.A):
                if a != b:
                    yield (m, a), (m, b)  # prediction key, target key


def _between_pairs(bundle: ViewBundle):
    for m in bundle.modalities:
        for n in bundle.modalities:
            if n == m:
                continue
            for a in range(bundle.A):
                for b in range(bundle.A):
                    yield (m, a), (n, b)


def within_mod_loss(bundle: ViewBundle) -> float:
    """Sum of swapped-prediction terms over ordered augmentation pairs
    inside each modality: M * A * (A-1) terms."""
    if bundle.A < 2:
        raise ValueError("within-modality loss needs at least two views")
    return sum(ce_term(bundle.V[tk], bundle.U[pk]) for pk, tk in _within_pairs(bundle))


def between_mod_loss(bundle: ViewBundle) -> float:
    """Sum over ordered modality pairs and all view pairs: M * (M-1) * A**2 terms."""
    if bundle.M < 2:
        raise ValueError("between-modality loss needs at least two modalities")
    return sum(ce_term(bundle.V[tk], bundle.U[pk]) for pk, tk in _between_pairs(bundle))


def mpp_loss(bundle: ViewBundle, cfg: LossConfig) -> float:
    """(alpha * within + (1 - alpha) * between) / (A * M)."""
    scale = 1.0 / (bundle.A * bundle.M)
    total = 0.0
    if cfg.alpha > 0:
        total += cfg.alpha * within_mod_loss(bundle)
    if cfg.alpha < 1:
        total += (1.0 - cfg.alpha) * between_mod_loss(bundle)
    return scale * total


def mpp_grad_U(bundle: ViewBundle, cfg: LossConfig) -> dict:
    """Gradient of mpp_loss w.r.t. every U matrix (targets V constant)."""
    scale = 1.0 / (bundle.A * bundle.M)
    grads = {k: np.zeros_like(u, dtype=np.float64) for k, u in bundle.U.items()}
    if cfg.alpha > 0:
        for pk, tk in _within_pairs(bundle):
            grads[pk] += scale * cfg.alpha * _ce_grad_U(bundle.V[tk], bundle.U[pk])
    if cfg.alpha < 1:
        for pk, tk in _between_pairs(bundle):
            grads[pk] += scale * (1.0 - cfg.alpha) * _ce_grad_U(bundle.V[tk], bundle.U[pk])
    return grads


def mpp_from_embeddings(
    embeddings: dict,
    bank: PrototypeBank,
    assign_cfg: AssignmentConfig,
    loss_cfg: LossConfig,
    targets: dict | None = None,
):
    """Full MPP pipeline from unit-norm embeddings.

    embeddings: {(modality, view): (B, E)}.  Sinkhorn targets are computed
    per (modality, view) batch independently unless supplied.  Returns
    (loss, grads w.r.t. embeddings keyed like the input, grad w.r.t. the
    prototype matrix, bundle).
    """
    P = bank.matrix.data
    scores = {k: emb @ P for k, emb in embeddings.items()}
    U = {k: soft_probs(s, assign_cfg.temperature) for k, s in scores.items()}
    if targets is None:
        targets = {k: sinkhorn_targets(s, assign_cfg) for k, s in scores.items()}
    bundle = ViewBundle(U=U, V=targets)
    loss = mpp_loss(bundle, loss_cfg)
    gU = mpp_grad_U(bundle, loss_cfg)
    grads_emb = {}
    grad_P = np.zeros_like(P, dtype=np.float64)
    for k, emb in embeddings.items():
        gS = soft_probs_backward(U[k], gU[k], assign_cfg.temperature)
        grads_emb[k] = gS @ P.T
        grad_P += emb.T @ gS
    return loss, grads_emb, grad_P.astype(P.dtype), bundle


# ---------------------------------------------------------------------------
# contrastive baselines
# ---------------------------------------------------------------------------

def nt_xent_with_grad(z1: np.ndarray, z2: np.ndarray, temperature: float):
    """Normalized-temperature cross entropy over 2B instances.

    Positives are the paired views; the other 2B-2 instances are negatives.
    Returns (loss, grad_z1, grad_z2).
    """
    B = z1.shape[0]
    if z2.shape[0] != B:
        raise ValueError("view batches must match")
    if B < 2:
        raise ValueError("nt_xent needs B >= 2 (no negatives otherwise)")
    z = np.vstack([z1, z2])
    sim = z @ z.T / temperature
    np.fill_diagonal(sim, -np.inf)
    sim -= sim.max(axis=1, keepdims=True)
    e = np.exp(sim)
    probs = e / e.sum(axis=1, keepdims=True)
    pos = (np.arange(2 * B) + B) % (2 * B)
    loss = float(-np.log(np.maximum(probs[np.arange(2 * B), pos], LOG_FLOOR)).mean())
    dsim = probs.copy()
    dsim[np.arange(2 * B), pos] -= 1.0
    dsim /= 2 * B
    gz = (dsim + dsim.T) @ z / temperature
    return loss, gz[:B], gz[B:]


def nt_xent(z1: np.ndarray, z2: np.ndarray, temperature: float) -> float:
    return nt_xent_with_grad(z1, z2, temperature)[0]


def clip_loss_with_grad(z_a: np.ndarray, z_b: np.ndarray, log_temperature: float):
    """Symmetric cross entropy over the B x B similarity matrix, diagonal
    targets, trainable scalar temperature exp(log_temperature).

    Returns (loss, grad_z_a, grad_z_b, grad_log_temperature).
    """
    B = z_a.shape[0]
    if z_b.shape[0] != B:
        raise ValueError("batches must match")
    if B < 2:
        raise ValueError("clip_loss needs B >= 2 (no negatives otherwise)")
    tau = float(np.exp(log_temperature))
    logits = z_a @ z_b.T / tau
    lr = logits - logits.max(axis=1, keepdims=True)
    pr = np.exp(lr)
    pr /= pr.sum(axis=1, keepdims=True)
    lc = logits - logits.max(axis=0, keepdims=True)
    pc = np.exp(lc)
    pc /= pc.sum(axis=0, keepdims=True)
    idx = np.arange(B)
    loss = 0.5 * float(
        -np.log(np.maximum(pr[idx, idx], LOG_FLOOR)).mean()
        - np.log(np.maximum(pc[idx, idx], LOG_FLOOR)).mean()
    )
    eye = np.eye(B)
    dlogits = 0.5 * ((pr - eye) + (pc - eye)) / B
    g_a = dlogits @ z_b / tau
    g_b = dlogits.T @ z_a / tau
    g_logt = float(-(dlogits * logits).sum())
    return loss, g_a, g_b, g_logt


def clip_loss(z_a: np.ndarray, z_b: np.ndarray, log_temperature: float) -> float:
    return clip_loss_with_grad(z_a, z_b, log_temperature)[0]


def slip_loss(views_a: tuple, views_b: tuple, nt_temperature: float, log_temperature: float) -> float:
    """Per-modality NT-Xent terms plus the cross-modal CLIP term on first views."""
    return (
        nt_xent(views_a[0], views_a[1], nt_temperature)
        + nt_xent(views_b[0], views_b[1], nt_temperature)
        + clip_loss(views_a[0], views_b[0], log_temperature)
    )
