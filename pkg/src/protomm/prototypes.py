"""Shared prototype bank and soft-assignment machinery.

Embeddings are projected onto unit-norm prototype columns to get cosine
similarity scores; a temperature softmax turns scores into predicted
distributions, and Sinkhorn-Knopp alternating normalization turns them
into equipartitioned assignment targets.  Targets carry no gradient.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .nn.layers import Param

logger = logging.getLogger(__name__)


@dataclass
class AssignmentConfig:
    temperature: float = 0.1
    sinkhorn_epsilon: float = 0.05
    sinkhorn_iters: int = 3

    def __post_init__(self):
        if self.temperature <= 0 or self.sinkhorn_epsilon <= 0:
            raise ValueError("temperature and sinkhorn_epsilon must be positive")
        if self.sinkhorn_iters < 1:
            raise ValueError("sinkhorn_iters must be >= 1")


class PrototypeBank:
    """Trainable E x P matrix whose columns are kept at unit norm."""

    def __init__(self, embed_dim: int, n_prototypes: int, seed: int = 0, dtype=np.float32):
        self.embed_dim = embed_dim
        self.n_prototypes = n_prototypes
        rng = np.random.default_rng(seed)
        mat = rng.standard_normal((embed_dim, n_prototypes)).astype(dtype)
        self.matrix = Param(mat)
        self.renormalize()

    def renormalize(self, rng: np.random.Generator | None = None):
        """Divide every column by its norm; reinitialize zero-norm columns."""
        norms = np.linalg.norm(self.matrix.data, axis=0)
        dead = norms < 1e-12
        if dead.any():
            logger.warning("reinitializing %d zero-norm prototype column(s)", int(dead.sum()))
            rng = rng or np.random.default_rng(0)
            fresh = rng.standard_normal((self.embed_dim, int(dead.sum())))
            fresh /= np.linalg.norm(fresh, axis=0)
            self.matrix.data[:, dead] = fresh.astype(self.matrix.data.dtype)
            norms = np.linalg.norm(self.matrix.data, axis=0)
        self.matrix.data /= norms

    def named_params(self):
        return [("prototypes", self.matrix)]


def project(embeddings: np.ndarray, bank: PrototypeBank) -> np.ndarray:
    """Cosine similarity scores S[i, j] = <embedding_i, p_j>."""
    if embeddings.shape[1] != bank.embed_dim:
        raise ValueError(
            f"embedding dim {embeddings.shape[1]} != prototype dim {bank.embed_dim}"
        )
    return embeddings @ bank.matrix.data


def soft_probs(scores: np.ndarray, temperature: float) -> np.ndarray:
    """Row-wise softmax of scores / temperature, stabilized by row-max shift."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    z = scores / temperature
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def soft_probs_backward(U: np.ndarray, gU: np.ndarray, temperature: float) -> np.ndarray:
    """Pull a gradient w.r.t. the softmax output back to the scores."""
    return U * (gU - (gU * U).sum(axis=1, keepdims=True)) / temperature


def sinkhorn_targets(scores: np.ndarray, cfg: AssignmentConfig) -> np.ndarray:
    """Equipartitioned assignment targets via Sinkhorn-Knopp.

    K = exp(S / epsilon) is alternately column-normalized (sums 1/P) and
    row-normalized (sums 1/B) for sinkhorn_iters rounds, then rows are
    rescaled to sum to 1.  All normalizations run in log space (max-shifted
    exponentials), which keeps small epsilon values from overflowing or
    underflowing.  The result is a constant w.r.t. the loss.
    """
    B, P = scores.shape
    if B < 1:
        raise ValueError("need at least one row")
    logK = scores / cfg.sinkhorn_epsilon
    logK = logK - logK.max()
    for _ in range(cfg.sinkhorn_iters):
        logK = logK - logsumexp(logK, axis=0, keepdims=True) - np.log(P)
        logK = logK - logsumexp(logK, axis=1, keepdims=True) - np.log(B)
    return np.exp(logK - logsumexp(logK, axis=1, keepdims=True))
