"""Prototype-space interpretability tooling.

Clusters the learned prototypes with k-means, retrieves the signal
segments closest to each centroid by cosine similarity, and exports a 2-D
stochastic-neighbor-embedding projection of the prototypes.  Everything is
read-only over checkpoints and embeddings.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)


@dataclass
class CentroidSet:
    k: int
    centroids: np.ndarray  # (k, E), unit rows
    members: list  # per centroid: list of prototype indices

    def __post_init__(self):
        assigned = sorted(i for m in self.members for i in m)
        if assigned and assigned != list(range(len(assigned))):
            raise ValueError("every prototype must belong to exactly one centroid")


@dataclass
class NeighborList:
    centroid_id: int
    neighbors: list  # [(sample_index, cosine_similarity, label), ...] descending


# ---------------------------------------------------------------------------
# k-means over prototype columns
# ---------------------------------------------------------------------------

def _kmeans_pp_init(X, k, rng):
    """Spread the initial centers: first uniform, then proportional to the
    squared distance to the nearest chosen center."""
    n = len(X)
    centers = [X[rng.integers(n)]]
    for _ in range(k - 1):
        d2 = np.min(
            [np.sum((X - c) ** 2, axis=1) for c in centers], axis=0
        )
        total = d2.sum()
        if total <= 0:
            centers.append(X[rng.integers(n)])
            continue
        centers.append(X[rng.choice(n, p=d2 / total)])
    return np.stack(centers)


def cluster_prototypes(bank, k: int, seed: int = 0, max_iters: int = 300) -> CentroidSet:
    """Euclidean k-means over the prototype columns.

    Deterministic given the seed.  An empty cluster is reseeded from the
    point farthest from its assigned centroid (logged).  Centroids are
    renormalized to unit norm at the end for cosine retrieval.
    """
    X = np.asarray(bank.matrix.data.T, dtype=np.float64)  # (P, E)
    P = len(X)
    if k < 1 or k > P:
        raise ValueError(f"k must lie in [1, {P}], got {k}")
    rng = np.random.default_rng(seed)
    centers = _kmeans_pp_init(X, k, rng)
    assign = np.zeros(P, dtype=int)
    prev_obj = np.inf
    for _ in range(max_iters):
        d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        assign = d2.argmin(axis=1)
        point_d2 = d2[np.arange(P), assign]
        for c in range(k):
            mask = assign == c
            if mask.any():
                centers[c] = X[mask].mean(axis=0)
            else:
                far = int(point_d2.argmax())
                logger.warning("empty cluster %d reseeded from farthest point %d", c, far)
                centers[c] = X[far]
                assign[far] = c
                point_d2[far] = 0.0
        obj = float(point_d2.sum())
        if obj >= prev_obj - 1e-12:
            break
        prev_obj = obj
    norms = np.linalg.norm(centers, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    centers = centers / norms
    members = [sorted(np.flatnonzero(assign == c).tolist()) for c in range(k)]
    return CentroidSet(k=k, centroids=centers, members=members)


def kmeans_objective(X, centers, assign) -> float:
    """Within-cluster sum of squares (exposed for invariant checks)."""
    return float(((X - centers[assign]) ** 2).sum())


# ---------------------------------------------------------------------------
# nearest-segment retrieval
# ---------------------------------------------------------------------------

def nearest_segments(
    centroid: np.ndarray, embeddings: np.ndarray, top_k: int = 3, labels=None, centroid_id: int = 0
) -> NeighborList:
    """Top-k samples by cosine similarity to the centroid, descending;
    ties broken by sample index."""
    embeddings = np.asarray(embeddings)
    n = len(embeddings)
    if n == 0:
        raise ValueError("no embeddings to search")
    if n < top_k:
        logger.warning("only %d embeddings for top_k=%d; returning all", n, top_k)
        top_k = n
    c = centroid / np.linalg.norm(centroid)
    norms = np.linalg.norm(embeddings, axis=1)
    sims = embeddings @ c / np.where(norms > 0, norms, 1.0)
    # stable sort on (-similarity, index) implements the tie rule
    order = np.lexsort((np.arange(n), -sims))[:top_k]
    neighbors = [
        (int(i), float(sims[i]), labels[i] if labels is not None else None) for i in order
    ]
    return NeighborList(centroid_id=centroid_id, neighbors=neighbors)


def label_consistency(neighbor_lists) -> dict:
    """Fraction of centroids whose retrieved neighbors all share one label,
    plus the per-centroid modal-label agreement rate."""
    per_centroid = {}
    unanimous = 0
    for nl in neighbor_lists:
        labels = [lab for _, _, lab in nl.neighbors if lab is not None]
        if not labels:
            continue
        values, counts = np.unique(np.asarray(labels, dtype=object), return_counts=True)
        agree = counts.max() / len(labels)
        per_centroid[nl.centroid_id] = float(agree)
        unanimous += int(agree == 1.0)
    n = len(per_centroid)
    return {
        "per_centroid_agreement": per_centroid,
        "mean_agreement": float(np.mean(list(per_centroid.values()))) if n else None,
        "unanimous_fraction": unanimous / n if n else None,
    }


# ---------------------------------------------------------------------------
# 2-D projection
# ---------------------------------------------------------------------------

def project_2d(bank, seed: int = 0) -> np.ndarray:
    """P x 2 stochastic-neighbor-embedding coordinates of the prototypes.

    The projection algorithm is an exchangeable backend; only determinism
    given the seed and output shape are contractual.
    """
    from sklearn.manifold import TSNE

    X = np.asarray(bank.matrix.data.T, dtype=np.float64)
    P = len(X)
    if P < 3:
        raise ValueError("need at least 3 prototypes to project")
    perplexity = min(30.0, max(2.0, (P - 1) / 3.0))
    tsne = TSNE(n_components=2, random_state=seed, init="pca", perplexity=perplexity)
    return tsne.fit_transform(X)


def write_coords_csv(coords: np.ndarray, centroid_ids, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["prototype_index", "x", "y", "centroid_id"])
        for i, (x, y) in enumerate(coords):
            writer.writerow([i, f"{x:.6f}", f"{y:.6f}", int(centroid_ids[i])])
    return path


def run_interpretation(
    bank, embeddings_by_modality: dict, out_dir, k: int = 15, top_k: int = 3, seed: int = 0
) -> dict:
    """Full pipeline: cluster, retrieve per modality, project, export.

    embeddings_by_modality: {modality_key: (embeddings (N, E), labels)}.
    Writes coords.csv, neighbors.json, consistency.json into out_dir.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    centroids = cluster_prototypes(bank, k, seed)
    centroid_of_prototype = np.zeros(bank.n_prototypes, dtype=int)
    for c, mem in enumerate(centroids.members):
        centroid_of_prototype[mem] = c

    coords = project_2d(bank, seed)
    write_coords_csv(coords, centroid_of_prototype, out_dir / "coords.csv")

    neighbors_out, consistency_out = {}, {}
    for mod_key, (emb, labels) in embeddings_by_modality.items():
        lists = [
            nearest_segments(centroids.centroids[c], emb, top_k, labels, centroid_id=c)
            for c in range(k)
        ]
        neighbors_out[mod_key] = {
            str(nl.centroid_id): [
                {"sample": i, "similarity": s, "label": lab} for i, s, lab in nl.neighbors
            ]
            for nl in lists
        }
        consistency_out[mod_key] = label_consistency(lists)
    with open(out_dir / "neighbors.json", "w", encoding="utf-8") as f:
        json.dump(neighbors_out, f, indent=1, default=str)
    with open(out_dir / "consistency.json", "w", encoding="utf-8") as f:
        json.dump(consistency_out, f, indent=1, default=str)
    return {"centroids": centroids, "coords": coords, "consistency": consistency_out}
