"""Frozen-encoder evaluation: embedding extraction, linear probes, metrics.

Embeddings come from encoders in evaluation mode and are never updated by
probe training.  Probes are single affine maps: multinomial logistic
regression (full-batch L-BFGS, deterministic and seed-free) for
classification, closed-form ridge (lambda = 1e-3) for regression.
Classification folds are subject-wise by default.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp

from .data import DatasetManifest, Modality

logger = logging.getLogger(__name__)

COMPOSITIONS = {
    "single_P": (Modality.PPG,),
    "single_A": (Modality.ACCEL,),
    "concat_PA": (Modality.PPG, Modality.ACCEL),
}


@dataclass
class ProbeConfig:
    composition: str = "concat_PA"
    task_type: str = "classification"
    folds: int = 5
    ridge_lambda: float = 1e-3
    logistic_lambda: float = 1e-3
    max_iter: int = 500

    def __post_init__(self):
        if self.composition not in COMPOSITIONS:
            raise ValueError(f"unknown composition {self.composition!r}")
        if self.task_type not in ("classification", "regression"):
            raise ValueError(f"unknown task_type {self.task_type!r}")
        if self.folds < 2:
            raise ValueError("folds must be >= 2")


@dataclass
class EmbeddingSet:
    X: np.ndarray  # (N, D)
    labels: list
    subject_ids: list
    skipped: int = 0


@dataclass
class ProbeReport:
    task_type: str
    metrics: dict  # mean over evaluated folds
    fold_metrics: list  # one dict per evaluated fold
    fold_dispersion: dict  # std over evaluated folds
    n_samples: int
    n_folds_evaluated: int
    n_folds_skipped: int
    majority_baseline_accuracy: float | None = None
    excluded_classes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "task_type": self.task_type,
            "metrics": self.metrics,
            "fold_metrics": self.fold_metrics,
            "fold_dispersion": self.fold_dispersion,
            "n_samples": self.n_samples,
            "n_folds_evaluated": self.n_folds_evaluated,
            "n_folds_skipped": self.n_folds_skipped,
            "majority_baseline_accuracy": self.majority_baseline_accuracy,
            "excluded_classes": self.excluded_classes,
        }


# ---------------------------------------------------------------------------
# embedding extraction
# ---------------------------------------------------------------------------

def extract_embeddings(
    model, manifest: DatasetManifest, composition: str, batch_size: int = 256
) -> EmbeddingSet:
    """(N, D) embedding matrix with labels; D = E per modality, concatenated.

    Encoders run in evaluation mode; samples missing a required modality
    are skipped and counted.
    """
    if composition not in COMPOSITIONS:
        raise ValueError(f"unknown composition {composition!r}")
    mods = COMPOSITIONS[composition]
    missing = [m.value for m in mods if m not in model.encoders]
    if missing:
        raise ValueError(f"checkpoint lacks encoders for {missing}")
    usable = [s for s in manifest.samples if all(m in s.windows for m in mods)]
    skipped = len(manifest.samples) - len(usable)
    if skipped:
        logger.warning("skipped %d sample(s) missing a required modality", skipped)
    parts = []
    for mod in mods:
        rows = []
        for i in range(0, len(usable), batch_size):
            x = np.stack(
                [s.windows[mod].samples.T for s in usable[i : i + batch_size]]
            ).astype(np.float32)
            rows.append(model.encoders[mod].encode(x))
        parts.append(np.concatenate(rows) if rows else np.zeros((0, model.embed_dim)))
    X = np.concatenate(parts, axis=1)
    return EmbeddingSet(
        X=X,
        labels=[s.label for s in usable],
        subject_ids=[s.subject_id for s in usable],
        skipped=skipped,
    )


# ---------------------------------------------------------------------------
# probes
# ---------------------------------------------------------------------------

def fit_logistic(X, y_idx, n_classes, lam=1e-3, max_iter=500) -> np.ndarray:
    """Multinomial logistic regression; returns (D+1, K) weights (bias last)."""
    N, D = X.shape
    Xb = np.hstack([X, np.ones((N, 1))])
    Y = np.zeros((N, n_classes))
    Y[np.arange(N), y_idx] = 1.0

    def objective(wflat):
        W = wflat.reshape(D + 1, n_classes)
        logits = Xb @ W
        lse = logsumexp(logits, axis=1)
        nll = (lse - logits[np.arange(N), y_idx]).mean()
        P = np.exp(logits - lse[:, None])
        grad = Xb.T @ (P - Y) / N
        nll += 0.5 * lam * (W[:-1] ** 2).sum()
        grad[:-1] += lam * W[:-1]
        return nll, grad.ravel()

    res = minimize(
        objective,
        np.zeros((D + 1) * n_classes),
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": max_iter},
    )
    return res.x.reshape(D + 1, n_classes)


def logistic_predict(W, X) -> np.ndarray:
    Xb = np.hstack([X, np.ones((len(X), 1))])
    return (Xb @ W).argmax(axis=1)


def fit_ridge(X, y, lam=1e-3) -> np.ndarray:
    """Closed-form ridge regression with bias (unpenalized); returns (D+1,)."""
    N, D = X.shape
    Xb = np.hstack([X, np.ones((N, 1))])
    reg = lam * np.eye(D + 1)
    reg[-1, -1] = 0.0
    return np.linalg.solve(Xb.T @ Xb + reg, Xb.T @ np.asarray(y, dtype=np.float64))


def ridge_predict(w, X) -> np.ndarray:
    return np.hstack([X, np.ones((len(X), 1))]) @ w


def _fold_indices(subject_ids, n_folds):
    """Subject-wise folds: subjects sorted, assigned round-robin."""
    subjects = sorted(set(subject_ids))
    assign = {s: i % n_folds for i, s in enumerate(subjects)}
    folds = [[] for _ in range(n_folds)]
    for i, s in enumerate(subject_ids):
        folds[assign[s]].append(i)
    return [np.asarray(f, dtype=int) for f in folds if f]


def train_linear_probe(embeddings: EmbeddingSet, cfg: ProbeConfig):
    """Cross-validated affine probe on frozen embeddings.

    Returns (weights fitted on all samples, ProbeReport with held-out fold
    metrics).  Folds whose training part is degenerate (a single class /
    a single target value) are skipped and reported.
    """
    X = np.asarray(embeddings.X, dtype=np.float64)
    if len(X) == 0:
        raise ValueError("no embeddings to probe")
    labels = embeddings.labels
    folds = _fold_indices(embeddings.subject_ids, cfg.folds)
    fold_metrics, skipped_folds = [], 0

    if cfg.task_type == "classification":
        classes = sorted(set(labels), key=str)
        if len(classes) < 2:
            raise ValueError("classification probe needs >= 2 classes")
        index = {c: i for i, c in enumerate(classes)}
        y = np.asarray([index[l] for l in labels])
        for f in folds:
            train_mask = np.ones(len(X), dtype=bool)
            train_mask[f] = False
            if len(np.unique(y[train_mask])) < 2:
                skipped_folds += 1
                logger.warning("skipping degenerate single-class fold")
                continue
            W = fit_logistic(X[train_mask], y[train_mask], len(classes),
                             cfg.logistic_lambda, cfg.max_iter)
            preds = logistic_predict(W, X[f])
            fold_metrics.append(
                {"accuracy": accuracy(preds, y[f]), "macro_f1": macro_f1(preds, y[f])}
            )
        weights = fit_logistic(X, y, len(classes), cfg.logistic_lambda, cfg.max_iter)
        counts = np.bincount(y, minlength=len(classes))
        majority = float(counts.max() / counts.sum())
    else:
        y = np.asarray(labels, dtype=np.float64)
        if len(np.unique(y)) < 2:
            raise ValueError("regression probe needs >= 2 distinct targets")
        for f in folds:
            train_mask = np.ones(len(X), dtype=bool)
            train_mask[f] = False
            if len(np.unique(y[train_mask])) < 2:
                skipped_folds += 1
                logger.warning("skipping degenerate constant-target fold")
                continue
            w = fit_ridge(X[train_mask], y[train_mask], cfg.ridge_lambda)
            preds = ridge_predict(w, X[f])
            fold_metrics.append({"mae": mae(preds, y[f]), "r2": r2(preds, y[f])})
        weights = fit_ridge(X, y, cfg.ridge_lambda)
        majority = None

    if not fold_metrics:
        raise ValueError("every fold was degenerate; no metrics computed")
    keys = fold_metrics[0].keys()
    mean = {k: float(np.mean([m[k] for m in fold_metrics])) for k in keys}
    std = {k: float(np.std([m[k] for m in fold_metrics])) for k in keys}
    report = ProbeReport(
        task_type=cfg.task_type,
        metrics=mean,
        fold_metrics=fold_metrics,
        fold_dispersion=std,
        n_samples=len(X),
        n_folds_evaluated=len(fold_metrics),
        n_folds_skipped=skipped_folds,
        majority_baseline_accuracy=majority,
    )
    return weights, report


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def _check_lengths(a, b):
    a, b = np.asarray(a), np.asarray(b)
    if len(a) == 0:
        raise ValueError("empty input")
    if len(a) != len(b):
        raise ValueError("length mismatch")
    return a, b


def accuracy(preds, labels) -> float:
    preds, labels = _check_lengths(preds, labels)
    return float((preds == labels).mean())


def macro_f1(preds, labels) -> float:
    """Unweighted mean of per-class F1; classes with no true samples are
    excluded (and logged)."""
    preds, labels = _check_lengths(preds, labels)
    classes = np.unique(np.concatenate([np.unique(preds), np.unique(labels)]))
    scores = []
    for c in classes:
        tp = float(np.sum((preds == c) & (labels == c)))
        fp = float(np.sum((preds == c) & (labels != c)))
        fn = float(np.sum((preds != c) & (labels == c)))
        if tp + fn == 0:
            logger.warning("class %r has no support; excluded from macro-F1", c)
            continue
        scores.append(2 * tp / (2 * tp + fp + fn) if tp > 0 else 0.0)
    if not scores:
        raise ValueError("no class has support")
    return float(np.mean(scores))


def mae(preds, targets) -> float:
    preds, targets = _check_lengths(preds, targets)
    return float(np.abs(preds.astype(np.float64) - targets).mean())


def r2(preds, targets) -> float:
    """1 - SS_res / SS_tot; the constant mean predictor scores exactly 0."""
    preds, targets = _check_lengths(preds, targets)
    targets = targets.astype(np.float64)
    ss_res = float(((targets - preds) ** 2).sum())
    ss_tot = float(((targets - targets.mean()) ** 2).sum())
    if ss_tot == 0:
        raise ValueError("constant targets: R^2 undefined")
    return 1.0 - ss_res / ss_tot
