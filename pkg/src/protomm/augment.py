"""Stochastic window transforms and the per-modality view sampler.

Eight transforms: jitter, scale, rotate3d, negate, time_reverse,
channel_shuffle, segment_shuffle, time_warp.  rotate3d and channel_shuffle
apply only to the 3-axis accelerometer signal; every transform applies to
it.  One transform, drawn uniformly from the applicable set, is applied
per view.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .data import Modality, MultimodalSample, TimeSeriesWindow

AUGMENTATION_NAMES = (
    "jitter",
    "scale",
    "rotate3d",
    "negate",
    "time_reverse",
    "channel_shuffle",
    "segment_shuffle",
    "time_warp",
)

_BOTH = frozenset({Modality.PPG, Modality.ACCEL})
_ACCEL_ONLY = frozenset({Modality.ACCEL})


@dataclass(frozen=True)
class AugmentationSpec:
    name: str
    params: dict = field(default_factory=dict)
    applicable_modalities: frozenset = _BOTH

    def __post_init__(self):
        if self.name not in AUGMENTATION_NAMES:
            raise ValueError(f"unknown augmentation {self.name!r}")
        if self.name in ("rotate3d", "channel_shuffle") and Modality.PPG in self.applicable_modalities:
            raise ValueError(f"{self.name} is not applicable to single-channel PPG")


def default_augmentation_suite() -> list:
    """Default parameters are common time-series SSL practice, not taken
    from any reference configuration; all are overridable."""
    return [
        AugmentationSpec("jitter", {"sigma_rel": 0.05}),
        AugmentationSpec("scale", {"sigma": 0.1}),
        AugmentationSpec("rotate3d", {}, _ACCEL_ONLY),
        AugmentationSpec("negate", {}),
        AugmentationSpec("time_reverse", {}),
        AugmentationSpec("channel_shuffle", {}, _ACCEL_ONLY),
        AugmentationSpec("segment_shuffle", {"n_segments": 4}),
        AugmentationSpec("time_warp", {"n_knots": 4, "sigma": 0.2}),
    ]


@dataclass
class ViewSamplerConfig:
    num_views_A: int = 2
    specs: list = field(default_factory=default_augmentation_suite)

    def __post_init__(self):
        if self.num_views_A < 2:
            raise ValueError("num_views_A must be >= 2")

    def applicable(self, modality: Modality) -> list:
        return [s for s in self.specs if modality in s.applicable_modalities]


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------

def _random_rotation_matrix(rng: np.random.Generator) -> np.ndarray:
    """Uniform over SO(3) via a normalized random quaternion."""
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def _time_warp(x: np.ndarray, n_knots: int, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Smooth monotone reparameterization of the time axis.

    Per-timestep speeds come from a cubic spline through n_knots + 2 anchor
    points with log-normal values; their cumulative sum, normalized to the
    original extent, gives the warped sampling positions.
    """
    T = x.shape[0]
    anchors = np.linspace(0, T - 1, n_knots + 2)
    log_speeds = rng.normal(0.0, sigma, size=n_knots + 2)
    speeds = np.exp(CubicSpline(anchors, log_speeds)(np.arange(T)))
    warped = np.concatenate([[0.0], np.cumsum(speeds)[:-1]])
    warped *= (T - 1) / warped[-1] if warped[-1] > 0 else 1.0
    out = np.empty_like(x)
    grid = np.arange(T, dtype=float)
    for c in range(x.shape[1]):
        out[:, c] = np.interp(warped, grid, x[:, c])
    return out


def apply(spec: AugmentationSpec, window: TimeSeriesWindow, rng: np.random.Generator) -> TimeSeriesWindow:
    """Apply one transform; output shape, rate, and modality match the input."""
    if window.modality not in spec.applicable_modalities:
        raise ValueError(f"{spec.name} is not applicable to {window.modality.value}")
    x = window.samples
    p = spec.params
    if spec.name == "jitter":
        sigma = p.get("sigma_rel", 0.05) * x.std(axis=0, keepdims=True)
        y = x + sigma * rng.standard_normal(x.shape)
    elif spec.name == "scale":
        factors = rng.normal(1.0, p.get("sigma", 0.1), size=(1, x.shape[1]))
        y = x * factors
    elif spec.name == "rotate3d":
        y = x @ _random_rotation_matrix(rng).T
    elif spec.name == "negate":
        y = -x
    elif spec.name == "time_reverse":
        y = x[::-1].copy()
    elif spec.name == "channel_shuffle":
        y = x[:, rng.permutation(x.shape[1])]
    elif spec.name == "segment_shuffle":
        k = p.get("n_segments", 4)
        parts = np.array_split(x, k, axis=0)
        y = np.concatenate([parts[i] for i in rng.permutation(k)], axis=0)
    elif spec.name == "time_warp":
        y = _time_warp(x, p.get("n_knots", 4), p.get("sigma", 0.2), rng)
    else:  # pragma: no cover - guarded in __post_init__
        raise ValueError(spec.name)
    return TimeSeriesWindow(y.astype(x.dtype, copy=False), window.sample_rate_hz, window.modality)


def choose_spec(pool: list, rng: np.random.Generator) -> AugmentationSpec:
    """Equal-probability draw from the applicable spec pool."""
    return pool[rng.integers(len(pool))]


def sample_views(sample: MultimodalSample, cfg: ViewSamplerConfig, rng: np.random.Generator) -> dict:
    """Draw num_views_A independent augmented views per modality.

    Returns {(modality, view_index): TimeSeriesWindow}; each view applies
    one spec chosen uniformly among those applicable to the modality.
    """
    views = {}
    for mod in sorted(sample.windows, key=lambda m: m.value):
        pool = cfg.applicable(mod)
        if not pool:
            raise ValueError(f"no applicable augmentations for {mod.value}")
        for a in range(cfg.num_views_A):
            spec = choose_spec(pool, rng)
            views[(mod, a)] = apply(spec, sample.windows[mod], rng)
    return views
