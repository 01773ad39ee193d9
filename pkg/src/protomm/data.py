"""Temporally aligned multimodal time-series: types, resampling, windowing,
synthetic generation, and the on-disk manifest format.

A manifest directory holds one little-endian float32 binary record per
window (per-modality T x C blocks concatenated in manifest order) plus a
UTF-8 JSON sidecar describing shapes, rates, labels and split/task.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)


class Modality(str, Enum):
    PPG = "PPG"
    ACCEL = "ACCEL"


MODALITY_CHANNELS = {Modality.PPG: 1, Modality.ACCEL: 3}

SPLITS = ("train", "val", "test")
TASKS = ("stress2", "stress4", "activity2", "activity9", "hr_regression", "none")


@dataclass
class TimeSeriesWindow:
    samples: np.ndarray  # (T, C)
    sample_rate_hz: float
    modality: Modality

    def __post_init__(self):
        self.samples = np.asarray(self.samples)
        if self.samples.ndim != 2:
            raise ValueError(f"samples must be (T, C), got shape {self.samples.shape}")
        expected = MODALITY_CHANNELS[self.modality]
        if self.samples.shape[1] != expected:
            raise ValueError(
                f"{self.modality.value} expects {expected} channels, got {self.samples.shape[1]}"
            )
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError(f"non-finite values in {self.modality.value} window")

    @property
    def n_timesteps(self) -> int:
        return self.samples.shape[0]

    @property
    def duration_s(self) -> float:
        return self.n_timesteps / self.sample_rate_hz


@dataclass
class MultimodalSample:
    windows: dict  # Modality -> TimeSeriesWindow
    subject_id: str
    window_start_s: float = 0.0
    label: object = None

    def __post_init__(self):
        if len(self.windows) < 1:
            raise ValueError("a sample needs at least one modality")


@dataclass
class DatasetManifest:
    samples: list
    split: str = "train"
    task: str = "none"

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}")
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")

    def subjects(self):
        return sorted({s.subject_id for s in self.samples})

    def labels(self):
        return sorted({s.label for s in self.samples if s.label is not None}, key=str)

    def modalities(self):
        mods = set()
        for s in self.samples:
            mods |= set(s.windows)
        return mods


# ---------------------------------------------------------------------------
# resampling and windowing
# ---------------------------------------------------------------------------

def resample(window: TimeSeriesWindow, target_hz: float) -> TimeSeriesWindow:
    """Linear-interpolation resampling on the original time grid."""
    if target_hz <= 0:
        raise ValueError("target_hz must be positive")
    if window.n_timesteps == 0:
        raise ValueError("cannot resample an empty window")
    if not np.all(np.isfinite(window.samples)):
        raise ValueError("non-finite values in input window")
    if target_hz == window.sample_rate_hz:
        return TimeSeriesWindow(window.samples.copy(), target_hz, window.modality)
    T = window.n_timesteps
    T_out = int(round(T * target_hz / window.sample_rate_hz))
    t_in = np.arange(T) / window.sample_rate_hz
    t_out = np.arange(T_out) / target_hz
    out = np.empty((T_out, window.samples.shape[1]), dtype=window.samples.dtype)
    for c in range(window.samples.shape[1]):
        out[:, c] = np.interp(t_out, t_in, window.samples[:, c])
    return TimeSeriesWindow(out, target_hz, window.modality)


def segment_stream(
    streams: dict,
    window_s: float,
    stride_s: float,
    subject_id: str = "",
    label_fn=None,
) -> list:
    """Cut a continuous multimodal recording into aligned windows.

    streams: Modality -> TimeSeriesWindow holding the full recording.
    label_fn: optional callable (start_s, end_s) -> label or None; windows
    whose label_fn returns None are dropped.
    """
    if stride_s <= 0:
        raise ValueError("stride_s must be positive")
    duration = min(w.duration_s for w in streams.values())
    if duration < window_s:
        logger.warning(
            "stream of %.2f s shorter than window of %.2f s; no windows produced",
            duration, window_s,
        )
        return []
    count = int(math.floor((duration - window_s) / stride_s + 1e-9)) + 1
    samples = []
    for i in range(count):
        start_s = i * stride_s
        label = None
        if label_fn is not None:
            label = label_fn(start_s, start_s + window_s)
            if label is None:
                continue
        windows = {}
        for mod, stream in streams.items():
            i0 = int(round(start_s * stream.sample_rate_hz))
            n = int(round(window_s * stream.sample_rate_hz))
            windows[mod] = TimeSeriesWindow(
                stream.samples[i0 : i0 + n].copy(), stream.sample_rate_hz, mod
            )
        samples.append(MultimodalSample(windows, subject_id, start_s, label))
    return samples


# ---------------------------------------------------------------------------
# synthetic generation
# ---------------------------------------------------------------------------

@dataclass
class SyntheticGenConfig:
    n_subjects: int = 8
    n_latent_states: int = 4
    shared_fraction: float = 0.7
    duration_s: float = 160.0
    sample_rate_hz: float = 50.0
    noise_sigma: float = 0.5
    seed: int = 0
    window_s: float = 8.0
    stay_prob: float = 0.5

    def __post_init__(self):
        if self.n_latent_states < 2:
            raise ValueError("n_latent_states must be >= 2")
        if not 0.0 <= self.shared_fraction <= 1.0:
            raise ValueError("shared_fraction must lie in [0, 1]")


def _state_templates(n_states: int, t: np.ndarray, rng: np.random.Generator):
    """One oscillatory template per (state, modality): distinct frequency,
    amplitude, per-channel phase, and a state-dependent offset."""
    templates = {}
    for mod in (Modality.PPG, Modality.ACCEL):
        n_ch = MODALITY_CHANNELS[mod]
        per_state = []
        for k in range(n_states):
            freq = 0.6 + 0.7 * k + rng.uniform(0, 0.3)
            amp = 0.8 + 0.4 * rng.random()
            offset = 0.8 * (k - (n_states - 1) / 2)
            phases = rng.uniform(0, 2 * np.pi, size=n_ch)
            sig = amp * np.sin(2 * np.pi * freq * t[:, None] + phases[None, :]) + offset
            per_state.append(sig.astype(np.float32))
        templates[mod] = per_state
    return templates


N_PRIVATE_MODES = 16


def _private_templates(t: np.ndarray, rng: np.random.Generator):
    """Modality-private oscillation modes: a fixed set of oscillations that
    occupy the same frequency band and offset range as the state templates.
    Each window independently activates one mode per modality, so the modes
    carry no cross-modal information and no state information — within a
    single modality they are spectrally confusable with the state
    component, but across modalities only the state is consistent."""
    templates = {}
    freqs = np.linspace(0.45, 3.3, N_PRIVATE_MODES)
    for mod in (Modality.PPG, Modality.ACCEL):
        n_ch = MODALITY_CHANNELS[mod]
        per_mode = []
        for freq in freqs:
            freq = freq + rng.uniform(-0.05, 0.05)
            amp = rng.uniform(2.0, 3.0)
            offset = rng.uniform(-1.5, 1.5)
            phases = rng.uniform(0, 2 * np.pi, size=n_ch)
            sig = amp * np.sin(2 * np.pi * freq * t[:, None] + phases[None, :]) + offset
            per_mode.append(sig.astype(np.float32))
        templates[mod] = per_mode
    return templates


def generate_synthetic(config: SyntheticGenConfig) -> DatasetManifest:
    """Hidden-Markov latent states drive both modalities; the state is the label.

    Each window mixes a state-conditioned shared template with one of
    N_PRIVATE_MODES modality-private oscillation modes at ratio
    shared_fraction : 1 - shared_fraction, plus Gaussian noise.  The
    private mode is drawn independently per window and modality.  Pure
    function of the config: the same seed yields bit-identical manifests.
    """
    cfg = config
    rng = np.random.default_rng(cfg.seed)
    n_per_win = int(round(cfg.window_s * cfg.sample_rate_hz))
    t = np.arange(n_per_win) / cfg.sample_rate_hz
    shared = _state_templates(cfg.n_latent_states, t, rng)
    private = _private_templates(t, rng)

    n_windows = int(cfg.duration_s // cfg.window_s)
    samples = []
    for subj in range(cfg.n_subjects):
        srng = np.random.default_rng([cfg.seed, 1 + subj])
        state = int(srng.integers(cfg.n_latent_states))
        for w in range(n_windows):
            windows = {}
            for mod in (Modality.PPG, Modality.ACCEL):
                mode = int(srng.integers(N_PRIVATE_MODES))
                sig = (
                    cfg.shared_fraction * shared[mod][state]
                    + (1.0 - cfg.shared_fraction) * private[mod][mode]
                )
                if cfg.noise_sigma > 0:
                    sig = sig + cfg.noise_sigma * srng.standard_normal(sig.shape).astype(np.float32)
                windows[mod] = TimeSeriesWindow(
                    sig.astype(np.float32), cfg.sample_rate_hz, mod
                )
            samples.append(
                MultimodalSample(windows, f"synth{subj:03d}", w * cfg.window_s, int(state))
            )
            # Markov transition between windows
            if srng.random() > cfg.stay_prob:
                others = [s for s in range(cfg.n_latent_states) if s != state]
                state = int(others[srng.integers(len(others))])
    return DatasetManifest(samples, split="train", task="none")


# ---------------------------------------------------------------------------
# on-disk manifest format
# ---------------------------------------------------------------------------

def save_manifest(manifest: DatasetManifest, out_dir) -> Path:
    out_dir = Path(out_dir)
    (out_dir / "records").mkdir(parents=True, exist_ok=True)
    entries = []
    rates = set()
    for i, sample in enumerate(manifest.samples):
        rel = f"records/{i:06d}.bin"
        blocks = []
        mods = {}
        for mod in sorted(sample.windows, key=lambda m: m.value):
            w = sample.windows[mod]
            blocks.append(np.ascontiguousarray(w.samples, dtype="<f4"))
            mods[mod.value] = {
                "shape": list(w.samples.shape),
                "sample_rate_hz": w.sample_rate_hz,
            }
            rates.add(w.sample_rate_hz)
        with open(out_dir / rel, "wb") as f:
            for b in blocks:
                f.write(b.tobytes())
        entries.append(
            {
                "record": rel,
                "subject_id": sample.subject_id,
                "window_start_s": sample.window_start_s,
                "label": sample.label,
                "modalities": mods,
            }
        )
    sidecar = {
        "samples": entries,
        "split": manifest.split,
        "task": manifest.task,
        "sample_rate_hz": rates.pop() if len(rates) == 1 else None,
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as f:
        json.dump(sidecar, f, indent=1)
    return out_dir


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    with open(path / "manifest.json", encoding="utf-8") as f:
        sidecar = json.load(f)
    samples = []
    for entry in sidecar["samples"]:
        raw = np.fromfile(path / entry["record"], dtype="<f4")
        windows = {}
        offset = 0
        for mod_name, meta in entry["modalities"].items():
            T, C = meta["shape"]
            block = raw[offset : offset + T * C].reshape(T, C)
            offset += T * C
            mod = Modality(mod_name)
            windows[mod] = TimeSeriesWindow(block, meta["sample_rate_hz"], mod)
        samples.append(
            MultimodalSample(
                windows, entry["subject_id"], entry["window_start_s"], entry["label"]
            )
        )
    return DatasetManifest(samples, split=sidecar["split"], task=sidecar["task"])
