"""Adapters for the public WESAD and PPG-DaLiA recordings.

Both datasets ship one pickle per subject with wrist-worn blood volume
pulse (64 Hz, used as the PPG modality) and 3-axis accelerometry (32 Hz).
All signals are resampled to 50 Hz before windowing.
"""

from __future__ import annotations

import logging
import pickle
from collections import Counter
from pathlib import Path

import numpy as np

from .data import (
    DatasetManifest,
    Modality,
    MultimodalSample,
    TimeSeriesWindow,
    resample,
    segment_stream,
)

logger = logging.getLogger(__name__)

TARGET_HZ = 50.0

WESAD_LABEL_HZ = 700.0
WESAD_SESSIONS = {1: "Baseline", 2: "Stress", 3: "Amusement", 4: "Meditation"}

DALIA_ACTIVITY_HZ = 4.0
DALIA_ACTIVITIES = {
    0: "Transient",
    1: "Sitting",
    2: "Stairs",
    3: "TableSoccer",
    4: "Cycling",
    5: "Driving",
    6: "Lunch",
    7: "Walking",
    8: "Working",
}


def _subject_pickles(root_path) -> list:
    root = Path(root_path)
    out = []
    for sub in sorted(root.glob("S*")):
        if not sub.is_dir():
            continue
        pkl = sub / f"{sub.name}.pkl"
        if pkl.exists():
            out.append(pkl)
        else:
            logger.warning("missing recording for subject %s; skipped", sub.name)
    return out


def _wrist_streams(record: dict) -> dict:
    wrist = record["signal"]["wrist"]
    bvp = np.asarray(wrist["BVP"], dtype=np.float32).reshape(-1, 1)
    acc = np.asarray(wrist["ACC"], dtype=np.float32).reshape(-1, 3)
    return {
        Modality.PPG: resample(TimeSeriesWindow(bvp, 64.0, Modality.PPG), TARGET_HZ),
        Modality.ACCEL: resample(TimeSeriesWindow(acc, 32.0, Modality.ACCEL), TARGET_HZ),
    }


def _majority(values: np.ndarray):
    if values.size == 0:
        return None
    counts = Counter(values.tolist())
    return counts.most_common(1)[0][0]


def load_wesad(root_path, task: str) -> DatasetManifest:
    """Ingest WESAD for stress classification.

    stress4 keeps the four sessions {Stress, Baseline, Amusement, Meditation};
    stress2 drops Meditation and merges Baseline and Amusement into Non-stress.
    Windows are non-overlapping 1-minute segments labelled by the majority
    session code; windows dominated by transient/unknown codes are dropped.
    """
    if task not in ("stress2", "stress4"):
        raise ValueError(f"unsupported WESAD task {task!r}")
    kept = {1, 2, 3, 4} if task == "stress4" else {1, 2, 3}
    samples = []
    for pkl in _subject_pickles(root_path):
        with open(pkl, "rb") as f:
            record = pickle.load(f, encoding="latin1")
        labels = np.asarray(record["label"]).ravel()
        unknown = set(np.unique(labels).tolist()) - {0, 1, 2, 3, 4, 5, 6, 7}
        if unknown:
            raise ValueError(f"unknown WESAD session codes {sorted(unknown)} in {pkl}")
        streams = _wrist_streams(record)

        def label_fn(start_s, end_s):
            seg = labels[int(start_s * WESAD_LABEL_HZ) : int(end_s * WESAD_LABEL_HZ)]
            code = _majority(seg)
            if code not in kept:
                return None
            if task == "stress2":
                return "Stress" if code == 2 else "Non-stress"
            return WESAD_SESSIONS[code]

        samples.extend(
            segment_stream(streams, window_s=60.0, stride_s=60.0,
                           subject_id=pkl.parent.name, label_fn=label_fn)
        )
    return DatasetManifest(samples, split="train", task=task)


def load_dalia(root_path, task: str) -> DatasetManifest:
    """Ingest PPG-DaLiA for activity recognition or heart-rate regression.

    Windows are 8 s with a 2 s sliding step.  activity9 labels by the
    majority activity code (eight activities plus the transient class);
    hr_regression attaches the ground-truth heart rate of the matching
    8 s / 2 s window.
    """
    if task not in ("activity9", "hr_regression"):
        raise ValueError(f"unsupported PPG-DaLiA task {task!r}")
    root = Path(root_path)
    if (root / "PPG_FieldStudy").is_dir():
        root = root / "PPG_FieldStudy"
    samples = []
    for pkl in _subject_pickles(root):
        with open(pkl, "rb") as f:
            record = pickle.load(f, encoding="latin1")
        streams = _wrist_streams(record)

        if task == "activity9":
            activity = np.asarray(record["activity"]).ravel().astype(int)
            unknown = set(np.unique(activity).tolist()) - set(DALIA_ACTIVITIES)
            if unknown:
                raise ValueError(f"unknown activity codes {sorted(unknown)} in {pkl}")

            def label_fn(start_s, end_s):
                seg = activity[int(start_s * DALIA_ACTIVITY_HZ) : int(end_s * DALIA_ACTIVITY_HZ)]
                code = _majority(seg)
                return None if code is None else DALIA_ACTIVITIES[code]

        else:
            hr = np.asarray(record["label"], dtype=float).ravel()

            def label_fn(start_s, end_s):
                idx = int(round(start_s / 2.0))
                if idx >= len(hr) or not hr[idx] > 0:
                    return None
                return float(hr[idx])

        samples.extend(
            segment_stream(streams, window_s=8.0, stride_s=2.0,
                           subject_id=pkl.parent.name, label_fn=label_fn)
        )
    return DatasetManifest(samples, split="train", task=task)
