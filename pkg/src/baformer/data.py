"""Feature sequences, ground-truth derivation, synthesis and file formats."""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BadMagicError,
    ConfigError,
    FormatError,
    LabelRangeError,
    LengthMismatchError,
    TruncatedPayloadError,
)

FEATURE_MAGIC = b"BAFT"
FEATURE_VERSION = 1
_FEATURE_HEADER = struct.Struct("<4sIII")


@dataclass
class FrameSequence:
    features: np.ndarray  # T x C0, float64
    labels: np.ndarray | None  # T, int64 in [0, K); None for unlabeled input
    video_id: str
    num_classes: int

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2 or self.features.shape[0] < 1:
            raise ValueError(f"{self.video_id}: features must be T x C0 with T >= 1")
        if self.labels is None:
            return
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(self.labels) != self.features.shape[0]:
            raise LengthMismatchError(
                f"{self.video_id}: {len(self.labels)} labels for {self.features.shape[0]} frames"
            )
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise LabelRangeError(f"{self.video_id}: label outside [0, {self.num_classes})")

    @property
    def T(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True)
class Segment:
    label: int
    start: int  # 1-based, inclusive
    end: int  # 1-based, inclusive

    @property
    def length(self) -> int:
        return self.end - self.start + 1


@dataclass
class GroundTruth:
    segments: list
    masks: np.ndarray  # N x T, {0, 1}
    transcript: list
    heatmap: np.ndarray  # T
    boundaries: list  # interior segment-start frames, 1-based
    sigma: float

    @property
    def labels(self) -> np.ndarray:
        return segments_to_labels(self.segments)


def labels_to_segments(labels) -> list:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        raise ValueError("empty label sequence")
    change = np.nonzero(np.diff(labels))[0] + 1
    starts = np.concatenate([[0], change])
    ends = np.concatenate([change, [len(labels)]])
    return [Segment(int(labels[s]), int(s) + 1, int(e)) for s, e in zip(starts, ends)]


def segments_to_labels(segments) -> np.ndarray:
    out = np.empty(segments[-1].end, dtype=np.int64)
    for seg in segments:
        out[seg.start - 1:seg.end] = seg.label
    return out


def boundary_heatmap(boundaries, T: int, sigma: float) -> np.ndarray:
    """Max-combined Gaussian bumps centred on 1-based boundary frames."""
    t = np.arange(1, T + 1, dtype=np.float64)
    if not len(boundaries):
        return np.zeros(T)
    b = np.asarray(boundaries, dtype=np.float64)[:, None]
    return np.exp(-((t[None, :] - b) ** 2) / (2.0 * sigma * sigma)).max(axis=0)


def derive_ground_truth(labels, sigma: float = 2.0) -> GroundTruth:
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    segments = labels_to_segments(labels)
    T = segments[-1].end
    masks = np.zeros((len(segments), T))
    for i, seg in enumerate(segments):
        masks[i, seg.start - 1:seg.end] = 1.0
    boundaries = [seg.start for seg in segments[1:]]
    return GroundTruth(
        segments=segments,
        masks=masks,
        transcript=[seg.label for seg in segments],
        heatmap=boundary_heatmap(boundaries, T, sigma),
        boundaries=boundaries,
        sigma=float(sigma),
    )


# ---------------------------------------------------------------- synthesis


@dataclass
class SynthConfig:
    num_videos: int = 4
    t_min: int = 200
    t_max: int = 200
    num_classes: int = 5
    feature_dim: int = 32
    seg_min: int = 20
    seg_max: int = 30
    noise: float = 0.5

    def validate(self):
        if self.num_classes < 2:
            raise ConfigError("data.num_classes must be >= 2")
        if self.num_videos < 1:
            raise ConfigError("data.num_videos must be >= 1")
        if not 1 <= self.t_min <= self.t_max:
            raise ConfigError(f"data: invalid T range [{self.t_min}, {self.t_max}]")
        if not 1 <= self.seg_min <= self.seg_max:
            raise ConfigError(f"data: invalid segment length range [{self.seg_min}, {self.seg_max}]")
        if self.seg_min > self.t_max:
            raise ConfigError(f"data: min segment length {self.seg_min} exceeds max T {self.t_max}")
        if self.feature_dim < 1:
            raise ConfigError("data.feature_dim must be >= 1")
        if self.noise < 0:
            raise ConfigError("data.noise must be >= 0")


def synthesize_dataset(config: SynthConfig, seed: int) -> list:
    """Prototype-plus-noise features over a no-self-transition label chain."""
    config.validate()
    rng = np.random.default_rng(seed)
    K = config.num_classes
    prototypes = rng.standard_normal((K, config.feature_dim))
    videos = []
    for v in range(config.num_videos):
        T = int(rng.integers(config.t_min, config.t_max + 1))
        labels = np.empty(T, dtype=np.int64)
        t = 0
        cls = int(rng.integers(K))
        while t < T:
            length = int(rng.integers(config.seg_min, config.seg_max + 1))
            labels[t:t + length] = cls
            t += length
            step = int(rng.integers(1, K))
            cls = (cls + step) % K
        feats = prototypes[labels] + config.noise * rng.standard_normal((T, config.feature_dim))
        # stored as float32 on disk; round here so files round-trip exactly
        feats = feats.astype(np.float32).astype(np.float64)
        videos.append(FrameSequence(feats, labels, f"video_{v:03d}", K))
    return videos


# -------------------------------------------------------------- file formats


def _atomic_write(path, payload: bytes):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)


def write_features(path, features):
    features = np.asarray(features)
    if features.ndim != 2:
        raise ValueError("features must be T x C0")
    T, C0 = features.shape
    body = np.ascontiguousarray(features, dtype="<f4").tobytes()
    _atomic_write(path, _FEATURE_HEADER.pack(FEATURE_MAGIC, FEATURE_VERSION, T, C0) + body)


def read_features(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 4 or raw[:4] != FEATURE_MAGIC:
        raise BadMagicError(f"{path}: bad magic")
    if len(raw) < _FEATURE_HEADER.size:
        raise TruncatedPayloadError(f"{path}: truncated header")
    _, version, T, C0 = _FEATURE_HEADER.unpack_from(raw)
    if version != FEATURE_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    need = T * C0 * 4
    body = raw[_FEATURE_HEADER.size:]
    if len(body) < need:
        raise TruncatedPayloadError(f"{path}: truncated payload ({len(body)} of {need} bytes)")
    if len(body) > need:
        raise FormatError(f"{path}: {len(body) - need} trailing bytes")
    return np.frombuffer(body, dtype="<f4").reshape(T, C0).astype(np.float64)


def write_labels(path, labels, num_classes: int):
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) and (labels.min() < 0 or labels.max() >= num_classes):
        raise LabelRangeError(f"label outside [0, {num_classes})")
    text = f"K={num_classes}\n" + "".join(f"{int(x)}\n" for x in labels)
    _atomic_write(path, text.encode("utf-8"))


def read_labels(path):
    """Return ``(labels, K)``."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("K="):
        raise BadMagicError(f"{path}: bad magic (expected 'K=<int>' header)")
    try:
        K = int(lines[0][2:])
        labels = np.array([int(s) for s in lines[1:] if s.strip()], dtype=np.int64)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    if len(labels) and (labels.min() < 0 or labels.max() >= K):
        raise LabelRangeError(f"{path}: label index outside [0, {K})")
    return labels, K


def load_sequence(feature_path, label_path, video_id: str) -> FrameSequence:
    features = read_features(feature_path)
    labels, K = read_labels(label_path)
    if len(labels) != features.shape[0]:
        raise LengthMismatchError(
            f"{video_id}: label file has {len(labels)} frames, features have {features.shape[0]}"
        )
    return FrameSequence(features, labels, video_id, K)


MANIFEST_NAME = "manifest.json"


def write_dataset(videos, out_dir) -> Path:
    out_dir = Path(out_dir)
    entries = []
    for video in videos:
        fpath = f"features/{video.video_id}.baft"
        lpath = f"labels/{video.video_id}.txt"
        write_features(out_dir / fpath, video.features)
        write_labels(out_dir / lpath, video.labels, video.num_classes)
        entries.append({"video_id": video.video_id, "feature_path": fpath, "label_path": lpath})
    manifest = out_dir / MANIFEST_NAME
    _atomic_write(manifest, (json.dumps(entries, indent=2) + "\n").encode("utf-8"))
    return manifest


def read_manifest(path) -> list:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    try:
        entries = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: {exc}") from None
    if not isinstance(entries, list):
        raise FormatError(f"{path}: manifest must be a JSON list")
    root = path.parent
    out = []
    for e in entries:
        try:
            out.append({
                "video_id": str(e["video_id"]),
                "feature_path": root / e["feature_path"],
                "label_path": root / e["label_path"],
            })
        except (KeyError, TypeError):
            raise FormatError(f"{path}: entry missing video_id/feature_path/label_path") from None
    return out


def load_dataset(path) -> list:
    return [load_sequence(e["feature_path"], e["label_path"], e["video_id"]) for e in read_manifest(path)]
