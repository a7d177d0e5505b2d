"""Synthetic audio-visual datasets for desk-scale training and evaluation.

Each class pairs a waveform signature (a chord of sinusoids plus noise)
with a colored glyph rendered at a random position on a noisy canvas.
The confound mode additionally stamps a fixed high-contrast texture band
onto every frame of one designated class, which reliably induces the
self-reinforced false-localization behavior that a small amount of
supervision is meant to correct.

Everything is driven by a single seed; identical specs produce
byte-identical datasets.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import AudioClip, save_audio
from .data import Box, ManifestRecord, SampleAnnotation, SubjectAnnotation, save_annotation, save_manifest
from .errors import ConfigError
from .images import save_frame

GLYPH_SHAPES = ("square", "circle", "triangle", "cross")
GLYPH_COLORS = (
    (0.70, 0.35, 0.35),
    (0.35, 0.65, 0.38),
    (0.38, 0.45, 0.70),
    (0.66, 0.60, 0.30),
)


@dataclass(frozen=True)
class ClassSpec:
    name: str
    freqs: tuple
    shape: str
    color: tuple
    noise_level: float = 0.02

    def __post_init__(self):
        if self.shape not in GLYPH_SHAPES:
            raise ConfigError(f"unknown glyph shape {self.shape!r}")
        if not self.freqs:
            raise ConfigError(f"class {self.name!r} needs at least one frequency")


@dataclass(frozen=True)
class SyntheticSpec:
    classes: tuple
    canvas: int = 48
    glyph_size: int = 16
    sample_rate: int = 8000
    clip_duration_s: float = 2.0
    train_count: int = 500
    test_count: int = 100
    seed: int = 0
    subjects: int = 3
    jitter_frac: float = 0.05
    confound_class: str | None = None
    background_patch: int = 4
    background_noise: float = 0.02
    color_jitter: float = 0.22

    def __post_init__(self):
        sigs = [c.freqs for c in self.classes]
        if len(set(sigs)) != len(sigs):
            raise ConfigError("class waveform signatures must be pairwise distinct")
        if self.glyph_size > self.canvas:
            raise ConfigError(
                f"glyph of {self.glyph_size}px does not fit a {self.canvas}px canvas"
            )
        names = [c.name for c in self.classes]
        if len(set(names)) != len(names):
            raise ConfigError("class names must be unique")
        if self.confound_class is not None and self.confound_class not in names:
            raise ConfigError(f"confound class {self.confound_class!r} not in class list")

    def to_dict(self) -> dict:
        return {
            "classes": [
                {
                    "name": c.name,
                    "freqs": list(c.freqs),
                    "shape": c.shape,
                    "color": list(c.color),
                    "noise_level": c.noise_level,
                }
                for c in self.classes
            ],
            "canvas": self.canvas,
            "glyph_size": self.glyph_size,
            "sample_rate": self.sample_rate,
            "clip_duration_s": self.clip_duration_s,
            "train_count": self.train_count,
            "test_count": self.test_count,
            "seed": self.seed,
            "subjects": self.subjects,
            "jitter_frac": self.jitter_frac,
            "confound_class": self.confound_class,
            "background_patch": self.background_patch,
            "background_noise": self.background_noise,
            "color_jitter": self.color_jitter,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        return cls(
            classes=tuple(
                ClassSpec(
                    name=c["name"],
                    freqs=tuple(c["freqs"]),
                    shape=c["shape"],
                    color=tuple(c["color"]),
                    noise_level=c.get("noise_level", 0.02),
                )
                for c in d["classes"]
            ),
            **{k: v for k, v in d.items() if k != "classes"},
        )


def default_classes(count: int = 4) -> tuple:
    """Build `count` distinct classes from the shape/color/frequency tables."""
    classes = []
    for i in range(count):
        base = 320.0 * (1.22 ** i)
        classes.append(
            ClassSpec(
                name=f"class{i}",
                freqs=(round(base, 1), round(base * 1.5, 1)),
                shape=GLYPH_SHAPES[i % len(GLYPH_SHAPES)],
                color=GLYPH_COLORS[(i // len(GLYPH_SHAPES) + i) % len(GLYPH_COLORS)],
            )
        )
    return tuple(classes)


def glyph_mask(shape: str, size: int) -> np.ndarray:
    """Boolean (size, size) mask for a glyph shape."""
    yy, xx = np.mgrid[0:size, 0:size]
    c = (size - 1) / 2.0
    if shape == "square":
        return np.ones((size, size), dtype=bool)
    if shape == "circle":
        return (yy - c) ** 2 + (xx - c) ** 2 <= (size / 2.0) ** 2
    if shape == "triangle":
        # upward triangle: row y spans a width growing linearly with y
        half = (yy + 1) * (size / 2.0) / size
        return np.abs(xx - c) <= half
    if shape == "cross":
        t = max(1, size // 3)
        bar_v = np.abs(xx - c) <= t / 2.0
        bar_h = np.abs(yy - c) <= t / 2.0
        return bar_v | bar_h
    raise ConfigError(f"unknown glyph shape {shape!r}")


def patch_background(
    canvas: int, patch: int, noise: float, rng: np.random.Generator, width: int | None = None
) -> np.ndarray:
    """Coarse random color patches plus fine speckle.

    The patch mosaic gives every feature-grid cell its own color so an
    untrained network has no systematically salient region.
    """
    width = canvas if width is None else width
    gh = -(-canvas // patch)
    gw = -(-width // patch)
    coarse = rng.uniform(0.0, 1.0, size=(3, gh, gw))
    bg = np.repeat(np.repeat(coarse, patch, axis=1), patch, axis=2)[:, :canvas, :width]
    bg = bg + rng.uniform(-noise, noise, size=(canvas, width))[None]
    return np.clip(bg, 0.0, 1.0)


def render_frame(
    spec: SyntheticSpec,
    cls: ClassSpec,
    glyph_xy: tuple,
    rng: np.random.Generator,
) -> np.ndarray:
    """Render one (3, H, W) frame: patch background, optional confound
    band, and the class glyph at glyph_xy = (x, y) of its top-left corner."""
    c = spec.canvas
    frame = patch_background(c, spec.background_patch, spec.background_noise, rng)
    color = np.clip(
        np.asarray(cls.color) + rng.uniform(-spec.color_jitter, spec.color_jitter, 3), 0.0, 1.0
    )
    if spec.confound_class is not None and cls.name == spec.confound_class:
        band = confound_band(c)
        frame[:, band[0] : band[1], :] = _stripe_texture(c, band)
    x0, y0 = glyph_xy
    mask = glyph_mask(cls.shape, spec.glyph_size)
    region = frame[:, y0 : y0 + spec.glyph_size, x0 : x0 + spec.glyph_size]
    for ch in range(3):
        region[ch][mask] = color[ch]
    return frame


def confound_band(canvas: int) -> tuple:
    """Row span [lo, hi) of the fixed confounder texture (bottom quarter)."""
    return (canvas - canvas // 4, canvas)


def _stripe_texture(canvas: int, band: tuple) -> np.ndarray:
    rows = band[1] - band[0]
    stripe = (np.arange(rows)[:, None] // 2) % 2
    tex = np.where(stripe == 0, 0.95, 0.05)
    tex = np.broadcast_to(tex, (rows, canvas))
    return np.broadcast_to(tex[None, :, :], (3, rows, canvas))


def class_waveform(
    cls: ClassSpec, sample_rate: int, duration_s: float, rng: np.random.Generator
) -> np.ndarray:
    """Chord of the class frequencies with random phases plus white noise,
    peak-normalized to 0.9."""
    n = int(round(sample_rate * duration_s))
    t = np.arange(n) / sample_rate
    x = np.zeros(n)
    for f in cls.freqs:
        phase = rng.uniform(0, 2 * np.pi)
        x += np.sin(2 * np.pi * f * t + phase)
    x /= len(cls.freqs)
    x += cls.noise_level * rng.standard_normal(n)
    peak = np.abs(x).max()
    if peak > 0:
        x = 0.9 * x / peak
    return x


def _glyph_position(spec: SyntheticSpec, cls: ClassSpec, rng: np.random.Generator) -> tuple:
    c, s = spec.canvas, spec.glyph_size
    y_max = c - s
    if spec.confound_class is not None and cls.name == spec.confound_class:
        y_max = confound_band(c)[0] - s  # keep the glyph clear of the band
    x0 = int(rng.integers(0, c - s + 1))
    y0 = int(rng.integers(0, y_max + 1))
    return x0, y0


def _jittered_subjects(spec: SyntheticSpec, true_box: Box, rng: np.random.Generator) -> tuple:
    subs = []
    c = spec.canvas
    j = spec.jitter_frac
    for k in range(spec.subjects):
        dx = int(round(rng.uniform(-j, j) * true_box.w))
        dy = int(round(rng.uniform(-j, j) * true_box.h))
        x = min(max(true_box.x + dx, 0), c - 1)
        y = min(max(true_box.y + dy, 0), c - 1)
        w = min(true_box.w, c - x)
        h = min(true_box.h, c - y)
        subs.append(
            SubjectAnnotation(subject_id=f"subj_{k}", tag="object", boxes=(Box(x, y, w, h),))
        )
    return tuple(subs)


def generate_synthetic(spec: SyntheticSpec, out_dir) -> dict:
    """Write frames, clips, annotations, and train/test manifests.

    Returns {"train_manifest": path, "test_manifest": path, "spec": path}.
    """
    out = Path(out_dir)
    for sub in ("frames", "audio", "annotations"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)
    manifests = {}
    for split, count in (("train", spec.train_count), ("test", spec.test_count)):
        records = []
        for i in range(count):
            cls = spec.classes[i % len(spec.classes)]
            sid = f"{split}_{i:04d}"
            glyph_xy = _glyph_position(spec, cls, rng)
            frame = render_frame(spec, cls, glyph_xy, rng)
            wave = class_waveform(cls, spec.sample_rate, spec.clip_duration_s, rng)
            true_box = Box(glyph_xy[0], glyph_xy[1], spec.glyph_size, spec.glyph_size)
            ann = SampleAnnotation(
                id=sid,
                subjects=_jittered_subjects(spec, true_box, rng),
                true_box=true_box,
            )
            frame_path = out / "frames" / f"{sid}.png"
            audio_path = out / "audio" / f"{sid}.wav"
            ann_path = out / "annotations" / f"{sid}.json"
            save_frame(frame_path, frame)
            save_audio(audio_path, AudioClip(samples=wave, sample_rate=spec.sample_rate))
            save_annotation(ann_path, ann)
            records.append(
                ManifestRecord(
                    id=sid,
                    frame_path=frame_path,
                    audio_path=audio_path,
                    center_time_s=spec.clip_duration_s / 2.0,
                    annotation_ref=ann_path,
                    label=cls.name,
                )
            )
        mpath = out / f"manifest_{split}.jsonl"
        save_manifest(mpath, records, base=out)
        manifests[f"{split}_manifest"] = mpath
    spec_path = out / "dataset.json"
    spec_path.write_text(json.dumps(spec.to_dict(), indent=2) + "\n")
    manifests["spec"] = spec_path
    return manifests


def generate_orbit_sequence(
    cls: ClassSpec,
    out_dir,
    height: int = 96,
    n_frames: int = 200,
    fps: float = 10.0,
    start_lon: float = 170.0,
    deg_per_frame: float = 1.0,
    lat: float = 0.0,
    glyph_size: int = 16,
    background_patch: int = 4,
    background_noise: float = 0.02,
    sample_rate: int = 8000,
    seed: int = 0,
) -> dict:
    """Equirectangular sequence with the class glyph orbiting in longitude
    while its waveform plays; used by the panning application tests.

    Writes frames/%05d.png, audio.wav, timing.json, and truth.csv
    (frame, timestamp, longitude, latitude).
    """
    out = Path(out_dir)
    (out / "frames").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    width = 2 * height
    mask = glyph_mask(cls.shape, glyph_size)
    timestamps = []
    truth = []
    for i in range(n_frames):
        lon = ((start_lon + deg_per_frame * i) + 180.0) % 360.0 - 180.0
        col = (lon + 180.0) / 360.0 * width
        row = (90.0 - lat) / 180.0 * height
        frame = patch_background(height, background_patch, background_noise, rng, width=width)
        x0 = int(round(col)) - glyph_size // 2
        y0 = min(max(int(round(row)) - glyph_size // 2, 0), height - glyph_size)
        for dy in range(glyph_size):
            for dx in range(glyph_size):
                if mask[dy, dx]:
                    frame[:, y0 + dy, (x0 + dx) % width] = cls.color
        save_frame(out / "frames" / f"{i:05d}.png", frame)
        ts = i / fps
        timestamps.append(ts)
        truth.append((i, ts, lon, lat))
    duration = n_frames / fps
    wave = class_waveform(cls, sample_rate, duration, rng)
    save_audio(out / "audio.wav", AudioClip(samples=wave, sample_rate=sample_rate))
    (out / "timing.json").write_text(json.dumps({"fps": fps, "timestamps": timestamps}) + "\n")
    with open(out / "truth.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame", "timestamp", "longitude", "latitude"])
        writer.writerows(truth)
    return {
        "frames_dir": out / "frames",
        "audio": out / "audio.wav",
        "timing": out / "timing.json",
        "truth": out / "truth.csv",
    }
