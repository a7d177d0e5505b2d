"""Audio ingestion: WAV loading, linear resampling, and window extraction.

All operations are pure; clips are treated as immutable after load.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .errors import AudioFormatError

DEFAULT_SAMPLE_RATE = 22050
DEFAULT_WINDOW_S = 20.0


@dataclass(frozen=True)
class AudioClip:
    """Mono waveform with samples normalized to [-1, 1]."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        if self.samples.ndim != 1 or len(self.samples) < 1:
            raise AudioFormatError("clip must hold at least one mono sample")
        if self.sample_rate <= 0:
            raise AudioFormatError(f"sample rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(self.samples)):
            raise AudioFormatError("clip contains non-finite samples")

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class WaveformWindow:
    """Fixed-duration slice of a clip, zero-padded outside the source."""

    samples: np.ndarray
    sample_rate: int
    center_time_s: float
    duration_s: float


_INT_SCALES = {np.int16: 32768.0, np.int32: 2147483648.0}


def load_audio(path) -> AudioClip:
    """Load a linear-PCM WAV file as a normalized mono clip.

    Accepts 8/16/32-bit integer and 32-bit float PCM with any channel
    count; channels are averaged to mono and integer formats rescaled to
    [-1, 1].
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"audio file not found: {path}")
    try:
        rate, data = wavfile.read(str(path))
    except Exception as exc:
        raise AudioFormatError(f"unsupported or malformed WAV file {path}: {exc}") from exc
    if data.size == 0:
        raise AudioFormatError(f"zero-length audio in {path}")
    if data.dtype == np.uint8:  # 8-bit WAV is unsigned
        scaled = (data.astype(np.float64) - 128.0) / 128.0
    elif data.dtype.type in _INT_SCALES:
        scaled = data.astype(np.float64) / _INT_SCALES[data.dtype.type]
    elif data.dtype in (np.float32, np.float64):
        scaled = np.clip(data.astype(np.float64), -1.0, 1.0)
    else:
        raise AudioFormatError(f"unsupported WAV sample format {data.dtype} in {path}")
    if scaled.ndim == 2:  # (frames, channels) -> mono
        scaled = scaled.mean(axis=1)
    return AudioClip(samples=scaled, sample_rate=int(rate))


def save_audio(path, clip: AudioClip) -> None:
    """Write a clip as 16-bit PCM WAV."""
    data = np.clip(np.round(clip.samples * 32767.0), -32768, 32767).astype(np.int16)
    wavfile.write(str(path), clip.sample_rate, data)


def resample(clip: AudioClip, target_rate: int) -> AudioClip:
    """Linear-interpolation resampling to target_rate."""
    if target_rate <= 0:
        raise AudioFormatError(f"target rate must be positive, got {target_rate}")
    if target_rate == clip.sample_rate:
        return clip
    n_out = int(round(len(clip.samples) * target_rate / clip.sample_rate))
    n_out = max(1, n_out)
    t_new = np.arange(n_out) / target_rate
    t_old = np.arange(len(clip.samples)) / clip.sample_rate
    return AudioClip(samples=np.interp(t_new, t_old, clip.samples), sample_rate=int(target_rate))


def extract_window(clip: AudioClip, center_time_s: float, duration_s: float = DEFAULT_WINDOW_S) -> WaveformWindow:
    """Extract a window centered at center_time_s, zero-padded outside the clip."""
    if duration_s <= 0:
        raise ValueError(f"window duration must be positive, got {duration_s}")
    if not 0.0 <= center_time_s <= clip.duration_s:
        raise ValueError(
            f"window center {center_time_s}s outside clip span [0, {clip.duration_s}]s"
        )
    n = int(round(duration_s * clip.sample_rate))
    start = int(round(center_time_s * clip.sample_rate)) - n // 2
    out = np.zeros(n)
    lo = max(start, 0)
    hi = min(start + n, len(clip.samples))
    if hi > lo:
        out[lo - start : hi - start] = clip.samples[lo:hi]
    return WaveformWindow(
        samples=out,
        sample_rate=clip.sample_rate,
        center_time_s=center_time_s,
        duration_s=duration_s,
    )
