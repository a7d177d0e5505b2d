"""Triplet sampling, the optimization loop, and grid supervision targets.

Training is deterministic given the seed: batches and negative picks come
from one PCG64 generator whose state rides along in the checkpoint, batch
losses and gradients reduce in index order, and the optimizer walks
parameters sorted by name.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio import extract_window, load_audio, resample
from .checkpoint import Checkpoint, load_checkpoint, rng_from_json, rng_state_to_json, save_checkpoint
from .data import load_annotation
from .errors import ConfigError, InputError, TrainingDiverged
from .images import load_frame
from .metrics import consensus_map
from .model import ModelConfig, TwoStreamModel


@dataclass(frozen=True)
class TrainConfig:
    model: ModelConfig
    steps: int = 1000
    seed: int = 0
    learning_rate: float = 1e-4
    batch_size: int = 30
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    loss_weights: tuple = (1.0, 1.0)
    sample_rate: int = 8000
    window_s: float = 1.0
    consensus_count: int = 2

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 1 or self.steps < 0:
            raise ConfigError("learning rate, batch size, and steps must be positive")
        if self.sample_rate <= 0 or self.window_s <= 0:
            raise ConfigError("sample rate and window duration must be positive")

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "steps": self.steps,
            "seed": self.seed,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "adam_eps": self.adam_eps,
            "loss_weights": list(self.loss_weights),
            "sample_rate": self.sample_rate,
            "window_s": self.window_s,
            "consensus_count": self.consensus_count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        d["model"] = ModelConfig.from_dict(d["model"])
        d["loss_weights"] = tuple(d["loss_weights"])
        return cls(**d)


class DatasetCache:
    """Preloaded frames, positive windows, and grid supervision targets."""

    def __init__(self, records, config: TrainConfig, grid_hw=None):
        if not records:
            raise InputError("manifest holds no records")
        self.records = list(records)
        self.config = config
        self.frames = []
        self.windows = []
        self.gt_grids = []
        for rec in self.records:
            frame = load_frame(rec.frame_path)
            clip = load_audio(rec.audio_path)
            if clip.sample_rate != config.sample_rate:
                clip = resample(clip, config.sample_rate)
            window = extract_window(clip, rec.center_time_s, config.window_s)
            gt = None
            if rec.annotation_ref is not None:
                if grid_hw is None:
                    ds = config.model.visual.downsample
                    grid_hw = (frame.shape[1] // ds, frame.shape[2] // ds)
                ann = load_annotation(rec.annotation_ref)
                gt = supervision_grid(
                    ann, (frame.shape[1], frame.shape[2]), grid_hw, config.consensus_count
                )
            self.frames.append(frame)
            self.windows.append(window.samples)
            self.gt_grids.append(gt)

    def __len__(self):
        return len(self.records)


def supervision_grid(annotation, frame_hw, grid_hw, consensus_count=2) -> np.ndarray | None:
    """Grid-resolution binary attention target from a sample annotation.

    Pixels at full consensus (g >= 1) are max-pooled onto the feature
    grid: a cell is positive if any pixel it covers is.  Returns a
    length-M {0,1} vector, or None if no subject is object-tagged.
    """
    subjects = annotation.object_subjects()
    if not subjects:
        return None
    g = consensus_map(subjects, frame_hw, consensus_count)
    binary = g >= 1.0
    gh, gw = grid_hw
    sy = frame_hw[0] / gh
    sx = frame_hw[1] / gw
    grid = np.zeros((gh, gw))
    for i in range(gh):
        for j in range(gw):
            y0, y1 = int(i * sy), int((i + 1) * sy) if i < gh - 1 else frame_hw[0]
            x0, x1 = int(j * sx), int((j + 1) * sx) if j < gw - 1 else frame_hw[1]
            grid[i, j] = binary[y0:y1, x0:x1].any()
    return grid.reshape(-1)


def sample_triplet(dataset: DatasetCache, index: int, rng: np.random.Generator):
    """Positive window from the record's own audio; negative from a
    uniformly chosen different record (different label when labels exist)."""
    n = len(dataset)
    if n < 2:
        raise InputError("triplet sampling needs at least two records")
    rec = dataset.records[index]
    others = [k for k in range(n) if k != index]
    if rec.label is not None:
        diff = [k for k in others if dataset.records[k].label != rec.label]
        if diff:
            others = diff
    neg = others[int(rng.integers(0, len(others)))]
    return dataset.frames[index], dataset.windows[index], dataset.windows[neg], neg


def init_checkpoint(config: TrainConfig) -> Checkpoint:
    """Fresh checkpoint: seeded parameters, zeroed optimizer state."""
    model = TwoStreamModel(config.model)
    params = model.init_params(config.seed)
    rng = np.random.default_rng(config.seed + 1)  # data-order generator
    return Checkpoint(
        config={"train": config.to_dict()},
        step=0,
        rng_state=rng_state_to_json(rng),
        params=params,
        opt_m={k: np.zeros_like(v) for k, v in params.items()},
        opt_v={k: np.zeros_like(v) for k, v in params.items()},
        opt_t=0,
    )


def adam_step(params, grads, m, v, t, lr, beta1, beta2, eps):
    """One adaptive-moment update, walking parameters in sorted order."""
    for name in sorted(params):
        g = grads[name]
        m[name] = beta1 * m[name] + (1 - beta1) * g
        v[name] = beta2 * v[name] + (1 - beta2) * (g * g)
        mhat = m[name] / (1 - beta1**t)
        vhat = v[name] / (1 - beta2**t)
        params[name] -= lr * mhat / (np.sqrt(vhat) + eps)


def train(
    records,
    config: TrainConfig,
    resume: Checkpoint | None = None,
    log_path=None,
) -> Checkpoint:
    """Run the optimization loop over manifest records.

    Returns the final checkpoint; the per-step loss curve (step, L_U, L_S,
    L_total batch means) is written to log_path when given.
    """
    model = TwoStreamModel(config.model)
    dataset = DatasetCache(records, config)
    if resume is not None:
        ckpt = resume
        params = ckpt.params
        start = ckpt.step
        rng = rng_from_json(ckpt.rng_state)
    else:
        ckpt = init_checkpoint(config)
        params = ckpt.params
        start = 0
        rng = rng_from_json(ckpt.rng_state)
    m, v, t = ckpt.opt_m, ckpt.opt_v, ckpt.opt_t
    w_u, w_s = config.loss_weights

    log_rows = []
    n = len(dataset)
    for step in range(start, config.steps):
        indices = rng.integers(0, n, size=config.batch_size)
        grads = model.zero_grads()
        sum_u = sum_s = sum_total = 0.0
        n_sup = 0
        for idx in indices:
            frame, w_pos, w_neg, _ = sample_triplet(dataset, int(idx), rng)
            gt = dataset.gt_grids[int(idx)]
            breakdown, grads, _ = model.loss_and_grads(
                frame, w_pos, w_neg, params, alpha_gt=gt, weights=(w_u, w_s), grads=grads
            )
            sum_u += breakdown.l_unsup
            sum_s += breakdown.l_sup
            sum_total += breakdown.l_total
            n_sup += int(breakdown.lam > 0)
        scale = 1.0 / config.batch_size
        for name in grads:
            grads[name] *= scale
        batch_total = sum_total * scale
        if not np.isfinite(batch_total):
            raise TrainingDiverged(f"non-finite loss at step {step}")
        t += 1
        adam_step(params, grads, m, v, t, config.learning_rate, config.beta1, config.beta2, config.adam_eps)
        log_rows.append(
            (step, float(sum_u * scale), float(sum_s / n_sup) if n_sup else 0.0, float(batch_total))
        )

    ckpt = Checkpoint(
        config={"train": config.to_dict()},
        step=config.steps,
        rng_state=rng_state_to_json(rng),
        params=params,
        opt_m=m,
        opt_v=v,
        opt_t=t,
    )
    if log_path is not None:
        write_loss_log(log_path, log_rows)
    return ckpt


def write_loss_log(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "loss_unsup", "loss_sup", "loss_total"])
        for row in rows:
            writer.writerow([row[0], repr(row[1]), repr(row[2]), repr(row[3])])


def load_train_config(ckpt: Checkpoint) -> TrainConfig:
    return TrainConfig.from_dict(ckpt.config["train"])
