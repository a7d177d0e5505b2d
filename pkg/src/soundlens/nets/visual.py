"""2-D convolutional visual encoder.

Stages of 3x3 same-padded convolutions with ReLU, each followed by a
max-pool downsample, produce the spatial feature grid whose channel count
must equal the sound context dimension.  A separate two-block ReLU+FC
head maps the attention-pooled context vector to the visual embedding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import layers
from ..errors import ConfigError

# VGG-16 shape truncated at its fifth conv stage: pools after the first
# four stages give a total downsample of 16; the last stage's final conv
# is the feature grid.
DEFAULT_STAGES = (
    ((64, 64), 2),
    ((128, 128), 2),
    ((256, 256, 256), 2),
    ((512, 512, 512), 2),
    ((512, 512, 512), 1),
)


@dataclass(frozen=True)
class VisualConfig:
    stages: tuple = DEFAULT_STAGES  # ((channels, ...), pool) per stage
    grid_channels: int = 512
    embedding_dim: int = 1000
    head_hidden: int = 512
    kernel: int = 3
    input_mean: tuple = (0.5, 0.5, 0.5)

    def __post_init__(self):
        if not self.stages:
            raise ConfigError("visual encoder needs at least one stage")
        last = self.stages[-1][0][-1]
        if last != self.grid_channels:
            raise ConfigError(
                f"last conv emits {last} channels, expected grid_channels={self.grid_channels}"
            )
        if self.kernel % 2 != 1:
            raise ConfigError("conv kernel must be odd for same padding")

    @property
    def downsample(self) -> int:
        d = 1
        for _, pool in self.stages:
            d *= pool
        return d

    def grid_shape(self, h: int, w: int) -> tuple:
        """(H', W') for an H x W input under this config."""
        for _, pool in self.stages:
            h, w = h // pool, w // pool
        return h, w

    def to_dict(self) -> dict:
        return {
            "stages": [[list(chs), pool] for chs, pool in self.stages],
            "grid_channels": self.grid_channels,
            "embedding_dim": self.embedding_dim,
            "head_hidden": self.head_hidden,
            "kernel": self.kernel,
            "input_mean": list(self.input_mean),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VisualConfig":
        return cls(
            stages=tuple((tuple(chs), pool) for chs, pool in d["stages"]),
            grid_channels=d["grid_channels"],
            embedding_dim=d["embedding_dim"],
            head_hidden=d["head_hidden"],
            kernel=d["kernel"],
            input_mean=tuple(d["input_mean"]),
        )


class VisualNet:
    def __init__(self, config: VisualConfig, prefix: str = "visual"):
        self.config = config
        self.prefix = prefix

    def param_shapes(self) -> dict:
        shapes = {}
        k = self.config.kernel
        in_ch = 3
        for si, (channels, _) in enumerate(self.config.stages):
            for ci, ch in enumerate(channels):
                shapes[f"{self.prefix}.s{si}c{ci}.w"] = (ch, in_ch, k, k)
                shapes[f"{self.prefix}.s{si}c{ci}.b"] = (ch,)
                in_ch = ch
        c = self.config
        shapes[f"{self.prefix}.head.fc1.w"] = (c.head_hidden, c.grid_channels)
        shapes[f"{self.prefix}.head.fc1.b"] = (c.head_hidden,)
        shapes[f"{self.prefix}.head.fc2.w"] = (c.embedding_dim, c.head_hidden)
        shapes[f"{self.prefix}.head.fc2.b"] = (c.embedding_dim,)
        return shapes

    def init_params(self, rng: np.random.Generator) -> dict:
        params = {}
        for name, shape in self.param_shapes().items():
            if name.endswith(".b"):
                params[name] = np.zeros(shape)
            else:
                fan_in = int(np.prod(shape[1:]))
                params[name] = layers.uniform_init(rng, shape, fan_in)
        return params

    def forward(self, frame: np.ndarray, params: dict, want_cache: bool = False):
        """Frame (3, H, W) in [0, 1] -> feature grid (D, H', W')[, cache]."""
        x = np.asarray(frame, dtype=np.float64)
        if x.ndim != 3 or x.shape[0] != 3:
            raise ValueError(f"expected a (3, H, W) frame, got shape {x.shape}")
        ds = self.config.downsample
        if x.shape[1] < ds or x.shape[2] < ds:
            raise ValueError(
                f"frame {x.shape[1]}x{x.shape[2]} smaller than total downsample factor {ds}"
            )
        x = x - np.asarray(self.config.input_mean)[:, None, None]
        pad = self.config.kernel // 2
        cache = []
        for si, (channels, pool) in enumerate(self.config.stages):
            for ci in range(len(channels)):
                w = params[f"{self.prefix}.s{si}c{ci}.w"]
                b = params[f"{self.prefix}.s{si}c{ci}.b"]
                x, c_conv = layers.conv2d_forward(x, w, b, pad)
                x, c_relu = layers.relu_forward(x)
                cache.append(("conv", si, ci, c_conv, c_relu))
            if pool > 1:
                x, c_pool = layers.maxpool2d_forward(x, pool)
                cache.append(("pool", si, None, c_pool, None))
        if not want_cache:
            return x
        return x, cache

    def backward(self, cache, g_grid: np.ndarray, grads: dict) -> None:
        g = g_grid
        for kind, si, ci, c1, c2 in reversed(cache):
            if kind == "pool":
                g = layers.maxpool2d_backward(c1, g)
            else:
                g = layers.relu_backward(c2, g)
                g, gw, gb = layers.conv2d_backward(c1, g)
                grads[f"{self.prefix}.s{si}c{ci}.w"] += gw
                grads[f"{self.prefix}.s{si}c{ci}.b"] += gb

    def embed_context(self, z: np.ndarray, params: dict, want_cache: bool = False):
        """Map a pooled context vector to the visual embedding f_v."""
        z = np.asarray(z, dtype=np.float64)
        if z.shape != (self.config.grid_channels,):
            raise ValueError(
                f"context vector has shape {z.shape}, expected ({self.config.grid_channels},)"
            )
        if not np.all(np.isfinite(z)):
            raise ValueError("context vector contains non-finite values")
        p = self.prefix
        a1, c_r1 = layers.relu_forward(z)
        y1, c_f1 = layers.fc_forward(a1, params[f"{p}.head.fc1.w"], params[f"{p}.head.fc1.b"])
        a2, c_r2 = layers.relu_forward(y1)
        f_v, c_f2 = layers.fc_forward(a2, params[f"{p}.head.fc2.w"], params[f"{p}.head.fc2.b"])
        if not want_cache:
            return f_v
        return f_v, (c_r1, c_f1, c_r2, c_f2)

    def embed_context_backward(self, cache, g_fv: np.ndarray, grads: dict) -> np.ndarray:
        """Returns the gradient with respect to the context vector z."""
        c_r1, c_f1, c_r2, c_f2 = cache
        p = self.prefix
        ga2, gw, gb = layers.fc_backward(c_f2, g_fv)
        grads[f"{p}.head.fc2.w"] += gw
        grads[f"{p}.head.fc2.b"] += gb
        gy1 = layers.relu_backward(c_r2, ga2)
        ga1, gw, gb = layers.fc_backward(c_f1, gy1)
        grads[f"{p}.head.fc1.w"] += gw
        grads[f"{p}.head.fc1.b"] += gb
        return layers.relu_backward(c_r1, ga1)
