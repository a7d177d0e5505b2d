"""1-D convolutional sound encoder.

A stack of conv/ReLU/pool layers over the raw waveform, global average
pooling over time into the fixed-size sound embedding, then two
ReLU+FC blocks producing the sound context vector used by the attention
module.  Fully convolutional: output sizes depend only on the config,
never on the waveform length.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import layers
from ..errors import ConfigError

# (out_channels, kernel, stride, pool); pool 1 means no pooling.
# The published encoder this follows specifies only the eighth conv width
# and the head dims; kernel/stride/pool values below are a documented
# stand-in following the common 1-D audio encoder lineage.
DEFAULT_CONV_LAYERS = (
    (16, 64, 2, 8),
    (32, 32, 2, 8),
    (64, 16, 2, 1),
    (128, 8, 2, 1),
    (256, 4, 2, 4),
    (512, 4, 2, 1),
    (1024, 4, 2, 1),
    (1000, 8, 2, 1),
)


@dataclass(frozen=True)
class SoundNetConfig:
    conv_layers: tuple = DEFAULT_CONV_LAYERS
    final_conv_channels: int = 1000
    context_dim: int = 512
    head_hidden: int = 512

    def __post_init__(self):
        if not self.conv_layers:
            raise ConfigError("sound encoder needs at least one conv layer")
        if self.conv_layers[-1][0] != self.final_conv_channels:
            raise ConfigError(
                f"last conv layer emits {self.conv_layers[-1][0]} channels, "
                f"expected final_conv_channels={self.final_conv_channels}"
            )
        for ch, k, s, p in self.conv_layers:
            if min(ch, k, s, p) < 1:
                raise ConfigError(f"invalid conv layer spec {(ch, k, s, p)}")

    def min_input_length(self) -> int:
        """Smallest waveform length that yields a nonempty final activation."""
        need = 1
        for _, k, s, p in reversed(self.conv_layers):
            need = need * p  # pool needs p inputs per output
            need = (need - 1) * s + k
        return need

    def to_dict(self) -> dict:
        return {
            "conv_layers": [list(l) for l in self.conv_layers],
            "final_conv_channels": self.final_conv_channels,
            "context_dim": self.context_dim,
            "head_hidden": self.head_hidden,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SoundNetConfig":
        return cls(
            conv_layers=tuple(tuple(l) for l in d["conv_layers"]),
            final_conv_channels=d["final_conv_channels"],
            context_dim=d["context_dim"],
            head_hidden=d["head_hidden"],
        )


class SoundNet:
    """Forward/backward passes over a flat parameter dict."""

    def __init__(self, config: SoundNetConfig, prefix: str = "sound"):
        self.config = config
        self.prefix = prefix

    def param_shapes(self) -> dict:
        shapes = {}
        in_ch = 1
        for i, (ch, k, _, _) in enumerate(self.config.conv_layers):
            shapes[f"{self.prefix}.conv{i}.w"] = (ch, in_ch, k)
            shapes[f"{self.prefix}.conv{i}.b"] = (ch,)
            in_ch = ch
        c = self.config
        shapes[f"{self.prefix}.fc1.w"] = (c.head_hidden, c.final_conv_channels)
        shapes[f"{self.prefix}.fc1.b"] = (c.head_hidden,)
        shapes[f"{self.prefix}.fc2.w"] = (c.context_dim, c.head_hidden)
        shapes[f"{self.prefix}.fc2.b"] = (c.context_dim,)
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

    def forward(self, waveform: np.ndarray, params: dict, want_cache: bool = False):
        """Returns (f_s, h[, cache]). waveform is a 1-D array."""
        x = np.asarray(waveform, dtype=np.float64)
        if x.ndim != 1:
            raise ValueError(f"expected a 1-D waveform, got shape {x.shape}")
        if len(x) < self.config.min_input_length():
            raise ValueError(
                f"waveform of {len(x)} samples is shorter than the encoder's "
                f"minimal receptive field ({self.config.min_input_length()} samples)"
            )
        cache = []
        act = x[None, :]
        for i, (_, _, stride, pool) in enumerate(self.config.conv_layers):
            w = params[f"{self.prefix}.conv{i}.w"]
            b = params[f"{self.prefix}.conv{i}.b"]
            act, c_conv = layers.conv1d_forward(act, w, b, stride)
            act, c_relu = layers.relu_forward(act)
            c_pool = None
            if pool > 1:
                act, c_pool = layers.maxpool1d_forward(act, pool)
            cache.append((c_conv, c_relu, c_pool))
        f_s, c_gap = layers.gap_forward(act)
        a1, c_r1 = layers.relu_forward(f_s)
        z1, c_f1 = layers.fc_forward(a1, params[f"{self.prefix}.fc1.w"], params[f"{self.prefix}.fc1.b"])
        a2, c_r2 = layers.relu_forward(z1)
        h, c_f2 = layers.fc_forward(a2, params[f"{self.prefix}.fc2.w"], params[f"{self.prefix}.fc2.b"])
        if not want_cache:
            return f_s, h
        return f_s, h, (cache, c_gap, c_r1, c_f1, c_r2, c_f2)

    def backward(self, cache, g_fs: np.ndarray, g_h: np.ndarray, grads: dict) -> None:
        """Accumulate parameter gradients for upstream d/d(f_s) and d/d(h)."""
        conv_caches, c_gap, c_r1, c_f1, c_r2, c_f2 = cache
        p = self.prefix
        ga2, gw, gb = layers.fc_backward(c_f2, g_h)
        grads[f"{p}.fc2.w"] += gw
        grads[f"{p}.fc2.b"] += gb
        gz1 = layers.relu_backward(c_r2, ga2)
        ga1, gw, gb = layers.fc_backward(c_f1, gz1)
        grads[f"{p}.fc1.w"] += gw
        grads[f"{p}.fc1.b"] += gb
        g = g_fs + layers.relu_backward(c_r1, ga1)
        g = layers.gap_backward(c_gap, g)
        for i in range(len(self.config.conv_layers) - 1, -1, -1):
            c_conv, c_relu, c_pool = conv_caches[i]
            if c_pool is not None:
                g = layers.maxpool1d_backward(c_pool, g)
            g = layers.relu_backward(c_relu, g)
            g, gw, gb = layers.conv1d_backward(c_conv, g)
            grads[f"{p}.conv{i}.w"] += gw
            grads[f"{p}.conv{i}.b"] += gb
