"""Named encoder presets.

"paper" mirrors the published architecture shapes (1000-d embeddings,
512-d context, downsample 16); "toy" is the desk-scale configuration used
by the test and acceptance suites (3 conv sound layers, 2 visual stages,
downsample 4).
"""

from __future__ import annotations

from .errors import ConfigError
from .model import ModelConfig
from .nets import SoundNetConfig, VisualConfig
from .nets.sound import DEFAULT_CONV_LAYERS
from .nets.visual import DEFAULT_STAGES

SOUND_PRESETS = {
    "paper": SoundNetConfig(
        conv_layers=DEFAULT_CONV_LAYERS,
        final_conv_channels=1000,
        context_dim=512,
        head_hidden=512,
    ),
    "toy": SoundNetConfig(
        conv_layers=((16, 64, 8, 4), (32, 16, 2, 2), (64, 8, 1, 1)),
        final_conv_channels=64,
        context_dim=32,
        head_hidden=48,
    ),
    "tiny": SoundNetConfig(
        conv_layers=((4, 8, 4, 2), (6, 4, 2, 1), (8, 3, 1, 1)),
        final_conv_channels=8,
        context_dim=6,
        head_hidden=7,
    ),
}

VISUAL_PRESETS = {
    "paper": VisualConfig(
        stages=DEFAULT_STAGES,
        grid_channels=512,
        embedding_dim=1000,
        head_hidden=512,
    ),
    "toy": VisualConfig(
        stages=(((16,), 2), ((32,), 2)),
        grid_channels=32,
        embedding_dim=64,
        head_hidden=48,
    ),
    "tiny": VisualConfig(
        stages=(((4,), 2), ((6,), 2)),
        grid_channels=6,
        embedding_dim=8,
        head_hidden=7,
    ),
}


def model_preset(name: str, mechanism: str = "cos") -> ModelConfig:
    if name not in SOUND_PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {sorted(SOUND_PRESETS)}")
    return ModelConfig(
        sound=SOUND_PRESETS[name],
        visual=VISUAL_PRESETS[name],
        mechanism=mechanism,
    )
