"""The two-stream localization model.

Wires the sound encoder, visual encoder, and attention module into the
training graph: a frame plus a positive/negative waveform pair yields the
distance-ratio loss, optionally gated with the supervised attention
cross-entropy, and analytic gradients for every parameter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import attention, losses
from .errors import ConfigError
from .nets import SoundNet, SoundNetConfig, VisualConfig, VisualNet


@dataclass(frozen=True)
class ModelConfig:
    sound: SoundNetConfig
    visual: VisualConfig
    mechanism: str = "cos"

    def __post_init__(self):
        if self.visual.grid_channels != self.sound.context_dim:
            raise ConfigError(
                f"feature grid channels ({self.visual.grid_channels}) must equal "
                f"the sound context dimension ({self.sound.context_dim})"
            )
        if self.visual.embedding_dim != self.sound.final_conv_channels:
            raise ConfigError(
                f"visual embedding dim ({self.visual.embedding_dim}) must equal "
                f"the sound embedding dim ({self.sound.final_conv_channels})"
            )
        if self.mechanism not in attention.MECHANISMS:
            raise ConfigError(f"unknown attention mechanism {self.mechanism!r}")

    def to_dict(self) -> dict:
        return {
            "sound": self.sound.to_dict(),
            "visual": self.visual.to_dict(),
            "mechanism": self.mechanism,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(
            sound=SoundNetConfig.from_dict(d["sound"]),
            visual=VisualConfig.from_dict(d["visual"]),
            mechanism=d["mechanism"],
        )


class TwoStreamModel:
    def __init__(self, config: ModelConfig):
        self.config = config
        self.sound_net = SoundNet(config.sound)
        self.visual_net = VisualNet(config.visual)

    def param_shapes(self) -> dict:
        shapes = self.sound_net.param_shapes()
        shapes.update(self.visual_net.param_shapes())
        return shapes

    def init_params(self, seed: int) -> dict:
        rng = np.random.default_rng(seed)
        params = self.sound_net.init_params(rng)
        params.update(self.visual_net.init_params(rng))
        return params

    def zero_grads(self) -> dict:
        return {name: np.zeros(shape) for name, shape in self.param_shapes().items()}

    def forward_pair(self, frame: np.ndarray, waveform: np.ndarray, params: dict) -> dict:
        """Inference pass for one frame/sound pair.

        Returns grid ("v", shape (D, H', W')), per-cell "scores" and
        "alpha" (length M), the pooled "z", and embeddings "f_v", "f_s",
        "h".
        """
        grid = self.visual_net.forward(frame, params)
        d, gh_, gw_ = grid.shape
        v = grid.reshape(d, gh_ * gw_).T  # (M, D) row-major over cells
        f_s, h = self.sound_net.forward(waveform, params)
        scores = attention.attention_scores(v, h, self.config.mechanism)
        alpha = attention.softmax_normalize(scores)
        z = attention.context_vector(v, alpha)
        f_v = self.visual_net.embed_context(z, params)
        return {
            "v": grid,
            "grid_hw": (gh_, gw_),
            "scores": scores,
            "alpha": alpha,
            "z": z,
            "f_v": f_v,
            "f_s": f_s,
            "h": h,
        }

    def localize(self, frame: np.ndarray, waveform: np.ndarray, params: dict) -> dict:
        """Forward pass returning grid-shaped score and attention maps."""
        out = self.forward_pair(frame, waveform, params)
        gh_, gw_ = out["grid_hw"]
        return {
            "scores": out["scores"].reshape(gh_, gw_),
            "alpha": out["alpha"].reshape(gh_, gw_),
        }

    def loss_and_grads(
        self,
        frame: np.ndarray,
        wave_pos: np.ndarray,
        wave_neg: np.ndarray,
        params: dict,
        alpha_gt: np.ndarray | None = None,
        weights=(1.0, 1.0),
        grads: dict | None = None,
    ):
        """Full forward/backward for one triplet.

        alpha_gt, when given, is the binary length-M grid supervision map.
        Gradients are accumulated into ``grads`` (created when omitted).
        Returns (LossBreakdown, grads, info dict).
        """
        w_u, w_s = float(weights[0]), float(weights[1])
        if grads is None:
            grads = self.zero_grads()

        grid, vis_cache = self.visual_net.forward(frame, params, want_cache=True)
        d, gh_, gw_ = grid.shape
        m = gh_ * gw_
        v = np.ascontiguousarray(grid.reshape(d, m).T)
        f_s_pos, h_pos, snd_cache_pos = self.sound_net.forward(wave_pos, params, want_cache=True)
        f_s_neg, h_neg, snd_cache_neg = self.sound_net.forward(wave_neg, params, want_cache=True)

        scores, att_cache = attention.attention_scores_forward(v, h_pos, self.config.mechanism)
        alpha = attention.softmax_normalize(scores)
        z = attention.context_vector(v, alpha)
        f_v, head_cache = self.visual_net.embed_context(z, params, want_cache=True)

        dists = losses.triplet_distances(f_v, f_s_pos, f_s_neg)
        l_u = losses.distance_ratio_loss(dists)
        lam = 0.0 if alpha_gt is None else 1.0
        l_s = 0.0
        if alpha_gt is not None:
            l_s = losses.supervised_attention_loss(alpha, alpha_gt)
        breakdown = losses.LossBreakdown(
            l_unsup=l_u, l_sup=l_s, lam=lam, l_total=w_u * l_u + lam * w_s * l_s
        )

        # Backward: distance-ratio term.
        g_dpos, g_dneg = losses.distance_ratio_loss_grad(dists)
        g_dpos *= w_u
        g_dneg *= w_u
        u_pos = f_v - f_s_pos
        u_neg = f_v - f_s_neg
        g_fv = np.zeros_like(f_v)
        g_fs_pos = np.zeros_like(f_s_pos)
        g_fs_neg = np.zeros_like(f_s_neg)
        if dists.d_pos > 0.0:
            dir_pos = u_pos / dists.d_pos
            g_fv += g_dpos * dir_pos
            g_fs_pos -= g_dpos * dir_pos
        if dists.d_neg > 0.0:
            dir_neg = u_neg / dists.d_neg
            g_fv += g_dneg * dir_neg
            g_fs_neg -= g_dneg * dir_neg

        # Through the visual head into (z) then (alpha, v).
        g_z = self.visual_net.embed_context_backward(head_cache, g_fv, grads)
        g_v, g_alpha = attention.context_vector_backward(v, alpha, g_z)

        # Supervised attention term adds to the alpha gradient.
        if alpha_gt is not None and lam * w_s != 0.0:
            g_alpha = g_alpha + (lam * w_s) * losses.supervised_attention_loss_grad(alpha, alpha_gt)

        g_scores = attention.softmax_backward(alpha, g_alpha)
        g_v_att, g_h = attention.attention_scores_backward(att_cache, g_scores)
        g_v += g_v_att

        g_grid = np.ascontiguousarray(g_v.T).reshape(d, gh_, gw_)
        self.visual_net.backward(vis_cache, g_grid, grads)
        self.sound_net.backward(snd_cache_pos, g_fs_pos, g_h, grads)
        self.sound_net.backward(snd_cache_neg, g_fs_neg, np.zeros_like(h_neg), grads)

        info = {"alpha": alpha, "scores": scores, "grid_hw": (gh_, gw_), "distances": dists}
        return breakdown, grads, info
