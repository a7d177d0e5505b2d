from .sound import SoundNet, SoundNetConfig
from .visual import VisualNet, VisualConfig

__all__ = ["SoundNet", "SoundNetConfig", "VisualNet", "VisualConfig"]
