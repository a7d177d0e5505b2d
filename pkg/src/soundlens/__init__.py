"""soundlens: attention-based sound-source localization in visual scenes."""

__version__ = "0.1.0"
