"""Scene-motion-aware action recognition on synthetic desk-scale data."""

__version__ = "0.1.0"
