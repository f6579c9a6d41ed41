"""Orthogonal time-frequency division multiplexing (OTFDM) link simulator."""

from .grid import FrameConfig
from .waveform import Waveform

__all__ = ["FrameConfig", "Waveform"]
__version__ = "0.1.0"
