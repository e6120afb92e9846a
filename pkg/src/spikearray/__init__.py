"""Event-driven emulator for large-scale neuromorphic spiking-array hardware."""

__version__ = "0.1.0"
