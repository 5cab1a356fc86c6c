"""Energy-efficiency optimization for RIS-assisted multiuser near-field downlinks."""

__version__ = "0.1.0"
