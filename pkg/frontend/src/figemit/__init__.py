"""Figure emitter for tunnelkit data products."""

__version__ = "0.1.0"
