"""Expert-routed video quality assessment with artifact localization."""

__version__ = "0.1.0"
