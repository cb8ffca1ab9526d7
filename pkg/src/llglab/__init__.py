"""Learning-gap corrections for out-of-sample R^2 of linear-in-target forecasts."""

__version__ = "0.1.0"
