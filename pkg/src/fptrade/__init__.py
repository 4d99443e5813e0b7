"""Pairs-trading backtest driven by first-passage thresholds on the spread of normalized rates."""

__version__ = "0.1.0"
