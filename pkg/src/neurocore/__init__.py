"""Event-driven behavioural simulator of a mixed-signal neuromorphic core."""

__version__ = "0.1.0"
