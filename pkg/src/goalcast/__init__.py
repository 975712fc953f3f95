"""Soccer match outcome prediction from leave-one-out team features."""

__version__ = "0.1.0"
