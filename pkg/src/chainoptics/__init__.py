"""Linear optics in a 1D tight-binding chain via local impurities."""

__version__ = "0.1.0"
