"""Detection-proposal toolkit for forward-looking sonar frames."""

__version__ = "0.1.0"
