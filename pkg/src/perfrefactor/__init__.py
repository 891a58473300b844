"""Multi-objective refactoring of software architectures for performance and reliability."""

__version__ = "0.1.0"
