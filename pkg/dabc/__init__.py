"""Default Argument Breaking Change (DABC) detection toolkit."""

__version__ = "0.1.0"
