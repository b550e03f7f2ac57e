"""Strong-PUF simulation, modeling attacks and clone discrimination."""

__version__ = "0.1.0"
