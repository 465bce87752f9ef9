"""realsr - unsupervised real-world super-resolution and its benchmark tooling."""

__version__ = "0.1.0"
