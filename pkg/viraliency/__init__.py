"""viraliency: learned top-N average pooling for virality ranking."""

__version__ = "0.1.0"
