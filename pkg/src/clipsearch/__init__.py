"""clipsearch: self-hosted interactive video retrieval engine."""

__version__ = "0.1.0"
