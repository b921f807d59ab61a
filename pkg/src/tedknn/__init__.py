"""Label- and explanation-aware embeddings with kernel-weighted kNN prediction."""

__version__ = "0.1.0"
