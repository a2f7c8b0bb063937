"""Recursive graph autoencoder: fixed-size embeddings for graphs of any size."""

__version__ = "0.1.0"
