"""Laplacian pooling for graph neural networks, built on a small numpy autodiff."""

__version__ = "0.1.0"
