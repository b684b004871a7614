"""Mixture-attention Siamese transformer for video polyp segmentation, in numpy."""

__version__ = "0.1.0"
