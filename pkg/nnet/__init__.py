"""Segmentation network built from inverted residual blocks."""
