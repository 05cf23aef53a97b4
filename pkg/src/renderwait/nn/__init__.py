"""Minimal numpy layers, losses and optimiser for training the rendering classifier."""
