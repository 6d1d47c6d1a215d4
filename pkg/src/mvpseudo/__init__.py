"""Multi-view pseudo-labeling and iterative self-training."""

__version__ = "0.1.0"
