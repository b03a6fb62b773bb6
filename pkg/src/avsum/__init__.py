"""Affect-aware video summarization: emotion recognition, affective
features and fully convolutional summarizers with an evaluation kit."""

__version__ = "0.1.0"
