"""Offline exporter of contextualized word embeddings, treebank span
manifests and character n-gram vectors, in the sdec toolkit's file
formats."""

__version__ = "0.1.0"
