"""Deep embedded clustering of precomputed contextual embeddings for
unsupervised induction of syntactic categories (token tags and
constituent-span labels)."""

__version__ = "0.1.0"

from . import checkpoint, dataio, dec, evaluation, feats, net, sae  # noqa: F401
