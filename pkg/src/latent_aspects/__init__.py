"""Unsupervised latent aspect detection for review text.

An LDA aspect model is trained by collapsed Gibbs sampling on unlabeled
reviews; unseen reviews, including ones whose aspect words were removed,
are assigned a ranked list of aspects by fold-in sampling.

Modules
-------
corpus            tokenization, filtering, stemming, vocabulary and corpus I/O
sampler           Gibbs training, fold-in inference, collapsed joint
model_selection   UMass coherence and the sweep over K
similarity        Resnik similarity over a loadable taxonomy
evaluation        SemEval loading, masking sweep, ranking metrics
synthetic         generative simulator and exact posterior oracle
cli               ``latent-aspects`` command
"""
from .corpus import Corpus, PreprocessConfig, Review, Vocabulary, build_corpus
from .errors import DataError, InvariantError
from .sampler import AspectModel, fold_in, phi, predict_aspect, train

__version__ = "0.1.0"

__all__ = [
    "AspectModel",
    "Corpus",
    "DataError",
    "InvariantError",
    "PreprocessConfig",
    "Review",
    "Vocabulary",
    "build_corpus",
    "fold_in",
    "phi",
    "predict_aspect",
    "train",
]
