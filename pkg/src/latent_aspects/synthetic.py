"""Corpus simulator with planted ground truth, and an exact posterior oracle.

Two generative modes are supported:

``per_review``
    each review picks a single aspect from its mixture and draws every word
    from that aspect's word distribution (a mixture of unigrams).
``per_word``
    every word draws its own aspect (standard LDA, which the sampler assumes).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from ._util import atomic_write_text, dump_json, make_rng
from .corpus import Corpus, Review, Vocabulary
from .sampler import log_joint

PER_REVIEW = "per_review"
PER_WORD = "per_word"
MODES = (PER_REVIEW, PER_WORD)

MAX_ENUMERATION = 10**6


def sample_dirichlet(dim: int, concentration: float, seed=None) -> np.ndarray:
    """One draw from a symmetric Dirichlet via normalized Gamma(concentration, 1) variates."""
    if dim < 2:
        raise ValueError("dim must be >= 2")
    if not concentration > 0:
        raise ValueError("concentration must be positive")
    rng = make_rng(seed)
    g = rng.standard_gamma(concentration, size=dim)
    total = g.sum()
    if total == 0.0:
        # every variate underflowed (tiny concentration); put the mass on the largest log-draw
        g = np.zeros(dim)
        g[rng.integers(dim)] = 1.0
        total = 1.0
    return g / total


def disjoint_phi(K: int, V: int) -> np.ndarray:
    """Aspect-word matrix with each aspect uniform over its own contiguous block of words."""
    if V % K:
        raise ValueError("V must be a multiple of K")
    block = V // K
    phi = np.zeros((K, V))
    for k in range(K):
        phi[k, k * block : (k + 1) * block] = 1.0 / block
    return phi


@dataclass
class GroundTruth:
    K: int
    V: int
    phi_true: np.ndarray
    theta_true: np.ndarray
    mode: str
    assignments: list[np.ndarray] = field(repr=False)
    seed: int = 0

    def word_index(self, vocabulary: Vocabulary) -> np.ndarray:
        """Planted word index (the ``N`` in ``wN``) of each vocabulary entry."""
        return np.array([int(w[1:]) for w in vocabulary.words])

    def phi_for(self, vocabulary: Vocabulary) -> np.ndarray:
        """Planted distributions restricted to ``vocabulary`` columns and renormalized."""
        sub = self.phi_true[:, self.word_index(vocabulary)]
        return sub / sub.sum(axis=1, keepdims=True)

    def to_json(self) -> str:
        return dump_json(
            {
                "K": self.K,
                "V": self.V,
                "mode": self.mode,
                "seed": self.seed,
                "phi_true": self.phi_true.tolist(),
                "theta_true": self.theta_true.tolist(),
                "assignments": [a.tolist() for a in self.assignments],
            }
        )

    def save(self, path) -> None:
        atomic_write_text(path, self.to_json())


def generate(
    K: int,
    V: int,
    n_docs: int,
    doc_len: int,
    alpha: float,
    beta: float,
    mode: str = PER_WORD,
    seed: int = 0,
    phi: np.ndarray | None = None,
) -> tuple[Corpus, GroundTruth]:
    """Sample a corpus from the two-stage generative process.

    Words are named ``w0 .. w{V-1}``; the returned vocabulary holds only the
    words that occur, in planted-index order. Pass ``phi`` to plant fixed
    aspect-word distributions instead of drawing them from ``Dir(beta)``.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if min(K, V, n_docs, doc_len) < 1:
        raise ValueError("K, V, n_docs and doc_len must be positive")
    rng = make_rng(seed)
    if phi is None:
        phi = np.stack([sample_dirichlet(V, beta, rng) for _ in range(K)])
    else:
        phi = np.asarray(phi, dtype=float)
        if phi.shape != (K, V):
            raise ValueError("phi must have shape (K, V)")
    theta = np.stack([sample_dirichlet(K, alpha, rng) for _ in range(n_docs)])

    docs, assignments = [], []
    for d in range(n_docs):
        if mode == PER_REVIEW:
            z = np.full(doc_len, rng.choice(K, p=theta[d]))
        else:
            z = rng.choice(K, size=doc_len, p=theta[d])
        # inverse-CDF draws per token, one uniform each
        u = rng.random(doc_len)
        cdf = np.cumsum(phi[z], axis=1)
        w = np.minimum((cdf < (u * cdf[:, -1])[:, None]).sum(axis=1), V - 1)
        docs.append(w)
        assignments.append(z.astype(np.int64))

    used = np.unique(np.concatenate(docs))
    remap = -np.ones(V, dtype=np.int64)
    remap[used] = np.arange(used.shape[0])
    reviews = [
        Review(tokens=remap[w].tolist(), raw=" ".join(f"w{x}" for x in w), review_id=str(d))
        for d, w in enumerate(docs)
    ]
    vocab = Vocabulary.from_token_lists([r.tokens for r in reviews], [f"w{x}" for x in used])
    corpus = Corpus(reviews, vocab, source=f"synthetic:{mode}:seed={seed}")
    truth = GroundTruth(K, V, phi, theta, mode, assignments, seed if isinstance(seed, int) else 0)
    return corpus, truth


def exact_posterior(corpus_or_docs, K: int, alpha: float, beta: float, V: int | None = None) -> dict:
    """Enumerate ``P(z | w)`` over every assignment vector (flat token order)."""
    docs = corpus_or_docs.docs if isinstance(corpus_or_docs, Corpus) else [list(d) for d in corpus_or_docs]
    if V is None:
        V = len(corpus_or_docs.vocabulary) if isinstance(corpus_or_docs, Corpus) else 1 + max(max(d) for d in docs if len(d))
    n = sum(len(d) for d in docs)
    if K**n > MAX_ENUMERATION:
        raise ValueError(f"{K}^{n} assignments exceeds the enumeration limit {MAX_ENUMERATION}")
    configs = list(itertools.product(range(K), repeat=n))
    logp = np.array([log_joint(docs, np.array(z, dtype=np.int64), K, V, alpha, beta) for z in configs])
    p = np.exp(logp - logp.max())
    p /= p.sum()
    return dict(zip(configs, p))


def posterior_marginals(posterior: dict, K: int) -> np.ndarray:
    """Per-token ``P(z_i = k | w)`` from an enumerated posterior; shape (tokens, K)."""
    n = len(next(iter(posterior)))
    out = np.zeros((n, K))
    for z, p in posterior.items():
        out[np.arange(n), z] += p
    return out


def posterior_coassignment(posterior: dict) -> np.ndarray:
    """``P(z_i == z_j | w)`` for every token pair; invariant to topic relabeling."""
    n = len(next(iter(posterior)))
    out = np.zeros((n, n))
    for z, p in posterior.items():
        z = np.asarray(z)
        out += p * (z[:, None] == z[None, :])
    return out
