"""Collapsed Gibbs sampling for the latent-aspect (LDA) model.

Randomness: every sweep consumes one uniform per token, drawn in token order
from a PCG64 generator (see :func:`latent_aspects._util.make_rng`). Topic
draws invert the cumulative unnormalized conditional, so a seed fixes the
chain exactly.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np
from numba import njit
from scipy.special import gammaln

from ._util import atomic_write_text, csv_text, dump_json, make_rng
from .corpus import Corpus, Review, Vocabulary
from .errors import DataError, InvariantError

MODEL_FORMAT_VERSION = 1

DEFAULT_BETA = 0.01
DEFAULT_ITERATIONS = 1000
DEFAULT_BURN_IN = 200
DEFAULT_SAMPLE_LAG = 10
DEFAULT_FOLD_IN_ITERATIONS = 100


def default_alpha(K: int) -> float:
    return 5.0 / K


# -- kernels -----------------------------------------------------------------


@njit(cache=True)
def _draw(p, u):
    # p holds cumulative weights; return first index with p[k] > u.
    K = p.shape[0]
    k = 0
    while k < K - 1 and p[k] <= u:
        k += 1
    return k


@njit(cache=True)
def _sweeps(doc_ptr, words, z, n_dk, n_kw, n_k, alpha, beta, vbeta, uniforms, hist, trace):
    K = n_k.shape[0]
    p = np.empty(K)
    record = hist.shape[0] > 0
    tracing = trace.shape[0] > 0
    for s in range(uniforms.shape[0]):
        for d in range(doc_ptr.shape[0] - 1):
            for i in range(doc_ptr[d], doc_ptr[d + 1]):
                w = words[i]
                k = z[i]
                n_dk[d, k] -= 1
                n_kw[k, w] -= 1
                n_k[k] -= 1
                total = 0.0
                for t in range(K):
                    total += (n_dk[d, t] + alpha) * (n_kw[t, w] + beta) / (n_k[t] + vbeta)
                    p[t] = total
                k = _draw(p, uniforms[s, i] * total)
                z[i] = k
                n_dk[d, k] += 1
                n_kw[k, w] += 1
                n_k[k] += 1
        if record:
            for i in range(z.shape[0]):
                hist[i, z[i]] += 1
        if tracing:
            for i in range(z.shape[0]):
                trace[s, i] = z[i]


@njit(cache=True)
def _fold_in(words, z, phi, alpha, uniforms, burn_in):
    K = phi.shape[0]
    n_d = np.zeros(K, dtype=np.int64)
    for i in range(words.shape[0]):
        n_d[z[i]] += 1
    acc = np.zeros(K)
    n_acc = 0
    p = np.empty(K)
    for s in range(uniforms.shape[0]):
        for i in range(words.shape[0]):
            w = words[i]
            n_d[z[i]] -= 1
            total = 0.0
            for t in range(K):
                total += (n_d[t] + alpha) * phi[t, w]
                p[t] = total
            k = _draw(p, uniforms[s, i] * total)
            z[i] = k
            n_d[k] += 1
        if s >= burn_in:
            for t in range(K):
                acc[t] += n_d[t]
            n_acc += 1
    return acc / n_acc


# -- model -------------------------------------------------------------------


@dataclass(eq=False)
class AspectModel:
    """Trained topic-word statistics.

    ``n_kw`` and ``n_k`` are posterior-averaged counts, so they are floats in
    general. Point estimates are derived by :func:`phi`.
    """

    K: int
    alpha: float
    beta: float
    n_kw: np.ndarray
    n_k: np.ndarray
    vocabulary: Vocabulary
    iterations: int = 0
    seed: int = 0
    burn_in: int = 0
    sample_lag: int = 1

    @property
    def V(self) -> int:
        return self.n_kw.shape[1]

    @cached_property
    def phi(self) -> np.ndarray:
        return phi(self)

    def top_words(self, k: int = 5) -> list[list[tuple[int, float]]]:
        """For each aspect, the ``k`` most probable word ids (ties by ascending id)."""
        ph = self.phi
        ids = np.arange(self.V)
        out = []
        for row in ph:
            order = np.lexsort((ids, -row))[:k]
            out.append([(int(w), float(row[w])) for w in order])
        return out

    def to_json(self) -> str:
        ks, ws = np.nonzero(self.n_kw)
        triplets = [[int(k), int(w), float(self.n_kw[k, w])] for k, w in zip(ks, ws)]
        return dump_json(
            {
                "version": MODEL_FORMAT_VERSION,
                "K": self.K,
                "alpha": self.alpha,
                "beta": self.beta,
                "seed": self.seed,
                "iterations": self.iterations,
                "burn_in": self.burn_in,
                "sample_lag": self.sample_lag,
                "vocabulary": self.vocabulary.words,
                "n_k": [float(x) for x in self.n_k],
                "n_kw": triplets,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "AspectModel":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DataError(f"model file is not valid JSON: {exc}") from exc
        if obj.get("version") != MODEL_FORMAT_VERSION:
            raise DataError(f"unsupported model version {obj.get('version')!r}")
        K = int(obj["K"])
        vocab = Vocabulary(obj["vocabulary"])
        n_kw = np.zeros((K, len(vocab)))
        for k, w, c in obj["n_kw"]:
            n_kw[k, w] = c
        n_k = np.asarray(obj["n_k"], dtype=float)
        if n_k.shape != (K,):
            raise DataError("n_k length does not match K")
        return cls(
            K=K,
            alpha=float(obj["alpha"]),
            beta=float(obj["beta"]),
            n_kw=n_kw,
            n_k=n_k,
            vocabulary=vocab,
            iterations=int(obj.get("iterations", 0)),
            seed=int(obj.get("seed", 0)),
            burn_in=int(obj.get("burn_in", 0)),
            sample_lag=int(obj.get("sample_lag", 1)),
        )

    def save(self, path) -> None:
        atomic_write_text(path, self.to_json())

    @classmethod
    def load(cls, path) -> "AspectModel":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise DataError(f"cannot read model {path}: {exc}") from exc
        return cls.from_json(text)


def phi(model: AspectModel) -> np.ndarray:
    """Smoothed aspect-word distributions, ``(n_kw + beta) / (n_k + V * beta)``."""
    V = model.n_kw.shape[1]
    return (model.n_kw + model.beta) / (model.n_k[:, None] + V * model.beta)


def permute_topics(model: AspectModel, perm: Sequence[int]) -> AspectModel:
    """Return a copy whose aspect ``i`` is ``model``'s aspect ``perm[i]``."""
    perm = np.asarray(perm)
    return AspectModel(
        K=model.K,
        alpha=model.alpha,
        beta=model.beta,
        n_kw=model.n_kw[perm].copy(),
        n_k=model.n_k[perm].copy(),
        vocabulary=model.vocabulary,
        iterations=model.iterations,
        seed=model.seed,
        burn_in=model.burn_in,
        sample_lag=model.sample_lag,
    )


def top_words_csv(model: AspectModel, k: int = 20) -> str:
    rows = []
    for a, words in enumerate(model.top_words(k)):
        for rank, (w, p) in enumerate(words, start=1):
            rows.append((a, rank, model.vocabulary.words[w], p))
    return csv_text(("aspect_id", "rank", "word", "probability"), rows)


# -- training ----------------------------------------------------------------


def _flatten(docs: Sequence[Sequence[int]]):
    lengths = np.array([len(d) for d in docs], dtype=np.int64)
    doc_ptr = np.zeros(len(docs) + 1, dtype=np.int64)
    np.cumsum(lengths, out=doc_ptr[1:])
    words = np.concatenate([np.asarray(d, dtype=np.int64) for d in docs]) if len(docs) else np.zeros(0, np.int64)
    return doc_ptr, words.astype(np.int64)


def conditional(n_dk, n_kw_w, n_k, alpha: float, beta: float, V: int) -> np.ndarray:
    """Normalized collapsed conditional from counts that already exclude the token."""
    weights = (np.asarray(n_dk, float) + alpha) * (np.asarray(n_kw_w, float) + beta)
    weights /= np.asarray(n_k, float) + V * beta
    return weights / weights.sum()


@dataclass(eq=False)
class TrainingState:
    """Live sampler state: flat assignments ``z`` plus count matrices.

    Token ``i`` of document ``d`` lives at flat index ``doc_ptr[d] + i``.
    """

    model: AspectModel
    z: np.ndarray
    n_dk: np.ndarray
    words: np.ndarray
    doc_ptr: np.ndarray

    @property
    def n_docs(self) -> int:
        return self.doc_ptr.shape[0] - 1

    def z_by_doc(self) -> list[np.ndarray]:
        return [self.z[self.doc_ptr[d] : self.doc_ptr[d + 1]] for d in range(self.n_docs)]

    def recount(self):
        """Counts rebuilt from ``z`` alone: ``(n_dk, n_kw, n_k)``."""
        K, V = self.model.K, self.model.V
        doc_of = np.repeat(np.arange(self.n_docs), np.diff(self.doc_ptr))
        n_dk = np.zeros((self.n_docs, K), dtype=np.int64)
        np.add.at(n_dk, (doc_of, self.z), 1)
        n_kw = np.zeros((K, V), dtype=np.int64)
        np.add.at(n_kw, (self.z, self.words), 1)
        return n_dk, n_kw, n_kw.sum(axis=1)

    def check_counts(self) -> None:
        n_dk, n_kw, n_k = self.recount()
        if not (
            np.array_equal(n_dk, self.n_dk)
            and np.array_equal(n_kw, self.model.n_kw)
            and np.array_equal(n_k, self.model.n_k)
        ):
            raise InvariantError("sampler counts disagree with topic assignments")

    def log_joint(self) -> float:
        return log_joint_counts(self.n_dk, self.model.n_kw, self.model.alpha, self.model.beta)


def gibbs_conditional(state: TrainingState, d: int, i: int) -> np.ndarray:
    """Conditional over topics for token ``i`` of document ``d``, excluding itself."""
    flat = state.doc_ptr[d] + i
    if flat >= state.doc_ptr[d + 1]:
        raise IndexError(f"document {d} has no token {i}")
    w, k = state.words[flat], state.z[flat]
    n_dk = state.n_dk[d].astype(float)
    n_kw_w = state.model.n_kw[:, w].astype(float)
    n_k = state.model.n_k.astype(float)
    n_dk[k] -= 1
    n_kw_w[k] -= 1
    n_k[k] -= 1
    if n_dk[k] < 0 or n_kw_w[k] < 0 or n_k[k] < 0:
        raise InvariantError("negative count after excluding the current token")
    return conditional(n_dk, n_kw_w, n_k, state.model.alpha, state.model.beta, state.model.V)


class GibbsSampler:
    """A single collapsed Gibbs chain over integer-encoded documents."""

    def __init__(self, docs, K: int, V: int, alpha: float, beta: float, seed=0, vocabulary=None):
        if K < 2:
            raise ValueError("K must be >= 2")
        if alpha <= 0 or beta <= 0:
            raise ValueError("alpha and beta must be positive")
        self.rng = make_rng(seed)
        doc_ptr, words = _flatten(docs)
        if words.size and (words.min() < 0 or words.max() >= V):
            raise DataError("word id outside vocabulary")
        z = self.rng.integers(0, K, size=words.shape[0]).astype(np.int64)
        if vocabulary is None:
            vocabulary = Vocabulary([f"w{v}" for v in range(V)])
        model = AspectModel(
            K=K,
            alpha=float(alpha),
            beta=float(beta),
            n_kw=np.zeros((K, V), dtype=np.int64),
            n_k=np.zeros(K, dtype=np.int64),
            vocabulary=vocabulary,
            seed=seed if isinstance(seed, int) else 0,
        )
        self.state = TrainingState(model, z, np.zeros((len(docs), K), dtype=np.int64), words, doc_ptr)
        self.state.n_dk[:], model.n_kw[:], model.n_k[:] = self.state.recount()
        self.n_sweeps = 0

    @property
    def n_tokens(self) -> int:
        return self.state.words.shape[0]

    def sweep(self, n: int = 1, hist: np.ndarray | None = None, chunk: int = 4096) -> None:
        """Run ``n`` full sweeps. If ``hist`` (tokens x K) is given, tally ``z`` after each."""
        st, m = self.state, self.state.model
        if hist is None:
            hist = np.zeros((0, m.K), dtype=np.int64)
        no_trace = np.zeros((0, 0), dtype=np.int64)
        done = 0
        while done < n:
            step = min(chunk, n - done)
            u = self.rng.random((step, self.n_tokens))
            _sweeps(st.doc_ptr, st.words, st.z, st.n_dk, m.n_kw, m.n_k,
                    m.alpha, m.beta, m.V * m.beta, u, hist, no_trace)
            done += step
        self.n_sweeps += n

    def trace(self, n: int, chunk: int = 4096) -> np.ndarray:
        """Run ``n`` sweeps and return the assignment vector after each, shape (n, tokens)."""
        st, m = self.state, self.state.model
        out = np.empty((n, self.n_tokens), dtype=np.int64)
        no_hist = np.zeros((0, m.K), dtype=np.int64)
        done = 0
        while done < n:
            step = min(chunk, n - done)
            u = self.rng.random((step, self.n_tokens))
            _sweeps(st.doc_ptr, st.words, st.z, st.n_dk, m.n_kw, m.n_k,
                    m.alpha, m.beta, m.V * m.beta, u, no_hist, out[done:done + step])
            done += step
        self.n_sweeps += n
        return out

    def assignment_frequencies(self, sweeps: int, burn_in: int = 0) -> np.ndarray:
        """Empirical per-token topic frequencies over ``sweeps`` recorded sweeps."""
        if burn_in:
            self.sweep(burn_in)
        hist = np.zeros((self.n_tokens, self.state.model.K), dtype=np.int64)
        self.sweep(sweeps, hist=hist)
        return hist / sweeps


def train(
    corpus: Corpus,
    K: int,
    alpha: float | None = None,
    beta: float = DEFAULT_BETA,
    iterations: int = DEFAULT_ITERATIONS,
    burn_in: int = DEFAULT_BURN_IN,
    sample_lag: int = DEFAULT_SAMPLE_LAG,
    seed: int = 0,
) -> AspectModel:
    """Fit an aspect model and return post-burn-in averaged counts.

    A sample is collected after sweep ``t`` (1-based) whenever ``t > burn_in``
    and ``(t - burn_in) % sample_lag == 0``; if that never happens the final
    state is used. Counts are checked against the assignments at every sample.
    """
    if alpha is None:
        alpha = default_alpha(K)
    if iterations <= burn_in or burn_in < 0:
        raise ValueError("need iterations > burn_in >= 0")
    if sample_lag < 1:
        raise ValueError("sample_lag must be >= 1")
    if len(corpus.reviews) == 0 or corpus.n_tokens == 0:
        raise DataError("cannot train on an empty corpus")
    if K > corpus.n_tokens:
        warnings.warn(f"K={K} exceeds the number of training tokens ({corpus.n_tokens})")

    sampler = GibbsSampler(corpus.docs, K, len(corpus.vocabulary), alpha, beta, seed, corpus.vocabulary)
    st = sampler.state
    acc_kw = np.zeros_like(st.model.n_kw)
    acc_k = np.zeros_like(st.model.n_k)
    n_samples = 0
    for t in range(1, iterations + 1):
        sampler.sweep()
        if t > burn_in and (t - burn_in) % sample_lag == 0:
            st.check_counts()
            acc_kw += st.model.n_kw
            acc_k += st.model.n_k
            n_samples += 1
    if n_samples == 0:
        st.check_counts()
        acc_kw, acc_k, n_samples = st.model.n_kw.copy(), st.model.n_k.copy(), 1

    return AspectModel(
        K=K,
        alpha=float(alpha),
        beta=float(beta),
        n_kw=acc_kw / n_samples,
        n_k=acc_k / n_samples,
        vocabulary=corpus.vocabulary,
        iterations=iterations,
        seed=seed,
        burn_in=burn_in,
        sample_lag=sample_lag,
    )


# -- inference ---------------------------------------------------------------


@dataclass
class AspectDistribution:
    probabilities: np.ndarray
    all_oov: bool = False

    def ranking(self) -> list[tuple[int, float]]:
        return rank_aspects(self.probabilities)


def rank_aspects(theta) -> list[tuple[int, float]]:
    """Sort aspects by probability, descending; ties go to the lower aspect id."""
    theta = np.asarray(theta, dtype=float)
    order = np.lexsort((np.arange(theta.shape[0]), -theta))
    return [(int(k), float(theta[k])) for k in order]


def fold_in(
    model: AspectModel,
    review: Review | Sequence[int],
    iterations: int = DEFAULT_FOLD_IN_ITERATIONS,
    seed: int = 0,
) -> AspectDistribution:
    """Estimate an unseen review's aspect mixture with the topic-word counts frozen.

    Only in-vocabulary ids are sampled. Document counts are averaged over the
    second half of the sweeps and smoothed, ``(n_dk + alpha) / (N_d + K alpha)``.
    """
    tokens = review.tokens if isinstance(review, Review) else review
    words = np.asarray([t for t in tokens if 0 <= t < model.V], dtype=np.int64)
    K = model.K
    if words.size == 0:
        return AspectDistribution(np.full(K, 1.0 / K), all_oov=True)
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    rng = make_rng(seed)
    z = rng.integers(0, K, size=words.shape[0]).astype(np.int64)
    u = rng.random((iterations, words.shape[0]))
    n_dk = _fold_in(words, z, np.ascontiguousarray(model.phi), model.alpha, u, iterations // 2)
    theta = (n_dk + model.alpha) / (words.shape[0] + K * model.alpha)
    return AspectDistribution(theta / theta.sum(), all_oov=False)


def predict_aspect(
    model: AspectModel,
    review: Review | Sequence[int],
    iterations: int = DEFAULT_FOLD_IN_ITERATIONS,
    seed: int = 0,
) -> list[tuple[int, float]]:
    """Aspects ranked by inferred probability; the first entry is the prediction."""
    return fold_in(model, review, iterations, seed).ranking()


# -- collapsed joint ---------------------------------------------------------


def log_joint_counts(n_dk, n_kw, alpha: float, beta: float) -> float:
    """``log P(w, z)`` with topic mixtures and topic-word distributions integrated out."""
    n_dk = np.asarray(n_dk, dtype=float)
    n_kw = np.asarray(n_kw, dtype=float)
    D, K = n_dk.shape
    V = n_kw.shape[1]
    doc_part = gammaln(n_dk + alpha).sum() - gammaln(n_dk.sum(axis=1) + K * alpha).sum()
    doc_part += D * (gammaln(K * alpha) - K * gammaln(alpha))
    word_part = gammaln(n_kw + beta).sum() - gammaln(n_kw.sum(axis=1) + V * beta).sum()
    word_part += K * (gammaln(V * beta) - V * gammaln(beta))
    return float(doc_part + word_part)


def log_joint(docs, z, K: int, V: int, alpha: float, beta: float) -> float:
    """Collapsed log joint for documents ``docs`` with per-token assignments ``z``.

    ``z`` is either a list of per-document arrays or one flat array in token order.
    """
    doc_ptr, words = _flatten(docs)
    z = np.concatenate([np.asarray(x, dtype=np.int64) for x in z]) if not np.isscalar(z[0]) else np.asarray(z)
    if z.shape[0] != words.shape[0]:
        raise ValueError("assignment vector length differs from token count")
    doc_of = np.repeat(np.arange(len(docs)), np.diff(doc_ptr))
    n_dk = np.zeros((len(docs), K))
    np.add.at(n_dk, (doc_of, z), 1)
    n_kw = np.zeros((K, V))
    np.add.at(n_kw, (z, words), 1)
    return log_joint_counts(n_dk, n_kw, alpha, beta)
