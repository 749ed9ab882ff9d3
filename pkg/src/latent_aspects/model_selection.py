"""UMass topic coherence and the sweep over aspect counts."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import sparse

from ._util import atomic_write_text, csv_text, derive_seed
from .corpus import Corpus
from .sampler import AspectModel, train

log = logging.getLogger(__name__)

DEFAULT_TOP_M = 20


@dataclass
class CoherenceReport:
    per_topic: np.ndarray
    mean: float
    K: int
    top_m: int
    top_words: list[list[int]] = field(default_factory=list, repr=False)


def doc_term_matrix(corpus: Corpus) -> sparse.csr_matrix:
    """Binary (documents x vocabulary) incidence matrix."""
    rows, cols = [], []
    for d, r in enumerate(corpus.reviews):
        u = np.unique(np.asarray(r.tokens, dtype=np.int64))
        rows.append(np.full(u.shape[0], d))
        cols.append(u)
    rows = np.concatenate(rows) if rows else np.zeros(0, np.int64)
    cols = np.concatenate(cols) if cols else np.zeros(0, np.int64)
    data = np.ones(rows.shape[0], dtype=np.int64)
    return sparse.csr_matrix((data, (rows, cols)), shape=(len(corpus.reviews), len(corpus.vocabulary)))


def umass_score(word_ids: Sequence[int], incidence: sparse.spmatrix) -> float:
    """Sum over ordered pairs ``l < m`` of ``log((D(v_m, v_l) + 1) / D(v_l))``.

    ``word_ids`` must be ordered most probable first.
    """
    cols = incidence[:, list(word_ids)].astype(np.int64)
    co = (cols.T @ cols).toarray()
    df = np.diag(co)
    if np.any(df == 0):
        raise ValueError("a top word never occurs in the reference corpus")
    score = 0.0
    for m in range(1, len(word_ids)):
        for l in range(m):
            score += np.log((co[m, l] + 1.0) / df[l])
    return float(score)


def umass_coherence(model: AspectModel, corpus: Corpus, top_m: int = DEFAULT_TOP_M) -> CoherenceReport:
    """Per-aspect UMass coherence of each aspect's ``top_m`` words over ``corpus``.

    Top words are ranked by the smoothed aspect-word probability; ``top_m`` is
    capped at the vocabulary size. The model and corpus must share a vocabulary.
    """
    if top_m < 2:
        raise ValueError("top_m must be >= 2")
    if model.vocabulary.words != corpus.vocabulary.words:
        raise ValueError("model and corpus vocabularies differ")
    M = min(top_m, model.V)
    incidence = doc_term_matrix(corpus)
    tops = [[w for w, _ in row] for row in model.top_words(M)]
    per_topic = np.array([umass_score(t, incidence) for t in tops])
    return CoherenceReport(per_topic, float(per_topic.mean()), model.K, M, tops)


@dataclass
class SweepResult:
    K: int
    seed: int
    mean_coherence: float | None = None
    per_topic_min: float | None = None
    per_topic_max: float | None = None
    error: str | None = None
    model: AspectModel | None = field(default=None, repr=False)


def sweep_k(
    corpus: Corpus,
    k_values: Sequence[int],
    seed: int = 0,
    top_m: int = DEFAULT_TOP_M,
    keep_models: bool = False,
    **train_kwargs,
) -> list[SweepResult]:
    """Train one model per K and score it.

    Each K gets its own seed derived from ``seed`` and K, so results for a given
    K do not depend on the rest of the list. ``alpha`` defaults to 5/K per model.
    A failing K is recorded in its result's ``error`` and the sweep continues.
    """
    if not k_values:
        raise ValueError("k_values is empty")
    if any(k < 2 for k in k_values):
        raise ValueError("every K must be >= 2")
    results = []
    for K in k_values:
        k_seed = derive_seed(seed, K)
        res = SweepResult(K=K, seed=k_seed)
        try:
            model = train(corpus, K, seed=k_seed, **train_kwargs)
            rep = umass_coherence(model, corpus, top_m)
            res.mean_coherence = rep.mean
            res.per_topic_min = float(rep.per_topic.min())
            res.per_topic_max = float(rep.per_topic.max())
            if keep_models:
                res.model = model
            log.info("K=%d coherence=%.4f", K, rep.mean)
        except Exception as exc:  # recorded per K, sweep goes on
            log.warning("K=%d failed: %s", K, exc)
            res.error = f"{type(exc).__name__}: {exc}"
        results.append(res)
    return results


def coherence_csv(results: Sequence[SweepResult]) -> str:
    rows = [(r.K, r.mean_coherence, r.per_topic_min, r.per_topic_max, r.error) for r in results]
    return csv_text(("K", "mean_coherence", "per_topic_min", "per_topic_max", "error"), rows)


def write_coherence_csv(results: Sequence[SweepResult], path) -> None:
    atomic_write_text(path, coherence_csv(results))
