import math

import numpy as np
import pytest

from latent_aspects.corpus import Corpus, Review, Vocabulary
from latent_aspects.model_selection import (
    coherence_csv,
    doc_term_matrix,
    sweep_k,
    umass_coherence,
    umass_score,
    write_coherence_csv,
)
from latent_aspects.sampler import AspectModel, permute_topics, train
from latent_aspects.synthetic import PER_WORD, disjoint_phi, generate

WORDS = ["a", "b", "c", "d"]
A, B, C, D = range(4)
# D(a)=4 D(b)=3 D(c)=2 D(d)=1; D(a,b)=2 D(a,c)=2 D(b,c)=1 D(.,d)=0 except D(b,d)=1
FIVE_DOCS = [[A, B, C], [A, B], [A, C], [B, D], [A]]


def five_doc_corpus():
    reviews = [Review(list(d), review_id=str(i)) for i, d in enumerate(FIVE_DOCS)]
    return Corpus(reviews, Vocabulary.from_token_lists([r.tokens for r in reviews], WORDS))


def model_with_rows(rows, vocab):
    n_kw = np.asarray(rows, dtype=float)
    return AspectModel(n_kw.shape[0], 0.5, 0.01, n_kw, n_kw.sum(axis=1), vocab)


def five_doc_model(corpus):
    # topic 0 ranks a > b > c > d, topic 1 ranks c > a > d > b
    return model_with_rows([[10, 5, 3, 0], [5, 0, 10, 3]], corpus.vocabulary)


def test_two_word_examples():
    # v1 in docs 0-3; v2 co-occurs with it in 3 of them, then in 1
    inc = doc_term_matrix(Corpus(
        [Review([0, 1]), Review([0, 1]), Review([0, 1]), Review([0])],
        Vocabulary.from_token_lists([[0, 1]] * 3 + [[0]], ["v1", "v2"]),
    ))
    assert umass_score([0, 1], inc) == pytest.approx(math.log(4 / 4), abs=1e-12)
    inc = doc_term_matrix(Corpus(
        [Review([0, 1]), Review([0]), Review([0]), Review([0])],
        Vocabulary.from_token_lists([[0, 1]] + [[0]] * 3, ["v1", "v2"]),
    ))
    assert umass_score([0, 1], inc) == pytest.approx(math.log(2 / 4), abs=1e-12)
    assert umass_score([0, 1], inc) == pytest.approx(-0.6931471805599453, abs=1e-12)


def test_five_doc_hand_counts():
    corpus = five_doc_corpus()
    rep = umass_coherence(five_doc_model(corpus), corpus, top_m=3)
    t0 = math.log(3 / 4) + math.log(3 / 4) + math.log(2 / 3)
    t1 = math.log(3 / 2) + math.log(1 / 2) + math.log(1 / 4)
    assert rep.top_words == [[A, B, C], [C, A, D]]
    assert rep.per_topic == pytest.approx([t0, t1], abs=1e-9)
    assert rep.mean == pytest.approx((t0 + t1) / 2, abs=1e-12)
    assert (rep.K, rep.top_m) == (2, 3)


def test_identical_top_lists_score_identically_and_permutation_invariance():
    corpus = five_doc_corpus()
    m = model_with_rows([[10, 5, 3, 0], [10, 5, 3, 0], [0, 1, 2, 9]], corpus.vocabulary)
    rep = umass_coherence(m, corpus, top_m=3)
    assert rep.per_topic[0] == rep.per_topic[1]
    prep = umass_coherence(permute_topics(m, [2, 0, 1]), corpus, top_m=3)
    assert sorted(prep.per_topic) == sorted(rep.per_topic)


def test_top_m_validation_and_capping():
    corpus = five_doc_corpus()
    m = five_doc_model(corpus)
    with pytest.raises(ValueError):
        umass_coherence(m, corpus, top_m=1)
    assert umass_coherence(m, corpus, top_m=50).top_m == 4
    other = Corpus(corpus.reviews, Vocabulary.from_token_lists([r.tokens for r in corpus.reviews], list("wxyz")))
    with pytest.raises(ValueError):
        umass_coherence(m, other)


def test_summand_upper_bound_on_random_corpora():
    rng = np.random.default_rng(0)
    for _ in range(20):
        docs = [list(rng.integers(0, 8, size=rng.integers(1, 6))) for _ in range(15)]
        docs.append(list(range(8)))
        reviews = [Review(d) for d in docs]
        corpus = Corpus(reviews, Vocabulary.from_token_lists(docs, [f"w{i}" for i in range(8)]))
        inc = doc_term_matrix(corpus).toarray().astype(bool)
        df = inc.sum(axis=0)
        for m_ in range(8):
            for l_ in range(8):
                if m_ == l_:
                    continue
                co = (inc[:, m_] & inc[:, l_]).sum()
                assert co <= min(df[m_], df[l_])
                summand = math.log((co + 1) / df[l_])
                assert summand <= math.log(1 + 1 / df[l_]) + 1e-15


def planted_corpus(seed=0):
    return generate(4, 40, 300, 30, 5.0 / 4, 0.01, PER_WORD, seed=seed, phi=disjoint_phi(4, 40))[0]


def test_sweep_single_k_matches_direct_coherence():
    corpus = planted_corpus()
    res = sweep_k(corpus, [4], seed=5, keep_models=True, iterations=60, burn_in=20, sample_lag=10)
    assert len(res) == 1 and res[0].K == 4
    direct = umass_coherence(train(corpus, 4, seed=res[0].seed, iterations=60, burn_in=20, sample_lag=10), corpus)
    assert res[0].mean_coherence == direct.mean
    assert res[0].per_topic_min == direct.per_topic.min()


def test_sweep_planted_four_topics_prefers_four_over_two():
    # each planted aspect has 10 words, so score the top 10; longer lists
    # would pad every K=4 aspect with near-zero-probability words
    corpus = planted_corpus()
    res = sweep_k(corpus, [2, 3, 4], seed=0, top_m=10, iterations=200, burn_in=100, sample_lag=10)
    by_k = {r.K: r.mean_coherence for r in res}
    assert by_k[4] >= by_k[2]
    assert max(by_k, key=by_k.get) == 4


def test_sweep_is_deterministic_and_order_independent():
    corpus = planted_corpus(1)
    kw = dict(iterations=40, burn_in=10, sample_lag=10)
    a = sweep_k(corpus, [3, 2], seed=9, **kw)
    b = sweep_k(corpus, [2, 3], seed=9, **kw)
    assert [r.K for r in a] == [3, 2]
    assert {r.K: r.mean_coherence for r in a} == {r.K: r.mean_coherence for r in b}
    assert coherence_csv(a) == coherence_csv(sweep_k(corpus, [3, 2], seed=9, **kw))


def test_sweep_records_failures_and_validates():
    corpus = planted_corpus()
    res = sweep_k(corpus, [2, 3], iterations=5, burn_in=10)  # iterations <= burn_in
    assert all(r.error for r in res)
    assert all(r.mean_coherence is None for r in res)
    with pytest.raises(ValueError):
        sweep_k(corpus, [])
    with pytest.raises(ValueError):
        sweep_k(corpus, [1])


def test_coherence_csv(tmp_path):
    corpus = planted_corpus()
    res = sweep_k(corpus, [2, 3], iterations=20, burn_in=5, sample_lag=5)
    write_coherence_csv(res, tmp_path / "coh.csv")
    lines = (tmp_path / "coh.csv").read_text().splitlines()
    assert lines[0] == "K,mean_coherence,per_topic_min,per_topic_max,error"
    assert [l.split(",")[0] for l in lines[1:]] == ["2", "3"]
