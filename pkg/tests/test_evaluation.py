import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latent_aspects.corpus import PreprocessConfig, Vocabulary, build_corpus
from latent_aspects.errors import DataError
from latent_aspects.evaluation import (
    LabeledReview,
    detail_csv,
    evaluate_reviews,
    load_semeval,
    mask,
    mask_words,
    masked_count,
    masking_plans,
    match_rank,
    metrics,
    resolve_target,
    review_scores,
    summary_csv,
    sweep_masking,
    write_reports,
)
from latent_aspects.sampler import AspectModel, train
from latent_aspects.similarity import Taxonomy

from test_similarity import FOOD_TSV

WORDS = ["bar", "food", "menu", "service", "staff", "wifi"]


def toy_model():
    # aspect 0: staff, service; aspect 1: wifi, bar; aspect 2: food, menu
    n_kw = np.array([
        [0, 0, 0, 8, 9, 0],
        [5, 0, 0, 0, 0, 9],
        [0, 9, 6, 0, 0, 0],
    ], dtype=float)
    return AspectModel(3, 5 / 3, 0.01, n_kw, n_kw.sum(axis=1), Vocabulary(WORDS))


def test_mask_examples():
    lr = LabeledReview("r", ["menu", "extens", "bar", "live", "music"], ["menu", "bar"])
    assert mask_words(lr.words, lr.gold_terms) == ["extens", "live", "music"]
    vocab = Vocabulary(["bar", "live", "menu", "music"])
    assert vocab.decode(mask(lr, vocab).tokens) == ["live", "music"]
    assert vocab.decode(lr.review(vocab).tokens) == ["menu", "bar", "live", "music"]


def test_mask_multiword_term_drops_every_token():
    lr = LabeledReview("r", ["front", "desk", "was", "nice"], ["front desk"])
    assert mask_words(lr.words, lr.gold_terms) == ["was", "nice"]
    assert lr.gold_present


def test_match_rank_exact_semantic_and_miss(tmp_path):
    m = toy_model()
    ranking = [0, 1, 2]
    assert match_rank(m, ranking, "staff", k=2) == 1
    assert match_rank(m, ranking, "bar", k=2) == 2
    assert match_rank(m, [(2, 0.7), (0, 0.2), (1, 0.1)], "food", k=2) == 1
    # outside every top-1 list
    assert match_rank(m, ranking, "menu", k=1) is None
    assert match_rank(m, ranking, "sushi", k=2) is None
    p = tmp_path / "t.tsv"
    p.write_text(FOOD_TSV)
    tax = Taxonomy.load(p, smoothing=0)
    assert resolve_target(m, "sushi", tax) == ("food", "semantic")
    assert match_rank(m, ranking, "sushi", k=2, taxonomy=tax) == 3
    # head token of a multi-word term
    assert match_rank(m, ranking, "hotel staff", k=2) == 1
    assert match_rank(m, ranking, "pizza", k=2, taxonomy=tax) is None


def test_single_review_scores():
    assert review_scores(1, [1]) == (1.0, 1.0, 1.0, 1.0)
    rr, rec, ndcg, hit = review_scores(1, [2])
    assert rr == 0.5 and hit == 1.0 and rec == 1.0
    assert ndcg == pytest.approx(0.6309297535714575, abs=1e-15)
    assert review_scores(1, [None]) == (0.0, 0.0, 0.0, 0.0)
    assert metrics([(1, [2]), (1, [4])]).mrr == 0.375
    with pytest.raises(ValueError):
        review_scores(0, [])
    with pytest.raises(ValueError):
        metrics([])


L3, L4, L6 = math.log2(3), math.log2(4), math.log2(6)

# (gold_count, ranks) -> (rr, recall@5, ndcg@5, hit@5), worked by hand
FROZEN = [
    ((1, [1]), (1, 1, 1, 1)),
    ((1, [2]), (1 / 2, 1, 1 / L3, 1)),
    ((1, [None]), (0, 0, 0, 0)),
    ((1, [7]), (1 / 7, 0, 0, 0)),
    ((2, [1, 3]), (1, 1, (1 + 1 / L4) / (1 + 1 / L3), 1)),
    ((2, [2, None]), (1 / 2, 1 / 2, (1 / L3) / (1 + 1 / L3), 1)),
    ((3, [5, 6, None]), (1 / 5, 1 / 3, (1 / L6) / (1 + 1 / L3 + 1 / L4), 1)),
    # both terms hit the same aspect: one relevant position
    ((2, [1, 1]), (1, 1, 1 / (1 + 1 / L3), 1)),
    ((6, [1, 2, 3, 4, 5, 6]), (1, 5 / 6, 1, 1)),
    ((1, [5]), (1 / 5, 1, 1 / L6, 1)),
]


def test_frozen_ten_review_fixture():
    for inp, want in FROZEN:
        assert review_scores(*inp) == pytest.approx(want, abs=1e-12)
    m = metrics([inp for inp, _ in FROZEN])
    cols = list(zip(*[w for _, w in FROZEN]))
    assert m.n == 10
    assert m.mrr == pytest.approx(sum(cols[0]) / 10, abs=1e-12)
    assert m.recall == pytest.approx(sum(cols[1]) / 10, abs=1e-12)
    assert m.ndcg == pytest.approx(sum(cols[2]) / 10, abs=1e-12)
    assert m.hit == pytest.approx(0.8, abs=1e-12)


rank_lists = st.lists(st.one_of(st.none(), st.integers(1, 12)), min_size=1, max_size=6)


@given(rank_lists)
def test_metric_invariants(ranks):
    rr, rec, ndcg, hit = review_scores(len(ranks), ranks)
    for v in (rr, rec, ndcg, hit):
        assert 0.0 <= v <= 1.0
    matched = [r for r in ranks if r is not None]
    assert (rr > 0) == bool(matched)
    assert (hit == 1.0) == (bool(matched) and min(matched) <= 5)


def test_masked_count_rounds_half_up():
    assert masked_count(0.5, 5) == 3
    assert masked_count(0.25, 10) == 3
    assert masked_count(0.0, 7) == 0
    assert masked_count(1.0, 7) == 7


@settings(max_examples=50)
@given(st.integers(1, 60), st.integers(0, 1000))
def test_masking_plans_nest(n, seed):
    ids = [f"r{i}" for i in range(n)]
    fr = [i / 10 for i in range(11)]
    plans = masking_plans(ids, fr, seed)
    for a, b in zip(plans, plans[1:]):
        assert a.masked_ids <= b.masked_ids
    for p in plans:
        assert len(p.masked_ids) == masked_count(p.fraction, n)
    assert plans[-1].masked_ids == set(ids)
    with pytest.raises(ValueError):
        masking_plans(ids, [1.5])


# -- end to end on a small trained model ---------------------------------------

TRAIN = [
    "great food and a tasty menu", "the menu had good food", "food was tasty",
    "staff were rude and service slow", "friendly staff quick service", "the service staff smiled",
    "free wifi at the bar", "the bar wifi was slow", "wifi and bar drinks",
] * 4

TEST = [
    LabeledReview("t1", ["tasti", "food", "menu"], ["food"]),
    LabeledReview("t2", ["rude", "staff", "slow"], ["staff"]),
    LabeledReview("t3", ["bar", "wifi", "free"], ["wifi", "bar"]),
    LabeledReview("t4", ["good", "menu"], ["menu"]),
    LabeledReview("t5", ["friendli", "servic"], ["servic"]),
    LabeledReview("t6", ["nothing"], []),
]


@pytest.fixture(scope="module")
def trained():
    corpus = build_corpus(TRAIN, PreprocessConfig(stopwords=frozenset({"the", "and", "a", "at", "was", "were", "had"})))
    return train(corpus, 3, iterations=120, burn_in=40, sample_lag=10, seed=3)


def test_fraction_zero_equals_unmasked(trained):
    reports = sweep_masking(trained, TEST, [0.0, 0.4, 1.0], seed=2, fold_in_iterations=40)
    assert reports[0].n_masked == 0
    plain = evaluate_reviews(trained, TEST, seed=2, fold_in_iterations=40)
    m = metrics([(len(r.terms), r.ranks) for r in plain])
    assert (reports[0].mrr, reports[0].recall_at_5, reports[0].ndcg_at_5, reports[0].hit_at_5) == (
        m.mrr, m.recall, m.ndcg, m.hit)
    assert reports[0].masked is None
    # review without gold terms is not evaluated
    assert reports[0].n_reviews == 5


def test_fraction_one_masks_every_review(trained):
    rep = sweep_masking(trained, TEST, [1.0], seed=2, fold_in_iterations=40)[0]
    assert rep.n_masked == rep.n_reviews == 5
    assert rep.masked.mrr == rep.mrr
    vocab = trained.vocabulary
    for lr in TEST[:5]:
        left = set(vocab.decode(mask(lr, vocab).tokens))
        assert not left & lr.gold_tokens()


def test_unmasked_predictions_do_not_depend_on_fraction(trained):
    reports = sweep_masking(trained, TEST, [0.0, 0.2, 0.6], seed=4, fold_in_iterations=40)
    base = {r.review_id: r.ranks for r in reports[0].per_review}
    for rep in reports[1:]:
        for r in rep.per_review:
            if not r.masked:
                assert r.ranks == base[r.review_id]


def test_sweep_rejects_bad_testsets(trained):
    with pytest.raises(DataError):
        sweep_masking(trained, [TEST[-1]])
    with pytest.raises(DataError):
        sweep_masking(trained, [TEST[0], TEST[0]])


def test_csv_outputs(trained, tmp_path):
    reports = sweep_masking(trained, TEST, [0.0, 0.6], seed=1, fold_in_iterations=20)
    s = summary_csv(reports).splitlines()
    assert s[0] == ("fraction,mrr,recall_at_5,ndcg_at_5,hit_at_5,n_reviews,"
                    "masked_mrr,masked_recall_at_5,masked_ndcg_at_5,masked_hit_at_5,n_masked")
    assert len(s) == 3
    assert s[1].split(",")[6:10] == ["", "", "", ""]
    d = detail_csv(reports).splitlines()
    assert d[0] == "fraction,review_id,masked,gold_present,all_oov,gold_term,target,matched_via,matched_rank"
    assert len(d) == 1 + 2 * 6  # six gold terms per fraction
    write_reports(reports, tmp_path / "s.csv", tmp_path / "d.csv")
    assert (tmp_path / "s.csv").read_text() == summary_csv(reports)


# -- SemEval XML ------------------------------------------------------------------

SE14 = """<?xml version="1.0" encoding="UTF-8"?>
<sentences>
  <sentence id="1">
    <text>The sushi was great but the waiters were slow.</text>
    <aspectTerms>
      <aspectTerm term="sushi" polarity="positive" from="4" to="9"/>
      <aspectTerm term="waiters" polarity="negative" from="28" to="35"/>
    </aspectTerms>
  </sentence>
  <sentence id="2"><text>Nice place.</text></sentence>
  <sentence id="3">
    <text>Their front desk staff rock.</text>
    <aspectTerms><aspectTerm term="front desk staff" polarity="positive" from="6" to="22"/></aspectTerms>
  </sentence>
</sentences>
"""

SE16 = """<?xml version="1.0" encoding="UTF-8"?>
<Reviews>
  <Review rid="r1">
    <sentences>
      <sentence id="r1:0">
        <text>Food was okay, nothing great.</text>
        <Opinions>
          <Opinion target="Food" category="FOOD#QUALITY" polarity="neutral" from="0" to="4"/>
          <Opinion target="NULL" category="RESTAURANT#GENERAL" polarity="neutral" from="0" to="0"/>
        </Opinions>
      </sentence>
      <sentence id="r1:1">
        <text>Will be back.</text>
        <Opinions><Opinion target="NULL" category="RESTAURANT#GENERAL" polarity="positive" from="0" to="0"/></Opinions>
      </sentence>
    </sentences>
  </Review>
</Reviews>
"""


def test_load_semeval_2014(tmp_path):
    p = tmp_path / "r14.xml"
    p.write_text(SE14)
    recs = load_semeval(p)
    assert [r.review_id for r in recs] == ["1", "2", "3"]
    assert recs[0].gold_terms == ["sushi", "waiter"]
    assert recs[1].gold_terms == []
    assert recs[2].gold_terms == ["front desk staff"]
    assert recs[0].raw.startswith("The sushi")


def test_load_semeval_2016_skips_null_targets(tmp_path):
    p = tmp_path / "r16.xml"
    p.write_text(SE16)
    recs = load_semeval(p)
    assert [r.gold_terms for r in recs] == [["food"], []]
    assert recs[0].words[0] == "food"


def test_load_semeval_errors(tmp_path):
    bad = tmp_path / "bad.xml"
    bad.write_text("<sentences><sentence>")
    with pytest.raises(DataError):
        load_semeval(bad)
    other = tmp_path / "other.xml"
    other.write_text("<corpus/>")
    with pytest.raises(DataError, match="schema"):
        load_semeval(other)
    with pytest.raises(DataError):
        load_semeval(tmp_path / "missing.xml")
