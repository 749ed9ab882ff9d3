"""Masking-based evaluation of latent aspect prediction.

For a gold-labeled review, the gold aspect words are optionally deleted
(masked), the model ranks its aspects for what remains, and a gold term's
rank is the position of the first ranked aspect whose top-k words contain
it. Gold terms missing from the model vocabulary are replaced by their most
Resnik-similar vocabulary word when a taxonomy is supplied.
"""
from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import Sequence

from ._util import atomic_write_text, csv_text, derive_seed, make_rng
from .corpus import PreprocessConfig, Review, Vocabulary, preprocess
from .errors import DataError
from .sampler import DEFAULT_FOLD_IN_ITERATIONS, AspectModel, predict_aspect
from .similarity import Taxonomy, nearest_in_vocab

EXACT = "exact"
SEMANTIC = "semantic"


@dataclass
class LabeledReview:
    """A test review: its preprocessed words (OOV included) and gold aspect terms.

    A gold term is the space-joined preprocessed tokens of one annotated
    aspect phrase.
    """

    review_id: str
    words: list[str]
    gold_terms: list[str]
    raw: str = ""

    def gold_tokens(self) -> set[str]:
        return {t for g in self.gold_terms for t in g.split()}

    @property
    def gold_present(self) -> bool:
        """Whether any gold token actually occurs in the preprocessed text."""
        return bool(self.gold_tokens() & set(self.words))

    def review(self, vocabulary: Vocabulary) -> Review:
        return Review(vocabulary.encode(self.words), self.raw, self.review_id)


def mask_words(words: Sequence[str], gold_terms: Sequence[str]) -> list[str]:
    drop = {t for g in gold_terms for t in g.split()}
    return [w for w in words if w not in drop]


def mask(labeled: LabeledReview, vocabulary: Vocabulary) -> Review:
    """Encode ``labeled`` with every gold-term token removed."""
    return Review(vocabulary.encode(mask_words(labeled.words, labeled.gold_terms)), labeled.raw, labeled.review_id)


# -- SemEval loading ---------------------------------------------------------


def _gold_terms(raw_terms, config: PreprocessConfig) -> list[str]:
    out = []
    for term in raw_terms:
        if term is None or term.strip().upper() == "NULL":
            continue
        toks = preprocess(term, config)
        if toks:
            g = " ".join(toks)
            if g not in out:
                out.append(g)
    return out


def load_semeval(path, config: PreprocessConfig | None = None) -> list[LabeledReview]:
    """Parse a SemEval ABSA restaurant file (2014 ``aspectTerms`` or 2015/16 ``Opinions``).

    One :class:`LabeledReview` per sentence. Opinion targets of ``"NULL"``
    (implicit aspects) contribute no gold term.
    """
    config = config or PreprocessConfig()
    try:
        root = ET.parse(path).getroot()
    except ET.ParseError as exc:
        raise DataError(f"{path}: malformed XML: {exc}") from exc
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc

    if root.tag == "sentences":
        def terms(s):
            return [a.get("term") for a in s.iter("aspectTerm")]
    elif root.tag == "Reviews":
        def terms(s):
            return [o.get("target") for o in s.iter("Opinion")]
    else:
        raise DataError(f"{path}: unknown SemEval schema (root element <{root.tag}>)")

    out = []
    seen = set()
    for i, s in enumerate(root.iter("sentence")):
        text = s.findtext("text") or ""
        rid = s.get("id") or str(i)
        if rid in seen:
            rid = f"{rid}#{i}"
        seen.add(rid)
        out.append(LabeledReview(rid, preprocess(text, config), _gold_terms(terms(s), config), text))
    return out


# -- matching and metrics ----------------------------------------------------


def _top_sets(model: AspectModel, k: int) -> list[set[int]]:
    cache = model.__dict__.setdefault("_top_sets", {})
    if k not in cache:
        cache[k] = [{w for w, _ in row} for row in model.top_words(k)]
    return cache[k]


def resolve_target(model: AspectModel, gold_term: str, taxonomy: Taxonomy | None = None, _cache=None):
    """The vocabulary word a gold term is matched by, as ``(word, via)``; ``(None, None)`` on miss.

    Multi-word terms are matched by their last (head) token.
    """
    head = gold_term.split()[-1]
    if head in model.vocabulary:
        return head, EXACT
    if taxonomy is None:
        return None, None
    if _cache is not None and head in _cache:
        return _cache[head]
    hit = nearest_in_vocab(taxonomy, head, model.vocabulary)
    res = (hit[0], SEMANTIC) if hit else (None, None)
    if _cache is not None:
        _cache[head] = res
    return res


def match_rank(
    model: AspectModel,
    ranking: Sequence,
    gold_term: str,
    k: int = 5,
    taxonomy: Taxonomy | None = None,
) -> int | None:
    """1-based position of the first ranked aspect whose top-``k`` words contain the target."""
    target, _ = resolve_target(model, gold_term, taxonomy)
    return _rank_of(model, ranking, target, k)


def _rank_of(model, ranking, target, k):
    if target is None:
        return None
    if k < 1:
        raise ValueError("k must be >= 1")
    wid = model.vocabulary.ids[target]
    tops = _top_sets(model, k)
    for pos, entry in enumerate(ranking, start=1):
        a = entry[0] if isinstance(entry, tuple) else entry
        if wid in tops[a]:
            return pos
    return None


@dataclass
class Metrics:
    mrr: float
    recall: float
    ndcg: float
    hit: float
    n: int


def review_scores(gold_count: int, ranks: Sequence[int | None], k: int = 5) -> tuple[float, float, float, float]:
    """``(reciprocal rank, recall@k, nDCG@k, hit@k)`` for one review."""
    if gold_count < 1:
        raise ValueError("gold_count must be >= 1")
    matched = [r for r in ranks if r is not None]
    rr = 1.0 / min(matched) if matched else 0.0
    within = [r for r in matched if r <= k]
    hit = 1.0 if within else 0.0
    recall = len(within) / gold_count
    dcg = sum(1.0 / math.log2(i + 1) for i in sorted(set(within)))
    idcg = sum(1.0 / math.log2(i + 1) for i in range(1, min(gold_count, k) + 1))
    return rr, recall, dcg / idcg, hit


def metrics(per_review: Sequence[tuple[int, Sequence[int | None]]], k: int = 5) -> Metrics:
    """Means over reviews of reciprocal rank, recall@k, nDCG@k and hit@k.

    Each entry is ``(gold_count, ranks)``; ``ranks`` holds the matched rank of
    each gold term, with ``None`` (or omission) for a miss.
    """
    if not per_review:
        raise ValueError("no reviews to score")
    sums = [0.0, 0.0, 0.0, 0.0]
    for gold_count, ranks in per_review:
        for j, v in enumerate(review_scores(gold_count, ranks, k)):
            sums[j] += v
    n = len(per_review)
    return Metrics(sums[0] / n, sums[1] / n, sums[2] / n, sums[3] / n, n)


# -- masking sweep -----------------------------------------------------------


@dataclass
class MaskingPlan:
    fraction: float
    masked_ids: set[str]
    seed: int


def masked_count(fraction: float, n: int) -> int:
    return int(math.floor(fraction * n + 0.5))


def masking_plans(review_ids: Sequence[str], fractions: Sequence[float], seed: int = 0) -> list[MaskingPlan]:
    """Nested masking sets: one seeded shuffle, each fraction masks a prefix of it."""
    for f in fractions:
        if not 0.0 <= f <= 1.0:
            raise ValueError(f"fraction {f} outside [0, 1]")
    order = make_rng(seed).permutation(len(review_ids))
    shuffled = [review_ids[i] for i in order]
    return [MaskingPlan(f, set(shuffled[: masked_count(f, len(review_ids))]), seed) for f in fractions]


@dataclass
class TermMatch:
    gold_term: str
    target: str | None
    via: str | None
    rank: int | None


@dataclass
class ReviewResult:
    review_id: str
    masked: bool
    gold_present: bool
    all_oov: bool
    terms: list[TermMatch]

    @property
    def ranks(self):
        return [t.rank for t in self.terms]


@dataclass
class EvalReport:
    fraction: float
    mrr: float
    recall_at_5: float
    ndcg_at_5: float
    hit_at_5: float
    n_reviews: int
    masked: Metrics | None = None
    per_review: list[ReviewResult] = field(default_factory=list, repr=False)

    @property
    def n_masked(self) -> int:
        return sum(r.masked for r in self.per_review)


def evaluate_reviews(
    model: AspectModel,
    testset: Sequence[LabeledReview],
    masked_ids=frozenset(),
    top_k: int = 5,
    taxonomy: Taxonomy | None = None,
    seed: int = 0,
    fold_in_iterations: int = DEFAULT_FOLD_IN_ITERATIONS,
    _cache=None,
) -> list[ReviewResult]:
    """Rank aspects for each gold-labeled review and match its gold terms.

    Fold-in for the review at position ``j`` uses a seed derived from
    ``(seed, j)``, so a review's prediction does not depend on which other
    reviews are masked.
    """
    cache = {} if _cache is None else _cache
    targets = cache.setdefault("targets", {})
    nearest = cache.setdefault("nearest", {})
    preds = cache.setdefault("preds", {})
    out = []
    for j, lr in enumerate(testset):
        if not lr.gold_terms:
            continue
        is_masked = lr.review_id in masked_ids
        key = (j, is_masked)
        if key not in preds:
            rv = mask(lr, model.vocabulary) if is_masked else lr.review(model.vocabulary)
            preds[key] = (predict_aspect(model, rv, fold_in_iterations, derive_seed(seed, j)), rv.is_empty)
        ranking, empty = preds[key]
        terms = []
        for g in lr.gold_terms:
            if g not in targets:
                targets[g] = resolve_target(model, g, taxonomy, nearest)
            target, via = targets[g]
            terms.append(TermMatch(g, target, via, _rank_of(model, ranking, target, top_k)))
        out.append(ReviewResult(lr.review_id, is_masked, lr.gold_present, empty, terms))
    return out


def sweep_masking(
    model: AspectModel,
    testset: Sequence[LabeledReview],
    fractions: Sequence[float] = tuple(i / 10 for i in range(11)),
    top_k: int = 5,
    taxonomy: Taxonomy | None = None,
    seed: int = 0,
    cutoff: int = 5,
    fold_in_iterations: int = DEFAULT_FOLD_IN_ITERATIONS,
) -> list[EvalReport]:
    """Evaluate at each masking fraction over all gold-labeled reviews.

    ``top_k`` is the per-aspect word list size used for matching; ``cutoff``
    is the rank cutoff of the metrics. Headline metrics average over every
    evaluated review; ``report.masked`` averages over the masked ones only.
    """
    eligible = [lr for lr in testset if lr.gold_terms]
    if not eligible:
        raise DataError("test set has no reviews with gold aspect terms")
    ids = [lr.review_id for lr in eligible]
    if len(set(ids)) != len(ids):
        raise DataError("duplicate review ids in test set")
    cache: dict = {}
    reports = []
    for plan in masking_plans(ids, fractions, seed):
        results = evaluate_reviews(model, eligible, plan.masked_ids, top_k, taxonomy, seed, fold_in_iterations, cache)
        m = metrics([(len(r.terms), r.ranks) for r in results], cutoff)
        masked = [r for r in results if r.masked]
        mm = metrics([(len(r.terms), r.ranks) for r in masked], cutoff) if masked else None
        reports.append(EvalReport(plan.fraction, m.mrr, m.recall, m.ndcg, m.hit, m.n, mm, results))
    return reports


SUMMARY_COLUMNS = (
    "fraction", "mrr", "recall_at_5", "ndcg_at_5", "hit_at_5", "n_reviews",
    "masked_mrr", "masked_recall_at_5", "masked_ndcg_at_5", "masked_hit_at_5", "n_masked",
)


def summary_csv(reports: Sequence[EvalReport]) -> str:
    rows = []
    for r in reports:
        mm = r.masked
        rows.append((
            r.fraction, r.mrr, r.recall_at_5, r.ndcg_at_5, r.hit_at_5, r.n_reviews,
            mm and mm.mrr, mm and mm.recall, mm and mm.ndcg, mm and mm.hit, r.n_masked,
        ))
    return csv_text(SUMMARY_COLUMNS, rows)


def detail_csv(reports: Sequence[EvalReport]) -> str:
    rows = []
    for r in reports:
        for rr in r.per_review:
            for t in rr.terms:
                rows.append((
                    r.fraction, rr.review_id, int(rr.masked), int(rr.gold_present), int(rr.all_oov),
                    t.gold_term, t.target, t.via, t.rank,
                ))
    header = ("fraction", "review_id", "masked", "gold_present", "all_oov",
              "gold_term", "target", "matched_via", "matched_rank")
    return csv_text(header, rows)


def write_reports(reports: Sequence[EvalReport], summary_path, detail_path=None) -> None:
    atomic_write_text(summary_path, summary_csv(reports))
    if detail_path is not None:
        atomic_write_text(detail_path, detail_csv(reports))
