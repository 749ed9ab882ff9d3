"""Review ingestion: tokenize, filter, normalize, and encode against a vocabulary."""
from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from ._util import atomic_write_text, dump_json
from .errors import DataError

CORPUS_FORMAT_VERSION = 1

# Any run of Unicode letters/digits. Everything else (whitespace, punctuation,
# symbols, emoji, underscore) is a boundary and is dropped.
_TOKEN_RE = re.compile(r"[^\W_]+")
_DIGIT_RE = re.compile(r"\d")
_ASCII_WORD_RE = re.compile(r"[a-z]+")


def tokenize(text: str) -> list[str]:
    """Lowercase ``text`` and split it into alphanumeric runs.

    >>> tokenize("Great WiFi, bad staff!")
    ['great', 'wifi', 'bad', 'staff']
    """
    return _TOKEN_RE.findall(text.lower())


def filter_tokens(tokens: Iterable[str], stopwords: frozenset | set = frozenset()) -> list[str]:
    """Drop tokens with digits, tokens that are not plain ASCII letters, and stopwords."""
    out = []
    for tok in tokens:
        if _DIGIT_RE.search(tok):
            continue
        if not _ASCII_WORD_RE.fullmatch(tok):
            continue
        if tok in stopwords:
            continue
        out.append(tok)
    return out


# -- light suffix stemmer ----------------------------------------------------
# Steps 1a and 1b of the Porter algorithm: plural and -ed/-ing stripping only.

_VOWELS = frozenset("aeiou")


def _is_consonant(word: str, i: int) -> bool:
    ch = word[i]
    if ch in _VOWELS:
        return False
    if ch == "y":
        return i == 0 or not _is_consonant(word, i - 1)
    return True


def _measure(stem: str) -> int:
    m = 0
    prev_vowel = False
    for i in range(len(stem)):
        cons = _is_consonant(stem, i)
        if cons and prev_vowel:
            m += 1
        prev_vowel = not cons
    return m


def _has_vowel(stem: str) -> bool:
    return any(not _is_consonant(stem, i) for i in range(len(stem)))


def _ends_double_consonant(word: str) -> bool:
    return len(word) >= 2 and word[-1] == word[-2] and _is_consonant(word, len(word) - 1)


def _ends_cvc(word: str) -> bool:
    if len(word) < 3:
        return False
    return (
        _is_consonant(word, len(word) - 3)
        and not _is_consonant(word, len(word) - 2)
        and _is_consonant(word, len(word) - 1)
        and word[-1] not in "wxy"
    )


def light_stem(word: str) -> str:
    """Strip English plural and -ed/-ing suffixes.

    >>> light_stem("tables"), light_stem("advertised"), light_stem("wifi")
    ('table', 'advertis', 'wifi')
    """
    if len(word) <= 2:
        return word
    # step 1a
    if word.endswith("sses"):
        word = word[:-2]
    elif word.endswith("ies"):
        word = word[:-2]
    elif word.endswith("ss"):
        pass
    elif word.endswith("s"):
        word = word[:-1]
    # step 1b
    if word.endswith("eed"):
        if _measure(word[:-3]) > 0:
            word = word[:-1]
        return word
    for suffix in ("ed", "ing"):
        if word.endswith(suffix) and _has_vowel(word[: -len(suffix)]):
            word = word[: -len(suffix)]
            break
    else:
        return word
    if word.endswith(("at", "bl", "iz")):
        return word + "e"
    if _ends_double_consonant(word) and word[-1] not in "lsz":
        return word[:-1]
    if _measure(word) == 1 and _ends_cvc(word):
        return word + "e"
    return word


def identity(word: str) -> str:
    return word


Normalizer = Callable[[str], str]


def normalize(tokens: Iterable[str], normalizer: Normalizer | None = light_stem) -> list[str]:
    if normalizer is None:
        return list(tokens)
    return [normalizer(t) for t in tokens]


# -- stopwords and raw input -------------------------------------------------


def load_stopwords(path) -> frozenset:
    """Read a stopword file: one word per line, ``#`` starts a comment."""
    words = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip().lower()
            if line:
                words.add(line)
    return frozenset(words)


def default_stopwords() -> frozenset:
    """The English stopword list shipped with the package."""
    with resources.as_file(resources.files(__package__) / "data" / "stopwords.txt") as p:
        return load_stopwords(p)


def read_lines(path) -> tuple[list[str], list[str]]:
    """Read one review per line. Blank lines are skipped; ids are 1-based line numbers."""
    ids, texts = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if line.strip():
                ids.append(str(lineno))
                texts.append(line)
    return ids, texts


def read_table(path, delimiter: str = ",") -> tuple[list[str], list[str]]:
    """Read a delimited table with ``review_id`` and ``text`` columns."""
    ids, texts = [], []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh, delimiter=delimiter)
        if reader.fieldnames is None or not {"review_id", "text"} <= set(reader.fieldnames):
            raise DataError(f"{path}: expected columns 'review_id' and 'text'")
        for row in reader:
            ids.append(row["review_id"])
            texts.append(row["text"] or "")
    return ids, texts


# -- data model --------------------------------------------------------------


class Vocabulary:
    """Bidirectional word/id map with document frequencies."""

    def __init__(self, words: Sequence[str], doc_freq=None, total_docs: int = 0):
        self.words = list(words)
        self.ids = {w: i for i, w in enumerate(self.words)}
        if len(self.ids) != len(self.words):
            raise DataError("vocabulary words must be unique")
        if doc_freq is None:
            doc_freq = np.zeros(len(self.words), dtype=np.int64)
        self.doc_freq = np.asarray(doc_freq, dtype=np.int64)
        self.total_docs = int(total_docs)

    def __len__(self):
        return len(self.words)

    def __contains__(self, word):
        return word in self.ids

    def __eq__(self, other):
        return (
            isinstance(other, Vocabulary)
            and self.words == other.words
            and np.array_equal(self.doc_freq, other.doc_freq)
            and self.total_docs == other.total_docs
        )

    def __repr__(self):
        return f"Vocabulary({len(self)} words, {self.total_docs} docs)"

    def encode(self, tokens: Iterable[str]) -> list[int]:
        """Map tokens to ids; out-of-vocabulary tokens are skipped."""
        ids = self.ids
        return [ids[t] for t in tokens if t in ids]

    def decode(self, token_ids: Iterable[int]) -> list[str]:
        return [self.words[i] for i in token_ids]

    @classmethod
    def from_token_lists(cls, token_lists: Sequence[Sequence[int]], words: Sequence[str]):
        """Build a vocabulary over ``words`` with frequencies counted from encoded docs."""
        df = np.zeros(len(words), dtype=np.int64)
        total = 0
        for toks in token_lists:
            if len(toks):
                total += 1
                df[np.unique(np.asarray(toks, dtype=np.int64))] += 1
        return cls(words, df, total)


@dataclass
class Review:
    tokens: list[int]
    raw: str = ""
    review_id: str = ""

    @property
    def is_empty(self) -> bool:
        return len(self.tokens) == 0


@dataclass
class PreprocessReport:
    n_documents: int
    empty_review_ids: list[str]
    n_tokens_kept: int
    n_tokens_pruned: int
    n_words_before_pruning: int
    n_words_after_pruning: int

    def to_dict(self):
        return {
            "n_documents": self.n_documents,
            "n_empty_reviews": len(self.empty_review_ids),
            "empty_review_ids": list(self.empty_review_ids),
            "n_tokens_kept": self.n_tokens_kept,
            "n_tokens_pruned": self.n_tokens_pruned,
            "n_words_before_pruning": self.n_words_before_pruning,
            "n_words_after_pruning": self.n_words_after_pruning,
        }


@dataclass
class Corpus:
    reviews: list[Review]
    vocabulary: Vocabulary
    source: str = ""
    report: PreprocessReport | None = field(default=None, compare=False, repr=False)

    def __len__(self):
        return len(self.reviews)

    @property
    def docs(self) -> list[np.ndarray]:
        return [np.asarray(r.tokens, dtype=np.int64) for r in self.reviews]

    @property
    def n_tokens(self) -> int:
        return sum(len(r.tokens) for r in self.reviews)

    def to_json(self) -> str:
        return dump_json(
            {
                "version": CORPUS_FORMAT_VERSION,
                "source": self.source,
                "vocabulary": self.vocabulary.words,
                "reviews": [{"id": r.review_id, "tokens": list(map(int, r.tokens))} for r in self.reviews],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "Corpus":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DataError(f"corpus file is not valid JSON: {exc}") from exc
        if obj.get("version") != CORPUS_FORMAT_VERSION:
            raise DataError(f"unsupported corpus version {obj.get('version')!r}")
        words = obj["vocabulary"]
        reviews = [Review(tokens=list(r["tokens"]), review_id=r["id"]) for r in obj["reviews"]]
        V = len(words)
        for r in reviews:
            if any(not 0 <= t < V for t in r.tokens):
                raise DataError(f"review {r.review_id!r} has token id outside the vocabulary")
        vocab = Vocabulary.from_token_lists([r.tokens for r in reviews], words)
        return cls(reviews, vocab, obj.get("source", ""))

    def save(self, path) -> None:
        atomic_write_text(path, self.to_json())

    @classmethod
    def load(cls, path) -> "Corpus":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise DataError(f"cannot read corpus {path}: {exc}") from exc
        return cls.from_json(text)


@dataclass
class PreprocessConfig:
    stopwords: frozenset = frozenset()
    min_doc_freq: int = 2
    normalizer: Normalizer | None = light_stem
    source: str = ""


def preprocess(text: str, config: PreprocessConfig) -> list[str]:
    """Run tokenize, filter and normalize on one document."""
    return normalize(filter_tokens(tokenize(text), config.stopwords), config.normalizer)


def build_corpus(
    documents: Sequence[str],
    config: PreprocessConfig | None = None,
    review_ids: Sequence[str] | None = None,
) -> Corpus:
    """Preprocess ``documents`` and encode them against a pruned vocabulary.

    Words found in fewer than ``config.min_doc_freq`` documents are removed
    from the vocabulary and from every review. Reviews left with no tokens
    stay in the corpus (their ids are listed in ``corpus.report``) so that
    positions line up with any external labels.
    """
    config = config or PreprocessConfig()
    if config.min_doc_freq < 1:
        raise ValueError("min_doc_freq must be >= 1")
    if not documents:
        raise DataError("no documents to build a corpus from")
    if review_ids is None:
        review_ids = [str(i) for i in range(len(documents))]
    if len(review_ids) != len(documents):
        raise ValueError("review_ids and documents differ in length")

    token_lists = [preprocess(doc, config) for doc in documents]
    df: dict[str, int] = {}
    for toks in token_lists:
        for w in set(toks):
            df[w] = df.get(w, 0) + 1
    kept = sorted(w for w, n in df.items() if n >= config.min_doc_freq)
    ids = {w: i for i, w in enumerate(kept)}

    reviews = []
    n_kept = n_pruned = 0
    for rid, doc, toks in zip(review_ids, documents, token_lists):
        enc = [ids[t] for t in toks if t in ids]
        n_kept += len(enc)
        n_pruned += len(toks) - len(enc)
        reviews.append(Review(tokens=enc, raw=doc, review_id=str(rid)))

    if n_kept == 0:
        raise DataError("every review is empty after preprocessing")
    vocab = Vocabulary.from_token_lists([r.tokens for r in reviews], kept)
    report = PreprocessReport(
        n_documents=len(reviews),
        empty_review_ids=[r.review_id for r in reviews if r.is_empty],
        n_tokens_kept=n_kept,
        n_tokens_pruned=n_pruned,
        n_words_before_pruning=len(df),
        n_words_after_pruning=len(kept),
    )
    return Corpus(reviews, vocab, config.source, report)
