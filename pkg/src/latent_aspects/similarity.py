"""Resnik information-content similarity over a word taxonomy.

Taxonomy files are UTF-8 TSV with three record kinds::

    C<TAB>concept_id<TAB>freq        a concept and its raw frequency
    E<TAB>child_id<TAB>parent_id     an is-a edge
    W<TAB>word<TAB>concept_id        a word sense

Blank lines and lines starting with ``#`` are ignored. A concept's cumulative
frequency counts every descendant once, even when the graph has diamonds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from graphlib import CycleError, TopologicalSorter
from typing import Iterable, Mapping

from .corpus import Vocabulary
from .errors import DataError


@dataclass(frozen=True)
class SimilarityScore:
    value: float
    lcs: str | None = None


class Taxonomy:
    """An immutable is-a DAG with per-concept frequencies.

    ``smoothing`` is added to every raw concept frequency before accumulation
    (Laplace smoothing by default), which keeps every information content finite.
    """

    def __init__(
        self,
        freq: Mapping[str, float],
        parents: Mapping[str, Iterable[str]],
        word_to_concepts: Mapping[str, Iterable[str]],
        smoothing: float = 1.0,
    ):
        self.concepts = sorted(freq)
        known = set(self.concepts)
        self.parents = {c: tuple(sorted(set(parents.get(c, ())))) for c in self.concepts}
        for c, ps in parents.items():
            if c not in known:
                raise DataError(f"edge from unknown concept {c!r}")
            for p in ps:
                if p not in known:
                    raise DataError(f"edge to unknown concept {p!r}")
        self.word_to_concepts = {}
        for w, cs in word_to_concepts.items():
            cs = tuple(sorted(set(cs)))
            for c in cs:
                if c not in known:
                    raise DataError(f"word {w!r} maps to unknown concept {c!r}")
            self.word_to_concepts[w] = cs
        self.freq = {c: float(freq[c]) + smoothing for c in self.concepts}
        if any(f < 0 for f in self.freq.values()):
            raise DataError("negative concept frequency")
        self.smoothing = smoothing

        try:
            order = list(TopologicalSorter(self.parents).static_order())
        except CycleError as exc:
            raise DataError(f"taxonomy has a cycle: {exc.args[1]}") from exc
        # parents come before children in `order`
        self.ancestors: dict[str, frozenset] = {}
        for c in order:
            anc = {c}
            for p in self.parents[c]:
                anc |= self.ancestors[p]
            self.ancestors[c] = frozenset(anc)

        cum = dict.fromkeys(self.concepts, 0.0)
        for c in self.concepts:
            for a in self.ancestors[c]:
                cum[a] += self.freq[c]
        self.cumulative_freq = cum
        self.roots = [c for c in self.concepts if not self.parents[c]]
        self.total = sum(cum[r] for r in self.roots)
        if not self.total > 0:
            raise DataError("taxonomy has no frequency mass")
        for c in self.concepts:
            if not cum[c] > 0:
                raise DataError(f"concept {c!r} has zero cumulative frequency; use smoothing")
        self._ic = {c: -math.log(cum[c] / self.total) for c in self.concepts}

    @classmethod
    def load(cls, path, smoothing: float = 1.0) -> "Taxonomy":
        freq: dict[str, float] = {}
        parents: dict[str, list[str]] = {}
        words: dict[str, list[str]] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\r\n")
                if not line.strip() or line.startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) != 3 or parts[0] not in ("C", "E", "W"):
                    raise DataError(f"{path}:{lineno}: malformed record {line!r}")
                kind, a, b = parts
                if kind == "C":
                    try:
                        freq[a] = float(b)
                    except ValueError:
                        raise DataError(f"{path}:{lineno}: bad frequency {b!r}") from None
                elif kind == "E":
                    parents.setdefault(a, []).append(b)
                else:
                    words.setdefault(a, []).append(b)
        return cls(freq, parents, words, smoothing)

    def __contains__(self, word):
        return word in self.word_to_concepts

    def senses(self, word: str) -> tuple[str, ...]:
        return self.word_to_concepts.get(word, ())


def information_content(taxonomy: Taxonomy, concept: str) -> float:
    """``-ln(cumulative_freq(concept) / total)``."""
    try:
        return taxonomy._ic[concept]
    except KeyError:
        raise KeyError(f"unknown concept {concept!r}") from None


def _best_subsumer(taxonomy: Taxonomy, anc_ic: Mapping[str, float], senses) -> SimilarityScore:
    best, lcs = 0.0, None
    for s in senses:
        for c in taxonomy.ancestors[s]:
            ic = anc_ic.get(c)
            if ic is None:
                continue
            if lcs is None or ic > best or (ic == best and c < lcs):
                best, lcs = ic, c
    return SimilarityScore(best, lcs)


def _ancestor_ic(taxonomy: Taxonomy, word: str) -> dict[str, float]:
    out = {}
    for s in taxonomy.senses(word):
        for c in taxonomy.ancestors[s]:
            out[c] = taxonomy._ic[c]
    return out


def resnik(taxonomy: Taxonomy, w1: str, w2: str) -> SimilarityScore:
    """IC of the most informative concept subsuming some sense of each word."""
    if w1 not in taxonomy or w2 not in taxonomy:
        return SimilarityScore(0.0, None)
    return _best_subsumer(taxonomy, _ancestor_ic(taxonomy, w1), taxonomy.senses(w2))


def nearest_in_vocab(taxonomy: Taxonomy, target: str, vocabulary: Vocabulary | Iterable[str]):
    """Vocabulary word most Resnik-similar to ``target``, as ``(word, score)``.

    Ties go to the lexicographically smaller word. Returns ``None`` when the
    target has no senses or no candidate scores above zero.
    """
    if target not in taxonomy:
        return None
    words = vocabulary.words if isinstance(vocabulary, Vocabulary) else list(vocabulary)
    anc_ic = _ancestor_ic(taxonomy, target)
    best_word, best = None, None
    for w in words:
        senses = taxonomy.senses(w)
        if not senses:
            continue
        score = _best_subsumer(taxonomy, anc_ic, senses)
        if best is None or score.value > best.value or (score.value == best.value and w < best_word):
            best_word, best = w, score
    if best is None or best.value <= 0:
        return None
    return best_word, best
