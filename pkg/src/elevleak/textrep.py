"""Text-like encoding of elevation profiles and bag-of-words features.

Profiles are discretized, each distinct discrete value becomes a fixed-width
word over an alphabet, and a profile becomes the concatenation of its words.
A vocabulary of word-aligned n-grams is collected from the training corpus
and each sample is turned into normalized non-overlapping n-gram counts.
"""

from __future__ import annotations

import json
import logging
import string
from dataclasses import dataclass, field
from decimal import ROUND_FLOOR, Decimal
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    AlphabetTooSmall,
    InvalidAlphabet,
    MisalignedCorpus,
    NonFiniteElevation,
    UnknownValue,
)
from .profile import as_array

log = logging.getLogger(__name__)

DEFAULT_ALPHABET = string.ascii_lowercase
MODES = ("raw", "fine")

_MILLI = Decimal("0.001")


def _fine_floor(value: float) -> float:
    # Decimal(repr) keeps the value as written, so 0.29 stays 0.290 rather
    # than dropping to 0.289 via its binary expansion.
    return float(Decimal(repr(float(value))).quantize(_MILLI, rounding=ROUND_FLOOR))


def discretize(profile, mode: str = "raw") -> np.ndarray:
    """Floor every elevation (``raw``) or floor it to 3 decimals (``fine``).

    Returns an int64 array in raw mode and a float64 array in fine mode.
    """
    values = as_array(profile)
    if not np.all(np.isfinite(values)):
        raise NonFiniteElevation("cannot discretize non-finite elevations")
    if mode == "raw":
        return np.floor(values).astype(np.int64)
    if mode == "fine":
        return np.array([_fine_floor(v) for v in values], dtype=np.float64)
    raise ValueError(f"unknown discretization mode {mode!r}; expected one of {MODES}")


def word_size(l: int, c: int) -> int:
    """Smallest w >= 1 with l**w >= c."""
    if l < 2:
        raise InvalidAlphabet(f"alphabet length must be at least 2, got {l}")
    if c < 1:
        raise ValueError("need at least one distinct value")
    w, capacity = 1, l
    while capacity < c:
        w += 1
        capacity *= l
    return w


def _numeral(rank: int, alphabet: str, width: int) -> str:
    digits = []
    base = len(alphabet)
    for _ in range(width):
        rank, d = divmod(rank, base)
        digits.append(alphabet[d])
    return "".join(reversed(digits))


@dataclass
class Codebook:
    alphabet: str
    word_size: int
    value_to_word: dict = field(repr=False)

    def __post_init__(self):
        self.word_to_value = {w: v for v, w in self.value_to_word.items()}

    def __len__(self):
        return len(self.value_to_word)

    def to_json(self) -> dict:
        values = sorted(self.value_to_word)
        return {"alphabet": self.alphabet, "word_size": self.word_size,
                "values": [v.item() if hasattr(v, "item") else v for v in values],
                "words": [self.value_to_word[v] for v in values]}

    @classmethod
    def from_json(cls, doc: dict) -> "Codebook":
        return cls(doc["alphabet"], doc["word_size"], dict(zip(doc["values"], doc["words"])))


def build_codebook(values: Iterable, alphabet: str = DEFAULT_ALPHABET) -> Codebook:
    """Assign words to distinct discrete values in ascending value order.

    ``values`` may be a flat iterable of discrete values or an iterable of
    discrete signals (arrays); the k-th smallest value gets the base-l
    numeral of k, left-padded to the word size.
    """
    if len(set(alphabet)) != len(alphabet):
        raise InvalidAlphabet("alphabet symbols must be distinct")
    unique = set()
    for item in values:
        if np.ndim(item) == 0:
            unique.add(item.item() if hasattr(item, "item") else item)
        else:
            unique.update(np.asarray(item).tolist())
    if not unique:
        raise ValueError("cannot build a codebook from an empty corpus")
    ordered = sorted(unique)
    w = word_size(len(alphabet), len(ordered))
    if len(alphabet) ** w < len(ordered):
        raise AlphabetTooSmall(f"{len(alphabet)}**{w} words cannot cover {len(ordered)} values")
    return Codebook(alphabet, w, {v: _numeral(k, alphabet, w) for k, v in enumerate(ordered)})


def encode_discrete(discrete, codebook: Codebook) -> str:
    lookup = codebook.value_to_word
    try:
        return "".join(lookup[v] for v in np.asarray(discrete).tolist())
    except KeyError as exc:
        raise UnknownValue(exc.args[0]) from None


def encode_profile(profile, codebook: Codebook, mode: str = "raw") -> str:
    return encode_discrete(discretize(profile, mode), codebook)


def decode_text(text: str, codebook: Codebook) -> list:
    """Invert an encoding back to its discrete values."""
    w = codebook.word_size
    if len(text) % w:
        raise MisalignedCorpus(f"text length {len(text)} is not a multiple of word size {w}")
    try:
        return [codebook.word_to_value[text[i:i + w]] for i in range(0, len(text), w)]
    except KeyError as exc:
        raise UnknownValue(exc.args[0]) from None


# ---------------------------------------------------------------------------
# Vocabulary and bag-of-words


@dataclass
class Vocabulary:
    ngram_order: int
    word_size: int
    entries: list[str]
    orders: tuple[int, ...] = ()

    def __post_init__(self):
        if not self.orders:
            lengths = {len(e) // self.word_size for e in self.entries}
            self.orders = tuple(sorted(lengths)) or (self.ngram_order,)
        self.index = {e: i for i, e in enumerate(self.entries)}
        if len(self.index) != len(self.entries):
            raise ValueError("vocabulary entries must be unique")

    def __len__(self):
        return len(self.entries)

    def __contains__(self, entry):
        return entry in self.index

    def to_json(self) -> dict:
        return {"ngram_order": self.ngram_order, "word_size": self.word_size,
                "orders": list(self.orders), "entries": list(self.entries)}

    @classmethod
    def from_json(cls, doc: dict) -> "Vocabulary":
        return cls(doc["ngram_order"], doc["word_size"], list(doc["entries"]),
                   tuple(doc.get("orders", ())))


def _check_aligned(line: str, w: int):
    if len(line) % w:
        raise MisalignedCorpus(f"line of length {len(line)} is not a multiple of word size {w}")


def build_vocabulary(corpus: Sequence[str], n: int, w: int, cumulative: bool = False) -> Vocabulary:
    """Collect word-aligned n-grams (window w*n, stride w) in first-seen order.

    With ``cumulative`` the corpus is traversed once per order 1..n and the
    vocabulary holds every k-gram for k <= n.
    """
    if n < 1 or w < 1:
        raise ValueError("n and w must be at least 1")
    for line in corpus:
        _check_aligned(line, w)
    orders = tuple(range(1, n + 1)) if cumulative else (n,)
    seen = {}
    for k in orders:
        width = k * w
        for line in corpus:
            for start in range(0, len(line) - width + 1, w):
                seen.setdefault(line[start:start + width], None)
    return Vocabulary(n, w, list(seen), orders)


def ngram_counts(sample: str, vocabulary: Vocabulary) -> np.ndarray:
    """Non-overlapping occurrence counts of each entry (greedy, left to right)."""
    w = vocabulary.word_size
    _check_aligned(sample, w)
    index = vocabulary.index
    counts = np.zeros(len(vocabulary), dtype=np.int64)
    for k in vocabulary.orders:
        width = k * w
        free_from = {}
        for start in range(0, len(sample) - width + 1, w):
            j = index.get(sample[start:start + width])
            if j is not None and start >= free_from.get(j, 0):
                counts[j] += 1
                free_from[j] = start + width
    return counts


def bow_features(sample: str, vocabulary: Vocabulary) -> np.ndarray:
    """Normalized bag-of-words vector; all zeros when nothing matches."""
    counts = ngram_counts(sample, vocabulary).astype(np.float64)
    total = counts.sum()
    return counts / total if total else counts


def term_frequencies(vocabulary: Vocabulary, corpus: Iterable[str]) -> np.ndarray:
    tf = np.zeros(len(vocabulary), dtype=np.int64)
    for line in corpus:
        tf += ngram_counts(line, vocabulary)
    return tf


def prune_vocabulary(vocabulary: Vocabulary, corpus: Iterable[str], min_term_frequency: int = 2,
                     max_features: int | None = None) -> Vocabulary:
    """Drop entries whose corpus-wide count is below ``min_term_frequency``.

    ``max_features`` additionally keeps only the most frequent survivors
    (ties broken by vocabulary order). Survivor order is preserved.
    """
    if min_term_frequency < 0:
        raise ValueError("min_term_frequency must be non-negative")
    if min_term_frequency == 0 and max_features is None:
        return Vocabulary(vocabulary.ngram_order, vocabulary.word_size,
                          list(vocabulary.entries), vocabulary.orders)
    tf = term_frequencies(vocabulary, corpus)
    keep = tf >= min_term_frequency
    if max_features is not None and keep.sum() > max_features:
        candidates = np.flatnonzero(keep)
        ranked = candidates[np.argsort(-tf[candidates], kind="stable")][:max_features]
        keep = np.zeros_like(keep)
        keep[ranked] = True
    entries = [e for e, k in zip(vocabulary.entries, keep) if k]
    return Vocabulary(vocabulary.ngram_order, vocabulary.word_size, entries, vocabulary.orders)


# ---------------------------------------------------------------------------
# Train/transform wrapper


@dataclass
class TextConfig:
    mode: str = "raw"
    ngram_order: int = 8
    cumulative: bool = True
    min_term_frequency: int = 2
    max_features: int | None = None
    alphabet: str = DEFAULT_ALPHABET


class TextPipeline:
    """Codebook + vocabulary fitted on training profiles only."""

    def __init__(self, config: TextConfig | None = None):
        self.config = config or TextConfig()
        self.codebook: Codebook | None = None
        self.vocabulary: Vocabulary | None = None

    def fit(self, profiles) -> "TextPipeline":
        cfg = self.config
        discrete = [discretize(p, cfg.mode) for p in profiles]
        self.codebook = build_codebook(discrete, cfg.alphabet)
        corpus = [encode_discrete(d, self.codebook) for d in discrete]
        vocab = build_vocabulary(corpus, cfg.ngram_order, self.codebook.word_size, cfg.cumulative)
        self.vocabulary = prune_vocabulary(vocab, corpus, cfg.min_term_frequency, cfg.max_features)
        return self

    def encode(self, profiles) -> tuple[list[str | None], list[int]]:
        """Encode profiles; samples with out-of-codebook values come back as None."""
        texts, dropped = [], []
        for i, p in enumerate(profiles):
            try:
                texts.append(encode_profile(p, self.codebook, self.config.mode))
            except UnknownValue as exc:
                log.debug("dropping sample %d: %s", i, exc)
                texts.append(None)
                dropped.append(i)
        if dropped:
            log.warning("dropped %d of %d samples with values outside the codebook", len(dropped), len(texts))
        return texts, dropped

    def transform(self, profiles) -> tuple[np.ndarray, np.ndarray]:
        """Return (features, kept) where ``kept`` indexes the encodable samples."""
        if self.vocabulary is None:
            raise RuntimeError("pipeline is not fitted")
        texts, _ = self.encode(profiles)
        kept = np.array([i for i, t in enumerate(texts) if t is not None], dtype=np.int64)
        X = np.zeros((len(kept), len(self.vocabulary)), dtype=np.float64)
        for row, i in enumerate(kept):
            X[row] = bow_features(texts[i], self.vocabulary)
        empty = int((X.sum(axis=1) == 0).sum())
        if empty:
            log.info("%d samples have no vocabulary hits (all-zero features)", empty)
        return X, kept

    def to_json(self) -> dict:
        return {"config": self.config.__dict__, "codebook": self.codebook.to_json(),
                "vocabulary": self.vocabulary.to_json()}

    @classmethod
    def from_json(cls, doc: dict) -> "TextPipeline":
        pipe = cls(TextConfig(**doc["config"]))
        pipe.codebook = Codebook.from_json(doc["codebook"])
        pipe.vocabulary = Vocabulary.from_json(doc["vocabulary"])
        return pipe

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, sort_keys=True)

    @classmethod
    def load(cls, path) -> "TextPipeline":
        with open(path) as fh:
            return cls.from_json(json.load(fh))
