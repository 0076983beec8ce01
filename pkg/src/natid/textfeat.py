"""Tweet text processing: tokens, word embeddings, language and sentiment.

* :func:`train_skipgram` is a small skip-gram trainer with negative sampling.
* :func:`identify_language` ranks character-trigram profiles by the
  out-of-place distance (Cavnar and Trenkle, 1994).
* :func:`sentiment_score` sums token polarities from a lexicon.

Language profiles and the lexicon load from plain-text files, so resources
for other languages can be dropped in without code changes.
"""

from __future__ import annotations

import json
import math
import re
import unicodedata
import warnings
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Optional, Sequence

import numpy as np

URL_TOKEN = "<url>"
MENTION_TOKEN = "<mention>"
UNDETERMINED = "und"

_URL = r"(?:https?://|www\.)\S+"
_TOKEN = re.compile(rf"(?P<url>{_URL})|(?P<mention>@\w+)|(?P<tag>#\w+)|(?P<word>\w+)")
_STRIP = re.compile(rf"{_URL}|[@#]\w+")
_LETTERS = re.compile(r"[^\W\d_]+")

EMBEDDING_DEFAULTS = dict(dimension=100, window=5, negatives=5, epochs=5, min_count=2)


def tokenize(text: str) -> list[str]:
    """Lowercased word tokens; URLs and @-mentions become placeholders.

    >>> tokenize("Hello WORLD http://x.cat @bob #VoteYes!")
    ['hello', 'world', '<url>', '<mention>', '#voteyes']
    """
    text = unicodedata.normalize("NFC", text or "")
    out = []
    for m in _TOKEN.finditer(text):
        kind = m.lastgroup
        if kind == "url":
            out.append(URL_TOKEN)
        elif kind == "mention":
            out.append(MENTION_TOKEN)
        else:
            out.append(m.group().lower())
    return out


# -- embeddings ---------------------------------------------------------------

@dataclass
class EmbeddingTable:
    tokens: tuple[str, ...]
    matrix: np.ndarray
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.tokens = tuple(self.tokens)
        self.matrix = np.asarray(self.matrix, dtype=float)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != len(self.tokens):
            raise ValueError("matrix must have one row per token")
        if self.matrix.shape[1] < 1:
            raise ValueError("dimension must be positive")
        if any(not t for t in self.tokens):
            raise ValueError("empty token in embedding table")
        self.index = {t: i for i, t in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ValueError("duplicate tokens in embedding table")

    @property
    def dimension(self) -> int:
        return self.matrix.shape[1]

    @property
    def vectors(self) -> dict[str, np.ndarray]:
        return {t: self.matrix[i] for t, i in self.index.items()}

    def __contains__(self, token) -> bool:
        return token in self.index

    def __getitem__(self, token) -> np.ndarray:
        return self.matrix[self.index[token]]

    def __len__(self):
        return len(self.tokens)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def train_skipgram(
    corpus: Sequence[Sequence[str]],
    dimension: int = 100,
    window: int = 5,
    negatives: int = 5,
    epochs: int = 5,
    seed: int = 0,
    min_count: int = 2,
    learning_rate: float = 0.025,
    batch_size: int = 1024,
) -> EmbeddingTable:
    """Skip-gram with negative sampling.

    Noise words are drawn from the unigram distribution raised to 0.75 and
    the learning rate decays linearly to 1e-4 of its start value. Updates
    are applied in mini-batches of (centre, context) pairs in a seeded
    order, so a given seed always produces the same table.
    """
    if not corpus:
        raise ValueError("empty corpus")
    if dimension < 2 or window < 1 or negatives < 1 or epochs < 1:
        raise ValueError("dimension >= 2, window >= 1, negatives >= 1 and epochs >= 1 required")
    counts = Counter(tok for sent in corpus for tok in sent)
    vocab = sorted((t for t, c in counts.items() if c >= min_count), key=lambda t: (-counts[t], t))
    if not vocab:
        raise ValueError(f"no token reaches min_count={min_count}")
    index = {t: i for i, t in enumerate(vocab)}

    centres, contexts = [], []
    for sent in corpus:
        ids = np.array([index[t] for t in sent if t in index], dtype=np.int64)
        n = ids.size
        for off in range(1, window + 1):
            if off >= n:
                break
            centres.extend((ids[:-off], ids[off:]))
            contexts.extend((ids[off:], ids[:-off]))
    rng = np.random.default_rng(seed)
    V = len(vocab)
    w_in = (rng.random((V, dimension)) - 0.5) / dimension
    w_out = np.zeros((V, dimension))
    params = dict(dimension=dimension, window=window, negatives=negatives, epochs=epochs,
                  min_count=min_count, seed=seed, learning_rate=learning_rate)
    if not centres:
        return EmbeddingTable(tuple(vocab), w_in, params)
    centres = np.concatenate(centres)
    contexts = np.concatenate(contexts)

    freq = np.array([counts[t] for t in vocab], dtype=float) ** 0.75
    noise_cdf = np.cumsum(freq / freq.sum())
    noise_cdf[-1] = 1.0
    n_pairs = centres.size
    total = epochs * n_pairs
    done = 0
    for _ in range(epochs):
        order = rng.permutation(n_pairs)
        for start in range(0, n_pairs, batch_size):
            batch = order[start:start + batch_size]
            lr = learning_rate * max(1e-4, 1.0 - done / total)
            done += batch.size
            c, o = centres[batch], contexts[batch]
            neg = np.searchsorted(noise_cdf, rng.random((batch.size, negatives)), side="right")
            vc, uo, un = w_in[c], w_out[o], w_out[neg]
            g_pos = 1.0 - _sigmoid(np.einsum("bd,bd->b", vc, uo))
            g_neg = -_sigmoid(np.einsum("bkd,bd->bk", un, vc))
            grad_c = g_pos[:, None] * uo + np.einsum("bk,bkd->bd", g_neg, un)
            np.add.at(w_out, o, lr * g_pos[:, None] * vc)
            np.add.at(w_out, neg.ravel(), lr * (g_neg[:, :, None] * vc[:, None, :]).reshape(-1, dimension))
            np.add.at(w_in, c, lr * grad_c)
    return EmbeddingTable(tuple(vocab), w_in, params)


_HEADER = "#!embeddings "


def save_embeddings(table: EmbeddingTable, path) -> None:
    """Text format: optional ``#!embeddings {json}`` header, then ``token v1 .. vd``."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_HEADER + json.dumps(table.params, sort_keys=True) + "\n")
        for tok, row in zip(table.tokens, table.matrix):
            fh.write(tok + " " + " ".join(f"{v:.9g}" for v in row) + "\n")


def load_embeddings(path) -> EmbeddingTable:
    path = Path(path)
    params: dict = {}
    vectors: dict[str, np.ndarray] = {}
    dim = None
    dupes = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if lineno == 1 and line.startswith(_HEADER):
                params = json.loads(line[len(_HEADER):])
                continue
            parts = line.split()
            if not parts:
                continue
            tok, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
                if dim == 0:
                    raise ValueError(f"{path}:{lineno}: no vector values")
            elif len(values) != dim:
                raise ValueError(f"{path}:{lineno}: expected {dim} values, found {len(values)}")
            try:
                vec = np.array([float(v) for v in values])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric vector value") from None
            if tok in vectors:
                dupes += 1
                del vectors[tok]  # last wins, and takes the later position
            vectors[tok] = vec
    if dupes:
        warnings.warn(f"{path}: {dupes} duplicate token(s); last occurrence kept", stacklevel=2)
    if dim is None:
        raise ValueError(f"{path}: no embeddings found")
    return EmbeddingTable(tuple(vectors), np.vstack(list(vectors.values())), params)


def embed_text(tokens: Iterable[str], table: EmbeddingTable) -> np.ndarray:
    """Mean vector of the in-vocabulary tokens; zeros if there are none."""
    rows = [table.index[t] for t in tokens if t in table.index]
    if not rows:
        return np.zeros(table.dimension)
    return table.matrix[rows].mean(axis=0)


# -- language identification ---------------------------------------------------

@dataclass(frozen=True)
class LanguageProfile:
    language: str
    trigrams: tuple[str, ...]  # most frequent first

    def __post_init__(self):
        object.__setattr__(self, "trigrams", tuple(self.trigrams))
        if len(set(self.trigrams)) != len(self.trigrams):
            raise ValueError(f"profile {self.language!r} repeats a trigram")
        object.__setattr__(self, "_rank", {g: i for i, g in enumerate(self.trigrams)})

    @property
    def ranks(self) -> Mapping[str, int]:
        return self._rank


def _clean_for_lid(text: str) -> str:
    text = unicodedata.normalize("NFC", text or "")
    return " ".join(_STRIP.sub(" ", text).split())


def ranked_trigrams(texts: Iterable[str], size: Optional[int] = 300) -> list[str]:
    counts: Counter = Counter()
    for text in texts:
        for word in _LETTERS.findall(_clean_for_lid(text).lower()):
            padded = f"_{word}_"
            counts.update(padded[i:i + 3] for i in range(len(padded) - 2))
    ranked = sorted(counts, key=lambda g: (-counts[g], g))
    return ranked if size is None else ranked[:size]


def build_profile(texts: Iterable[str], language: str, size: int = 300) -> LanguageProfile:
    return LanguageProfile(language, tuple(ranked_trigrams(texts, size)))


def out_of_place_distance(text_trigrams: Sequence[str], profile: LanguageProfile) -> int:
    ranks = profile.ranks
    penalty = len(profile.trigrams)
    return sum(abs(i - ranks[g]) if g in ranks else penalty for i, g in enumerate(text_trigrams))


def identify_language(text: str, profiles: Sequence[LanguageProfile], min_chars: int = 10) -> str:
    """Nearest profile by out-of-place distance, or ``"und"`` for short texts.

    URLs, mentions and hashtags are removed before measuring the length.
    Distance ties go to the alphabetically first language code.
    """
    if not profiles:
        raise ValueError("identify_language needs at least one profile")
    cleaned = _clean_for_lid(text)
    if len(cleaned) < min_chars:
        return UNDETERMINED
    grams = ranked_trigrams([cleaned], size=None)
    if not grams:
        return UNDETERMINED
    best = min(profiles, key=lambda p: (out_of_place_distance(grams, p), p.language))
    return best.language


def save_profiles(profiles: Iterable[LanguageProfile], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in profiles:
            for rank, g in enumerate(p.trigrams, start=1):
                fh.write(f"{p.language}\t{g}\t{rank}\n")


def load_profiles(path) -> list[LanguageProfile]:
    """Read ``lang<TAB>trigram<TAB>rank`` lines into profiles (in file order)."""
    grams: dict[str, list[tuple[int, str]]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 tab-separated fields")
            lang, gram, rank = parts
            grams.setdefault(lang, []).append((int(rank), gram))
    return [LanguageProfile(lang, tuple(g for _, g in sorted(items))) for lang, items in grams.items()]


SAMPLE_LANGUAGES = ("ca", "en", "es", "eu", "gd")


def sample_sentences(language: str) -> list[str]:
    """The bundled sample sentences for ``language`` (one per line)."""
    text = resources.files("natid.data.lang").joinpath(f"{language}.txt").read_text(encoding="utf-8")
    return [line.strip() for line in text.splitlines() if line.strip()]


@lru_cache(maxsize=None)
def _default_profiles(size: int) -> tuple[LanguageProfile, ...]:
    return tuple(build_profile(sample_sentences(lang), lang, size) for lang in SAMPLE_LANGUAGES)


def default_profiles(size: int = 300) -> list[LanguageProfile]:
    """Profiles for Catalan, English, Spanish, Basque and Scottish Gaelic
    built from the bundled sample sentences."""
    return list(_default_profiles(size))


# -- sentiment -------------------------------------------------------------------

@dataclass(frozen=True)
class SentimentLexicon:
    language: str
    polarity: Mapping[str, float]

    def __post_init__(self):
        bad = [t for t, v in self.polarity.items() if not -1.0 <= v <= 1.0]
        if bad:
            raise ValueError(f"polarities outside [-1, 1] for {bad[:5]}")


class Sentiment(NamedTuple):
    score: float
    label: str  # "neg", "neu" or "pos"


def sentiment_score(tokens: Iterable[str], lexicon: SentimentLexicon) -> Sentiment:
    pol = lexicon.polarity
    score = math.fsum(pol.get(t, 0.0) for t in tokens)
    label = "pos" if score > 0 else "neg" if score < 0 else "neu"
    return Sentiment(score, label)


def read_lexicon(lines: Iterable[str], language: str = "mul", source: str = "<lexicon>") -> SentimentLexicon:
    pol: dict[str, float] = {}
    for lineno, line in enumerate(lines, start=1):
        line = line.rstrip("\n")
        if not line or line.startswith("#"):
            continue
        try:
            tok, value = line.split("\t")
            pol[unicodedata.normalize("NFC", tok).lower()] = float(value)
        except ValueError:
            raise ValueError(f"{source}:{lineno}: expected 'token<TAB>polarity'") from None
    return SentimentLexicon(language, pol)


def load_lexicon(path, language: str = "mul") -> SentimentLexicon:
    with open(path, encoding="utf-8") as fh:
        return read_lexicon(fh, language, str(path))


@lru_cache(maxsize=None)
def default_lexicon() -> SentimentLexicon:
    text = resources.files("natid.data.lang").joinpath("lexicon.tsv").read_text(encoding="utf-8")
    return read_lexicon(text.splitlines(), "mul", "lexicon.tsv")
