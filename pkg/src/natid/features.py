"""Per-user feature matrices.

Four families feed the classifiers (timeline and favourite embeddings,
interaction counts, binary network membership); a fifth, the 30
behavioural features, backs the PI-vs-AI group comparison.
"""

from __future__ import annotations

import csv
import enum
import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence
from urllib.parse import urlsplit

import numpy as np
import scipy.sparse as sp

from .graph import interaction_counts
from .model import Dataset, StanceLabel, Territory, Tweet, UserRecord
from .stats import Direction, TestResult, percentile_cutoff, welch_t_test
from .textfeat import (
    EmbeddingTable,
    LanguageProfile,
    SentimentLexicon,
    default_lexicon,
    default_profiles,
    embed_text,
    identify_language,
    sentiment_score,
    tokenize,
)

DAY = 86400.0
DEFAULT_PERCENTILE = 0.99


class FeatureError(ValueError):
    pass


class Family(str, enum.Enum):
    TIMELINE = "Timeline"
    INTERACTIONS = "Interactions"
    FAVOURITES = "Favourites"
    NETWORK = "Network"
    BEHAVIORAL = "Behavioral"

    @classmethod
    def parse(cls, value) -> "Family":
        if isinstance(value, Family):
            return value
        for f in cls:
            if f.value.lower() == str(value).lower():
                return f
        raise ValueError(f"unknown feature family {value!r}")


CLASSIFIER_FAMILIES = (Family.TIMELINE, Family.INTERACTIONS, Family.FAVOURITES, Family.NETWORK)


@dataclass
class FeatureMatrix:
    family: Family
    row_ids: tuple[str, ...]
    columns: tuple[str, ...]
    values: np.ndarray | sp.csr_matrix
    labels: Optional[tuple[Optional[StanceLabel], ...]] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.family = Family.parse(self.family)
        self.row_ids = tuple(self.row_ids)
        self.columns = tuple(self.columns)
        if sp.issparse(self.values):
            self.values = sp.csr_matrix(self.values, dtype=float)
        else:
            self.values = np.asarray(self.values, dtype=float).reshape(len(self.row_ids), len(self.columns))
        if self.values.shape != (len(self.row_ids), len(self.columns)):
            raise FeatureError(f"values shape {self.values.shape} does not match rows x columns")
        if self.labels is not None:
            self.labels = tuple(StanceLabel.parse(l) for l in self.labels)
            if len(self.labels) != len(self.row_ids):
                raise FeatureError("labels must align with rows")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.values)

    def dense(self) -> np.ndarray:
        return self.values.toarray() if self.is_sparse else self.values

    def take(self, rows: Sequence[int]) -> "FeatureMatrix":
        rows = np.asarray(rows, dtype=np.int64)
        labels = None if self.labels is None else tuple(self.labels[i] for i in rows)
        return FeatureMatrix(self.family, tuple(self.row_ids[i] for i in rows), self.columns,
                             self.values[rows], labels, dict(self.meta))

    def column(self, name: str) -> np.ndarray:
        j = self.columns.index(name)
        col = self.values[:, j]
        return col.toarray().ravel() if self.is_sparse else col


def _rows(dataset: Dataset, labeled_only: bool) -> list[UserRecord]:
    users = sorted(dataset.users.values(), key=lambda u: u.user_id)
    return [u for u in users if u.label is not None] if labeled_only else users


def _labels(users: Sequence[UserRecord]) -> tuple:
    return tuple(u.label for u in users)


# -- embedding families ------------------------------------------------------------

def _mean_tweet_embedding(tweets: Sequence[Tweet], table: EmbeddingTable) -> np.ndarray:
    if not tweets:
        return np.zeros(table.dimension)
    return np.mean([embed_text(tokenize(t.text), table) for t in tweets], axis=0)


def _embedding_family(dataset, table, family, pick, labeled_only) -> FeatureMatrix:
    users = _rows(dataset, labeled_only)
    values = np.zeros((len(users), table.dimension))
    for i, u in enumerate(users):
        values[i] = _mean_tweet_embedding(pick(u), table)
    cols = tuple(f"emb{j}" for j in range(table.dimension))
    return FeatureMatrix(family, tuple(u.user_id for u in users), cols, values, _labels(users))


def timeline_features(dataset: Dataset, table: EmbeddingTable, labeled_only: bool = True) -> FeatureMatrix:
    """Per user, the mean over timeline tweets of each tweet's mean word vector."""
    return _embedding_family(dataset, table, Family.TIMELINE, lambda u: u.timeline, labeled_only)


def favourite_features(dataset: Dataset, table: EmbeddingTable, labeled_only: bool = True) -> FeatureMatrix:
    return _embedding_family(dataset, table, Family.FAVOURITES, lambda u: u.favourites, labeled_only)


# -- sparse families ------------------------------------------------------------

def _sparse_family(family, users, per_user: Mapping[str, Mapping[str, float]],
                   vocabulary: Sequence[str], meta) -> FeatureMatrix:
    col = {v: j for j, v in enumerate(vocabulary)}
    rows, cols, vals = [], [], []
    for i, u in enumerate(users):
        for target, value in per_user.get(u.user_id, {}).items():
            j = col.get(target)
            if j is not None and value:
                rows.append(i)
                cols.append(j)
                vals.append(value)
    values = sp.csr_matrix((vals, (rows, cols)), shape=(len(users), len(vocabulary)), dtype=float)
    return FeatureMatrix(family, tuple(u.user_id for u in users), tuple(vocabulary), values,
                         _labels(users), meta)


def interaction_vocabulary(dataset: Dataset, q: float = DEFAULT_PERCENTILE,
                           users: Optional[Iterable[str]] = None,
                           weights: Optional[Mapping[str, float]] = None) -> list[str]:
    """Interaction targets at or above the ``q`` count percentile.

    Counts run over all users (or only ``users``, for per-fold vocabularies);
    targets need not be labeled or even collected.
    """
    keep = None if users is None else set(users)
    totals: Counter = Counter()
    for (src, dst), w in interaction_counts(dataset, weights).items():
        if keep is None or src in keep:
            totals[dst] += w
    if not totals:
        raise FeatureError("no interactions in dataset")
    return sorted(percentile_cutoff(totals, q))


def interaction_features(dataset: Dataset, q: float = DEFAULT_PERCENTILE,
                         vocabulary: Optional[Sequence[str]] = None,
                         weights: Optional[Mapping[str, float]] = None,
                         labeled_only: bool = True) -> FeatureMatrix:
    """Counts of each user's retweets, replies, mentions and favourites per
    vocabulary target (sparse)."""
    counts = interaction_counts(dataset, weights)
    if vocabulary is None:
        vocabulary = interaction_vocabulary(dataset, q, weights=weights)
    per_user: dict[str, dict[str, float]] = defaultdict(dict)
    for (src, dst), w in counts.items():
        per_user[src][dst] = w
    users = _rows(dataset, labeled_only)
    return _sparse_family(Family.INTERACTIONS, users, per_user, vocabulary, {"q": q})


def network_vocabulary(dataset: Dataset, q: float = DEFAULT_PERCENTILE,
                       users: Optional[Iterable[str]] = None) -> list[str]:
    keep = None if users is None else set(users)
    totals: Counter = Counter()
    for uid, u in dataset.users.items():
        if keep is None or uid in keep:
            totals.update(u.followees)
            totals.update(u.followers)
    if not totals:
        raise FeatureError("no follow relations in dataset")
    return sorted(percentile_cutoff(totals, q))


def network_features(dataset: Dataset, q: float = DEFAULT_PERCENTILE,
                     vocabulary: Optional[Sequence[str]] = None,
                     labeled_only: bool = True) -> FeatureMatrix:
    """1 where the column account is among the row user's followees or followers."""
    if vocabulary is None:
        vocabulary = network_vocabulary(dataset, q)
    per_user = {uid: {v: 1.0 for v in u.network()} for uid, u in dataset.users.items()}
    users = _rows(dataset, labeled_only)
    return _sparse_family(Family.NETWORK, users, per_user, vocabulary, {"q": q})


# -- behavioural features ------------------------------------------------------------

BEHAVIORAL_FEATURES = (
    (1, "tweets_posted", "Number of tweets posted"),
    (2, "tweets_favourited", "Number of tweets favourited"),
    (3, "tweets_per_day", "Tweeting rate (avg. tweets per day)"),
    (4, "account_age_days", "Age of the account"),
    (5, "retweets_received", "Number of retweets their tweets get"),
    (6, "favourites_received", "Number of times their tweets are favourited"),
    (7, "urls_local_tld", "Posted URLs in the nation's TLD"),
    (8, "urls_state_tld", "Posted URLs in the state's TLD"),
    (9, "followers", "Number of accounts that follow them"),
    (10, "followees", "Number of accounts they follow"),
    (11, "verified", "User is verified"),
    (12, "geo_enabled", "User has geolocation enabled"),
    (13, "profile_url_local_tld", "Profile URL in the nation's TLD"),
    (14, "profile_url_state_tld", "Profile URL in the state's TLD"),
    (15, "ui_language_local", "Account language is the nation's"),
    (16, "ui_language_state", "Account language is the state's"),
    (17, "interactions_within", "Interactions within national identity"),
    (18, "interactions_across", "Interactions across national identities"),
    (19, "favouriting_within", "Favouriting within national identity"),
    (20, "favouriting_across", "Favouriting across national identities"),
    (21, "mentions_within", "Mentions within national identity"),
    (22, "mentions_across", "Mentions across national identities"),
    (23, "retweets_within", "Retweets within national identity"),
    (24, "retweets_across", "Retweets across national identities"),
    (25, "listed_count", "Number of times added to lists by others"),
    (26, "follows_within", "Follows people of their own national identity"),
    (27, "follows_across", "Follows people of the opposing national identity"),
    (28, "tweets_local_language", "Tweets in the nation's own language"),
    (29, "positive_within", "Positive interactions within national identity"),
    (30, "negative_across", "Negative interactions across national identities"),
)
BEHAVIORAL_COLUMNS = tuple(name for _, name, _ in BEHAVIORAL_FEATURES)

# what counts as an "interaction" for features 17-18
DEFAULT_INTERACTION_KINDS = frozenset({"retweet", "reply"})


def url_tld(url: Optional[str]) -> Optional[str]:
    """Last dot-suffix of the URL's host, e.g. ``".cat"``; None if unparsable."""
    if not url:
        return None
    url = url.strip()
    if "://" not in url:
        url = "http://" + url
    try:
        host = urlsplit(url).hostname
    except ValueError:
        return None
    if not host or "." not in host:
        return None
    return "." + host.rstrip(".").rsplit(".", 1)[-1].lower()


def _split(targets: Iterable[str], own: StanceLabel, labels: Mapping[str, StanceLabel]) -> tuple[int, int]:
    within = across = 0
    for t in targets:
        lab = labels.get(t)
        if lab is None:
            continue
        if lab is own:
            within += 1
        else:
            across += 1
    return within, across


def _user_behavior(u: UserRecord, territory: Territory, labels, ref: float,
                   profiles, lexicon, kinds, coverage: Counter) -> list[float]:
    own = u.label
    authored = [t for t in u.timeline if not t.retweet_of]
    f = [0.0] * 30
    f[0] = len(u.timeline)
    f[1] = len(u.favourites)
    if u.timeline:
        coverage[3] += 1
        oldest = min(t.created_at for t in u.timeline)
        f[2] = len(u.timeline) / max(1.0, (ref - oldest) / DAY)
    f[3] = max(0.0, (ref - u.created_at) / DAY)
    f[4] = sum(t.retweet_count for t in authored)
    f[5] = sum(t.favourite_count for t in authored)
    tlds = [url_tld(x) for t in u.timeline for x in t.urls]
    f[6] = sum(t == territory.local_tld for t in tlds)
    f[7] = sum(t == territory.state_tld for t in tlds)
    f[8] = u.followers_count
    f[9] = u.followees_count
    f[10] = float(u.verified)
    f[11] = float(u.geo_enabled)
    if u.profile_url:
        coverage[13] += 1
        coverage[14] += 1
        tld = url_tld(u.profile_url)
        f[12] = float(tld == territory.local_tld)
        f[13] = float(tld == territory.state_tld)
    ui = (u.ui_language or "").lower()
    if ui:
        coverage[15] += 1
        coverage[16] += 1
        f[14] = float(ui in {l.lower() for l in territory.local_languages})
        f[15] = float(ui in {l.lower() for l in territory.state_languages})
    if own is None:
        return f

    retweets = [t.retweet_of for t in u.timeline if t.retweet_of]
    replies = [t.reply_to for t in authored if t.reply_to]
    mentions = [m for t in authored for m in t.mentions]
    favs = [t.author_id for t in u.favourites]
    by_kind = {"retweet": retweets, "reply": replies, "mention": mentions, "favourite": favs}
    f[16], f[17] = _split((x for k in sorted(kinds) for x in by_kind[k]), own, labels)
    f[18], f[19] = _split(favs, own, labels)
    f[20], f[21] = _split(mentions, own, labels)
    f[22], f[23] = _split(retweets, own, labels)
    f[24] = u.listed_count
    f[25], f[26] = _split(u.followees, own, labels)
    if authored:
        for k in (28, 29, 30):
            coverage[k] += 1
    f[27] = sum(identify_language(t.text, profiles) in territory.tweet_languages for t in authored)
    pos_within = neg_across = 0
    for t in authored:
        targets = ([t.reply_to] if t.reply_to else []) + list(t.mentions)
        if not any(x in labels for x in targets):
            continue
        mood = sentiment_score(tokenize(t.text), lexicon).label
        if mood == "neu":
            continue
        within, across = _split(targets, own, labels)
        if mood == "pos":
            pos_within += within
        else:
            neg_across += across
    f[28] = pos_within
    f[29] = neg_across
    return f


def behavioral_features(
    dataset: Dataset,
    territory: Optional[Territory] = None,
    profiles: Optional[Sequence[LanguageProfile]] = None,
    lexicon: Optional[SentimentLexicon] = None,
    interaction_kinds: Iterable[str] = DEFAULT_INTERACTION_KINDS,
    labeled_only: bool = True,
) -> FeatureMatrix:
    """The 30 behavioural features, one row per user.

    Within/across features compare the row user's label with the labels of
    the accounts they interact with or follow; unlabeled targets are
    ignored. Missing inputs yield 0 and are tallied in
    ``meta["coverage"]`` (feature id -> rows with data).
    """
    territory = territory or dataset.territory
    profiles = default_profiles() if profiles is None else profiles
    lexicon = default_lexicon() if lexicon is None else lexicon
    kinds = frozenset(interaction_kinds)
    unknown = kinds - {"retweet", "reply", "mention", "favourite"}
    if unknown:
        raise FeatureError(f"unknown interaction kinds {sorted(unknown)}")
    labels = dataset.labeled()
    ref = dataset.effective_reference_time()
    users = _rows(dataset, labeled_only)
    coverage: Counter = Counter()
    values = np.array(
        [_user_behavior(u, territory, labels, ref, profiles, lexicon, kinds, coverage) for u in users],
        dtype=float,
    ).reshape(len(users), 30)
    n = len(users)
    always = {i for i in range(1, 31)} - {3, 13, 14, 15, 16, 28, 29, 30}
    cov = {i: (n if i in always else coverage[i]) for i in range(1, 31)}
    meta = {"coverage": cov, "reference_time": ref, "interaction_kinds": sorted(kinds)}
    return FeatureMatrix(Family.BEHAVIORAL, tuple(u.user_id for u in users), BEHAVIORAL_COLUMNS,
                         values, _labels(users), meta)


@dataclass(frozen=True)
class ComparisonRow:
    feature_id: int
    name: str
    result: TestResult
    prominent: Optional[StanceLabel]  # group with the larger mean

    @property
    def stars(self) -> str:
        return self.result.stars()


def group_comparison_report(matrix: FeatureMatrix) -> list[ComparisonRow]:
    """Welch's t-test of PI vs AI for every column, in feature order."""
    if matrix.labels is None:
        raise FeatureError("matrix has no labels")
    labels = np.array([l.value if l else "" for l in matrix.labels])
    pi, ai = labels == "PI", labels == "AI"
    if pi.sum() < 2 or ai.sum() < 2:
        raise FeatureError("group comparison needs at least two PI and two AI rows")
    X = matrix.dense()
    names = {name: (fid, desc) for fid, name, desc in BEHAVIORAL_FEATURES}
    rows = []
    for j, col in enumerate(matrix.columns):
        res = welch_t_test(X[pi, j], X[ai, j])
        prominent = {Direction.GROUP_A: StanceLabel.PI, Direction.GROUP_B: StanceLabel.AI}.get(res.direction)
        fid = names.get(col, (j + 1, col))[0]
        rows.append(ComparisonRow(fid, col, res, prominent))
    return sorted(rows, key=lambda r: r.feature_id)


# -- persistence ------------------------------------------------------------------

def save_matrix(matrix: FeatureMatrix, path) -> None:
    """Dense: ``user_id,<columns>`` CSV. Sparse: ``row,col,value`` triplets.

    Either way a ``<path>.json`` sidecar records family, rows, columns and
    labels.
    """
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if matrix.is_sparse:
            w.writerow(("row", "col", "value"))
            coo = matrix.values.tocoo()
            for i, j, v in sorted(zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist())):
                w.writerow((i, j, repr(v)))
        else:
            w.writerow(("user_id",) + matrix.columns)
            for uid, row in zip(matrix.row_ids, matrix.values):
                w.writerow((uid,) + tuple(repr(float(v)) for v in row))
    side = {
        "family": matrix.family.value,
        "sparse": matrix.is_sparse,
        "row_ids": list(matrix.row_ids),
        "columns": list(matrix.columns),
        "labels": None if matrix.labels is None else [l.value if l else None for l in matrix.labels],
        "meta": _jsonable(matrix.meta),
    }
    Path(str(path) + ".json").write_text(json.dumps(side, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _jsonable(obj):
    return json.loads(json.dumps(obj, default=str))


def load_matrix(path) -> FeatureMatrix:
    path = Path(path)
    side = json.loads(Path(str(path) + ".json").read_text(encoding="utf-8"))
    n, m = len(side["row_ids"]), len(side["columns"])
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        if side["sparse"]:
            trip = [(int(i), int(j), float(v)) for i, j, v in reader]
            rows, cols, vals = zip(*trip) if trip else ((), (), ())
            values = sp.csr_matrix((vals, (rows, cols)), shape=(n, m))
        else:
            values = np.array([[float(v) for v in row[1:]] for row in reader]).reshape(n, m)
    return FeatureMatrix(side["family"], side["row_ids"], side["columns"], values, side["labels"],
                         side.get("meta") or {})
