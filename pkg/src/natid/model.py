"""Core domain types: territories, stance labels, tweets, users and datasets.

Everything here is immutable after construction. List-like fields are
stored as tuples; follow lists are canonicalised (deduplicated and sorted)
so that two records describing the same account compare equal no matter
what order the source files listed their relations in.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Optional

MAX_TIMELINE = 500
MAX_FAVOURITES = 500


class StanceLabel(str, enum.Enum):
    PI = "PI"  # pro-independence
    AI = "AI"  # anti-independence

    @classmethod
    def parse(cls, value) -> Optional["StanceLabel"]:
        if value is None or value == "":
            return None
        if isinstance(value, StanceLabel):
            return value
        return cls(str(value).upper())

    def other(self) -> "StanceLabel":
        return StanceLabel.AI if self is StanceLabel.PI else StanceLabel.PI


LABELS = (StanceLabel.PI, StanceLabel.AI)


@dataclass(frozen=True)
class Territory:
    """A territory with an independence movement.

    ``local_*`` fields refer to the aspirant nation, ``state_*`` fields to
    the officially recognised state. ``local_languages``/``state_languages``
    are matched against the account UI language; ``tweet_languages`` are the
    language codes counted as "tweeting in the nation's own language".
    """

    name: str
    local_tld: str
    state_tld: str
    local_languages: tuple[str, ...]
    state_languages: tuple[str, ...]
    tweet_languages: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "local_languages", tuple(self.local_languages))
        object.__setattr__(self, "state_languages", tuple(self.state_languages))
        tweet = tuple(self.tweet_languages) or self.local_languages
        object.__setattr__(self, "tweet_languages", tweet)
        problems = territory_problems(self)
        if problems:
            raise ValueError(f"invalid territory {self.name!r}: {'; '.join(problems)}")

    @property
    def is_builtin(self) -> bool:
        return self.name in BUILTIN_TERRITORIES

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "local_tld": self.local_tld,
            "state_tld": self.state_tld,
            "local_languages": list(self.local_languages),
            "state_languages": list(self.state_languages),
            "tweet_languages": list(self.tweet_languages),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Territory":
        return cls(
            name=d["name"],
            local_tld=d["local_tld"],
            state_tld=d["state_tld"],
            local_languages=tuple(d["local_languages"]),
            state_languages=tuple(d["state_languages"]),
            tweet_languages=tuple(d.get("tweet_languages") or ()),
        )


def territory_problems(t: Territory) -> list[str]:
    problems = []
    if not t.name:
        problems.append("empty name")
    for attr in ("local_tld", "state_tld"):
        tld = getattr(t, attr)
        if not tld.startswith(".") or len(tld) < 2:
            problems.append(f"{attr} must start with '.'")
    if t.local_tld == t.state_tld:
        problems.append("local_tld equals state_tld")
    if not t.local_languages or not t.state_languages:
        problems.append("language lists must be non-empty")
    if set(t.local_languages) & set(t.state_languages):
        problems.append("language lists overlap")
    return problems


CATALONIA = Territory("Catalonia", ".cat", ".es", ("ca",), ("es",), ("ca",))
BASQUE_COUNTRY = Territory("BasqueCountry", ".eus", ".es", ("eu",), ("es",), ("eu",))
# Twitter offers no Gaelic/Scots UI, so the UI-language features contrast
# "en" (local) against "en-gb" (state).
SCOTLAND = Territory("Scotland", ".scot", ".uk", ("en",), ("en-gb",), ("gd", "sco"))

BUILTIN_TERRITORIES = {
    t.name: t for t in (CATALONIA, BASQUE_COUNTRY, SCOTLAND)
}


def get_territory(name: str) -> Territory:
    key = name.replace(" ", "").lower()
    for t in BUILTIN_TERRITORIES.values():
        if t.name.lower() == key:
            return t
    raise KeyError(f"unknown territory {name!r}; built-ins: {sorted(BUILTIN_TERRITORIES)}")


@dataclass(frozen=True)
class Tweet:
    tweet_id: str
    author_id: str
    text: str
    created_at: float
    retweet_of: Optional[str] = None
    reply_to: Optional[str] = None
    mentions: tuple[str, ...] = ()
    urls: tuple[str, ...] = ()
    retweet_count: int = 0
    favourite_count: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mentions", tuple(self.mentions))
        object.__setattr__(self, "urls", tuple(self.urls))


@dataclass(frozen=True)
class UserRecord:
    user_id: str
    location: str = ""
    created_at: float = 0.0
    followers_count: int = 0
    followees_count: int = 0
    listed_count: int = 0
    verified: bool = False
    geo_enabled: bool = False
    profile_url: Optional[str] = None
    ui_language: str = ""
    timeline: tuple[Tweet, ...] = ()
    favourites: tuple[Tweet, ...] = ()
    followees: tuple[str, ...] = ()
    followers: tuple[str, ...] = ()
    label: Optional[StanceLabel] = None

    def __post_init__(self):
        object.__setattr__(self, "timeline", tuple(self.timeline))
        object.__setattr__(self, "favourites", tuple(self.favourites))
        object.__setattr__(self, "followees", tuple(sorted(set(self.followees))))
        object.__setattr__(self, "followers", tuple(sorted(set(self.followers))))
        object.__setattr__(self, "label", StanceLabel.parse(self.label))

    def network(self) -> set[str]:
        return set(self.followees) | set(self.followers)


@dataclass(frozen=True)
class Dataset:
    """All users collected for one territory.

    ``reference_time`` (UTC epoch seconds) anchors account-age and rate
    features so they do not drift with the wall clock.
    """

    territory: Territory
    users: Mapping[str, UserRecord] = field(default_factory=dict)
    reference_time: Optional[float] = None

    def __post_init__(self):
        users = dict(sorted(self.users.items()))
        object.__setattr__(self, "users", MappingProxyType(users))

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.territory == other.territory
            and self.reference_time == other.reference_time
            and dict(self.users) == dict(other.users)
        )

    __hash__ = None

    def __len__(self):
        return len(self.users)

    def user_ids(self) -> list[str]:
        return list(self.users)

    def labeled(self) -> dict[str, StanceLabel]:
        return {uid: u.label for uid, u in self.users.items() if u.label is not None}

    def replace_users(self, users: Iterable[UserRecord]) -> "Dataset":
        return Dataset(self.territory, {u.user_id: u for u in users}, self.reference_time)

    def effective_reference_time(self) -> float:
        """The stored reference time, or the latest timestamp seen in the data."""
        if self.reference_time is not None:
            return float(self.reference_time)
        latest = 0.0
        for u in self.users.values():
            latest = max(latest, u.created_at)
            for t in u.timeline:
                latest = max(latest, t.created_at)
            for t in u.favourites:
                latest = max(latest, t.created_at)
        return latest


@dataclass(frozen=True)
class Violation:
    user_id: str
    field: str
    message: str

    def __str__(self):
        return f"{self.user_id or '<dataset>'}.{self.field}: {self.message}"


def validate_dataset(dataset: Dataset) -> list[Violation]:
    """Check the dataset-level invariants and return one entry per violation.

    Violations are data, not errors: nothing is raised, and the dataset is
    not touched.
    """
    out: list[Violation] = []
    for msg in territory_problems(dataset.territory):
        out.append(Violation("", "territory", msg))
    users = dataset.users
    for key, u in users.items():
        uid = u.user_id
        if not uid:
            out.append(Violation(key, "user_id", "empty user_id"))
        elif key != uid:
            out.append(Violation(key, "user_id", f"stored under key {key!r}"))
        if len(u.timeline) > MAX_TIMELINE:
            out.append(Violation(uid, "timeline", f"{len(u.timeline)} tweets > {MAX_TIMELINE}"))
        if len(u.favourites) > MAX_FAVOURITES:
            out.append(Violation(uid, "favourites", f"{len(u.favourites)} tweets > {MAX_FAVOURITES}"))
        for name in ("followers_count", "followees_count", "listed_count"):
            if getattr(u, name) < 0:
                out.append(Violation(uid, name, "negative count"))
        if u.label is not None and u.label not in LABELS:
            out.append(Violation(uid, "label", f"unknown label {u.label!r}"))
        for t in u.timeline:
            if t.author_id != uid:
                out.append(Violation(uid, "timeline", f"tweet {t.tweet_id} authored by {t.author_id!r}"))
        for t in (*u.timeline, *u.favourites):
            if not t.author_id:
                out.append(Violation(uid, "tweet", f"tweet {t.tweet_id} has empty author_id"))
            if t.retweet_count < 0 or t.favourite_count < 0:
                out.append(Violation(uid, "tweet", f"tweet {t.tweet_id} has a negative count"))
        # follow relations between two collected users must be recorded on both sides
        for v in u.followees:
            if v in users and uid not in users[v].followers:
                out.append(Violation(uid, "followees", f"{v} does not list {uid} as follower"))
        for v in u.followers:
            if v in users and uid not in users[v].followees:
                out.append(Violation(uid, "followers", f"{v} does not list {uid} as followee"))
    return out
