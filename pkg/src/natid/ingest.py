"""Reading and writing datasets as JSON-lines files.

A dataset on disk is four files plus a small ``manifest.json``:

* ``users.jsonl``      one profile per line
* ``tweets.jsonl``     timeline tweets, keyed by ``author_id``
* ``favourites.jsonl`` favourited tweets, keyed by ``favourited_by``
                       (``author_id`` is the original author)
* ``edges.jsonl``      ``{"src", "dst", "kind": "follows"}``: src follows dst
"""

from __future__ import annotations

import json
import warnings
from collections import defaultdict
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterator, Optional

from .model import Dataset, StanceLabel, Territory, Tweet, UserRecord

USERS_FILE = "users.jsonl"
TWEETS_FILE = "tweets.jsonl"
FAVOURITES_FILE = "favourites.jsonl"
EDGES_FILE = "edges.jsonl"
MANIFEST_FILE = "manifest.json"


class IngestError(ValueError):
    def __init__(self, path, message, line: Optional[int] = None):
        self.path = str(path)
        self.line = line
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {message}")


class IngestWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Manifest:
    territory: Territory
    users_path: Path
    tweets_path: Path
    favourites_path: Path
    edges_path: Path
    reference_time: Optional[float] = None

    def __post_init__(self):
        paths = [Path(p) for p in (self.users_path, self.tweets_path, self.favourites_path, self.edges_path)]
        if len({p.resolve() for p in paths}) != 4:
            raise ValueError("manifest paths must be distinct")
        for name, p in zip(("users_path", "tweets_path", "favourites_path", "edges_path"), paths):
            object.__setattr__(self, name, p)

    @classmethod
    def in_directory(cls, directory, territory: Territory, reference_time=None) -> "Manifest":
        d = Path(directory)
        return cls(territory, d / USERS_FILE, d / TWEETS_FILE, d / FAVOURITES_FILE, d / EDGES_FILE, reference_time)

    def to_dict(self, relative_to=None) -> dict:
        def rel(p: Path):
            if relative_to is not None:
                try:
                    return str(p.relative_to(relative_to))
                except ValueError:
                    pass
            return str(p)

        return {
            "territory": self.territory.to_dict(),
            "users_path": rel(self.users_path),
            "tweets_path": rel(self.tweets_path),
            "favourites_path": rel(self.favourites_path),
            "edges_path": rel(self.edges_path),
            "reference_time": self.reference_time,
        }


def write_manifest(manifest: Manifest, path) -> None:
    path = Path(path)
    data = manifest.to_dict(relative_to=path.parent)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_manifest(path) -> Manifest:
    """Read a manifest file; relative paths resolve against its directory."""
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_FILE
    if not path.exists():
        raise IngestError(path, "manifest not found")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
        base = path.parent
        return Manifest(
            territory=Territory.from_dict(data["territory"]),
            users_path=base / data["users_path"],
            tweets_path=base / data["tweets_path"],
            favourites_path=base / data["favourites_path"],
            edges_path=base / data["edges_path"],
            reference_time=data.get("reference_time"),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise IngestError(path, f"bad manifest: {exc}") from exc


def _timestamp(value) -> float:
    if value is None:
        return 0.0
    if isinstance(value, (int, float)):
        return float(value)
    dt = datetime.fromisoformat(str(value).replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def _read_jsonl(path: Path) -> Iterator[tuple[int, dict]]:
    if not path.exists():
        raise IngestError(path, "file not found")
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestError(path, f"invalid JSON ({exc.msg})", lineno) from None
            if not isinstance(rec, dict):
                raise IngestError(path, "record is not a JSON object", lineno)
            yield lineno, rec


def _nonneg_int(rec, key, path, lineno) -> int:
    value = rec.get(key, 0)
    if value is None:
        return 0
    if isinstance(value, bool) or not isinstance(value, (int, float)) or value < 0:
        raise IngestError(path, f"{key} must be a non-negative integer", lineno)
    return int(value)


def _parse_tweet(rec, author_key, path, lineno) -> tuple[str, Tweet]:
    try:
        owner = rec[author_key]
        tweet = Tweet(
            tweet_id=str(rec["tweet_id"]),
            author_id=str(rec["author_id"]),
            text=rec.get("text") or "",
            created_at=_timestamp(rec.get("created_at")),
            retweet_of=rec.get("retweet_of"),
            reply_to=rec.get("reply_to"),
            mentions=tuple(rec.get("mentions") or ()),
            urls=tuple(rec.get("urls") or ()),
            retweet_count=_nonneg_int(rec, "retweet_count", path, lineno),
            favourite_count=_nonneg_int(rec, "favourite_count", path, lineno),
        )
    except KeyError as exc:
        raise IngestError(path, f"missing field {exc}", lineno) from None
    except ValueError as exc:
        raise IngestError(path, str(exc), lineno) from None
    return str(owner), tweet


def _parse_user(rec, path, lineno) -> dict:
    uid = str(rec.get("user_id") or "")
    if not uid:
        raise IngestError(path, "missing or empty user_id", lineno)
    try:
        return dict(
            user_id=uid,
            location=rec.get("location") or "",
            created_at=_timestamp(rec.get("created_at")),
            followers_count=_nonneg_int(rec, "followers_count", path, lineno),
            followees_count=_nonneg_int(rec, "followees_count", path, lineno),
            listed_count=_nonneg_int(rec, "listed_count", path, lineno),
            verified=bool(rec.get("verified", False)),
            geo_enabled=bool(rec.get("geo_enabled", False)),
            profile_url=rec.get("profile_url") or None,
            ui_language=rec.get("ui_language") or "",
            label=StanceLabel.parse(rec.get("label")),
        )
    except KeyError as exc:
        raise IngestError(path, f"missing field {exc}", lineno) from None
    except ValueError as exc:
        raise IngestError(path, str(exc), lineno) from None


def load_dataset(manifest: Manifest) -> Dataset:
    """Load and join the four files named by ``manifest``.

    Tweets, favourites and edges that do not touch a known user are
    dropped; the number dropped is reported through an ``IngestWarning``.
    Duplicate user lines are resolved last-wins, also with a warning.
    """
    profiles: dict[str, dict] = {}
    duplicates = 0
    for lineno, rec in _read_jsonl(manifest.users_path):
        prof = _parse_user(rec, manifest.users_path, lineno)
        if prof["user_id"] in profiles:
            duplicates += 1
        profiles[prof["user_id"]] = prof

    timelines: dict[str, list[Tweet]] = defaultdict(list)
    favourites: dict[str, list[Tweet]] = defaultdict(list)
    dropped = defaultdict(int)
    for path, key, sink in (
        (manifest.tweets_path, "author_id", timelines),
        (manifest.favourites_path, "favourited_by", favourites),
    ):
        for lineno, rec in _read_jsonl(path):
            owner, tweet = _parse_tweet(rec, key, path, lineno)
            if owner in profiles:
                sink[owner].append(tweet)
            else:
                dropped[path.name] += 1

    followees: dict[str, set[str]] = defaultdict(set)
    followers: dict[str, set[str]] = defaultdict(set)
    for lineno, rec in _read_jsonl(manifest.edges_path):
        try:
            src, dst = str(rec["src"]), str(rec["dst"])
        except KeyError as exc:
            raise IngestError(manifest.edges_path, f"missing field {exc}", lineno) from None
        kind = rec.get("kind", "follows")
        if kind != "follows":
            raise IngestError(manifest.edges_path, f"unknown edge kind {kind!r}", lineno)
        touched = False
        if src in profiles:
            followees[src].add(dst)
            touched = True
        if dst in profiles:
            followers[dst].add(src)
            touched = True
        if not touched:
            dropped[manifest.edges_path.name] += 1

    if duplicates:
        warnings.warn(f"{duplicates} duplicate user record(s); last record kept", IngestWarning, stacklevel=2)
    for name, n in sorted(dropped.items()):
        warnings.warn(f"{n} record(s) in {name} reference no known user; dropped", IngestWarning, stacklevel=2)

    users = {}
    for uid, prof in profiles.items():
        users[uid] = UserRecord(
            **prof,
            timeline=tuple(timelines.get(uid, ())),
            favourites=tuple(favourites.get(uid, ())),
            followees=tuple(followees.get(uid, ())),
            followers=tuple(followers.get(uid, ())),
        )
    return Dataset(manifest.territory, users, manifest.reference_time)


def _tweet_record(t: Tweet, owner_key: Optional[str] = None, owner: Optional[str] = None) -> dict:
    rec = {}
    if owner_key:
        rec[owner_key] = owner
    rec.update(
        tweet_id=t.tweet_id,
        author_id=t.author_id,
        text=t.text,
        created_at=t.created_at,
        retweet_of=t.retweet_of,
        reply_to=t.reply_to,
        mentions=list(t.mentions),
        urls=list(t.urls),
        retweet_count=t.retweet_count,
        favourite_count=t.favourite_count,
    )
    return rec


def _user_record(u: UserRecord) -> dict:
    rec = {
        "user_id": u.user_id,
        "location": u.location,
        "created_at": u.created_at,
        "followers_count": u.followers_count,
        "followees_count": u.followees_count,
        "listed_count": u.listed_count,
        "verified": u.verified,
        "geo_enabled": u.geo_enabled,
        "profile_url": u.profile_url,
        "ui_language": u.ui_language,
    }
    if u.label is not None:
        rec["label"] = u.label.value
    return rec


def _dump(rec) -> str:
    return json.dumps(rec, ensure_ascii=False, sort_keys=False) + "\n"


def save_dataset(dataset: Dataset, directory) -> Manifest:
    """Write ``dataset`` to ``directory`` and return the manifest describing it.

    Output is deterministic: users sorted by id, tweets in timeline order,
    edges sorted by (src, dst).
    """
    directory = Path(directory)
    manifest = Manifest.in_directory(directory, dataset.territory, dataset.reference_time)
    try:
        directory.mkdir(parents=True, exist_ok=True)
        edges = set()
        with open(manifest.users_path, "w", encoding="utf-8") as fu, \
                open(manifest.tweets_path, "w", encoding="utf-8") as ft, \
                open(manifest.favourites_path, "w", encoding="utf-8") as ff:
            for uid, u in dataset.users.items():
                fu.write(_dump(_user_record(u)))
                for t in u.timeline:
                    ft.write(_dump(_tweet_record(t)))
                for t in u.favourites:
                    ff.write(_dump(_tweet_record(t, "favourited_by", uid)))
                edges.update((uid, v) for v in u.followees)
                edges.update((v, uid) for v in u.followers)
        with open(manifest.edges_path, "w", encoding="utf-8") as fe:
            for src, dst in sorted(edges):
                fe.write(_dump({"src": src, "dst": dst, "kind": "follows"}))
        write_manifest(manifest, directory / MANIFEST_FILE)
    except OSError as exc:
        raise IngestError(exc.filename or directory, f"cannot write dataset: {exc.strerror}") from exc
    return manifest


def load_directory(directory) -> Dataset:
    return load_dataset(read_manifest(Path(directory) / MANIFEST_FILE))
