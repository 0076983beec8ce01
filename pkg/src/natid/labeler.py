"""Ground-truth stance labels from self-reported profile locations.

Each territory has a set of location rules for pro-independence (PI) and
anti-independence (AI) users. A user is labelled only when exactly one side
matches; ambiguous and unmatched locations abstain so they can be reviewed
by hand. Scotland additionally needs referendum hashtags that agree with the
location verdict.
"""

from __future__ import annotations

import csv
import json
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .model import Dataset, StanceLabel, Territory, Tweet, UserRecord, get_territory

_WORD = re.compile(r"\w+")
_HASHTAG = re.compile(r"#(\w+)")
_RULE_FILES = {
    "Catalonia": "catalonia.json",
    "BasqueCountry": "basque_country.json",
    "Scotland": "scotland.json",
}


class RuleError(ValueError):
    pass


def normalize_location(raw: str) -> str:
    """NFC-normalise, lowercase, collapse whitespace, strip edge punctuation.

    Diacritics are kept: "España" and "Espanya" are different signals.
    """
    text = unicodedata.normalize("NFC", raw or "").lower()
    text = " ".join(text.split())
    return text.strip(" \t\n.,;:!?¡¿'\"()[]{}-_/|*·•")


def location_tokens(text: str) -> tuple[str, ...]:
    return tuple(_WORD.findall(normalize_location(text)))


def _contains(tokens: Sequence[str], phrase: Sequence[str]) -> bool:
    n = len(phrase)
    if n == 0 or n > len(tokens):
        return False
    first = phrase[0]
    for i in range(len(tokens) - n + 1):
        if tokens[i] == first and tuple(tokens[i:i + n]) == tuple(phrase):
            return True
    return False


@dataclass(frozen=True)
class MatchRule:
    """All ``required_terms`` must appear and none of ``forbidden_terms``.

    Terms match whole tokens (multi-word terms as contiguous token runs).
    ``max_tokens`` restricts the rule to short locations, which keeps short
    acronyms from firing inside long free-text strings.
    """

    required_terms: tuple[str, ...]
    forbidden_terms: tuple[str, ...] = ()
    max_tokens: Optional[int] = None

    def __post_init__(self):
        req = tuple(self.required_terms)
        if not req:
            raise RuleError("MatchRule needs at least one required term")
        object.__setattr__(self, "required_terms", req)
        object.__setattr__(self, "forbidden_terms", tuple(self.forbidden_terms))

    def matches(self, tokens: Sequence[str]) -> bool:
        if self.max_tokens is not None and len(tokens) > self.max_tokens:
            return False
        if not all(_contains(tokens, location_tokens(t)) for t in self.required_terms):
            return False
        return not any(_contains(tokens, location_tokens(t)) for t in self.forbidden_terms)

    def to_json(self):
        if not self.forbidden_terms and self.max_tokens is None and len(self.required_terms) == 1:
            return self.required_terms[0]
        d = {"required": list(self.required_terms)}
        if self.forbidden_terms:
            d["forbidden"] = list(self.forbidden_terms)
        if self.max_tokens is not None:
            d["max_tokens"] = self.max_tokens
        return d

    @classmethod
    def from_json(cls, obj) -> "MatchRule":
        if isinstance(obj, str):
            return cls((obj,))
        if isinstance(obj, dict):
            return cls(tuple(obj.get("required", ())), tuple(obj.get("forbidden", ())), obj.get("max_tokens"))
        raise RuleError(f"cannot read match rule from {obj!r}")


def _hashtag(tag: str) -> str:
    tag = tag.strip().lower()
    return tag if tag.startswith("#") else "#" + tag


@dataclass(frozen=True)
class RuleSet:
    territory: Territory
    pi_location_patterns: tuple[MatchRule, ...]
    ai_location_patterns: tuple[MatchRule, ...]
    ai_requires_conjunction: bool = True
    yes_hashtags: tuple[str, ...] = ()
    no_hashtags: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "pi_location_patterns", tuple(self.pi_location_patterns))
        object.__setattr__(self, "ai_location_patterns", tuple(self.ai_location_patterns))
        object.__setattr__(self, "yes_hashtags", tuple(_hashtag(h) for h in self.yes_hashtags))
        object.__setattr__(self, "no_hashtags", tuple(_hashtag(h) for h in self.no_hashtags))
        if not self.pi_location_patterns or not self.ai_location_patterns:
            raise RuleError("both PI and AI location patterns are required")
        if set(self.yes_hashtags) & set(self.no_hashtags):
            raise RuleError("yes and no hashtag lists overlap")

    @property
    def uses_hashtags(self) -> bool:
        return bool(self.yes_hashtags or self.no_hashtags)


def rules_from_config(config: dict, territory: Optional[Territory] = None) -> RuleSet:
    """Build a RuleSet from the rule-file JSON structure.

    ``pi_patterns``/``ai_patterns`` are explicit rules; every (city, state
    term) pair in ``cities`` x ``state_terms`` becomes an extra AI rule.
    """
    if territory is None:
        name = config.get("territory")
        if not name:
            raise RuleError("rule file names no territory and none was given")
        territory = get_territory(name)
    pi = [MatchRule.from_json(p) for p in config.get("pi_patterns", ())]
    ai = [MatchRule.from_json(p) for p in config.get("ai_patterns", ())]
    cities = config.get("cities", ())
    states = config.get("state_terms", ())
    ai.extend(MatchRule((c, s)) for c in cities for s in states)
    return RuleSet(
        territory=territory,
        pi_location_patterns=tuple(pi),
        ai_location_patterns=tuple(ai),
        ai_requires_conjunction=bool(cities and states),
        yes_hashtags=tuple(config.get("yes_hashtags", ())),
        no_hashtags=tuple(config.get("no_hashtags", ())),
    )


def load_rules(path, territory: Optional[Territory] = None) -> RuleSet:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"rule file not found: {path}")
    try:
        config = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise RuleError(f"{path}: invalid JSON ({exc.msg})") from None
    return rules_from_config(config, territory)


def builtin_rules(territory: Territory) -> RuleSet:
    """Rules for Catalonia, the Basque Country and Scotland.

    City lists live in ``natid/data/rules/*.json`` and can be edited or
    replaced with :func:`load_rules`.
    """
    fname = _RULE_FILES.get(territory.name)
    if fname is None:
        raise RuleError(
            f"no built-in rules for territory {territory.name!r}; "
            "write a rule file and load it with load_rules()"
        )
    text = resources.files("natid.data.rules").joinpath(fname).read_text(encoding="utf-8")
    return rules_from_config(json.loads(text), territory)


def label_by_location(user: UserRecord, rules: RuleSet) -> Optional[StanceLabel]:
    tokens = location_tokens(user.location)
    if not tokens:
        return None
    pi = any(r.matches(tokens) for r in rules.pi_location_patterns)
    ai = any(r.matches(tokens) for r in rules.ai_location_patterns)
    if pi and not ai:
        return StanceLabel.PI
    if ai and not pi:
        return StanceLabel.AI
    return None


def hashtags(text: str) -> list[str]:
    return ["#" + h for h in _HASHTAG.findall(unicodedata.normalize("NFC", text).lower())]


def label_by_hashtags(timeline: Iterable[Tweet], rules: RuleSet) -> Optional[StanceLabel]:
    """Majority vote of yes- vs no-campaign hashtags; ties abstain."""
    yes, no = set(rules.yes_hashtags), set(rules.no_hashtags)
    n_yes = n_no = 0
    for tweet in timeline:
        for tag in hashtags(tweet.text):
            if tag in yes:
                n_yes += 1
            elif tag in no:
                n_no += 1
    if n_yes > n_no:
        return StanceLabel.PI
    if n_no > n_yes:
        return StanceLabel.AI
    return None


def label_user(user: UserRecord, rules: RuleSet) -> Optional[StanceLabel]:
    by_location = label_by_location(user, rules)
    if by_location is None or not rules.uses_hashtags:
        return by_location
    # hashtag evidence must agree; conflicts abstain and go to review
    if label_by_hashtags(user.timeline, rules) is by_location:
        return by_location
    return None


@dataclass(frozen=True)
class LabelReport:
    territory: str
    pi: int
    ai: int
    unlabeled: int
    preserved: int = 0  # users whose existing label was kept as-is

    @property
    def total(self) -> int:
        return self.pi + self.ai

    def rows(self) -> list[tuple[str, int]]:
        return [("Pro-Independence", self.pi), ("Anti-Independence", self.ai), ("Total", self.total)]

    def as_dict(self) -> dict:
        return {"PI": self.pi, "AI": self.ai, "unlabeled": self.unlabeled}


def label_dataset(dataset: Dataset, rules: RuleSet) -> tuple[Dataset, LabelReport]:
    """Label every unlabeled user; existing (manual) labels are never touched."""
    users = []
    counts: Counter = Counter()
    preserved = 0
    for u in dataset.users.values():
        if u.label is not None:
            preserved += 1
            label = u.label
        else:
            label = label_user(u, rules)
            if label is not None:
                u = _with_label(u, label)
        counts[label] += 1
        users.append(u)
    report = LabelReport(
        territory=dataset.territory.name,
        pi=counts[StanceLabel.PI],
        ai=counts[StanceLabel.AI],
        unlabeled=counts[None],
        preserved=preserved,
    )
    return dataset.replace_users(users), report


def _with_label(u: UserRecord, label: StanceLabel) -> UserRecord:
    return replace(u, label=label)


REVIEW_HEADER = ("user_id", "location", "label")


def export_for_review(dataset: Dataset, path) -> int:
    """Write ``user_id,location,label`` rows sorted by user id.

    Unlabeled users are included with an empty label so abstentions can be
    audited alongside the labels. Returns the number of data rows.
    """
    rows = sorted(dataset.users.values(), key=lambda u: u.user_id)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REVIEW_HEADER)
        for u in rows:
            writer.writerow((u.user_id, u.location, u.label.value if u.label else ""))
    return len(rows)
