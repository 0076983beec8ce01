"""Synthetic labeled datasets with planted homophily.

The follow graph is a planted partition: each of ``n * mean_degree / 2``
follow edges picks a source (uniformly, or weighted toward the more
active PI group when ``pi_activity != 1``), then a target inside the
source's group with probability ``h`` and in the other group otherwise.
For this model the expected nominal assortativity has a closed form, so
``homophily_for_assortativity`` can invert it and hit a target ``r``.

Everything else (timelines, favourites, interactions, profile fields) is
drawn from group-conditional distributions whose directions are listed in
``PLANTED_DIRECTIONS``. Besides the labeled users, a pool of external
"hub" accounts (news outlets, politicians) is followed group-aligned with
the same probability ``h``; these are the heavily followed accounts that
make the top-percentile network vocabulary informative.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .ingest import Manifest, save_dataset
from .model import Dataset, StanceLabel, Territory, Tweet, UserRecord, get_territory
from .textfeat import SAMPLE_LANGUAGES, default_lexicon, sample_sentences

GENERATOR_VERSION = 1
PROVENANCE_FILE = "provenance.json"
REFERENCE_TIME = 1451606400.0  # 2016-01-01T00:00:00Z
DAY = 86400.0
TWEET_WINDOW_DAYS = 90.0

PI, AI = StanceLabel.PI, StanceLabel.AI

# behavioural features whose group difference comes from the activity ratio
ACTIVITY_FEATURES = frozenset({1, 2, 3, 17, 18, 19, 20, 21, 22, 23, 24, 26, 27, 29, 30})
# feature id -> group with the larger mean, for configs with pi_activity > 1
PLANTED_DIRECTIONS = {i: PI for i in range(1, 31)}
PLANTED_DIRECTIONS.update({8: AI, 14: AI, 16: AI})


class SynthError(ValueError):
    pass


@dataclass(frozen=True)
class SynthConfig:
    n_users: int = 1000
    pi_fraction: float = 0.5
    homophily: float = 0.83
    mean_degree: float = 20.0
    tweets_per_user: int = 20
    token_vocab_per_group: int = 50
    token_overlap: float = 0.3
    seed: int = 0
    territory: str = "Catalonia"
    # extras beyond the planted partition itself
    pi_activity: float = 1.0  # relative activity of PI users (>= 1 plants PI-heavy counts)
    hub_count: Optional[int] = None  # external accounts; default n_users // 20, at least 10
    hub_follows: float = 10.0  # mean hubs followed per user
    favourites_per_user: float = 10.0
    interactions_per_user: float = 8.0
    text_homophily: Optional[float] = None  # persona alignment; default = homophily
    hub_homophily: Optional[float] = None  # hub-follow alignment; default = homophily

    def problems(self) -> list[str]:
        out = []
        if not isinstance(self.n_users, (int, np.integer)) or self.n_users < 2:
            out.append("n_users must be an integer >= 2")
        if not 0 < self.pi_fraction < 1:
            out.append("pi_fraction must lie in (0, 1)")
        if not 0 <= self.homophily <= 1:
            out.append("homophily must lie in [0, 1]")
        if not self.mean_degree > 0:
            out.append("mean_degree must be positive")
        if self.tweets_per_user < 0 or self.tweets_per_user > 500:
            out.append("tweets_per_user must lie in [0, 500]")
        if self.token_vocab_per_group < 1:
            out.append("token_vocab_per_group must be >= 1")
        if not 0 <= self.token_overlap <= 1:
            out.append("token_overlap must lie in [0, 1]")
        if not self.pi_activity > 0:
            out.append("pi_activity must be positive")
        if self.hub_count is not None and self.hub_count < 2:
            out.append("hub_count must be >= 2")
        for name in ("hub_follows", "favourites_per_user", "interactions_per_user"):
            if getattr(self, name) < 0:
                out.append(f"{name} must be non-negative")
        for name in ("text_homophily", "hub_homophily"):
            value = getattr(self, name)
            if value is not None and not 0 <= value <= 1:
                out.append(f"{name} must lie in [0, 1]")
        return out

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SynthConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise SynthError(f"unknown synth settings {sorted(unknown)}")
        return cls(**data)


# -- h <-> r calibration ------------------------------------------------------------

def source_pi_share(pi_fraction: float, pi_activity: float = 1.0) -> float:
    """Probability that an edge's source is a PI user."""
    return pi_fraction * pi_activity / (pi_fraction * pi_activity + 1.0 - pi_fraction)


def expected_assortativity(h: float, pi_fraction: float, pi_activity: float = 1.0) -> float:
    """Nominal assortativity of the planted partition in expectation.

    With source share ``s`` the symmetric mixing matrix is
    ``[[s h, (1-h)/2], [(1-h)/2, (1-s) h]]``.
    """
    s = source_pi_share(pi_fraction, pi_activity)
    cross = (1.0 - h) / 2.0
    a_pi, a_ai = s * h + cross, (1.0 - s) * h + cross
    sum_sq = a_pi ** 2 + a_ai ** 2
    return (h - sum_sq) / (1.0 - sum_sq)


def homophily_for_assortativity(r: float, pi_fraction: float, pi_activity: float = 1.0) -> float:
    """The within-group probability ``h`` whose expected assortativity is ``r``."""
    lo = expected_assortativity(0.0, pi_fraction, pi_activity)
    if not lo <= r <= 1.0:
        raise SynthError(f"assortativity {r} unreachable; range is [{lo:.4f}, 1]")
    if r == 1.0:
        return 1.0
    return float(brentq(lambda h: expected_assortativity(h, pi_fraction, pi_activity) - r,
                        0.0, 1.0, xtol=1e-14))


@dataclass(frozen=True)
class TerritoryPreset:
    territory: str
    pi_fraction: float  # labeled-user shares
    target_assortativity: float  # follow-network assortativity to reproduce


TERRITORY_PRESETS = {
    "catalonia": TerritoryPreset("Catalonia", 0.215, 0.657),
    "basque country": TerritoryPreset("Basque Country", 0.726, 0.678),
    "scotland": TerritoryPreset("Scotland", 0.719, 0.311),
}


def balanced_homophily(r: float) -> float:
    """Within-group probability giving assortativity ``r`` for equal-size groups."""
    return (1.0 + r) / 2.0


def preset_config(territory: str, n_users: int = 2000, seed: int = 0, **overrides) -> SynthConfig:
    """A config whose follow assortativity lands on the territory's target.

    The follow graph uses the ``h`` calibrated for the territory's group
    sizes. Hub follows and text personas use the balanced-group equivalent
    of the same target, so their signal strength orders territories by
    assortativity rather than by class imbalance.
    """
    key = " ".join(territory.lower().replace("_", " ").split())
    if key not in TERRITORY_PRESETS:
        raise SynthError(f"no preset for territory {territory!r}")
    preset = TERRITORY_PRESETS[key]
    activity = overrides.get("pi_activity", 1.0)
    pi_fraction = overrides.pop("pi_fraction", preset.pi_fraction)
    h = homophily_for_assortativity(preset.target_assortativity, pi_fraction, activity)
    aligned = balanced_homophily(preset.target_assortativity)
    base = SynthConfig(n_users=n_users, pi_fraction=pi_fraction, homophily=h, seed=seed,
                       territory=preset.territory, text_homophily=aligned, hub_homophily=aligned)
    return replace(base, **overrides)


# -- generation ----------------------------------------------------------------------

def _group_sizes(cfg: SynthConfig) -> tuple[int, int]:
    n_pi = int(round(cfg.n_users * cfg.pi_fraction))
    return n_pi, cfg.n_users - n_pi


def _check_feasible(cfg: SynthConfig) -> None:
    problems = cfg.problems()
    if problems:
        raise SynthError("; ".join(problems))
    n = cfg.n_users
    if cfg.mean_degree > n - 1:
        raise SynthError(f"infeasible degree: mean_degree {cfg.mean_degree} exceeds n_users - 1 = {n - 1}")
    n_pi, n_ai = _group_sizes(cfg)
    if n_pi == 0 or n_ai == 0:
        raise SynthError("infeasible degree: one group is empty at this pi_fraction and n_users")
    if cfg.homophily > 0 and min(n_pi, n_ai) < 2:
        raise SynthError("infeasible degree: a group is too small for within-group edges")
    m = int(round(n * cfg.mean_degree / 2))
    s = source_pi_share(cfg.pi_fraction, cfg.pi_activity)
    need = {
        "PI-PI": (m * s * cfg.homophily, n_pi * (n_pi - 1) / 2),
        "AI-AI": (m * (1 - s) * cfg.homophily, n_ai * (n_ai - 1) / 2),
        "cross": (m * (1 - cfg.homophily), n_pi * n_ai),
    }
    for kind, (expected, capacity) in need.items():
        if expected > 0.9 * capacity:
            raise SynthError(f"infeasible degree: about {expected:.0f} {kind} edges requested, "
                             f"only {capacity:.0f} pairs exist")


def planted_follow_edges(groups: np.ndarray, m: int, h: float, source_weights: np.ndarray,
                         rng: np.random.Generator) -> list[tuple[int, int]]:
    """``m`` distinct (follower, followee) index pairs from the planted partition.

    ``groups`` holds 1 for PI and 0 for AI. A pair is rejected and redrawn
    when it is a self-loop or already present in either direction.
    """
    members = [np.nonzero(groups == g)[0] for g in (0, 1)]
    p = source_weights / source_weights.sum()
    seen: set[tuple[int, int]] = set()
    edges: list[tuple[int, int]] = []
    attempts = 0
    limit = 50 * m + 1000
    while len(edges) < m:
        k = m - len(edges)
        src = rng.choice(groups.size, size=k, p=p)
        within = rng.random(k) < h
        pick = rng.random(k)
        for s, w, u in zip(src, within, pick):
            attempts += 1
            pool = members[groups[s]] if w else members[1 - groups[s]]
            t = int(pool[int(u * pool.size)])
            s = int(s)
            if s == t or (s, t) in seen or (t, s) in seen:
                continue
            seen.add((s, t))
            edges.append((s, t))
        if attempts > limit:
            raise SynthError("infeasible degree: could not place distinct edges")
    return edges


class _TextModel:
    """Group personas: language choice plus topic hashtags."""

    def __init__(self, cfg: SynthConfig, territory: Territory, rng: np.random.Generator):
        self.rng = rng
        v = cfg.token_vocab_per_group
        shared = int(round(cfg.token_overlap * v))
        own = v - shared
        width = len(str(2 * own + shared))
        names = [f"#t{i:0{width}d}" for i in range(2 * own + shared)]
        # vocab[g] = group-specific tokens; shared tokens are drawn by both
        self.vocab = {1: names[:own], 0: names[own:2 * own]}
        self.shared = names[2 * own:]
        self.overlap = cfg.token_overlap
        self.sentences = {1: _sentences_for(territory.tweet_languages, "en"),
                          0: _sentences_for(territory.state_languages, "en")}
        lex = default_lexicon().polarity
        self.positive = sorted(t for t, v in lex.items() if v > 0 and " " not in t)
        self.negative = sorted(t for t, v in lex.items() if v < 0 and " " not in t)

    def text(self, persona: int, language_group: int, extra: str = "", mood: str = "") -> str:
        rng = self.rng
        sents = self.sentences[language_group]
        parts = [sents[int(rng.integers(len(sents)))]]
        for _ in range(2):
            if self.shared and (not self.vocab[persona] or rng.random() < self.overlap):
                parts.append(self.shared[int(rng.integers(len(self.shared)))])
            elif self.vocab[persona]:
                pool = self.vocab[persona]
                parts.append(pool[int(rng.integers(len(pool)))])
        if mood == "pos":
            parts.append(self.positive[int(rng.integers(len(self.positive)))])
        elif mood == "neg":
            parts.append(self.negative[int(rng.integers(len(self.negative)))])
        if extra:
            parts.insert(0, extra)
        return " ".join(parts)


def _sentences_for(languages, fallback: str) -> list[str]:
    for lang in languages:
        code = lang.lower().split("-")[0]
        if code in SAMPLE_LANGUAGES:
            return sample_sentences(code)
    return sample_sentences(fallback)


_LOCATIONS = {
    "Catalonia": ("Països Catalans", "Barcelona, Espanya"),
    "BasqueCountry": ("Euskal Herria", "Bilbao, Espainia"),
    "Scotland": ("Scotland", "Glasgow, UK"),
}

# group-conditional profile parameters: (PI, AI)
_PROFILE = {
    "age_days": (2600.0, 2000.0),
    "url_rate": (0.3, 0.3),
    "url_local": (0.55, 0.10),
    "url_state": (0.10, 0.45),
    "followers_extra": (math.log(600.0), math.log(400.0)),
    "followees_extra": (math.log(300.0), math.log(200.0)),
    "verified": (0.10, 0.02),
    "geo_enabled": (0.50, 0.30),
    "profile_url": (0.7, 0.7),
    "profile_local": (0.50, 0.05),
    "profile_state": (0.05, 0.45),
    "ui_local": (0.65, 0.15),
    "listed": (6.0, 3.0),
    "retweeted": (2.0, 1.0),
    "favourited": (3.0, 1.5),
}
# (positive, negative) probabilities for interaction tweets
_MOOD_WITHIN = (0.6, 0.1)
_MOOD_ACROSS = (0.15, 0.5)


def _param(name: str, group: int) -> float:
    return _PROFILE[name][0 if group == 1 else 1]


def _tld_url(rng, territory: Territory, p_local: float, p_state: float, slug: str) -> str:
    u = rng.random()
    if u < p_local:
        tld = territory.local_tld
    elif u < p_local + p_state:
        tld = territory.state_tld
    else:
        tld = ".com"
    return f"https://{slug}{tld}"


def generate(config: SynthConfig) -> Dataset:
    """Build a labeled dataset from ``config``; identical output for identical configs."""
    cfg = config
    _check_feasible(cfg)
    territory = get_territory(cfg.territory)
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_users
    n_pi, _ = _group_sizes(cfg)
    width = len(str(n - 1))
    ids = [f"u{i:0{width}d}" for i in range(n)]
    groups = np.zeros(n, dtype=np.int64)
    groups[rng.permutation(n)[:n_pi]] = 1
    activity = np.where(groups == 1, cfg.pi_activity, 1.0)

    h = cfg.homophily
    m = int(round(n * cfg.mean_degree / 2))
    edges = planted_follow_edges(groups, m, h, activity, rng)
    followees: list[list[str]] = [[] for _ in range(n)]
    followers: list[list[str]] = [[] for _ in range(n)]
    user_followees: list[list[int]] = [[] for _ in range(n)]
    for s, t in edges:
        followees[s].append(ids[t])
        followers[t].append(ids[s])
        user_followees[s].append(t)

    # external hub accounts, split by leaning and followed with Zipf popularity
    n_hubs = cfg.hub_count if cfg.hub_count is not None else max(10, n // 20)
    n_pi_hubs = min(n_hubs - 1, max(1, int(round(n_hubs * cfg.pi_fraction))))
    hub_width = len(str(n_hubs - 1))
    hub_ids = [f"hub{i:0{hub_width}d}" for i in range(n_hubs)]
    hub_groups = np.array([1] * n_pi_hubs + [0] * (n_hubs - n_pi_hubs))
    hub_pools = {g: np.nonzero(hub_groups == g)[0] for g in (0, 1)}
    hub_pop = {g: 1.0 / np.arange(1, hub_pools[g].size + 1) for g in (0, 1)}
    hub_h = h if cfg.hub_homophily is None else cfg.hub_homophily
    user_hubs: list[list[int]] = []
    for i in range(n):
        k = int(rng.poisson(cfg.hub_follows * activity[i]))
        chosen: set[int] = set()
        for _ in range(k):
            g = groups[i] if rng.random() < hub_h else 1 - groups[i]
            pool, w = hub_pools[g], hub_pop[g]
            chosen.add(int(pool[rng.choice(pool.size, p=w / w.sum())]))
        user_hubs.append(sorted(chosen))
        followees[i].extend(hub_ids[j] for j in user_hubs[i])

    text_h = h if cfg.text_homophily is None else cfg.text_homophily
    personas = np.where(rng.random(n) < text_h, groups, 1 - groups)
    text = _TextModel(cfg, territory, rng)
    ref = REFERENCE_TIME
    window = TWEET_WINDOW_DAYS * DAY
    locations = _LOCATIONS.get(territory.name, ("", ""))

    def tweet_time() -> float:
        return float(round(ref - rng.random() * window))

    def interaction_target(i: int, allow_hub: bool) -> tuple[str, int, bool]:
        """(target id, target persona/group, target is labeled user)."""
        users_, hubs_ = user_followees[i], user_hubs[i]
        if hubs_ and (not users_ or (allow_hub and rng.random() < 0.3)):
            j = hubs_[int(rng.integers(len(hubs_)))]
            return hub_ids[j], int(hub_groups[j]), False
        j = users_[int(rng.integers(len(users_)))]
        return ids[j], int(j), True

    users = []
    fav_counter = 0
    for i in range(n):
        g = int(groups[i])
        uid = ids[i]
        act = activity[i]
        persona = int(personas[i])
        timeline = []
        n_orig = int(min(500, rng.poisson(cfg.tweets_per_user * act)))
        for j in range(n_orig):
            urls = ()
            if rng.random() < _param("url_rate", g):
                urls = (_tld_url(rng, territory, _param("url_local", g), _param("url_state", g), f"news{j}"),)
            timeline.append(Tweet(
                f"{uid}-t{j}", uid, text.text(persona, persona), tweet_time(), urls=urls,
                retweet_count=int(rng.poisson(_param("retweeted", g))),
                favourite_count=int(rng.poisson(_param("favourited", g))),
            ))
        can_interact = bool(user_followees[i] or user_hubs[i])
        n_inter = int(rng.poisson(cfg.interactions_per_user * act)) if can_interact else 0
        n_inter = min(n_inter, 500 - len(timeline))
        for j in range(n_inter):
            kind = ("retweet", "reply", "mention")[int(rng.integers(3))]
            target, tj, is_user = interaction_target(i, kind == "retweet")
            tgroup = int(groups[tj]) if is_user else tj
            tid = f"{uid}-i{j}"
            if kind == "retweet":
                src_persona = int(personas[tj]) if is_user else tgroup
                body = text.text(src_persona, src_persona, extra=f"RT @{target}:")
                timeline.append(Tweet(tid, uid, body, tweet_time(), retweet_of=target, mentions=(target,)))
                continue
            pos, neg = _MOOD_WITHIN if tgroup == g else _MOOD_ACROSS
            u = rng.random()
            mood = "pos" if u < pos else "neg" if u < pos + neg else ""
            body = text.text(persona, persona, extra=f"@{target}", mood=mood)
            reply_to = target if kind == "reply" else None
            timeline.append(Tweet(tid, uid, body, tweet_time(), reply_to=reply_to, mentions=(target,),
                                  retweet_count=int(rng.poisson(_param("retweeted", g))),
                                  favourite_count=int(rng.poisson(_param("favourited", g)))))
        timeline.sort(key=lambda t: (t.created_at, t.tweet_id))

        favourites = []
        n_fav = int(min(500, rng.poisson(cfg.favourites_per_user * act))) if can_interact else 0
        for _ in range(n_fav):
            target, tj, is_user = interaction_target(i, True)
            src_persona = int(personas[tj]) if is_user else tj
            fav_counter += 1
            favourites.append(Tweet(f"{target}-f{fav_counter}", target,
                                    text.text(src_persona, src_persona), tweet_time()))

        age = max(TWEET_WINDOW_DAYS + 10.0, rng.normal(_param("age_days", g), 500.0))
        profile_url = None
        if rng.random() < _param("profile_url", g):
            profile_url = _tld_url(rng, territory, _param("profile_local", g), _param("profile_state", g),
                                   f"www.{uid}")
        ui_pool = territory.local_languages if rng.random() < _param("ui_local", g) else territory.state_languages
        users.append(UserRecord(
            user_id=uid,
            location=locations[0] if g == 1 else locations[1],
            created_at=float(round(ref - age * DAY)),
            followers_count=len(followers[i]) + int(rng.lognormal(_param("followers_extra", g), 0.6)),
            followees_count=len(followees[i]) + int(rng.lognormal(_param("followees_extra", g), 0.6)),
            listed_count=int(rng.poisson(_param("listed", g))),
            verified=bool(rng.random() < _param("verified", g)),
            geo_enabled=bool(rng.random() < _param("geo_enabled", g)),
            profile_url=profile_url,
            ui_language=ui_pool[0],
            timeline=tuple(timeline),
            favourites=tuple(favourites),
            followees=tuple(followees[i]),
            followers=tuple(followers[i]),
            label=PI if g == 1 else AI,
        ))
    return Dataset(territory, {u.user_id: u for u in users}, reference_time=ref)


def planted_directions(config: SynthConfig) -> dict[int, StanceLabel]:
    """Expected larger-mean group per behavioural feature under ``config``.

    Activity-driven features follow the sign of ``pi_activity - 1`` and
    carry no planted difference at equal activity; tweets in the local
    language (28) also need personas tilted toward the own group.
    """
    out = {}
    for fid, label in PLANTED_DIRECTIONS.items():
        if fid in ACTIVITY_FEATURES:
            if config.pi_activity == 1.0:
                continue
            label = PI if config.pi_activity > 1.0 else AI
        out[fid] = label
    text_h = config.homophily if config.text_homophily is None else config.text_homophily
    if text_h <= 0.5 or config.pi_activity < 1.0:
        out.pop(28, None)
    return out


def provenance(config: SynthConfig) -> dict:
    return {
        "generator": "natid.synth",
        "generator_version": GENERATOR_VERSION,
        "config": config.to_dict(),
        "expected_assortativity": expected_assortativity(config.homophily, config.pi_fraction,
                                                         config.pi_activity),
        "planted_directions": {str(k): v.value for k, v in sorted(planted_directions(config).items())},
    }


def write_synthetic(config: SynthConfig, directory) -> Manifest:
    """Generate and write ingest files plus ``provenance.json`` to ``directory``."""
    dataset = generate(config)
    manifest = save_dataset(dataset, directory)
    Path(directory, PROVENANCE_FILE).write_text(
        json.dumps(provenance(config), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest
