import json
import os
import warnings

import pytest
from hypothesis import given, settings, strategies as st

from natid.ingest import (
    IngestError,
    IngestWarning,
    Manifest,
    load_dataset,
    load_directory,
    read_manifest,
    save_dataset,
    write_manifest,
)
from natid.model import CATALONIA, Dataset, Tweet, UserRecord


def _empty_manifest(tmp_path):
    m = Manifest.in_directory(tmp_path, CATALONIA)
    for p in (m.users_path, m.tweets_path, m.favourites_path, m.edges_path):
        p.write_text("")
    return m


def test_empty_files_give_empty_dataset(tmp_path):
    d = load_dataset(_empty_manifest(tmp_path))
    assert len(d) == 0 and d.territory == CATALONIA


def test_two_user_fixture_populates_both_sides(tmp_path):
    m = _empty_manifest(tmp_path)
    m.users_path.write_text(
        json.dumps({"user_id": "a", "label": "PI"}) + "\n" + json.dumps({"user_id": "b", "label": "AI"}) + "\n")
    m.edges_path.write_text(json.dumps({"src": "a", "dst": "b", "kind": "follows"}) + "\n")
    d = load_dataset(m)
    assert d.users["a"].followees == ("b",) and d.users["b"].followers == ("a",)
    assert d.users["a"].followers == () and d.users["b"].followees == ()


def test_bad_json_line_is_cited(tmp_path):
    m = _empty_manifest(tmp_path)
    m.users_path.write_text('{"user_id": "a"}\n{"user_id": "b"}\n{not json\n')
    with pytest.raises(IngestError) as err:
        load_dataset(m)
    assert err.value.line == 3 and "users.jsonl" in str(err.value)


def test_missing_file_names_path(tmp_path):
    m = _empty_manifest(tmp_path)
    os.remove(m.tweets_path)
    with pytest.raises(IngestError, match="tweets.jsonl"):
        load_dataset(m)


def test_duplicates_last_wins_and_unreferenced_dropped(tmp_path):
    m = _empty_manifest(tmp_path)
    m.users_path.write_text('{"user_id": "a", "location": "x"}\n{"user_id": "a", "location": "y"}\n')
    m.tweets_path.write_text('{"tweet_id": "t", "author_id": "zz", "text": "", "created_at": 0}\n')
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        d = load_dataset(m)
    assert d.users["a"].location == "y"
    assert sum(issubclass(w.category, IngestWarning) for w in caught) == 2


def test_empty_dataset_writes_four_empty_files(tmp_path):
    m = save_dataset(Dataset(CATALONIA, {}), tmp_path)
    for p in (m.users_path, m.tweets_path, m.favourites_path, m.edges_path):
        assert p.read_text() == ""


def test_fixture_round_trip(tmp_path, two_users):
    save_dataset(two_users, tmp_path)
    assert load_directory(tmp_path) == two_users


def test_manifest_round_trip(tmp_path):
    m = Manifest.in_directory(tmp_path, CATALONIA, reference_time=5.0)
    write_manifest(m, tmp_path / "manifest.json")
    assert read_manifest(tmp_path) == m


def test_manifest_paths_distinct(tmp_path):
    with pytest.raises(ValueError):
        Manifest(CATALONIA, tmp_path / "a", tmp_path / "a", tmp_path / "b", tmp_path / "c")


@pytest.mark.skipif(os.geteuid() == 0, reason="root ignores directory permissions")
def test_read_only_directory(tmp_path):
    ro = tmp_path / "ro"
    ro.mkdir()
    ro.chmod(0o500)
    try:
        with pytest.raises(IngestError):
            save_dataset(Dataset(CATALONIA, {}), ro)
    finally:
        ro.chmod(0o700)


def test_unwritable_target_is_ingest_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(IngestError):
        save_dataset(Dataset(CATALONIA, {}), blocker / "sub")


def test_load_is_order_independent(tmp_path, two_users):
    m = save_dataset(two_users, tmp_path)
    lines = m.users_path.read_text().splitlines()
    m.users_path.write_text("\n".join(reversed(lines)) + "\n")
    assert load_dataset(m) == two_users


ids = st.sampled_from(["a", "b", "c", "d"])
text = st.text(st.characters(blacklist_categories=("Cs",)), max_size=20)


@st.composite
def datasets(draw):
    uids = sorted(draw(st.sets(ids, min_size=0, max_size=4)))
    follows = draw(st.sets(st.tuples(st.sampled_from(uids), st.sampled_from(uids + ["ext"])), max_size=6)) if uids else set()
    follows = {(s, d) for s, d in follows if s != d}
    users = []
    n = 0
    for uid in uids:
        tl = []
        for _ in range(draw(st.integers(0, 2))):
            n += 1
            tl.append(Tweet(f"t{n}", uid, draw(text), float(draw(st.integers(0, 10**9))),
                            retweet_of=draw(st.none() | ids), mentions=tuple(draw(st.lists(ids, max_size=2))),
                            urls=tuple(draw(st.lists(st.just("http://x.cat"), max_size=1))),
                            retweet_count=draw(st.integers(0, 5))))
        favs = []
        for _ in range(draw(st.integers(0, 2))):
            n += 1
            favs.append(Tweet(f"f{n}", draw(ids), draw(text), 1.0))
        users.append(UserRecord(
            uid, location=draw(text), created_at=float(draw(st.integers(0, 10**9))),
            followers_count=draw(st.integers(0, 100)), verified=draw(st.booleans()),
            profile_url=draw(st.none() | st.just("https://a.cat")), ui_language=draw(st.sampled_from(["", "ca", "en-GB"])),
            timeline=tuple(tl), favourites=tuple(favs),
            followees=tuple(d for s, d in follows if s == uid),
            followers=tuple(s for s, d in follows if d == uid),
            label=draw(st.sampled_from([None, "PI", "AI"])),
        ))
    return Dataset(CATALONIA, {u.user_id: u for u in users}, draw(st.none() | st.just(12.5)))


@settings(max_examples=60, deadline=None)
@given(datasets())
def test_round_trip_property(tmp_path_factory, d):
    path = tmp_path_factory.mktemp("rt")
    save_dataset(d, path)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert load_directory(path) == d
