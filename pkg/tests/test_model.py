import pytest

from natid.model import (
    BASQUE_COUNTRY,
    CATALONIA,
    SCOTLAND,
    Dataset,
    StanceLabel,
    Territory,
    get_territory,
    validate_dataset,
)

from conftest import dataset, tweet, user


def test_stance_label_has_two_values():
    assert [l.value for l in StanceLabel] == ["PI", "AI"]
    assert StanceLabel.parse("pi") is StanceLabel.PI
    assert StanceLabel.parse(None) is None
    assert StanceLabel.PI.other() is StanceLabel.AI
    with pytest.raises(ValueError):
        StanceLabel.parse("maybe")


def test_builtin_territories():
    assert (CATALONIA.local_tld, CATALONIA.state_tld) == (".cat", ".es")
    assert BASQUE_COUNTRY.local_tld == ".eus"
    assert SCOTLAND.local_tld == ".scot"
    assert get_territory("basque country") is BASQUE_COUNTRY
    with pytest.raises(KeyError):
        get_territory("Kurdistan")


@pytest.mark.parametrize("kw", [
    dict(local_tld=".x", state_tld=".x"),
    dict(local_tld="x", state_tld=".y"),
    dict(local_languages=()),
    dict(local_languages=("ku",), state_languages=("ku", "tr")),
])
def test_territory_invariants(kw):
    base = dict(name="Kurdistan", local_tld=".krd", state_tld=".tr",
                local_languages=("ku",), state_languages=("tr",))
    base.update(kw)
    with pytest.raises(ValueError):
        Territory(**base)


def test_custom_territory_round_trip():
    t = Territory("Kurdistan", ".krd", ".tr", ("ku",), ("tr",))
    assert Territory.from_dict(t.to_dict()) == t
    assert not t.is_builtin


def test_validate_empty_dataset():
    assert validate_dataset(Dataset(CATALONIA, {})) == []


def test_validate_timeline_cap():
    u = user("a", timeline=tuple(tweet(f"t{i}", "a") for i in range(501)))
    v = validate_dataset(dataset(u))
    assert len(v) == 1 and v[0].user_id == "a" and v[0].field == "timeline"


def test_validate_foreign_author():
    a = user("a", timeline=(tweet("t1", "b"),))
    b = user("b")
    v = validate_dataset(dataset(a, b))
    assert len(v) == 1 and v[0].user_id == "a"


def test_validate_follow_symmetry():
    a = user("a", followees=("b",))
    b = user("b")
    assert [x.field for x in validate_dataset(dataset(a, b))] == ["followees"]


def test_validate_is_pure(two_users):
    before = dict(two_users.users)
    assert validate_dataset(two_users) == validate_dataset(two_users) == []
    assert dict(two_users.users) == before


def test_dataset_is_sorted_and_immutable():
    d = dataset(user("b"), user("a"))
    assert d.user_ids() == ["a", "b"]
    with pytest.raises(TypeError):
        d.users["c"] = user("c")


def test_user_lists_are_canonical():
    u = user("a", followees=("c", "b", "c"))
    assert u.followees == ("b", "c")
