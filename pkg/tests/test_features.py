import numpy as np
import pytest

from natid.features import (
    BEHAVIORAL_COLUMNS,
    CLASSIFIER_FAMILIES,
    Family,
    FeatureError,
    FeatureMatrix,
    behavioral_features,
    favourite_features,
    group_comparison_report,
    interaction_features,
    interaction_vocabulary,
    load_matrix,
    network_features,
    network_vocabulary,
    save_matrix,
    timeline_features,
    url_tld,
)
from natid.model import BASQUE_COUNTRY, StanceLabel
from natid.textfeat import EmbeddingTable

from conftest import REF, dataset, tweet, user

TABLE = EmbeddingTable(("x", "y", "z"), np.array([[1.0, 0.0], [0.0, 1.0], [2.0, 2.0]]))


def col(matrix, uid, name):
    return matrix.dense()[matrix.row_ids.index(uid), matrix.columns.index(name)]


def test_timeline_rows():
    d = dataset(
        user("a", label="PI", timeline=(tweet("1", "a", "x"),)),
        user("b", label="AI", timeline=(tweet("2", "b", "x"), tweet("3", "b", "y z"))),
        user("c", label="AI"),
    )
    m = timeline_features(d, TABLE)
    assert m.row_ids == ("a", "b", "c") and m.family is Family.TIMELINE
    np.testing.assert_allclose(m.values, [[1, 0], [0.5 * (1 + 1.0), 0.5 * (0 + 1.5)], [0, 0]])


def test_favourite_rows_and_equivalence():
    tl = (tweet("1", "a", "x y"), tweet("2", "a", "z"))
    d = dataset(user("a", label="PI", timeline=tl, favourites=tl),
                user("b", label="AI", favourites=(tweet("3", "q", "y"),)),
                user("c", label="AI"))
    fav = favourite_features(d, TABLE)
    np.testing.assert_allclose(fav.values[1], [0, 1])
    np.testing.assert_allclose(fav.values[2], [0, 0])
    np.testing.assert_allclose(fav.values[0], timeline_features(d, TABLE).values[0])


def test_interaction_features():
    # v is the clear top target; w sits below the cutoff
    a = user("a", label="PI", timeline=tuple(tweet(f"r{i}", "a", "RT", retweet_of="v") for i in range(3))
             + (tweet("m", "a", "@w", mentions=("w",)),))
    b = user("b", label="AI", timeline=(tweet("s", "b", "RT", retweet_of="v"),))
    d = dataset(a, b)
    vocab = interaction_vocabulary(d, 0.6)
    assert vocab == ["v"]
    m = interaction_features(d, 0.6)
    assert m.columns == ("v",) and m.is_sparse
    assert col(m, "a", "v") == 3 and col(m, "b", "v") == 1
    single = dataset(user("a", label="PI", timeline=(tweet("r", "a", "RT", retweet_of="v"),)), user("b", label="AI"))
    m1 = interaction_features(single)
    assert m1.columns == ("v",) and col(m1, "a", "v") == 1 and col(m1, "b", "v") == 0
    with pytest.raises(FeatureError):
        interaction_features(dataset(user("a", label="PI")))


def test_network_features():
    a = user("a", label="PI", followees=("hub",))
    b = user("b", label="AI", followers=("hub",))
    c = user("c", label="AI")
    m = network_features(dataset(a, b, c), vocabulary=["hub"])
    assert col(m, "a", "hub") == 1 and col(m, "b", "hub") == 1 and col(m, "c", "hub") == 0
    assert network_vocabulary(dataset(a, b, c), 0.5) == ["hub"]
    with pytest.raises(FeatureError):
        network_features(dataset(c))


def test_behavioral_examples():
    pi = user("p", label="PI", profile_url="https://www.example.eus/about",
              timeline=(tweet("1", "p", "RT", retweet_of="q"), tweet("2", "p", "RT", retweet_of="r"),
                        tweet("3", "p", "RT", retweet_of="s")))
    d = dataset(pi, user("q", label="PI"), user("r", label="PI"), user("s", label="AI"), territory=BASQUE_COUNTRY)
    m = behavioral_features(d)
    assert m.columns == BEHAVIORAL_COLUMNS and m.shape == (4, 30)
    assert col(m, "p", "tweets_posted") == 3
    assert col(m, "p", "profile_url_local_tld") == 1 and col(m, "p", "profile_url_state_tld") == 0
    assert col(m, "p", "retweets_within") == 2 and col(m, "p", "retweets_across") == 1
    assert m.meta["coverage"][13] == 1


def test_behavioral_partitions_and_age():
    a = user("a", label="PI", created_at=REF - 10 * 86400, followees=("b", "c", "x"),
             timeline=(tweet("1", "a", "hi @b", reply_to="b", mentions=("b",)),
                       tweet("2", "a", "RT", retweet_of="c")))
    b = user("b", label="PI", followers=("a",))
    c = user("c", label="AI", followers=("a",))
    m = behavioral_features(dataset(a, b, c))
    row = dict(zip(m.columns, m.dense()[0]))
    assert row["interactions_within"] + row["interactions_across"] == 2
    assert row["follows_within"] + row["follows_across"] == 2
    assert row["account_age_days"] == pytest.approx(10)
    assert np.isfinite(m.dense()).all()


def test_url_tld():
    assert url_tld("https://www.gencat.cat/x") == ".cat"
    assert url_tld("example.es") == ".es"
    assert url_tld("http://localhost") is None
    assert url_tld(None) is None


def test_comparison_examples():
    labels = tuple([StanceLabel.PI] * 50 + [StanceLabel.AI] * 50)
    rng = np.random.default_rng(0)
    x = np.concatenate([rng.normal(10, 1, 50), rng.normal(5, 1, 50)])
    values = np.column_stack([x, np.full(100, 3.0)])
    m = FeatureMatrix(Family.BEHAVIORAL, tuple(f"u{i:03d}" for i in range(100)),
                      ("tweets_posted", "tweets_favourited"), values, labels)
    rows = group_comparison_report(m)
    assert rows[0].prominent is StanceLabel.PI and rows[0].result.p_value < 0.01 and rows[0].stars == "**"
    assert rows[1].prominent is None and rows[1].result.p_value == 1.0
    one_class = FeatureMatrix(Family.BEHAVIORAL, ("a", "b"), ("f",), np.ones((2, 1)), (StanceLabel.PI,) * 2)
    with pytest.raises(FeatureError):
        group_comparison_report(one_class)


def test_report_has_30_rows():
    d = dataset(*(user(f"u{i}", label="PI" if i % 2 else "AI", listed_count=i) for i in range(6)))
    assert len(group_comparison_report(behavioral_features(d))) == 30


def test_families_share_row_order(two_users):
    mats = [timeline_features(two_users, TABLE), favourite_features(two_users, TABLE),
            network_features(two_users, 0.5), behavioral_features(two_users)]
    assert len({m.row_ids for m in mats}) == 1
    assert set(CLASSIFIER_FAMILIES) == {Family.TIMELINE, Family.FAVOURITES, Family.INTERACTIONS, Family.NETWORK}


@pytest.mark.parametrize("sparse", [False, True])
def test_matrix_round_trip(tmp_path, two_users, sparse):
    m = network_features(two_users, 0.5) if sparse else behavioral_features(two_users)
    save_matrix(m, tmp_path / "m.csv")
    back = load_matrix(tmp_path / "m.csv")
    assert back.row_ids == m.row_ids and back.columns == m.columns and back.labels == m.labels
    np.testing.assert_array_equal(back.dense(), m.dense())
