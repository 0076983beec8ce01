import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from natid.textfeat import (
    SAMPLE_LANGUAGES,
    EmbeddingTable,
    build_profile,
    default_lexicon,
    default_profiles,
    embed_text,
    identify_language,
    load_embeddings,
    read_lexicon,
    sample_sentences,
    save_embeddings,
    sentiment_score,
    tokenize,
    train_skipgram,
)


def test_tokenize():
    assert tokenize("Hello WORLD http://x.cat @bob") == ["hello", "world", "<url>", "<mention>"]
    assert tokenize("") == []
    assert tokenize("#VoteYes!") == ["#voteyes"]


def clique_corpus(seed, size=20, sentences=400, length=8):
    """Sentences drawn from one of two disjoint token cliques."""
    rng = np.random.default_rng(seed)
    cliques = [[f"a{i}" for i in range(size)], [f"b{i}" for i in range(size)]]
    return cliques, [list(rng.choice(cliques[s % 2], length)) for s in range(sentences)]


def clique_cosines(table, cliques):
    unit = {t: table[t] / np.linalg.norm(table[t]) for c in cliques for t in c}
    within = [unit[x] @ unit[y] for c in cliques for x in c for y in c if x < y]
    cross = [unit[x] @ unit[y] for x in cliques[0] for y in cliques[1]]
    return float(np.mean(within)), float(np.mean(cross))


def test_skipgram_shape():
    table = train_skipgram([["the", "cat", "sat"]] * 5, dimension=8, epochs=1)
    assert set(table.tokens) == {"the", "cat", "sat"}
    assert table.matrix.shape == (3, 8) and np.isfinite(table.matrix).all()


def test_skipgram_min_count():
    with pytest.raises(ValueError):
        train_skipgram([["a", "b", "c"]], min_count=2)
    table = train_skipgram([["a", "b", "a", "c"], ["b", "d"]], dimension=4, min_count=2, epochs=1)
    assert set(table.tokens) == {"a", "b"}


def test_skipgram_separates_cliques():
    wins = 0
    for seed in range(5):
        cliques, corpus = clique_corpus(seed)
        table = train_skipgram(corpus, dimension=20, epochs=3, seed=seed)
        within, cross = clique_cosines(table, cliques)
        wins += within > cross
    assert wins >= 4


def test_skipgram_deterministic():
    _, corpus = clique_corpus(1, sentences=50)
    a, b = train_skipgram(corpus, dimension=5, seed=3), train_skipgram(corpus, dimension=5, seed=3)
    assert a.tokens == b.tokens and np.array_equal(a.matrix, b.matrix)


def test_embedding_file_round_trip(tmp_path):
    _, corpus = clique_corpus(0, sentences=60)
    table = train_skipgram(corpus, dimension=6, epochs=1)
    save_embeddings(table, tmp_path / "e.txt")
    back = load_embeddings(tmp_path / "e.txt")
    assert back.tokens == table.tokens
    np.testing.assert_allclose(back.matrix, table.matrix, atol=1e-6)
    assert back.params["dimension"] == 6


def test_load_embeddings_plain_and_errors(tmp_path):
    path = tmp_path / "e.txt"
    path.write_text("x 1 2 3\ny 4 5 6\n")
    t = load_embeddings(path)
    assert len(t) == 2 and t.dimension == 3
    path.write_text("x 1 2 3\ny 4 5\n")
    with pytest.raises(ValueError, match="2"):
        load_embeddings(path)


def test_embed_text():
    t = EmbeddingTable(("x", "y"), np.array([[1.0, 0.0], [0.0, 1.0]]))
    np.testing.assert_array_equal(embed_text(["x"], t), [1, 0])
    np.testing.assert_array_equal(embed_text(["x", "y"], t), [0.5, 0.5])
    np.testing.assert_array_equal(embed_text(["zz", "qq"], t), [0, 0])
    np.testing.assert_array_equal(embed_text([], t), [0, 0])


@settings(max_examples=100)
@given(st.lists(st.sampled_from(["a", "b", "c", "oov"]), max_size=12), st.randoms())
def test_embed_text_permutation_invariant(tokens, rnd):
    t = EmbeddingTable(("a", "b", "c"), np.arange(9.0).reshape(3, 3) / 7)
    shuffled = list(tokens)
    rnd.shuffle(shuffled)
    np.testing.assert_allclose(embed_text(shuffled, t), embed_text(tokens, t), atol=1e-12)


def test_language_id_self_classification():
    profiles = default_profiles()
    for lang in SAMPLE_LANGUAGES:
        for sentence in sample_sentences(lang):
            assert identify_language(sentence, profiles) == lang


def test_language_id_held_out_sentences():
    profiles = default_profiles()
    cases = {
        "ca": "Aquesta setmana anirem a la platja amb els nostres amics",
        "es": "Mañana vamos a comer con mis padres en el centro de la ciudad",
        "eu": "Gaur goizean mendira joan gara eta eguraldi ona egin du",
        "en": "We are going to the cinema with our friends this evening",
    }
    for lang, text in cases.items():
        assert identify_language(text, profiles) == lang


def test_language_id_edges():
    profiles = default_profiles()
    assert identify_language("ok", profiles) == "und"
    assert identify_language("@someone http://a.b #tag", profiles) == "und"
    with pytest.raises(ValueError):
        identify_language("some text here", [])
    text = "Bon dia a tothom, com estem avui?"
    assert identify_language(text, profiles) == identify_language(text, profiles)


@settings(max_examples=50, deadline=None)
@given(st.text(max_size=40))
def test_language_id_codomain(text):
    profiles = [build_profile(["aaa bbb ccc"], "xx"), build_profile(["zzz yyy"], "yy")]
    assert identify_language(text, profiles) in {"xx", "yy", "und"}


def test_sentiment_examples():
    lex = read_lexicon(["good\t1", "bad\t-1"])
    assert sentiment_score(["good", "good"], lex) == (2.0, "pos")
    assert sentiment_score(["bad"], lex) == (-1.0, "neg")
    assert sentiment_score(["the", "cat"], lex) == (0.0, "neu")
    with pytest.raises(ValueError):
        read_lexicon(["broken line"])


@settings(max_examples=100)
@given(st.lists(st.sampled_from(["good", "bad", "meh", "great"])), st.lists(st.sampled_from(["good", "bad", "x"])))
def test_sentiment_additive(a, b):
    lex = read_lexicon(["good\t1", "bad\t-1", "great\t0.5"])
    assert sentiment_score(a + b, lex).score == pytest.approx(
        sentiment_score(a, lex).score + sentiment_score(b, lex).score, abs=1e-12)


def test_default_lexicon_has_both_polarities():
    pol = default_lexicon().polarity
    assert any(v > 0 for v in pol.values()) and any(v < 0 for v in pol.values())


def test_profile_rank_order():
    # most frequent trigram first, ties broken alphabetically; words padded with "_"
    assert build_profile(["aaaa"], "xx").trigrams == ("aaa", "_aa", "aa_")
    assert build_profile(["abab"], "xx").trigrams == ("_ab", "ab_", "aba", "bab")
