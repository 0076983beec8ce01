from pathlib import Path

import pytest

from natid.model import CATALONIA, Dataset, Tweet, UserRecord

REF = 1_600_000_000.0


def tweet(tid, author, text="", t=REF - 3600, **kw):
    return Tweet(tid, author, text, t, **kw)


def user(uid, **kw):
    kw.setdefault("created_at", REF - 100 * 86400)
    return UserRecord(uid, **kw)


def dataset(*users, territory=CATALONIA, reference_time=REF):
    return Dataset(territory, {u.user_id: u for u in users}, reference_time)


@pytest.fixture
def two_users():
    """One PI and one AI user; a follows b."""
    a = user("a", location="Països Catalans", label="PI", followees=("b",),
             timeline=(tweet("t1", "a", "Bon dia a tothom http://x.cat", urls=("http://x.cat",)),))
    b = user("b", location="Girona, Espanya", label="AI", followers=("a",),
             favourites=(tweet("t9", "a", "hola"),))
    return dataset(a, b)


FIXTURES = Path(__file__).parent / "fixtures"


def labeler_cases():
    """Rows of the annotated location/hashtag fixture."""
    rows = []
    for line in (FIXTURES / "labeler_cases.tsv").read_text(encoding="utf-8").splitlines():
        if not line or line.startswith("#"):
            continue
        terr, loc, tags, expected, branch = line.split("\t")
        rows.append((terr, loc, tags.split(), None if expected == "-" else expected, branch))
    return rows


def case_user(location, tags):
    timeline = tuple(tweet(f"t{i}", "u", f"vote {tag}") for i, tag in enumerate(tags))
    return user("u", location=location, timeline=timeline)


def brute_force_assortativity(labels, edges):
    """Nominal assortativity by an explicit double loop over edges and label pairs.

    ``labels`` maps node -> "PI"/"AI"; each (src, dst, w) edge adds w/2 to
    e[src, dst] and to e[dst, src].
    """
    kinds = ["PI", "AI"]
    e = {(i, j): 0.0 for i in kinds for j in kinds}
    total = 0.0
    for s, d, w in edges:
        for i in kinds:
            for j in kinds:
                if labels[s] == i and labels[d] == j:
                    e[i, j] += w / 2
                    e[j, i] += w / 2
        total += w
    e = {k: v / total for k, v in e.items()}
    a = {i: sum(e[i, j] for j in kinds) for i in kinds}
    b = {j: sum(e[i, j] for i in kinds) for j in kinds}
    base = sum(a[i] * b[i] for i in kinds)
    return (sum(e[i, i] for i in kinds) - base) / (1 - base)


def random_labeled_graph(rng, max_nodes=50):
    """Random node labels and distinct weighted directed edges without self-loops."""
    from natid.graph import LabeledGraph

    while True:
        n = int(rng.integers(3, max_nodes + 1))
        labels = {f"n{i}": ("PI" if rng.random() < rng.uniform(0.2, 0.8) else "AI") for i in range(n)}
        m = int(rng.integers(2, 3 * n))
        pairs = {(int(a), int(b)) for a, b in rng.integers(0, n, size=(m, 2)) if a != b}
        edges = [(f"n{a}", f"n{b}", float(rng.integers(1, 4))) for a, b in sorted(pairs)]
        ends = {labels[s] for s, d, _ in edges} | {labels[d] for s, d, _ in edges}
        if len(edges) >= 2 and len(ends) == 2:
            return LabeledGraph(tuple(labels.items()), tuple(edges)), labels, edges


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
