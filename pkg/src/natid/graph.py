"""Follow and interaction graphs over labeled users, and their homophily.

Homophily is measured as Newman's nominal assortativity over the two stance
labels. Each edge of weight ``w`` between labels ``i`` and ``j`` adds
``w/2`` to both ``e[i, j]`` and ``e[j, i]`` before normalisation, so
directed graphs are symmetrised for ``r``; the directed mixing matrix is
still available with ``symmetric=False``.
"""

from __future__ import annotations

import csv
import enum
import io
import math
import xml.etree.ElementTree as ET
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

from .model import Dataset, StanceLabel
from .stats import mann_whitney_u

LABEL_INDEX = {StanceLabel.PI: 0, StanceLabel.AI: 1}

# default per-kind weights of the interaction graph
INTERACTION_WEIGHTS = {"retweet": 1.0, "reply": 1.0, "mention": 1.0, "favourite": 1.0}


class GraphError(ValueError):
    pass


class GraphKind(str, enum.Enum):
    FOLLOW = "Follow"
    INTERACTION = "Interaction"


@dataclass(frozen=True)
class LabeledGraph:
    nodes: tuple[tuple[str, StanceLabel], ...]
    edges: tuple[tuple[str, str, float], ...]
    directed: bool = True
    kind: GraphKind = GraphKind.FOLLOW

    def __post_init__(self):
        nodes = tuple(sorted((str(u), StanceLabel.parse(l)) for u, l in self.nodes))
        labels = dict(nodes)
        if len(labels) != len(nodes):
            raise GraphError("duplicate node ids")
        edges = []
        for src, dst, w in self.edges:
            if src not in labels or dst not in labels:
                raise GraphError(f"edge ({src}, {dst}) has an endpoint outside the node set")
            if src == dst:
                raise GraphError(f"self-loop on {src}")
            if not w > 0:
                raise GraphError(f"edge ({src}, {dst}) has non-positive weight {w}")
            edges.append((src, dst, float(w)))
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", tuple(sorted(edges)))
        object.__setattr__(self, "_labels", labels)

    @property
    def labels(self) -> Mapping[str, StanceLabel]:
        return self._labels

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Integer edge endpoints, weights and per-node label codes (PI=0, AI=1)."""
        index = {u: i for i, (u, _) in enumerate(self.nodes)}
        src = np.fromiter((index[s] for s, _, _ in self.edges), dtype=np.int64, count=self.n_edges)
        dst = np.fromiter((index[d] for _, d, _ in self.edges), dtype=np.int64, count=self.n_edges)
        w = np.fromiter((w for _, _, w in self.edges), dtype=float, count=self.n_edges)
        codes = np.array([LABEL_INDEX[l] for _, l in self.nodes], dtype=np.int64)
        return src, dst, w, codes


def _labeled_users(dataset: Dataset) -> dict[str, StanceLabel]:
    labeled = dataset.labeled()
    if len(labeled) < 2:
        raise GraphError("degenerate graph: fewer than two labeled users")
    return labeled


def build_follow_graph(dataset: Dataset) -> LabeledGraph:
    """Directed follow graph restricted to labeled users, unit weights."""
    labeled = _labeled_users(dataset)
    pairs = set()
    for uid in labeled:
        u = dataset.users[uid]
        pairs.update((uid, v) for v in u.followees if v in labeled and v != uid)
        pairs.update((v, uid) for v in u.followers if v in labeled and v != uid)
    return LabeledGraph(
        tuple(labeled.items()), tuple((s, d, 1.0) for s, d in pairs), True, GraphKind.FOLLOW
    )


def interaction_counts(dataset: Dataset, weights: Optional[Mapping[str, float]] = None) -> dict[tuple[str, str], float]:
    """Weighted interaction counts ``(source, target) -> weight`` for all targets.

    Retweets, replies and mentions come from the source's own timeline
    (mentions inside retweets are not the source's words and are skipped);
    favourites are attributed to the favourited tweet's author.
    """
    weights = dict(INTERACTION_WEIGHTS if weights is None else weights)
    out: dict[tuple[str, str], float] = defaultdict(float)
    for uid, u in dataset.users.items():
        for t in u.timeline:
            if t.retweet_of:
                out[uid, t.retweet_of] += weights.get("retweet", 0.0)
                continue
            if t.reply_to:
                out[uid, t.reply_to] += weights.get("reply", 0.0)
            for m in t.mentions:
                out[uid, m] += weights.get("mention", 0.0)
        for t in u.favourites:
            out[uid, t.author_id] += weights.get("favourite", 0.0)
    return {k: v for k, v in out.items() if v > 0 and k[0] != k[1]}


def build_interaction_graph(dataset: Dataset, weights: Optional[Mapping[str, float]] = None) -> LabeledGraph:
    labeled = _labeled_users(dataset)
    counts = interaction_counts(dataset, weights)
    edges = tuple((s, d, w) for (s, d), w in counts.items() if s in labeled and d in labeled)
    return LabeledGraph(tuple(labeled.items()), edges, True, GraphKind.INTERACTION)


@dataclass(frozen=True)
class MixingMatrix:
    e: np.ndarray  # e[i, j]: weight fraction from label i to label j (PI=0, AI=1)

    def __eq__(self, other):
        if not isinstance(other, MixingMatrix):
            return NotImplemented
        return bool(np.array_equal(self.e, other.e))

    __hash__ = None

    @property
    def a(self) -> np.ndarray:
        return self.e.sum(axis=1)

    @property
    def b(self) -> np.ndarray:
        return self.e.sum(axis=0)


def _mixing_from_arrays(src, dst, w, codes, symmetric=True) -> np.ndarray:
    cs, cd = codes[src], codes[dst]
    e = np.bincount(cs * 2 + cd, weights=w, minlength=4).reshape(2, 2)
    if symmetric:
        e = (e + e.T) / 2.0
    return e / w.sum()


def mixing_matrix(graph: LabeledGraph, symmetric: bool = True) -> MixingMatrix:
    if graph.n_edges == 0:
        raise GraphError("mixing matrix undefined for a graph without edges")
    src, dst, w, codes = graph.arrays()
    return MixingMatrix(_mixing_from_arrays(src, dst, w, codes, symmetric))


def assortativity_from_mixing(e: np.ndarray) -> float:
    a, b = e.sum(axis=1), e.sum(axis=0)
    baseline = float(a @ b)
    denom = 1.0 - baseline
    if denom <= 1e-15:
        raise GraphError("undefined assortativity: all edge endpoints carry one label")
    r = (float(np.trace(e)) - baseline) / denom
    return min(1.0, max(-1.0, r))


def nominal_assortativity(graph: LabeledGraph) -> float:
    return assortativity_from_mixing(mixing_matrix(graph, symmetric=True).e)


def _same_label_fractions(src, dst, w, codes) -> np.ndarray:
    """Per-node weighted fraction of (symmetrised) neighbours sharing the label."""
    n = codes.size
    same = (codes[src] == codes[dst]).astype(float) * w
    deg = np.bincount(src, weights=w, minlength=n) + np.bincount(dst, weights=w, minlength=n)
    same_deg = np.bincount(src, weights=same, minlength=n) + np.bincount(dst, weights=same, minlength=n)
    mask = deg > 0
    return same_deg[mask] / deg[mask]


@dataclass(frozen=True)
class HomophilyReport:
    assortativity_r: float
    p_value: float  # label-permutation p-value (headline)
    method: str
    n_nodes: int
    n_edges: int
    n_permutations: int
    mww_statistic: float = math.nan
    mww_p_value: float = math.nan
    mixing: Optional[MixingMatrix] = None  # directed mixing matrix


def homophily_significance(graph: LabeledGraph, n_permutations: int = 1000, seed: int = 0) -> HomophilyReport:
    """Assortativity with a label-permutation p-value.

    Labels are shuffled over nodes (edges fixed) ``n_permutations`` times;
    ``p = (1 + #{r_perm >= r}) / (1 + n_permutations)``. Permutations where
    ``r`` is undefined never count as exceeding. As a secondary check the
    per-node same-label neighbour fractions of the observed graph are
    compared with the pooled permuted ones by a Mann-Whitney U test.
    """
    if n_permutations < 100:
        raise ValueError("n_permutations must be at least 100")
    if graph.n_edges < 2:
        raise GraphError("degenerate graph: need at least two edges")
    src, dst, w, codes = graph.arrays()
    try:
        r_obs = assortativity_from_mixing(_mixing_from_arrays(src, dst, w, codes))
    except GraphError as exc:
        raise GraphError(f"degenerate graph: {exc}") from None
    rng = np.random.default_rng(seed)
    exceed = 0
    pooled = []
    for _ in range(n_permutations):
        perm = rng.permutation(codes)
        try:
            r = assortativity_from_mixing(_mixing_from_arrays(src, dst, w, perm))
        except GraphError:
            r = math.nan
        if r >= r_obs:
            exceed += 1
        pooled.append(_same_label_fractions(src, dst, w, perm))
    p = (exceed + 1) / (n_permutations + 1)
    mww = mann_whitney_u(_same_label_fractions(src, dst, w, codes), np.concatenate(pooled))
    return HomophilyReport(
        assortativity_r=r_obs,
        p_value=p,
        method="nominal assortativity; p: label permutation (headline); secondary: "
               "Mann-Whitney U on same-label neighbour fractions vs permuted",
        n_nodes=graph.n_nodes,
        n_edges=graph.n_edges,
        n_permutations=n_permutations,
        mww_statistic=mww.statistic,
        mww_p_value=mww.p_value,
        mixing=MixingMatrix(_mixing_from_arrays(src, dst, w, codes, symmetric=False)),
    )


def _fmt_weight(w: float) -> str:
    return repr(int(w)) if float(w).is_integer() else repr(w)


def _dot(graph: LabeledGraph) -> str:
    arrow = "->" if graph.directed else "--"
    lines = [f"{'digraph' if graph.directed else 'graph'} {graph.kind.value} {{"]
    for uid, label in graph.nodes:
        lines.append(f'  "{_dot_escape(uid)}" [stance="{label.value}"];')
    for s, d, w in graph.edges:
        lines.append(f'  "{_dot_escape(s)}" {arrow} "{_dot_escape(d)}" [weight={_fmt_weight(w)}];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def _dot_escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


def _graphml(graph: LabeledGraph) -> str:
    ns = "http://graphml.graphdrawing.org/xmlns"
    root = ET.Element("graphml", {"xmlns": ns})
    ET.SubElement(root, "key", {"id": "stance", "for": "node", "attr.name": "stance", "attr.type": "string"})
    ET.SubElement(root, "key", {"id": "weight", "for": "edge", "attr.name": "weight", "attr.type": "double"})
    g = ET.SubElement(root, "graph", {"id": graph.kind.value,
                                      "edgedefault": "directed" if graph.directed else "undirected"})
    for uid, label in graph.nodes:
        node = ET.SubElement(g, "node", {"id": uid})
        ET.SubElement(node, "data", {"key": "stance"}).text = label.value
    for i, (s, d, w) in enumerate(graph.edges):
        edge = ET.SubElement(g, "edge", {"id": f"e{i}", "source": s, "target": d})
        ET.SubElement(edge, "data", {"key": "weight"}).text = repr(float(w))
    ET.indent(root)
    return '<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(root, encoding="unicode") + "\n"


CSV_HEADER = ("src", "dst", "weight", "src_stance", "dst_stance")


def _csv(graph: LabeledGraph) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    labels = graph.labels
    for s, d, w in graph.edges:
        writer.writerow((s, d, _fmt_weight(w), labels[s].value, labels[d].value))
    return buf.getvalue()


_WRITERS = {"dot": _dot, "graphml": _graphml, "csv": _csv}


def export_graph(graph: LabeledGraph, fmt: str, path) -> int:
    """Write ``graph`` as DOT, GraphML or edge-list CSV; returns bytes written.

    Nodes carry a ``stance`` attribute and edges a ``weight``; ordering is
    by user id so repeated exports are byte-identical.
    """
    writer = _WRITERS.get(str(fmt).lower())
    if writer is None:
        raise ValueError(f"unknown graph format {fmt!r}; expected one of {sorted(_WRITERS)}")
    data = writer(graph).encode("utf-8")
    Path(path).write_bytes(data)
    return len(data)
