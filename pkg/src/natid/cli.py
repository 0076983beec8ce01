"""Command-line entry point: ``natid <command> [options]``.

Commands: label, homophily, compare, featurize, classify, synth,
export-graph. Settings come from an optional JSON file (``--config``)
and are overridden by flags. Every output file goes to ``--out``; stdout
only carries a short human-readable summary.

Exit codes: 0 success, 2 invalid input or configuration, 1 internal error.

Config file keys (all optional)::

    {
      "data": "dataset directory (with manifest.json)",
      "out": "output directory",
      "territory": "Catalonia",
      "rules": "labeling rule file (JSON)",
      "seed": 0,
      "k": 10,
      "families": ["Timeline", "Interactions", "Favourites", "Network"],
      "classifiers": ["NB", "SV", "RF", "ME"],
      "percentile": 0.99,
      "permutations": 1000,
      "per_fold_vocabulary": false,
      "embeddings": "pretrained embedding file",
      "embedding": {"dimension": 100, "window": 5, "negatives": 5, "epochs": 5, "min_count": 2},
      "hyperparams": {"ME": {"l2": 1.0}},
      "graph": "follow",
      "format": "dot",
      "synth": {"n_users": 1000, "pi_fraction": 0.5, "homophily": 0.83, ...},
      "preset": false
    }
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

from . import classify, features, graph, ingest, labeler, synth, textfeat
from .model import StanceLabel, get_territory

CSV_SCHEMA_VERSION = 1
CSV_HEADERS = {
    "labels.csv": ("territory", "PI", "AI", "Total", "unlabeled"),
    "homophily.csv": ("territory", "Network", "Interactions"),
    "homophily_detail.csv": ("territory", "graph", "assortativity", "p_value", "n_nodes", "n_edges",
                             "n_permutations", "mww_statistic", "mww_p_value"),
    "compare.csv": ("feature_id", "feature", "prominent", "statistic", "df", "p_value", "stars",
                    "coverage"),
    "results.csv": classify.RESULTS_HEADER,
    "folds.csv": ("territory", "family", "classifier", "fold", "correct", "total"),
}
GRAPH_EXTENSIONS = {"dot": "dot", "graphml": "graphml", "csv": "csv"}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    data: Optional[str] = None
    out: Optional[str] = None
    territory: Optional[str] = None
    rules: Optional[str] = None
    seed: int = 0
    k: int = 10
    families: tuple = tuple(f.value for f in features.CLASSIFIER_FAMILIES)
    classifiers: tuple = tuple(k.short for k in classify.ALL_KINDS)
    percentile: float = features.DEFAULT_PERCENTILE
    permutations: int = 1000
    per_fold_vocabulary: bool = False
    embeddings: Optional[str] = None
    embedding: dict = field(default_factory=dict)
    hyperparams: dict = field(default_factory=dict)
    graph: str = "follow"
    format: str = "dot"
    synth: dict = field(default_factory=dict)
    preset: bool = False

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["families"] = list(self.families)
        d["classifiers"] = list(self.classifiers)
        return d


def load_config(path) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    known = set(RunConfig.__dataclass_fields__)
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    for key in ("families", "classifiers"):
        if key in raw:
            raw[key] = tuple([raw[key]] if isinstance(raw[key], str) else raw[key])
    return RunConfig(**raw)


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    overrides = {}
    for name in ("data", "out", "territory", "rules", "seed", "k", "percentile", "permutations",
                 "embeddings", "graph", "format"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if getattr(args, "family", None):
        overrides["families"] = tuple(args.family)
    if getattr(args, "classifier", None):
        overrides["classifiers"] = tuple(args.classifier)
    if getattr(args, "preset", False):
        overrides["preset"] = True
    synth_flags = {name: getattr(args, name, None)
                   for name in ("n_users", "pi_fraction", "homophily", "mean_degree", "tweets_per_user")}
    synth_flags = {k: v for k, v in synth_flags.items() if v is not None}
    if synth_flags:
        overrides["synth"] = {**cfg.synth, **synth_flags}
    return replace(cfg, **overrides)


def _require(cfg: RunConfig, *names: str) -> None:
    for name in names:
        if getattr(cfg, name) in (None, ""):
            raise ConfigError(f"--{name} is required (flag or config key {name!r})")
    for name in ("data", "rules", "embeddings"):
        value = getattr(cfg, name)
        if name in names and value and not Path(value).exists():
            raise ConfigError(f"{name} path does not exist: {value}")


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    path.write_text(buf.getvalue(), encoding="utf-8")


def _write_run(out: Path, command: str, cfg: RunConfig) -> None:
    info = {"command": command, "csv_schema_version": CSV_SCHEMA_VERSION, "config": cfg.to_dict()}
    (out / "run.json").write_text(json.dumps(info, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _load(cfg: RunConfig):
    _require(cfg, "data")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ingest.IngestWarning)
        dataset = ingest.load_directory(cfg.data)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    if cfg.territory and get_territory(cfg.territory) != dataset.territory:
        raise ConfigError(f"dataset territory {dataset.territory.name!r} does not match "
                          f"--territory {cfg.territory!r}")
    return dataset


def _fmt(x: float) -> str:
    return repr(float(x))


# -- commands ------------------------------------------------------------------------

def cmd_label(cfg: RunConfig) -> int:
    _require(cfg, "out")
    if cfg.rules:
        _require(cfg, "rules")
    dataset = _load(cfg)
    rules = (labeler.load_rules(cfg.rules, dataset.territory) if cfg.rules
             else labeler.builtin_rules(dataset.territory))
    labeled, report = labeler.label_dataset(dataset, rules)
    out = _out_dir(cfg)
    ingest.save_dataset(labeled, out / "dataset")
    labeler.export_for_review(labeled, out / "review.csv")
    _write_csv(out / "labels.csv", CSV_HEADERS["labels.csv"],
               [(report.territory, report.pi, report.ai, report.total, report.unlabeled)])
    _write_run(out, "label", cfg)
    print(f"{report.territory}")
    for name, count in report.rows():
        print(f"  {name:<18} {count:>7}")
    print(f"  {'Unlabeled':<18} {report.unlabeled:>7}")
    return 0


def cmd_homophily(cfg: RunConfig) -> int:
    _require(cfg, "out")
    dataset = _load(cfg)
    out = _out_dir(cfg)
    reports = {}
    for name, builder in (("Network", graph.build_follow_graph), ("Interactions", graph.build_interaction_graph)):
        g = builder(dataset)
        reports[name] = graph.homophily_significance(g, cfg.permutations, cfg.seed)
    terr = dataset.territory.name
    _write_csv(out / "homophily.csv", CSV_HEADERS["homophily.csv"],
               [(terr, _fmt(reports["Network"].assortativity_r), _fmt(reports["Interactions"].assortativity_r))])
    _write_csv(out / "homophily_detail.csv", CSV_HEADERS["homophily_detail.csv"],
               [(terr, name, _fmt(r.assortativity_r), _fmt(r.p_value), r.n_nodes, r.n_edges,
                 r.n_permutations, _fmt(r.mww_statistic), _fmt(r.mww_p_value)) for name, r in reports.items()])
    _write_run(out, "homophily", cfg)
    print(f"{terr}: assortativity (permutation p)")
    for name, r in reports.items():
        print(f"  {name:<13} r = {r.assortativity_r:.3f}  (p = {r.p_value:.4f}, {r.n_nodes} nodes, {r.n_edges} edges)")
    return 0


def cmd_compare(cfg: RunConfig) -> int:
    _require(cfg, "out")
    dataset = _load(cfg)
    labels = dataset.labeled()
    counts = {lab: sum(1 for v in labels.values() if v is lab) for lab in StanceLabel}
    if min(counts.values()) < 2:
        raise ConfigError("group comparison needs at least two PI and two AI users")
    matrix = features.behavioral_features(dataset)
    rows = features.group_comparison_report(matrix)
    coverage = matrix.meta["coverage"]
    out = _out_dir(cfg)
    _write_csv(out / "compare.csv", CSV_HEADERS["compare.csv"], [
        (r.feature_id, r.name, r.prominent.value if r.prominent else "",
         _fmt(r.result.statistic), "" if r.result.df is None else _fmt(r.result.df),
         _fmt(r.result.p_value), r.stars, coverage[r.feature_id])
        for r in rows
    ])
    _write_run(out, "compare", cfg)
    print(f"{dataset.territory.name}: {len(rows)} features, PI vs AI (Welch t)")
    for r in rows:
        side = r.prominent.value if r.prominent else "--"
        print(f"  {r.feature_id:>2} {r.name:<24} {side:<3} {r.stars:<2} p = {r.result.p_value:.3g}")
    return 0


def _embedding_table(cfg: RunConfig, dataset) -> textfeat.EmbeddingTable:
    if cfg.embeddings:
        return textfeat.load_embeddings(cfg.embeddings)
    allowed = {"dimension", "window", "negatives", "epochs", "min_count", "learning_rate", "batch_size"}
    unknown = set(cfg.embedding) - allowed
    if unknown:
        raise ConfigError(f"unknown embedding settings {sorted(unknown)}")
    corpus = [textfeat.tokenize(t.text) for uid in sorted(dataset.users)
              for t in dataset.users[uid].timeline + dataset.users[uid].favourites]
    corpus = [c for c in corpus if c]
    if not corpus:
        raise ConfigError("no tweets to train embeddings on")
    return textfeat.train_skipgram(corpus, seed=cfg.seed, **cfg.embedding)


def _family_matrix(cfg: RunConfig, dataset, family: features.Family, table_cache: dict):
    if family in (features.Family.TIMELINE, features.Family.FAVOURITES):
        if "table" not in table_cache:
            table_cache["table"] = _embedding_table(cfg, dataset)
        fn = features.timeline_features if family is features.Family.TIMELINE else features.favourite_features
        return fn(dataset, table_cache["table"]), None
    if family is features.Family.INTERACTIONS:
        def refit(train_ids):
            vocab = features.interaction_vocabulary(dataset, cfg.percentile, users=train_ids)
            return features.interaction_features(dataset, cfg.percentile, vocabulary=vocab)
        return features.interaction_features(dataset, cfg.percentile), refit
    if family is features.Family.NETWORK:
        def refit(train_ids):
            vocab = features.network_vocabulary(dataset, cfg.percentile, users=train_ids)
            return features.network_features(dataset, cfg.percentile, vocabulary=vocab)
        return features.network_features(dataset, cfg.percentile), refit
    return features.behavioral_features(dataset), None


def _families(cfg: RunConfig, allowed) -> list:
    try:
        fams = [features.Family.parse(f) for f in cfg.families]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    bad = [f.value for f in fams if f not in allowed]
    if bad:
        raise ConfigError(f"families not valid here: {bad}")
    return fams


def cmd_featurize(cfg: RunConfig) -> int:
    _require(cfg, "out")
    dataset = _load(cfg)
    fams = _families(cfg, tuple(features.Family))
    out = _out_dir(cfg)
    cache: dict = {}
    for fam in fams:
        matrix, _ = _family_matrix(cfg, dataset, fam, cache)
        features.save_matrix(matrix, out / f"{fam.value.lower()}.csv")
        print(f"  {fam.value:<13} {matrix.shape[0]} rows x {matrix.shape[1]} columns")
    if "table" in cache and not cfg.embeddings:
        textfeat.save_embeddings(cache["table"], out / "embeddings.txt")
    _write_run(out, "featurize", cfg)
    return 0


def cmd_classify(cfg: RunConfig) -> int:
    _require(cfg, "out")
    dataset = _load(cfg)
    fams = _families(cfg, features.CLASSIFIER_FAMILIES)
    try:
        kinds = [classify.ModelKind.parse(c) for c in cfg.classifiers]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    hp = {}
    for key, value in cfg.hyperparams.items():
        try:
            hp[classify.ModelKind.parse(key)] = value
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    cache: dict = {}
    reports = []
    for fam in fams:
        matrix, refit = _family_matrix(cfg, dataset, fam, cache)
        for kind in kinds:
            reports.append(classify.cross_validate(
                matrix, kind, k=cfg.k, seed=cfg.seed, hyperparams=hp.get(kind),
                territory=dataset.territory.name, refit=refit if cfg.per_fold_vocabulary else None))
    out = _out_dir(cfg)
    (out / "results.csv").write_text(classify.results_table(reports), encoding="utf-8")
    (out / "folds.csv").write_text(classify.folds_table(reports), encoding="utf-8")
    _write_run(out, "classify", cfg)
    print(f"{dataset.territory.name}: {cfg.k}-fold micro-averaged accuracy")
    print("  " + "".join(f"{h:>8}" for h in ("family",) + tuple(k.short for k in kinds)))
    for fam in fams:
        cells = {r.kind: r.micro_accuracy for r in reports if r.family == fam.value}
        print("  " + f"{fam.value[:8]:>8}" + "".join(f"{cells[k]:>8.3f}" for k in kinds))
    return 0


def cmd_synth(cfg: RunConfig) -> int:
    _require(cfg, "out")
    settings = dict(cfg.synth)
    settings.setdefault("seed", cfg.seed)
    if cfg.territory:
        settings.setdefault("territory", get_territory(cfg.territory).name)
    try:
        if cfg.preset:
            territory = settings.pop("territory", None) or "Catalonia"
            n_users = settings.pop("n_users", 2000)
            seed = settings.pop("seed")
            config = synth.preset_config(territory, n_users=n_users, seed=seed, **settings)
        else:
            config = synth.SynthConfig.from_dict(settings)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    out = _out_dir(cfg)
    synth.write_synthetic(config, out)
    n_pi = round(config.n_users * config.pi_fraction)
    print(f"{config.territory}: {config.n_users} users ({n_pi} PI, {config.n_users - n_pi} AI), "
          f"h = {config.homophily:.4f}, expected r = "
          f"{synth.expected_assortativity(config.homophily, config.pi_fraction, config.pi_activity):.3f}")
    return 0


def cmd_export_graph(cfg: RunConfig) -> int:
    _require(cfg, "out")
    dataset = _load(cfg)
    builders = {"follow": graph.build_follow_graph, "interaction": graph.build_interaction_graph}
    if cfg.graph not in builders:
        raise ConfigError(f"--graph must be one of {sorted(builders)}")
    if cfg.format not in GRAPH_EXTENSIONS:
        raise ConfigError(f"--format must be one of {sorted(GRAPH_EXTENSIONS)}")
    g = builders[cfg.graph](dataset)
    out = _out_dir(cfg)
    path = out / f"{cfg.graph}.{GRAPH_EXTENSIONS[cfg.format]}"
    size = graph.export_graph(g, cfg.format, path)
    print(f"wrote {path} ({g.n_nodes} nodes, {g.n_edges} edges, {size} bytes)")
    return 0


COMMANDS = {
    "label": cmd_label,
    "homophily": cmd_homophily,
    "compare": cmd_compare,
    "featurize": cmd_featurize,
    "classify": cmd_classify,
    "synth": cmd_synth,
    "export-graph": cmd_export_graph,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="natid", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--territory")
        return p

    def data(p):
        p.add_argument("--data", help="dataset directory containing manifest.json")

    p = add("label", "label users from location rules")
    data(p)
    p.add_argument("--rules", help="rule file (default: built-in rules for the territory)")
    p = add("homophily", "assortativity of follow and interaction graphs")
    data(p)
    p.add_argument("--permutations", type=int)
    p = add("compare", "PI vs AI comparison of the behavioural features")
    data(p)
    p = add("featurize", "write feature matrices")
    data(p)
    p.add_argument("--family", action="append", help="feature family (repeatable)")
    p.add_argument("--percentile", type=float)
    p.add_argument("--embeddings", help="pretrained embeddings file")
    p = add("classify", "cross-validated stance classification")
    data(p)
    p.add_argument("--family", action="append", help="feature family (repeatable)")
    p.add_argument("--classifier", action="append", help="NB, SV, RF or ME (repeatable)")
    p.add_argument("--k", type=int)
    p.add_argument("--percentile", type=float)
    p.add_argument("--embeddings", help="pretrained embeddings file")
    p = add("synth", "generate a synthetic dataset")
    p.add_argument("--preset", action="store_true", help="calibrate to the territory's reference homophily")
    p.add_argument("--n-users", type=int)
    p.add_argument("--pi-fraction", type=float)
    p.add_argument("--homophily", type=float)
    p.add_argument("--mean-degree", type=float)
    p.add_argument("--tweets-per-user", type=int)
    p = add("export-graph", "write the follow or interaction graph")
    data(p)
    p.add_argument("--graph", choices=("follow", "interaction"))
    p.add_argument("--format", choices=tuple(GRAPH_EXTENSIONS))
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except (ValueError, KeyError, FileNotFoundError, NotADirectoryError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - report, never traceback
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
