"""``floodprone`` command line: one subcommand per pipeline stage.

Every artifact records the tool version, the seed and SHA-256 hashes of its
inputs: CSV files in a leading ``# floodprone-meta`` comment line, JSON and
GeoJSON documents under a top-level ``meta`` key, model files in their
``meta`` field.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import warnings
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__, attribution, forest as fm, ingest, metrics, riskcluster, synth, tables
from .model import DataError, FEATURES, LabeledDataset
from .scenario import PerturbationSpec, grid_predict, scenario_report

log = logging.getLogger("floodprone")

META_PREFIX = "# floodprone-meta "
THREADS_ENV = "FLOODPRONE_THREADS"


class _Run:
    """Per-invocation bookkeeping: input hashes and artifact metadata."""

    def __init__(self, command: str, seed):
        self.command = command
        self.seed = seed
        self.inputs: dict[str, str] = {}

    def read(self, role: str, path) -> str:
        p = Path(path)
        try:
            data = p.read_bytes()
        except OSError as exc:
            raise DataError(f"cannot read {role} file ({exc.strerror})", str(path)) from None
        self.inputs[role] = hashlib.sha256(data).hexdigest()
        try:
            return data.decode("utf-8")
        except UnicodeDecodeError:
            raise DataError(f"{role} file is not UTF-8", str(path)) from None

    def meta(self, **extra) -> dict:
        out = {
            "tool": "floodprone",
            "version": __version__,
            "model_format": fm.FORMAT_VERSION,
            "command": self.command,
            "seed": self.seed,
            "inputs": dict(sorted(self.inputs.items())),
        }
        out.update(extra)
        return out

    def write_csv(self, path, body: str, **extra):
        line = META_PREFIX + json.dumps(self.meta(**extra), sort_keys=True, separators=(",", ":"))
        _write(path, (line + "\n" + body).encode())

    def write_json(self, path, doc: dict, **extra):
        _write(path, fm.canonical_json({"meta": self.meta(**extra), **doc}))


def _write(path, data: bytes):
    p = Path(path)
    if p.parent and not p.parent.exists():
        p.parent.mkdir(parents=True, exist_ok=True)
    p.write_bytes(data)


def read_meta(path) -> dict:
    """Recover the metadata block of any artifact written by this tool."""
    text = Path(path).read_text()
    if text.startswith(META_PREFIX):
        return json.loads(text.splitlines()[0][len(META_PREFIX):])
    return json.loads(text)["meta"]


# subcommands


def cmd_synth(a, threads):
    run = _Run("synth", a.seed)
    cfg = synth.SynthConfig(n_zones=a.n_zones, seed=a.seed, planted_features=tuple(a.planted),
                            signal_strength=a.signal_strength, noise_sd=a.noise_sd)
    corpus = synth.generate(cfg)
    out = Path(a.out_dir)
    extra = {"config": asdict(cfg)}
    run.write_csv(out / "claims.csv", corpus.claims_csv, **extra)
    run.write_csv(out / "features.csv", corpus.features_csv, **extra)
    run.write_csv(out / "truth.csv", corpus.truth_csv, **extra)
    run.write_csv(out / "inflation.csv", synth.inflation_csv(), **extra)


def cmd_ingest(a, threads):
    run = _Run("ingest", None)
    claims = ingest.parse_claims(run.read("claims", a.claims))
    if a.inflation:
        table = ingest.parse_inflation(run.read("inflation", a.inflation), a.base_year)
        claims = [ingest.adjust_to_base_year(c, table) for c in claims]
    run.write_csv(a.out, ingest.format_summaries(ingest.aggregate_zones(claims)))


def _partners(items) -> dict[int, int]:
    out = {}
    for item in items or ():
        src, sep, dst = item.partition(":")
        try:
            out[int(src)] = int(dst)
        except ValueError:
            raise DataError(f"merge partner {item!r} is not LEVEL:PARTNER") from None
    return out


def cmd_label(a, threads):
    run = _Run("label", a.seed)
    summaries = ingest.parse_summaries(run.read("summaries", a.summaries))
    zones = tables.parse_features(run.read("zones", a.zones)).zone_ids if a.zones else []
    result = riskcluster.label_zones(summaries, zones, k=a.k, target_levels=a.target_levels,
                                     seed=a.seed, restarts=a.restarts,
                                     partners=_partners(a.merge_partner), threads=threads)
    run.write_csv(a.out, tables.format_labels(result.labels), level_count=result.level_count)
    if a.report:
        run.write_json(a.report, result.report)
    if a.elbow:
        points = [(s.zone_id, (s.mean_damage_ratio, float(s.claim_count))) for s in summaries]
        distinct = len({p[1] for p in points})
        curve = riskcluster.elbow_curve(points, range(1, min(a.k_max, distinct) + 1),
                                        seed=a.seed, restarts=a.restarts, threads=threads)
        run.write_csv(a.elbow, "k,wcss\n" + "".join(f"{k},{w!r}\n" for k, w in curve))


def _dataset(run, features_path, labels_path, role="", levels=None) -> LabeledDataset:
    feats = tables.parse_features(run.read(f"{role}features", features_path), f"{role}features")
    labels = tables.parse_labels(run.read(f"{role}labels", labels_path), f"{role}labels")
    missing = [z for z in labels if z not in feats.rows]
    if missing:
        raise DataError(f"labelled zone {missing[0]!r} has no feature row", str(labels_path))
    L = levels if levels else (max(labels.values()) + 1 if labels else 1)
    return LabeledDataset(feats, labels, L, role.rstrip("."))


def _params(a) -> fm.ForestParams:
    return fm.ForestParams(n_trees=a.n_trees, max_depth=a.max_depth,
                           min_samples_leaf=a.min_samples_leaf,
                           features_per_split=a.features_per_split, seed=a.seed)


def _grid(items) -> dict[str, list[int]]:
    grid = {}
    for item in items or ():
        key, sep, values = item.partition("=")
        if key not in ("n_trees", "max_depth", "min_samples_leaf", "features_per_split") or not sep:
            raise DataError(f"grid entry {item!r} must be PARAM=v1,v2,...")
        try:
            grid[key] = [int(v) for v in values.split(",")]
        except ValueError:
            raise DataError(f"grid entry {item!r} has non-integer values") from None
    return grid


def cmd_train(a, threads):
    run = _Run("train", a.seed)
    ds = _dataset(run, a.features, a.labels, levels=a.levels)
    split_seed = a.seed if a.split_seed is None else a.split_seed
    ids, X, y = ds.arrays()
    if a.full:
        train_idx = np.arange(len(y))
    else:
        train_idx, _ = metrics.stratified_split(y, split_seed)
    params = _params(a)
    extra = {"balance_mode": a.balance_mode, "split_seed": split_seed,
             "trained_on": "all" if a.full else "train_split"}
    grid = _grid(a.grid)
    if grid:
        cv = metrics.cross_validate(X[train_idx], y[train_idx], metrics.expand_grid(params, grid),
                                    ds.level_count, folds=a.cv_folds, balance_mode=a.balance_mode,
                                    seed=split_seed, threads=threads)
        params = cv.best
        extra["cv"] = [{"params": asdict(p), "mean_macro_auc": s} for p, s in cv.scores]
    forest = metrics.fit(X[train_idx], y[train_idx], params, a.balance_mode, ds.level_count, threads)
    forest = replace(forest, meta=run.meta(**extra))
    _write(a.out, fm.serialize(forest))
    if a.compare_out:
        reports = metrics.compare_balance_modes(ds, params, split_seed, threads)
        run.write_json(a.compare_out, {m: r.as_dict() for m, r in reports.items()},
                       split_seed=split_seed, params=asdict(params))


def _load_model(run, path) -> fm.Forest:
    run.read("model", path)
    return fm.deserialize(Path(path).read_bytes())


def _select(ds: LabeledDataset, model: fm.Forest, split: str):
    ids, X, y = ds.arrays()
    if split == "all":
        return ids, X, y
    seed = model.meta.get("split_seed", model.params.seed)
    _, te = metrics.stratified_split(y, seed)
    return [ids[i] for i in te], X[te], y[te]


def cmd_evaluate(a, threads):
    run = _Run("evaluate", None)
    model = _load_model(run, a.model)
    ds = _dataset(run, a.features, a.labels, levels=model.level_count)
    run.seed = model.meta.get("seed", model.params.seed)
    ids, X, y = _select(ds, model, a.split)
    proba = fm.predict_proba(model, X)
    report = metrics.auc_ovr(proba, y, model.level_count)
    run.write_json(a.out, report.as_dict(), split=a.split)
    if a.roc_out:
        lines = ["class,fpr,tpr"]
        for c in range(model.level_count):
            if report.per_class_auc.get(c) is None:
                continue
            lines += [f"{c},{f!r},{t!r}" for f, t in metrics.roc_curve(proba[:, c], y == c)]
        run.write_csv(a.roc_out, "\n".join(lines) + "\n", split=a.split)


def cmd_transfer(a, threads):
    run = _Run("transfer", a.seed)
    datasets = {}
    for item in a.dataset:
        name, sep, paths = item.partition("=")
        feats, sep2, labels = paths.partition(":")
        if not (sep and sep2 and name):
            raise DataError(f"dataset {item!r} must be NAME=FEATURES.csv:LABELS.csv")
        datasets[name] = _dataset(run, feats, labels, role=f"{name}.", levels=a.levels)
    split_seed = a.seed if a.split_seed is None else a.split_seed
    tm = metrics.transfer_matrix(datasets, _params(a), a.balance_mode, split_seed, threads)
    run.write_csv(a.out, tm.to_csv(), balance_mode=a.balance_mode, split_seed=split_seed)


def cmd_explain(a, threads):
    run = _Run("explain", None)
    model = _load_model(run, a.model)
    run.seed = model.meta.get("seed", model.params.seed)
    if a.labels:
        ds = _dataset(run, a.features, a.labels, levels=model.level_count)
        ids, X, _ = _select(ds, model, a.split)
    else:
        if a.split == "test":
            raise DataError("--split test needs --labels to rebuild the test split")
        feats = tables.parse_features(run.read("features", a.features))
        ids, X = feats.zone_ids, feats.matrix()
    if not ids:
        raise DataError("no instances to explain")
    expl = attribution.tree_shap(model, X, ids, threads=threads)
    lines = [",".join(["instance_id", "class", *FEATURES, "base_value"])]
    for e in expl:
        for c in range(model.level_count):
            lines.append(",".join([e.instance_id, str(c), *(repr(float(v)) for v in e.phi[c]),
                                   repr(float(e.base_value[c]))]))
    run.write_csv(a.out, "\n".join(lines) + "\n", split=a.split)
    if a.summary:
        summary = attribution.shap_summary(expl, model.feature_names)
        run.write_json(a.summary, summary.as_dict(), split=a.split, n_instances=len(expl))


def cmd_scenario(a, threads):
    run = _Run("scenario", None)
    model = _load_model(run, a.model)
    run.seed = model.meta.get("seed", model.params.seed)
    feats = tables.parse_features(run.read("features", a.features))
    items = list(a.perturb or [])
    if a.spec:
        doc = json.loads(run.read("spec", a.spec))
        items += [f"{k}={v}" for k, v in doc.items()]
    if not items:
        raise DataError("no perturbation given (use --perturb NAME=FRACTION)")
    spec = PerturbationSpec.parse(items)
    report = scenario_report(model, feats, spec)
    extra = {"perturbation": [list(c) for c in spec.changes]}
    run.write_csv(a.out, report.to_csv(), **extra)
    if a.summary:
        run.write_json(a.summary, report.summary(), **extra)


def cmd_grid(a, threads):
    run = _Run("grid", None)
    model = _load_model(run, a.model)
    run.seed = model.meta.get("seed", model.params.seed)
    table, geometry = tables.parse_grid(run.read("grid", a.grid))
    levels, collection = grid_predict(model, table, geometry)
    _write(a.out, fm.canonical_json({**collection, "meta": run.meta()}))
    if a.levels_out:
        run.write_csv(a.levels_out, "cell_id,risk_level\n" + "".join(f"{c},{v}\n" for c, v in levels.items()))


# argument parsing


def _forest_args(p):
    d = fm.ForestParams()
    p.add_argument("--n-trees", type=int, default=d.n_trees)
    p.add_argument("--max-depth", type=int, default=d.max_depth)
    p.add_argument("--min-samples-leaf", type=int, default=d.min_samples_leaf)
    p.add_argument("--features-per-split", type=int, default=d.features_per_split)
    p.add_argument("--balance-mode", choices=metrics.BALANCE_MODES, default="class_weight")
    p.add_argument("--split-seed", type=int, default=None, help="defaults to --seed")
    p.add_argument("--levels", type=int, default=None, help="level count (default: max label + 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="floodprone", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version",
                        version=f"floodprone {__version__} (model format {fm.FORMAT_VERSION})")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of option defaults; flags override it")
    common.add_argument("--threads", type=int, default=None,
                        help=f"worker cap (default ${THREADS_ENV} or 1); never changes results")
    common.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, func, help):
        p = sub.add_parser(name, parents=[common], help=help, description=help)
        p.set_defaults(func=func)
        return p

    p = add("synth", cmd_synth, "write a seeded synthetic corpus")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--n-zones", type=int, default=synth.SynthConfig.n_zones)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--signal-strength", type=float, default=synth.SynthConfig.signal_strength)
    p.add_argument("--noise-sd", type=float, default=synth.SynthConfig.noise_sd)
    p.add_argument("--planted", nargs="+", default=list(synth.SynthConfig.planted_features),
                   choices=FEATURES, metavar="FEATURE")

    p = add("ingest", cmd_ingest, "claims CSV -> per-zone damage summaries")
    p.add_argument("--claims", required=True)
    p.add_argument("--inflation", help="year,multiplier CSV; omitted means no adjustment")
    p.add_argument("--base-year", type=int)
    p.add_argument("--out", required=True)

    p = add("label", cmd_label, "zone summaries -> ordinal risk levels and labelling report")
    p.add_argument("--summaries", required=True)
    p.add_argument("--zones", help="features CSV listing every zone; zones without claims get level 0")
    p.add_argument("--k", type=int, default=4, help="k-means cluster count")
    p.add_argument("--target-levels", type=int, default=4)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--merge-partner", action="append", metavar="LEVEL:PARTNER",
                   help="force the partner a minority level merges into")
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.add_argument("--elbow", help="write k,wcss for k = 1..--k-max")
    p.add_argument("--k-max", type=int, default=10)

    p = add("train", cmd_train, "features + labels -> model file (70/30 protocol)")
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--seed", type=int, default=0)
    _forest_args(p)
    p.add_argument("--grid", action="append", metavar="PARAM=v1,v2",
                   help="grid-search values, tuned by k-fold CV on the training split")
    p.add_argument("--cv-folds", type=int, default=5)
    p.add_argument("--full", action="store_true", help="train on every labelled zone")
    p.add_argument("--compare-out", help="JSON with test AUC under both balance modes")
    p.add_argument("--out", required=True)

    p = add("evaluate", cmd_evaluate, "model + labelled data -> AUC report")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--split", choices=("test", "all"), default="test")
    p.add_argument("--out", required=True)
    p.add_argument("--roc-out")

    p = add("transfer", cmd_transfer, "several datasets -> cross-dataset AUC matrix")
    p.add_argument("--dataset", action="append", required=True, metavar="NAME=FEATURES:LABELS")
    p.add_argument("--seed", type=int, default=0)
    _forest_args(p)
    p.add_argument("--out", required=True)

    p = add("explain", cmd_explain, "model + features -> SHAP values and summary")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--labels")
    p.add_argument("--split", choices=("test", "all"), default=None,
                   help="default: test when --labels is given, else all")
    p.add_argument("--out", required=True)
    p.add_argument("--summary")

    p = add("scenario", cmd_scenario, "model + features + perturbation -> level changes")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--perturb", action="append", metavar="FEATURE=FRACTION")
    p.add_argument("--spec", help='JSON object {"feature": fraction}')
    p.add_argument("--out", required=True)
    p.add_argument("--summary")

    p = add("grid", cmd_grid, "model + grid CSV -> GeoJSON of cell risk levels")
    p.add_argument("--model", required=True)
    p.add_argument("--grid", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--levels-out")
    return parser


def _parse(parser, argv):
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, ValueError) as exc:
            raise DataError(f"cannot load config ({exc})", args.config) from None
        cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {act.dest for act in sub._actions}
        unknown = sorted(set(cfg) - known)
        if unknown:
            raise DataError(f"unknown config key {unknown[0]!r}", args.config)
        sub.set_defaults(**cfg)
        args = parser.parse_args(argv)
    if args.command == "explain" and args.split is None:
        args.split = "test" if args.labels else "all"
    return args


def _fail(kind: str, message: str, location=None) -> None:
    doc = {"error": kind, "message": message}
    if location:
        doc["location"] = location
    print(json.dumps(doc, sort_keys=True), file=sys.stderr)


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = _parse(parser, argv)
    except DataError as exc:
        _fail("data", exc.message, exc.location)
        return 1
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    threads = args.threads or int(os.environ.get(THREADS_ENV, "1") or 1)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default" if args.verbose else "ignore")
            args.func(args, max(1, threads))
    except DataError as exc:
        _fail("data", exc.message, exc.location)
        return 1
    except OSError as exc:
        _fail("io", exc.strerror or str(exc), exc.filename)
        return 1
    return 0


def main():
    sys.exit(run())
