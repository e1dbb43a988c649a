"""Command line entry point: ``anythreat {synth,ingest,run,report}``.

Exit codes: 0 success, 1 runtime failure, 2 invalid configuration.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import jsonschema

from .classify import ClassifierSpec
from .evaluate import DISPLAY, VARIANTS, ExperimentSpec, oversampler_of, decomposes, \
    run_experiment, wilcoxon_signed_rank
from .ingest import FeatureConfig, LogError, build_dataset, load_log_dir, read_dataset_csv, \
    write_dataset_csv
from .seeding import derive_seed
from .synth import SynthConfig, generate

log = logging.getLogger("anythreat")

RESULTS_FORMAT = 1

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["data"],
    "properties": {
        "data": {
            "type": "object",
            "oneOf": [
                {"required": ["synth"]},
                {"required": ["logs"]},
                {"required": ["dataset"]},
            ],
            "additionalProperties": False,
            "properties": {
                "synth": {"type": "object"},
                "logs": {"type": "string"},
                "schema_map": {"type": "object", "additionalProperties": {"type": "string"}},
                "dataset": {"type": "string"},
            },
        },
        "communities": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "variants": {"type": "array", "items": {"enum": list(VARIANTS)}, "minItems": 1,
                     "uniqueItems": True},
        "classifiers": {
            "type": "array", "minItems": 1,
            "items": {"type": "object", "required": ["kind"],
                      "properties": {"kind": {"enum": ["knn", "random_forest", "linear"]},
                                     "name": {"type": "string"}}},
        },
        "grid": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "perc_over": {"type": "array", "items": {"type": "integer", "minimum": 100},
                              "minItems": 1},
                "k": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
                "tau": {"type": "number", "minimum": 0, "maximum": 100},
            },
        },
        "k_smote": {"type": "integer", "minimum": 1},
        "perc_under": {"type": ["integer", "null"], "minimum": 1},
        "features": {"type": "object"},
        "slot_hours": {"type": "integer", "minimum": 1},
        "foldwise_normalization": {"type": "boolean"},
        "seed": {"type": "integer", "minimum": 0},
        "out": {"type": "string"},
    },
}

DEFAULT_CLASSIFIERS = [{"kind": "knn"}, {"kind": "random_forest"}, {"kind": "linear"}]
# default tuning grid; k applies to both decompositions
DEFAULT_GRID = {"perc_over": [200, 300, 400], "k": [2, 4, 6], "tau": 10}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    data: dict
    communities: Optional[list] = None
    variants: list = field(default_factory=lambda: list(VARIANTS))
    classifiers: list = field(default_factory=lambda: list(DEFAULT_CLASSIFIERS))
    grid: dict = field(default_factory=lambda: dict(DEFAULT_GRID))
    k_smote: int = 5
    perc_under: Optional[int] = None
    features: dict = field(default_factory=dict)
    slot_hours: int = 4
    foldwise_normalization: bool = False
    seed: int = 0
    out: str = "results"  # relative to the working directory
    base_dir: Path = Path(".")  # data paths resolve against the config file

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
        return cls.from_dict(raw, base_dir=path.parent, source=str(path))

    @classmethod
    def from_dict(cls, raw, base_dir=Path("."), source="<config>") -> "RunConfig":
        validator = jsonschema.Draft7Validator(CONFIG_SCHEMA)
        errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
        if errors:
            lines = [f"{source}: {'/'.join(map(str, e.absolute_path)) or '<root>'}: {e.message}"
                     for e in errors]
            raise ConfigError("\n".join(lines))
        cfg = cls(**{**raw, "grid": {**DEFAULT_GRID, **raw.get("grid", {})}},
                  base_dir=Path(base_dir))
        try:
            for c in cfg.classifiers:
                _classifier(c)
            names = [_classifier_name(c) for c in cfg.classifiers]
            if len(set(names)) != len(names):
                raise ValueError(f"classifier names must be unique, got {names}; set 'name'")
            FeatureConfig.from_dict(cfg.features)
            if "synth" in cfg.data:
                SynthConfig(**cfg.data["synth"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{source}: {exc}") from exc
        return cfg

    def resolve(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p


def _classifier(c: dict) -> ClassifierSpec:
    c = {k: v for k, v in c.items() if k != "name"}
    return ClassifierSpec.from_dict(c)


def _classifier_name(c: dict) -> str:
    return c.get("name", c["kind"])


# --- experiment matrix ------------------------------------------------------

def expand_matrix(cfg: RunConfig, community: str):
    """Every (variant, classifier, grid cell) for one community, in a fixed order."""
    seed = derive_seed(cfg.seed, "experiment", community)
    grid = cfg.grid
    cells = []
    for variant in cfg.variants:
        over = oversampler_of(variant)
        dm, _ = decomposes(variant)
        percs = grid["perc_over"] if over else [grid["perc_over"][0]]
        ks = grid["k"] if dm else [grid["k"][0]]
        for c in cfg.classifiers:
            for perc in percs:
                for k in ks:
                    spec = ExperimentSpec(
                        variant=variant, classifier=_classifier(c), perc_over=perc,
                        tau=grid["tau"], k_smote=cfg.k_smote, perc_under=cfg.perc_under,
                        k_majority=k, k_minority=k, seed=seed,
                        foldwise_normalization=cfg.foldwise_normalization)
                    cells.append((_classifier_name(c), spec))
    return cells


def experiment_id(community, classifier_name, spec: ExperimentSpec) -> str:
    params = ",".join(f"{k}={v}" for k, v in sorted(spec.params().items()))
    return f"{community}|{spec.variant}|{classifier_name}|{params}"


def _run_cell(args):
    community, name, spec, dataset = args
    eid = experiment_id(community, name, spec)
    record = {"id": eid, "community": community, "variant": spec.variant,
              "classifier": name, "experiment": spec.to_dict()}
    try:
        report = run_experiment(spec, dataset)
    except Exception as exc:  # recorded as an explicit null cell
        log.error("experiment %s failed: %s", eid, exc)
        record.update(status="failed", reason=f"{type(exc).__name__}: {exc}",
                      measures=None, folds=None)
        return record
    record.update(status="ok", reason=None, measures=report.measures.to_dict(),
                  folds=report.per_fold)
    return record


# --- data ----------------------------------------------------------------------

def build_datasets(cfg: RunConfig, communities=None):
    data = cfg.data
    features = FeatureConfig.from_dict(cfg.features)
    if "dataset" in data:
        d = read_dataset_csv(cfg.resolve(data["dataset"]))
        return {d.role: d}
    if "synth" in data:
        scfg = SynthConfig(**{"seed": cfg.seed, **data["synth"]})
        log_dir = Path(cfg.out) / "data"
        generate(scfg, log_dir)
    else:
        log_dir = cfg.resolve(data["logs"])
    events, roles, truth = load_log_dir(log_dir, data.get("schema_map"))
    wanted = communities or cfg.communities or sorted(set(roles.values()))
    return {c: build_dataset(events, roles, c, truth, cfg.slot_hours, features) for c in wanted}


# --- wilcoxon and tables -------------------------------------------------------

def _best_tpt(records, community, variant, classifier):
    vals = [r["measures"]["TP_T"] for r in records
            if r["status"] == "ok" and r["community"] == community
            and r["variant"] == variant and r["classifier"] == classifier]
    return max(vals) if vals else None


def default_vs_anythreat(records):
    """Pair Default with the best non-default variant on TP_T per
    (community, classifier) cell; best = highest summed TP_T overall."""
    cells = sorted({(r["community"], r["classifier"]) for r in records})
    variants = [v for v in VARIANTS if v != "default"
                and any(r["variant"] == v for r in records)]
    if not variants or not any(r["variant"] == "default" for r in records):
        return None
    totals = {}
    for v in variants:
        vals = [_best_tpt(records, c, v, k) for c, k in cells]
        totals[v] = sum(x for x in vals if x is not None)
    best = max(variants, key=lambda v: (totals[v], -variants.index(v)))
    x, y, used = [], [], []
    for c, k in cells:
        a = _best_tpt(records, c, "default", k)
        b = _best_tpt(records, c, best, k)
        if a is not None and b is not None:
            x.append(a)
            y.append(b)
            used.append([c, k])
    if not x:
        return None
    return {"metric": "TP_T", "baseline": "default", "variant": best,
            "pairs": used, "default": x, "anythreat": y,
            "n_nonzero": sum(1 for a, b in zip(x, y) if a != b),
            "p_value": wilcoxon_signed_rank(x, y)}


def _csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def render_tables(results: dict) -> dict:
    """Summary tables per community, derived only from the results document."""
    records = results["records"]
    out = {}
    for community in sorted({r["community"] for r in records}):
        recs = [r for r in records if r["community"] == community]
        variants = [v for v in VARIANTS if any(r["variant"] == v for r in recs)]
        classifiers = list(dict.fromkeys(r["classifier"] for r in recs))
        t3 = [["experiment", "TP_T", "P_T", "classifiers"]]
        t4 = [["experiment", "FP", "classifiers"]]
        t5 = [["experiment", *classifiers]]
        for v in variants:
            ok = [r for r in recs if r["variant"] == v and r["status"] == "ok"]
            if not ok:
                t3.append([DISPLAY[v], "", "", "failed"])
                t4.append([DISPLAY[v], "", "failed"])
            else:
                top = max(r["measures"]["TP_T"] for r in ok)
                hits = [r for r in ok if r["measures"]["TP_T"] == top]
                t3.append([DISPLAY[v], top, hits[0]["measures"]["P_T"],
                           ";".join(dict.fromkeys(r["classifier"] for r in hits))])
                low = min(r["measures"]["FP"] for r in ok)
                hits = [r for r in ok if r["measures"]["FP"] == low]
                t4.append([DISPLAY[v], low, ";".join(dict.fromkeys(r["classifier"] for r in hits))])
            row = [DISPLAY[v]]
            for c in classifiers:
                cell = [r for r in ok if r["classifier"] == c]
                if not cell:
                    row.append("")
                    continue
                best = max(cell, key=lambda r: r["measures"]["F1"])
                m = best["measures"]
                text = f"{m['F1']:.4f}"
                if v == "default":
                    text += f" ({m['TP_T']}/{m['P_T']})"
                row.append(text)
            t5.append(row)
        out[community] = {"table3_max_tpt.csv": _csv(t3), "table4_min_fp.csv": _csv(t4),
                          "table5_f1.csv": _csv(t5)}
    return out


def write_tables(results: dict, out_dir: Path):
    for community, files in render_tables(results).items():
        d = out_dir / community
        d.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            (d / name).write_text(text)


def dump_results(results: dict) -> str:
    return json.dumps(results, indent=1, sort_keys=True) + "\n"


# --- commands --------------------------------------------------------------------

def run(cfg: RunConfig, jobs: int = 1, communities=None) -> int:
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        datasets = build_datasets(cfg, communities)
    except (LogError, OSError, ValueError) as exc:
        log.error("data preparation failed: %s", exc)
        return 1

    tasks = []
    summary = {}
    for community, d in datasets.items():
        summary[community] = {"instances": len(d), "anomalous": sum(i.is_anomalous for i in d.instances),
                              "threats": d.n_threats, "features": list(d.schema.names)}
        for name, spec in expand_matrix(cfg, community):
            tasks.append((community, name, spec, d))
    log.info("running %d experiments with %d job(s)", len(tasks), jobs)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_cell, tasks))
    else:
        records = [_run_cell(t) for t in tasks]

    results = {"format": RESULTS_FORMAT, "seed": cfg.seed, "datasets": summary,
               "grid": cfg.grid, "records": records,
               "wilcoxon": default_vs_anythreat(records)}
    (out_dir / "results.json").write_text(dump_results(results))
    write_tables(results, out_dir)
    failed = [r["id"] for r in records if r["status"] != "ok"]
    if failed:
        for eid in failed:
            print(f"failed: {eid}", file=sys.stderr)
        return 1
    return 0


def _setup_logging():
    level = os.environ.get("ANYTHREAT_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _cmd_synth(args):
    raw = {}
    if args.config:
        raw = json.loads(Path(args.config).read_text())
        raw = raw.get("data", {}).get("synth", raw)
    if args.seed is not None:
        raw["seed"] = args.seed
    try:
        cfg = SynthConfig(**raw)
    except (TypeError, ValueError) as exc:
        print(f"invalid synth config: {exc}", file=sys.stderr)
        return 2
    try:
        truth = generate(cfg, args.out)
    except OSError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    print(f"wrote logs for {cfg.n_users} users, {len(truth.insiders)} insiders to {args.out}")
    return 0


def _cmd_ingest(args):
    try:
        events, roles, truth = load_log_dir(args.logs)
        features = FeatureConfig.from_json(args.features) if args.features else FeatureConfig()
        wanted = [args.community] if args.community else sorted(set(roles.values()))
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for c in wanted:
            d = build_dataset(events, roles, c, truth, args.slot_hours, features)
            path = out / f"dataset_{c}.csv"
            write_dataset_csv(d, path)
            n_anom = sum(i.is_anomalous for i in d.instances)
            print(f"{c}: {len(d)} instances, {n_anom} anomalous, {d.n_threats} threats -> {path}")
    except (LogError, OSError, ValueError) as exc:
        print(str(exc), file=sys.stderr)
        return 1
    return 0


def _cmd_run(args):
    try:
        cfg = RunConfig.load(args.config)
    except ConfigError as exc:
        print(f"invalid config:\n{exc}", file=sys.stderr)
        return 2
    if args.out:
        cfg.out = os.path.abspath(args.out)
    if args.seed is not None:
        cfg.seed = args.seed
    communities = [args.community] if args.community else None
    return run(cfg, jobs=args.jobs, communities=communities)


def _cmd_report(args):
    try:
        results = json.loads(Path(args.results).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        print(f"cannot read results: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out) if args.out else Path(args.results).parent
    write_tables(results, out)
    w = results.get("wilcoxon")
    if w:
        print(f"Wilcoxon Default vs {w['variant']} on TP_T: p = {w['p_value']:.6g}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="anythreat", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate synthetic CERT-style logs")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--config", help="JSON synth config (or run config with data.synth)")
    s.set_defaults(func=_cmd_synth)

    s = sub.add_parser("ingest", help="build community datasets from a log directory")
    s.add_argument("--logs", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--community")
    s.add_argument("--features", help="JSON feature settings")
    s.add_argument("--slot-hours", type=int, default=4)
    s.set_defaults(func=_cmd_ingest)

    s = sub.add_parser("run", help="run the experiment matrix")
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s.add_argument("--seed", type=int)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--community")
    s.set_defaults(func=_cmd_run)

    s = sub.add_parser("report", help="re-render tables from results.json")
    s.add_argument("--results", required=True)
    s.add_argument("--out")
    s.set_defaults(func=_cmd_report)
    return p


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
