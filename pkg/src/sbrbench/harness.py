"""Config-driven experiment orchestration.

An experiment config (JSON) names a dataset, a list of split specs, and a
list of algorithms (pinned params or a tuning request).  ``run_experiment``
executes the full (split x algorithm) grid, appending one JSON record per
result line so long runs survive interruption, and writes an index tying
everything together.  Reruns skip grid cells whose outputs already exist
and match their manifests.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dataset as ds_mod
from .baselines import AssociationRules, SequentialRules, SPop, VsKnn
from .bridge import BridgeConfig, bridge_fit
from .embeddings import Item2Vec, SessionMF
from .eval import evaluate, measure_resources
from .splits import SplitSpec, generate_split, temporal_holdout
from .tuning import make_validation_split, random_search, space_for

DEFAULT_CUTOFFS = (1, 3, 5, 10, 20)

ALGORITHMS = {
    "spop": SPop,
    "ar": AssociationRules,
    "sr": SequentialRules,
    "vsknn": VsKnn,
    "item2vec": Item2Vec,
    "smf": SessionMF,
}


class ConfigError(Exception):
    pass


@dataclass
class ExperimentConfig:
    dataset: dict
    splits: list
    algorithms: list
    cutoffs: tuple = DEFAULT_CUTOFFS
    holdout_days: int = 1
    seed: int = 0
    output_dir: str = "results"

    @classmethod
    def from_file(cls, path):
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw):
        if "dataset" not in raw or "algorithms" not in raw:
            raise ConfigError("config needs 'dataset' and 'algorithms'")
        cutoffs = tuple(raw.get("cutoffs", DEFAULT_CUTOFFS))
        if list(cutoffs) != sorted(cutoffs):
            raise ConfigError("cutoffs must be sorted ascending")
        for alg in raw["algorithms"]:
            name = alg.get("name")
            if name not in ALGORITHMS and "bridge" not in alg:
                raise ConfigError(f"unknown algorithm {name!r}")
        cfg = cls(
            dataset=raw["dataset"],
            splits=raw.get("splits", [{"name": "base"}]),
            algorithms=raw["algorithms"],
            cutoffs=cutoffs,
            holdout_days=raw.get("holdout_days", 1),
            seed=raw.get("seed", 0),
            output_dir=raw.get("output_dir", "results"),
        )
        cfg.output_dir = os.environ.get("SBRBENCH_OUTPUT_DIR", cfg.output_dir)
        return cfg


def load_base_data(config):
    """Ingest, sessionize, preprocess, and hold out the temporal test set."""
    spec = config.dataset
    if "cache" in spec:
        full = ds_mod.load_dataset(spec["cache"])
    else:
        schema = ds_mod.ColumnSchema(**spec.get("schema", {}))
        events, _ = ds_mod.ingest_events(spec["path"], schema)
        full = ds_mod.sessionize(events, spec.get("sessionize", "by-key"))
    full = ds_mod.preprocess(full)
    train, test = temporal_holdout(full, config.holdout_days)
    test = ds_mod.filter_test_items(train, test)
    return train, test


def _resolve_split(name, entry, train, test):
    """Return (train, test, manifest) for one config split entry."""
    if entry.get("kind") is None:
        return train, test, {"spec": {"kind": "base"}, "derived_hash": ds_mod.content_hash(train)}
    spec = SplitSpec(**{k: v for k, v in entry.items() if k != "name"})
    if spec.kind.startswith("test_"):
        result = generate_split(test, spec, train=train)
        return train, result.derived, result.manifest
    result = generate_split(train, spec)
    return result.derived, test, result.manifest


def _build_predictor(alg, train, dataset_path):
    name = alg.get("name", "bridge")
    if "bridge" in alg:
        bcfg = BridgeConfig(**alg["bridge"])
        return bridge_fit(
            bcfg, dataset_path, train.item_ids, train_freq=train.freq, name=name
        )
    params = dict(alg.get("params", {}))
    model = ALGORITHMS[name](**params)
    model.fit(train)
    return model


def run_experiment(config, log=print):
    """Execute the grid; returns (results dir, number of failed cells)."""
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifests").mkdir(exist_ok=True)

    train, test = load_base_data(config)
    train_cache = out / "train.sbr"
    ds_mod.save_dataset(train, train_cache)

    done = _load_index(out / "index.jsonl")
    workers = int(os.environ.get("SBRBENCH_WORKERS", "1"))
    cells = []
    for split_entry in config.splits:
        for alg in config.algorithms:
            cells.append((split_entry, alg))

    failures = 0
    results = []

    def run_cell(split_entry, alg):
        split_name = split_entry.get("name", split_entry.get("kind", "base"))
        alg_name = alg.get("name", "bridge")
        cell_id = f"{split_name}/{alg_name}"
        manifest = None
        try:
            cell_train, cell_test, manifest = _resolve_split(
                split_name, split_entry, train, test
            )
            key = (cell_id, manifest["derived_hash"])
            if key in done:
                log(f"[skip] {cell_id} (already complete)")
                return cell_id, manifest, None, None, None, True
            manifest_path = out / "manifests" / f"{split_name}.json"
            manifest_path.write_text(json.dumps(manifest, sort_keys=True))

            alg_cfg = dict(alg)
            if alg_cfg.get("tune"):
                fit_part, val_part = make_validation_split(cell_train)
                space = space_for(alg_name)
                factory = lambda cfg: ALGORITHMS[alg_name](**cfg)
                best, trials = random_search(
                    factory,
                    space,
                    fit_part,
                    val_part,
                    n_trials=alg_cfg.get("trials", 20),
                    seed=config.seed,
                )
                alg_cfg["params"] = best
                _append(out / "trials.jsonl", (t.to_json() for t in trials))

            latencies = []
            holder = {}

            def fit_task():
                holder["model"] = _build_predictor(alg_cfg, cell_train, train_cache)

            fit_res = measure_resources(fit_task)
            model = holder["model"]
            report = evaluate(
                model,
                cell_test,
                train_freq=cell_train.freq,
                cutoffs=config.cutoffs,
                latencies=latencies,
            )
            report.split_manifest = manifest["derived_hash"]
            eval_res = measure_resources(lambda: None, latencies=latencies)
            eval_res.wall_seconds = float(sum(latencies))
            if hasattr(model, "close"):
                model.close()
            return cell_id, manifest, report, fit_res, eval_res, False
        except Exception as exc:
            log(f"[fail] {cell_id}: {exc}")
            return cell_id, manifest, exc, None, None, False

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda c: run_cell(*c), cells))
    else:
        results = [run_cell(*c) for c in cells]

    for cell_id, manifest, report, fit_res, eval_res, skipped in results:
        if skipped:
            continue
        if isinstance(report, Exception) or report is None:
            failures += 1
            _append(
                out / "errors.jsonl",
                [json.dumps({"cell": cell_id, "error": str(report)})],
            )
            continue
        record = json.loads(report.to_json())
        record["cell"] = cell_id
        _append(out / "metrics.jsonl", [json.dumps(record, sort_keys=True)])
        _append(
            out / "resources.jsonl",
            [
                json.dumps(
                    {
                        "cell": cell_id,
                        "fit": json.loads(fit_res.to_json()),
                        "evaluate": json.loads(eval_res.to_json()),
                    },
                    sort_keys=True,
                )
            ],
        )
        _append(
            out / "index.jsonl",
            [
                json.dumps(
                    {"cell": cell_id, "split_hash": report.split_manifest, "status": "ok"},
                    sort_keys=True,
                )
            ],
        )
        log(f"[done] {cell_id}")
    return out, failures


def _append(path, lines):
    with open(path, "a") as fh:
        for line in lines:
            fh.write(line + "\n")


def _load_index(path):
    done = set()
    if Path(path).exists():
        for line in Path(path).read_text().splitlines():
            rec = json.loads(line)
            if rec.get("status") == "ok":
                done.add((rec["cell"], rec["split_hash"]))
    return done


def summarize_ranks(result_dirs, by=("hr@5", "mrr@5")):
    """Rank models within every experiment cell group; rank 1 is best.

    Cells are grouped by split; ties receive the average of the positions
    they span.  If model sets differ across experiments, ranks use the
    intersection and a warning is included in the output.
    """
    rows = []
    for d in result_dirs:
        path = Path(d) / "metrics.jsonl"
        if not path.exists():
            continue
        for line in path.read_text().splitlines():
            rec = json.loads(line)
            split, _, model = rec["cell"].rpartition("/")
            rows.append({"dir": str(d), "split": split, "model": model, **rec})
    if not rows:
        raise ValueError("no metric records found")

    model_sets = {}
    for row in rows:
        model_sets.setdefault((row["dir"], row["split"]), set()).add(row["model"])
    common = set.intersection(*model_sets.values())
    warning = None
    union = set.union(*model_sets.values())
    if common != union:
        warning = f"model sets differ across experiments; ranking over {sorted(common)}"

    ranks = {m: {metric: [] for metric in by} for m in common}
    for group_key, models in model_sets.items():
        group = [r for r in rows if (r["dir"], r["split"]) == group_key and r["model"] in common]
        for metric in by:
            ordered = sorted(group, key=lambda r: -r[metric])
            i = 0
            while i < len(ordered):
                j = i
                while j < len(ordered) and ordered[j][metric] == ordered[i][metric]:
                    j += 1
                avg_rank = (i + 1 + j) / 2.0  # average of positions i+1 .. j
                for r in ordered[i:j]:
                    ranks[r["model"]][metric].append(avg_rank)
                i = j

    table = {
        model: {
            metric: {
                "ranks": vals[metric],
                "mean": float(np.mean(vals[metric])) if vals[metric] else None,
            }
            for metric in by
        }
        for model, vals in ranks.items()
    }
    return {"ranks": table, "warning": warning}
