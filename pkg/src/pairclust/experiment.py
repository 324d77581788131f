"""Multi-seed experiment sweeps: factorial runs, resumable result tables, curves.

An experiment spec names a dataset, an annotation source, a grid of
annotation counts, seeds, and the methods to compare:

* ``plain``  - pairwise logistic training with the interaction matrix pinned
  to identity and no volume regularizer.
* ``volreg`` - learnable interaction matrix plus volume regularizer, with the
  regularization weight picked on held-out pairwise loss from a grid.

Completed cells are recorded in ``results.csv`` which doubles as the resume
manifest: rerunning skips any (M, seed, method) already present. Failed cells
are recorded with an error note, never dropped.
"""

import csv
import hashlib
import json
import os
import time
from dataclasses import dataclass, field, replace

import numpy as np
import yaml

from . import __version__
from .datagen import (
    GroundTruth,
    annotation_error_rate,
    default_confusion_k3,
    load_annotations_csv,
    load_confusion_csv,
    load_features_csv,
    load_membership_csv,
    machine_annotate,
    sample_annotations,
    synth_generate,
)
from .evaluate import EvalReport, evaluate_model
from .exceptions import ConfigError, DataError, PairclustError
from .training import TrainConfig, select_lambda, split_validation, train

METHOD_PLAIN = "plain"
METHOD_VOLREG = "volreg"

DEFAULT_LAMBDA_GRID = (0.0, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1)

RESULT_FIELDS = (
    "m_pairs",
    "seed",
    "method",
    "lambda",
    "noise_level",
    *EvalReport.CSV_FIELDS,
    "seconds",
    "error",
)


@dataclass
class ExperimentSpec:
    """Validated, fully resolved description of one experiment sweep."""

    name: str
    output_dir: str
    dataset: dict
    annotations: dict
    m_grid: list
    seeds: list
    methods: list
    train: TrainConfig
    validation_fraction: float = 0.1
    raw: dict = field(default_factory=dict)


def _require(mapping, key, where):
    if key not in mapping:
        raise ConfigError(f"missing '{key}' in {where}")
    return mapping[key]


def load_spec(path):
    """Parse and validate an experiment spec YAML file."""
    with open(path) as f:
        doc = yaml.safe_load(f)
    if not isinstance(doc, dict):
        raise ConfigError(f"experiment spec {path} must be a mapping")
    name = str(doc.get("name", "experiment"))
    output_dir = str(_require(doc, "output_dir", "spec"))
    dataset = _require(doc, "dataset", "spec")
    annotations = _require(doc, "annotations", "spec")
    m_grid = [int(m) for m in _require(doc, "m_grid", "spec")]
    seeds = [int(s) for s in _require(doc, "seeds", "spec")]
    methods = [str(m) for m in doc.get("methods", [METHOD_PLAIN])]
    if not m_grid or not seeds:
        raise ConfigError("m_grid and seeds must be non-empty")
    for m in methods:
        if m not in (METHOD_PLAIN, METHOD_VOLREG):
            raise ConfigError(f"unknown method '{m}'")
    mode = annotations.get("mode", "clean")
    if mode not in ("clean", "confusion", "machine", "file"):
        raise ConfigError(f"unknown annotation mode '{mode}'")
    for key in ("confusion", "labels", "file"):
        p = annotations.get(key)
        if p and p != "default-k3" and not os.path.exists(p):
            raise ConfigError(f"annotations.{key} file not found: {p}")
    if "files" in dataset:
        for key in ("membership", "features"):
            p = _require(dataset["files"], key, "dataset.files")
            if not os.path.exists(p):
                raise ConfigError(f"dataset.files.{key} not found: {p}")
    elif "synthetic" not in dataset:
        raise ConfigError("dataset needs either 'synthetic' or 'files'")

    tr = doc.get("train", {}) or {}
    cfg = TrainConfig(
        n_clusters=int(tr.get("n_clusters", dataset.get("synthetic", {}).get("k", 3))),
        hidden_dims=tuple(tr.get("hidden_dims", (64, 64))),
        lr_theta=float(tr.get("lr_theta", 0.5)),
        lr_bprime=float(tr.get("lr_bprime", 0.1)),
        batch_pairs=int(tr.get("batch_pairs", 128)),
        epochs=int(tr.get("epochs", 200)),
        clamp=float(tr.get("clamp", 1e-6)),
        ridge=float(tr.get("ridge", 1e-8)),
        vol_on_full_matrix=bool(tr.get("vol_on_full_matrix", False)),
        lambda_grid=tuple(float(v) for v in tr.get("lambda_grid", DEFAULT_LAMBDA_GRID)),
        patience=int(tr.get("patience", 20)),
    )
    cfg.validate()
    return ExperimentSpec(
        name=name,
        output_dir=output_dir,
        dataset=dataset,
        annotations=annotations,
        m_grid=m_grid,
        seeds=seeds,
        methods=methods,
        train=cfg,
        validation_fraction=float(doc.get("validation_fraction", 0.1)),
        raw=doc,
    )


def resolve_dataset(spec):
    """Materialize the ground truth named by the spec (generate or load)."""
    if "synthetic" in spec.dataset:
        syn = spec.dataset["synthetic"]
        n = int(syn.get("n", 2000))
        return synth_generate(
            n=n,
            k=int(syn.get("k", 3)),
            seed=int(syn.get("seed", 1234)),
            seen_count=int(syn.get("seen", n // 2)),
            noise_var=float(syn.get("noise_var", 0.1)),
        )
    files = spec.dataset["files"]
    m = load_membership_csv(files["membership"])
    x = load_features_csv(files["features"])
    seen = int(files.get("seen", m.shape[1] // 2))
    return GroundTruth(m_true=m, x_features=x, seen_count=seen)


def make_annotations(spec, gt, m_pairs, seed):
    """Draw one annotation set for a cell, per the spec's annotation source."""
    mode = spec.annotations.get("mode", "clean")
    if mode == "clean":
        ann = sample_annotations(gt, m_pairs, np.eye(gt.n_clusters), seed)
    elif mode == "confusion":
        src = spec.annotations.get("confusion", "default-k3")
        a = default_confusion_k3() if src in (None, "default-k3") else load_confusion_csv(src)
        ann = sample_annotations(gt, m_pairs, a.T @ a, seed)
    elif mode == "machine":
        labels = np.loadtxt(spec.annotations["labels"], dtype=np.int64, ndmin=1)
        ann = machine_annotate(labels[: gt.seen_count], m_pairs, seed)
    else:  # file
        ann = load_annotations_csv(spec.annotations["file"], n=gt.seen_count)
        if m_pairs > len(ann):
            raise DataError(
                f"annotation file holds {len(ann)} pairs, cell wants {m_pairs}"
            )
        ann = ann.subset(np.arange(m_pairs))
    return ann, annotation_error_rate(ann, gt)


def run_cell(spec, gt, m_pairs, seed, method):
    """Train and evaluate one (M, seed, method) cell; returns a result row."""
    t0 = time.perf_counter()
    ann, noise = make_annotations(spec, gt, m_pairs, seed)
    train_ann, val_ann = split_validation(ann, spec.validation_fraction, seed)
    x_seen = gt.x_seen
    if method == METHOD_PLAIN:
        cfg = replace(spec.train, lam=0.0, learn_b=False, seed=seed)
        params, _ = train(x_seen, train_ann, cfg, validation=val_ann)
        lam_used = 0.0
    else:
        cfg = replace(spec.train, learn_b=True, seed=seed)
        lam_used, results = select_lambda(x_seen, train_ann, cfg, val_ann)
        params = next(r.params for r in results if r.lam == lam_used and r.error is None)
    report = evaluate_model(params, gt, seed=seed)
    row = {
        "m_pairs": m_pairs,
        "seed": seed,
        "method": method,
        "lambda": lam_used,
        "noise_level": noise,
        **report.csv_row(),
        "seconds": time.perf_counter() - t0,
        "error": "",
    }
    return row, params


def _format_cell(v):
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


def load_results_csv(path):
    """Parse a results table back into typed rows (lossless for repr floats)."""
    rows = []
    with open(path, newline="") as f:
        for rec in csv.DictReader(f):
            row = dict(rec)
            for key in ("m_pairs", "seed"):
                row[key] = int(row[key])
            for key in ("lambda", "noise_level", "seconds", *EvalReport.CSV_FIELDS):
                if key in ("asc_satisfied", "ssc_verdict"):
                    continue
                row[key] = float(row[key]) if row[key] != "" else float("nan")
            row["asc_satisfied"] = row["asc_satisfied"] == "True"
            rows.append(row)
    return rows


def aggregate_curves(rows):
    """Median/mean/std of the MSE per (M, method, split), for plotting."""
    out = []
    for method in sorted({r["method"] for r in rows}):
        for m_pairs in sorted({r["m_pairs"] for r in rows}):
            for split in ("seen", "unseen"):
                vals = [
                    r[f"mse_{split}"]
                    for r in rows
                    if r["method"] == method
                    and r["m_pairs"] == m_pairs
                    and r["error"] == ""
                ]
                if not vals:
                    continue
                out.append(
                    {
                        "M": m_pairs,
                        "method": method,
                        "split": split,
                        "median": float(np.median(vals)),
                        "mean": float(np.mean(vals)),
                        "std": float(np.std(vals)),
                    }
                )
    return out


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def run_experiment(spec, log=print):
    """Run the full factorial sweep described by an :class:`ExperimentSpec`.

    Emits ``results.csv`` (one row per cell, also the resume manifest),
    ``mse_vs_M.csv`` (aggregated curves) and ``run_metadata.json`` into the
    spec's output directory. Returns the list of result rows.
    """
    os.makedirs(spec.output_dir, exist_ok=True)
    results_path = os.path.join(spec.output_dir, "results.csv")
    gt = resolve_dataset(spec)

    done = set()
    if os.path.exists(results_path):
        for row in load_results_csv(results_path):
            done.add((row["m_pairs"], row["seed"], row["method"]))

    new_file = not os.path.exists(results_path)
    with open(results_path, "a", newline="") as f:
        writer = csv.writer(f)
        if new_file:
            writer.writerow(RESULT_FIELDS)
        for m_pairs in spec.m_grid:
            for seed in spec.seeds:
                for method in spec.methods:
                    key = (m_pairs, seed, method)
                    if key in done:
                        log(f"[{spec.name}] skip completed cell {key}")
                        continue
                    log(f"[{spec.name}] run cell M={m_pairs} seed={seed} method={method}")
                    try:
                        row, _ = run_cell(spec, gt, m_pairs, seed, method)
                    except PairclustError as err:
                        row = {name: "" for name in RESULT_FIELDS}
                        row.update(
                            m_pairs=m_pairs,
                            seed=seed,
                            method=method,
                            error=f"{type(err).__name__}: {err}",
                        )
                        log(f"[{spec.name}] cell {key} failed: {row['error']}")
                    writer.writerow([_format_cell(row[name]) for name in RESULT_FIELDS])
                    f.flush()

    rows = load_results_csv(results_path)
    curves = aggregate_curves(rows)
    with open(os.path.join(spec.output_dir, "mse_vs_M.csv"), "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=["M", "method", "split", "median", "mean", "std"])
        writer.writeheader()
        for rec in curves:
            writer.writerow({k: _format_cell(v) for k, v in rec.items()})

    meta = {
        "name": spec.name,
        "version": __version__,
        "resolved_spec": spec.raw,
        "rng": "numpy-pcg64",
        "input_hashes": {
            key: sha256_file(p)
            for key, p in _input_files(spec).items()
        },
    }
    with open(os.path.join(spec.output_dir, "run_metadata.json"), "w") as f:
        json.dump(meta, f, indent=2, default=str)
    return rows


def _input_files(spec):
    files = {}
    if "files" in spec.dataset:
        files["membership"] = spec.dataset["files"]["membership"]
        files["features"] = spec.dataset["files"]["features"]
    for key in ("confusion", "labels", "file"):
        p = spec.annotations.get(key)
        if p and p != "default-k3" and os.path.exists(p):
            files[f"annotations.{key}"] = p
    return files
