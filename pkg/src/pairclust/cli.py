"""Command-line entry point: synth, annotate, train, eval, experiment.

A dataset directory (written by ``synth``) holds membership.csv,
features.csv and metadata.json; annotations are standalone CSV files. All
commands are seeded and bit-reproducible given identical inputs. Errors from
the library exit nonzero with one machine-readable JSON line on stderr.
"""

import argparse
import json
import os
import sys
import time

import numpy as np

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
    save_annotations_csv,
    save_features_csv,
    save_membership_csv,
    synth_generate,
)
from .evaluate import evaluate_model
from .exceptions import ConfigError, PairclustError
from .experiment import load_spec, run_experiment, sha256_file
from .model import load_checkpoint, save_checkpoint
from .training import TrainConfig, split_validation, train


def save_data_dir(gt, out_dir, seed, noise_var=None):
    os.makedirs(out_dir, exist_ok=True)
    save_membership_csv(gt.m_true, os.path.join(out_dir, "membership.csv"))
    save_features_csv(gt.x_features, os.path.join(out_dir, "features.csv"))
    meta = {
        "format_version": 1,
        "n": gt.n_samples,
        "k": gt.n_clusters,
        "seen_count": gt.seen_count,
        "seed": seed,
        "rng": "numpy-pcg64",
    }
    if noise_var is not None:
        meta["noise_var"] = noise_var
    with open(os.path.join(out_dir, "metadata.json"), "w") as f:
        json.dump(meta, f, indent=2)


def load_data_dir(path):
    meta_path = os.path.join(path, "metadata.json")
    if not os.path.exists(meta_path):
        raise ConfigError(f"no metadata.json in dataset directory {path}")
    with open(meta_path) as f:
        meta = json.load(f)
    gt = GroundTruth(
        m_true=load_membership_csv(os.path.join(path, "membership.csv")),
        x_features=load_features_csv(os.path.join(path, "features.csv")),
        seen_count=int(meta["seen_count"]),
    )
    return gt, meta


def cmd_synth(args):
    gt = synth_generate(
        n=args.n,
        k=args.k,
        seed=args.seed,
        seen_count=args.seen,
        noise_var=args.noise_var,
    )
    save_data_dir(gt, args.out, seed=args.seed, noise_var=args.noise_var)
    print(f"wrote {gt.n_samples} samples ({gt.seen_count} seen) to {args.out}")
    return 0


def cmd_annotate(args):
    gt, _ = load_data_dir(args.data)
    if args.mode == "clean":
        ann = sample_annotations(gt, args.pairs, np.eye(gt.n_clusters), args.seed)
    elif args.mode == "confusion":
        if args.confusion:
            a = load_confusion_csv(args.confusion)
        elif gt.n_clusters == 3:
            a = default_confusion_k3()
        else:
            raise ConfigError("confusion mode with K != 3 needs --confusion FILE")
        if a.shape[0] != gt.n_clusters:
            raise ConfigError(
                f"confusion matrix is {a.shape[0]}x{a.shape[0]}, data has K={gt.n_clusters}"
            )
        ann = sample_annotations(gt, args.pairs, a.T @ a, args.seed)
    else:  # machine
        if not args.labels:
            raise ConfigError("machine mode needs --labels FILE")
        labels = np.loadtxt(args.labels, dtype=np.int64, ndmin=1)
        if len(labels) < gt.seen_count:
            raise ConfigError(
                f"labels file has {len(labels)} entries, need {gt.seen_count}"
            )
        ann = machine_annotate(labels[: gt.seen_count], args.pairs, args.seed)
    save_annotations_csv(ann, args.out)
    noise = annotation_error_rate(ann, gt)
    print(f"wrote {len(ann)} annotations to {args.out} (noise level {100 * noise:.1f}%)")
    return 0


def _train_config(args, k):
    cfg = TrainConfig(
        n_clusters=k,
        hidden_dims=tuple(int(h) for h in args.hidden.split(",") if h),
        lr_theta=args.lr_theta,
        lr_bprime=args.lr_bprime,
        batch_pairs=args.batch_pairs,
        epochs=args.epochs,
        lam=args.lam,
        clamp=args.clamp,
        ridge=args.ridge,
        seed=args.seed,
        learn_b=args.learn_b,
        vol_on_full_matrix=args.vol_full_matrix,
        patience=args.patience,
    )
    cfg.validate()
    return cfg


def cmd_train(args):
    t0 = time.perf_counter()
    gt, _ = load_data_dir(args.data)
    ann = load_annotations_csv(args.annotations, n=gt.seen_count)
    cfg = _train_config(args, gt.n_clusters)
    validation = None
    train_ann = ann
    if args.validation_fraction > 0:
        train_ann, validation = split_validation(ann, args.validation_fraction, args.seed)
    params, log = train(gt.x_seen, train_ann, cfg, validation=validation)
    os.makedirs(args.out, exist_ok=True)
    ckpt = os.path.join(args.out, "checkpoint.json")
    save_checkpoint(params, ckpt)
    log.save_csv(os.path.join(args.out, "trainlog.csv"))
    meta = {
        "version": __version__,
        "config": {**cfg.__dict__, "hidden_dims": list(cfg.hidden_dims)},
        "validation_fraction": args.validation_fraction,
        "epochs_run": len(log.records),
        "seconds": time.perf_counter() - t0,
        "input_hashes": {
            "annotations": sha256_file(args.annotations),
            "features": sha256_file(os.path.join(args.data, "features.csv")),
        },
    }
    with open(os.path.join(args.out, "run_metadata.json"), "w") as f:
        json.dump(meta, f, indent=2)
    final = log.records[-1]
    print(f"trained {len(log.records)} epochs (final cc={final.cc:.4f}); wrote {ckpt}")
    return 0


def cmd_eval(args):
    gt, _ = load_data_dir(args.data)
    params = load_checkpoint(args.checkpoint)
    if params.input_dim != gt.x_features.shape[0]:
        raise ConfigError(
            f"checkpoint expects {params.input_dim}-d features, data has "
            f"{gt.x_features.shape[0]}"
        )
    if params.n_clusters != gt.n_clusters:
        raise ConfigError(
            f"checkpoint has K={params.n_clusters}, data has K={gt.n_clusters}"
        )
    report = evaluate_model(
        params, gt, ssc_directions=args.ssc_directions, seed=args.seed
    )
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "report.csv")
    report.save(csv_path, os.path.join(args.out, "report.json"))
    print(
        f"mse seen={report.mse_seen:.4f} unseen={report.mse_unseen:.4f} "
        f"acc seen={report.acc_seen:.3f} unseen={report.acc_unseen:.3f}; wrote {csv_path}"
    )
    return 0


def cmd_experiment(args):
    spec = load_spec(args.spec)
    if args.output_dir:
        spec.output_dir = args.output_dir
    rows = run_experiment(spec)
    failed = sum(1 for r in rows if r["error"])
    print(f"experiment '{spec.name}': {len(rows)} cells ({failed} failed); "
          f"results in {spec.output_dir}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pairclust",
        description="Membership clustering from pairwise similarity annotations.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset directory")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--seen", type=int, default=None, help="seen-sample count (default n/2)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise-var", type=float, default=0.1)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("annotate", help="sample pairwise annotations for a dataset")
    p.add_argument("--data", required=True, help="dataset directory from synth")
    p.add_argument("--out", required=True, help="output annotation CSV")
    p.add_argument("--mode", choices=("clean", "confusion", "machine"), default="clean")
    p.add_argument("--pairs", type=int, required=True)
    p.add_argument("--confusion", help="confusion matrix CSV (confusion mode)")
    p.add_argument("--labels", help="predicted-label file, one int per line (machine mode)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("train", help="train a membership network")
    p.add_argument("--data", required=True, help="dataset directory from synth")
    p.add_argument("--annotations", required=True, help="annotation CSV")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--hidden", default="64,64", help="hidden widths, comma separated")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--batch-pairs", type=int, default=128)
    p.add_argument("--lr-theta", type=float, default=0.5)
    p.add_argument("--lr-bprime", type=float, default=0.1)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--clamp", type=float, default=1e-6)
    p.add_argument("--ridge", type=float, default=1e-8)
    p.add_argument("--learn-b", action="store_true",
                   help="train the pair-interaction matrix (default: identity)")
    p.add_argument("--vol-full-matrix", action="store_true",
                   help="volume term on the full seen matrix instead of minibatches")
    p.add_argument("--validation-fraction", type=float, default=0.0,
                   help="hold out this fraction of annotations for early stopping")
    p.add_argument("--patience", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint against ground truth")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="dataset directory from synth")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--ssc-directions", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("experiment", help="run a factorial experiment sweep")
    p.add_argument("--spec", required=True, help="experiment spec YAML")
    p.add_argument("--output-dir", help="override the spec's output directory")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PairclustError as err:
        print(
            json.dumps({"error": type(err).__name__, "message": str(err)}),
            file=sys.stderr,
        )
        return 2


if __name__ == "__main__":
    sys.exit(main())
