"""Command-line entry point: dataset generation, training, and evaluation.

Exit codes: 0 success, 1 runtime failure (missing/malformed files),
2 usage or config error, 3 divergence-guard stop.

Every run echoes its effective configuration to <out_dir>/config.echo as
flat key=value lines; a config file with the same syntax can seed any
command and individual flags override file values.
"""

import argparse
import csv
import json
import os
import sys
import time

import numpy as np

from .datagen import (DatasetFormatError, ToySpec, generate_toy_dataset,
                      read_dataset, write_dataset)
from .evaluation import EvalConfig, RerankParams, precision_recall_points
from .losses import LossWeights
from .network import ModelConfig, load_checkpoint, save_checkpoint
from .optimizer import LrSchedule
from .sampling import REAL, SYNTHETIC, BatchSpec
from .trainer import (DivergenceError, TrainConfig, evaluate, train)

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, EXIT_DIVERGED = 0, 1, 2, 3

LOSS_TOKENS = {"V": "id", "D": "domain", "O": "orientation", "C": "color",
               "T": "type"}


class UsageError(Exception):
    pass


def read_config_file(path, allowed):
    """Flat key=value file; blank lines and #-comments ignored."""
    values = {}
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, _, val = line.partition("=")
            key = key.strip()
            if key not in allowed:
                raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = val.strip()
    return values


def write_config_echo(out_dir, values):
    with open(os.path.join(out_dir, "config.echo"), "w") as f:
        for key in sorted(values):
            f.write(f"{key}={values[key]}\n")


def _merge(file_vals, flag_vals):
    merged = dict(file_vals)
    merged.update({k: v for k, v in flag_vals.items() if v is not None})
    return merged


# ---- gen ----

GEN_KEYS = ("ids_real", "ids_synth", "per_id", "dim", "seed", "cluster_sep",
            "noise_sigma", "shift_offset", "colors", "types",
            "orientation_bins")


def cmd_gen(args):
    file_vals = read_config_file(args.config, GEN_KEYS) if args.config else {}
    vals = _merge(file_vals, {
        "ids_real": args.ids_real, "ids_synth": args.ids_synth,
        "per_id": args.per_id, "dim": args.dim, "seed": args.seed,
        "cluster_sep": args.cluster_sep, "noise_sigma": args.noise_sigma,
        "shift_offset": args.shift_offset, "colors": args.colors,
        "types": args.types, "orientation_bins": args.orientation_bins,
    })
    defaults = {"ids_real": 8, "ids_synth": 8, "per_id": 8, "dim": 16,
                "seed": 0, "cluster_sep": 4.0, "noise_sigma": 0.5,
                "shift_offset": 0.0, "colors": 12, "types": 11,
                "orientation_bins": 6}
    for k, v in defaults.items():
        vals.setdefault(k, v)

    dim = int(vals["dim"])
    offset = float(vals["shift_offset"])
    shift = None
    if offset != 0.0:
        shift = (np.eye(dim), np.full(dim, offset))
    spec = ToySpec(
        num_ids_real=int(vals["ids_real"]), num_ids_synth=int(vals["ids_synth"]),
        samples_per_id=int(vals["per_id"]), input_dim=dim,
        num_colors=int(vals["colors"]), num_types=int(vals["types"]),
        num_orientation_bins=int(vals["orientation_bins"]),
        cluster_sep=float(vals["cluster_sep"]),
        domain_shift=shift, noise_sigma=float(vals["noise_sigma"]),
        seed=int(vals["seed"]))

    samples, manifest = generate_toy_dataset(spec)
    os.makedirs(args.out_dir, exist_ok=True)
    real = [s for s in samples if s.domain == REAL]
    synth = [s for s in samples if s.domain == SYNTHETIC]
    write_dataset(real, manifest, os.path.join(args.out_dir, "real.jsonl"))
    write_dataset(synth, manifest, os.path.join(args.out_dir, "synth.jsonl"))
    write_config_echo(args.out_dir, {k: str(vals[k]) for k in vals})
    print(f"wrote {len(real)} real and {len(synth)} synthetic samples "
          f"to {args.out_dir}")
    return EXIT_OK


# ---- train ----

TRAIN_KEYS = ("losses", "epochs", "iterations", "seed", "n", "m", "margin",
              "grl_lambda", "disjoint_weight", "base_lr", "hidden_dims",
              "embed_dim", "normalize_embeddings", "orientation_bins")


def _parse_losses(text):
    tokens = [t.strip().upper() for t in text.split(",") if t.strip()]
    unknown = [t for t in tokens if t not in LOSS_TOKENS]
    if unknown:
        raise UsageError(f"unknown loss tokens {unknown}; use V,D,O,C,T")
    if "V" not in tokens:
        raise UsageError("the vehicle-ID loss V is always required")
    disjoint = tuple(LOSS_TOKENS[t] for t in tokens if t in ("O", "C", "T"))
    return disjoint, "D" in tokens


def build_train_config(vals, manifest, use_synthetic):
    disjoint, use_domain = _parse_losses(vals.get("losses", "V"))
    hidden = [int(h) for h in str(vals.get("hidden_dims", "32")).split(",")
              if str(h).strip()]
    num_ids = max(manifest["real_id_range"][1], manifest["synth_id_range"][1])
    bins = int(vals.get("orientation_bins",
                        manifest.get("num_orientation_bins", 6)))
    model = ModelConfig(
        input_dim=manifest["input_dim"], hidden_dims=hidden,
        embed_dim=int(vals.get("embed_dim", 16)),
        head_class_counts={
            "id": num_ids, "domain": 2,
            "color": max(1, manifest.get("num_colors", 1)),
            "type": max(1, manifest.get("num_types", 1)),
            "orientation": bins,
        },
        normalize_embeddings=str(vals.get("normalize_embeddings",
                                          "false")).lower() == "true")
    return TrainConfig(
        model=model,
        batch=BatchSpec(n=int(vals.get("n", 2)), m=int(vals.get("m", 4))),
        weights=LossWeights(
            disjoint_weight=float(vals.get("disjoint_weight", 1.0)),
            grl_lambda=float(vals.get("grl_lambda", 1.0)),
            triplet_margin=float(vals.get("margin", 0.3))),
        schedule=LrSchedule(base_lr=float(vals.get("base_lr", 3e-4))),
        epochs=int(vals.get("epochs", 60)),
        iterations_per_epoch=(int(vals["iterations"])
                              if vals.get("iterations") else None),
        seed=int(vals.get("seed", 0)),
        disjoint=disjoint, use_domain_loss=use_domain,
        use_synthetic=use_synthetic, num_orientation_bins=bins)


def cmd_train(args):
    file_vals = read_config_file(args.config, TRAIN_KEYS) if args.config else {}
    vals = _merge(file_vals, {
        "losses": args.losses, "epochs": args.epochs,
        "iterations": args.iterations, "seed": args.seed, "n": args.n,
        "m": args.m, "margin": args.margin, "grl_lambda": args.grl_lambda,
        "disjoint_weight": args.disjoint_weight, "base_lr": args.base_lr,
        "hidden_dims": args.hidden_dims, "embed_dim": args.embed_dim,
        "normalize_embeddings": args.normalize_embeddings,
        "orientation_bins": None,
    })
    vals = {k: v for k, v in vals.items() if v is not None}

    real_data, manifest = read_dataset(args.data)
    synth_data = []
    if args.synth:
        synth_data, synth_manifest = read_dataset(args.synth)
        manifest = {**manifest, **{k: synth_manifest[k] for k in
                    ("synth_id_range", "num_colors", "num_types",
                     "num_orientation_bins")}}
    config = build_train_config(vals, manifest, use_synthetic=bool(args.synth))

    os.makedirs(args.out_dir, exist_ok=True)
    echo = dict(vals)
    echo.update({"data": args.data, "synth": args.synth or "",
                 "use_synthetic": str(bool(args.synth)).lower()})
    write_config_echo(args.out_dir, {k: str(v) for k, v in echo.items()})

    start = time.monotonic()
    try:
        result = train(config, real_data, synth_data)
    except DivergenceError as e:
        _write_run_log(args.out_dir, e.run_log)
        with open(os.path.join(args.out_dir, "report.json"), "w") as f:
            json.dump({"status": "diverged", "iteration": e.iteration}, f,
                      indent=2)
        print(f"training diverged at iteration {e.iteration}", file=sys.stderr)
        return EXIT_DIVERGED

    _write_run_log(args.out_dir, result.run_log)
    save_checkpoint(os.path.join(args.out_dir, "checkpoint.bin"),
                    result.params, epoch=result.epochs_done,
                    seed=config.seed, optim_state=result.optim.to_dict())
    report = _final_report(result.params, real_data, config)
    report["status"] = "completed"
    with open(os.path.join(args.out_dir, "report.json"), "w") as f:
        json.dump(report, f, indent=2)
    with open(os.path.join(args.out_dir, "timing.txt"), "w") as f:
        f.write(f"wall_clock_sec={time.monotonic() - start:.3f}\n")
    return EXIT_OK


def _write_run_log(out_dir, run_log):
    with open(os.path.join(out_dir, "run.log.jsonl"), "w") as f:
        for entry in run_log:
            f.write(json.dumps(entry) + "\n")


def _final_report(params, real_data, config):
    """Self-retrieval snapshot on the real training split, with and without
    re-ranking when the gallery is large enough."""
    rep = evaluate(params, real_data, real_data, EvalConfig(),
                   exclude_self=True)
    out = {"mAP": rep.map_at_k, "cmc": {str(r): v for r, v in rep.cmc.items()},
           "config": rep.config, "mAP_reranked": None}
    rr = RerankParams()
    if rr.k1 < len(real_data):
        rep_rr = evaluate(params, real_data, real_data,
                          EvalConfig(rerank=rr), exclude_self=True)
        out["mAP_reranked"] = rep_rr.map_at_k
    return out


# ---- eval ----

EVAL_KEYS = ("topk", "metric", "rerank", "k1", "k2", "lambda", "exclude_self")


def cmd_eval(args):
    file_vals = read_config_file(args.config, EVAL_KEYS) if args.config else {}
    vals = _merge(file_vals, {
        "topk": args.topk, "metric": args.metric,
        "rerank": str(args.rerank).lower() if args.rerank else None,
        "k1": args.k1, "k2": args.k2, "lambda": args.lam,
        "exclude_self": (str(args.exclude_self).lower()
                         if args.exclude_self else None),
    })
    params, _ = load_checkpoint(args.checkpoint)
    query, _ = read_dataset(args.query)
    gallery, _ = read_dataset(args.gallery)

    rerank = None
    if str(vals.get("rerank", "false")).lower() == "true":
        rerank = RerankParams(k1=int(vals.get("k1", 20)),
                              k2=int(vals.get("k2", 6)),
                              lambda_orig=float(vals.get("lambda", 0.3)))
    config = EvalConfig(top_k=int(vals.get("topk", 100)),
                        metric=vals.get("metric", "euclidean"),
                        rerank=rerank)
    exclude_self = str(vals.get("exclude_self", "false")).lower() == "true"
    report = evaluate(params, query, gallery, config,
                      exclude_self=exclude_self)

    with open(args.out, "w") as f:
        f.write(report.to_json() + "\n")
    if args.per_query_csv:
        with open(args.per_query_csv, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["query_index", "ap"])
            for i, ap in enumerate(report.per_query_ap):
                writer.writerow([i, ap])
    if args.pr_csv:
        _write_pr_csv(args.pr_csv, params, query, gallery, config,
                      exclude_self)
    print(f"mAP@{config.top_k} = {report.map_at_k:.6f}")
    return EXIT_OK


def _write_pr_csv(path, params, query, gallery, config, exclude_self):
    from .evaluation import pairwise_distances, _ranked_matches
    from .trainer import embed_samples
    q = embed_samples(params, query)
    g = embed_samples(params, gallery)
    dist = pairwise_distances(q, g, config.metric)
    exclude = np.eye(len(query), dtype=bool) if exclude_self else None
    ranked = _ranked_matches(dist, [s.id for s in query],
                             [s.id for s in gallery], exclude)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["query_index", "recall", "precision"])
        for qi, matches in enumerate(ranked):
            for recall, precision in precision_recall_points(matches):
                writer.writerow([qi, recall, precision])


# ---- argument parsing ----

def build_parser():
    parser = argparse.ArgumentParser(
        prog="dareid",
        description="Two-domain re-identification training and evaluation")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a two-domain toy dataset")
    g.add_argument("--config")
    g.add_argument("--out-dir", required=True)
    g.add_argument("--ids-real", type=int, dest="ids_real")
    g.add_argument("--ids-synth", type=int, dest="ids_synth")
    g.add_argument("--per-id", type=int, dest="per_id")
    g.add_argument("--dim", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--cluster-sep", type=float, dest="cluster_sep")
    g.add_argument("--noise-sigma", type=float, dest="noise_sigma")
    g.add_argument("--shift-offset", type=float, dest="shift_offset")
    g.add_argument("--colors", type=int)
    g.add_argument("--types", type=int)
    g.add_argument("--orientation-bins", type=int, dest="orientation_bins")
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", help="train a model")
    t.add_argument("--config")
    t.add_argument("--data", required=True, help="real-domain JSONL dataset")
    t.add_argument("--synth", help="synthetic-domain JSONL dataset")
    t.add_argument("--out-dir", required=True)
    t.add_argument("--losses", help="comma list from V,D,O,C,T (V required)")
    t.add_argument("--epochs", type=int)
    t.add_argument("--iterations", type=int)
    t.add_argument("--seed", type=int)
    t.add_argument("--n", type=int, help="identities per domain per batch")
    t.add_argument("--m", type=int, help="samples per identity per batch")
    t.add_argument("--margin", type=float)
    t.add_argument("--grl-lambda", type=float, dest="grl_lambda")
    t.add_argument("--disjoint-weight", type=float, dest="disjoint_weight")
    t.add_argument("--base-lr", type=float, dest="base_lr")
    t.add_argument("--hidden-dims", dest="hidden_dims")
    t.add_argument("--embed-dim", type=int, dest="embed_dim")
    t.add_argument("--normalize-embeddings", action="store_const",
                   const="true", dest="normalize_embeddings")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint")
    e.add_argument("--config")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--query", required=True)
    e.add_argument("--gallery", required=True)
    e.add_argument("--topk", type=int)
    e.add_argument("--metric")
    e.add_argument("--rerank", action="store_true")
    e.add_argument("--k1", type=int)
    e.add_argument("--k2", type=int)
    e.add_argument("--lambda", type=float, dest="lam")
    e.add_argument("--exclude-self", action="store_true", dest="exclude_self")
    e.add_argument("--out", default="report.json")
    e.add_argument("--per-query-csv", dest="per_query_csv")
    e.add_argument("--pr-csv", dest="pr_csv")
    e.set_defaults(func=cmd_eval)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if e.code is not None else EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, DatasetFormatError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
