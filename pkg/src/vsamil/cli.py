"""Command-line entry points.

Subcommands: convert, train, evaluate, tune, milcheck, diagnose. Every
command writes machine-readable JSON (and CSV where tabular) into --out
next to its human-readable stdout summary.

Exit codes: 0 success, 1 usage or config error, 2 data error,
3 numerical failure.
"""

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import codebook as cb
from . import data as dat
from . import milcheck as mc
from . import pipeline as pl
from . import tuner
from .exceptions import ConfigError, DataError, NumericalError


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _build_parser():
    parser = _Parser(prog="vsamil", description="Bag-level classification "
                     "with hypervector concept banks")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="convert CSV/svmlight data to canonical JSONL")
    p.add_argument("--input", required=True)
    p.add_argument("--schema", choices=("csv", "svmlight"), default="csv")
    p.add_argument("--bag-column", default="bag_id")
    p.add_argument("--label-column", default="label")
    p.add_argument("--drop-columns", default="",
                   help="comma-separated columns to ignore (csv schema)")
    p.add_argument("--name", default=None)
    p.add_argument("--out", required=True, help="output JSONL path")

    p = sub.add_parser("train", help="train the full pipeline and write model + manifest")
    p.add_argument("--data", default=None, help="dataset JSONL")
    p.add_argument("--config", default=None, help="config JSON or a previous manifest")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one dotted config key")
    p.add_argument("--name", default=None)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("evaluate", help="score a trained model on one split")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--out", required=True)

    p = sub.add_parser("tune", help="random search over the hyperparameter space")
    p.add_argument("--data", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--out", required=True)

    p = sub.add_parser("milcheck", help="validity harness on poisoned corpora")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--variants", default="1,2,3")
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("diagnose", help="elbow/silhouette tables for cluster counts")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="train")
    p.add_argument("--k-min", type=int, default=2)
    p.add_argument("--k-max", type=int, default=10)
    p.add_argument("--out", required=True)

    return parser


def _outdir(path):
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path, doc):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)


def _load_config(args):
    config = pl.config_from_file(args.config) if args.config else pl.RunConfig()
    doc = config.to_dotted()
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            doc[key.strip()] = json.loads(raw)
        except json.JSONDecodeError:
            doc[key.strip()] = raw
    config = pl.RunConfig.from_dotted(doc)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    return config


def _manifest_data_path(args):
    if args.data:
        return args.data
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        if isinstance(doc, dict) and doc.get("kind") == "manifest":
            path = doc.get("dataset", {}).get("path")
            if path:
                return path
    raise ConfigError("no dataset given: pass --data or a manifest with a dataset path")


def _cmd_convert(args):
    if args.schema == "csv":
        drops = tuple(c for c in args.drop_columns.split(",") if c)
        dataset = dat.convert_csv(args.input, bag_column=args.bag_column,
                                  label_column=args.label_column,
                                  drop_columns=drops, name=args.name)
    else:
        dataset = dat.convert_svmlight(args.input, name=args.name)
    dat.save_jsonl(dataset, args.out)
    pos, neg = dataset.class_counts()
    summary = {"name": dataset.name, "bags": len(dataset.bags),
               "feature_dim": dataset.feature_dim, "positive": pos, "negative": neg,
               "out": str(args.out)}
    _write_json(str(args.out) + ".summary.json", summary)
    print(f"wrote {summary['bags']} bags (+{pos}/-{neg}), "
          f"{summary['feature_dim']} features -> {args.out}")
    return 0


def _cmd_train(args):
    data_path = _manifest_data_path(args)
    config = _load_config(args)
    dataset = dat.load_jsonl(data_path, name=args.name)
    out = _outdir(args.out)
    model, manifest = pl.train_pipeline(dataset, config, name=args.name)
    model_path = out / "model.json"
    pl.save_model(model, model_path)
    manifest["dataset"]["path"] = str(data_path)
    manifest["model_path"] = str(model_path)
    _write_json(out / "manifest.json", manifest)
    print(f"trained on {dataset.name}: "
          + ", ".join(f"{k} auroc={v['auroc']:.4f} acc={v['accuracy']:.4f}"
                      for k, v in manifest["metrics"].items()))
    print(f"model -> {model_path}")
    return 0


def _metrics_csv(path, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["split", "accuracy", "auroc", "tp", "fp", "tn", "fn", "n_bags"])
        for split, rep in rows:
            writer.writerow([split, rep["accuracy"], rep["auroc"], rep["tp"],
                             rep["fp"], rep["tn"], rep["fn"], rep["n_bags"]])


def _cmd_evaluate(args):
    model = pl.load_model(args.model)
    dataset = dat.load_jsonl(args.data)
    report = pl.evaluate_model(model, dataset, args.split).to_json()
    out = _outdir(args.out)
    _write_json(out / "metrics.json", {"split": args.split, **report})
    _metrics_csv(out / "metrics.csv", [(args.split, report)])
    auroc = "n/a" if report["auroc"] is None else f"{report['auroc']:.4f}"
    print(f"{args.split}: accuracy={report['accuracy']:.4f} auroc={auroc} "
          f"(n={report['n_bags']})")
    return 0


def _cmd_tune(args):
    config = _load_config(args)
    dataset = dat.load_jsonl(args.data)
    out = _outdir(args.out)
    result = tuner.tune(dataset, config, args.trials, log_path=str(out / "trials.jsonl"))
    model_path = out / "best_model.json"
    pl.save_model(result["model"], model_path)
    manifest = result["manifest"]
    manifest["dataset"]["path"] = str(args.data)
    manifest["model_path"] = str(model_path)
    _write_json(out / "manifest.json", manifest)
    doc = {k: result[k] for k in ("best_trial", "best_params", "best_config",
                                  "best_val_auroc", "retrained_val_auroc")}
    doc["metrics"] = manifest["metrics"]
    _write_json(out / "tune_result.json", doc)
    p = result["best_params"]
    print(f"best trial {result['best_trial']}: blocks={p['blocks']} layers={p['layers']} "
          f"k={p['codebook_k']} concepts={p['concepts']} lr={p['classifier_lr']:.4g}")
    print(f"val auroc={result['best_val_auroc']:.4f}; "
          + ", ".join(f"{k} auroc={v['auroc']:.4f}" for k, v in manifest["metrics"].items()))
    return 0


def _cmd_milcheck(args):
    try:
        variants = [int(v) for v in args.variants.split(",") if v]
    except ValueError:
        raise ConfigError(f"bad --variants value {args.variants!r}") from None
    config = pl.config_from_file(args.config) if args.config else None
    specs = [mc.PoisonSpec(variant=v, seed=args.seed) for v in variants]
    rows = mc.milcheck(specs, config)
    out = _outdir(args.out)
    mc.write_milcheck_report(rows, out / "milcheck.json", out / "milcheck.csv")
    for row in rows:
        if row["split"] == "error":
            print(f"variant {row['variant']}: ERROR {row.get('error')}")
        else:
            print(f"variant {row['variant']} {row['split']}: "
                  f"accuracy={row['accuracy']:.3f} auroc={row['auroc']:.3f} "
                  f"{'PASS' if row['pass'] else 'FAIL'}")
    return 0


def _cmd_diagnose(args):
    model = pl.load_model(args.model)
    dataset = dat.load_jsonl(args.data)
    if not dataset.split:
        if not model.split_assignment:
            raise DataError("dataset has no split assignment and the model carries none")
        dataset = replace(dataset, split=dict(model.split_assignment))
    mat, _, _ = dataset.stacked_instances(args.split)
    codes = model.autoencoder.encode(model.normalizer.transform(mat))
    k_max = min(args.k_max, codes.shape[0] - 1)
    rows = cb.cluster_diagnostics(codes, range(args.k_min, k_max + 1),
                                  seed=model.config.seed)
    out = _outdir(args.out)
    _write_json(out / "diagnostics.json", rows)
    with open(out / "diagnostics.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "inertia", "silhouette"])
        for row in rows:
            writer.writerow([row["k"], row["inertia"], row["silhouette"]])
    for row in rows:
        print(f"k={row['k']}: inertia={row['inertia']:.4f} "
              f"silhouette={row['silhouette']:.4f}")
    return 0


_COMMANDS = {
    "convert": _cmd_convert,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "tune": _cmd_tune,
    "milcheck": _cmd_milcheck,
    "diagnose": _cmd_diagnose,
}


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"data error: missing file {exc.filename}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
