"""Command-line pipeline orchestration.

Commands: ``pipeline`` (full train/evaluate over a list of seeds),
``transfer`` (apply a trained model to other datasets), ``synth``
(generate Gaussian-blob datasets for verification), ``ablate`` (sweep one
configuration axis), ``eval`` (score a predictions file) and ``pool``
(average layers of a ``.semb`` file).

The run configuration is one JSON document with a versioned schema;
unknown keys are rejected so sweep typos fail fast. Exit codes: 0 ok,
2 configuration error, 3 data error, 4 training divergence. Reports go to
stdout; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .checkpoint import load_model, save_model
from .dataio import (
    Dataset,
    DatasetManifest,
    EmbeddingTensor,
    PosiItem,
    TASK_COLAB,
    TASK_POSI,
    load_dataset,
    parse_layer_spec,
    pool_layers,
    read_manifest,
    read_semb,
    read_vec_table,
    write_manifest,
    write_semb,
)
from .dec import HyperParams, dec_fit, predict_hard, transfer_apply
from .errors import ArgumentError, ConfigError, DivergenceError, SdecError
from .evaluation import (
    EvalReport,
    contingency,
    m1_accuracy,
    mapped_f1,
    oracle_select,
    render_table,
)
from .feats import (
    DEFAULT_EXCLUDED_LABELS,
    FeatureSpec,
    NgramSpec,
    augment_tokens,
    compose_span_dataset,
    filter_spans,
)
from .sae import (
    AutoencoderSpec,
    ContextSpec,
    TrainConfig,
    build_cbow_pairs,
    finetune_end2end,
    pretrain_layerwise,
)

logger = logging.getLogger(__name__)

CONFIG_VERSION = 1

_TRAIN_DEFAULTS = {"epochs": 50, "batch_size": 64, "learning_rate": 0.1, "momentum": 0.9}
_CLUSTER_DEFAULTS = {
    "m": None,
    "nu": 1.0,
    "lambda": 5.0,
    "iterations": 4000,
    "epochs": None,
    "batch_size": 256,
    "learning_rate": 0.001,
    "momentum": 0.9,
    "target_update_interval": 100,
    "kmeans_restarts": 10,
}
_DATA_DEFAULTS = {"semb": None, "manifest": None, "spans": None, "layers": "all", "morph_vec": None}
_FEATURE_DEFAULTS = {
    "morph_order": 3,
    "span_mode": "endpoints_concat",
    "excluded_labels": ["TOP"],
    "train_filtered": True,
}
_CONTEXT_DEFAULTS = {"mode": "plain", "width": 1}
_AUTOENCODER_DEFAULTS = {
    "hidden_dims": [75],
    "activation": "identity",
    "corrupt_rate": 0.2,
    "tied": False,
}
_ABLATE_DEFAULTS = {
    "layers": ["all", "0-3", "4-7", "8-11"],
    "ngram_order": [1, 2, 3],
    "span_mode": ["mean", "max", "endpoints_concat"],
    "context_mode": ["plain", "cbow"],
}


def _merge_section(doc: dict, name: str, defaults: dict) -> dict:
    raw = doc.get(name, {})
    if not isinstance(raw, dict):
        raise ConfigError(f"section {name!r} must be an object")
    unknown = set(raw) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {sorted(unknown)}")
    merged = dict(defaults)
    merged.update(raw)
    return merged


def load_config(path) -> dict:
    """Read, validate and default-fill a run configuration file."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})")
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    top_allowed = {
        "version", "task", "data", "features", "context", "autoencoder",
        "pretrain", "finetune", "cluster", "seeds", "ablate",
    }
    unknown = set(doc) - top_allowed
    if unknown:
        raise ConfigError(f"{path}: unknown top-level keys {sorted(unknown)}")
    if doc.get("version", CONFIG_VERSION) != CONFIG_VERSION:
        raise ConfigError(f"{path}: unsupported config version {doc.get('version')}")
    task = doc.get("task")
    if task not in (TASK_POSI, TASK_COLAB):
        raise ConfigError(f"{path}: task must be 'posi' or 'colab', got {task!r}")
    cfg = {
        "task": task,
        "data": _merge_section(doc, "data", _DATA_DEFAULTS),
        "features": _merge_section(doc, "features", _FEATURE_DEFAULTS),
        "context": _merge_section(doc, "context", _CONTEXT_DEFAULTS),
        "autoencoder": _merge_section(doc, "autoencoder", _AUTOENCODER_DEFAULTS),
        "pretrain": _merge_section(doc, "pretrain", _TRAIN_DEFAULTS),
        "finetune": _merge_section(doc, "finetune", _TRAIN_DEFAULTS),
        "cluster": _merge_section(doc, "cluster", _CLUSTER_DEFAULTS),
        "seeds": doc.get("seeds", [0]),
        "ablate": _merge_section(doc, "ablate", _ABLATE_DEFAULTS),
    }
    if cfg["data"]["semb"] is None or cfg["data"]["manifest"] is None:
        raise ConfigError(f"{path}: data.semb and data.manifest are required")
    if task == TASK_COLAB and cfg["data"]["spans"] is None:
        raise ConfigError(f"{path}: colab runs need data.spans")
    seeds = cfg["seeds"]
    if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) for s in seeds):
        raise ConfigError(f"{path}: seeds must be a non-empty list of integers")
    if task == TASK_COLAB:
        if cfg["context"]["mode"] == "cbow":
            raise ConfigError("context mode 'cbow' applies to posi runs only")
        if cfg["data"]["morph_vec"] is not None:
            raise ConfigError("morph augmentation applies to posi runs only")
    return cfg


def _resolve_relative(cfg: dict, base: Path) -> None:
    for key in ("semb", "manifest", "spans", "morph_vec"):
        val = cfg["data"][key]
        if val is not None and not Path(val).is_absolute():
            cfg["data"][key] = str(base / val)


class _PreparedData:
    """Everything a training run needs, derived once per pipeline call."""

    def __init__(self, cfg: dict):
        data = cfg["data"]
        self.token_dataset = load_dataset(data["semb"], data["manifest"], data["layers"])
        feats_cfg = cfg["features"]
        self.excluded = set(feats_cfg["excluded_labels"])
        if cfg["task"] == TASK_POSI:
            ds = self.token_dataset
            if data["morph_vec"] is not None:
                table = read_vec_table(data["morph_vec"])
                spec = FeatureSpec(morph=NgramSpec(order=feats_cfg["morph_order"], table=table))
                ds = augment_tokens(ds, spec)
            self.dataset = ds
            ctx = ContextSpec(mode=cfg["context"]["mode"], width=cfg["context"]["width"])
            if ctx.mode == "cbow":
                self.inputs, self.targets = build_cbow_pairs(ds, ctx.width)
            else:
                self.inputs, self.targets = ds.matrix, ds.matrix
            self.train_rows = np.arange(ds.n_items)
            self.eval_rows = np.arange(ds.n_items)
            self.gold = [item.gold for item in ds.manifest.items]
            self.labels = list(ds.manifest.label_set)
            # telemetry inside training sees the same label inventory
            self.train_labels = self.labels
            self.default_m = len(self.labels)
        else:
            span_manifest = read_manifest(data["spans"])
            span_ds = compose_span_dataset(
                self.token_dataset, span_manifest, feats_cfg["span_mode"]
            )
            self.dataset = span_ds
            self.inputs, self.targets = span_ds.matrix, span_ds.matrix
            kept = filter_spans(span_manifest, self.excluded)
            if not kept:
                raise ArgumentError("no spans left after filtering")
            self.eval_rows = np.asarray(kept)
            self.train_rows = (
                self.eval_rows if feats_cfg["train_filtered"] else np.arange(span_ds.n_items)
            )
            self.gold = [item.gold for item in span_ds.manifest.items]
            self.labels = [l for l in span_ds.manifest.label_set if l not in self.excluded]
            # unfiltered training rows can still carry excluded gold labels
            self.train_labels = list(span_ds.manifest.label_set)
            self.default_m = len(self.labels)

    @property
    def eval_gold(self) -> list:
        return [self.gold[i] for i in self.eval_rows]


def _hyper_params(c: dict, m: int, n_train: int, seed: int) -> HyperParams:
    iterations = c["iterations"]
    if c["epochs"] is not None:
        iterations = math.ceil(n_train / c["batch_size"]) * c["epochs"]
    return HyperParams(
        m=m,
        nu=c["nu"],
        lambda_=c["lambda"],
        iterations=iterations,
        batch_size=c["batch_size"],
        learning_rate=c["learning_rate"],
        momentum=c["momentum"],
        target_update_interval=c["target_update_interval"],
        kmeans_restarts=c["kmeans_restarts"],
        seed=seed,
    )


def _take_rows(arr: np.ndarray, rows: np.ndarray) -> np.ndarray:
    # avoid a full copy when the selection is the identity
    if len(rows) == arr.shape[0] and np.array_equal(rows, np.arange(arr.shape[0])):
        return arr
    return arr[rows]


def _run_one_seed(cfg: dict, prep: _PreparedData, seed: int, out_dir: Path, trace: bool) -> dict:
    ae = cfg["autoencoder"]
    train_in = _take_rows(prep.inputs, prep.train_rows)
    train_tg = _take_rows(prep.targets, prep.train_rows)
    spec = AutoencoderSpec(
        input_dim=train_in.shape[1],
        hidden_dims=tuple(ae["hidden_dims"]),
        activation=ae["activation"],
        corrupt_rate=ae["corrupt_rate"],
        tied=ae["tied"],
    )
    pre_cfg = TrainConfig(seed=seed, **{k: cfg["pretrain"][k] for k in _TRAIN_DEFAULTS})
    fine_cfg = TrainConfig(seed=seed + 1, **{k: cfg["finetune"][k] for k in _TRAIN_DEFAULTS})
    logger.info("seed %d: layer-wise pretraining", seed)
    pre_targets = train_tg if cfg["context"]["mode"] == "cbow" else None
    stack = pretrain_layerwise(spec, train_in, pre_cfg, targets=pre_targets)
    logger.info("seed %d: end-to-end finetuning", seed)
    stack, fine_trace = finetune_end2end(stack, train_in, fine_cfg, targets=train_tg)

    m = cfg["cluster"]["m"] if cfg["cluster"]["m"] is not None else prep.default_m
    hp = _hyper_params(cfg["cluster"], m, len(train_in), seed + 2)
    train_gold = [prep.gold[i] for i in prep.train_rows]
    telemetry: list = []
    logger.info("seed %d: clustering for %d iterations", seed, hp.iterations)
    model = dec_fit(
        stack, train_in, train_tg, hp,
        gold=train_gold, labels=prep.train_labels, telemetry=telemetry,
    )

    pred_all, _ = predict_hard(model, prep.inputs)
    eval_pred = pred_all[prep.eval_rows]
    eval_gold = prep.eval_gold
    final_m1 = m1_accuracy(contingency(eval_pred, eval_gold, m=hp.m, labels=prep.labels))
    m1_trace = [(r.iteration, r.m1) for r in telemetry if r.m1 is not None]
    m1_trace.append((hp.iterations, final_m1))
    _, oracle_m1, _, last_m1 = oracle_select(m1_trace)
    _, _, f1_one = mapped_f1(eval_pred, eval_gold, "one_to_one", labels=prep.labels)
    _, _, f1_many = mapped_f1(eval_pred, eval_gold, "many_to_one", labels=prep.labels)

    seed_dir = out_dir / f"seed_{seed}"
    seed_dir.mkdir(parents=True, exist_ok=True)
    save_model(seed_dir / "model.sdec", model)
    with open(seed_dir / "labels.json", "w", encoding="utf-8") as fh:
        json.dump({"labels": [int(x) for x in pred_all]}, fh)
    _write_telemetry_csv(seed_dir / "telemetry.csv", telemetry)
    if trace:
        with open(seed_dir / "finetune_trace.csv", "w", encoding="utf-8") as fh:
            fh.write("epoch,loss\n")
            for epoch, loss in enumerate(fine_trace):
                fh.write(f"{epoch},{loss!r}\n")
    return {
        "seed": seed,
        "m1": last_m1,
        "m1_oracle": oracle_m1,
        "f1_one_to_one": f1_one,
        "f1_many_to_one": f1_many,
    }


def _write_telemetry_csv(path: Path, telemetry: list) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("iter,kl,recon,total,m1\n")
        for rec in telemetry:
            m1 = "" if rec.m1 is None else repr(rec.m1)
            fh.write(f"{rec.iteration},{rec.kl!r},{rec.recon!r},{rec.total!r},{m1}\n")


def run_pipeline(cfg: dict, out_dir: Path, trace: bool = False) -> EvalReport:
    """Train and evaluate once per seed; returns the aggregated report."""
    prep = _PreparedData(cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    runs = [_run_one_seed(cfg, prep, seed, out_dir, trace) for seed in cfg["seeds"]]
    report = EvalReport(
        task=cfg["task"],
        seeds=[r["seed"] for r in runs],
        metrics={
            "m1": [r["m1"] for r in runs],
            "m1_oracle": [r["m1_oracle"] for r in runs],
            "f1_one_to_one": [r["f1_one_to_one"] for r in runs],
            "f1_many_to_one": [r["f1_many_to_one"] for r in runs],
        },
        notes={
            "n_items": int(prep.dataset.n_items),
            "n_eval": int(len(prep.eval_rows)),
            "m": int(cfg["cluster"]["m"] if cfg["cluster"]["m"] is not None else prep.default_m),
            "selection": "last; m1_oracle uses the best telemetry refresh",
        },
    )
    return report


def _emit_report(report: EvalReport, out_dir: Path, table: bool) -> None:
    text = json.dumps(report.to_dict(), indent=2)
    (out_dir / "report.json").write_text(text + "\n", encoding="utf-8")
    if table:
        print(render_table(report))
    else:
        print(text)


def cmd_pipeline(args) -> int:
    cfg = load_config(args.config)
    _resolve_relative(cfg, Path(args.config).resolve().parent)
    if args.seed is not None:
        cfg["seeds"] = [args.seed]
    out_dir = Path(args.out)
    report = run_pipeline(cfg, out_dir, trace=args.trace)
    _emit_report(report, out_dir, args.table)
    return 0


def cmd_transfer(args) -> int:
    model = load_model(args.model)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    combined = {}
    for pair in args.datasets:
        try:
            semb_path, manifest_path = pair.split(":", 1)
        except ValueError:
            raise ConfigError(f"dataset spec {pair!r} must be 'semb:manifest'")
        ds = load_dataset(semb_path, manifest_path, args.layers)
        name = Path(manifest_path).stem
        inputs, gold, labels = _transfer_inputs(ds, args)
        pred, _ = transfer_apply(model, inputs)
        t = contingency(pred, gold, m=model.m, labels=labels)
        m1 = m1_accuracy(t)
        _, _, f1_one = mapped_f1(pred, gold, "one_to_one", labels=labels)
        _, _, f1_many = mapped_f1(pred, gold, "many_to_one", labels=labels)
        report = {
            "dataset": name,
            "n_items": int(len(pred)),
            "m1": m1,
            "f1_one_to_one": f1_one,
            "f1_many_to_one": f1_many,
        }
        (out_dir / f"transfer_{name}.json").write_text(
            json.dumps(report, indent=2) + "\n", encoding="utf-8"
        )
        combined[name] = report
    print(json.dumps(combined, indent=2))
    return 0


def _transfer_inputs(ds: Dataset, args) -> tuple[np.ndarray, list, list]:
    if args.morph_vec is not None:
        table = read_vec_table(args.morph_vec)
        ds = augment_tokens(ds, FeatureSpec(morph=NgramSpec(order=args.morph_order, table=table)))
    if args.context == "cbow":
        inputs, _ = build_cbow_pairs(ds, args.width)
    else:
        inputs = ds.matrix
    gold = [item.gold for item in ds.manifest.items]
    return inputs, gold, list(ds.manifest.label_set)


def make_blobs(
    k: int,
    n: int,
    latent_dim: int,
    ambient_dim: int,
    noise: float,
    separation: float,
    seed: int,
    structure_seed: int | None = None,
    aniso: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian latent clusters pushed through a random linear map.

    The structure (cluster centers, per-cluster axis scales and the map)
    is drawn from ``structure_seed`` so independent samples of the same
    population can be generated by varying ``seed`` alone. ``aniso`` > 1
    stretches each cluster by per-axis factors in [1/aniso, aniso], which
    makes the plain Euclidean metric suboptimal. The output is scaled to
    unit global standard deviation.
    """
    if k < 1:
        raise ArgumentError("k must be >= 1")
    if k > n:
        raise ArgumentError(f"cannot draw {k} clusters from {n} points")
    if aniso < 1.0:
        raise ArgumentError("aniso must be >= 1")
    struct_rng = np.random.default_rng(structure_seed if structure_seed is not None else seed)
    centers = struct_rng.normal(0.0, separation, size=(k, latent_dim))
    if aniso > 1.0:
        scales = struct_rng.uniform(1.0 / aniso, aniso, size=(k, latent_dim))
    else:
        scales = np.ones((k, latent_dim))
    lift = struct_rng.normal(0.0, 1.0 / np.sqrt(latent_dim), size=(ambient_dim, latent_dim))
    sample_rng = np.random.default_rng(seed)
    labels = np.tile(np.arange(k), n // k + 1)[:n]
    labels = sample_rng.permutation(labels)
    latent = centers[labels] + sample_rng.normal(0.0, 1.0, size=(n, latent_dim)) * scales[labels]
    x = latent @ lift.T
    if noise > 0:
        x = x + sample_rng.normal(0.0, noise, size=x.shape)
    x = x / x.std()
    return x.astype(np.float32), labels


def blobs_dataset(
    k: int, n: int, latent_dim: int, ambient_dim: int, noise: float,
    separation: float, seed: int, structure_seed: int | None = None,
    sentence_len: int = 20, aniso: float = 1.0,
) -> tuple[EmbeddingTensor, DatasetManifest]:
    matrix, labels = make_blobs(
        k, n, latent_dim, ambient_dim, noise, separation, seed, structure_seed, aniso
    )
    items = tuple(
        PosiItem(
            sent=i // sentence_len,
            tok=i % sentence_len,
            surface=f"w{i:06d}",
            gold=f"c{labels[i]}",
        )
        for i in range(n)
    )
    manifest = DatasetManifest(
        task=TASK_POSI, label_set=tuple(f"c{j}" for j in range(k)), items=items
    )
    tensor = EmbeddingTensor(values=matrix[:, None, :])
    return tensor, manifest


def cmd_synth(args) -> int:
    tensor, manifest = blobs_dataset(
        k=args.k, n=args.n, latent_dim=args.latent_dim, ambient_dim=args.dim,
        noise=args.noise, separation=args.separation, seed=args.seed,
        structure_seed=args.structure_seed, sentence_len=args.sentence_len,
        aniso=args.aniso,
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    semb_path = out_dir / f"{args.prefix}.semb"
    manifest_path = out_dir / f"{args.prefix}.manifest.json"
    write_semb(tensor, semb_path)
    write_manifest(manifest, manifest_path)
    print(json.dumps({"semb": semb_path.name, "manifest": manifest_path.name, "n": args.n}))
    return 0


_AXIS_MUTATORS = {
    "layers": lambda cfg, v: cfg["data"].__setitem__("layers", v),
    "ngram_order": lambda cfg, v: cfg["features"].__setitem__("morph_order", v),
    "span_mode": lambda cfg, v: cfg["features"].__setitem__("span_mode", v),
    "context_mode": lambda cfg, v: cfg["context"].__setitem__("mode", v),
}


def cmd_ablate(args) -> int:
    cfg = load_config(args.config)
    _resolve_relative(cfg, Path(args.config).resolve().parent)
    if args.seed is not None:
        cfg["seeds"] = [args.seed]
    if args.axis not in _AXIS_MUTATORS:
        raise ConfigError(f"unknown ablation axis {args.axis!r}")
    values = cfg["ablate"][args.axis]
    out_dir = Path(args.out)
    rows = [("condition", "m1 mean", "m1 std", "m1 max")]
    results = {}
    for value in values:
        sub_cfg = copy.deepcopy(cfg)
        _AXIS_MUTATORS[args.axis](sub_cfg, value)
        sub_out = out_dir / f"{args.axis}_{value}"
        logger.info("ablate %s=%s", args.axis, value)
        report = run_pipeline(sub_cfg, sub_out, trace=args.trace)
        agg = report.aggregates()["m1"]
        rows.append(
            (str(value), f"{agg['mean']:.4f}", f"{agg['std']:.4f}", f"{agg['max']:.4f}")
        )
        results[str(value)] = report.to_dict()
    (out_dir / "ablation.json").write_text(
        json.dumps({"axis": args.axis, "conditions": results}, indent=2) + "\n",
        encoding="utf-8",
    )
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    for i, row in enumerate(rows):
        print("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if i == 0:
            print("  ".join("-" * w for w in widths))
    return 0


def cmd_eval(args) -> int:
    manifest = read_manifest(args.manifest)
    with open(args.pred, encoding="utf-8") as fh:
        doc = json.load(fh)
    pred = np.asarray(doc["labels"], dtype=np.int64)
    if len(pred) != len(manifest):
        raise ArgumentError(
            f"{len(pred)} predictions for {len(manifest)} manifest items"
        )
    excluded = set(args.excluded) if args.excluded else set(DEFAULT_EXCLUDED_LABELS)
    if manifest.task == TASK_COLAB:
        rows = filter_spans(manifest, excluded)
        labels = [l for l in manifest.label_set if l not in excluded]
    else:
        rows = list(range(len(manifest)))
        labels = list(manifest.label_set)
    gold_all = [item.gold for item in manifest.items]
    gold = [gold_all[i] for i in rows]
    sub = pred[rows]
    t = contingency(sub, gold, m=int(sub.max()) + 1 if len(sub) else 0, labels=labels)
    report = EvalReport(
        task=manifest.task,
        seeds=[],
        metrics={
            "m1": [m1_accuracy(t)],
            "f1_one_to_one": [mapped_f1(sub, gold, "one_to_one", labels=labels)[2]],
            "f1_many_to_one": [mapped_f1(sub, gold, "many_to_one", labels=labels)[2]],
        },
        notes={"n_eval": len(rows)},
    )
    if args.table:
        print(render_table(report))
    else:
        print(json.dumps(report.to_dict(), indent=2))
    return 0


def cmd_pool(args) -> int:
    tensor = read_semb(args.semb)
    layers = parse_layer_spec(args.layers, tensor.n_layers)
    pooled = pool_layers(tensor, layers)
    write_semb(EmbeddingTensor(values=pooled[:, None, :]), args.out)
    print(json.dumps({"out": str(args.out), "n_items": tensor.n_items, "dim": tensor.dim}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sdec", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pipeline", help="run the full train/evaluate pipeline")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None, help="override the config seed list")
    p.add_argument("--out", required=True)
    p.add_argument("--trace", action="store_true")
    p.add_argument("--table", action="store_true")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("transfer", help="apply a trained model to other datasets")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--layers", default="all")
    p.add_argument("--morph-vec", default=None)
    p.add_argument("--morph-order", type=int, default=3)
    p.add_argument("--context", choices=["plain", "cbow"], default="plain")
    p.add_argument("--width", type=int, default=1)
    p.add_argument("datasets", nargs="+", help="semb:manifest pairs")
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("synth", help="generate a synthetic blob dataset")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--latent-dim", type=int, default=5)
    p.add_argument("--dim", type=int, default=50)
    p.add_argument("--noise", type=float, default=0.5)
    p.add_argument("--separation", type=float, default=10.0)
    p.add_argument("--aniso", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--structure-seed", type=int, default=None)
    p.add_argument("--sentence-len", type=int, default=20)
    p.add_argument("--prefix", default="synth")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ablate", help="sweep one configuration axis")
    p.add_argument("--config", required=True)
    p.add_argument("--axis", required=True, choices=sorted(_AXIS_MUTATORS))
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--trace", action="store_true")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("eval", help="score a predictions file against a manifest")
    p.add_argument("--pred", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--excluded", nargs="*", default=None)
    p.add_argument("--table", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("pool", help="average layers of a .semb file")
    p.add_argument("--semb", required=True)
    p.add_argument("--layers", default="all")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pool)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return 4
    except FileNotFoundError as exc:
        print(f"data error: missing file {exc.filename}", file=sys.stderr)
        return 3
    except SdecError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
