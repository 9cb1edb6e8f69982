"""Command-line entry point.

Subcommands: ``train`` (3-fold rotation with metrics, loss traces and
checkpoints), ``eval`` (score a checkpoint on a dataset), ``extract``
(dump feature vectors), ``bench`` (runtime scaling CSVs) and ``gen``
(synthetic planted-motif datasets).

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical
failure.  Every command validates its configuration before touching the
filesystem, and removes partial outputs if it fails midway.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from .checkpoint import load_checkpoint, save_checkpoint
from .classifier import TrainConfig, build_model, flatten, layer_pairs, predict, train
from .data import (
    Dataset,
    balance,
    gen_synthetic,
    load_native,
    load_tu_dataset,
    make_folds,
    metrics,
    motif_matrix,
    pad_to_max,
    save_native,
)
from .errors import CapacityError, DataFormatError, NumericalError
from .features import forward_stack
from .linalg import MAX_BRUTE_K

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3

_SOFTMAX_FLAG_TO_AXIS = {"per-kernel": "per_kernel", "across-kernels": "across_kernels"}
_BALANCE_FLAG = {"under": "undersample", "over": "oversample"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); keep our own codes
        raise UsageError(message)


def parse_layers(text: str) -> list[tuple[int, int]]:
    """Parse a layer list like '4:1' or '3:2,4:3' into (k, c) pairs."""
    specs = []
    for part in text.split(","):
        pieces = part.strip().split(":")
        if len(pieces) != 2:
            raise UsageError(f"bad layer spec {part!r}; expected k:c")
        try:
            k, c = int(pieces[0]), int(pieces[1])
        except ValueError:
            raise UsageError(f"bad layer spec {part!r}; expected integers k:c")
        specs.append((k, c))
    if not specs:
        raise UsageError("at least one layer spec is required")
    return specs


def parse_range(text: str) -> list[int]:
    """Parse 'lo:hi' (inclusive) or a comma list into integers."""
    try:
        if ":" in text:
            lo, hi = text.split(":")
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise ValueError
            return list(range(lo, hi + 1))
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"bad range {text!r}; expected lo:hi or a comma list")


@dataclass
class RunConfig:
    command: str
    dataset: str | None
    format: str
    layers: list[tuple[int, int]]
    mode: str
    softmax_axis: str
    epochs: int
    learning_rate: float
    batch_size: int
    seed: int
    folds: int
    balance: str
    out: str
    threads: int


_DEFAULTS = {
    "format": "native",
    "layers": "4:1",
    "mode": "brute",
    "softmax": "per-kernel",
    "epochs": 150,
    "lr": 0.001,
    "batch": 16,
    "seed": 0,
    "folds": 3,
    "balance": "under",
    "out": "isograph-out",
    "threads": 1,
}


def _merged(args: argparse.Namespace) -> dict:
    """Resolution order: command-line flag, then config file, then default."""
    file_values = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise UsageError(f"config file not found: {path}")
        try:
            file_values = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file {path} is not valid JSON: {exc.msg}")
        if not isinstance(file_values, dict):
            raise UsageError(f"config file {path} must hold a JSON object")
    merged = {}
    for key, default in _DEFAULTS.items():
        flag = getattr(args, key.replace("-", "_"), None)
        merged[key] = flag if flag is not None else file_values.get(key, default)
    for key in ("dataset", "checkpoint", "motif", "n", "count", "k_range", "c_range",
                "graphs", "reps", "sweep", "compare_fast"):
        val = getattr(args, key, None)
        if key == "compare_fast" and val is False:  # store_true default, not a choice
            val = None
        merged[key] = val if val is not None else file_values.get(key)
    return merged


def _build_config(command: str, merged: dict) -> RunConfig:
    softmax = merged["softmax"]
    if softmax not in _SOFTMAX_FLAG_TO_AXIS:
        raise UsageError(f"--softmax must be per-kernel or across-kernels, got {softmax!r}")
    bal = merged["balance"]
    if bal not in _BALANCE_FLAG:
        raise UsageError(f"--balance must be under or over, got {bal!r}")
    if merged["mode"] not in ("brute", "fast"):
        raise UsageError(f"--mode must be brute or fast, got {merged['mode']!r}")
    if merged["format"] not in ("tu", "native"):
        raise UsageError(f"--format must be tu or native, got {merged['format']!r}")
    layers = merged["layers"]
    if isinstance(layers, str):
        layers = parse_layers(layers)
    cfg = RunConfig(
        command=command,
        dataset=merged.get("dataset"),
        format=merged["format"],
        layers=layers,
        mode=merged["mode"],
        softmax_axis=_SOFTMAX_FLAG_TO_AXIS[softmax],
        epochs=int(merged["epochs"]),
        learning_rate=float(merged["lr"]),
        batch_size=int(merged["batch"]),
        seed=int(merged["seed"]),
        folds=int(merged["folds"]),
        balance=_BALANCE_FLAG[bal],
        out=str(merged["out"]),
        threads=int(merged["threads"]),
    )
    if cfg.epochs < 1:
        raise UsageError(f"--epochs must be >= 1, got {cfg.epochs}")
    if cfg.learning_rate <= 0:
        raise UsageError(f"--lr must be positive, got {cfg.learning_rate}")
    if cfg.batch_size < 1:
        raise UsageError(f"--batch must be >= 1, got {cfg.batch_size}")
    if cfg.folds < 2:
        raise UsageError(f"--folds must be >= 2, got {cfg.folds}")
    if cfg.threads < 1:
        raise UsageError(f"--threads must be >= 1, got {cfg.threads}")
    for k, c in cfg.layers:
        if k < 1 or c < 1:
            raise UsageError(f"layer spec {k}:{c} must use positive integers")
        if cfg.mode == "brute" and k > MAX_BRUTE_K:
            raise UsageError(f"layer kernel size {k} exceeds the brute-mode limit of {MAX_BRUTE_K}")
    return cfg


class _Outputs:
    """Tracks files written so a failing command can clean up after itself."""

    def __init__(self):
        self.paths: list[Path] = []

    def register(self, path) -> Path:
        p = Path(path)
        self.paths.append(p)
        return p

    def discard_all(self):
        for p in self.paths:
            try:
                p.unlink(missing_ok=True)
            except OSError:
                pass


def _load_dataset(cfg: RunConfig) -> Dataset:
    if not cfg.dataset:
        raise UsageError("--dataset is required for this command")
    if cfg.format == "tu":
        return load_tu_dataset(cfg.dataset)
    return load_native(cfg.dataset)


def _fold_seeds(seed: int, fold: int) -> tuple[int, int]:
    state = np.random.SeedSequence([seed, fold]).generate_state(2)
    return int(state[0]), int(state[1])


def cmd_train(cfg: RunConfig, outputs: _Outputs) -> int:
    dataset = balance(_load_dataset(cfg), cfg.balance, seed=cfg.seed)
    dataset = pad_to_max(dataset)
    folds = make_folds(dataset, seed=cfg.seed, n_folds=cfg.folds)
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    fold_rows = []
    loss_rows = []
    for fold, (train_idx, test_idx) in enumerate(folds.rounds()):
        model_seed, train_seed = _fold_seeds(cfg.seed, fold)
        model = build_model(
            dataset.padded_size,
            cfg.layers,
            mode=cfg.mode,
            softmax_axis=cfg.softmax_axis,
            seed=model_seed,
        )
        tconf = TrainConfig(
            epochs=cfg.epochs,
            learning_rate=cfg.learning_rate,
            batch_size=cfg.batch_size,
            seed=train_seed,
        )
        trace = train(model, [dataset.graphs[i] for i in train_idx], tconf, threads=cfg.threads)
        loss_rows.extend((fold, epoch, loss) for epoch, loss in enumerate(trace))
        preds = [predict(model, dataset.graphs[i].adjacency, threads=cfg.threads) for i in test_idx]
        truth = [dataset.graphs[i].label for i in test_idx]
        acc, f1 = metrics(preds, truth)
        fold_rows.append((fold, acc, f1))
        ckpt = outputs.register(out_dir / f"checkpoint_fold{fold}.npz")
        save_checkpoint(ckpt, model)
        print(f"fold {fold}: accuracy={acc:.4f} f1={f1:.4f}")

    mean_acc = sum(r[1] for r in fold_rows) / len(fold_rows)
    mean_f1 = sum(r[2] for r in fold_rows) / len(fold_rows)
    metrics_path = outputs.register(out_dir / "metrics.csv")
    with metrics_path.open("w") as fh:
        fh.write("fold,accuracy,f1\n")
        for fold, acc, f1 in fold_rows:
            fh.write(f"{fold},{acc:.6f},{f1:.6f}\n")
        fh.write(f"mean,{mean_acc:.6f},{mean_f1:.6f}\n")
    trace_path = outputs.register(out_dir / "loss_trace.csv")
    with trace_path.open("w") as fh:
        fh.write("fold,epoch,loss\n")
        for fold, epoch, loss in loss_rows:
            fh.write(f"{fold},{epoch},{loss:.10g}\n")
    print(f"mean: accuracy={mean_acc:.4f} f1={mean_f1:.4f}")
    print(f"wrote {metrics_path} and {trace_path}")
    return EXIT_OK


def _pad_for_model(dataset: Dataset, input_size: int) -> Dataset:
    dataset = pad_to_max(dataset)
    if dataset.padded_size > input_size:
        raise DataFormatError(
            f"checkpoint expects padded size {input_size}, dataset needs {dataset.padded_size}"
        )
    if dataset.padded_size < input_size:
        graphs = []
        for g in dataset.graphs:
            a = np.zeros((input_size, input_size))
            a[: g.node_count, : g.node_count] = g.adjacency
            graphs.append(type(g)(a, g.label))
        dataset = Dataset(graphs, padded_size=input_size)
    return dataset


def cmd_eval(cfg: RunConfig, outputs: _Outputs, checkpoint: str) -> int:
    if not checkpoint:
        raise UsageError("--checkpoint is required for eval")
    model = load_checkpoint(checkpoint)
    dataset = _load_dataset(cfg)
    if len(dataset) == 0:
        raise DataFormatError(f"dataset {cfg.dataset} is empty")
    dataset = _pad_for_model(dataset, model.input_size)
    preds = [predict(model, g.adjacency, threads=cfg.threads) for g in dataset.graphs]
    acc, f1 = metrics(preds, dataset.labels())
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = outputs.register(out_dir / "eval_metrics.csv")
    with path.open("w") as fh:
        fh.write("accuracy,f1\n")
        fh.write(f"{acc:.6f},{f1:.6f}\n")
    print(f"accuracy={acc:.4f} f1={f1:.4f}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_extract(cfg: RunConfig, outputs: _Outputs, checkpoint: str | None) -> int:
    dataset = _load_dataset(cfg)
    if len(dataset) == 0:
        raise DataFormatError(f"dataset {cfg.dataset} is empty")
    if checkpoint:
        model = load_checkpoint(checkpoint)
        dataset = _pad_for_model(dataset, model.input_size)
        pairs = layer_pairs(model)
    else:
        dataset = pad_to_max(dataset)
        model = build_model(
            dataset.padded_size,
            cfg.layers,
            mode=cfg.mode,
            softmax_axis=cfg.softmax_axis,
            seed=cfg.seed,
        )
        pairs = layer_pairs(model)
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = outputs.register(out_dir / "features.csv")
    with path.open("w") as fh:
        for g in dataset.graphs:
            q, _ = forward_stack(g.adjacency, pairs, threads=cfg.threads)
            vec = flatten(q)
            fh.write(str(g.label) + "," + ",".join(f"{v:.10g}" for v in vec) + "\n")
    print(f"wrote {path} ({len(dataset)} rows)")
    return EXIT_OK


def cmd_bench(cfg: RunConfig, outputs: _Outputs, merged: dict) -> int:
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    n = int(merged.get("n") or 20)
    reps = int(merged.get("reps") or 3)
    source = n
    if cfg.dataset:
        source = pad_to_max(_load_dataset(cfg)).graphs
    if merged.get("compare_fast"):
        k_range = parse_range(merged.get("k_range") or "2:5")
        records = bench_mod.brute_vs_fast(n, k_range, c=1, reps=reps, seed=cfg.seed,
                                          threads=cfg.threads)
        path = outputs.register(out_dir / "bench_compare.csv")
    elif merged.get("sweep") == "k":
        k_range = parse_range(merged.get("k_range") or "2:5")
        records = bench_mod.time_vs_k(source, k_range, c=1, mode=cfg.mode, reps=reps,
                                      seed=cfg.seed, threads=cfg.threads)
        path = outputs.register(out_dir / "bench_k.csv")
    elif merged.get("sweep") == "c":
        c_range = parse_range(merged.get("c_range") or "1:4")
        k = cfg.layers[0][0]
        records = bench_mod.time_vs_c(source, c_range, k=k, mode=cfg.mode, reps=reps,
                                      seed=cfg.seed, threads=cfg.threads)
        path = outputs.register(out_dir / "bench_c.csv")
    else:
        raise UsageError("bench requires --sweep {k,c} or --compare-fast")
    bench_mod.write_csv(records, path)
    print(f"wrote {path} ({len(records)} records)")
    return EXIT_OK


def cmd_gen(cfg: RunConfig, outputs: _Outputs, merged: dict) -> int:
    motif_name = merged.get("motif")
    if not motif_name:
        raise UsageError("--motif is required for gen (e.g. clique3)")
    try:
        motif = motif_matrix(motif_name)
    except ValueError as exc:
        raise UsageError(str(exc))
    n = int(merged.get("n") or 10)
    count = int(merged.get("count") or 100)
    if count < 1 or n < 1:
        raise UsageError("--count and --n must be positive")
    if motif.shape[0] > n:
        raise UsageError(f"motif {motif_name} does not fit in graphs of {n} nodes")
    dataset = gen_synthetic(count, n, motif, seed=cfg.seed)
    path = Path(cfg.out)
    if path.suffix == "":
        path.mkdir(parents=True, exist_ok=True)
        path = path / f"{motif_name}_n{n}_{count}.jsonl"
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
    outputs.register(path)
    save_native(dataset, path)
    print(f"wrote {path} ({count} graphs)")
    return EXIT_OK


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON file with the same keys as the flags")
    sub.add_argument("--dataset", help="dataset path (directory for tu, file for native)")
    sub.add_argument("--format", choices=["tu", "native"])
    sub.add_argument("--layers", help="layer specs k:c[,k:c...] (default 4:1)")
    sub.add_argument("--mode", choices=["brute", "fast"])
    sub.add_argument("--softmax", choices=["per-kernel", "across-kernels"])
    sub.add_argument("--epochs", type=int)
    sub.add_argument("--lr", type=float)
    sub.add_argument("--batch", type=int)
    sub.add_argument("--seed", type=int)
    sub.add_argument("--folds", type=int)
    sub.add_argument("--balance", choices=["under", "over"])
    sub.add_argument("--out", help="output directory (gen: output file)")
    sub.add_argument("--threads", type=int)


def _build_parser() -> _Parser:
    parser = _Parser(prog="isograph", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)

    p_train = subs.add_parser("train", help="3-fold training run")
    _add_common(p_train)

    p_eval = subs.add_parser("eval", help="evaluate a checkpoint")
    _add_common(p_eval)
    p_eval.add_argument("--checkpoint", help="checkpoint .npz to evaluate")

    p_extract = subs.add_parser("extract", help="write per-graph feature vectors")
    _add_common(p_extract)
    p_extract.add_argument("--checkpoint", help="use kernels from this checkpoint")

    p_bench = subs.add_parser("bench", help="runtime scaling study")
    _add_common(p_bench)
    p_bench.add_argument("--sweep", choices=["k", "c"])
    p_bench.add_argument("--compare-fast", action="store_true", dest="compare_fast")
    p_bench.add_argument("--k-range", dest="k_range", help="lo:hi or comma list")
    p_bench.add_argument("--c-range", dest="c_range", help="lo:hi or comma list")
    p_bench.add_argument("--n", type=int, help="synthetic graph size (default 20)")
    p_bench.add_argument("--reps", type=int, help="repetitions per point (default 3)")

    p_gen = subs.add_parser("gen", help="generate a planted-motif dataset")
    _add_common(p_gen)
    p_gen.add_argument("--motif", help="clique<k>, cycle<k> or path<k>")
    p_gen.add_argument("--n", type=int, help="nodes per graph (default 10)")
    p_gen.add_argument("--count", type=int, help="number of graphs (default 100)")

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    outputs = _Outputs()
    try:
        args = parser.parse_args(argv)
        merged = _merged(args)
        cfg = _build_config(args.command, merged)
        if args.command == "train":
            return cmd_train(cfg, outputs)
        if args.command == "eval":
            return cmd_eval(cfg, outputs, merged.get("checkpoint"))
        if args.command == "extract":
            return cmd_extract(cfg, outputs, merged.get("checkpoint"))
        if args.command == "bench":
            return cmd_bench(cfg, outputs, merged)
        if args.command == "gen":
            return cmd_gen(cfg, outputs, merged)
        raise UsageError(f"unknown command {args.command!r}")
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        outputs.discard_all()
        return EXIT_USAGE
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        outputs.discard_all()
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        outputs.discard_all()
        return EXIT_NUMERICAL
    except (DataFormatError, OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        outputs.discard_all()
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
