"""Command-line pipeline driver.

Subcommands mirror the pipeline stages: simulate -> dataset -> train ->
distill -> eval / ablate / bench / predict.  Artifacts land in fixed
locations under the configured working directory so each stage can find
its inputs:

    <workdir>/scenarios/<Mode>.csv
    <workdir>/dataset/{train,val,test}.csv, norm_stats.csv
    <workdir>/models/{binary,multiclass,student}.txt (+ training logs)
    <workdir>/reports/...
    <workdir>/cache/

Exit codes: 0 success, 1 usage error, 2 broken data or config contract,
3 numeric blow-up inside the simulator.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
import time

import numpy as np

from .attacks import MODES
from .config import PipelineConfig, default_config, load_config
from .distill import distill, format_report
from .errors import ConfigError, GridSentryError, SchemaError, SimulationDiverged
from .evalbench import (ablation_csv, bench_latency, compute_metrics,
                        kd_trajectory, kd_trajectory_csv, model_size_bytes,
                        realtime_demo, run_ablation)
from .gbdt import load_model, predict_class, predict_proba, save_model, train
from .pipeline import (compact, downsample, fit_norm_stats, merge, normalize,
                       read_norm_stats, stratified_split, write_norm_stats)
from .simulate import run_scenario
from .tables import SampleTable, read_csv, write_csv


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage; the contract here reserves 2 for
    # data errors, so route usage problems through exit code 1 instead
    def error(self, message):
        raise _UsageError(message)


def _dirs(cfg: PipelineConfig):
    w = cfg.workdir
    return {name: os.path.join(w, name)
            for name in ("scenarios", "dataset", "models", "reports", "cache")}


def _need(path: str, producer: str) -> str:
    if not os.path.exists(path):
        raise ConfigError(f"missing {path}; run `gridsentry {producer}` first")
    return path


def _class_histogram(table: SampleTable) -> str:
    y = table.col("label_multi").astype(np.int64)
    counts = np.bincount(y, minlength=len(MODES))
    return " ".join(f"{MODES[k]}={counts[k]}" for k in range(len(MODES)))


def cmd_simulate(cfg: PipelineConfig, args) -> int:
    modes = list(MODES) if args.all else [args.scenario]
    if modes == [None]:
        raise _UsageError("simulate needs --scenario <mode> or --all")
    d = _dirs(cfg)
    os.makedirs(d["scenarios"], exist_ok=True)
    for mode in modes:
        spec = cfg.scenario_spec(mode)
        sim = cfg.scenario_sim(mode)
        t0 = time.perf_counter()
        table = run_scenario(sim, spec)
        elapsed = time.perf_counter() - t0
        path = os.path.join(d["scenarios"], f"{mode}.csv")
        write_csv(table, path)
        n_attack = int(table.col("label_bin").sum())
        if mode == "Normal":
            summary = "no attack"
        else:
            summary = (f"onset {spec.t_a:g} s, targets {spec.targets}, "
                       f"{n_attack} attack rows")
        print(f"{mode}: {len(table)} rows, {summary} "
              f"({elapsed:.2f} s) -> {path}")
    return 0


def cmd_dataset(cfg: PipelineConfig, args) -> int:
    d = _dirs(cfg)
    tables = []
    for mode in MODES:
        path = _need(os.path.join(d["scenarios"], f"{mode}.csv"),
                     "simulate --all")
        tables.append(read_csv(path))
    merged = merge(tables)
    attacks_before = int(merged.col("label_bin").sum())

    ds = cfg.dataset
    thinned = downsample(merged, ds.normal_keep_fraction,
                         ds.downsample_seed, ds.onset_guard)
    attacks_after = int(thinned.col("label_bin").sum())
    print(f"merged {len(merged)} rows -> kept {len(thinned)} "
          f"(attack rows {attacks_before} -> {attacks_after})")
    if attacks_before != attacks_after:
        raise SchemaError("downsampling dropped attack rows")
    if ds.to_float32 or ds.rescale != 1.0:
        thinned = compact(thinned, ds.to_float32, ds.rescale)

    train_t, val_t, test_t = stratified_split(thinned, ds.split)
    stats = fit_norm_stats(train_t)
    os.makedirs(d["dataset"], exist_ok=True)
    write_norm_stats(stats, os.path.join(d["dataset"], "norm_stats.csv"))
    for name, part in (("train", train_t), ("val", val_t), ("test", test_t)):
        normed = normalize(part, stats)
        write_csv(normed, os.path.join(d["dataset"], f"{name}.csv"))
        print(f"{name}: {len(part)} rows | {_class_histogram(part)}")
    return 0


def _load_split(cfg: PipelineConfig, name: str) -> SampleTable:
    d = _dirs(cfg)
    return read_csv(_need(os.path.join(d["dataset"], f"{name}.csv"), "dataset"))


def _objectives_from_flags(args):
    if getattr(args, "binary", False):
        return ["binary"]
    if getattr(args, "multiclass", False):
        return ["multiclass"]
    return ["binary", "multiclass"]


def cmd_train(cfg: PipelineConfig, args) -> int:
    d = _dirs(cfg)
    train_t = _load_split(cfg, "train")
    val_t = _load_split(cfg, "val")
    os.makedirs(d["models"], exist_ok=True)
    for objective in _objectives_from_flags(args):
        params = (cfg.binary_params if objective == "binary"
                  else cfg.multiclass_params)
        log_path = os.path.join(d["models"], f"{objective}_log.csv")
        t0 = time.perf_counter()
        model = train(params, train_t, val_t, log_path=log_path)
        elapsed = time.perf_counter() - t0
        path = os.path.join(d["models"], f"{objective}.txt")
        save_model(model, path)
        last = model.history[-1] if model.history else (0, float("nan"),
                                                        float("nan"))
        print(f"{objective}: {model.n_trees} trees, best iteration "
              f"{model.best_iteration}, final valid loss {last[2]:.6f} "
              f"({elapsed:.1f} s) -> {path}")
    return 0


def cmd_distill(cfg: PipelineConfig, args) -> int:
    d = _dirs(cfg)
    teacher = load_model(_need(os.path.join(d["models"], "multiclass.txt"),
                               "train --multiclass"))
    train_t = _load_split(cfg, "train")
    val_t = _load_split(cfg, "val")
    cache_dir = d["cache"] if cfg.kd_cache else None
    if cache_dir:
        os.makedirs(cache_dir, exist_ok=True)
    log_path = os.path.join(d["models"], "student_log.csv")
    student, report = distill(teacher, train_t, val_t, cfg.student_params,
                              cfg.kd, cache_dir=cache_dir, log_path=log_path)
    student_path = os.path.join(d["models"], "student.txt")
    save_model(student, student_path)
    # sizes come from the serialized artifacts
    report["teacher_size_bytes"] = model_size_bytes(
        os.path.join(d["models"], "multiclass.txt"))
    report["student_size_bytes"] = model_size_bytes(student_path)
    report["size_reduction_pct"] = 100.0 * (
        1.0 - report["student_size_bytes"] / report["teacher_size_bytes"])
    os.makedirs(d["reports"], exist_ok=True)
    text = format_report(report)
    with open(os.path.join(d["reports"], "kd_report.txt"), "w") as fh:
        fh.write(text)
    print(text, end="")
    print(f"student -> {student_path}")
    return 0


def _confusion_csv(report, class_names) -> str:
    k = report.confusion.shape[0]
    lines = ["true\\pred," + ",".join(class_names[:k])]
    for i in range(k):
        lines.append(class_names[i] + ","
                     + ",".join(str(int(c)) for c in report.confusion[i]))
    return "\n".join(lines) + "\n"


def cmd_eval(cfg: PipelineConfig, args) -> int:
    d = _dirs(cfg)
    test_t = _load_split(cfg, "test")
    os.makedirs(d["reports"], exist_ok=True)
    wanted = _objectives_from_flags(args)
    if not (args.binary or args.multiclass):
        wanted = ["binary", "multiclass", "student"]
    evaluated = {}
    for name in wanted:
        path = os.path.join(d["models"], f"{name}.txt")
        if name == "student" and not os.path.exists(path):
            continue  # student is optional until distill has run
        producer = ("distill" if name == "student"
                    else f"train --{name}")
        model = load_model(_need(path, producer))
        label = "label_bin" if model.objective == "binary" else "label_multi"
        y = test_t.col(label).astype(np.int64)
        pred = predict_class(model, test_t.features())
        k = 2 if model.objective == "binary" else model.num_class
        rep = compute_metrics(y, pred, k)
        names = ["Normal", "Attack"] if k == 2 else list(MODES)
        with open(os.path.join(d["reports"], f"metrics_{name}.txt"), "w") as fh:
            fh.write("\n".join(rep.lines(names)) + "\n")
        with open(os.path.join(d["reports"], f"confusion_{name}.csv"), "w") as fh:
            fh.write(_confusion_csv(rep, names))
        evaluated[name] = model
        print(f"{name}: accuracy {rep.accuracy:.4f} macro_f1 {rep.macro_f1:.4f} "
              f"weighted_f1 {rep.weighted_f1:.4f} ({rep.n_samples} rows)")
    if "multiclass" in evaluated and "student" in evaluated:
        rows, agreement = kd_trajectory(evaluated["multiclass"],
                                        evaluated["student"], test_t,
                                        cfg.bench.trajectory_rows)
        with open(os.path.join(d["reports"], "kd_trajectory.csv"), "w") as fh:
            fh.write(kd_trajectory_csv(rows))
        print(f"teacher/student trajectory agreement {agreement:.2f}% "
              f"over {len(rows)} rows")
    return 0


def cmd_ablate(cfg: PipelineConfig, args) -> int:
    d = _dirs(cfg)
    train_t = _load_split(cfg, "train")
    val_t = _load_split(cfg, "val")
    test_t = _load_split(cfg, "test")
    rows = run_ablation(cfg.multiclass_params, train_t, val_t, test_t)
    os.makedirs(d["reports"], exist_ok=True)
    text = ablation_csv(rows)
    with open(os.path.join(d["reports"], "ablation.csv"), "w") as fh:
        fh.write(text)
    print(text, end="")
    return 0


def cmd_bench(cfg: PipelineConfig, args) -> int:
    d = _dirs(cfg)
    test_t = _load_split(cfg, "test")
    os.makedirs(d["reports"], exist_ok=True)
    b = cfg.bench
    lines = []
    demo_model = None
    for name in ("binary", "multiclass", "student"):
        path = os.path.join(d["models"], f"{name}.txt")
        if not os.path.exists(path):
            continue
        model = load_model(path)
        rep = bench_latency(model, test_t, b.batch_rows, b.repetitions,
                            b.warmup)
        lines += [f"{name}_size_bytes = {model_size_bytes(path)}",
                  f"{name}_ms_per_1000 = {rep.median_ms_per_1000:.4f}",
                  f"{name}_us_per_sample = {rep.us_per_sample:.4f}",
                  f"{name}_threads = {rep.threads}"]
        if name == "multiclass":
            demo_model = model
    if not lines:
        raise ConfigError("no model files found; run `gridsentry train` first")
    with open(os.path.join(d["reports"], "latency.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    for ln in lines:
        print(ln)
    if demo_model is not None:
        rows, matches = realtime_demo(demo_model, test_t, b.demo_rows,
                                      b.demo_seed)
        with open(os.path.join(d["reports"], "demo.txt"), "w") as fh:
            fh.write("time_s,truth,predicted,confidence\n")
            for r in rows:
                fh.write(f"{r.time_s:.9g},{r.truth},{r.predicted},"
                         f"{r.confidence:.6f}\n")
            fh.write(f"# matches {matches}/{len(rows)}\n")
        print(f"realtime demo: {matches}/{len(rows)} matches")
    return 0


def cmd_predict(cfg: PipelineConfig, args) -> int:
    d = _dirs(cfg)
    name = "binary" if args.binary else "multiclass"
    model = load_model(_need(os.path.join(d["models"], f"{name}.txt"),
                             f"train --{name}"))
    table = read_csv(args.csv)
    # models are trained in normalized feature space; raw rows must go
    # through the same transforms the training splits did
    ds = cfg.dataset
    if ds.to_float32 or ds.rescale != 1.0:
        table = compact(table, ds.to_float32, ds.rescale)
    stats = read_norm_stats(_need(os.path.join(d["dataset"], "norm_stats.csv"),
                                  "dataset"))
    feats = normalize(table, stats).features()
    for i in range(feats.shape[0]):
        proba = predict_proba(model, feats[i])
        if model.objective == "binary":
            cls = int(proba >= 0.5)
            conf = float(proba if cls else 1.0 - proba)
            label = "Attack" if cls else "Normal"
        else:
            cls = int(np.argmax(proba))
            conf = float(np.max(proba))
            label = MODES[cls]
        print(f"row {i}: class {cls} ({label}) p={conf:.4f}")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "dataset": cmd_dataset,
    "train": cmd_train,
    "distill": cmd_distill,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
    "bench": cmd_bench,
    "predict": cmd_predict,
}


def build_parser() -> _Parser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH",
                        help="INI config file (defaults apply when omitted)")
    common.add_argument("--out", metavar="DIR",
                        help="override the configured working directory")
    common.add_argument("--seed", type=int, metavar="U64",
                        help="override the base simulation seed")

    parser = _Parser(prog="gridsentry",
                     description="microgrid attack-detection pipeline")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("simulate", parents=[common],
                       help="run scenarios and write their CSVs")
    p.add_argument("--scenario", choices=MODES, help="one scenario mode")
    p.add_argument("--all", action="store_true", help="all seven scenarios")

    sub.add_parser("dataset", parents=[common],
                   help="merge, downsample, split, normalize")

    p = sub.add_parser("train", parents=[common], help="fit detector models")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--binary", action="store_true")
    g.add_argument("--multiclass", action="store_true")

    sub.add_parser("distill", parents=[common],
                   help="train the compact student from the multiclass model")

    p = sub.add_parser("eval", parents=[common],
                       help="score models on the held-out test split")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--binary", action="store_true")
    g.add_argument("--multiclass", action="store_true")

    sub.add_parser("ablate", parents=[common],
                   help="leave-one-feature-group-out retraining sweep")
    sub.add_parser("bench", parents=[common],
                   help="latency, model size, and the point-wise demo")

    p = sub.add_parser("predict", parents=[common],
                       help="classify rows of a CSV one at a time")
    p.add_argument("csv", help="input CSV in the pipeline schema")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--binary", action="store_true")
    g.add_argument("--multiclass", action="store_true")
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help()
        return 1
    cfg = load_config(args.config) if args.config else default_config()
    if args.out:
        cfg = dataclasses.replace(cfg, workdir=args.out)
    if args.seed is not None:
        noise = dataclasses.replace(cfg.sim.noise, seed=args.seed)
        cfg = dataclasses.replace(
            cfg, sim=dataclasses.replace(cfg.sim, noise=noise))
    return COMMANDS[args.command](cfg, args)


def main(argv=None) -> int:
    try:
        return run(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SimulationDiverged as exc:
        print(f"simulation diverged: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except GridSentryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
