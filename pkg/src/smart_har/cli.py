"""Command-line entry point.

Subcommands: generate, train, evaluate, ablate, report. Runs are driven by
a plain-text config file of dotted key=value lines (for example
`train.lr=0.001`); unknown keys are rejected and every run writes a fully
resolved config echo next to its outputs, so a run directory is
self-describing and rerunnable. Exit codes: 0 success, 2 config error,
3 data error, 4 numeric failure. The SMART_THREADS environment variable
caps how many ablation sub-runs execute in parallel.
"""

import argparse
import os
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np

from . import __version__
from .errors import ConfigError, DataError, NumericError, SmartError
from .fusion import (FUSION_VARIANTS, SCENE_INFO_VALUES, ModelConfig,
                     SmartModel, prepare_inputs)
from .metrics_report import (evaluate_model, export_embeddings,
                             render_report, write_metrics_csv)
from .synthgen import (GeneratorConfig, generate_dataset, make_splits,
                       read_dataset, read_splits, write_dataset, write_splits)
from .training import TrainConfig, load_model_checkpoint, train

DEFAULT_ABLATION_ROWS = (
    "smart/both", "smart/none", "smart/depth", "smart/mask",
    "concat/both", "self_attention/both", "channel_attention/both",
)


@dataclass
class DataSection:
    root: str = "data"
    protocol: str = "table1"
    split_seed: int = 0
    fractions: tuple = (0.7, 0.2, 0.1)


@dataclass
class EvalSection:
    checkpoint: str = ""
    scopes: tuple = ()
    embeddings: bool = False
    batch_size: int = 32


@dataclass
class AblateSection:
    rows: tuple = DEFAULT_ABLATION_ROWS


@dataclass
class RunConfig:
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    data: DataSection = field(default_factory=DataSection)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalSection = field(default_factory=EvalSection)
    ablate: AblateSection = field(default_factory=AblateSection)


def _parse_scalar(raw, target):
    raw = raw.strip()
    if isinstance(target, bool):
        low = raw.lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ConfigError(f"expected a boolean, got {raw!r}")
    if isinstance(target, int):
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"expected an integer, got {raw!r}") from None
    if isinstance(target, float):
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"expected a number, got {raw!r}") from None
    return raw


def _parse_value(raw, default):
    if isinstance(default, tuple):
        items = [x.strip() for x in raw.split(",") if x.strip()]
        elem = default[0] if default else ""
        return tuple(_parse_scalar(x, elem) for x in items)
    return _parse_scalar(raw, default)


def parse_config_text(text, config=None):
    """Parse dotted key=value lines into a RunConfig.

    Blank lines and lines starting with # are skipped. Unknown sections or
    keys raise ConfigError.
    """
    cfg = config or RunConfig()
    sections = {f.name: getattr(cfg, f.name) for f in fields(cfg)}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key=value, got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        sec_name, _, field_name = key.partition(".")
        if not field_name or sec_name not in sections:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        section = sections[sec_name]
        defaults = {f.name: getattr(section, f.name) for f in fields(section)}
        if field_name not in defaults:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        try:
            value = _parse_value(raw, defaults[field_name])
        except ConfigError as e:
            raise ConfigError(f"line {lineno}: {key}: {e}") from None
        setattr(section, field_name, value)
    return cfg


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e.strerror}") from None
    return parse_config_text(text)


def config_echo_text(cfg):
    lines = [f"# resolved configuration (smart_har {__version__})"]
    for f in fields(cfg):
        section = getattr(cfg, f.name)
        for sf in fields(section):
            value = getattr(section, sf.name)
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            lines.append(f"{f.name}.{sf.name} = {value}")
    return "\n".join(lines) + "\n"


def write_echo(cfg, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config_echo.txt"), "w") as fh:
        fh.write(config_echo_text(cfg))


def _load_dataset(cfg):
    root = cfg.data.root
    if not os.path.isdir(root):
        raise DataError(f"dataset directory not found: {root}")
    dataset = read_dataset(root)
    if not os.path.isfile(os.path.join(root, "splits.txt")):
        raise DataError(f"missing splits file under {root}")
    splits = read_splits(root)
    return dataset, splits


def _model_config_for(cfg, dataset):
    mc = ModelConfig(**vars(cfg.model))
    mc.H = dataset[0].depth.shape[1]
    mc.W = dataset[0].depth.shape[2]
    return mc.normalized()


def _init_rng(seed):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(5,)))


def cmd_generate(cfg, out_dir, log):
    cfg.generator.validate()
    root = out_dir or cfg.data.root
    dataset = generate_dataset(cfg.generator)
    splits = make_splits(dataset, protocol=cfg.data.protocol,
                         seed=cfg.data.split_seed, fractions=cfg.data.fractions)
    write_dataset(dataset, root, cfg.generator.echo())
    write_splits(splits, root)
    write_echo(cfg, root)
    log(f"wrote {len(dataset)} sequences to {root}")
    return 0


def _train_one(cfg, out_dir, log, overrides=None):
    dataset, splits = _load_dataset(cfg)
    mc = _model_config_for(cfg, dataset)
    if overrides:
        mc = ModelConfig(**{**vars(mc), **overrides}).normalized()
    features = prepare_inputs(dataset, mc)
    model = SmartModel(_init_rng(cfg.train.seed), mc)
    result = train(model, features, splits, cfg.train, out_dir=out_dir, log=log)
    return model, features, splits, mc, result


def cmd_train(cfg, out_dir, log):
    out_dir = out_dir or "runs/train"
    write_echo(cfg, out_dir)
    result = _train_one(cfg, out_dir, log)[-1]
    log(f"best epoch {result.best_epoch} val macro F1 "
        f"{result.best_metric:.4f}; checkpoint at {result.checkpoint_path}")
    return 0


def cmd_evaluate(cfg, out_dir, log):
    out_dir = out_dir or "runs/evaluate"
    dataset, splits = _load_dataset(cfg)
    mc = _model_config_for(cfg, dataset)
    ckpt = cfg.eval.checkpoint or os.path.join(out_dir, "best.ckpt")
    if not os.path.isfile(ckpt):
        raise DataError(f"checkpoint not found: {ckpt}")
    model = SmartModel(_init_rng(cfg.train.seed), mc)
    load_model_checkpoint(ckpt, model)
    features = prepare_inputs(dataset, mc)
    scopes = cfg.eval.scopes or None
    results = evaluate_model(model, features, splits,
                             batch_size=cfg.eval.batch_size, scopes=scopes)
    write_echo(cfg, out_dir)
    write_metrics_csv(results, os.path.join(out_dir, "metrics.csv"))
    for scope, res in results.items():
        np.savetxt(os.path.join(out_dir, f"confusion_{scope}.csv"),
                   res["confusion"], fmt="%d", delimiter=",")
    report = render_report(results, title="Evaluation report",
                           notes=[f"checkpoint: {ckpt}",
                                  f"fusion={mc.fusion} scene_info={mc.scene_info}"])
    with open(os.path.join(out_dir, "report.md"), "w") as fh:
        fh.write(report)
    if cfg.eval.embeddings:
        ids = []
        seen = set()
        for res_ids in (splits.setting1_ids, splits.setting2_ids,
                        splits.internal_test_ids):
            for i in res_ids:
                if i not in seen:
                    seen.add(i)
                    ids.append(i)
        export_embeddings(model, features, ids,
                          os.path.join(out_dir, "embeddings.csv"),
                          batch_size=cfg.eval.batch_size)
    for scope in ("overall", "setting1", "setting2"):
        if scope in results:
            m = results[scope]["all"]
            log(f"{scope}: acc {m.accuracy:.4f} macro F1 {m.macro_f1_pooled:.4f}")
    return 0


def parse_ablation_row(row):
    """Row syntax `<fusion>/<scene_info>`, e.g. smart/both or concat/none."""
    parts = row.strip().split("/")
    if len(parts) != 2 or parts[0] not in FUSION_VARIANTS \
            or parts[1] not in SCENE_INFO_VALUES:
        raise ConfigError(
            f"bad ablation row {row!r}: expected <fusion>/<scene_info> with "
            f"fusion in {FUSION_VARIANTS} and scene_info in {SCENE_INFO_VALUES}")
    return {"fusion": parts[0], "scene_info": parts[1]}


def _run_ablation_row(args):
    cfg, out_dir, row = args
    overrides = parse_ablation_row(row)
    name = row.replace("/", "-")
    row_dir = os.path.join(out_dir, name)
    try:
        model, features, splits, mc, result = _train_one(
            cfg, row_dir, lambda msg: None, overrides)
        results = evaluate_model(model, features, splits)
        write_metrics_csv(results, os.path.join(row_dir, "metrics.csv"))
        summary = {"row": name,
                   "overall_acc": results["overall"]["all"].accuracy,
                   "overall_f1": results["overall"]["all"].macro_f1_pooled,
                   "setting1_f1": results["setting1"]["all"].macro_f1_pooled,
                   "setting2_f1": results["setting2"]["all"].macro_f1_pooled,
                   "setting2_abnormal_f1":
                       results["setting2"]["abnormal"].macro_f1_pooled,
                   "best_epoch": result.best_epoch}
        return name, summary, None, 0
    except SmartError as e:
        return name, None, f"{type(e).__name__}: {e}", e.exit_code
    except Exception as e:  # keep the sweep alive, record the failure
        return name, None, f"{type(e).__name__}: {e}", 1


def cmd_ablate(cfg, out_dir, log):
    out_dir = out_dir or "runs/ablate"
    rows = []
    seen = set()
    for row in cfg.ablate.rows:
        overrides = parse_ablation_row(row)
        mc = ModelConfig(**{**vars(cfg.model), **overrides}).normalized()
        key = (mc.fusion, mc.scene_info, mc.use_scene_module)
        if key in seen:
            log(f"skipping duplicate row {row}")
            continue
        seen.add(key)
        rows.append(row)
    _load_dataset(cfg)
    write_echo(cfg, out_dir)
    threads = max(1, int(os.environ.get("SMART_THREADS", "1")))
    jobs = [(cfg, out_dir, row) for row in rows]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(_run_ablation_row, jobs))
    else:
        outcomes = [_run_ablation_row(j) for j in jobs]
    summaries = [s for _, s, _, _ in outcomes if s is not None]
    failures = [(n, err, code) for n, _, err, code in outcomes if err]
    summaries.sort(key=lambda s: -s["overall_f1"])
    summary_path = os.path.join(out_dir, "summary.csv")
    with open(summary_path, "w") as fh:
        cols = ("row", "overall_acc", "overall_f1", "setting1_f1",
                "setting2_f1", "setting2_abnormal_f1", "best_epoch")
        fh.write(",".join(cols) + "\n")
        for s in summaries:
            fh.write(",".join(f"{s[c]:.6f}" if isinstance(s[c], float)
                              else str(s[c]) for c in cols) + "\n")
    with open(os.path.join(out_dir, "report.md"), "w") as fh:
        fh.write(render_ablation_report(summaries, failures))
    for s in summaries:
        log(f"{s['row']:24s} overall F1 {s['overall_f1']:.4f} "
            f"setting2 F1 {s['setting2_f1']:.4f}")
    for name, err, _ in failures:
        log(f"FAILED {name}: {err}")
    if failures:
        return failures[0][2]
    return 0


def render_ablation_report(summaries, failures=()):
    lines = ["# Ablation sweep", "",
             "| row | overall Acc | overall F_m | setting1 F_m "
             "| setting2 F_m | setting2 abnormal F_m |",
             "|---|---|---|---|---|---|"]
    for s in summaries:
        lines.append(
            f"| {s['row']} | {100 * s['overall_acc']:.2f} "
            f"| {100 * s['overall_f1']:.2f} | {100 * s['setting1_f1']:.2f} "
            f"| {100 * s['setting2_f1']:.2f} "
            f"| {100 * s['setting2_abnormal_f1']:.2f} |")
    lines.append("")
    lines.append("Rows sorted by overall F_m, scores in percent.")
    for name, err, _ in failures:
        lines.append(f"- FAILED {name}: {err}")
    lines.append("")
    return "\n".join(lines)


def cmd_report(cfg, out_dir, log):
    out_dir = out_dir or "."
    summary_path = os.path.join(out_dir, "summary.csv")
    metrics_path = os.path.join(out_dir, "metrics.csv")
    if os.path.isfile(summary_path):
        summaries = []
        with open(summary_path) as fh:
            header = fh.readline().strip().split(",")
            for line in fh:
                vals = line.strip().split(",")
                row = dict(zip(header, vals))
                for k in row:
                    if k != "row":
                        row[k] = float(row[k])
                summaries.append(row)
        with open(os.path.join(out_dir, "report.md"), "w") as fh:
            fh.write(render_ablation_report(summaries))
        log(f"rebuilt ablation report for {len(summaries)} rows")
        return 0
    if os.path.isfile(metrics_path):
        from .metrics_report import rebuild_report_from_csv
        report = rebuild_report_from_csv(metrics_path)
        with open(os.path.join(out_dir, "report.md"), "w") as fh:
            fh.write(report)
        log("rebuilt evaluation report")
        return 0
    raise DataError(f"no summary.csv or metrics.csv under {out_dir}")


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "ablate": cmd_ablate,
    "report": cmd_report,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="smart",
        description="Scene-motion-aware action recognition on synthetic data.")
    parser.add_argument("--version", action="version",
                        version=f"smart_har {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to config file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override the run seed (generator seed for "
                            "generate, training seed otherwise)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    log = lambda msg: print(msg, flush=True)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if args.command == "generate":
                cfg.generator.seed = args.seed
            else:
                cfg.train.seed = args.seed
        return COMMANDS[args.command](cfg, args.out, log)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return 3
    except NumericError as e:
        print(f"numeric error: {e}", file=sys.stderr)
        return 4
    except SmartError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except Exception:
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
