"""Training loop, learning-rate schedule, checkpoints, and history.

Batches are shuffled per epoch from streams derived off the training seed,
so a run is reproducible end to end. Model selection tracks validation
macro F1 (pooled mode); the learning rate drops by a fixed factor after
`patience` epochs without improvement and the run stops early once the
allowed number of reductions is exhausted and the metric still does not
improve. Checkpoints are a small self-describing binary container holding
named float64 tensors (model parameters and optimizer moments) behind a
key=value text header.
"""

import csv
import os
import struct
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import DataFormatError, NumericError
from .fusion import collate
from .metrics_report import compute_metrics, predict_ids
from .nn import AdamW
from .nn import functional as F

CHECKPOINT_MAGIC = b"SMCK"
CHECKPOINT_VERSION = "1"
HISTORY_FIELDS = ("epoch", "train_loss", "val_loss", "val_macro_f1", "lr")


@dataclass
class TrainConfig:
    lr: float = 1e-3
    batch_size: int = 16
    max_epochs: int = 60
    patience: int = 5
    lr_factor: float = 0.1
    lr_floor: float = 1e-6
    max_reductions: int = 3
    weight_decay: float = 5e-4
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    seed: int = 0

    def validate(self):
        from .errors import ConfigError
        if self.lr <= 0 or self.batch_size < 1 or self.max_epochs < 1:
            raise ConfigError("lr must be positive, batch_size and "
                              "max_epochs at least 1")
        if not (0.0 < self.lr_factor < 1.0):
            raise ConfigError("lr_factor must lie in (0, 1)")
        if self.patience < 1 or self.max_reductions < 0:
            raise ConfigError("patience must be >= 1, max_reductions >= 0")


class PlateauScheduler:
    """Reduce-on-plateau with a bounded number of reductions.

    step(metric) is called once per epoch with the validation metric
    (higher is better) and returns (lr, stop). After `patience` epochs
    without improvement the rate is multiplied by `factor` (never below
    `floor`); when reductions are used up the next full plateau stops the
    run instead.
    """

    def __init__(self, lr, factor=0.1, patience=5, floor=1e-6, max_reductions=3):
        self.lr = lr
        self.factor = factor
        self.patience = patience
        self.floor = floor
        self.max_reductions = max_reductions
        self.best = -np.inf
        self.since = 0
        self.reductions = 0

    def step(self, metric):
        if metric > self.best:
            self.best = metric
            self.since = 0
            return self.lr, False
        self.since += 1
        if self.since >= self.patience:
            if self.reductions >= self.max_reductions:
                return self.lr, True
            self.lr = max(self.lr * self.factor, self.floor)
            self.reductions += 1
            self.since = 0
        return self.lr, False


def batch_loss(model, batch, force_no_scene=False):
    """Forward-only loss for monitoring; no gradients touched."""
    logits, gz, _ = model.forward(batch, force_no_scene)
    loss, _ = F.cross_entropy(logits, batch["labels"])
    loss = float(loss)
    if gz is not None:
        bce, _ = F.binary_cross_entropy_with_logit(
            gz[:, 0], batch["scene_labels"].astype(np.float64))
        loss += float(bce)
    return loss


def _mean_loss_over(model, features, ids, batch_size, force_no_scene):
    total, count = 0.0, 0
    for start in range(0, len(ids), batch_size):
        chunk = ids[start:start + batch_size]
        batch = collate(features, chunk)
        total += batch_loss(model, batch, force_no_scene) * len(chunk)
        count += len(chunk)
    return total / count if count else 0.0


def config_echo(prefix, cfg):
    """Flatten a config dataclass into `prefix.field=value` header entries."""
    out = {}
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ",".join(str(x) for x in v)
        out[f"{prefix}.{f.name}"] = str(v)
    return out


@dataclass
class TrainResult:
    history: list
    best_epoch: int
    best_metric: float
    stopped_early: bool
    checkpoint_path: str = ""


def train(model, features, splits, config: TrainConfig, out_dir=None,
          force_no_scene=False, log=None):
    """Fit the model on the train split, selecting on validation macro F1.

    Returns a TrainResult; the model is left holding the best parameters.
    When out_dir is given, best.ckpt and history.csv are written there.
    """
    config.validate()
    train_ids = list(splits.train_ids)
    val_ids = list(splits.val_ids)
    if not train_ids or not val_ids:
        raise DataFormatError("train and val splits must both be non-empty")
    params = model.param_dict()
    opt = AdamW(params, lr=config.lr, betas=config.betas, eps=config.eps,
                weight_decay=config.weight_decay)
    sched = PlateauScheduler(config.lr, config.lr_factor, config.patience,
                             config.lr_floor, config.max_reductions)
    best_metric = -np.inf
    best_epoch = 0
    best_tensors = None
    history = []
    stopped = False
    for epoch in range(1, config.max_epochs + 1):
        rng = np.random.default_rng(np.random.SeedSequence(
            config.seed, spawn_key=(4, epoch)))
        order = rng.permutation(len(train_ids))
        epoch_loss, seen = 0.0, 0
        for start in range(0, len(order), config.batch_size):
            idx = order[start:start + config.batch_size]
            batch = collate(features, [train_ids[i] for i in idx])
            model.zero_grad()
            loss, _ = model.loss_and_grads(batch, force_no_scene)
            if not np.isfinite(loss):
                raise NumericError(
                    f"non-finite training loss at epoch {epoch}, "
                    f"batch {start // config.batch_size}")
            opt.step()
            epoch_loss += loss * len(idx)
            seen += len(idx)
        train_loss = epoch_loss / seen
        val_loss = _mean_loss_over(model, features, val_ids,
                                   config.batch_size, force_no_scene)
        if not np.isfinite(val_loss):
            raise NumericError(f"non-finite validation loss at epoch {epoch}")
        y_true, y_pred = predict_ids(model, features, val_ids,
                                     config.batch_size, force_no_scene)
        val_f1 = compute_metrics(y_true, y_pred).macro_f1_pooled
        history.append({"epoch": epoch, "train_loss": train_loss,
                        "val_loss": val_loss, "val_macro_f1": val_f1,
                        "lr": opt.lr})
        if log:
            log(f"epoch {epoch:3d} train {train_loss:.4f} val {val_loss:.4f} "
                f"f1 {val_f1:.4f} lr {opt.lr:.2e}")
        if val_f1 > best_metric:
            best_metric = val_f1
            best_epoch = epoch
            best_tensors = {k: p.value.copy() for k, p in params.items()}
        new_lr, stop = sched.step(val_f1)
        opt.lr = new_lr
        if stop:
            stopped = True
            break
    if best_tensors is not None:
        for k, p in params.items():
            p.value[...] = best_tensors[k]
    result = TrainResult(history=history, best_epoch=best_epoch,
                         best_metric=float(best_metric), stopped_early=stopped)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        ckpt = os.path.join(out_dir, "best.ckpt")
        header = {"version": CHECKPOINT_VERSION, "epoch": str(best_epoch),
                  "val_macro_f1": f"{best_metric:.10f}"}
        header.update(config_echo("train", config))
        if getattr(model, "config", None) is not None:
            header.update(config_echo("model", model.config))
        tensors = {k: p.value for k, p in params.items()}
        tensors.update(opt.state_tensors())
        save_checkpoint(ckpt, header, tensors)
        write_history(os.path.join(out_dir, "history.csv"), history)
        result.checkpoint_path = ckpt
    return result


def save_checkpoint(path, header, tensors):
    """Binary container: magic, text header, then named float64 tensors."""
    head = "".join(f"{k}={v}\n" for k, v in header.items()).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(head)))
        fh.write(head)
        fh.write(struct.pack("<I", len(tensors)))
        for name, arr in tensors.items():
            arr = np.asarray(arr, dtype="<f8")
            nb = name.encode("utf-8")
            fh.write(struct.pack("<H", len(nb)))
            fh.write(nb)
            fh.write(struct.pack("<B", arr.ndim))
            for dim in arr.shape:
                fh.write(struct.pack("<I", dim))
            fh.write(arr.tobytes())


def load_checkpoint(path):
    """Returns (header dict, tensor dict). Raises DataFormatError on damage."""
    def need(fh, n, what):
        buf = fh.read(n)
        if len(buf) != n:
            raise DataFormatError(f"checkpoint truncated while reading {what}")
        return buf

    with open(path, "rb") as fh:
        if need(fh, 4, "magic") != CHECKPOINT_MAGIC:
            raise DataFormatError("not a checkpoint file (bad magic)")
        (hlen,) = struct.unpack("<I", need(fh, 4, "header length"))
        header = {}
        for line in need(fh, hlen, "header").decode("utf-8").splitlines():
            if line:
                k, _, v = line.partition("=")
                header[k] = v
        if header.get("version") != CHECKPOINT_VERSION:
            raise DataFormatError(
                f"unsupported checkpoint version {header.get('version')!r}")
        (count,) = struct.unpack("<I", need(fh, 4, "tensor count"))
        tensors = {}
        for _ in range(count):
            (nlen,) = struct.unpack("<H", need(fh, 2, "name length"))
            name = need(fh, nlen, "name").decode("utf-8")
            (ndim,) = struct.unpack("<B", need(fh, 1, "rank"))
            shape = tuple(struct.unpack("<I", need(fh, 4, "dim"))[0]
                          for _ in range(ndim))
            nbytes = int(np.prod(shape, dtype=np.int64)) * 8 if shape else 8
            data = need(fh, nbytes, f"tensor {name}")
            tensors[name] = np.frombuffer(data, dtype="<f8").reshape(shape).copy()
        if fh.read(1):
            raise DataFormatError("trailing bytes after last tensor")
    return header, tensors


def load_model_checkpoint(path, model, optimizer=None):
    """Restore model parameters (and optimizer state when given)."""
    header, tensors = load_checkpoint(path)
    params = model.param_dict()
    missing = sorted(set(params) - set(tensors))
    if missing:
        raise DataFormatError(f"checkpoint missing parameters: {missing[:5]}")
    for k, p in params.items():
        if tensors[k].shape != p.value.shape:
            raise DataFormatError(
                f"shape mismatch for {k}: checkpoint {tensors[k].shape}, "
                f"model {p.value.shape}")
        p.value[...] = tensors[k]
    if optimizer is not None:
        optimizer.load_state_tensors(tensors)
    return header


def write_history(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=HISTORY_FIELDS)
        writer.writeheader()
        for r in rows:
            writer.writerow({
                "epoch": r["epoch"],
                "train_loss": f"{r['train_loss']:.8f}",
                "val_loss": f"{r['val_loss']:.8f}",
                "val_macro_f1": f"{r['val_macro_f1']:.8f}",
                "lr": f"{r['lr']:.8g}",
            })


def read_history(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != HISTORY_FIELDS:
            raise DataFormatError(f"unexpected history columns in {path}")
        rows = []
        for r in reader:
            rows.append({"epoch": int(r["epoch"]),
                         "train_loss": float(r["train_loss"]),
                         "val_loss": float(r["val_loss"]),
                         "val_macro_f1": float(r["val_macro_f1"]),
                         "lr": float(r["lr"])})
    return rows
