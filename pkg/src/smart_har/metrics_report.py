"""Evaluation metrics, split-protocol scoring, and report rendering.

Accuracy comes in two definitions: plain top-1, and the one-vs-rest form
that averages per-class (TP+TN)/total over classes. Macro F1 likewise has
two modes: "pooled" applies the harmonic mean to the macro-averaged
precision and recall, "per_class" averages per-class F1 scores. Both are
reported; pooled is the default used for model selection and headline
numbers. Classes absent from the evaluated slice make precision or recall
undefined; they enter the macro average as zero and are flagged.
"""

import csv
import os
from dataclasses import dataclass, field

import numpy as np

from .fusion import collate
from .synthgen.actions import ABNORMAL_IDS, CLASSES, NUM_CLASSES

F1_MODES = ("pooled", "per_class")


def confusion_matrix(y_true, y_pred, n_classes=NUM_CLASSES):
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError("label arrays must have identical shape")
    if y_true.size and (y_true.min() < 0 or y_true.max() >= n_classes
                        or y_pred.min() < 0 or y_pred.max() >= n_classes):
        raise ValueError("labels out of range")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


def accuracy(cm):
    """Top-1 accuracy: correct predictions over total."""
    total = cm.sum()
    return float(np.trace(cm) / total) if total else 0.0


def accuracy_ovr(cm):
    """One-vs-rest accuracy: mean over classes of (TP + TN) / total."""
    total = cm.sum()
    if not total:
        return 0.0
    tp = np.diag(cm)
    fp = cm.sum(axis=0) - tp
    fn = cm.sum(axis=1) - tp
    tn = total - tp - fp - fn
    return float(np.mean((tp + tn) / total))


def precision_recall(cm, class_ids=None):
    """Per-class precision and recall with undefined flags.

    class_ids restricts which classes enter the returned arrays; counts
    still come from the full matrix. Undefined values (zero denominator)
    are reported as 0 with the class id flagged.
    """
    tp = np.diag(cm).astype(np.float64)
    pred_count = cm.sum(axis=0).astype(np.float64)
    true_count = cm.sum(axis=1).astype(np.float64)
    ids = np.arange(cm.shape[0]) if class_ids is None else np.asarray(class_ids)
    prec = np.zeros(len(ids))
    rec = np.zeros(len(ids))
    undef_p, undef_r = [], []
    for k, c in enumerate(ids):
        if pred_count[c] > 0:
            prec[k] = tp[c] / pred_count[c]
        else:
            undef_p.append(int(c))
        if true_count[c] > 0:
            rec[k] = tp[c] / true_count[c]
        else:
            undef_r.append(int(c))
    return prec, rec, undef_p, undef_r


def macro_f1(cm, mode="pooled", class_ids=None):
    if mode not in F1_MODES:
        raise ValueError(f"unknown f1 mode {mode!r}")
    prec, rec, _, _ = precision_recall(cm, class_ids)
    if mode == "pooled":
        pm, rm = float(prec.mean()), float(rec.mean())
        return 2.0 * pm * rm / (pm + rm) if pm + rm > 0 else 0.0
    denom = prec + rec
    f1 = np.where(denom > 0, 2.0 * prec * rec / np.where(denom > 0, denom, 1.0), 0.0)
    return float(f1.mean())


@dataclass
class MetricSet:
    n: int
    accuracy: float
    accuracy_ovr: float
    macro_precision: float
    macro_recall: float
    macro_f1_pooled: float
    macro_f1_per_class: float
    per_class_precision: np.ndarray = field(default_factory=lambda: np.zeros(0))
    per_class_recall: np.ndarray = field(default_factory=lambda: np.zeros(0))
    per_class_f1: np.ndarray = field(default_factory=lambda: np.zeros(0))
    undefined_precision: list = field(default_factory=list)
    undefined_recall: list = field(default_factory=list)

    def row(self):
        return {
            "n": self.n,
            "accuracy": self.accuracy,
            "accuracy_ovr": self.accuracy_ovr,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1_pooled": self.macro_f1_pooled,
            "macro_f1_per_class": self.macro_f1_per_class,
        }


def compute_metrics(y_true, y_pred, n_classes=NUM_CLASSES, class_ids=None):
    cm = confusion_matrix(y_true, y_pred, n_classes)
    prec, rec, undef_p, undef_r = precision_recall(cm, class_ids)
    denom = prec + rec
    f1 = np.where(denom > 0, 2.0 * prec * rec / np.where(denom > 0, denom, 1.0), 0.0)
    return MetricSet(
        n=int(cm.sum()),
        accuracy=accuracy(cm),
        accuracy_ovr=accuracy_ovr(cm),
        macro_precision=float(prec.mean()) if prec.size else 0.0,
        macro_recall=float(rec.mean()) if rec.size else 0.0,
        macro_f1_pooled=macro_f1(cm, "pooled", class_ids),
        macro_f1_per_class=macro_f1(cm, "per_class", class_ids),
        per_class_precision=prec,
        per_class_recall=rec,
        per_class_f1=f1,
        undefined_precision=undef_p,
        undefined_recall=undef_r,
    )


def predict_ids(model, features, ids, batch_size=32, force_no_scene=False):
    """Run the model over the given sequence ids in batches."""
    y_true, y_pred = [], []
    for start in range(0, len(ids), batch_size):
        chunk = ids[start:start + batch_size]
        batch = collate(features, chunk)
        y_pred.append(model.predict(batch, force_no_scene))
        y_true.append(batch["labels"])
    if not y_true:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    return np.concatenate(y_true), np.concatenate(y_pred)


def abnormal_metrics(y_true, y_pred):
    """Metrics over the abnormal-class slice.

    Only samples whose true label is an abnormal class are scored; the
    predictor stays 10-way, so a prediction outside the abnormal set counts
    against recall. Macro averages run over the abnormal class ids.
    """
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    keep = np.isin(y_true, ABNORMAL_IDS)
    return compute_metrics(y_true[keep], y_pred[keep],
                           class_ids=list(ABNORMAL_IDS))


EVAL_SCOPES = ("overall", "setting1", "setting2", "internal")


def evaluate_model(model, features, splits, batch_size=32, force_no_scene=False,
                   scopes=None):
    """Score the protocol scopes.

    setting1 is the unseen-subject split, setting2 the unseen-scene split,
    overall their union, internal the held-out slice of the training pool.
    Each scope carries full-vocabulary metrics plus the abnormal slice.
    With scopes=None every scope that has samples is evaluated; naming a
    scope explicitly makes an empty one an error.
    """
    from .errors import ProtocolError
    ids_by_scope = {
        "setting1": list(splits.setting1_ids),
        "setting2": list(splits.setting2_ids),
        "overall": list(splits.setting1_ids) + list(splits.setting2_ids),
        "internal": list(splits.internal_test_ids),
    }
    if scopes is None:
        requested = [s for s in EVAL_SCOPES if ids_by_scope[s]]
    else:
        unknown = [s for s in scopes if s not in ids_by_scope]
        if unknown:
            raise ProtocolError(f"unknown evaluation scopes: {unknown}")
        empty = [s for s in scopes if not ids_by_scope[s]]
        if empty:
            raise ProtocolError(f"requested scopes have no samples: {empty}")
        requested = list(scopes)
    out = {}
    for name in requested:
        y_true, y_pred = predict_ids(model, features, ids_by_scope[name],
                                     batch_size, force_no_scene)
        out[name] = {
            "all": compute_metrics(y_true, y_pred),
            "abnormal": abnormal_metrics(y_true, y_pred),
            "confusion": confusion_matrix(y_true, y_pred),
        }
    return out


def export_embeddings(model, features, ids, path, batch_size=32,
                      force_no_scene=False):
    """Write fused features Z_F (one row per sequence) to CSV."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header_done = False
        for start in range(0, len(ids), batch_size):
            chunk = ids[start:start + batch_size]
            batch = collate(features, chunk)
            bundle = model.feature_bundle(batch, force_no_scene)
            z_f = bundle["Z_F"]
            if not header_done:
                writer.writerow(["sequence_id", "label", "scene_label"]
                                + [f"z{j}" for j in range(z_f.shape[1])])
                header_done = True
            for i, sid in enumerate(chunk):
                writer.writerow([sid, int(batch["labels"][i]),
                                 int(batch["scene_labels"][i])]
                                + [f"{v:.6g}" for v in z_f[i]])


def metrics_csv_rows(results):
    rows = []
    for scope in EVAL_SCOPES:
        if scope not in results:
            continue
        for slice_name in ("all", "abnormal"):
            r = results[scope][slice_name].row()
            r = {"scope": scope, "slice": slice_name, **r}
            rows.append(r)
    return rows


def write_metrics_csv(results, path):
    rows = metrics_csv_rows(results)
    if not rows:
        return
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        for r in rows:
            writer.writerow({k: (f"{v:.6f}" if isinstance(v, float) else v)
                             for k, v in r.items()})


def rebuild_report_from_csv(path, title="Evaluation report"):
    """Re-render the markdown report from a previously written metrics CSV."""
    results = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            scope = row.pop("scope")
            slice_name = row.pop("slice")
            m = MetricSet(n=int(row.pop("n")),
                          **{k: float(v) for k, v in row.items()})
            results.setdefault(scope, {})[slice_name] = m
    return render_report(results, title=title,
                         notes=[f"rebuilt from {os.path.basename(path)}"])


def _fmt(x):
    return f"{100.0 * x:.2f}"


def render_report(results, title="Evaluation report", notes=()):
    """Markdown report over the evaluated scopes."""
    lines = [f"# {title}", ""]
    for note in notes:
        lines.append(f"- {note}")
    if notes:
        lines.append("")
    lines.append("| scope | slice | n | acc | acc(ovr) | P_m | R_m | F_m | F_m(per-class) |")
    lines.append("|---|---|---|---|---|---|---|---|---|")
    for scope in EVAL_SCOPES:
        if scope not in results:
            continue
        for slice_name in ("all", "abnormal"):
            m = results[scope][slice_name]
            lines.append(
                f"| {scope} | {slice_name} | {m.n} | {_fmt(m.accuracy)} "
                f"| {_fmt(m.accuracy_ovr)} | {_fmt(m.macro_precision)} "
                f"| {_fmt(m.macro_recall)} | {_fmt(m.macro_f1_pooled)} "
                f"| {_fmt(m.macro_f1_per_class)} |")
    lines.append("")
    lines.append("Scores in percent. F_m applies the harmonic mean to "
                 "macro precision and recall; the per-class column averages "
                 "per-class F1 instead.")
    for scope in EVAL_SCOPES:
        if scope not in results:
            continue
        undef = results[scope]["all"]
        flagged = sorted(set(undef.undefined_precision + undef.undefined_recall))
        if flagged:
            names = ", ".join(CLASSES[c].name for c in flagged)
            lines.append("")
            lines.append(f"Undefined precision or recall in scope {scope} "
                         f"for: {names} (substituted as 0).")
    lines.append("")
    return "\n".join(lines)
