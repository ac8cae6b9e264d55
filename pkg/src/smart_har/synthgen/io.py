"""On-disk dataset format.

Layout: <root>/seq_<id>/{skeleton.f32, depth.f32, mask.u8, meta.txt} plus
<root>/manifest.txt (config echo + sequence id list) and <root>/splits.txt.
Arrays are raw little-endian row-major payloads; sidecars are UTF-8
key:value lines. Format version is "1".
"""

import os

import numpy as np

from ..errors import DataFormatError
from .generator import SequenceSample

FORMAT_VERSION = "1"


def _write_kv(path, pairs):
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in pairs:
            fh.write(f"{key}:{value}\n")


def _read_kv(path):
    out = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line:
                    continue
                if ":" not in line:
                    raise DataFormatError(f"malformed line in {path}: {line!r}")
                key, value = line.split(":", 1)
                out[key] = value
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    return out


def _seq_dir(root, sequence_id):
    return os.path.join(root, f"seq_{sequence_id}")


def write_sequence(sample: SequenceSample, root):
    d = _seq_dir(root, sample.sequence_id)
    os.makedirs(d, exist_ok=True)
    sample.skeleton.astype("<f4").tofile(os.path.join(d, "skeleton.f32"))
    sample.depth.astype("<f4").tofile(os.path.join(d, "depth.f32"))
    sample.mask.astype(np.uint8).tofile(os.path.join(d, "mask.u8"))
    H, W = sample.depth.shape[1], sample.depth.shape[2]
    _write_kv(os.path.join(d, "meta.txt"), [
        ("version", FORMAT_VERSION),
        ("sequence_id", sample.sequence_id),
        ("subject", sample.subject),
        ("scene", sample.scene),
        ("action", sample.action),
        ("scene_label", sample.scene_label),
        ("T", sample.T),
        ("H", H),
        ("W", W),
        ("N", sample.skeleton.shape[1]),
    ])


def read_sequence(root, sequence_id):
    d = _seq_dir(root, sequence_id)
    meta = _read_kv(os.path.join(d, "meta.txt"))
    if meta.get("version") != FORMAT_VERSION:
        raise DataFormatError(
            f"seq {sequence_id}: unknown format version {meta.get('version')!r}")
    try:
        T = int(meta["T"])
        H = int(meta["H"])
        W = int(meta["W"])
        N = int(meta["N"])
        action = int(meta["action"])
        scene_label = int(meta["scene_label"])
    except (KeyError, ValueError) as exc:
        raise DataFormatError(f"seq {sequence_id}: bad sidecar field: {exc}") from exc

    def load(name, dtype, shape):
        path = os.path.join(d, name)
        try:
            raw = np.fromfile(path, dtype=dtype)
        except OSError as exc:
            raise DataFormatError(f"seq {sequence_id}: cannot read {name}: {exc}") from exc
        expect = int(np.prod(shape))
        if raw.size != expect:
            raise DataFormatError(
                f"seq {sequence_id}: {name} holds {raw.size} values, "
                f"sidecar shape {shape} needs {expect}")
        return raw.reshape(shape)

    return SequenceSample(
        sequence_id=sequence_id,
        subject=meta["subject"],
        scene=meta["scene"],
        T=T,
        skeleton=load("skeleton.f32", "<f4", (T, N, 2)),
        depth=load("depth.f32", "<f4", (T, H, W)),
        mask=load("mask.u8", np.uint8, (T, H, W)),
        action=action,
        scene_label=scene_label,
    )


def write_dataset(dataset, root, config_echo=None):
    os.makedirs(root, exist_ok=True)
    for sample in dataset:
        write_sequence(sample, root)
    pairs = [("version", FORMAT_VERSION)]
    for key, value in (config_echo or {}).items():
        pairs.append((key, value))
    pairs.append(("sequences", ",".join(str(s.sequence_id) for s in dataset)))
    _write_kv(os.path.join(root, "manifest.txt"), pairs)


def read_manifest(root):
    manifest = _read_kv(os.path.join(root, "manifest.txt"))
    if manifest.get("version") != FORMAT_VERSION:
        raise DataFormatError(f"unknown manifest version {manifest.get('version')!r}")
    if "sequences" not in manifest:
        raise DataFormatError("manifest lacks a sequences line")
    return manifest


def read_dataset(root):
    manifest = read_manifest(root)
    seq = manifest["sequences"]
    ids = [int(s) for s in seq.split(",")] if seq else []
    return [read_sequence(root, i) for i in ids]


def write_splits(split, root):
    _write_kv(os.path.join(root, "splits.txt"), [
        ("train", ",".join(map(str, split.train_ids))),
        ("val", ",".join(map(str, split.val_ids))),
        ("internal_test", ",".join(map(str, split.internal_test_ids))),
        ("setting1", ",".join(map(str, split.setting1_ids))),
        ("setting2", ",".join(map(str, split.setting2_ids))),
    ])


def read_splits(root):
    from .splits import SplitSpec
    kv = _read_kv(os.path.join(root, "splits.txt"))
    lists = {}
    for key in ("train", "val", "internal_test", "setting1", "setting2"):
        if key not in kv:
            raise DataFormatError(f"splits.txt lacks the {key} list")
        lists[key] = [int(s) for s in kv[key].split(",")] if kv[key] else []
    return SplitSpec(lists["train"], lists["val"], lists["internal_test"],
                     lists["setting1"], lists["setting2"])
