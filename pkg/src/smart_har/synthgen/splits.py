"""Split protocol: train pool from subjects A/B/C in scene I split 7:2:1,
subject D in scene I held out as setting 1, scenes II and III held out as
setting 2.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ProtocolError
from .actions import (PROTOCOL_PAIRS, SETTING1_SUBJECT, TRAIN_POOL_SUBJECTS,
                      TRAIN_SCENE)


@dataclass
class SplitSpec:
    train_ids: list
    val_ids: list
    internal_test_ids: list
    setting1_ids: list
    setting2_ids: list

    def all_lists(self):
        return {
            "train": self.train_ids,
            "val": self.val_ids,
            "internal_test": self.internal_test_ids,
            "setting1": self.setting1_ids,
            "setting2": self.setting2_ids,
        }

    def validate(self):
        seen = set()
        for name, ids in self.all_lists().items():
            dup = seen.intersection(ids)
            if dup:
                raise ProtocolError(f"split lists overlap at ids {sorted(dup)}")
            seen.update(ids)


SETTING2_PAIRS = tuple((s, sc) for s, sc in PROTOCOL_PAIRS if sc != TRAIN_SCENE)


def make_splits(dataset, protocol="table1", seed=0, fractions=(0.7, 0.2, 0.1)):
    if protocol == "table1":
        return _table1_splits(dataset, seed)
    if protocol == "random":
        return _random_splits(dataset, seed, fractions)
    raise ProtocolError(f"unknown split protocol {protocol!r}")


def _table1_splits(dataset, seed):
    pairs_present = {(s.subject, s.scene) for s in dataset}
    allowed = set(PROTOCOL_PAIRS)
    stray = pairs_present - allowed
    if stray:
        raise ProtocolError(
            f"dataset contains subject-scene pairs outside the protocol: {sorted(stray)}")
    required = ([(s, TRAIN_SCENE) for s in TRAIN_POOL_SUBJECTS]
                + [(SETTING1_SUBJECT, TRAIN_SCENE)] + list(SETTING2_PAIRS))
    missing = [p for p in required if p not in pairs_present]
    if missing:
        raise ProtocolError(f"dataset lacks required subject-scene pairs: {missing}")

    pool = sorted(s.sequence_id for s in dataset
                  if s.scene == TRAIN_SCENE and s.subject in TRAIN_POOL_SUBJECTS)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(3,)))
    order = [pool[i] for i in rng.permutation(len(pool))]
    n = len(order)
    n_val = int(np.floor(0.2 * n))
    n_test = int(np.floor(0.1 * n))
    n_train = n - n_val - n_test
    split = SplitSpec(
        train_ids=sorted(order[:n_train]),
        val_ids=sorted(order[n_train:n_train + n_val]),
        internal_test_ids=sorted(order[n_train + n_val:]),
        setting1_ids=sorted(s.sequence_id for s in dataset
                            if s.scene == TRAIN_SCENE and s.subject == SETTING1_SUBJECT),
        setting2_ids=sorted(s.sequence_id for s in dataset if s.scene != TRAIN_SCENE),
    )
    split.validate()
    return split


def _random_splits(dataset, seed, fractions):
    if len(fractions) != 3 or abs(sum(fractions) - 1.0) > 1e-9:
        raise ProtocolError("random protocol needs three fractions summing to 1")
    ids = sorted(s.sequence_id for s in dataset)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(3,)))
    order = [ids[i] for i in rng.permutation(len(ids))]
    n = len(order)
    n_val = int(np.floor(fractions[1] * n))
    n_test = int(np.floor(fractions[2] * n))
    n_train = n - n_val - n_test
    split = SplitSpec(
        train_ids=sorted(order[:n_train]),
        val_ids=sorted(order[n_train:n_train + n_val]),
        internal_test_ids=sorted(order[n_train + n_val:]),
        setting1_ids=[],
        setting2_ids=[],
    )
    split.validate()
    return split
