"""Training loop, schedule, optimizer, checkpoint, and history contracts.

The loop is exercised on a small generated dataset with reduced model
dimensions; determinism and round-trip checks use the same tolerances the
full pipeline promises (1e-6), the scheduler and optimizer are checked
against their documented update rules directly.
"""

import numpy as np
import pytest

from smart_har.errors import ConfigError, DataFormatError, NumericError
from smart_har.fusion import ModelConfig, SmartModel, collate, prepare_inputs
from smart_har.metrics_report import compute_metrics, predict_ids
from smart_har.nn import AdamW
from smart_har.nn.core import Param
from smart_har.synthgen import GeneratorConfig, generate_dataset, make_splits
from smart_har.synthgen.splits import SplitSpec
from smart_har.training import (PlateauScheduler, TrainConfig, batch_loss,
                                load_checkpoint, load_model_checkpoint,
                                read_history, save_checkpoint, train,
                                write_history)

TINY = ModelConfig(d=8, d_k=8, d_j=6, attn_hidden=4, clip_k=2, d_emb=6,
                   d_e=3, n_keypoints=17, H=32, W=32)


def make_model(seed=21):
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(5,)))
    return SmartModel(rng, TINY)


@pytest.fixture(scope="module")
def data():
    cfg = GeneratorConfig(clips_per_class=1, T=8, H=32, W=32)
    dataset = generate_dataset(cfg)
    splits = make_splits(dataset, protocol="table1", seed=0)
    features = prepare_inputs(dataset, TINY)
    return features, splits


@pytest.fixture(scope="module")
def trained(data, tmp_path_factory):
    features, splits = data
    out_dir = tmp_path_factory.mktemp("run")
    model = make_model()
    config = TrainConfig(lr=1e-3, batch_size=8, max_epochs=3, patience=2,
                         seed=3)
    result = train(model, features, splits, config, out_dir=str(out_dir))
    return model, config, result, out_dir


class TestTrainConfig:
    def test_defaults_validate(self):
        TrainConfig().validate()

    @pytest.mark.parametrize("kwargs", [
        dict(lr=0.0), dict(lr=-1e-3), dict(batch_size=0), dict(max_epochs=0),
        dict(lr_factor=0.0), dict(lr_factor=1.0), dict(patience=0),
        dict(max_reductions=-1),
    ])
    def test_invalid_values_rejected(self, kwargs):
        with pytest.raises(ConfigError):
            TrainConfig(**kwargs).validate()


class TestPlateauScheduler:
    def test_improving_metric_keeps_rate(self):
        sched = PlateauScheduler(1e-3, patience=5)
        for epoch in range(10):
            lr, stop = sched.step(0.1 * epoch)
            assert lr == 1e-3 and not stop

    def test_five_flat_epochs_cut_rate_tenfold(self):
        sched = PlateauScheduler(1e-3, factor=0.1, patience=5)
        sched.step(0.5)
        for _ in range(4):
            lr, stop = sched.step(0.4)
            assert lr == 1e-3 and not stop
        lr, stop = sched.step(0.4)
        assert lr == pytest.approx(1e-4) and not stop

    def test_improvement_resets_the_counter(self):
        sched = PlateauScheduler(1e-3, patience=5)
        sched.step(0.5)
        for _ in range(4):
            sched.step(0.4)
        sched.step(0.6)  # improvement within patience
        for _ in range(4):
            lr, stop = sched.step(0.4)
        assert lr == 1e-3 and not stop

    def test_rate_never_drops_below_floor(self):
        sched = PlateauScheduler(1e-6, factor=0.1, patience=2, floor=1e-6)
        sched.step(0.5)
        sched.step(0.4)
        lr, stop = sched.step(0.4)
        assert lr == 1e-6 and not stop

    def test_stops_after_reductions_are_spent(self):
        sched = PlateauScheduler(1e-3, factor=0.1, patience=2,
                                 max_reductions=1)
        sched.step(0.5)
        sched.step(0.4)
        lr, stop = sched.step(0.4)
        assert lr == pytest.approx(1e-4) and not stop
        sched.step(0.4)
        lr, stop = sched.step(0.4)
        assert stop

    def test_zero_reductions_stop_on_first_plateau(self):
        sched = PlateauScheduler(1e-3, patience=2, max_reductions=0)
        sched.step(0.5)
        sched.step(0.4)
        lr, stop = sched.step(0.4)
        assert stop and lr == 1e-3


class TestAdamW:
    def test_zero_rate_step_is_identity(self):
        p = Param(np.arange(6.0).reshape(2, 3))
        p.grad[...] = 1.7
        before = p.value.copy()
        opt = AdamW({"p": p}, lr=0.0, weight_decay=0.5)
        for _ in range(3):
            opt.step()
        np.testing.assert_array_equal(p.value, before)

    def test_decay_is_decoupled_from_gradient(self):
        # zero gradient: the only movement is lr * wd * value
        p = Param(np.array([2.0]))
        opt = AdamW({"p": p}, lr=0.1, weight_decay=0.5)
        opt.step()
        assert p.value[0] == pytest.approx(1.9, abs=1e-12)

    def test_first_step_moves_against_gradient(self):
        p = Param(np.array([0.5, -0.5]))
        p.grad[...] = np.array([3.0, -3.0])
        opt = AdamW({"p": p}, lr=1e-2, weight_decay=0.0)
        opt.step()
        assert p.value[0] < 0.5 and p.value[1] > -0.5

    def test_state_tensors_name_all_moments(self):
        p = Param(np.zeros(2))
        opt = AdamW({"p": p}, lr=1e-3)
        opt.step()
        state = opt.state_tensors()
        assert set(state) == {"adam.m.p", "adam.v.p", "adam.t"}
        assert state["adam.t"][0] == 1.0

    def test_single_sample_step_decreases_loss(self, data):
        features, splits = data
        ids = list(splits.train_ids)
        rng = np.random.default_rng(17)
        picks = rng.choice(ids, size=20, replace=len(ids) < 20)
        failures = 0
        for i, sid in enumerate(picks):
            model = make_model(seed=100 + i)
            batch = collate(features, [int(sid)])
            model.zero_grad()
            loss0, _ = model.loss_and_grads(batch)
            opt = AdamW(model.param_dict(), lr=1e-5, weight_decay=0.0)
            opt.step()
            loss1 = batch_loss(model, batch)
            failures += loss1 >= loss0
        assert failures <= 2


class TestTrainLoop:
    def test_first_epoch_loss_reproduces(self, data):
        features, splits = data
        config = TrainConfig(lr=1e-3, batch_size=8, max_epochs=1, seed=3)
        r1 = train(make_model(), features, splits, config)
        r2 = train(make_model(), features, splits, config)
        assert abs(r1.history[0]["train_loss"]
                   - r2.history[0]["train_loss"]) <= 1e-6

    def test_full_run_is_deterministic(self, data):
        features, splits = data
        config = TrainConfig(lr=1e-3, batch_size=8, max_epochs=2, seed=5)
        r1 = train(make_model(), features, splits, config)
        r2 = train(make_model(), features, splits, config)
        for h1, h2 in zip(r1.history, r2.history):
            assert h1 == h2
        assert r1.best_epoch == r2.best_epoch
        assert r1.best_metric == r2.best_metric

    def test_history_is_monotone_and_complete(self, trained):
        model, config, result, out_dir = trained
        epochs = [h["epoch"] for h in result.history]
        assert epochs == list(range(1, len(epochs) + 1))
        lrs = [h["lr"] for h in result.history]
        assert all(lr > 0 for lr in lrs)
        assert all(a >= b for a, b in zip(lrs, lrs[1:]))
        assert result.best_epoch in epochs

    def test_model_keeps_best_parameters(self, data, trained):
        features, splits = data
        model, config, result, out_dir = trained
        y_true, y_pred = predict_ids(model, features, list(splits.val_ids),
                                     config.batch_size)
        f1 = compute_metrics(y_true, y_pred).macro_f1_pooled
        assert f1 == pytest.approx(result.best_metric, abs=1e-12)

    def test_empty_split_rejected(self, data):
        features, splits = data
        empty = SplitSpec(train_ids=[], val_ids=list(splits.val_ids),
                          internal_test_ids=[], setting1_ids=[],
                          setting2_ids=[])
        with pytest.raises(DataFormatError, match="non-empty"):
            train(make_model(), features, empty, TrainConfig(max_epochs=1))

    def test_divergence_reports_epoch_and_batch(self, data):
        features, splits = data
        model = make_model()
        params = model.param_dict()
        key = next(k for k in params if k.startswith("classifier"))
        params[key].value[...] = np.inf
        config = TrainConfig(lr=1e-3, batch_size=8, max_epochs=1, seed=3)
        with np.errstate(invalid="ignore"):
            with pytest.raises(NumericError, match="epoch 1"):
                train(model, features, splits, config)

    def test_forced_no_scene_training_runs(self, data):
        features, splits = data
        config = TrainConfig(lr=1e-3, batch_size=8, max_epochs=1, seed=3)
        result = train(make_model(), features, splits, config,
                       force_no_scene=True)
        assert np.isfinite(result.history[0]["train_loss"])


class TestCheckpointing:
    def test_files_written(self, trained):
        model, config, result, out_dir = trained
        assert result.checkpoint_path == str(out_dir / "best.ckpt")
        assert (out_dir / "best.ckpt").exists()
        assert (out_dir / "history.csv").exists()

    def test_header_carries_config_echo(self, trained):
        model, config, result, out_dir = trained
        header, tensors = load_checkpoint(result.checkpoint_path)
        assert header["version"] == "1"
        assert header["epoch"] == str(result.best_epoch)
        assert float(header["val_macro_f1"]) == pytest.approx(
            result.best_metric, abs=1e-9)
        assert header["train.lr"] == str(config.lr)
        assert header["train.seed"] == str(config.seed)
        assert header["model.fusion"] == TINY.fusion
        assert header["model.d"] == str(TINY.d)

    def test_round_trip_preserves_forward(self, data, trained):
        features, splits = data
        model, config, result, out_dir = trained
        batch = collate(features, list(splits.val_ids)[:4])
        want, want_gate, _ = model.forward(batch)
        fresh = make_model(seed=99)
        load_model_checkpoint(result.checkpoint_path, fresh)
        got, got_gate, _ = fresh.forward(batch)
        assert np.max(np.abs(got - want)) <= 1e-6
        assert np.max(np.abs(got_gate - want_gate)) <= 1e-6

    def test_optimizer_state_restores(self, trained):
        model, config, result, out_dir = trained
        fresh = make_model(seed=99)
        opt = AdamW(fresh.param_dict(), lr=config.lr)
        load_model_checkpoint(result.checkpoint_path, fresh, optimizer=opt)
        assert opt.t > 0
        assert any(np.any(m != 0) for m in opt.m.values())


class TestCheckpointContainer:
    HEADER = {"version": "1", "note": "a=b=c"}

    def tensors(self):
        rng = np.random.default_rng(2)
        return {"w": rng.normal(size=(3, 2)), "b": rng.normal(size=4),
                "t": np.array(3.5)}

    def test_round_trip_exact(self, tmp_path):
        path = tmp_path / "c.ckpt"
        tensors = self.tensors()
        save_checkpoint(path, self.HEADER, tensors)
        header, loaded = load_checkpoint(path)
        assert header == self.HEADER  # '=' inside values survives
        assert set(loaded) == set(tensors)
        for k in tensors:
            np.testing.assert_array_equal(loaded[k], tensors[k])
            assert loaded[k].shape == np.asarray(tensors[k]).shape

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "c.ckpt"
        save_checkpoint(path, self.HEADER, self.tensors())
        raw = bytearray(path.read_bytes())
        raw[:4] = b"XXXX"
        path.write_bytes(bytes(raw))
        with pytest.raises(DataFormatError, match="magic"):
            load_checkpoint(path)

    def test_truncation_rejected(self, tmp_path):
        path = tmp_path / "c.ckpt"
        save_checkpoint(path, self.HEADER, self.tensors())
        raw = path.read_bytes()
        path.write_bytes(raw[:len(raw) // 2])
        with pytest.raises(DataFormatError, match="truncated"):
            load_checkpoint(path)

    def test_unknown_version_rejected(self, tmp_path):
        path = tmp_path / "c.ckpt"
        save_checkpoint(path, {"version": "9"}, self.tensors())
        with pytest.raises(DataFormatError, match="version"):
            load_checkpoint(path)

    def test_trailing_bytes_rejected(self, tmp_path):
        path = tmp_path / "c.ckpt"
        save_checkpoint(path, self.HEADER, self.tensors())
        with open(path, "ab") as fh:
            fh.write(b"\x00")
        with pytest.raises(DataFormatError, match="trailing"):
            load_checkpoint(path)

    def test_missing_parameter_rejected(self, tmp_path):
        path = tmp_path / "c.ckpt"
        model = make_model()
        tensors = {k: p.value for k, p in model.param_dict().items()}
        dropped = sorted(tensors)[0]
        del tensors[dropped]
        save_checkpoint(path, {"version": "1"}, tensors)
        with pytest.raises(DataFormatError, match="missing"):
            load_model_checkpoint(path, make_model())

    def test_shape_mismatch_rejected(self, tmp_path):
        path = tmp_path / "c.ckpt"
        model = make_model()
        tensors = {k: p.value for k, p in model.param_dict().items()}
        key = sorted(tensors)[0]
        tensors[key] = np.zeros(np.asarray(tensors[key]).size + 1)
        save_checkpoint(path, {"version": "1"}, tensors)
        with pytest.raises(DataFormatError, match="shape mismatch"):
            load_model_checkpoint(path, make_model())


class TestHistoryFile:
    ROWS = [
        {"epoch": 1, "train_loss": 2.5, "val_loss": 2.25,
         "val_macro_f1": 0.125, "lr": 1e-3},
        {"epoch": 2, "train_loss": 2.0, "val_loss": 2.125,
         "val_macro_f1": 0.25, "lr": 1e-4},
    ]

    def test_round_trip(self, tmp_path):
        path = tmp_path / "history.csv"
        write_history(path, self.ROWS)
        assert read_history(path) == self.ROWS

    def test_wrong_columns_rejected(self, tmp_path):
        path = tmp_path / "history.csv"
        path.write_text("epoch,loss\n1,2.0\n")
        with pytest.raises(DataFormatError, match="columns"):
            read_history(path)

    def test_trained_history_matches_file(self, trained):
        model, config, result, out_dir = trained
        rows = read_history(out_dir / "history.csv")
        assert len(rows) == len(result.history)
        for got, want in zip(rows, result.history):
            assert got["epoch"] == want["epoch"]
            assert got["train_loss"] == pytest.approx(want["train_loss"],
                                                      abs=1e-8)
            assert got["val_macro_f1"] == pytest.approx(want["val_macro_f1"],
                                                        abs=1e-8)
