import numpy as np
import pytest
import torch

from bridge.model import Bridge, load_initial_weights
from cge.model import CodeGraphEncoder
from tests.conftest import tiny_config
from utils.checkpoint import load_checkpoint, read_manifest, save_checkpoint, state_checksum
from utils.exceptions import FormatError, NonFiniteLoss
from utils.seeding import derive_seed
from utils.training import EarlyStopping, LossTrace, WarmupPlateauSchedule, check_finite, minibatches


class TestCheckpoint:
    def test_save_and_load(self, tmp_path, config):
        encoder = CodeGraphEncoder.from_config(config)
        save_checkpoint(encoder, tmp_path / "cge", "cge", config.to_dict(), extra={"note": "x"})
        restored = CodeGraphEncoder.from_config(config)
        manifest = load_checkpoint(restored, tmp_path / "cge", kind="cge")
        assert manifest["extra"] == {"note": "x"}
        assert state_checksum(restored.state_dict()) == state_checksum(encoder.state_dict())

    def test_kind_mismatch(self, tmp_path, config):
        encoder = CodeGraphEncoder.from_config(config)
        save_checkpoint(encoder, tmp_path / "cge", "cge", {})
        with pytest.raises(FormatError):
            load_checkpoint(CodeGraphEncoder.from_config(config), tmp_path / "cge", kind="bridge")

    def test_shape_mismatch(self, tmp_path, config):
        save_checkpoint(CodeGraphEncoder.from_config(config), tmp_path / "cge", "cge", {})
        wider = CodeGraphEncoder.from_config(tiny_config(**{"cge.hidden": 32}))
        with pytest.raises(FormatError):
            load_checkpoint(wider, tmp_path / "cge")

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(FormatError):
            read_manifest(tmp_path)

    def test_manifest_records_tensors(self, tmp_path, config):
        encoder = CodeGraphEncoder.from_config(config)
        save_checkpoint(encoder, tmp_path / "cge", "cge", {})
        names = [entry["name"] for entry in read_manifest(tmp_path / "cge")["tensors"]]
        assert names == list(encoder.state_dict())

    def test_partial_initial_weights(self, tmp_path, config):
        source = Bridge.from_config(tiny_config(**{"bridge.queries": 8}))
        save_checkpoint(source, tmp_path / "bridge", "bridge", {})
        target = Bridge.from_config(config)
        loaded = load_initial_weights(target, tmp_path / "bridge")
        assert 0 < loaded < len(target.state_dict())
        assert torch.equal(target.lm_head.weight, source.lm_head.weight)
        assert target.query_tokens.shape == (4, 16)


class TestEarlyStopping:
    def test_stops_after_patience(self):
        stopper = EarlyStopping(patience=2)
        decisions = [stopper.update(v, e) for e, v in enumerate([3.0, 2.0, 2.5, 2.6])]
        assert decisions == [False, False, False, True]
        assert stopper.best_epoch == 1
        assert stopper.best == 2.0

    def test_improvement_resets(self):
        stopper = EarlyStopping(patience=2)
        for epoch, value in enumerate([3.0, 3.1, 2.0, 2.1]):
            assert not stopper.update(value, epoch)
        assert not stopper.improved_last


class TestSchedule:
    def _optimizer(self):
        return torch.optim.SGD([torch.nn.Parameter(torch.zeros(1))], lr=0.0)

    def test_linear_warmup(self):
        schedule = WarmupPlateauSchedule(self._optimizer(), 1.0, warmup_steps=4)
        seen = [schedule.lr]
        for _ in range(4):
            schedule.step_batch()
            seen.append(schedule.lr)
        assert seen == pytest.approx([0.25, 0.5, 0.75, 1.0, 1.0])

    def test_plateau_halves(self):
        schedule = WarmupPlateauSchedule(self._optimizer(), 1.0, warmup_steps=0, patience=0, factor=0.5)
        schedule.step_epoch(1.0)
        assert schedule.lr == 1.0
        schedule.step_epoch(1.0)
        assert schedule.lr == pytest.approx(0.5)

    def test_plateau_waits_for_warmup(self):
        schedule = WarmupPlateauSchedule(self._optimizer(), 1.0, warmup_steps=10, patience=0)
        for _ in range(3):
            schedule.step_epoch(1.0)
        assert schedule.lr == pytest.approx(0.1)


class TestTrainingHelpers:
    def test_non_finite_loss(self):
        with pytest.raises(NonFiniteLoss):
            check_finite(torch.tensor(float("nan")), "epoch 0 batch 3")
        check_finite(torch.tensor(1.5), "fine")

    def test_minibatches_cover_once(self):
        batches = minibatches(10, 3, np.random.default_rng(0))
        assert [len(b) for b in batches] == [3, 3, 3, 1]
        assert sorted(i for b in batches for i in b) == list(range(10))

    def test_loss_trace(self):
        trace = LossTrace()
        trace.record(0, loss=2.0, lr=0.1)
        trace.record(1, loss=1.0, lr=0.1)
        assert trace.series("loss") == [2.0, 1.0]
        assert trace.to_dict()["epochs"][1] == {"epoch": 1, "loss": 1.0, "lr": 0.1}

    def test_derived_seeds(self):
        assert derive_seed(0, 1, 2) == derive_seed(0, 1, 2)
        assert derive_seed(0, 1, 2) != derive_seed(0, 2, 1)
        assert 0 <= derive_seed(7) < 2**32
