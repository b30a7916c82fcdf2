import json
import math

import numpy as np
import pytest

from gemmine.autodiff import Tensor, add, backward, mul, scale
from gemmine.masking import NetworkSpec, init_weights
from gemmine.optim import Adam, SgdMomentum, make_optimizer, parse_optimizer
from gemmine.trainer import (
    Cosine,
    EpochRecord,
    MultiStep,
    RunReport,
    TrainConfig,
    batch_indices,
    evaluate,
    finetune,
    lr_at,
    run_masked_epoch,
)
from gemmine.masking import STREAM_BATCHES, stream_rng


def test_lr_multistep_example():
    cfg = TrainConfig(epochs=150, lr=0.1, schedule=MultiStep(milestones=(80, 120)))
    assert lr_at(cfg, 100) == pytest.approx(0.01)
    assert lr_at(cfg, 10) == pytest.approx(0.1)
    assert lr_at(cfg, 130) == pytest.approx(0.001)


def test_lr_cosine_boundaries():
    cfg = TrainConfig(epochs=200, lr=0.4, schedule=Cosine())
    assert lr_at(cfg, 0) == 0.4
    final = lr_at(cfg, 199)
    assert final == pytest.approx(0.4 * 0.5 * (1 + math.cos(math.pi * 199 / 200)))
    assert final < 1e-4


def test_milestones_must_increase_within_range():
    with pytest.raises(ValueError):
        TrainConfig(epochs=100, schedule=MultiStep(milestones=(50, 50)))
    with pytest.raises(ValueError):
        TrainConfig(epochs=100, schedule=MultiStep(milestones=(50, 120)))


def test_single_weight_hand_update():
    # 0.5 * (w*x - y)^2 with w=1, x=2, y=0 and lr=0.1: one step gives w=0.6
    w = np.array([1.0])
    opt = make_optimizer(SgdMomentum(), [w])
    leaf = Tensor(w, requires_grad=True)
    diff = mul(leaf, Tensor(np.array([2.0])))
    loss = scale(add(mul(diff, diff), Tensor(np.array([0.0]))), 0.5)
    backward(loss)
    opt.step([w], [leaf.grad], lr=0.1)
    assert w[0] == pytest.approx(0.6, abs=0.0)


def test_parse_optimizer_forms():
    assert parse_optimizer("sgd") == SgdMomentum()
    assert parse_optimizer("sgd:0.8") == SgdMomentum(momentum=0.8)
    assert parse_optimizer("adam") == Adam()
    assert parse_optimizer("adam:0.5,0.9,1e-6") == Adam(beta1=0.5, beta2=0.9, eps=1e-6)
    with pytest.raises(ValueError):
        parse_optimizer("rmsprop")


def test_evaluate_perfect_and_chance_and_zero():
    # logits already argmax-correct for every row
    weights = [np.eye(3), np.eye(3)]
    x = np.eye(3)
    y = np.array([0, 1, 2])
    _, acc = evaluate(weights, x, y)
    assert acc == 1.0

    # all-zero network: uniform logits, loss ln(k), argmax picks class 0
    k = 4
    zero_net = [np.zeros((5, 3)), np.zeros((k, 5))]
    xs = np.random.default_rng(0).standard_normal((8, 3))
    ys = np.array([0, 1, 2, 3] * 2)
    loss, acc = evaluate(zero_net, xs, ys)
    assert loss == pytest.approx(math.log(k), rel=1e-12)
    assert acc == pytest.approx(1 / k)


def test_finetune_dense_mask_matches_plain_training(blobs):
    spec = NetworkSpec((2, 8, 2))
    weights = init_weights(spec, "scaled_normal", seed=0)
    mask = [np.ones_like(w) for w in weights]
    cfg = TrainConfig(epochs=3, batch_size=16, lr=0.1, seed=9)
    trained, _ = finetune(weights, mask, blobs, cfg)

    # reference loop: no masking anywhere, same batch stream and optimizer
    ref = [w.copy() for w in weights]
    opt = make_optimizer(cfg.optimizer, ref)
    rng = stream_rng(cfg.seed, STREAM_BATCHES)
    from gemmine.autodiff import linear, relu, softmax_cross_entropy

    for epoch in range(cfg.epochs):
        lr = lr_at(cfg, epoch)
        for idx in batch_indices(blobs.train_x.shape[0], cfg.batch_size, rng):
            leaves = [Tensor(w, requires_grad=True) for w in ref]
            logits = linear(relu(linear(Tensor(blobs.train_x[idx]), leaves[0])), leaves[1])
            loss = softmax_cross_entropy(logits, blobs.train_y[idx])
            backward(loss)
            opt.step(ref, [l.grad for l in leaves], lr)
    for a, b in zip(trained, ref):
        assert a.tobytes() == b.tobytes()


def test_finetune_masked_weights_stay_zero(blobs):
    spec = NetworkSpec((2, 10, 2))
    weights = init_weights(spec, "scaled_normal", seed=1)
    rng = np.random.default_rng(0)
    mask = [(rng.random(w.shape) < 0.5).astype(float) for w in weights]
    cfg = TrainConfig(epochs=4, batch_size=16, lr=0.2, seed=2)
    trained, _ = finetune(weights, mask, blobs, cfg)
    for w, m in zip(trained, mask):
        assert np.all(w[m == 0.0] == 0.0)
        assert np.count_nonzero(w * (1.0 - m)) == 0


def test_finetune_adam_respects_mask(blobs):
    spec = NetworkSpec((2, 8, 2))
    weights = init_weights(spec, "scaled_normal", seed=3)
    mask = [(np.random.default_rng(1).random(w.shape) < 0.4).astype(float) for w in weights]
    cfg = TrainConfig(epochs=2, batch_size=16, lr=0.01, optimizer=Adam(), seed=2)
    trained, _ = finetune(weights, mask, blobs, cfg)
    for w, m in zip(trained, mask):
        assert np.all(w[m == 0.0] == 0.0)


def test_finetune_rejects_empty_mask(blobs):
    spec = NetworkSpec((2, 4, 2))
    weights = init_weights(spec, "scaled_normal", seed=0)
    with pytest.raises(ValueError, match="mask"):
        finetune(weights, [np.zeros_like(w) for w in weights], blobs, TrainConfig(epochs=1))


def test_finetune_deterministic(blobs):
    spec = NetworkSpec((2, 8, 2))
    weights = init_weights(spec, "scaled_normal", seed=5)
    mask = [np.ones_like(w) for w in weights]
    cfg = TrainConfig(epochs=2, batch_size=16, lr=0.1, seed=7)
    a, _ = finetune(weights, mask, blobs, cfg)
    b, _ = finetune(weights, mask, blobs, cfg)
    for x, y in zip(a, b):
        assert x.tobytes() == y.tobytes()


def test_final_loss_not_worse_than_initial_across_seeds(blobs):
    spec = NetworkSpec((2, 10, 2))
    for seed in (0, 1, 2):
        weights = init_weights(spec, "scaled_normal", seed=seed)
        mask = [np.ones_like(w) for w in weights]
        cfg = TrainConfig(epochs=5, batch_size=16, lr=0.1, seed=seed)
        _, report = finetune(weights, mask, blobs, cfg)
        assert report.records[-1].train_loss <= report.records[0].train_loss


def test_run_report_json_field_names(tmp_path):
    report = RunReport(epochs=2)
    report.records.append(EpochRecord(epoch=0, sparsity=0.5, train_loss=1.0, val_accuracy=0.5))
    report.pre_finetune_accuracy = 0.1
    report.post_finetune_accuracy = 0.9
    report.layerwise = [{"layer_index": 0, "params": 4, "kept": 2, "keep_fraction": 0.5}]
    report.warnings = ["example"]
    path = tmp_path / "report.json"
    report.save_json(path)
    payload = json.loads(path.read_text())
    assert set(payload) == {
        "epochs",
        "records",
        "pre_finetune_accuracy",
        "post_finetune_accuracy",
        "layerwise",
        "warnings",
    }
    assert payload["records"][0] == {
        "epoch": 0,
        "sparsity": 0.5,
        "train_loss": 1.0,
        "val_accuracy": 0.5,
    }


def test_metrics_csv_header(tmp_path):
    report = RunReport(epochs=1)
    report.records.append(EpochRecord(epoch=0, sparsity=0.25, train_loss=2.0, val_accuracy=0.75))
    path = tmp_path / "metrics.csv"
    report.save_metrics_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "epoch,sparsity,train_loss,val_accuracy"
    assert lines[1] == "0,0.25,2,0.75"


def test_sparsity_constant_during_finetune(blobs):
    spec = NetworkSpec((2, 8, 2))
    weights = init_weights(spec, "scaled_normal", seed=0)
    rng = np.random.default_rng(3)
    mask = [(rng.random(w.shape) < 0.6).astype(float) for w in weights]
    _, report = finetune(weights, mask, blobs, TrainConfig(epochs=3, batch_size=16, lr=0.1, seed=0))
    values = {r.sparsity for r in report.records}
    assert len(values) == 1


def test_run_masked_epoch_reports_mean_loss(blobs):
    spec = NetworkSpec((2, 6, 2))
    weights = [w.copy() for w in init_weights(spec, "scaled_normal", seed=0)]
    mask = [np.ones_like(w) for w in weights]
    opt = make_optimizer(SgdMomentum(), weights)
    rng = stream_rng(0, STREAM_BATCHES)
    loss = run_masked_epoch(weights, mask, blobs.train_x, blobs.train_y, 16, opt, 0.05, rng)
    assert math.isfinite(loss) and loss > 0.0
