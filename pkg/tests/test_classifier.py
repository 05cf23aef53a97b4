import numpy as np
import pytest

from renderwait import classifier as clf
from renderwait.errors import DegenerateDataset, EmptyDataset, TooFewApps, UninitializedModel
from renderwait.evaluation import ConfusionCounts, counts_from, evaluate, metrics
from renderwait.imaging import Frame
from renderwait.nn import checkpoint
from renderwait.nn.optim import TrainConfig
from renderwait.segmenter import DatasetEntry
from renderwait.states import Label


def _entry(app, i, label, frame=None):
    return DatasetEntry(f"{app}-c0", i, label, 0, app, frame)


def test_shape_plan_default():
    plan = dict(clf.RenderNet().shape_plan())
    assert plan["stem"] == (1, 8, 28, 48)
    assert [plan[f"block{i}"] for i in range(5)] == [
        (1, 16, 14, 24), (1, 16, 14, 24), (1, 24, 7, 12), (1, 24, 7, 12), (1, 32, 4, 6)]
    assert plan["head"] == (1,)


def test_forward_matches_plan_and_is_deterministic(rng):
    net = clf.RenderNet(seed=3)
    x = rng.random((2, 3, 56, 96)).astype(np.float32)
    assert net.forward(x).shape == (2,)
    assert np.array_equal(net.forward(x), net.forward(x))
    assert np.array_equal(clf.RenderNet(seed=3).forward(x), net.forward(x))


def test_inconsistent_blocks_rejected():
    with pytest.raises(ValueError):
        clf.RenderNet(clf.NetConfig(blocks=((8, 16, 2), (8, 16, 1))))


def test_decide_tie_goes_to_partial():
    assert clf.decide(0.5) is Label.PARTIALLY
    assert clf.decide(0.5000001) is Label.FULLY
    assert clf.decide(0.0) is Label.PARTIALLY


def test_preprocess_resizes_and_scales():
    f = Frame(np.full((448, 768, 3), 255, np.uint8))
    x = clf.preprocess(f)
    assert x.shape == (3, 56, 96) and x.dtype == np.float32
    assert np.allclose(x, 1.0)


def test_untrained_model_refuses_inference():
    with pytest.raises(UninitializedModel):
        clf.infer(clf.RenderNet(), Frame(np.zeros((56, 96, 3), np.uint8)))
    with pytest.raises(UninitializedModel):
        clf.infer(None, Frame(np.zeros((56, 96, 3), np.uint8)))


def test_split_by_app_keeps_apps_disjoint():
    entries = [_entry(f"app{a}", i, Label.FULLY) for a in range(20) for i in range(3)]
    tr, va, te = clf.split_by_app(entries, seed=4)
    apps = [{e.app_id for e in part} for part in (tr, va, te)]
    assert not (apps[0] & apps[1]) and not (apps[0] & apps[2]) and not (apps[1] & apps[2])
    assert len(apps[1]) == 2 and len(apps[2]) == 2 and len(tr) + len(va) + len(te) == 60
    assert clf.split_by_app(entries, seed=4) == (tr, va, te)


def test_split_needs_three_apps():
    with pytest.raises(TooFewApps):
        clf.split_by_app([_entry("a", 0, Label.FULLY), _entry("b", 0, Label.FULLY)])


def test_degenerate_training_data():
    f = Frame(np.zeros((56, 96, 3), np.uint8))
    with pytest.raises(DegenerateDataset):
        clf.train([_entry("a", i, Label.PARTIALLY, f) for i in range(4)])
    with pytest.raises(DegenerateDataset):
        clf.train_arrays(np.zeros((4, 3, 56, 96), np.float32), np.ones(4))


def _toy_set(n, rng):
    """Bright frames are FULLY, dark ones PARTIALLY; trivially separable."""
    y = np.arange(n) % 2
    x = np.where(y[:, None, None, None] == 1, 0.8, 0.2) + rng.normal(0, 0.05, (n, 3, 14, 24))
    return x.astype(np.float32), y.astype(np.float32)


def test_training_fits_a_separable_toy_problem(rng):
    net_cfg = clf.NetConfig(input_size=(24, 14), blocks=((8, 8, 1), (8, 12, 2)))
    x, y = _toy_set(64, rng)
    res = clf.train_arrays(x, y, TrainConfig(epochs=6, batch_size=16), x, y, net_cfg)
    assert res.log[-1].loss < res.log[0].loss
    assert max(e.val_f1 for e in res.log) == 1.0
    assert res.log[res.best_epoch].val_f1 == 1.0
    assert res.model.trained


def test_training_is_reproducible(rng):
    net_cfg = clf.NetConfig(input_size=(24, 14), blocks=((8, 8, 1),))
    x, y = _toy_set(20, rng)
    cfg = TrainConfig(epochs=2, batch_size=8)
    a = clf.train_arrays(x, y, cfg, net_cfg=net_cfg).model
    b = clf.train_arrays(x, y, cfg, net_cfg=net_cfg).model
    assert all(np.array_equal(p.data, q.data) for p, q in zip(a.parameters(), b.parameters()))


def test_checkpoint_roundtrip(tmp_path, rng):
    net = clf.RenderNet(clf.NetConfig(blocks=((8, 16, 2), (16, 16, 1))), seed=9)
    for t in net.buffers():
        t.data = rng.random(t.data.shape).astype(t.data.dtype) + 0.5
    path = tmp_path / "m.rwnn"
    clf.save_model(net, path)
    back = clf.load_model(path)
    assert back.cfg == net.cfg and back.trained
    x = rng.random((2, 3, 56, 96)).astype(np.float32)
    assert np.array_equal(back.forward(x), net.forward(x))
    manifest, _ = checkpoint.read_manifest(path)
    assert {t["role"] for t in manifest["tensors"]} >= {"weight", "gamma", "running_mean", "running_var"}


def test_checkpoint_rejects_damage(tmp_path):
    net = clf.RenderNet(seed=1)
    path = tmp_path / "m.rwnn"
    clf.save_model(net, path)
    raw = path.read_bytes()
    for bad in (b"XXXX" + raw[4:], raw[:-3], raw + b"\0"):
        path.write_bytes(bad)
        with pytest.raises(checkpoint.CheckpointError):
            clf.load_model(path)
    path.write_bytes(raw)
    other = clf.RenderNet(clf.NetConfig(blocks=((8, 16, 2),)))
    with pytest.raises(checkpoint.CheckpointError):
        checkpoint.load_into(other, path)


# metrics --------------------------------------------------------------------------------

def test_metrics_example():
    p, r, f1 = metrics(ConfusionCounts(tp=9, fp=1, fn=3, tn=0))
    assert (p, r) == (0.9, 0.75)
    assert f1 == pytest.approx(0.8182, abs=5e-5)


def test_metrics_zero_denominators():
    assert metrics(ConfusionCounts(0, 0, 0, 5)) == (0.0, 0.0, 0.0)
    assert metrics(ConfusionCounts(0, 2, 0, 0)) == (0.0, 0.0, 0.0)


def test_counts_from():
    c = counts_from([True, True, False, False], [True, False, True, False])
    assert (c.tp, c.fn, c.fp, c.tn, c.total) == (1, 1, 1, 1, 4)
    with pytest.raises(ValueError):
        ConfusionCounts(tp=-1)


def test_evaluate_requires_entries():
    with pytest.raises(EmptyDataset):
        evaluate(clf.RenderNet(), [])


def test_evaluate_and_table():
    net = clf.RenderNet(clf.NetConfig(input_size=(24, 14), blocks=((8, 8, 1),)))
    net.trained = True
    net.head.layers[1].weight.data[:] = 0
    net.head.layers[1].bias.data[:] = 5.0  # always FULLY
    f = Frame(np.zeros((14, 24, 3), np.uint8))
    entries = [_entry("a", 0, Label.FULLY, f), _entry("a", 1, Label.PARTIALLY, f)]
    rep = evaluate(net, entries)
    assert (rep.counts.tp, rep.counts.fp) == (1, 1)
    assert rep.precision == 0.5 and rep.recall == 1.0
    lines = rep.table().splitlines()
    assert lines[0].split()[:4] == ["Method", "Precision", "Recall", "F1-score"]
    assert "0.500" in lines[1]


def test_preprocess_identity_and_constant():
    rng = np.random.default_rng(0)
    px = rng.integers(0, 256, (56, 96, 3), dtype=np.uint8)
    assert np.array_equal(clf.preprocess(Frame(px)), px.transpose(2, 0, 1).astype(np.float32) / 255)
    const = clf.preprocess(Frame(np.full((33, 71, 3), 77, np.uint8)))
    assert np.allclose(const, 77 / 255)


def test_preprocess_upscaled_checkerboard_keeps_corners():
    px = np.array([[[0] * 3, [255] * 3], [[255] * 3, [0] * 3]], dtype=np.uint8)
    x = clf.preprocess(Frame(px))
    assert x[0, 0, 0] == 0.0 and x[0, 0, -1] == 1.0 and x[0, -1, 0] == 1.0 and x[0, -1, -1] == 0.0


def test_flipping_the_logit_flips_the_decision():
    net = clf.RenderNet(clf.NetConfig(input_size=(24, 14), blocks=((8, 8, 1),)))
    net.trained = True
    lin = net.head.layers[1]
    f = Frame(np.random.default_rng(2).integers(0, 256, (14, 24, 3), dtype=np.uint8))
    lin.bias.data[:] = 0.7
    a = clf.infer(net, f)
    lin.weight.data *= -1
    lin.bias.data *= -1
    b = clf.infer(net, f)
    assert a.decision is not b.decision
    assert a.probability_fully_rendered == pytest.approx(1 - b.probability_fully_rendered)
    assert clf.infer(net, f).probability_fully_rendered == b.probability_fully_rendered


def test_ten_apps_split_eight_one_one():
    entries = [_entry(f"app{a}", 0, Label.FULLY) for a in range(10)]
    tr, va, te = clf.split_by_app(entries)
    assert (len(tr), len(va), len(te)) == (8, 1, 1)


def _random_set(n, seed):
    rng = np.random.default_rng(seed)
    return rng.random((n, 3, 56, 96)).astype(np.float32), (np.arange(n) % 2).astype(np.float32)


def test_two_example_loss_decreases_for_five_epochs():
    x, y = _random_set(2, 0)
    res = clf.train_arrays(x, y, TrainConfig(epochs=20, batch_size=2))
    losses = [e.loss for e in res.log[:6]]
    assert all(b < a for a, b in zip(losses, losses[1:]))


def test_desk_scale_net_can_memorise_sixteen_examples():
    x, y = _random_set(16, 1)
    res = clf.train_arrays(x, y, TrainConfig(epochs=200, batch_size=16))
    assert min(e.loss for e in res.log) < 0.01
