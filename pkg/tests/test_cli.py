import json
import logging

import numpy as np
import pytest

from renderwait import cli
from renderwait.imaging import Frame
from renderwait.screencast import Screencast, write_screencast
from renderwait.segmenter import LabeledDataset


def _pattern_cast(steady, cast_id="w"):
    colours = [(20, 20, 20), (235, 235, 235)]
    frames, c = [], 0
    for i in range(len(steady) + 1):
        if i > 0 and not steady[i - 1]:
            c ^= 1
        px = np.zeros((16, 16, 3), dtype=np.uint8)
        px[:] = colours[c]
        px[4:12, 4:12] = colours[1 - c]
        frames.append(Frame(px, i * 33.3))
    return Screencast(cast_id, frames, app_id="a")


def _nudged_cast(n=15):
    """Consecutive frames differ by one pixel: SSIM just below 1."""
    rng = np.random.default_rng(0)
    base = rng.integers(0, 256, (24, 24, 3), dtype=np.uint8)
    frames = []
    for i in range(n):
        px = base.copy()
        px[i % 24, (3 * i) % 24] ^= 0x40
        frames.append(Frame(px, i * 33.3))
    return Screencast("nudged", frames, app_id="a")


def test_segment_worked_example(tmp_path, capsys):
    steady = [True] * 5 + [False] * 4 + [True] * 5
    write_screencast(_pattern_cast(steady), tmp_path / "cast")
    out = tmp_path / "ds.tsv"
    assert cli.main(["segment", str(tmp_path / "cast"), "--out", str(out)]) == 0
    ds = LabeledDataset.load(out)
    assert len(ds) == 5
    assert "entries=5" in capsys.readouterr().out


def test_missing_manifest_exits_2(tmp_path, capsys):
    code = cli.main(["segment", str(tmp_path / "nowhere"), "--out", str(tmp_path / "x.tsv")])
    assert code == 2
    assert "not found" in capsys.readouterr().err
    (tmp_path / "empty").mkdir()
    assert cli.main(["segment", str(tmp_path / "empty"), "--out", str(tmp_path / "x.tsv")]) == 2


def test_flag_overrides_config_file(tmp_path):
    write_screencast(_nudged_cast(), tmp_path / "cast")
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("similarity-threshold: 1.0\nthreshold: 1.0\n")
    strict, loose = tmp_path / "strict.tsv", tmp_path / "loose.tsv"
    assert cli.main(["segment", str(tmp_path / "cast"), "--config", str(cfg), "--out", str(strict)]) == 0
    assert cli.main(["segment", str(tmp_path / "cast"), "--config", str(cfg), "--similarity-threshold", "0.95",
                     "--out", str(loose)]) == 0
    assert len(LabeledDataset.load(strict)) == 15  # every frame its own partial group
    assert len(LabeledDataset.load(loose)) == 1  # one steady run


def test_resolve_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"steady-frames": 7, "threshold": 0.97}))
    args = cli.build_parser().parse_args(["segment", "x", "--config", str(cfg), "--threshold", "0.95"])
    o = cli.resolve(args)
    assert o["threshold"] == 0.95 and o["steady_frames"] == 7 and o["partial_samples"] == 3


def test_resolved_config_is_logged(tmp_path, caplog):
    write_screencast(_pattern_cast([True] * 4), tmp_path / "cast")
    with caplog.at_level(logging.INFO, logger="renderwait"):
        cli.main(["segment", str(tmp_path / "cast"), "--out", str(tmp_path / "d.tsv"), "--steady-frames", "3"])
    line = next(r.getMessage() for r in caplog.records if r.getMessage().startswith("config "))
    assert json.loads(line[len("config "):])["steady_frames"] == 3


def test_argparse_and_policy_errors_exit_2(capsys):
    assert cli.main([]) == 2
    assert cli.main(["bench", "--policy", "sometimes"]) == 2
    assert "unknown policy" in capsys.readouterr().err
    assert cli.main(["bench", "--policy", "adaptive", "--model", "/no/such/model"]) == 2


def test_runtime_failure_exits_1(tmp_path):
    bad = tmp_path / "model.rwnn"
    bad.write_bytes(b"garbage")
    assert cli.main(["bench", "--policy", "adaptive", "--model", str(bad)]) == 1


def test_bench_is_deterministic(tmp_path):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    for out in (a, b):
        assert cli.main(["bench", "--policy", "fixed:200,oracle", "--seed", "3", "--out", str(out)]) == 0
    assert a.read_bytes() == b.read_bytes()
    text = a.read_text()
    assert "Reproduced" in text and "Oracle" in text


def test_explore_runs(tmp_path):
    out = tmp_path / "e.txt"
    assert cli.main(["explore", "--apps", "1", "--budget-s", "4", "--policy", "fixed:200,fixed:1000",
                     "--out", str(out)]) == 0
    assert "Fixed200" in out.read_text()


def test_serve_for_a_moment(capsys):
    assert cli.main(["serve", "--duration-s", "0.3", "--payload", "raw"]) == 0
    assert "frames_sent=" in capsys.readouterr().out


def test_dataset_train_eval_pipeline(tmp_path, capsys):
    data = tmp_path / "data"
    assert cli.main(["dataset", "--apps", "3", "--events", "2", "--fps", "10", "--out", str(data)]) == 0
    tsv = data / "dataset.tsv"
    ds = LabeledDataset.load(tsv)
    assert len({e.app_id for e in ds.entries}) == 3 and all(e.frame is not None for e in ds.entries)
    model = tmp_path / "m.rwnn"
    assert cli.main(["train", str(tsv), "--epochs", "1", "--split", "1:1:1", "--out", str(model)]) == 0
    assert model.is_file()
    out = tmp_path / "report.txt"
    assert cli.main(["eval", str(tsv), "--model", str(model), "--out", str(out)]) == 0
    assert out.read_text().split()[:4] == ["Method", "Precision", "Recall", "F1-score"]
    assert cli.main(["eval", str(tsv), "--model", str(model), "--split", "bogus"]) == 2


def test_gen_writes_casts_and_apps(tmp_path):
    assert cli.main(["gen", "--apps", "1", "--events", "2", "--fps", "5", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "apps" / "app1000.yaml").is_file()
    assert (tmp_path / "app1000-c0" / "manifest.txt").is_file()
    assert cli.main(["segment", str(tmp_path / "app1000-c0"), "--out", str(tmp_path / "d.tsv")]) == 0
