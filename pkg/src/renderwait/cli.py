"""Command-line entry points.

Every option can also come from a YAML/JSON ``--config`` file whose keys are
the long option names (dashes or underscores). Precedence: built-in default <
config file < command-line flag. Each run logs the fully resolved options.

Exit codes: 0 success, 1 runtime failure, 2 usage error (including missing
input files).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import yaml

from . import __version__

log = logging.getLogger("renderwait")


class UsageError(Exception):
    pass


# option plumbing -----------------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML or JSON file with option defaults")
    p.add_argument("--seed", type=int, help="random seed (default 0)")
    p.add_argument("--out", help="output path")
    p.add_argument("-v", "--verbose", action="store_true")


def _seg_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--threshold", "--similarity-threshold", dest="threshold", type=float,
                   help="SSIM threshold separating steady pairs (default 0.99)")
    p.add_argument("--steady-frames", type=int, help="minimum run length of a fully rendered group (default 5)")
    p.add_argument("--partial-samples", type=int, help="frames sampled per partially rendered group (default 3)")
    p.add_argument("--ssim-scale", type=int, help="integer downscale before SSIM (default 1)")


def _policy_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--max-wait-ms", type=float, help="adaptive forced-dispatch cap (default 1000)")
    p.add_argument("--fps", type=float, help="frame rate seen by the scheduler (default 30)")
    p.add_argument("--model", help="classifier checkpoint (needed by the adaptive policy)")
    p.add_argument("--inference-cost-ms", type=float,
                   help="virtual time charged per classifier call in simulation (default 5)")


DEFAULTS = {
    "segment": dict(seed=0, threshold=0.99, steady_frames=5, partial_samples=3, ssim_scale=1),
    "gen": dict(seed=0, fps=30.0, apps=8, casts_per_app=1, events=8, base_app_seed=1000,
                dwell_min_ms=600.0, dwell_max_ms=1200.0),
    "dataset": dict(seed=0, fps=10.0, apps=64, casts_per_app=2, events=10, base_app_seed=1000,
                    dwell_min_ms=600.0, dwell_max_ms=1200.0, threshold=0.99, steady_frames=5,
                    partial_samples=3, ssim_scale=1),
    "train": dict(seed=0, epochs=20, batch_size=16, lr=0.01, lr_halve_every=10, split="8:1:1"),
    "eval": dict(seed=0, split="all"),
    "serve": dict(seed=0, fps=30.0, port=0, host="127.0.0.1", duration_s=0.0, payload="png"),
    "bench": dict(seed=0, fps=30.0, max_wait_ms=1000.0, inference_cost_ms=5.0,
                  policies="fixed:200,fixed:400,fixed:600,fixed:800,fixed:1000,adaptive"),
    "explore": dict(seed=0, fps=30.0, max_wait_ms=1000.0, inference_cost_ms=5.0, budget_s=60.0, apps=8,
                    policies="fixed:200,fixed:400,fixed:600,fixed:800,fixed:1000,adaptive"),
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="renderwait", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", help="segment stored screencasts into a labeled dataset manifest")
    p.add_argument("inputs", nargs="+", help="screencast directories (or their manifest.txt)")
    _common(p)
    _seg_opts(p)

    for name, helptext in (("gen", "record synthetic screencasts with ground-truth labels"),
                           ("dataset", "generate random apps, record, segment and write a dataset")):
        p = sub.add_parser(name, help=helptext)
        _common(p)
        p.add_argument("--app", help="app config file (YAML); default: random apps")
        p.add_argument("--apps", type=int, help="number of random apps")
        p.add_argument("--base-app-seed", type=int, help="seed of the first random app")
        p.add_argument("--casts-per-app", type=int)
        p.add_argument("--events", type=int, help="taps per screencast")
        p.add_argument("--fps", type=float)
        p.add_argument("--dwell-min-ms", type=float)
        p.add_argument("--dwell-max-ms", type=float)
        if name == "dataset":
            _seg_opts(p)

    p = sub.add_parser("train", help="train the classifier on a dataset manifest")
    p.add_argument("dataset", help="dataset manifest written by `segment` or `dataset`")
    _common(p)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float, help="initial learning rate (default 0.01)")
    p.add_argument("--lr-halve-every", type=int)
    p.add_argument("--split", help="train:val:test app ratios (default 8:1:1)")

    p = sub.add_parser("eval", help="precision/recall/F1 of a checkpoint on a dataset")
    p.add_argument("dataset")
    _common(p)
    p.add_argument("--model", required=False, help="classifier checkpoint")
    p.add_argument("--split", help="'all' or 'test' (the held-out apps of an 8:1:1 split with --seed)")

    p = sub.add_parser("serve", help="stream a simulated app over a local socket")
    _common(p)
    p.add_argument("--app", help="app config file (YAML); default: first app of the standard suite")
    p.add_argument("--fps", type=float)
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--duration-s", type=float, help="stop after this many seconds (0 = until interrupted)")
    p.add_argument("--payload", choices=("png", "raw"))

    p = sub.add_parser("bench", help="replay crash traces under several throttle policies")
    _common(p)
    _policy_opts(p)
    p.add_argument("--app", help="app config file with traces; default: the standard suite")
    p.add_argument("--policy", dest="policies", help="comma-separated: fixed:<ms>, adaptive, consecutive, oracle")

    p = sub.add_parser("explore", help="timed random exploration under several throttle policies")
    _common(p)
    _policy_opts(p)
    p.add_argument("--app", help="app config file; default: generated exploration apps")
    p.add_argument("--apps", type=int, help="number of generated exploration apps")
    p.add_argument("--budget-s", type=float, help="exploration time per app and policy, seconds")
    p.add_argument("--policy", dest="policies", help="comma-separated policies")
    return ap


def _read_config(path: str) -> dict:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"config file not found: {path}")
    text = p.read_text()
    data = json.loads(text) if p.suffix == ".json" else yaml.safe_load(text)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise UsageError(f"{path}: top level must be a mapping")
    return {str(k).replace("-", "_"): v for k, v in data.items()}


def resolve(args: argparse.Namespace) -> dict:
    """Defaults, then the config file, then explicit flags."""
    opts = dict(DEFAULTS.get(args.command, {}))
    if getattr(args, "config", None):
        opts.update(_read_config(args.config))
    for k, v in vars(args).items():
        if v is not None and k not in ("config", "command", "verbose"):
            opts[k] = v
    opts["command"] = args.command
    return opts


def _need_file(path: str | None, what: str) -> Path:
    if not path:
        raise UsageError(f"{what} is required")
    p = Path(path)
    if not p.exists():
        raise UsageError(f"{what} not found: {path}")
    return p


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text + "\n")
    print(text)


def _seg_cfg(o: dict):
    from .segmenter import SegmenterConfig
    return SegmenterConfig(float(o["threshold"]), int(o["steady_frames"]), int(o["partial_samples"]),
                           int(o["seed"]), int(o["ssim_scale"]))


# commands -----------------------------------------------------------------------

def cmd_segment(o: dict) -> int:
    from .screencast import read_screencast
    from .segmenter import build_dataset

    dirs = [_need_file(p, "screencast manifest") for p in o["inputs"]]
    for d in dirs:
        if d.is_dir() and not (d / "manifest.txt").is_file():
            raise UsageError(f"screencast manifest not found: {d / 'manifest.txt'}")
    if not o.get("out"):
        raise UsageError("--out is required")
    cfg = _seg_cfg(o)
    roots = [d if d.is_dir() else d.parent for d in dirs]

    def casts():
        for r in roots:
            yield read_screencast(r)

    ds = build_dataset(casts(), cfg)
    out = Path(o["out"])
    ds.sources = {}
    for r in roots:
        cid = read_screencast_id(r)
        ds.sources[cid] = str(r.resolve())
    out.parent.mkdir(parents=True, exist_ok=True)
    ds.save(out)
    c = ds.counts()
    print(f"entries={len(ds)} " + " ".join(f"{k.value}={v}" for k, v in c.items()) + f" -> {out}")
    return 0


def read_screencast_id(root: Path) -> str:
    for raw in (root / "manifest.txt").read_text().splitlines():
        if raw.startswith("id "):
            return raw.split()[1]
    return root.name


def _casts_for(o: dict):
    """Yield (app, screencast) pairs per the gen/dataset options."""
    import numpy as np

    from .sim.device import generate_screencast, random_script
    from .sim.model import load_app
    from .sim.suite import random_app

    if o.get("app"):
        apps = [load_app(_need_file(o["app"], "app config"))[0]]
    else:
        apps = [random_app(int(o["base_app_seed"]) + i) for i in range(int(o["apps"]))]
    dwell = (float(o["dwell_min_ms"]), float(o["dwell_max_ms"]))
    for a, app in enumerate(apps):
        for c in range(int(o["casts_per_app"])):
            rng = np.random.default_rng([int(o["seed"]), a, c])
            script = random_script(app, rng, int(o["events"]), dwell)
            cast_seed = int(rng.integers(2**31))
            yield app, generate_screencast(app, script, float(o["fps"]), seed=cast_seed,
                                           cast_id=f"{app.name}-c{c}")


def cmd_gen(o: dict) -> int:
    from .screencast import write_screencast
    from .sim.model import save_app

    if not o.get("out"):
        raise UsageError("--out is required")
    out = Path(o["out"])
    n, seen = 0, set()
    for app, cast in _casts_for(o):
        if app.name not in seen:
            save_app(app, out / "apps" / f"{app.name}.yaml")
            seen.add(app.name)
        write_screencast(cast, out / cast.id)
        n += 1
        print(f"{cast.id}: {len(cast.frames)} frames")
    print(f"wrote {n} screencasts under {out}")
    return 0


def cmd_dataset(o: dict) -> int:
    from .segmenter import build_dataset

    if not o.get("out"):
        raise UsageError("--out is required")
    out = Path(o["out"])
    ds = build_dataset((cast for _, cast in _casts_for(o)), _seg_cfg(o))
    # store just the sampled frames so the dataset directory stays small
    by_cast: dict[str, dict[int, object]] = {}
    for e in ds.entries:
        by_cast.setdefault(e.screencast_id, {})[e.frame_index] = e.frame
    for cid, frames in by_cast.items():
        _write_sparse(out / "casts" / cid, cid, frames)
    ds.sources = {cid: f"casts/{cid}" for cid in by_cast}
    ds.save(out / "dataset.tsv")
    c = ds.counts()
    apps = len({e.app_id for e in ds.entries})
    print(f"apps={apps} entries={len(ds)} " + " ".join(f"{k.value}={v}" for k, v in c.items())
          + f" -> {out / 'dataset.tsv'}")
    return 0


def _write_sparse(directory: Path, cid: str, frames: dict) -> None:
    """A screencast manifest holding only some frames; missing indices point at a shared blank."""
    directory.mkdir(parents=True, exist_ok=True)
    last = max(frames)
    lines = ["# screencast v1 (sampled frames only)", f"id {cid}"]
    for i in range(last + 1):
        if i in frames:
            name = f"f{i:05d}.png"
            (directory / name).write_bytes(frames[i].to_png())
            lines.append(f"frame {i} {frames[i].timestamp_ms:.3f} {name}")
        else:
            lines.append(f"frame {i} 0 -")
    (directory / "manifest.txt").write_text("\n".join(lines) + "\n")


def _split_ratios(text: str) -> tuple[int, int, int]:
    try:
        parts = tuple(int(x) for x in str(text).split(":"))
    except ValueError:
        raise UsageError(f"bad --split {text!r}") from None
    if len(parts) != 3 or min(parts) < 0 or sum(parts) == 0:
        raise UsageError(f"bad --split {text!r}")
    return parts


def cmd_train(o: dict) -> int:
    from .classifier import save_model, split_by_app, train
    from .evaluation import evaluate
    from .nn.optim import TrainConfig
    from .segmenter import LabeledDataset

    path = _need_file(o["dataset"], "dataset manifest")
    if not o.get("out"):
        raise UsageError("--out is required")
    ds = LabeledDataset.load(path)
    tr, va, te = split_by_app(ds.entries, _split_ratios(o["split"]), int(o["seed"]))
    cfg = TrainConfig(lr_initial=float(o["lr"]), lr_halve_every=int(o["lr_halve_every"]),
                      epochs=int(o["epochs"]), batch_size=int(o["batch_size"]), rng_seed=int(o["seed"]))
    print(f"train={len(tr)} val={len(va)} test={len(te)}")
    result = train(tr, cfg, va, progress=lambda e: print(e.line(), flush=True))
    save_model(result.model, o["out"])
    print(f"best_epoch={result.best_epoch} -> {o['out']}")
    if te:
        print(evaluate(result.model, te, time_each=False).table())
    return 0


def cmd_eval(o: dict) -> int:
    from .classifier import load_model, split_by_app
    from .evaluation import evaluate
    from .segmenter import LabeledDataset

    path = _need_file(o["dataset"], "dataset manifest")
    model = load_model(_need_file(o.get("model"), "--model checkpoint"))
    entries = LabeledDataset.load(path).entries
    if o["split"] == "test":
        entries = split_by_app(entries, (8, 1, 1), int(o["seed"]))[2]
    elif o["split"] != "all":
        raise UsageError("--split must be 'all' or 'test'")
    _emit(evaluate(model, entries).table(), o.get("out"))
    return 0


def cmd_serve(o: dict) -> int:
    import time

    from .sim.device import DeviceSession
    from .sim.model import load_app
    from .sim.suite import standard_suite
    from .stream import FORMAT_PNG, FORMAT_RAW, serve

    app = load_app(_need_file(o["app"], "app config"))[0] if o.get("app") else standard_suite()[0][0]
    session = DeviceSession(app, launched=False)
    fmt = FORMAT_RAW if o["payload"] == "raw" else FORMAT_PNG
    server = serve(session, float(o["fps"]), o["host"], int(o["port"]), fmt)
    print(f"serving {app.name} on {server.address[0]}:{server.port} at {o['fps']:g} fps", flush=True)
    try:
        if float(o["duration_s"]) > 0:
            time.sleep(float(o["duration_s"]))
        else:
            while True:
                time.sleep(3600)
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
        print(f"frames_sent={server.frames_sent}")
    return 0


def _policies(o: dict):
    from .scheduler import parse_policy

    try:
        return [parse_policy(p, float(o["max_wait_ms"])) for p in str(o["policies"]).split(",") if p.strip()]
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _model_for(policies, o):
    from .classifier import load_model
    from .scheduler import AdaptivePolicy

    if any(isinstance(p, AdaptivePolicy) and p.verdict == "cnn" for p in policies):
        return load_model(_need_file(o.get("model"), "--model checkpoint (adaptive policy)"))
    return None


def _harness(o: dict):
    from .scheduler import HarnessConfig
    return HarnessConfig(fps=float(o["fps"]), inference_cost_ms=float(o["inference_cost_ms"]), seed=int(o["seed"]))


def cmd_bench(o: dict) -> int:
    from .scheduler import run_trace, trace_table
    from .sim.model import load_app
    from .sim.suite import standard_suite

    policies = _policies(o)
    model = _model_for(policies, o)
    if o.get("app"):
        app, traces = load_app(_need_file(o["app"], "app config"))
        pairs = [(app, t) for t in traces]
    else:
        pairs = standard_suite()
    cfg = _harness(o)
    results = []
    for app, trace in pairs:
        for p in policies:
            r = run_trace(app, trace, p, model, cfg)
            results.append(r)
            log.info(r.line())
    _emit("\n".join(r.line() for r in results) + "\n\n" + trace_table(results), o.get("out"))
    return 0


def cmd_explore(o: dict) -> int:
    from .scheduler import exploration_table, run_exploration
    from .sim.model import load_app
    from .sim.suite import exploration_apps

    policies = _policies(o)
    model = _model_for(policies, o)
    apps = [load_app(_need_file(o["app"], "app config"))[0]] if o.get("app") else exploration_apps(int(o["apps"]))
    cfg = _harness(o)
    budget = float(o["budget_s"]) * 1000.0
    runs = []
    for app in apps:
        for p in policies:
            m = run_exploration(app, p, budget, int(o["seed"]), model, cfg)
            runs.append(m)
            log.info(m.line())
    _emit("\n".join(m.line() for m in runs) + "\n\n" + exploration_table(runs), o.get("out"))
    return 0


COMMANDS = {"segment": cmd_segment, "gen": cmd_gen, "dataset": cmd_dataset, "train": cmd_train,
            "eval": cmd_eval, "serve": cmd_serve, "bench": cmd_bench, "explore": cmd_explore}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        opts = resolve(args)
        log.info("config %s", json.dumps(opts, sort_keys=True, default=str))
        return COMMANDS[args.command](opts)
    except UsageError as exc:
        print(f"renderwait {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 1
    except Exception as exc:  # noqa: BLE001 - top-level boundary
        log.debug("failure", exc_info=True)
        print(f"renderwait {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
