"""Command-line interface: ``frbnet {synth,extract,filter-response,train,check}``.

Settings resolve as built-in defaults < config file (TOML or JSON) < flags,
and the resolved settings are written to ``<out>/config.json``.

Exit codes: 0 success, 1 validation error, 2 runtime or numeric failure.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import frbt
from .checks import FAST_CHECKS, run_checks
from .fcr import PAIRS
from .imageio import save_plane_png
from .lff import FilterParams, eval_lff
from .pipeline import (ABLATIONS, Flags, TrainConfig, TrainingDiverged, forward_features, init_state,
                       invariance_score, load_checkpoint, save_checkpoint, train_toy)
from .spectral import make_freq_grid
from .synth import SynthConfig, gen_dataset, load_dataset, save_dataset

log = logging.getLogger("frbnet")

DEFAULTS = {
    "synth": {"n": 800, "classes": 4, "size": 64, "seed": 0, "split": 0.75, "highlight_max": None,
              "png": False, "out": "data"},
    "extract": {"input": None, "checkpoint": None, "gains": None, "compare": False, "seed": 0,
                "out": "features"},
    "filter-response": {"checkpoint": None, "params": None, "size": 64, "lam": None, "out": "filters"},
    "train": {"data": None, "ablation": "full", "frontend": "frbnet", "epochs": 30, "batch_size": 16,
              "lr": 0.05, "seed": 0, "out": "run"},
    "check": {"seed": 0, "only": None, "out": None},
}


class ValidationError(Exception):
    pass


def _load_config_file(path):
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"config file not found: {p}")
    text = p.read_text()
    if p.suffix.lower() == ".json":
        return json.loads(text)
    try:
        import tomllib
    except ModuleNotFoundError:  # python < 3.11
        import tomli as tomllib
    return tomllib.loads(text)


def resolve(command, args):
    cfg = dict(DEFAULTS[command])
    if args.config:
        data = _load_config_file(args.config)
        section = data.get(command, data)
        for key, value in section.items():
            key = key.replace("-", "_")
            if key not in cfg:
                raise ValidationError(f"unknown config key {key!r} for {command}")
            cfg[key] = value
    for key in cfg:
        value = getattr(args, key, None)
        if value is not None and value is not False:
            cfg[key] = value
    return cfg


def _persist(cfg, command):
    if cfg.get("out") is None:
        return
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps({"command": command, **cfg}, indent=1, sort_keys=True,
                                                default=str))


def _load_image(path):
    p = Path(path)
    if p.suffix == ".frbt":
        img = frbt.load(p)
    elif p.suffix.lower() == ".png":
        from PIL import Image
        img = np.moveaxis(np.asarray(Image.open(p).convert("RGB"), dtype=np.float64) / 255.0, -1, 0)
    else:
        raise ValidationError(f"unsupported image format: {p}")
    if img.ndim != 3 or img.shape[0] != 3:
        raise ValidationError(f"{p}: expected a (3, h, w) image, got shape {img.shape}")
    return img


def _image_paths(spec):
    p = Path(spec)
    if p.is_dir():
        paths = sorted(q for q in p.iterdir() if q.suffix in (".frbt", ".png"))
        if not paths:
            raise ValidationError(f"no .frbt or .png images in {p}")
        return paths
    if not p.is_file():
        raise ValidationError(f"input not found: {p}")
    return [p]


def cmd_synth(cfg):
    hmax = cfg["highlight_max"]
    kw = {}
    if hmax is not None:
        hmax = float(hmax)
        base = SynthConfig()
        if hmax >= 1:
            raise ValidationError(f"--highlight-max must be < 1 (highlight strength), got {hmax}")
        if hmax < base.test_highlight_range[0]:
            raise ValidationError(f"--highlight-max must be >= {base.test_highlight_range[0]}")
        kw["test_highlight_range"] = (base.test_highlight_range[0], hmax)
    try:
        config = SynthConfig(size=int(cfg["size"]), n_classes=int(cfg["classes"]), n_samples=int(cfg["n"]),
                             train_fraction=float(cfg["split"]), seed=int(cfg["seed"]), **kw)
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    ds = gen_dataset(config)
    save_dataset(ds, cfg["out"], png=bool(cfg["png"]))
    images = np.stack([s.image for s in ds.samples])
    print(f"wrote {len(ds.samples)} samples to {cfg['out']}: {len(ds.train)} train / {len(ds.test)} test")
    print(f"image value range [{images.min():.6f}, {images.max():.6f}], "
          f"clamped pixels {sum(s.clamp_count for s in ds.samples)}")
    return 0


def _state_from(cfg):
    if cfg.get("checkpoint"):
        return load_checkpoint(cfg["checkpoint"])
    return init_state(seed=int(cfg.get("seed") or 0))


def _parse_gains(text):
    try:
        gains = [float(g) for g in str(text).split(",")]
    except ValueError as exc:
        raise ValidationError(f"--gains must be three comma-separated numbers, got {text!r}") from exc
    if len(gains) != 3:
        raise ValidationError(f"--gains needs exactly three values, got {text!r}")
    return gains


def cmd_extract(cfg):
    if not cfg["input"]:
        raise ValidationError("extract needs --input (image file or directory)")
    state = _state_from(cfg)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    gains = _parse_gains(cfg["gains"]) if cfg["gains"] else None
    summary = []
    for path in _image_paths(cfg["input"]):
        img = _load_image(path)
        feats = forward_features(img, state)
        stem = out / path.stem
        frbt.save(f"{stem}_finv.frbt", feats.f_inv)
        frbt.save(f"{stem}_fout.frbt", feats.f_out)
        for pair, plane in zip(PAIRS, feats.f_inv):
            save_plane_png(f"{stem}_finv_{pair.name}.png", plane)
        for c, plane in enumerate(feats.f_out):
            save_plane_png(f"{stem}_fout_{c}.png", plane)
        entry = {"input": str(path), "imag_residual": float(np.max(feats.imag_residual)),
                 "f_inv_maxabs": float(np.max(np.abs(feats.f_inv)))}
        if gains is not None and cfg["compare"]:
            entry["invariance_score"] = invariance_score(img, state, gains)
            print(f"{path.name}: invariance_score {entry['invariance_score']:.3e}")
        summary.append(entry)
        log.info("extracted %s", path)
    (out / "summary.json").write_text(json.dumps(summary, indent=1))
    print(f"extracted {len(summary)} image(s) to {out}")
    return 0


def cmd_filter_response(cfg):
    size = int(cfg["size"])
    if cfg["params"]:
        fp = FilterParams.from_dict(json.loads(Path(cfg["params"]).read_text()))
        filters, flags = [fp.copy() for _ in PAIRS], Flags()
    else:
        state = _state_from(cfg)
        filters, flags = state.filters, state.flags
    if cfg["lam"] is not None:
        for fp in filters:
            fp.lam = float(cfg["lam"])
    grid = make_freq_grid(size, size)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    half = size // 2
    report = {"size": size, "dc_pixel": [half, half], "pairs": {}}
    for pair, fp in zip(PAIRS, filters):
        g = eval_lff(grid, fp, symmetrize=flags.symmetrize, use_window=flags.use_window,
                     use_angular=flags.use_angular).values
        frbt.save(out / f"filter_{pair.name}.frbt", g)
        # heat map with DC at the centre pixel
        save_plane_png(out / f"filter_{pair.name}.png", np.fft.fftshift(g))
        report["pairs"][pair.name] = {
            "params": fp.to_dict(),
            "r": grid.r[: half + 1, 0].tolist(),
            "along_u": g[: half + 1, 0].tolist(),
            "along_v": g[0, : half + 1].tolist(),
        }
    (out / "response.json").write_text(json.dumps(report, indent=1))
    print(f"wrote filter responses for {len(filters)} pairs to {out}")
    return 0


def cmd_train(cfg):
    if not cfg["data"]:
        raise ValidationError("train needs --data (dataset directory)")
    try:
        ds = load_dataset(cfg["data"])
        flags = Flags.from_ablation(cfg["ablation"], frontend=cfg["frontend"])
    except (FileNotFoundError, ValueError) as exc:
        raise ValidationError(str(exc)) from exc
    seed = int(cfg["seed"])
    state = init_state(n_classes=ds.config.n_classes, seed=seed, flags=flags)
    tc = TrainConfig(epochs=int(cfg["epochs"]), batch_size=int(cfg["batch_size"]), lr=float(cfg["lr"]),
                     seed=seed)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    report_path = out / "report.jsonl"
    report_path.write_text("")

    def _log(record):
        with open(report_path, "a") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
        log.info("epoch %d loss %.4f train_acc %.3f test_acc %.3f", record["epoch"], record["train_loss"],
                 record["train_acc"], record["test_acc"])

    report = train_toy(ds, state, tc, log=_log)
    save_checkpoint(state, out / "checkpoint")
    final = report.final
    print(f"trained {tc.epochs} epochs ({cfg['ablation']}, {cfg['frontend']}): "
          f"train_loss {final['train_loss']:.4f} test_acc {final['test_acc']:.3f}")
    return 0


def cmd_check(cfg):
    names = None
    if cfg["only"]:
        names = [n.strip() for n in str(cfg["only"]).split(",")]
        unknown = [n for n in names if n not in FAST_CHECKS]
        if unknown:
            raise ValidationError(f"unknown check(s) {unknown}; choose from {sorted(FAST_CHECKS)}")
    results = run_checks(seed=int(cfg["seed"]), names=names)
    for r in results:
        print(r.line(), flush=True)
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 2 if failed else 0


COMMANDS = {
    "synth": cmd_synth,
    "extract": cmd_extract,
    "filter-response": cmd_filter_response,
    "train": cmd_train,
    "check": cmd_check,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML or JSON config file")
    common.add_argument("--seed", type=int)
    common.add_argument("-o", "--out", help="output directory")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="frbnet", description="Frequency-domain illumination-invariant features")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic dataset")
    p.add_argument("--n", type=int)
    p.add_argument("--classes", type=int)
    p.add_argument("--size", type=int)
    p.add_argument("--split", type=float)
    p.add_argument("--highlight-max", type=float, dest="highlight_max")
    p.add_argument("--png", action="store_true", default=None)

    p = sub.add_parser("extract", parents=[common], help="compute F_inv / F_out for images")
    p.add_argument("--input", "-i")
    p.add_argument("--checkpoint")
    p.add_argument("--gains")
    p.add_argument("--compare", action="store_true", default=None)

    p = sub.add_parser("filter-response", parents=[common], help="render filter gain grids")
    p.add_argument("--checkpoint")
    p.add_argument("--params", help="FilterParams JSON applied to every pair")
    p.add_argument("--size", type=int)
    p.add_argument("--lambda", type=float, dest="lam")

    p = sub.add_parser("train", parents=[common], help="train the toy classifier")
    p.add_argument("--data")
    p.add_argument("--ablation", choices=sorted(ABLATIONS))
    p.add_argument("--frontend", choices=["frbnet", "raw"])
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--lr", type=float)

    p = sub.add_parser("check", parents=[common], help="run the numerical self-checks")
    p.add_argument("--only", help=f"comma-separated subset of {','.join(FAST_CHECKS)}")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve(args.command, args)
        _persist(cfg, args.command)
        return COMMANDS[args.command](cfg)
    except (ValidationError, KeyError, ValueError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return 1
    except (TrainingDiverged, FloatingPointError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
