"""Command-line entry point: ``lmenrich <subcommand> ...``.

Settings come from built-in defaults, then an optional INI config file
(``--config``, section ``[lmenrich]``, ``key = value`` lines), then flags.
Diagnostics go to stderr; data goes to files or stdout.
"""
from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .exceptions import EnrichError

log = logging.getLogger("lmenrich")

DEFAULTS = {
    "scheme": "300w-68",
    "density": 5,
    "seed": 0,
    "epochs": 20,
    "batch_size": 68,
    "learning_rate": 1e-3,
    "patch_size": 64,
    "k": 1,
    "count": 100,
    "workers": 1,
    "baseline": "Synthetic",
    "one_based": False,
}
_TYPES = {k: type(v) for k, v in DEFAULTS.items()}


class UsageError(Exception):
    pass


def _read_config(path):
    if path is None:
        return {}
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise UsageError(f"cannot read config file {path}")
    if "lmenrich" not in parser:
        raise UsageError(f"{path}: missing [lmenrich] section")
    out = {}
    for key, raw in parser["lmenrich"].items():
        key = key.replace("-", "_")
        kind = _TYPES.get(key, str)
        if kind is bool:
            out[key] = parser["lmenrich"].getboolean(key)
        else:
            raw = raw.strip()
            if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "\"'":
                raw = raw[1:-1]
            try:
                out[key] = kind(raw)
            except ValueError:
                raise UsageError(f"{path}: bad value for {key}: {raw!r}") from None
    return out


def _settings(args) -> dict:
    """Defaults < config file < flags."""
    merged = dict(DEFAULTS)
    merged.update(_read_config(getattr(args, "config", None)))
    for key, value in vars(args).items():
        if value is not None and key not in ("func", "config"):
            merged[key] = value
    if merged["density"] < 1:
        raise UsageError("density must be >= 1")
    return merged


def _require(path, what):
    from .data_io.images import resolve_path

    p = resolve_path(path)
    if not p.exists():
        raise UsageError(f"{what} not found: {path}")
    return p


def _map(fn, items, workers):
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def _load_samples(directory, one_based):
    from .data_io import list_samples, load_image, read_pts

    samples = list_samples(directory)
    if not samples:
        raise UsageError(f"no .pts annotations in {directory}")
    out = []
    for stem, image_path, pts_path in samples:
        if image_path is None:
            raise UsageError(f"no image for annotation {pts_path}")
        out.append((stem, image_path, load_image(image_path), read_pts(pts_path, one_based).points))
    return out


def _dump_patches(directory, stem, enriched, image, model):
    from .data_io.images import save_image
    from .patches import extract_patches
    from .regressor.estimator import as_face_image

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    face = as_face_image(image, enriched.anchors(), model.reference_size)
    active = np.flatnonzero(~enriched.isolated)
    patches = extract_patches(face, enriched.points[active], enriched.normal_angle[active], model.patch_spec)
    for k, patch in zip(active, patches):
        save_image(directory / f"{stem}_{k:04d}_t{enriched.soft_index[k]:.3f}.pgm", patch)


# -- subcommands ---------------------------------------------------------------

def cmd_synth(args):
    from .data_io.enriched import write_enriched
    from .data_io.synthetic import SceneConfig, generate_scene, oracle_enriched, write_scene

    cfg = _settings(args)
    out = Path(args.out)
    config = SceneConfig(scheme_id=cfg["scheme"])
    for n in range(cfg["count"]):
        seed = cfg["seed"] * 1_000_003 + n
        scene = generate_scene(seed, config)
        stem = f"scene_{n:05d}"
        write_scene(out, scene, stem)
        write_enriched(out / f"{stem}.gt.json", oracle_enriched(scene, cfg["density"]), label="ground-truth")
    log.info("wrote %d scenes to %s", cfg["count"], out)
    return 0


def cmd_train(args):
    from .patches import AugmentConfig
    from .regressor import OffsetRegressor
    from .regressor.artifact import save_model

    cfg = _settings(args)
    data = _require(args.data, "dataset directory")
    samples = _load_samples(data, cfg["one_based"])
    model = OffsetRegressor(
        scheme=cfg["scheme"], patch_size=cfg["patch_size"], k=cfg["k"], epochs=cfg["epochs"],
        batch_size=cfg["batch_size"], learning_rate=cfg["learning_rate"], seed=cfg["seed"],
        augment=AugmentConfig(), verbose=True,
    )
    model.fit([s[2] for s in samples], [s[3] for s in samples])
    save_model(args.model, model)
    summary = {"model": str(args.model), "epochs": cfg["epochs"], "initial_loss": model.loss_history_[0],
               "final_loss": model.loss_history_[-1], "config_hash": model.config_hash()}
    if args.holdout:
        held = _load_samples(_require(args.holdout, "holdout directory"), cfg["one_based"])
        summary["holdout"] = model.offset_error([s[2] for s in held], [s[3] for s in held], seed=cfg["seed"])
    json.dump(summary, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return 0


def _enrich_one(image, anchors, scheme, density, model, pre_enriched=None):
    from .enrichment import initialize_enriched
    from .regressor import refine

    enriched = pre_enriched if pre_enriched is not None else initialize_enriched(anchors, scheme, density)
    return refine(enriched, image, model)


def cmd_preprocess(args):
    """Densify ground-truth annotations offline (plug in train)."""
    from .data_io.enriched import write_enriched
    from .data_io.schemes import load_scheme
    from .pipeline import network_label
    from .regressor.artifact import load_model

    cfg = _settings(args)
    data = _require(args.data, "dataset directory")
    model = load_model(_require(args.model, "model file"))
    scheme = load_scheme(cfg["scheme"])
    samples = _load_samples(data, cfg["one_based"])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    label = network_label(cfg["baseline"], cfg["density"], "train")

    def work(sample):
        stem, _, image, anchors = sample
        enriched = _enrich_one(image, anchors, scheme, cfg["density"], model)
        write_enriched(out / f"{stem}.json", enriched, label=label)
        if args.dump_patches:
            _dump_patches(args.dump_patches, stem, enriched, image, model)
        return stem

    done = _map(work, samples, cfg["workers"])
    log.info("wrote %d enriched annotations to %s", len(done), out)
    return 0


def cmd_enrich(args):
    """Densify predicted landmarks of one image (plug in test / train+test)."""
    from .data_io import load_image, read_enriched, read_pts, save_overlay, write_enriched
    from .data_io.schemes import load_scheme
    from .pipeline import network_label
    from .regressor.artifact import load_model

    cfg = _settings(args)
    image = load_image(_require(args.image, "image"))
    pred_path = _require(args.pred, "prediction file")
    model = load_model(_require(args.model, "model file"))
    scheme = load_scheme(cfg["scheme"])
    if pred_path.suffix == ".json":
        pre = read_enriched(pred_path)
        mode, density = "train+test", pre.density
        enriched = _enrich_one(image, None, scheme, density, model, pre_enriched=pre)
    else:
        mode, density = "test", cfg["density"]
        anchors = read_pts(pred_path, cfg["one_based"]).points
        enriched = _enrich_one(image, anchors, scheme, density, model)
    write_enriched(args.out, enriched, label=network_label(cfg["baseline"], density, mode))
    overlay = args.overlay or str(Path(args.out).with_suffix(".overlay.png"))
    save_overlay(overlay, image, enriched.points, enriched.is_anchor)
    if args.dump_patches:
        _dump_patches(args.dump_patches, Path(args.out).stem, enriched, image, model)
    return 0


def _pair_files(pred_dir, gt_dir):
    pred_dir, gt_dir = Path(pred_dir), Path(gt_dir)
    if pred_dir.is_file():
        return [(pred_dir, gt_dir)]
    pairs = []
    for pred in sorted(pred_dir.glob("*.json")):
        stem = pred.name[:-5]
        for cand in (gt_dir / f"{stem}.gt.json", gt_dir / f"{stem}.scene.json", gt_dir / f"{stem}.json"):
            if cand.exists():
                pairs.append((pred, cand))
                break
        else:
            raise UsageError(f"no ground truth for {pred.name} in {gt_dir}")
    if not pairs:
        raise UsageError(f"no prediction files in {pred_dir}")
    return pairs


def cmd_eval(args):
    from .data_io.enriched import read_enriched
    from .data_io.schemes import load_scheme
    from .data_io.synthetic import oracle_edges, oracle_enriched, read_scene
    from .metrics import evaluate, mape_table, morphometrics

    cfg = _settings(args)
    scheme = load_scheme(cfg["scheme"])
    preds, gts, edges = [], [], []
    for pred_path, gt_path in _pair_files(_require(args.pred, "predictions"), _require(args.gt, "ground truth")):
        pred = read_enriched(pred_path)
        if gt_path.name.endswith(".scene.json"):
            scene = read_scene(gt_path, image=np.zeros((1, 1)))
            gts.append(oracle_enriched(scene, pred.density))
            edges.append(oracle_edges(scene, pred.density))
        else:
            gt = read_enriched(gt_path)
            from .metrics import edges_from_enriched

            gts.append(gt)
            edges.append(edges_from_enriched(gt, scheme))
        preds.append(pred)
    report = evaluate(preds, gts, scheme, edges)
    if args.morphometrics:
        report.morphometric_mape = mape_table([morphometrics(p, scheme) for p in preds],
                                              [morphometrics(g, scheme) for g in gts])
    if args.out_json:
        Path(args.out_json).write_text(report.to_json())
    if args.out_table:
        Path(args.out_table).write_text(report.to_table())
    sys.stdout.write(report.to_json() if args.json else report.to_table())
    return 0


def cmd_score(args):
    from .data_io.images import IMAGE_SUFFIXES, load_image
    from .quality import raw_score, variance_ratio
    from .regressor.artifact import load_model

    model = load_model(_require(args.model, "model file"))
    src = _require(args.patches, "patch directory")
    files = [src] if src.is_file() else sorted(p for p in src.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    rows = []
    for path in files:
        patch = load_image(path)
        v = float(variance_ratio(patch, model.quality_model_.eps))
        s = float(raw_score(v))
        rows.append({"file": path.name, "V": v, "S": s, "S_bar": float(model.quality_model_.transform(s))})
    if args.json:
        json.dump(rows, sys.stdout, indent=1)
        sys.stdout.write("\n")
    else:
        sys.stdout.write("file,V,S,S_bar\n")
        for r in rows:
            sys.stdout.write(f"{r['file']},{r['V']!r},{r['S']!r},{r['S_bar']!r}\n")
    return 0


# -- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lmenrich", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _add = sub.add_parser

    def add_parser(name, **kw):
        p = _add(name, **kw)
        p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
        return p

    sub.add_parser = add_parser

    def common(p, density=True):
        p.add_argument("--config", help="INI file with a [lmenrich] section")
        p.add_argument("--scheme", help="shipped scheme id or scheme JSON path")
        p.add_argument("--seed", type=int)
        if density:
            p.add_argument("--density", "-D", type=int, help="enriching density D")
        return p

    p = common(sub.add_parser("synth", help="render synthetic scenes with exact ground truth"))
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int)
    p.set_defaults(func=cmd_synth)

    p = common(sub.add_parser("train", help="train the offset regressor"), density=False)
    p.add_argument("--data", required=True, help="directory of images with .pts annotations")
    p.add_argument("--model", required=True, help="output model file")
    p.add_argument("--holdout", help="directory for held-out offset error")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--patch-size", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--one-based", action="store_const", const=True)
    p.set_defaults(func=cmd_train)

    p = common(sub.add_parser("preprocess", help="densify ground-truth annotations (plug in train)"))
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--baseline", help="baseline network name for the output label")
    p.add_argument("--workers", type=int)
    p.add_argument("--dump-patches", help="write the normalized patches as PGM files here")
    p.add_argument("--one-based", action="store_const", const=True)
    p.set_defaults(func=cmd_preprocess)

    p = common(sub.add_parser("enrich", help="densify predicted landmarks (plug in test)"))
    p.add_argument("--image", required=True)
    p.add_argument("--pred", required=True, help=".pts sparse prediction or enriched .json (train+test)")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--overlay", help="overlay image path (default: <out>.overlay.png)")
    p.add_argument("--baseline")
    p.add_argument("--dump-patches")
    p.add_argument("--one-based", action="store_const", const=True)
    p.set_defaults(func=cmd_enrich)

    p = common(sub.add_parser("eval", help="ME / NME_point / NME_edge report"), density=False)
    p.add_argument("--pred", required=True, help="enriched JSON file or directory")
    p.add_argument("--gt", required=True, help="ground-truth enriched JSON or scene files")
    p.add_argument("--json", action="store_true", help="print JSON instead of the table")
    p.add_argument("--out-json")
    p.add_argument("--out-table")
    p.add_argument("--morphometrics", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("score", help="quality scores of dumped patches")
    p.add_argument("--patches", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_score)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(stream=sys.stderr, level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    verbose = args.verbose
    del args.verbose
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"lmenrich {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except EnrichError as exc:
        if verbose:
            log.exception("failed")
        print(f"lmenrich {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except BrokenPipeError:
        sys.stderr.close()
        return 0
    except OSError as exc:
        print(f"lmenrich {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
