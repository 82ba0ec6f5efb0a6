"""Command-line front end.

Subcommands mirror the pipeline stages: ``partition``, ``spread``,
``enhance``, ``loss``, ``metrics``, plus ``synth`` for phantom data and
``pipeline`` to run everything end to end on one config.

Conventions shared by every subcommand:

* ``--config FILE`` supplies defaults as a flat JSON object whose keys
  mirror the command's flags; explicit flags win.
* exit codes: 0 success, 2 I/O failure, 3 invalid input.
* ``PLESS_LOG`` (debug/info/warning/error) controls stderr verbosity.
* outputs are bitwise deterministic for identical inputs and seeds.

Label maps travel as binary PGM or as uint8 tensor files, chosen by
extension; probability maps and reliefs as float32 tensor files.
"""

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .enhancement import EnhancementConfig, enhance_pseudo_labels, fuse_predictions
from .hierarchy import build_hierarchy
from .io import (
    DEFAULT_UNLABELED,
    VolumeMeta,
    load_meta,
    read_labelmap_image,
    read_tensor,
    save_meta,
    write_labelmap_pgm,
    write_tensor,
)
from .loss import DiceConfig, pseudo_label_loss, soft_dice_loss
from .metrics import evaluate
from .spreading import (
    SpreadVariant,
    enhance_scribbles,
    expand_background,
    full_propagation,
    spread_scribbles,
)
from .synth import make_phantom

log = logging.getLogger("pless")

_LABEL_EXTS = (".pgm", ".png")


def _configure_logging():
    raw = os.environ.get("PLESS_LOG", "warning")
    level = getattr(logging, raw.upper(), None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(stream=sys.stderr, level=level, format="%(levelname)s %(name)s: %(message)s")


def _load_config(path, allowed):
    """Flat JSON defaults for one subcommand; unknown keys are an error."""
    if path is None:
        return {}
    with open(path, encoding="ascii") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"config is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ValueError("config must be a JSON object")
    extra = set(doc) - set(allowed)
    if extra:
        raise ValueError(f"unknown config keys: {sorted(extra)}")
    return doc


def _setting(args, config, key, default):
    value = getattr(args, key, None)
    if value is None:
        value = config.get(key, default)
    return value


def _read_labels(path):
    path = str(path)
    if path.endswith(_LABEL_EXTS):
        return read_labelmap_image(path)
    data = read_tensor(path)
    if data.ndim != 2 or not np.issubdtype(data.dtype, np.integer):
        raise ValueError(f"{path}: expected a 2D integer label tensor")
    if data.max() > 255:
        raise ValueError(f"{path}: label codes exceed 255")
    return data.astype(np.uint8)


def _write_labels(path, codes):
    path = str(path)
    if path.endswith(_LABEL_EXTS):
        write_labelmap_pgm(path, codes)
    else:
        write_tensor(path, np.asarray(codes, dtype=np.uint8))


def _read_image(path):
    path = str(path)
    if path.endswith(_LABEL_EXTS):
        return read_labelmap_image(path).astype(np.float64)
    data = read_tensor(path)
    if data.ndim != 2:
        raise ValueError(f"{path}: expected a 2D image tensor")
    return data


def _read_probs(path):
    data = read_tensor(str(path))
    if data.ndim != 3:
        raise ValueError(f"{path}: expected a (C, H, W) probability tensor")
    return data


def _dump_json(doc, path=None):
    text = json.dumps(doc, indent=2, sort_keys=True)
    if path is None:
        print(text)
    else:
        with open(path, "w", encoding="ascii") as fh:
            fh.write(text + "\n")


def cmd_partition(args):
    config = _load_config(args.config, {"max_layers"})
    max_layers = int(_setting(args, config, "max_layers", 4))
    image = _read_image(args.image)
    hier = build_hierarchy(image, max_layers=max_layers)
    if args.check:
        hier.check_nesting()
    os.makedirs(args.out_dir, exist_ok=True)
    for k, layer in enumerate(hier.layers):
        if layer.max() >= 2**16:
            raise ValueError(f"layer {k} has too many regions for uint16 serialization")
        write_tensor(os.path.join(args.out_dir, f"layer_{k:02d}.plt"), layer.astype(np.uint16))
    doc = {
        "num_layers": hier.num_layers,
        "region_counts": hier.region_counts(),
        "parents": [p.tolist() for p in hier.parents],
    }
    _dump_json(doc, os.path.join(args.out_dir, "hierarchy.json"))
    log.info("partition: %d layers, region counts %s", hier.num_layers, hier.region_counts())
    return 0


def cmd_spread(args):
    config = _load_config(args.config, {"variant", "max_layers"})
    variant = SpreadVariant.parse(_setting(args, config, "variant", "enh+bg"))
    max_layers = int(_setting(args, config, "max_layers", 4))
    image = _read_image(args.image)
    scribbles = _read_labels(args.scribbles)
    hier = build_hierarchy(image, max_layers=max_layers)
    spread = spread_scribbles(hier, scribbles)
    enhanced = spread
    if variant in (SpreadVariant.ENH_BG, SpreadVariant.ENH_BG_PROP):
        enhanced = expand_background(enhanced)
    if variant is SpreadVariant.ENH_BG_PROP:
        enhanced = full_propagation(enhanced)
    os.makedirs(args.out_dir, exist_ok=True)
    _write_labels(os.path.join(args.out_dir, "spread.plt"), spread)
    _write_labels(os.path.join(args.out_dir, "enhanced.plt"), enhanced)
    labeled = int((enhanced != DEFAULT_UNLABELED).sum())
    log.info("spread: variant %s, %d of %d pixels labeled", variant.value, labeled, enhanced.size)
    return 0


def cmd_enhance(args):
    config_keys = {"tau", "e_max", "variant", "fusion"}
    config = _load_config(args.config, config_keys)
    cfg = EnhancementConfig.from_mapping(
        {
            "tau": _setting(args, config, "tau", 0.25),
            "e_max": _setting(args, config, "e_max", 100),
            "variant": _setting(args, config, "variant", "enh+bg"),
            "fusion": _setting(args, config, "fusion", "average"),
        }
    )
    if args.ppl is not None:
        if args.ps is not None or args.pt is not None:
            raise ValueError("give either --ppl or the --ps/--pt pair, not both")
        p_pl = _read_labels(args.ppl)
    else:
        if args.ps is None or args.pt is None:
            raise ValueError("need --ppl, or both --ps and --pt")
        p_pl = fuse_predictions(_read_probs(args.ps), _read_probs(args.pt), cfg.fusion)
    s_enh = _read_labels(args.s_enh)
    out = enhance_pseudo_labels(p_pl, s_enh, args.epoch, cfg)
    _write_labels(args.out, out)
    log.info("enhance: epoch %d, cutoff %.2f, %s", args.epoch, cfg.cutoff,
             "blended" if args.epoch <= cfg.cutoff else "passthrough")
    return 0


def cmd_loss(args):
    config = _load_config(args.config, {"epsilon", "class_average"})
    cfg = DiceConfig(
        epsilon=float(_setting(args, config, "epsilon", 1e-5)),
        class_average=bool(_setting(args, config, "class_average", True)),
    )
    ps = _read_probs(args.ps)
    pt = _read_probs(args.pt)
    target = _read_labels(args.target)
    total_s, per_s = soft_dice_loss(ps, target, cfg)
    total_t, per_t = soft_dice_loss(pt, target, cfg)
    doc = {
        "loss_pl": pseudo_label_loss(ps, pt, target, cfg),
        "student": {"total": total_s, "per_class": per_s.tolist()},
        "teacher": {"total": total_t, "per_class": per_t.tolist()},
    }
    _dump_json(doc, args.out)
    return 0


def cmd_metrics(args):
    config = _load_config(args.config, {"spacing_mm", "classes", "unlabeled"})
    if args.meta is not None:
        meta = load_meta(args.meta)
    elif config:
        meta = VolumeMeta.from_json(
            {
                "spacing_mm": config.get("spacing_mm", [1.0, 1.0, 1.0]),
                "classes": config.get("classes", ["BG", "RV", "MYO", "LV"]),
                "unlabeled": config.get("unlabeled", DEFAULT_UNLABELED),
            }
        )
    else:
        meta = VolumeMeta()
    pred = read_tensor(args.pred)
    gt = read_tensor(args.gt)
    report = evaluate(pred, gt, meta)
    _dump_json(report.to_dict(), args.out)
    return 0


def cmd_synth(args):
    config = _load_config(args.config, {"seed", "size"})
    seed = int(_setting(args, config, "seed", 0))
    size = int(_setting(args, config, "size", 64))
    sample = make_phantom(seed, size=size)
    os.makedirs(args.out_dir, exist_ok=True)
    out = lambda name: os.path.join(args.out_dir, name)
    write_tensor(out("image.plt"), sample.image)
    write_labelmap_pgm(out("gt.pgm"), sample.gt)
    write_labelmap_pgm(out("scribbles.pgm"), sample.scribbles)
    write_tensor(out("ps.plt"), sample.ps)
    write_tensor(out("pt.plt"), sample.pt)
    save_meta(out("meta.json"), sample.meta)
    log.info("synth: seed %d written to %s", seed, args.out_dir)
    return 0


_PIPELINE_KEYS = {
    "seed", "seeds", "image", "scribbles", "ps", "pt", "gt",
    "tau", "e_max", "variant", "fusion", "epsilon", "class_average",
    "epochs", "max_layers", "out_dir",
}


def _pipeline_case(name, image, scribbles, ps, pt, gt, cfg, dice_cfg, epochs, max_layers):
    """One slice through the full dataflow; returns its report entry."""
    hier = build_hierarchy(image, max_layers=max_layers)
    spread = spread_scribbles(hier, scribbles)
    s_enh = enhance_scribbles(image, scribbles, variant=cfg.variant, hier=hier)
    p_pl = fuse_predictions(ps, pt, cfg.fusion)
    entry = {
        "case": name,
        "coverage": {
            "scribbles": float((scribbles != DEFAULT_UNLABELED).mean()),
            "spread": float((spread != DEFAULT_UNLABELED).mean()),
            "enhanced": float((s_enh != DEFAULT_UNLABELED).mean()),
        },
        "losses": [],
    }
    for e in epochs:
        p_enh = enhance_pseudo_labels(p_pl, s_enh, e, cfg)
        entry["losses"].append(
            {
                "epoch": int(e),
                "enhanced": bool(e <= cfg.cutoff),
                "loss": pseudo_label_loss(ps, pt, p_enh, dice_cfg),
            }
        )
    if gt is not None:
        p_enh0 = enhance_pseudo_labels(p_pl, s_enh, 0, cfg)
        entry["accuracy"] = {
            "pseudo": float((p_pl == gt).mean()),
            "enhanced": float((p_enh0 == gt).mean()),
        }
        report = evaluate(p_enh0[..., None], gt[..., None], VolumeMeta())
        entry["metrics"] = report.to_dict()
    return entry


def cmd_pipeline(args):
    config = _load_config(args.config, _PIPELINE_KEYS)
    cfg = EnhancementConfig.from_mapping(
        {
            "tau": config.get("tau", 0.25),
            "e_max": config.get("e_max", 100),
            "variant": config.get("variant", "enh+bg"),
            "fusion": config.get("fusion", "average"),
        }
    )
    dice_cfg = DiceConfig(
        epsilon=float(config.get("epsilon", 1e-5)),
        class_average=bool(config.get("class_average", True)),
    )
    max_layers = int(config.get("max_layers", 4))
    epochs = config.get("epochs", "all")
    if epochs == "all":
        epochs = list(range(cfg.e_max + 1))
    epochs = [int(e) for e in epochs]

    cases = []
    if "seeds" in config or "seed" in config:
        seeds = config.get("seeds", [config.get("seed", 0)])
        if not isinstance(seeds, list):
            seeds = [seeds]
        for s in seeds:
            sample = make_phantom(int(s))
            cases.append((f"seed-{s}", sample.image.astype(np.float64), sample.scribbles,
                          sample.ps.astype(np.float64), sample.pt.astype(np.float64), sample.gt))
    else:
        for key in ("image", "scribbles", "ps", "pt"):
            if key not in config:
                raise ValueError(f"pipeline config needs {key!r} (or a seed)")
        gt = _read_labels(config["gt"]) if "gt" in config else None
        cases.append(("paths", _read_image(config["image"]), _read_labels(config["scribbles"]),
                      _read_probs(config["ps"]), _read_probs(config["pt"]), gt))

    def run(case):
        name, image, scribbles, ps, pt, gt = case
        return _pipeline_case(name, image, scribbles, ps, pt, gt, cfg, dice_cfg, epochs, max_layers)

    jobs = args.jobs or 1
    if jobs > 1 and len(cases) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            entries = list(ex.map(run, cases))  # map preserves submission order
    else:
        entries = [run(c) for c in cases]

    doc = {
        "config": {
            "tau": cfg.tau,
            "e_max": cfg.e_max,
            "variant": cfg.variant.value,
            "fusion": cfg.fusion.value,
            "epsilon": dice_cfg.epsilon,
            "class_average": dice_cfg.class_average,
        },
        "cases": entries,
    }
    _dump_json(doc, args.out)
    return 0


def _build_parser():
    parser = argparse.ArgumentParser(prog="pless", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("partition", help="build and save a waterfall hierarchy")
    p.add_argument("image")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--max-layers", dest="max_layers", type=int)
    p.add_argument("--check", action="store_true", help="validate layer nesting before writing")
    p.add_argument("--config")
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("spread", help="spread scribbles into enhanced scribbles")
    p.add_argument("image")
    p.add_argument("scribbles")
    p.add_argument("--variant")
    p.add_argument("--max-layers", dest="max_layers", type=int)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--config")
    p.set_defaults(func=cmd_spread)

    p = sub.add_parser("enhance", help="blend enhanced scribbles into pseudo-labels")
    p.add_argument("--ppl", help="precomputed pseudo-label map")
    p.add_argument("--ps", help="student probabilities (fused with --pt when no --ppl)")
    p.add_argument("--pt", help="teacher probabilities")
    p.add_argument("--s-enh", dest="s_enh", required=True)
    p.add_argument("--epoch", type=int, required=True)
    p.add_argument("--tau", type=float)
    p.add_argument("--e-max", dest="e_max", type=int)
    p.add_argument("--fusion")
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("loss", help="Dice pseudo-label loss of two probability maps")
    p.add_argument("--ps", required=True)
    p.add_argument("--pt", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--out")
    p.add_argument("--config")
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("metrics", help="DSC/HD95/ASD of two label volumes")
    p.add_argument("pred")
    p.add_argument("gt")
    p.add_argument("--meta", help="JSON sidecar with spacing and classes")
    p.add_argument("--out")
    p.add_argument("--config")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("synth", help="generate a deterministic phantom case")
    p.add_argument("--seed", type=int)
    p.add_argument("--size", type=int)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--config")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("pipeline", help="run the full dataflow from a config")
    p.add_argument("--config", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv=None):
    _configure_logging()
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
