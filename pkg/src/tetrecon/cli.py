"""Command-line front end.

Exit codes: 0 on success, 1 on domain errors (bad input data, failed scan,
invalid configuration), 2 on usage errors.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

from threadpoolctl import threadpool_limits

from . import pipeline as pl
from . import report
from .eval import DEFAULT_TAUS, evaluate
from .io import (bundle_from_scan, load_model, load_scene, read_config, read_manifest,
                 read_mesh, read_scan_bundle, save_model, write_manifest, write_mesh,
                 write_scan_bundle, write_scene)
from .io.config import scan_config
from .parallel import set_threads
from .scanner import preset as scan_preset

log = logging.getLogger("tetrecon")


def _floats(text):
    try:
        return [float(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _names(text):
    return [x for x in text.split(",") if x]


def _emit(obj, out=None):
    text = json.dumps(obj, sort_keys=True, indent=1) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _config(args):
    cfg = read_config(args.config)
    if getattr(args, "seed", None) is not None:
        for sec in ("scanner", "train", "eval"):
            cfg[sec]["seed"] = args.seed
    return cfg


# ----------------------------------------------------------------------------
# commands

def cmd_scan(args):
    cfg = _config(args)
    if args.preset:
        scfg = scan_preset(args.preset, seed=cfg["scanner"]["seed"])
    else:
        scfg = scan_config(cfg)
    sc, mesh = pl.scan_shape(args.shape, scfg)
    write_scan_bundle(bundle_from_scan(sc, args.shape, scfg), args.out)
    if args.mesh_out:
        write_mesh(args.mesh_out, mesh)
    _emit({"points": int(len(sc.points)), "cameras": int(len(sc.cameras)),
           "outliers": int(sc.n_outliers), "out": str(args.out)})


def cmd_make_dataset(args):
    cfg = _config(args)
    out = Path(args.out)
    entries = []
    for name in args.shapes:
        for p in args.presets:
            sc, mesh, prep, occ, scfg = pl.build_scene(name, p, cfg)
            bundle = bundle_from_scan(sc, name, scfg)
            e = write_scene(out, f"{name}_{p}", bundle, mesh, occ)
            e.update(shape=name, preset=p)
            entries.append(e)
            log.info("%s/%s: %d points, %d cells", name, p, len(sc.points), prep.tri.n_cells)
    write_manifest(out, entries, {"config": cfg})
    _emit({"scenes": len(entries), "out": str(out)})


def cmd_train(args):
    cfg = _config(args)
    if args.epochs is not None:
        cfg["train"]["epochs"] = args.epochs
    if args.steps_per_epoch is not None:
        cfg["train"]["steps_per_epoch"] = args.steps_per_epoch
    man = read_manifest(args.dataset)
    scenes = []
    for e in man["scenes"]:
        if e.get("shape") in args.exclude:
            continue
        bundle, _, occ, dseed = load_scene(args.dataset, e)
        if occ is None:
            raise ValueError(f"scene {e['name']} has no occupancy")
        prep = pl.prepare_scene(bundle.points, bundle.sighting_cameras(), seed=dseed)
        if prep.tri.n_cells != len(occ):
            raise ValueError(f"scene {e['name']}: occupancy has {len(occ)} cells, "
                             f"the tetrahedralization {prep.tri.n_cells}")
        scenes.append(pl.training_scene(prep, occ))
    if not scenes:
        raise ValueError("no training scenes selected")
    model, hist = pl.train_model(scenes, pl.train_config(cfg), depth=cfg["train"]["depth"])
    save_model(model, args.out_model)
    report.write_loss_csv(args.loss_log or Path(args.out_model).with_suffix(".loss.csv"), hist)
    _emit({"scenes": len(scenes), "epochs": len(hist.epochs),
           "final_loss": hist.losses[-1] if hist.losses else None})


def _prep_from_bundle(path):
    bundle = read_scan_bundle(path)
    return bundle, pl.prepare_scene(bundle.points, bundle.sighting_cameras())


def _clean_cfg(cfg, args):
    c = dict(cfg["clean"])
    if args.clean:
        c["enabled"] = True
    return c


def _finish_recon(rec, args):
    write_mesh(args.out_mesh, rec.mesh)
    _emit(rec.stats, args.stats)


def cmd_reconstruct(args):
    cfg = _config(args)
    en = cfg["energy"]
    lam = en["lambda"] if args.lam is None else args.lam
    alpha = en["alpha_vis"] if args.alpha_vis is None else args.alpha_vis
    if lam < 0 or alpha < 0:
        raise ValueError("lambda and alpha-vis must be >= 0")
    model = load_model(args.model)
    _, prep = _prep_from_bundle(args.scan)
    rec = pl.reconstruct(prep, model, lam, alpha, _clean_cfg(cfg, args), en["pin_infinite"],
                         args.max_cells_in_flight or en["max_cells_in_flight"], args.method)
    _finish_recon(rec, args)


def cmd_baseline(args):
    cfg = _config(args)
    en = cfg["energy"]
    bundle, prep = _prep_from_bundle(args.scan)
    sigma = args.sigma
    if sigma is None:
        sigma = en["baseline_sigma"]
    if sigma is None:
        sc = (bundle.provenance or {}).get("scan_config") or {}
        sigma = sc.get("noise_sigma", 0.0)
    lam = en["baseline_lambda"] if args.lam is None else args.lam
    alpha = en["baseline_alpha_vis"] if args.alpha_vis is None else args.alpha_vis
    rec = pl.baseline(prep, sigma, lam, alpha, _clean_cfg(cfg, args), en["pin_infinite"])
    _finish_recon(rec, args)


def cmd_evaluate(args):
    gt = read_mesh(args.gt_mesh)
    pred = read_mesh(args.pred_mesh)
    rep = evaluate(gt, pred, args.tau, args.samples, args.seed)
    _emit(rep.to_dict(), args.out)


def cmd_pipeline(args):
    cfg = _config(args)
    if args.epochs is not None:
        cfg["train"]["epochs"] = args.epochs
    if args.steps_per_epoch is not None:
        cfg["train"]["steps_per_epoch"] = args.steps_per_epoch
    if args.samples is not None:
        cfg["eval"]["samples"] = args.samples
    holdout = args.holdout or args.shapes[-1]
    exp = pl.run_experiment(args.shapes, args.presets, holdout, cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_model(exp.model, out / "model.json")
    report.write_loss_csv(out / "loss.csv", exp.history)
    report.write_results_csv(out / "results.csv", exp.rows)
    report.write_json(out / "metrics.json", {"holdout": holdout, "shapes": args.shapes,
                                             "presets": args.presets, "rows": exp.rows,
                                             "losses": exp.history.losses, "config": cfg})
    report.write_json(out / "timings.json", exp.timings)
    report.plot_loss(out / "loss.png", exp.history)
    report.plot_metrics(out / "metrics.png", exp.rows)
    write_mesh(out / f"{holdout}.gt.ply", exp.gt_mesh)
    for (p, m), mesh in exp.meshes.items():
        write_mesh(out / f"{holdout}_{p}_{m}.ply", mesh)
    for r in exp.rows:
        print(f"{r['shape']:>10} {r['preset']:>5} {r['method']:>9}  iou {_fmt(r['iou'])}  "
              f"chamfer {_fmt(r['chamfer'])}  components {r['components']}", file=sys.stderr)
    _emit({"out_dir": str(out), "rows": len(exp.rows)})


def _fmt(v):
    return "   n/a" if v is None else f"{v:.4f}"


# ----------------------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=1,
                        help="worker threads for visibility and occupancy (default 1)")
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="tetrecon", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scan", parents=[common], help="range-scan a procedural shape")
    p.add_argument("--shape", required=True, help="catalog name or shape kind")
    p.add_argument("--preset", choices=list(pl.PRESET_NAMES))
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="output .ply (a .json sidecar is written next to it)")
    p.add_argument("--mesh-out", help="also write the scanned ground-truth mesh")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("make-dataset", parents=[common], help="scan shapes and store occupancy")
    p.add_argument("--shapes", type=_names, default=list(pl.SHAPES))
    p.add_argument("--presets", type=_names, default=list(pl.PRESET_NAMES))
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_make_dataset)

    p = sub.add_parser("train", parents=[common], help="train the occupancy network")
    p.add_argument("--dataset", required=True)
    p.add_argument("--exclude", type=_names, default=[], help="shapes left out of training")
    p.add_argument("--epochs", type=int)
    p.add_argument("--steps-per-epoch", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out-model", required=True)
    p.add_argument("--loss-log", help="loss CSV (default: next to the model)")
    p.set_defaults(func=cmd_train)

    for name, helptext in (("reconstruct", "reconstruct a scan with a trained model"),
                           ("baseline", "reconstruct a scan from handcrafted visibility")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--scan", required=True)
        p.add_argument("--lambda", dest="lam", type=float)
        p.add_argument("--alpha-vis", type=float)
        p.add_argument("--clean", action="store_true", help="remove spike faces and small parts")
        p.add_argument("--out-mesh", required=True)
        p.add_argument("--stats", help="stats JSON path (default stdout)")
        if name == "reconstruct":
            p.add_argument("--model", required=True)
            p.add_argument("--method", choices=["graphcut", "direct"], default="graphcut")
            p.add_argument("--max-cells-in-flight", type=int)
            p.set_defaults(func=cmd_reconstruct)
        else:
            p.add_argument("--sigma", type=float, help="noise scale (default: from the scan)")
            p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("evaluate", parents=[common], help="compare two meshes")
    p.add_argument("--gt-mesh", required=True)
    p.add_argument("--pred-mesh", required=True)
    p.add_argument("--tau", type=_floats, default=list(DEFAULT_TAUS))
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="report JSON path (default stdout)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("pipeline", parents=[common],
                       help="scan, train, reconstruct and evaluate a held-out shape")
    p.add_argument("--shapes", type=_names, default=list(pl.SHAPES))
    p.add_argument("--presets", type=_names, default=list(pl.PRESET_NAMES))
    p.add_argument("--holdout", help="held-out shape (default: the last one)")
    p.add_argument("--epochs", type=int)
    p.add_argument("--steps-per-epoch", type=int)
    p.add_argument("--samples", type=int, help="evaluation samples")
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_pipeline)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.threads < 1:
        ap.error("--threads must be >= 1")
    if hasattr(args, "presets"):
        bad = [p for p in args.presets if p not in pl.PRESET_NAMES]
        if bad:
            ap.error(f"unknown presets {bad}")
    set_threads(args.threads)
    try:
        # BLAS stays single-threaded so results never depend on --threads
        with threadpool_limits(limits=1):
            args.func(args)
    except (ValueError, KeyError, OSError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
