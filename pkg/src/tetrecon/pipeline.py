"""End-to-end stages: scan a shape, prepare a scene, train, reconstruct, evaluate."""

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .cut import build_energy, direct_threshold, labatut_unaries, min_cut_solve
from .features import apply_normalizer, compute_features
from .geom import build_delaunay
from .mesh import clean_mesh, extract_surface, topology_stats
from .net import OccupancyModel, Scene, TrainConfig, graph_from_tri, predict_scores, train
from .net.model import WIDTHS
from .raycast import accumulate_visibility
from .scanner import generate_shape, occupancy_ground_truth, prescale, scan

log = logging.getLogger(__name__)

PRESET_NAMES = ("LR", "HR", "HRN", "HRO", "HRNO")

# Desk-scale shape catalog: name -> (kind, params, seed)
SHAPES = {
    "sphere": ("sphere", {"radius": 1.0, "subdivisions": 4}, 0),
    "box": ("box", {"size": (1.0, 1.0, 1.0)}, 0),
    "slab": ("box", {"size": (1.0, 0.6, 0.35)}, 0),
    "ellipsoid": ("ellipsoid", {"radii": (1.0, 0.7, 0.5), "subdivisions": 4}, 0),
    "cigar": ("ellipsoid", {"radii": (1.0, 0.45, 0.4), "subdivisions": 4}, 0),
    "torus": ("torus", {"major": 1.0, "minor": 0.4}, 0),
    "blob-a": ("union-of-spheres", {"count": 4}, 1),
    "blob-b": ("union-of-spheres", {"count": 5}, 2),
}


def shape_mesh(name):
    """Prescaled mesh of a catalog shape, or of a bare shape kind with default parameters."""
    if name in SHAPES:
        kind, params, seed = SHAPES[name]
    else:
        kind, params, seed = name, None, 0
    return prescale(generate_shape(kind, params, seed))


class Timer:
    def __init__(self):
        self.times = {}

    def __call__(self, name):
        timer = self

        class _Span:
            def __enter__(self):
                self.t = time.perf_counter()

            def __exit__(self, *exc):
                timer.times[name] = timer.times.get(name, 0.0) + time.perf_counter() - self.t

        return _Span()


@dataclass
class PreparedScene:
    tri: object
    cameras: np.ndarray        # (n_sightings, 3)
    refs: np.ndarray           # vertex id of each sighting
    features: np.ndarray       # raw features
    graph: object
    timings: dict = field(default_factory=dict)

    @property
    def volumes(self):
        return self.features[:, 8]

    @property
    def finite(self):
        return ~self.tri.infinite


def prepare_scene(points, sighting_cameras, threads=None, seed=0):
    """3DT, visibility features and cell graph for points observed from the given cameras."""
    timer = Timer()
    with timer("3dt"):
        tri = build_delaunay(points, seed=seed)
    refs = tri.input_index
    with timer("features"):
        stats = accumulate_visibility(tri, sighting_cameras, refs, threads=threads)
        features = compute_features(tri, stats)
    graph = graph_from_tri(tri)
    return PreparedScene(tri, np.asarray(sighting_cameras, dtype=np.float64), refs, features,
                         graph, timer.times)


def training_scene(prep, occupancy):
    return Scene(prep.graph, prep.features, np.asarray(occupancy, dtype=np.float64),
                 np.where(prep.finite, prep.volumes, 0.0), prep.finite)


def scene_occupancy(prep, mesh, samples=100, seed=0, threads=None):
    return occupancy_ground_truth(prep.tri, mesh, samples_per_cell=samples, seed=seed,
                                  threads=threads)


def model_widths(depth):
    """Layer widths for a K-layer network: the default widths, cut or extended at 256."""
    return tuple(WIDTHS[:depth]) + (WIDTHS[-1],) * max(0, depth - len(WIDTHS))


def train_model(scenes, tcfg, model=None, depth=len(WIDTHS)):
    model = model or OccupancyModel(widths=model_widths(depth), seed=tcfg.seed)
    hist = train(model, scenes, tcfg)
    return model, hist


def train_config(cfg):
    t = cfg["train"]
    return TrainConfig(epochs=t["epochs"], batch_size=t["batch_size"], lr=t["lr"],
                       lr_decay_every=t["lr_decay_every"], lr_decay=t["lr_decay"],
                       steps_per_epoch=t["steps_per_epoch"], seed=t["seed"])


@dataclass
class Reconstruction:
    mesh: object               # surface after optional cleaning
    raw_mesh: object           # uncleaned interface surface
    labels: np.ndarray
    scores: np.ndarray
    stats: dict


def _finish(prep, scores, labels, energy, clean, timer, extra):
    with timer("extract"):
        raw = extract_surface(prep.tri, labels)
        mesh = clean_mesh(raw, clean["edge_factor"], clean["min_component_faces"]) \
            if clean.get("enabled") else raw
    topo = topology_stats(mesh)
    stats = {
        "points": int(len(prep.refs)),
        "vertices": int(len(prep.tri.points)),
        "cells": int(prep.tri.n_cells),
        "finite_cells": int(prep.tri.n_finite),
        "inside_cells": int(np.count_nonzero(labels)),
        "energy": energy,
        "faces": int(mesh.n_faces),
        "cleaned": bool(clean.get("enabled")),
        **topo,
        "timings": {k: round(v, 6) for k, v in {**prep.timings, **timer.times}.items()},
    }
    stats.update(extra)
    return Reconstruction(mesh, raw, labels, scores, stats)


def network_scores(prep, model, max_cells_in_flight=20000):
    X = apply_normalizer(model.normalizer, prep.features, prep.finite)
    return predict_scores(model, prep.graph, X, max_cells_in_flight)


def reconstruct(prep, model, lam=1.0, alpha_vis=100.0, clean=None, pin_infinite=True,
                max_cells_in_flight=20000, method="graphcut"):
    """Label the cells of a prepared scene and extract the surface.

    ``method`` is "graphcut" (energy minimization) or "direct" (thresholding
    the predicted occupancy at 0.5).  With ``pin_infinite`` the direct labels
    of infinite cells are set to Outside too, as the graph cut does.
    """
    clean = clean or {"enabled": False}
    timer = Timer()
    with timer("inference"):
        scores = network_scores(prep, model, max_cells_in_flight)
    with timer("graphcut"):
        if method == "direct":
            sol = direct_threshold(scores)
            if pin_infinite:
                sol.labels[prep.tri.infinite] = 0
        elif method == "graphcut":
            inst = build_energy(scores, prep.tri, lam, alpha_vis, cameras=prep.cameras,
                                pin_infinite=pin_infinite)
            sol = min_cut_solve(inst)
        else:
            raise ValueError(f"unknown method {method!r}")
    energy = None if np.isnan(sol.energy) else sol.energy
    return _finish(prep, scores, sol.labels, energy, clean, timer,
                   {"method": method, "lambda": lam, "alpha_vis": alpha_vis})


def baseline(prep, sigma, lam=5.0, alpha_vis=32.0, clean=None, pin_infinite=True):
    """Reconstruction from handcrafted visibility evidence instead of network scores."""
    clean = clean or {"enabled": False}
    timer = Timer()
    with timer("inference"):
        scores = labatut_unaries(prep.tri, prep.cameras, prep.refs, sigma, alpha_vis)
    with timer("graphcut"):
        inst = build_energy(scores, prep.tri, lam, alpha_vis, cameras=prep.cameras,
                            pin_infinite=pin_infinite)
        sol = min_cut_solve(inst)
    return _finish(prep, scores, sol.labels, sol.energy, clean, timer,
                   {"method": "baseline", "lambda": lam, "alpha_vis": alpha_vis,
                    "sigma": float(sigma)})


def scan_shape(name, config):
    mesh = shape_mesh(name)
    return scan(mesh, config, prescaled=True), mesh


def baseline_sigma(cfg, scan_cfg):
    s = cfg["energy"]["baseline_sigma"]
    return scan_cfg.noise_sigma if s is None else s


def build_scene(name, preset_name, cfg, threads=None, with_occupancy=True):
    """Scan a catalog shape with a preset and prepare its scene (and ground truth)."""
    from .io.config import scan_config
    scfg = scan_config(cfg, preset=preset_name)
    sc, mesh = scan_shape(name, scfg)
    prep = prepare_scene(sc.points, sc.sighting_cameras(), threads=threads)
    occ = None
    if with_occupancy:
        occ = scene_occupancy(prep, mesh, cfg["train"]["occupancy_samples"],
                              seed=cfg["train"]["seed"], threads=threads)
    return sc, mesh, prep, occ, scfg


def evaluate_row(shape, preset_name, rec, gt_mesh, cfg):
    from .eval import evaluate
    e = cfg["eval"]
    row = {"shape": shape, "preset": preset_name, "method": rec.stats["method"],
           "points": rec.stats["points"], "cells": rec.stats["cells"],
           "components": rec.stats["components"],
           "non_manifold_edges": rec.stats["non_manifold_edges"],
           "watertight": rec.stats["watertight"], "faces": rec.stats["faces"],
           "iou": None, "chamfer": None, "chamfer_normalized": None, "fscores": None}
    if rec.mesh.n_faces:
        rep = evaluate(gt_mesh, rec.mesh, e["taus"], e["samples"], e["seed"])
        row.update(iou=rep.iou, chamfer=rep.chamfer, chamfer_normalized=rep.chamfer_normalized,
                   fscores=rep.fscores)
    return row


@dataclass
class Experiment:
    rows: list
    history: object
    model: object
    meshes: dict               # (preset, method) -> surface mesh
    gt_mesh: object
    timings: dict


def run_experiment(shapes, presets, holdout, cfg, threads=None, methods=("graphcut", "direct",
                                                                          "baseline"),
                   on_reconstruction=None):
    """Train on every shape but ``holdout`` (all presets), then reconstruct the held-out scans.

    ``on_reconstruction(preset, method, prep, rec)`` is called for every
    reconstruction, e.g. to audit labels against the tetrahedralization.
    """
    if holdout not in shapes:
        raise ValueError(f"held-out shape {holdout!r} is not among {list(shapes)}")
    timer = Timer()
    scenes = []
    with timer("dataset"):
        for name in shapes:
            if name == holdout:
                continue
            for p in presets:
                _, _, prep, occ, _ = build_scene(name, p, cfg, threads)
                scenes.append(training_scene(prep, occ))
                log.info("scene %s/%s: %d cells", name, p, prep.tri.n_cells)
    with timer("train"):
        model, hist = train_model(scenes, train_config(cfg), depth=cfg["train"]["depth"])
    del scenes
    en = cfg["energy"]
    rows, meshes = [], {}
    gt = None
    with timer("reconstruct"):
        for p in presets:
            _, gt, prep, _, scfg = build_scene(holdout, p, cfg, threads, with_occupancy=False)
            for m in methods:
                if m == "baseline":
                    rec = baseline(prep, baseline_sigma(cfg, scfg), en["baseline_lambda"],
                                   en["baseline_alpha_vis"], cfg["clean"], en["pin_infinite"])
                else:
                    rec = reconstruct(prep, model, en["lambda"], en["alpha_vis"], cfg["clean"],
                                      en["pin_infinite"], en["max_cells_in_flight"], method=m)
                meshes[(p, m)] = rec.mesh
                if on_reconstruction is not None:
                    on_reconstruction(p, m, prep, rec)
                rows.append(evaluate_row(holdout, p, rec, gt, cfg))
                log.info("%s/%s %s: iou %s chamfer %s components %d", holdout, p, m,
                         rows[-1]["iou"], rows[-1]["chamfer"], rows[-1]["components"])
    return Experiment(rows, hist, model, meshes, gt, timer.times)
