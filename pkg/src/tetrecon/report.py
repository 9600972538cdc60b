"""Tables and figures for pipeline runs (CSV, JSON, PNG via the Agg backend)."""

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
}
METHOD_COLORS = {"graphcut": "#1f77b4", "direct": "#ff7f0e", "baseline": "#2ca02c"}

RESULT_FIELDS = ["shape", "preset", "method", "points", "cells", "iou", "chamfer",
                 "chamfer_normalized", "components", "non_manifold_edges", "watertight", "faces"]


def write_loss_csv(path, history):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["epoch", "lr", "loss"])
        for e, lr, loss in zip(history.epochs, history.lrs, history.losses):
            w.writerow([e, repr(lr), repr(loss)])


def write_results_csv(path, rows):
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=RESULT_FIELDS, extrasaction="ignore",
                           lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: r.get(k) for k in RESULT_FIELDS})


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n")


def plot_loss(path, history):
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(4.0, 2.6))
        ax.plot(history.epochs, history.losses, marker="o", ms=3, color="k")
        ax.set_xlabel("epoch")
        ax.set_ylabel("training loss")
        ax2 = ax.twinx()
        ax2.step(history.epochs, history.lrs, where="post", color="0.6", lw=1)
        ax2.set_yscale("log")
        ax2.set_ylabel("learning rate", color="0.4")
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)


def plot_metrics(path, rows):
    """IoU, Chamfer and component count per preset, one bar per method."""
    presets = sorted({r["preset"] for r in rows}, key=_preset_key)
    methods = [m for m in METHOD_COLORS if any(r["method"] == m for r in rows)]
    panels = [("iou", "volumetric IoU", False), ("chamfer", "Chamfer (units$^2$)", True),
              ("components", "components", True)]
    with plt.rc_context(RC):
        fig, axes = plt.subplots(1, 3, figsize=(9.0, 2.6))
        width = 0.8 / max(1, len(methods))
        for ax, (key, label, logy) in zip(axes, panels):
            for j, m in enumerate(methods):
                vals = []
                for p in presets:
                    v = [r[key] for r in rows if r["preset"] == p and r["method"] == m]
                    vals.append(float(v[0]) if v and v[0] is not None else float("nan"))
                xs = [i + (j - (len(methods) - 1) / 2) * width for i in range(len(presets))]
                ax.bar(xs, vals, width, label=m, color=METHOD_COLORS[m])
            ax.set_xticks(range(len(presets)))
            ax.set_xticklabels(presets)
            ax.set_ylabel(label)
            if logy:
                ax.set_yscale("log")
        handles, labels = axes[0].get_legend_handles_labels()
        fig.legend(handles, labels, loc="upper center", ncol=len(methods), frameon=False)
        fig.tight_layout(rect=(0, 0, 1, 0.9))
        fig.savefig(path)
        plt.close(fig)


def _preset_key(p):
    order = ["LR", "HR", "HRN", "HRO", "HRNO"]
    return (order.index(p) if p in order else len(order), p)
