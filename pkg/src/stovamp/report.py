"""Figures and a standalone plot script for experiment outputs.

Figures are drawn on explicit Agg canvases (no pyplot state), so they can be
rendered from any thread, though the CLI renders them from the main one.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .metrics import TraceRecord

PLOT_SCRIPT = '''\
"""Plot NMSE (dB) against iteration for one or more trace files.

usage: python plot_trace.py [trace.csv ...] [-o nmse.png]
"""
import argparse
import csv

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def load(path):
    with open(path) as fh:
        rows = list(csv.reader(l for l in fh if not l.startswith("#")))[1:]
    last = {}  # NMSE after the last block step of each iteration
    for r in rows:
        if r[2]:
            last[int(r[0])] = float(r[2])
    its = sorted(last)
    return its, [last[k] for k in its]


ap = argparse.ArgumentParser()
ap.add_argument("traces", nargs="*", default=["trace.csv"])
ap.add_argument("-o", "--output", default="nmse.png")
args = ap.parse_args()
fig, ax = plt.subplots(figsize=(5, 3.5))
for path in args.traces:
    its, nmse = load(path)
    ax.plot(its, nmse, label=path)
ax.set_xlabel("iteration")
ax.set_ylabel("NMSE [dB]")
ax.grid(alpha=0.3)
ax.legend(fontsize=7)
fig.tight_layout()
fig.savefig(args.output, dpi=150)
'''


def write_plot_script(path) -> Path:
    path = Path(path)
    path.write_text(PLOT_SCRIPT)
    return path


def _curve(records: Sequence[TraceRecord]):
    # last record of each iteration
    last = {}
    for r in records:
        if r.nmse_db is not None:
            last[r.iteration] = r.nmse_db
    its = np.array(sorted(last))
    return its, np.array([last[k] for k in its])


def _save(fig: Figure, path) -> Path:
    FigureCanvasAgg(fig)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    return Path(path)


def render_nmse(curves: Mapping[str, Sequence[TraceRecord]], path, target_db: Optional[float] = None,
                title: str = "") -> Path:
    """NMSE in dB against iteration, one line per labelled trace."""
    fig = Figure(figsize=(5.5, 3.6))
    ax = fig.add_subplot()
    for label, recs in curves.items():
        its, db = _curve(recs)
        if its.size:
            ax.plot(its, db, lw=1.2, label=label)
    if target_db is not None:
        ax.axhline(target_db, color="0.4", ls="--", lw=0.8)
    ax.set_xlabel("iteration")
    ax.set_ylabel("NMSE [dB]")
    ax.grid(alpha=0.3)
    if title:
        ax.set_title(title, fontsize=9)
    if 1 < len(curves) <= 12:
        ax.legend(fontsize=7, ncol=2)
    return _save(fig, path)


def render_images(truth: np.ndarray, recon: np.ndarray, path, nmse_db: Optional[float] = None) -> Path:
    """Side-by-side grayscale panels of the original and the phase-aligned reconstruction."""
    fig = Figure(figsize=(7, 3.6))
    for i, (img, name) in enumerate(((truth, "original"), (recon, "reconstruction"))):
        ax = fig.add_subplot(1, 2, i + 1)
        ax.imshow(np.clip(img, 0, 1), cmap="gray", vmin=0, vmax=1)
        if i == 1 and nmse_db is not None:
            name += f" ({nmse_db:.1f} dB)"
        ax.set_title(name, fontsize=9)
        ax.set_axis_off()
    return _save(fig, path)
