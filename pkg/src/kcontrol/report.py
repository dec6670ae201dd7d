"""Figure rendering for experiment runs.

Reads the predictions CSV written by the runner and drops PNG figures next
to it: an error histogram for every task, a target-vs-prediction curve for
one-dimensional regression, and a training-cost curve when a history is
available.
"""

from __future__ import annotations

import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def _load_predictions(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    body = np.asarray([[float(v) for v in r] for r in rows[1:]])
    xcols = [i for i, name in enumerate(header) if name.startswith("x")]
    return (body[:, xcols], body[:, header.index("y")],
            body[:, header.index("prediction")],
            body[:, header.index("error")])


def render_figures(predictions_path, task, history=None, out_dir=None):
    """Render figures alongside the predictions CSV; returns written paths."""
    X, y, pred, err = _load_predictions(predictions_path)
    if out_dir is None:
        out_dir = os.path.dirname(os.path.abspath(predictions_path))
    stem = os.path.splitext(os.path.basename(predictions_path))[0]
    written = []

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(err, bins=40, color="steelblue", edgecolor="white")
    ax.set_xlabel("prediction error")
    ax.set_ylabel("count")
    ax.set_title("Test-set prediction error")
    path = os.path.join(out_dir, f"{stem}_error_hist.png")
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    written.append(path)

    if task == "regression" and X.shape[1] == 1:
        order = np.argsort(X[:, 0])
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(X[order, 0], y[order], ".", ms=3, label="target", alpha=0.5)
        ax.plot(X[order, 0], pred[order], ".", ms=3, label="model", alpha=0.5)
        ax.set_xlabel("x")
        ax.set_ylabel("value")
        ax.legend()
        path = os.path.join(out_dir, f"{stem}_fit.png")
        fig.savefig(path, dpi=120, bbox_inches="tight")
        plt.close(fig)
        written.append(path)

    if history:
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.semilogy(np.maximum(np.asarray(history, dtype=float), 1e-300))
        ax.set_xlabel("iteration")
        ax.set_ylabel("minibatch cost")
        path = os.path.join(out_dir, f"{stem}_history.png")
        fig.savefig(path, dpi=120, bbox_inches="tight")
        plt.close(fig)
        written.append(path)

    return written
