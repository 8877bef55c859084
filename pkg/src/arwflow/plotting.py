"""Figure rendering for trajectories, limit paths and verification reports.

All figures are written with pinned metadata so a fixed input yields
byte-identical SVG output.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

matplotlib.rcParams["svg.hashsalt"] = "arwflow"


def save_figure(fig, path):
    path = str(path)
    if path.endswith(".svg"):
        fig.savefig(path, format="svg", metadata={"Date": None, "Creator": "arwflow"})
    else:
        fig.savefig(path)
    plt.close(fig)


def staircase_figure(xs, values, title="", xlabel="x", ylabel="C"):
    fig, ax = plt.subplots(figsize=(7, 4))
    xs = np.asarray(xs, dtype=float)
    values = np.asarray(values, dtype=float)
    if xs.size:
        ax.step(xs, values, where="post", lw=1.0)
    else:
        ax.axhline(0.0, lw=1.0)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return fig


def line_figure(xs, values, title="", xlabel="x", ylabel="value"):
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(np.asarray(xs, dtype=float), np.asarray(values, dtype=float), lw=0.8)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return fig


def rho_panel_figure(panels, title=""):
    """Grid of staircase panels; ``panels`` is a list of (label, xs, values)."""
    ncol = 3
    nrow = (len(panels) + ncol - 1) // ncol
    fig, axes = plt.subplots(nrow, ncol, figsize=(4 * ncol, 2.8 * nrow), squeeze=False)
    for ax in axes.flat:
        ax.set_visible(False)
    for ax, (label, xs, values) in zip(axes.flat, panels):
        ax.set_visible(True)
        ax.step(np.asarray(xs, dtype=float), np.asarray(values, dtype=float),
                where="post", lw=0.8)
        ax.set_title(label, fontsize=9)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    return fig


def ecdf_figure(sample, reference_cdf=None, other_sample=None, title=""):
    """Empirical CDF against a reference curve or a second sample."""
    fig, ax = plt.subplots(figsize=(6, 4))
    s = np.sort(np.asarray(sample, dtype=float))
    ax.step(s, np.arange(1, s.size + 1) / s.size, where="post", label="sample")
    if reference_cdf is not None:
        xs = np.linspace(s[0], s[-1], 400)
        ax.plot(xs, [reference_cdf(x) for x in xs], "k--", lw=1.0, label="reference")
    if other_sample is not None:
        t = np.sort(np.asarray(other_sample, dtype=float))
        ax.step(t, np.arange(1, t.size + 1) / t.size, where="post", label="other")
    ax.set_xlabel("value")
    ax.set_ylabel("CDF")
    ax.legend(loc="lower right", fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return fig
