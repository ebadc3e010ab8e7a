"""Figure rendering for sweeps, heuristic curves, and overlay reports.

Figures are a convenience layer only: CSV/JSON files remain the canonical
outputs, and every plot here can be regenerated from them. SVG output is
pinned to a fixed hash salt and stripped of timestamps so repeated runs
produce byte-identical files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .errors import IoFailure
from .evaluation import RocResult, SweepResult
from .heuristics import HeuristicCurve, Selection

_SVG_SALT = "adnpca"


def _save(fig, path: Path | str) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with plt.rc_context({"svg.hashsalt": _SVG_SALT}):
            fig.savefig(path, metadata={"Date": None})
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    finally:
        plt.close(fig)


def plot_sweep(sweep: SweepResult, path: Path | str, title: str = "") -> None:
    """AUROC against k with the optimum marked."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(sweep.ks, sweep.auroc_per_k, lw=1.5)
    ax.axvline(sweep.k_star, color="tab:red", ls="--", lw=1)
    ax.annotate(
        f"k*={sweep.k_star}",
        xy=(sweep.k_star, sweep.auroc_star),
        xytext=(5, -12),
        textcoords="offset points",
        color="tab:red",
    )
    ax.set_xlabel("retained dimension k")
    ax.set_ylabel("AUROC")
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    _save(fig, path)


def plot_curve(
    curve: HeuristicCurve,
    path: Path | str,
    selection: Selection | None = None,
    title: str = "",
) -> None:
    """One heuristic curve, optionally with the selected k marked."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(curve.ks, curve.values, lw=1.5)
    if selection is not None:
        ax.axvline(selection.k_tilde, color="tab:green", ls="--", lw=1)
        ax.annotate(
            f"k~={selection.k_tilde}",
            xy=(selection.k_tilde, curve.value_at(selection.k_tilde)),
            xytext=(5, 5),
            textcoords="offset points",
            color="tab:green",
        )
    ax.set_xlabel("k")
    ax.set_ylabel(curve.method)
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    _save(fig, path)


def plot_overlay(
    curve: HeuristicCurve,
    sweep: SweepResult,
    selection: Selection,
    path: Path | str,
    title: str = "",
) -> None:
    """Heuristic curve and AUROC sweep on twin axes, k* and k~ marked."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(curve.ks, curve.values, color="tab:blue", lw=1.5, label=curve.method)
    ax.set_xlabel("k")
    ax.set_ylabel(curve.method, color="tab:blue")
    ax.tick_params(axis="y", labelcolor="tab:blue")

    ax2 = ax.twinx()
    ax2.plot(sweep.ks, sweep.auroc_per_k, color="tab:orange", lw=1.5, label="AUROC")
    ax2.set_ylabel("AUROC", color="tab:orange")
    ax2.tick_params(axis="y", labelcolor="tab:orange")

    ax.axvline(sweep.k_star, color="tab:red", ls="--", lw=1)
    ax.axvline(selection.k_tilde, color="tab:green", ls=":", lw=1.5)
    ax.annotate(f"k*={sweep.k_star}", xy=(sweep.k_star, 0.02),
                xycoords=("data", "axes fraction"), color="tab:red")
    ax.annotate(f"k~={selection.k_tilde}", xy=(selection.k_tilde, 0.92),
                xycoords=("data", "axes fraction"), color="tab:green")
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    _save(fig, path)


def plot_roc(roc: RocResult, path: Path | str, title: str = "") -> None:
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    ax.plot(roc.fpr, roc.tpr, lw=1.5)
    ax.plot([0, 1], [0, 1], color="gray", ls=":", lw=1)
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.set_title(title or f"AUROC = {roc.auroc:.4f}")
    ax.set_aspect("equal")
    ax.grid(True, alpha=0.3)
    _save(fig, path)
