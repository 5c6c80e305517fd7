"""Matplotlib figures drawn from the tidy plot-data rows."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .report import ReportError  # noqa: E402

# no software/date stamps, so files are reproducible
_PNG_METADATA = {"Software": None}


def _grouped(rows, key, x, y):
    groups = defaultdict(list)
    for row in rows:
        groups[key(row)].append((row[x], row[y]))
    return {k: sorted(v) for k, v in sorted(groups.items(), key=lambda kv: str(kv[0]))}


def _positive(ys, floor):
    return [max(y, floor) for y in ys]


def _bound_vs_r(fig, rows):
    quantities = sorted({r["quantity"] for r in rows})
    axes = fig.subplots(1, len(quantities), squeeze=False)[0]
    for ax, quantity in zip(axes, quantities):
        sel = [r for r in rows if r["quantity"] == quantity]
        positive = [v for r in sel for v in (r["measured"], r["bound"]) if v > 0]
        floor = min(positive) / 10 if positive else 1e-300
        for i, (label, pts) in enumerate(_grouped(sel, lambda r: r["key"], "R", "measured").items()):
            color = f"C{i % 10}"
            xs, ys = zip(*pts)
            ax.plot(xs, _positive(ys, floor), "o-", color=color, ms=3, label=label)
            bx, by = zip(*_grouped([r for r in sel if r["key"] == label], lambda r: 0, "R", "bound")[0])
            ax.plot(bx, _positive(by, floor), "--", color=color, lw=0.8)
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("R")
        ax.set_title(f"{quantity} (solid) vs bound (dashed)", fontsize=8)
        ax.grid(True, which="both", alpha=0.3)
        ax.legend(fontsize=5, loc="best")


def _liouville(ax, rows):
    for (label, b), pts in _grouped(rows, lambda r: (r["label"], r["boundary"]), "R", "deviation").items():
        xs, ys = zip(*pts)
        ax.plot(xs, [max(y, 1e-300) for y in ys], "o-", label=f"{label} b={b:g}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("R")
    ax.set_ylabel("|u(0) - eq|")


def _identity(ax, rows):
    for (kind, beta), pts in _grouped(rows, lambda r: (r["kind"], r["beta"]), "h", "residual").items():
        xs, ys = zip(*pts)
        ax.plot(xs, ys, "o-", label=f"{kind} beta={beta:g}")
    if rows:
        hs = sorted({r["h"] for r in rows})
        ref = max(r["residual"] for r in rows if r["h"] == hs[-1])
        ax.plot(hs, [ref * (h / hs[-1]) ** 2 for h in hs], "k--", label="slope 2")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("h")
    ax.set_ylabel("max |LHS - RHS|")


def _jflow(ax, rows):
    for (conv, quantity), pts in _grouped(rows, lambda r: (r["convention"], r["quantity"]), "t", "value").items():
        xs, ys = zip(*pts)
        ax.plot(xs, ys, "--" if quantity == "j_decay" else "-", label=f"{conv} {quantity}")
    ax.set_xlabel("t")
    ax.set_ylabel("J")


_DRAW = {
    "bound-vs-R": _bound_vs_r,
    "liouville-convergence": _liouville,
    "identity-order": _identity,
    "jflow-decay": _jflow,
}


def plot_kind(rows, kind: str, path: str | Path) -> Path:
    if kind not in _DRAW:
        raise ReportError(f"unknown plot kind {kind!r}")
    if not rows:
        raise ReportError(f"nothing to plot for {kind!r}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if kind == "bound-vs-R":
        fig = plt.figure(figsize=(10, 4.4))
    else:
        fig, ax = plt.subplots(figsize=(6.4, 4.4))
    try:
        if kind == "bound-vs-R":
            _bound_vs_r(fig, rows)
        else:
            _DRAW[kind](ax, rows)
            ax.set_title(kind)
            ax.grid(True, which="both", alpha=0.3)
            ax.legend(fontsize=6, loc="best")
        fig.tight_layout()
        fig.savefig(path, dpi=120, metadata=_PNG_METADATA)
    finally:
        plt.close(fig)
    return path


def plot_profile(r, u, path: str | Path, label: str = "u") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    try:
        ax.plot(r, u, label=label)
        ax.set_xlabel("r")
        ax.set_ylabel("u")
        ax.grid(True, alpha=0.3)
        ax.legend()
        fig.tight_layout()
        fig.savefig(path, dpi=120, metadata=_PNG_METADATA)
    finally:
        plt.close(fig)
    return path
