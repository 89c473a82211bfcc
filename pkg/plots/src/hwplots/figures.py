"""Figures from solver CSV files.

Two figure families: solution-versus-reference overlays (optionally as a
multi-mesh panel grid) and semilog conservation-remainder time series.
The scripts only read CSV files written by the solver CLI; rendering is
pinned to the Agg backend with fixed style so reruns on identical inputs
produce identical image bytes.
"""

from __future__ import annotations

import argparse
import csv

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

SEMILOG_FLOOR = 1e-17  # below double-precision remainder scale

_STYLE = {
    "figure.dpi": 110,
    "savefig.dpi": 150,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.4,
    "svg.hashsalt": "hwplots",
}


class ColumnMismatch(Exception):
    pass


def read_solution_csv(path) -> tuple[np.ndarray, np.ndarray, float]:
    """Read an ``x,component_*,t`` file; returns the latest snapshot.

    The solver writes one row per cell per stored snapshot; rows belonging
    to the largest time value form the plotted profile.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[0] != "x" or header[-1] != "t" or len(header) < 3:
            raise ColumnMismatch(f"{path}: expected x,component_*,t columns, got {header}")
        rows = np.array([[float(v) for v in row] for row in reader])
    if rows.size == 0:
        raise ColumnMismatch(f"{path}: no data rows")
    t_final = rows[:, -1].max()
    rows = rows[rows[:, -1] == t_final]
    order = np.argsort(rows[:, 0])
    return rows[order, 0], rows[order, 1:-1], float(t_final)


def read_conservation_csv(path) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Read a ``t,C_q*`` file; returns times, series matrix, series names."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[0] != "t" or len(header) < 2:
            raise ColumnMismatch(f"{path}: expected t,C_q* columns, got {header}")
        rows = np.array([[float(v) for v in row] for row in reader])
    return rows[:, 0], rows[:, 1:], header[1:]


def block_average(values: np.ndarray, factor: int) -> np.ndarray:
    if values.shape[0] % factor:
        raise ColumnMismatch(
            f"cannot block-average {values.shape[0]} cells by a factor of {factor}"
        )
    return values.reshape(-1, factor, values.shape[1]).mean(axis=1)


def _align_reference(x, ref_x, ref_u):
    """Match the reference profile to a coarser x-grid by cell-averaging."""
    if ref_x.shape == x.shape and np.allclose(ref_x, x, atol=1e-12):
        return ref_u
    if ref_x.size % x.size:
        raise ColumnMismatch(
            f"reference grid ({ref_x.size}) does not divide onto plot grid ({x.size})"
        )
    return block_average(ref_u, ref_x.size // x.size)


def plot_solution(
    scheme_csvs,
    reference_csv=None,
    out="solution.png",
    component: int = 0,
    title: str | None = None,
    ax=None,
    dpi: int | None = None,
):
    """Overlay solution profiles; the reference is drawn as a black line,
    schemes as marked lines.  ``scheme_csvs`` is a list of (label, path)."""
    with plt.rc_context(_STYLE):
        own_figure = ax is None
        if own_figure:
            fig, ax = plt.subplots(figsize=(4.2, 3.0))
        n_components = None
        if reference_csv is not None:
            ref_x, ref_u, _ = read_solution_csv(reference_csv)
            n_components = ref_u.shape[1]
        markers = ["o", "s", "^", "d", "v"]
        for k, (label, path) in enumerate(scheme_csvs):
            x, u, t = read_solution_csv(path)
            if n_components is None:
                n_components = u.shape[1]
            if u.shape[1] != n_components:
                raise ColumnMismatch(
                    f"{path}: {u.shape[1]} components, expected {n_components}"
                )
            ax.plot(
                x,
                u[:, component],
                marker=markers[k % len(markers)],
                markersize=2.5,
                markevery=max(1, x.size // 48),
                label=label,
            )
        if reference_csv is not None:
            ax.plot(
                ref_x if ref_x.size == x.size else x,
                _align_reference(x, ref_x, ref_u)[:, component],
                color="black",
                linestyle="--",
                label="reference",
            )
        ax.set_xlabel("x")
        ax.set_ylabel(f"component {component}")
        if title:
            ax.set_title(title)
        ax.legend(fontsize=7)
        if own_figure:
            fig.tight_layout()
            fig.savefig(out, dpi=dpi)
            plt.close(fig)
    return out


def solution_panel(panels, out="panel.png", component: int = 0, n_cols: int = 2, dpi: int | None = None):
    """Grid of solution overlays, one axis per mesh (2x2 for four meshes).

    ``panels`` is a list of dicts with keys ``title``, ``schemes``
    (label/path pairs), and optional ``reference``.
    """
    n_rows = (len(panels) + n_cols - 1) // n_cols
    with plt.rc_context(_STYLE):
        fig, axes = plt.subplots(
            n_rows, n_cols, figsize=(4.0 * n_cols, 2.9 * n_rows), squeeze=False
        )
        for k, panel in enumerate(panels):
            ax = axes[k // n_cols][k % n_cols]
            plot_solution(
                panel["schemes"],
                panel.get("reference"),
                component=component,
                title=panel.get("title"),
                ax=ax,
            )
        for k in range(len(panels), n_rows * n_cols):
            axes[k // n_cols][k % n_cols].set_visible(False)
        fig.tight_layout()
        fig.savefig(out, dpi=dpi)
        plt.close(fig)
    return out


def plot_conservation(series_csvs, out="conservation.png", title: str | None = None, dpi: int | None = None):
    """Semilog remainder-vs-time curves, one per (file, component).

    Series are drawn in the given order so legends are stable; values are
    clamped at the 1e-17 floor so exact zeros remain visible on the log
    axis.
    """
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(5.2, 3.4))
        for label, path in series_csvs:
            t, series, names = read_conservation_csv(path)
            for j, name in enumerate(names):
                values = np.maximum(series[:, j], SEMILOG_FLOOR)
                suffix = f" {name}" if len(names) > 1 else ""
                ax.semilogy(t, values, label=f"{label}{suffix}")
        ax.set_xlabel("t")
        ax.set_ylabel("conservation remainder")
        ax.set_ylim(bottom=SEMILOG_FLOOR / 2)
        if title:
            ax.set_title(title)
        ax.legend(fontsize=7)
        fig.tight_layout()
        fig.savefig(out, dpi=dpi)
        plt.close(fig)
    return out


# ---------------------------------------------------------------------------
# script entry points


def _pairs(values):
    out = []
    for item in values:
        # split at the last '=' so labels like "N=64" survive
        label, _, path = item.rpartition("=")
        if not label:
            label, path = item, item
        out.append((label, path))
    return out


def solution_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="hwplot-solution",
        description="Overlay solver CSV profiles against a reference",
    )
    parser.add_argument("--scheme", action="append", required=True,
                        metavar="LABEL=CSV", help="repeatable")
    parser.add_argument("--reference", default=None)
    parser.add_argument("--component", type=int, default=0)
    parser.add_argument("--title", default=None)
    parser.add_argument("--dpi", type=int, default=None)
    parser.add_argument("--out", required=True)
    args = parser.parse_args(argv)
    plot_solution(
        _pairs(args.scheme), args.reference, args.out,
        component=args.component, title=args.title, dpi=args.dpi,
    )
    return 0


def conservation_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="hwplot-conservation",
        description="Semilog conservation-remainder series from diagnose CSVs",
    )
    parser.add_argument("--series", action="append", required=True,
                        metavar="LABEL=CSV", help="repeatable")
    parser.add_argument("--title", default=None)
    parser.add_argument("--dpi", type=int, default=None)
    parser.add_argument("--out", required=True)
    args = parser.parse_args(argv)
    plot_conservation(_pairs(args.series), args.out, title=args.title, dpi=args.dpi)
    return 0
