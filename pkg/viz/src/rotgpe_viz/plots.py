"""Figure builders: log-log convergence plots, observable traces, and
density heatmaps.  Everything renders off-screen (Agg)."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from rotgpe_viz.formats import ERROR_NAMES
from rotgpe_viz.slopes import fit_slope

_LABELS = {
    "l2": r"$L^2$ error",
    "h1": r"broken $H^1$ error",
    "superclose": "supercloseness",
    "postproc": "postprocessed $H^1$ error",
}


def plot_convergence(table, out_path, title=None):
    """Log-log error-vs-h plot with slope-1 and slope-2 guide lines.

    Returns {column: fitted least-squares slope}.
    """
    slopes = {name: fit_slope(table.h, table.errors[name])
              for name in ERROR_NAMES}
    fig, ax = plt.subplots(figsize=(5.2, 4.2))
    for name, marker in zip(ERROR_NAMES, "osd^"):
        ax.loglog(table.h, table.errors[name], marker=marker,
                  label=f"{_LABELS[name]} (slope {slopes[name]:.2f})")

    # reference slopes anchored at the coarsest h1 point
    h = np.asarray(table.h)
    anchor = table.errors["h1"][0]
    ax.loglog(h, anchor * (h / h[0]), "k--", lw=0.8, label="slope 1")
    ax.loglog(h, anchor * (h / h[0]) ** 2, "k:", lw=0.8, label="slope 2")

    ax.set_xlabel(r"$h = \tau$")
    ax.set_ylabel("error at final time")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=7)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return slopes


def plot_series(series, out_path, title=None):
    """Two panels: mass and energy traces, and their relative errors on a
    log scale with the theorem-level guide lines."""
    fig, (top, bot) = plt.subplots(2, 1, figsize=(6.0, 5.0), sharex=True)

    top.plot(series.t, series.mass, color="tab:blue", label="mass")
    twin = top.twinx()
    twin.plot(series.t, series.energy, color="tab:orange", label="energy")
    top.set_ylabel("mass", color="tab:blue")
    twin.set_ylabel("energy", color="tab:orange")
    lines = top.get_lines() + twin.get_lines()
    top.legend(lines, [ln.get_label() for ln in lines], fontsize=8)
    if title:
        top.set_title(title)

    floor = 1e-18
    bot.semilogy(series.t, np.maximum(np.abs(series.rel_mass_err), floor),
                 label="|relative mass error|")
    bot.semilogy(series.t, np.maximum(np.abs(series.rel_energy_err), floor),
                 label="|relative energy error|")
    bot.axhline(1e-10, color="gray", ls="--", lw=0.8, label="1e-10")
    bot.axhline(1e-8, color="gray", ls=":", lw=0.8, label="1e-8")
    bot.set_xlabel("t")
    bot.set_ylabel("relative drift")
    bot.legend(fontsize=8)
    bot.grid(True, which="both", alpha=0.3)

    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)


def plot_density(snaps, out_path, title=None):
    """One heatmap per snapshot in a single row, shared color scale,
    titled with the snapshot times.  Returns the density grids."""
    for s in snaps:
        if s.payload != "density":
            raise ValueError("plot_density expects density snapshots, "
                             f"got payload={s.payload!r} at t={s.t}")
    grids = [s.values for s in snaps]
    vmax = max(float(g.max()) for g in grids)
    if vmax <= 0.0:
        vmax = 1e-16    # all-zero field: keep a [0, eps] scale
    fig, axes = plt.subplots(1, len(snaps),
                             figsize=(3.1 * len(snaps) + 0.9, 3.2),
                             squeeze=False)
    for ax, snap, grid in zip(axes[0], snaps, grids):
        im = ax.imshow(grid, origin="lower", extent=snap.extent,
                       vmin=0.0, vmax=vmax, cmap="viridis",
                       interpolation="nearest", aspect="equal")
        ax.set_title(f"t = {snap.t:g}", fontsize=9)
        ax.set_xlabel("x")
    axes[0][0].set_ylabel("y")
    fig.colorbar(im, ax=list(axes[0]), shrink=0.85, label=r"$|u|^2$")
    if title:
        fig.suptitle(title)
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return grids
