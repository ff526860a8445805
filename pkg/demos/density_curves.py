"""Discounted transition densities across maturities, approximation vs PDE.

Produces the density sweeps for the high-volatility lognormal-rate model
(T = 1, 5, 10, 20) and for the positive linear-volatility model, writes
them as plot-ready CSV files under demos/output/, and renders a figure when
matplotlib is available.  The two curves are expected to be nearly
indistinguishable up to several years of horizon.
"""

import csv
import math
import pathlib

import numpy as np

from gtfk import models, oracles, pricing

OUT = pathlib.Path(__file__).parent / "output"


def sweep(model, y0, horizons, tag):
    OUT.mkdir(exist_ok=True)
    x0 = float(model.to_x(y0))
    panels = []
    for T in horizons:
        grid = oracles.default_pde_grid(model, 1.0, x0, T)
        pde = oracles.solve_fokker_planck(model, 1.0, x0, T, grid)
        keep = pde.psi_x > 1e-9 * pde.psi_x.max()
        xs = pde.xs[keep]
        psi_pde = pde.psi[keep]
        gtfk_x = pricing.gtfk_density_x(model, 1.0, x0, xs, T)
        ys = np.asarray(model.to_y(xs))
        psi_gtfk = model.sigma * gtfk_x / np.asarray(model.base.vol_y(ys))
        dev = np.max(np.abs(psi_gtfk - psi_pde)) / psi_pde.max()
        print(f"{tag} T={T:5.1f}: max |gtfk - pde| / peak = {dev:.2%}")
        path = OUT / f"density_{tag}_T{T:g}.csv"
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["y", "psi_gtfk", "psi_pde"])
            writer.writerows(zip(ys, psi_gtfk, psi_pde))
        panels.append((T, ys, psi_gtfk, psi_pde))
    return panels


def maybe_plot(panels, tag, xlabel):
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for T, ys, psi_gtfk, psi_pde in panels:
        line, = ax.plot(ys, psi_pde, lw=1.2, label=f"T={T:g} (pde)")
        ax.plot(ys, psi_gtfk, "--", lw=1.2, color=line.get_color())
    ax.set_xlabel(xlabel)
    ax.set_ylabel("discounted density")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(OUT / f"density_{tag}.png", dpi=150)
    print(f"wrote {OUT / f'density_{tag}.png'}")


if __name__ == "__main__":
    bk = models.black_karasinski(a=0.1, b=math.log(0.04), sigma=0.85)
    panels = sweep(bk, math.log(0.06), (1.0, 5.0, 10.0, 20.0), "bk")
    maybe_plot(panels, "bk", "log rate")

    garch = models.garch(a=0.1, b=0.02, sigma=0.5)
    panels = sweep(garch, 0.01, (1.0, 5.0, 10.0), "garch")
    maybe_plot(panels, "garch", "rate")
