"""Independent ground-truth engines: forward PDE, kernel convolution, Monte Carlo.

These three solvers share nothing with the harmonic pipeline beyond the
model callables, so agreement between them triangulates ground truth before
the approximation is judged against it.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .config import DEFAULT_CONFIG, NumericsConfig
from .models import TransformedModel
from .pricing import BondQuote, DensityCurve, state_scales

__all__ = [
    "PdeGrid",
    "McEstimate",
    "default_pde_grid",
    "solve_fokker_planck",
    "bond_from_pde",
    "short_time_convolution",
    "bond_from_convolution",
    "monte_carlo_bond",
]


@dataclass(frozen=True)
class PdeGrid:
    """Space-time discretization window for the forward solvers.

    ``n_space`` must be odd so the initial state can sit exactly on a node;
    ``bc`` selects ``zero_flux`` (conservative, for undiscounted runs) or
    ``absorbing`` boundaries.
    """

    x_min: float
    x_max: float
    n_space: int
    n_time: int
    bc: str = "zero_flux"

    def __post_init__(self):
        if self.n_space < 3 or self.n_space % 2 == 0:
            raise ValueError(f"n_space must be odd and >= 3, got {self.n_space}")
        if self.n_time < 1:
            raise ValueError(f"n_time must be >= 1, got {self.n_time}")
        if not self.x_min < self.x_max:
            raise ValueError("x_min must be below x_max")
        if self.bc not in ("zero_flux", "absorbing"):
            raise ValueError(f"unknown boundary condition {self.bc!r}")


@dataclass(frozen=True)
class McEstimate:
    """Monte Carlo estimate with its statistical error."""

    value: float
    stderr: float
    n_paths: int
    dt: float
    seed: int


def default_pde_grid(
    model: TransformedModel,
    lam: float,
    x0: float,
    T: float,
    cfg: NumericsConfig = DEFAULT_CONFIG,
    n_space: int | None = None,
    n_time: int | None = None,
) -> PdeGrid:
    """Window spanning the stationary scale around the reversion level.

    Half-width is ``cfg.pde_window_stdevs`` times the larger of the
    stationary and horizon standard deviations; models whose transformed
    drift explodes in a tail (e.g. the log coordinate of a positive process)
    get that edge pulled in until the cell Peclet number is moderate, but
    never closer than seven standard deviations from the initial state.
    Zero-flux boundaries for undiscounted runs, absorbing otherwise.
    """
    n_space = n_space or cfg.pde_n_space
    n_time = n_time or cfg.pde_n_time
    sigma = model.sigma
    x_root, s_fwd, s_stat = state_scales(model, x0, T)
    s = max(s_stat, s_fwd)
    lo_anchor, hi_anchor = min(x0, x_root), max(x0, x_root)
    x_min = lo_anchor - cfg.pde_window_stdevs * s
    x_max = hi_anchor + cfg.pde_window_stdevs * s

    # pull in an exploding-drift edge (keeps the tridiagonal system benign),
    # but never closer than six standard deviations from the carried mass
    diffusion = 0.5 * sigma * sigma
    inner = lo_anchor - 6.0 * s
    for _ in range(1024):
        dx = (x_max - x_min) / (n_space - 1)
        peclet = abs(float(model.drift(x_min))) * dx / diffusion
        if peclet <= cfg.pde_peclet_warn or x_min >= inner:
            break
        x_min += 2.0 * dx
    bc = "zero_flux" if lam == 0.0 else "absorbing"
    return PdeGrid(x_min=x_min, x_max=x_max, n_space=n_space, n_time=n_time, bc=bc)


def _snapped_grid(grid: PdeGrid, x0: float) -> np.ndarray:
    """Uniform grid shifted so the initial state sits exactly on a node."""
    if not grid.x_min < x0 < grid.x_max:
        raise ValueError(f"x0={x0} outside grid window ({grid.x_min}, {grid.x_max})")
    xs = np.linspace(grid.x_min, grid.x_max, grid.n_space)
    i0 = int(np.argmin(np.abs(xs - x0)))
    return xs + (x0 - xs[i0])


def _flux_form_generator(model: TransformedModel, lam: float, xs: np.ndarray, bc: str):
    """Tridiagonal generator of ``-lam r psi - d_x(mu psi) + (sigma^2/2) d^2_x psi``.

    The advection term is discretized in conservative (flux) form so that
    with zero-flux boundaries the column sums vanish and mass is conserved
    exactly for ``lam = 0``.
    """
    n = xs.size
    dx = xs[1] - xs[0]
    d_over_dx = 0.5 * model.sigma ** 2 / dx
    mu_half = np.asarray(model.drift(0.5 * (xs[:-1] + xs[1:])), dtype=float)
    rate = lam * np.asarray(model.rate_x(xs), dtype=float) if lam != 0.0 else np.zeros(n)

    lower = np.zeros(n - 1)  # coefficient of psi_{i-1} in row i
    diag = np.zeros(n)
    upper = np.zeros(n - 1)  # coefficient of psi_{i+1} in row i

    # interior rows from flux differences
    out_right = (0.5 * mu_half - d_over_dx) / dx   # psi_{i+1} part of F_{i+1/2}/dx
    self_right = (0.5 * mu_half + d_over_dx) / dx  # psi_i part of F_{i+1/2}/dx
    out_left = (0.5 * mu_half + d_over_dx) / dx    # psi_{i-1} part of F_{i-1/2}/dx
    self_left = (0.5 * mu_half - d_over_dx) / dx   # psi_i part of F_{i-1/2}/dx

    diag[1:-1] = -self_right[1:] + self_left[:-1]
    upper[1:] = -out_right[1:]
    lower[:-1] = out_left[:-1]

    if bc == "zero_flux":
        diag[0] = -self_right[0]
        upper[0] = -out_right[0]
        diag[-1] = self_left[-1]
        lower[-1] = out_left[-1]
    else:  # absorbing: boundary rows frozen at zero
        upper[0] = 0.0
        lower[-1] = 0.0
    diag -= rate
    if bc == "absorbing":
        diag[0] = diag[-1] = 0.0
    return sparse.diags([lower, diag, upper], [-1, 0, 1], format="csc")


def solve_fokker_planck(
    model: TransformedModel,
    lam: float,
    x0: float,
    T: float,
    grid: PdeGrid,
    cfg: NumericsConfig = DEFAULT_CONFIG,
) -> DensityCurve:
    """Crank-Nicolson forward solve of the discounted density from a point mass.

    The initial condition is a discrete delta (unit mass on the ``x0`` node
    divided by the spacing); the first two steps are fully implicit to damp
    the ringing Crank-Nicolson produces on non-smooth data.  Warns when the
    cell Peclet number exceeds the configured threshold or when more than
    ``cfg.pde_boundary_mass_tol`` of the mass reaches the window edges.
    Returns the curve mapped to the original coordinate (the transformed
    samples ride along).
    """
    xs = _snapped_grid(grid, x0)
    n = xs.size
    dx = xs[1] - xs[0]
    generator = _flux_form_generator(model, lam, xs, grid.bc)

    peclet = float(np.max(np.abs(np.asarray(model.drift(0.5 * (xs[:-1] + xs[1:]))))) * dx
                   / (0.5 * model.sigma ** 2))
    if peclet > cfg.pde_peclet_warn:
        warnings.warn(
            f"advection cell Peclet number {peclet:.2f} exceeds {cfg.pde_peclet_warn}; "
            "the window tail carries strong drift relative to the grid",
            RuntimeWarning,
            stacklevel=2,
        )

    dt = T / grid.n_time
    identity = sparse.identity(n, format="csc")
    implicit = splu((identity - dt * generator).tocsc())
    cn_left = splu((identity - 0.5 * dt * generator).tocsc())
    cn_right = (identity + 0.5 * dt * generator).tocsr()

    psi = np.zeros(n)
    psi[int(np.argmin(np.abs(xs - x0)))] = 1.0 / dx

    masses = np.empty(grid.n_time + 1)
    masses[0] = psi.sum() * dx
    edge_fraction = 0.0
    for k in range(grid.n_time):
        psi = implicit.solve(psi) if k < 2 else cn_left.solve(cn_right @ psi)
        total = psi.sum() * dx
        masses[k + 1] = total
        if total > 0.0:
            edge_fraction = max(edge_fraction, (abs(psi[0]) + abs(psi[-1])) * dx / total)
    if edge_fraction > cfg.pde_boundary_mass_tol:
        warnings.warn(
            f"{edge_fraction:.2e} of the mass reached the window edges "
            f"(tolerance {cfg.pde_boundary_mass_tol:.0e}); widen the grid",
            RuntimeWarning,
            stacklevel=2,
        )

    clipped = float(-min(psi.min(), 0.0))
    psi = np.maximum(psi, 0.0)
    ys = np.asarray(model.to_y(xs), dtype=float)
    psi_y = model.sigma * psi / np.asarray(model.base.vol_y(ys), dtype=float)
    return DensityCurve(
        lam=lam, T=T, y0=float(model.to_y(x0)), ys=ys, psi=psi_y, method="pde",
        xs=xs, psi_x=psi,
        diagnostics={
            "step_masses": masses,
            "edge_mass_fraction": edge_fraction,
            "cell_peclet": peclet,
            "negative_clip": clipped,
        },
    )


def bond_from_pde(
    model: TransformedModel,
    lam: float,
    y0: float,
    T: float,
    grid: PdeGrid | None = None,
    cfg: NumericsConfig = DEFAULT_CONFIG,
) -> BondQuote:
    """Trapezoid-integrated PDE density, with a Richardson error estimate.

    The quote carries the fine-grid value; the error estimate is the
    second-order Richardson increment from doubling both the spatial and
    temporal resolution.
    """
    x0 = float(model.to_x(y0))
    if grid is None:
        grid = default_pde_grid(model, lam, x0, T, cfg)
    fine = PdeGrid(grid.x_min, grid.x_max, 2 * grid.n_space - 1, 2 * grid.n_time, grid.bc)
    coarse_curve = solve_fokker_planck(model, lam, x0, T, grid, cfg)
    fine_curve = solve_fokker_planck(model, lam, x0, T, fine, cfg)
    z_coarse = float(np.trapezoid(coarse_curve.psi_x, coarse_curve.xs))
    z_fine = float(np.trapezoid(fine_curve.psi_x, fine_curve.xs))
    err = abs(z_fine - z_coarse) / 3.0 + 1e-15 * (1.0 + abs(z_fine))
    return BondQuote(T=T, value=z_fine, method="pde", err_estimate=err)


def short_time_convolution(
    model: TransformedModel,
    lam: float,
    x0: float,
    T: float,
    n_steps: int,
    grid: PdeGrid,
    cfg: NumericsConfig = DEFAULT_CONFIG,
) -> DensityCurve:
    """Iterated short-time kernel as a dense grid-to-grid convolution.

    One step applies ``exp(-lam r dt) x Normal(x + mu dt, sigma^2 dt)`` with
    the drift, drift-divergence and rate factors evaluated at the step
    midpoint, the convention under which the product of kernels telescopes
    into the drift-primitive prefactor exactly.  First-order accurate in the
    step; warns when the kernel width falls under two grid spacings.
    """
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    xs = _snapped_grid(grid, x0)
    dx = xs[1] - xs[0]
    dt = T / n_steps
    s2dt = model.sigma ** 2 * dt
    if math.sqrt(s2dt) < 2.0 * dx:
        warnings.warn(
            f"kernel stdev {math.sqrt(s2dt):.3g} below two grid spacings ({2 * dx:.3g}); "
            "refine the grid or reduce n_steps",
            RuntimeWarning,
            stacklevel=2,
        )

    target = xs[:, None]
    source = xs[None, :]
    mid = 0.5 * (target + source)
    with np.errstate(over="ignore"):
        log_kernel = (
            -((target - source - np.asarray(model.drift(mid)) * dt) ** 2) / (2.0 * s2dt)
            - dt * (0.5 * np.asarray(model.drift_derivative(mid))
                    + lam * np.asarray(model.rate_x(mid)))
        )
        kernel = np.exp(log_kernel) / math.sqrt(2.0 * math.pi * s2dt)
    weights = np.full(xs.size, dx)
    weights[0] = weights[-1] = 0.5 * dx
    kernel *= weights[None, :]

    psi = np.zeros(xs.size)
    psi[int(np.argmin(np.abs(xs - x0)))] = 1.0 / dx
    for _ in range(n_steps):
        psi = kernel @ psi

    ys = np.asarray(model.to_y(xs), dtype=float)
    psi_y = model.sigma * psi / np.asarray(model.base.vol_y(ys), dtype=float)
    return DensityCurve(
        lam=lam, T=T, y0=float(model.to_y(x0)), ys=ys, psi=psi_y, method="conv",
        xs=xs, psi_x=psi, diagnostics={"n_steps": n_steps, "dt": dt},
    )


def bond_from_convolution(
    model: TransformedModel,
    lam: float,
    y0: float,
    T: float,
    n_steps: int | None = None,
    grid: PdeGrid | None = None,
    cfg: NumericsConfig = DEFAULT_CONFIG,
) -> BondQuote:
    """Bond quote from the convolution oracle; error from halving the steps."""
    n_steps = n_steps or cfg.conv_n_steps
    x0 = float(model.to_x(y0))
    if grid is None:
        grid = default_pde_grid(model, lam, x0, T, cfg)
    curve = short_time_convolution(model, lam, x0, T, n_steps, grid, cfg)
    value = float(np.trapezoid(curve.psi_x, curve.xs))
    half = short_time_convolution(model, lam, x0, T, max(1, n_steps // 2), grid, cfg)
    value_half = float(np.trapezoid(half.psi_x, half.xs))
    err = abs(value - value_half) + 1e-15 * (1.0 + abs(value))
    return BondQuote(T=T, value=value, method="conv", err_estimate=err)


def monte_carlo_bond(
    model: TransformedModel,
    lam: float,
    y0: float,
    T: float,
    n_paths: int,
    dt: float,
    seed: int,
    antithetic: bool = True,
) -> McEstimate:
    """Euler-Maruyama estimate of ``E[exp(-lam integral r dt)]``.

    Simulates the transformed coordinate (constant volatility, so the Euler
    state update carries no volatility-derivative bias) and accumulates the
    rate integral with the trapezoid rule.  Antithetic variates pair each
    Gaussian draw with its mirror; the standard error then comes from the
    per-pair means.  Deterministic for a fixed seed.
    """
    if n_paths < 100:
        raise ValueError(f"n_paths must be >= 100, got {n_paths}")
    if dt > T:
        raise ValueError(f"dt={dt} exceeds the horizon T={T}")
    n_steps = max(1, int(math.ceil(T / dt - 1e-12)))
    h = T / n_steps
    x_start = float(model.to_x(y0))

    n_draws = (n_paths + 1) // 2 if antithetic else n_paths
    chunk = 1 << 14
    seed_seq = np.random.SeedSequence(seed)
    children = seed_seq.spawn((n_draws + chunk - 1) // chunk)

    samples = np.empty(n_draws)
    done = 0
    sqrt_h = math.sqrt(h)
    for child in children:
        m = min(chunk, n_draws - done)
        rng = np.random.default_rng(child)
        if antithetic:
            x = np.full(2 * m, x_start)
        else:
            x = np.full(m, x_start)
        rate_prev = np.asarray(model.rate_x(x), dtype=float)
        integral = np.zeros_like(x)
        for _ in range(n_steps):
            z = rng.standard_normal(m)
            noise = np.concatenate([z, -z]) if antithetic else z
            x = x + np.asarray(model.drift(x), dtype=float) * h + model.sigma * sqrt_h * noise
            rate = np.asarray(model.rate_x(x), dtype=float)
            integral += 0.5 * (rate_prev + rate) * h
            rate_prev = rate
        discount = np.exp(-lam * integral)
        if antithetic:
            samples[done:done + m] = 0.5 * (discount[:m] + discount[m:])
        else:
            samples[done:done + m] = discount
        done += m

    value = float(samples.mean())
    if n_draws > 1:
        stderr = float(samples.std(ddof=1) / math.sqrt(n_draws))
    else:
        stderr = 0.0
    return McEstimate(
        value=value, stderr=stderr,
        n_paths=2 * n_draws if antithetic else n_draws,
        dt=h, seed=seed,
    )
