"""Self-consistent harmonic approximation around the path average point.

For a horizon ``T`` and an average point ``xbar`` the approximation replaces
the drift potential by a trial quadratic ``w + omega^2 (x - xbar)^2 / (2
sigma^2)`` whose parameters solve the coupled conditions

    omega^2 = sigma^2 * <<V''(xbar + xi)>>_alpha
    w       = <<V(xbar + xi)>>_alpha - omega^2 * alpha / (2 sigma^2)

where ``<<.>>_alpha`` denotes a Gaussian average of variance ``alpha`` and
``alpha`` itself is a function of ``omega^2`` through the fluctuation
formula ``alpha = (sigma^2 / 2 omega) (coth f - 1/f)`` with ``f = omega T /
2``.  Negative ``omega^2`` is handled by analytic continuation ``f = i
phi``; the continuation is valid while ``phi < pi`` and the solver raises a
structured :class:`BranchBreakdownError` at the validity limit.

The converged triple feeds a closed-form Gaussian contribution to the
transition kernel, :func:`reduced_density`; integrating it over ``xbar`` is
the job of :mod:`gtfk.pricing`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .config import DEFAULT_CONFIG, NumericsConfig
from .models import TransformedModel

__all__ = [
    "BranchBreakdownError",
    "ConvergenceError",
    "GtfkPoint",
    "SmearedPotential",
    "gaussian_smear",
    "alpha_of_omega",
    "smeared_potential",
    "solve_self_consistent",
    "reduced_density",
]

# below this |f^2| the closed forms for coth f - 1/f cancel catastrophically
_SERIES_F2_CUTOFF = 1e-6


class BranchBreakdownError(RuntimeError):
    """The analytic continuation left its validity range (phi >= pi).

    Signals a genuine limit of the harmonic approximation for the requested
    horizon/volatility, not a numerical accident.
    """

    def __init__(self, omega2: float, T: float, phi: float, xbar: float | None = None):
        self.omega2 = omega2
        self.T = T
        self.phi = phi
        self.xbar = xbar
        where = f" at average point xbar={xbar:.6g}" if xbar is not None else ""
        super().__init__(
            f"trial-frequency continuation breaks down{where}: "
            f"omega^2={omega2:.6g}, T={T:.6g} gives phi={phi:.6g} >= pi"
        )

    def with_xbar(self, xbar: float) -> "BranchBreakdownError":
        return BranchBreakdownError(self.omega2, self.T, self.phi, xbar)


class ConvergenceError(RuntimeError):
    """The self-consistent fixed point did not converge."""

    def __init__(self, message: str, xbar: float | None = None):
        self.xbar = xbar
        super().__init__(message)


# ---------------------------------------------------------------------------
# scalar special functions of f^2 = omega^2 T^2 / 4, analytic across the
# branch point f^2 = 0
# ---------------------------------------------------------------------------


def _alpha_factor(f2: float) -> float:
    """(coth f - 1/f) / f as a function of f^2; equals 1/3 at f = 0."""
    if abs(f2) < _SERIES_F2_CUTOFF:
        return 1.0 / 3.0 - f2 / 45.0 + 2.0 * f2 * f2 / 945.0
    if f2 > 0.0:
        f = math.sqrt(f2)
        return (1.0 / math.tanh(f) - 1.0 / f) / f
    phi = math.sqrt(-f2)
    return (1.0 - phi / math.tan(phi)) / (phi * phi)  # = 1/phi^2 - cot(phi)/phi


def _f_over_sinh(f2: float) -> float:
    """f / sinh f as a function of f^2 (phi / sin phi on the imaginary branch)."""
    if abs(f2) < _SERIES_F2_CUTOFF:
        return 1.0 - f2 / 6.0 + 7.0 * f2 * f2 / 360.0
    if f2 > 0.0:
        f = math.sqrt(f2)
        if f > 30.0:  # sinh overflows near 710; exact to double precision here
            return 2.0 * f * math.exp(-f) / (1.0 - math.exp(-2.0 * f))
        return f / math.sinh(f)
    phi = math.sqrt(-f2)
    return phi / math.sin(phi)


def _f_coth(f2: float) -> float:
    """f * coth f as a function of f^2 (phi * cot phi on the imaginary branch)."""
    if abs(f2) < _SERIES_F2_CUTOFF:
        return 1.0 + f2 / 3.0 - f2 * f2 / 45.0
    if f2 > 0.0:
        f = math.sqrt(f2)
        return f / math.tanh(f)
    phi = math.sqrt(-f2)
    return phi / math.tan(phi)


def _check_branch(f2: float, T: float, branch_eps: float, xbar: float | None = None) -> None:
    if f2 < 0.0:
        phi = math.sqrt(-f2)
        if phi >= math.pi - branch_eps:
            omega2 = 4.0 * f2 / (T * T)
            raise BranchBreakdownError(omega2, T, phi, xbar)


def alpha_of_omega(
    omega2: float,
    T: float,
    sigma: float,
    branch_eps: float = DEFAULT_CONFIG.branch_eps,
) -> float:
    """Gaussian fluctuation variance ``alpha`` for a trial frequency ``omega^2``.

    Real branch: ``alpha = (sigma^2 / 2 omega)(coth f - 1/f)`` with
    ``f = omega T / 2``; a three-term even series in ``f^2`` is used for
    ``|f| < 1e-3`` to avoid cancellation, making the function smooth through
    ``omega^2 = 0`` where it equals ``sigma^2 T / 12``.  For negative
    ``omega^2`` the continued form ``(sigma^2 T / 4)(1/phi^2 - cot phi /
    phi)`` applies while ``phi = |omega| T / 2 < pi``; beyond that the
    approximation is invalid and :class:`BranchBreakdownError` is raised.

    Continuous and strictly decreasing in ``omega^2`` at fixed ``(sigma, T)``.
    """
    if T <= 0.0:
        raise ValueError(f"horizon T must be positive, got {T}")
    f2 = omega2 * T * T / 4.0
    _check_branch(f2, T, branch_eps)
    return 0.25 * sigma * sigma * T * _alpha_factor(f2)


# ---------------------------------------------------------------------------
# Gaussian smearing
# ---------------------------------------------------------------------------


@lru_cache(maxsize=32)
def _hermite_nodes(order: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.hermite.hermgauss(order)


def gaussian_smear(
    fn: Callable[[np.ndarray], np.ndarray],
    xbar: float,
    alpha: float,
    order: int = DEFAULT_CONFIG.gh_order,
    tol: float = DEFAULT_CONFIG.smear_tol,
    max_order: int = DEFAULT_CONFIG.gh_max_order,
) -> float:
    """Gaussian average ``(2 pi alpha)^{-1/2} integral e^{-xi^2/2 alpha} fn(xbar + xi) dxi``.

    Exact identity at ``alpha = 0``.  Uses Gauss-Hermite quadrature of the
    given order, doubling it until the result moves by less than ``tol``.
    """
    if alpha < 0.0:
        raise ValueError(f"variance alpha must be non-negative, got {alpha}")
    if alpha == 0.0:
        return float(fn(np.asarray(xbar, dtype=float)))
    scale = math.sqrt(2.0 * alpha)
    previous = None
    n = order
    while True:
        nodes, weights = _hermite_nodes(n)
        with np.errstate(over="ignore", invalid="ignore"):
            value = float(weights @ np.asarray(fn(xbar + scale * nodes), dtype=float)) / math.sqrt(math.pi)
        if not math.isfinite(value):
            raise ValueError(
                f"Gaussian smear diverged (order {n}): integrand grows faster than Gaussian decay"
            )
        if previous is not None and abs(value - previous) < tol * (1.0 + abs(value)):
            return value
        if n >= max_order:
            return value
        previous = value
        n *= 2


@dataclass(frozen=True)
class SmearedPotential:
    """Gaussian averages of the drift potential and its second derivative."""

    value: float
    second: float


def smeared_potential(
    model: TransformedModel,
    xbar: float,
    alpha: float,
    lam: float,
    cfg: NumericsConfig = DEFAULT_CONFIG,
) -> SmearedPotential:
    """``<<V>>`` and ``<<V''>>`` at ``(xbar, alpha)``, closed form when available."""
    if model.closed_form_smears is not None:
        value_fn, second_fn = model.closed_form_smears
        return SmearedPotential(
            value=float(value_fn(xbar, alpha, lam)),
            second=float(second_fn(xbar, alpha, lam)),
        )
    return SmearedPotential(
        value=gaussian_smear(lambda x: model.potential(x, lam), xbar, alpha,
                             cfg.gh_order, cfg.smear_tol, cfg.gh_max_order),
        second=gaussian_smear(lambda x: model.potential_second(x, lam), xbar, alpha,
                              cfg.gh_order, cfg.smear_tol, cfg.gh_max_order),
    )


# ---------------------------------------------------------------------------
# the self-consistent point
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GtfkPoint:
    """Converged trial parameters at one average point.

    ``f2 = omega2 * T^2 / 4`` may be negative; the imaginary branch is then
    parameterised by ``phi = sqrt(-f2)`` which must stay below pi.
    """

    xbar: float
    omega2: float
    alpha: float
    w: float
    T: float
    sigma: float
    iterations: int = 0
    residual: float = 0.0

    @property
    def f2(self) -> float:
        return self.omega2 * self.T * self.T / 4.0

    @property
    def f(self) -> float:
        """|omega| T / 2 (the half-angle phi on the imaginary branch)."""
        return math.sqrt(abs(self.f2))

    @property
    def imaginary_branch(self) -> bool:
        return self.omega2 < 0.0


def _second_smear(model: TransformedModel, xbar: float, lam: float, cfg: NumericsConfig):
    if model.closed_form_smears is not None:
        second_fn = model.closed_form_smears[1]
        return lambda alpha: float(second_fn(xbar, alpha, lam))
    return lambda alpha: gaussian_smear(
        lambda x: model.potential_second(x, lam), xbar, alpha,
        cfg.gh_order, cfg.smear_tol, cfg.gh_max_order,
    )


def solve_self_consistent(
    model: TransformedModel,
    lam: float,
    T: float,
    xbar: float,
    cfg: NumericsConfig = DEFAULT_CONFIG,
    alpha0: float | None = None,
) -> GtfkPoint:
    """Solve the coupled ``(omega^2, alpha, w)`` conditions at one average point.

    Damped fixed-point iteration on ``alpha`` starting from the
    small-fluctuation limit ``sigma^2 T / 12`` (exact for quadratic
    potentials, hence one-step convergence there) or from a caller-provided
    warm start; the damping halves on oscillation, relaxes while the
    iteration is monotone, and a bracketed root solve on ``omega^2`` serves
    as a fallback.  ``w`` always comes from the generic smeared condition,
    never from model-specific shortcuts.
    """
    if T <= 0.0:
        raise ValueError(f"horizon T must be positive, got {T}")
    sigma = model.sigma
    s2 = sigma * sigma
    omega2_of = _second_smear(model, xbar, lam, cfg)
    tol = 0.05 * cfg.sc_tol

    def safe_target(omega2: float) -> float:
        try:
            return alpha_of_omega(omega2, T, sigma, cfg.branch_eps)
        except BranchBreakdownError as err:
            raise err.with_xbar(xbar) from None

    alpha_floor = s2 * T / 12.0
    alpha = alpha0 if alpha0 is not None and alpha0 > 0.0 else alpha_floor
    eta = cfg.sc_damping
    prev_delta = 0.0
    iterations = 0
    converged = False
    with np.errstate(over="ignore", invalid="ignore"):
        for iterations in range(1, cfg.sc_max_iter + 1):
            omega2 = s2 * omega2_of(alpha)
            if not math.isfinite(omega2):
                break
            try:
                target = safe_target(omega2)
                # convergence is judged at the undamped candidate, so
                # alpha-independent conditions finish in a single iteration
                omega2_at_target = s2 * omega2_of(target)
                residual = safe_target(omega2_at_target) - target if math.isfinite(
                    omega2_at_target) else math.inf
            except BranchBreakdownError:
                if iterations == 1 and alpha0 is None:
                    raise  # genuinely outside the validity range
                break  # an overshooting iterate wandered out; let the fallback decide
            if abs(residual) <= tol * max(abs(target), 1e-300):
                alpha = target
                converged = True
                break
            delta = target - alpha
            if prev_delta != 0.0:
                # oscillation asks for more damping, monotone progress for less
                eta = max(0.5 * eta, 1.0 / 64.0) if delta * prev_delta < 0.0 else min(1.3 * eta, 1.0)
            # near the branch limit the target diverges; keep iterates bounded
            alpha = min(alpha + eta * delta, 8.0 * alpha + alpha_floor)
            prev_delta = delta

        if not converged:
            alpha = _bisection_fallback(omega2_of, safe_target, s2, T, cfg, xbar)

        # report a pair that satisfies alpha = alpha_of_omega(omega2) exactly
        omega2 = s2 * omega2_of(alpha)
        alpha = safe_target(omega2)
    smeared = smeared_potential(model, xbar, alpha, lam, cfg)
    w = smeared.value - omega2 * alpha / (2.0 * s2)
    residual = abs(s2 * smeared.second - omega2) / (1.0 + abs(omega2))
    return GtfkPoint(
        xbar=xbar, omega2=omega2, alpha=alpha, w=w, T=T, sigma=sigma,
        iterations=iterations, residual=residual,
    )


def _bisection_fallback(omega2_of, safe_target, s2, T, cfg, xbar) -> float:
    """Root of ``sigma^2 <<V''>>_{alpha(omega2)} - omega2`` on a swept grid.

    Sweeps the whole admissible trial-frequency range: a dense linear grid
    between the branch floor and zero and a geometric grid on either sign,
    scaled by the small-fluctuation guess.  Probes where the smear overflows
    evaluate to NaN and are skipped.
    """

    floor = -((2.0 * (math.pi - 4.0 * cfg.branch_eps) / T) ** 2)

    def fixed_point_gap(omega2: float) -> float:
        return s2 * omega2_of(safe_target(omega2)) - omega2

    guess = s2 * omega2_of(s2 * T / 12.0)
    scale = max(1.0, abs(guess) if math.isfinite(guess) else 1.0, -floor)
    candidates = np.concatenate([
        np.linspace(floor * (1.0 - 1e-9), floor * 1e-4, 64),
        -np.geomspace(-floor * 1e-4, -floor * 1e-12, 16),
        [0.0],
        np.geomspace(scale * 1e-12, scale * 1e12, 97),
    ])
    probes = np.unique(candidates[(candidates > floor)])
    values = np.full_like(probes, math.nan)
    for i, p in enumerate(probes):
        try:
            values[i] = fixed_point_gap(float(p))
        except BranchBreakdownError:
            continue
    for i in range(len(probes) - 1):
        v1, v2 = values[i], values[i + 1]
        if math.isfinite(v1) and math.isfinite(v2) and v1 * v2 <= 0.0:
            root = brentq(fixed_point_gap, probes[i], probes[i + 1], xtol=1e-15, rtol=8.9e-16)
            return safe_target(root)
    # no admissible fixed point: if the implied trial frequency sits past the
    # branch floor everywhere, this is the structured validity-limit failure
    finite = [(p, v) for p, v in zip(probes, values) if math.isfinite(v)]
    if finite:
        p0, v0 = finite[0]
        implied = v0 + p0  # gap(p) = implied omega^2 - p
        if implied <= floor:
            raise BranchBreakdownError(implied, T, math.sqrt(-implied) * T / 2.0, xbar)
    raise ConvergenceError(
        f"self-consistent conditions did not converge at xbar={xbar:.6g} "
        f"(damped iteration exhausted, no root bracket found)",
        xbar=xbar,
    )


def reduced_density(point: GtfkPoint, x0, x_t):
    """Harmonic-class contribution to the transition kernel at one average point.

    Symmetric under swapping its two state arguments; accepts scalars or
    arrays (broadcast).  On the imaginary branch ``f/sinh f -> phi/sin phi``
    and ``omega coth f -> (2 phi / T) cot phi``, both real while the point
    is valid.
    """
    f2 = point.f2
    _check_branch(f2, point.T, 0.0, point.xbar)
    s2t = point.sigma * point.sigma * point.T
    prefactor = (
        math.sqrt(1.0 / (2.0 * math.pi * s2t))
        * math.exp(-point.T * point.w)
        * _f_over_sinh(f2)
        / math.sqrt(2.0 * math.pi * point.alpha)
    )
    x0 = np.asarray(x0, dtype=float)
    x_t = np.asarray(x_t, dtype=float)
    xi = 0.5 * (x0 + x_t) - point.xbar
    gap = x_t - x0
    exponent = -xi * xi / (2.0 * point.alpha) - _f_coth(f2) * gap * gap / (2.0 * s2t)
    return prefactor * np.exp(exponent)
