"""European option pricing through the discounted density.

Prices calls on the terminal short rate under the lognormal-rate model with
the effective-potential density, checks each value against quadrature over
the Fokker-Planck density, and shows the undiscounted exceedance
probabilities against the exact Gaussian law of the constant-volatility
model as a sanity anchor.
"""

import math

import numpy as np
from scipy.stats import norm

from gtfk import models, oracles, pricing

if __name__ == "__main__":
    # --- calls on the terminal rate, discounted ---------------------------
    bk = models.black_karasinski(0.1, math.log(0.04), 0.85)
    y0, T = math.log(0.06), 1.0
    grid = oracles.default_pde_grid(bk, 1.0, y0, T, n_space=4001)
    pde_curve = oracles.solve_fokker_planck(bk, 1.0, y0, T, grid)

    print(f"calls on the T={T} rate (lognormal-rate model, sigma=0.85)")
    print(f"{'strike':>8} {'gtfk':>12} {'pde':>12} {'|gap|':>9}")
    for strike in (0.02, 0.04, 0.06, 0.08, 0.12):
        payout = lambda y, k=strike: np.maximum(np.exp(y) - k, 0.0)  # noqa: E731
        value = pricing.price_european(bk, payout, y0, T)
        check = float(np.trapezoid(pde_curve.psi_x * payout(pde_curve.xs), pde_curve.xs))
        print(f"{strike:8.3f} {value:12.8f} {check:12.8f} {abs(value - check):9.1e}")

    # --- undiscounted digital payoff vs the exact Gaussian law ------------
    vas = models.vasicek(0.1, 0.03, 0.02)
    y0, T = 0.03, 2.0
    sd = 0.02 * math.sqrt((1 - math.exp(-0.2 * T)) / 0.2)
    print("\nexceedance probabilities (constant-volatility model, lam=0)")
    print(f"{'level':>8} {'gtfk':>12} {'gaussian':>12}")
    for level in (0.025, 0.03, 0.035, 0.04):
        prob = pricing.price_european(vas, lambda y, k=level: (y > k).astype(float),
                                      y0, T, lam=0.0)
        exact = 1.0 - norm.cdf((level - 0.03) / sd)
        print(f"{level:8.3f} {prob:12.8f} {exact:12.8f}")
