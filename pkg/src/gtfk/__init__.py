"""Effective-potential densities and bond prices for one-factor short-rate models.

The package approximates discounted (Arrow-Debreu) transition densities of
one-factor diffusions by a self-consistent harmonic treatment of paths
grouped by their time average, and prices zero-coupon bonds and European
options from them.  Three independent numerical engines (a Crank-Nicolson
forward PDE, short-time kernel convolution and Euler-Maruyama Monte Carlo)
serve as ground truth.
"""

from .config import DEFAULT_CONFIG, NumericsConfig
from .harmonic import (
    BranchBreakdownError,
    ConvergenceError,
    GtfkPoint,
    SmearedPotential,
    alpha_of_omega,
    gaussian_smear,
    reduced_density,
    smeared_potential,
    solve_self_consistent,
)
from .models import (
    DomainError,
    MODEL_BUILDERS,
    ShortRateModel,
    TransformedModel,
    black_karasinski,
    build_model,
    drift_potential,
    drift_potential_curvature,
    drift_primitive,
    garch,
    lamperti_inverse,
    lamperti_transform,
    quadratic,
    quadratic_rate_positivity,
    transformed_drift,
    vasicek,
)
from .oracles import (
    McEstimate,
    PdeGrid,
    bond_from_convolution,
    bond_from_pde,
    default_pde_grid,
    monte_carlo_bond,
    short_time_convolution,
    solve_fokker_planck,
)
from .pricing import (
    BondQuote,
    DensityCurve,
    ad_density,
    ad_density_y,
    curve_mass,
    effective_support,
    gtfk_density_curve,
    gtfk_density_x,
    price_european,
    vasicek_exact_bond,
    vasicek_exact_density,
    zero_coupon_bond,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_CONFIG",
    "NumericsConfig",
    "BranchBreakdownError",
    "ConvergenceError",
    "GtfkPoint",
    "SmearedPotential",
    "alpha_of_omega",
    "gaussian_smear",
    "reduced_density",
    "smeared_potential",
    "solve_self_consistent",
    "DomainError",
    "MODEL_BUILDERS",
    "ShortRateModel",
    "TransformedModel",
    "black_karasinski",
    "build_model",
    "drift_potential",
    "drift_potential_curvature",
    "drift_primitive",
    "garch",
    "lamperti_inverse",
    "lamperti_transform",
    "quadratic",
    "quadratic_rate_positivity",
    "transformed_drift",
    "vasicek",
    "McEstimate",
    "PdeGrid",
    "bond_from_convolution",
    "bond_from_pde",
    "default_pde_grid",
    "monte_carlo_bond",
    "short_time_convolution",
    "solve_fokker_planck",
    "BondQuote",
    "DensityCurve",
    "ad_density",
    "ad_density_y",
    "curve_mass",
    "effective_support",
    "gtfk_density_curve",
    "gtfk_density_x",
    "price_european",
    "vasicek_exact_bond",
    "vasicek_exact_density",
    "zero_coupon_bond",
    "__version__",
]
