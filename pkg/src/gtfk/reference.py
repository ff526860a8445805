"""Reference bond values and tolerances for the built-in benchmark sets.

Three parameter sets with published zero-coupon-bond values from both the
harmonic approximation and a resolved PDE serve as regression targets; the
``table`` command recomputes them and compares row by row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = ["BenchmarkTable", "TABLES"]


@dataclass(frozen=True)
class BenchmarkTable:
    table_id: str
    model_name: str
    params: dict
    y0: float
    maturities: tuple[float, ...]
    gtfk_ref: tuple[float, ...]
    pde_ref: tuple[float, ...]
    gtfk_tol: tuple[float, ...]
    pde_tol: tuple[float, ...]
    lam: float = 1.0


_BK_BONDS = BenchmarkTable(
    table_id="bk_bonds",
    model_name="bk",
    params={"a": 0.1, "b": math.log(0.04), "sigma": 0.85},
    y0=math.log(0.06),  # log-rate state; initial rate 0.06
    maturities=(0.1, 0.5, 1.0, 2.0, 3.0, 5.0, 10.0, 20.0),
    gtfk_ref=(0.9939, 0.9681, 0.9331, 0.8582, 0.7847, 0.6602, 0.4628, 0.2672),
    pde_ref=(0.9939, 0.9681, 0.9331, 0.8582, 0.7846, 0.6598, 0.4623, 0.2683),
    gtfk_tol=(5e-4, 5e-4, 5e-4, 5e-4, 5e-4, 5e-4, 2e-3, 2e-3),
    pde_tol=(1e-3,) * 8,
)

_GARCH_BONDS_1 = BenchmarkTable(
    table_id="garch_bonds_1",
    model_name="garch",
    params={"a": 0.1, "b": 0.04, "sigma": 0.6},
    y0=0.06,
    maturities=(0.1, 0.5, 1.0, 2.0, 3.0, 5.0, 7.5, 10.0),
    gtfk_ref=(0.9940, 0.9707, 0.9429, 0.8920, 0.8472, 0.7717, 0.6923, 0.6223),
    pde_ref=(0.9940, 0.9707, 0.9429, 0.8917, 0.8466, 0.7726, 0.7025, 0.6477),
    gtfk_tol=(1e-3, 1e-3, 1e-3, 1e-3, 1e-3, 1e-3, 5e-3, 5e-3),
    pde_tol=(1e-3,) * 8,
)

_GARCH_BONDS_2 = BenchmarkTable(
    table_id="garch_bonds_2",
    model_name="garch",
    params={"a": 0.1, "b": 0.02, "sigma": 0.5},
    y0=0.01,
    maturities=(0.1, 0.25, 0.5, 1.0, 2.5, 5.0, 10.0),
    gtfk_ref=(0.9990, 0.9975, 0.9949, 0.9896, 0.9723, 0.9403, 0.8709),
    pde_ref=(0.9990, 0.9975, 0.9949, 0.9896, 0.9726, 0.9417, 0.8762),
    gtfk_tol=(1e-3, 1e-3, 1e-3, 1e-3, 1e-3, 1e-3, 3e-3),
    pde_tol=(1e-3,) * 7,
)

TABLES: dict[str, BenchmarkTable] = {
    t.table_id: t for t in (_BK_BONDS, _GARCH_BONDS_1, _GARCH_BONDS_2)
}
