"""Numerical controls shared across the solver, pricer and oracles."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path

__all__ = ["NumericsConfig", "DEFAULT_CONFIG", "load_key_value_file"]


@dataclass(frozen=True)
class NumericsConfig:
    """Quadrature orders, windows, tolerances and stochastic controls.

    Instances are immutable; use :meth:`replace` to derive variants.
    """

    # Gaussian smearing (Gauss-Hermite), used when no closed form exists
    gh_order: int = 40
    gh_max_order: int = 1280
    smear_tol: float = 1e-10

    # self-consistent fixed point
    sc_tol: float = 1e-12
    sc_max_iter: int = 200
    sc_damping: float = 0.5
    branch_eps: float = 1e-6 * math.pi

    # average-point and terminal-state quadrature (orders double for T > 10)
    xbar_nodes: int = 64
    xt_nodes: int = 96
    xbar_span: float = 8.0
    window_boundary_tol: float = 1e-12
    max_widenings: int = 8
    support_stdevs: float = 8.0
    tail_factor: float = 1.5

    # Fokker-Planck solver
    pde_n_space: int = 2001
    pde_n_time: int = 2000
    pde_window_stdevs: float = 10.0
    pde_peclet_warn: float = 2.0
    pde_boundary_mass_tol: float = 1e-8

    # short-time convolution
    conv_n_steps: int = 256

    # Monte Carlo
    mc_paths: int = 200_000
    mc_dt: float = 1.0 / 250.0
    seed: int = 12345
    antithetic: bool = True

    # sampled output curves and diagnostics grids
    curve_points: int = 201
    diag_span_stdevs: float = 2.0

    # parallel map over average points (1 = serial)
    max_workers: int = 1

    def replace(self, **changes) -> "NumericsConfig":
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_overrides(cls, overrides: dict[str, str], base: "NumericsConfig | None" = None) -> "NumericsConfig":
        """Apply string-valued overrides (e.g. parsed from ``key=value`` flags)."""
        cfg = base or cls()
        fields = {f.name: f.type for f in dataclasses.fields(cls)}
        changes = {}
        for key, raw in overrides.items():
            if key not in fields:
                raise ValueError(f"unknown numerics option {key!r}")
            current = getattr(cfg, key)
            if isinstance(current, bool):
                changes[key] = raw.lower() in ("1", "true", "yes", "on")
            elif isinstance(current, int):
                changes[key] = int(raw)
            else:
                changes[key] = float(raw)
        return cfg.replace(**changes)


DEFAULT_CONFIG = NumericsConfig()


def load_key_value_file(path: str | Path) -> dict[str, str]:
    """Parse a plain-text ``key = value`` configuration file.

    Blank lines and ``#`` comments are ignored; keys are lower-cased.
    Values are returned as strings for the caller to coerce.
    """
    result: dict[str, str] = {}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, value = stripped.split("=", 1)
        result[key.strip().lower()] = value.strip()
    return result
