"""Command-line surface: densities, bonds, benchmark tables and diagnostics.

Commands
--------
density        sampled density curve, one or more methods side by side
bond           bond / survival-probability quotes per maturity and method
table          recompute a built-in benchmark table and check tolerances
selfconsistent trial-parameter diagnostics over a grid of average points
oracle         run a ground-truth engine by itself (pde, conv or mc)

Exit codes: 0 success, 2 tolerance breach, 3 numerical failure
(non-convergence or branch breakdown), 4 bad input.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import oracles, pricing
from .config import DEFAULT_CONFIG, NumericsConfig, load_key_value_file
from .harmonic import BranchBreakdownError, ConvergenceError, reduced_density, solve_self_consistent
from .models import DomainError, MODEL_BUILDERS, build_model
from .reference import TABLES

__all__ = ["RunSpec", "parse_args", "run_table", "run_density", "run_bond",
           "run_selfconsistent", "run_oracle", "main",
           "EXIT_OK", "EXIT_TOLERANCE", "EXIT_NUMERICAL", "EXIT_USAGE"]

EXIT_OK = 0
EXIT_TOLERANCE = 2
EXIT_NUMERICAL = 3
EXIT_USAGE = 4

_DENSITY_METHODS = ("gtfk", "pde", "conv", "exact")
_BOND_METHODS = ("gtfk", "pde", "conv", "mc", "exact")
_ORACLE_METHODS = ("pde", "conv", "mc")


class UsageError(Exception):
    """Invalid flags, parameters or combinations; maps to exit code 4."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); we own the exit codes
        raise UsageError(message)


@dataclass(frozen=True)
class RunSpec:
    """Fully resolved description of one command invocation.

    Round-trips through :meth:`to_dict` / :meth:`from_dict`, which is also
    what the JSON metadata sidecar records.
    """

    command: str
    model_name: str | None = None
    params: dict = field(default_factory=dict)
    lam: float = 1.0
    y0: float | None = None
    maturities: tuple[float, ...] = ()
    methods: tuple[str, ...] = ("gtfk",)
    table_id: str | None = None
    quantity: str = "density"
    out: str = "-"
    fmt: str = "csv"
    seed: int | None = None
    numerics: NumericsConfig = DEFAULT_CONFIG

    def to_dict(self) -> dict:
        data = dataclasses.asdict(self)
        data["numerics"] = dataclasses.asdict(self.numerics)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "RunSpec":
        payload = dict(data)
        payload["numerics"] = NumericsConfig(**payload["numerics"])
        payload["params"] = dict(payload["params"])
        payload["maturities"] = tuple(payload["maturities"])
        payload["methods"] = tuple(payload["methods"])
        return cls(**payload)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gtfk", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    model_flags = _Parser(add_help=False)
    model_flags.add_argument("--model", choices=sorted(MODEL_BUILDERS),
                             help="built-in model")
    model_flags.add_argument("--a", type=float, help="mean-reversion speed")
    model_flags.add_argument("--b", type=float,
                             help="mean-reversion level (log-rate for bk)")
    model_flags.add_argument("--sigma", type=float, help="volatility of the transformed state")
    model_flags.add_argument("--beta", type=float, help="linear rate-map coefficient (quadratic)")
    model_flags.add_argument("--gamma", type=float, help="quadratic rate-map coefficient (quadratic)")
    model_flags.add_argument("--lambda", dest="lam", type=float,
                             help="discount weight (default 1; 0 = transition density)")
    model_flags.add_argument("--y0", type=float,
                             help="initial state (log-rate for bk)")
    model_flags.add_argument("--config", help="key = value file with model parameters")

    common = _Parser(add_help=False)
    common.add_argument("--out", default="-", help="output path ('-' = stdout)")
    common.add_argument("--format", dest="fmt", choices=("csv", "json"), default="csv")
    common.add_argument("--seed", type=int, help="seed for stochastic methods")
    common.add_argument("--numerics", action="append", default=[], metavar="KEY=VALUE",
                        help="override a numerics option (repeatable)")

    p_density = sub.add_parser("density", parents=[model_flags, common],
                               help="sampled density curve")
    p_density.add_argument("--T", dest="maturities", action="append", type=float, required=True)
    p_density.add_argument("--method", default="gtfk",
                           help="comma-separated subset of %s" % ",".join(_DENSITY_METHODS))

    p_bond = sub.add_parser("bond", parents=[model_flags, common],
                            help="bond quotes per maturity")
    p_bond.add_argument("--T", dest="maturities", action="append", type=float, required=True)
    p_bond.add_argument("--method", default="gtfk",
                        help="comma-separated subset of %s" % ",".join(_BOND_METHODS))

    p_table = sub.add_parser("table", parents=[common],
                             help="recompute a benchmark table and check tolerances")
    p_table.add_argument("table_id", choices=sorted(TABLES))

    p_sc = sub.add_parser("selfconsistent", parents=[model_flags, common],
                          help="trial-parameter diagnostics over average points")
    p_sc.add_argument("--T", dest="maturities", action="append", type=float, required=True)

    p_oracle = sub.add_parser("oracle", parents=[model_flags, common],
                              help="run one ground-truth engine")
    p_oracle.add_argument("--T", dest="maturities", action="append", type=float, required=True)
    p_oracle.add_argument("--method", default="pde", choices=_ORACLE_METHODS)
    p_oracle.add_argument("--quantity", default="density", choices=("density", "bond"))

    return parser


_CONFIG_MODEL_KEYS = ("a", "b", "sigma", "beta", "gamma")


def parse_args(argv=None) -> RunSpec:
    parser = build_parser()
    ns = parser.parse_args(argv)

    file_values: dict[str, str] = {}
    if getattr(ns, "config", None):
        try:
            file_values = load_key_value_file(ns.config)
        except (OSError, ValueError) as exc:
            raise UsageError(str(exc)) from exc

    model_name = getattr(ns, "model", None) or file_values.get("model")
    params = {}
    for key in _CONFIG_MODEL_KEYS:
        flag = getattr(ns, key, None)
        if flag is not None:
            params[key] = float(flag)
        elif key in file_values:
            params[key] = float(file_values[key])
    lam = getattr(ns, "lam", None)
    if lam is None:
        lam = float(file_values.get("lambda", 1.0))
    y0 = getattr(ns, "y0", None)
    if y0 is None and "y0" in file_values:
        y0 = float(file_values["y0"])

    overrides = {}
    for item in ns.numerics:
        if "=" not in item:
            raise UsageError(f"--numerics expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    try:
        cfg = NumericsConfig.from_overrides(overrides)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if ns.seed is not None:
        cfg = cfg.replace(seed=ns.seed)
    env_threads = os.environ.get("GTFK_NUM_THREADS")
    if env_threads:
        try:
            cfg = cfg.replace(max_workers=max(1, int(env_threads)))
        except ValueError as exc:
            raise UsageError(f"GTFK_NUM_THREADS must be an integer, got {env_threads!r}") from exc

    methods: tuple[str, ...] = ("gtfk",)
    if ns.command in ("density", "bond"):
        methods = tuple(m.strip() for m in ns.method.split(",") if m.strip())
    elif ns.command == "oracle":
        methods = (ns.method,)

    spec = RunSpec(
        command=ns.command,
        model_name=model_name,
        params=params,
        lam=lam,
        y0=y0,
        maturities=tuple(getattr(ns, "maturities", ()) or ()),
        methods=methods,
        table_id=getattr(ns, "table_id", None),
        quantity=getattr(ns, "quantity", "density"),
        out=ns.out,
        fmt=ns.fmt,
        seed=ns.seed,
        numerics=cfg,
    )
    _validate_spec(spec)
    return spec


def _validate_spec(spec: RunSpec) -> None:
    if spec.command == "table":
        return
    if spec.model_name is None:
        raise UsageError("--model is required (or provide it via --config)")
    if spec.y0 is None:
        raise UsageError("--y0 is required (or provide it via --config)")
    if not spec.maturities or any(T <= 0.0 for T in spec.maturities):
        raise UsageError("--T must be given and positive")
    allowed = {
        "density": _DENSITY_METHODS,
        "bond": _BOND_METHODS,
        "oracle": _ORACLE_METHODS,
        "selfconsistent": ("gtfk",),
    }[spec.command]
    bad = [m for m in spec.methods if m not in allowed]
    if bad:
        raise UsageError(f"method(s) {bad} not valid for {spec.command!r}; allowed: {allowed}")
    if "exact" in spec.methods and spec.model_name != "vasicek":
        raise UsageError("method 'exact' is only available for the vasicek model")
    if spec.command == "oracle" and spec.quantity == "density" and spec.methods == ("mc",):
        raise UsageError("the mc oracle produces bond estimates, not density curves")
    if spec.command == "density" and len(spec.maturities) != 1:
        raise UsageError("density takes exactly one --T")
    if spec.command == "selfconsistent" and len(spec.maturities) != 1:
        raise UsageError("selfconsistent takes exactly one --T")
    try:
        build_model(spec.model_name, spec.params)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


# ---------------------------------------------------------------------------
# command implementations; each returns (header, rows, meta, exit_code)
# ---------------------------------------------------------------------------


def run_table(spec: RunSpec):
    table = TABLES[spec.table_id]
    model = build_model(table.model_name, table.params)
    cfg = spec.numerics
    header = ["T", "Z_gtfk", "Z_pde", "rel_diff"]
    rows = []
    failures = []
    for i, T in enumerate(table.maturities):
        z_g = pricing.zero_coupon_bond(model, table.lam, table.y0, T, cfg).value
        z_p = oracles.bond_from_pde(model, table.lam, table.y0, T, cfg=cfg).value
        rel = abs(z_g - z_p) / z_p
        rows.append([T, z_g, z_p, rel])
        if abs(z_g - table.gtfk_ref[i]) > table.gtfk_tol[i]:
            failures.append(
                f"row T={T}: Z_gtfk={z_g:.4f} deviates from reference "
                f"{table.gtfk_ref[i]:.4f} by more than {table.gtfk_tol[i]:g}"
            )
        if abs(z_p - table.pde_ref[i]) > table.pde_tol[i]:
            failures.append(
                f"row T={T}: Z_pde={z_p:.4f} deviates from reference "
                f"{table.pde_ref[i]:.4f} by more than {table.pde_tol[i]:g}"
            )
    meta = {"table_id": spec.table_id, "reference_failures": failures}
    for line in failures:
        print(f"gtfk table {spec.table_id}: TOLERANCE BREACH {line}", file=sys.stderr)
    return header, rows, meta, (EXIT_TOLERANCE if failures else EXIT_OK)


def run_density(spec: RunSpec):
    model = build_model(spec.model_name, spec.params)
    cfg = spec.numerics
    T = spec.maturities[0]
    base = pricing.gtfk_density_curve(model, spec.lam, spec.y0, T, cfg)
    columns = {"y": base.ys}
    for method in spec.methods:
        if method == "gtfk":
            columns["psi_gtfk"] = base.psi
        elif method == "exact":
            p = model.params
            psi_x = pricing.vasicek_exact_density(
                p["a"], p["b"], p["sigma"], spec.lam, float(model.to_x(spec.y0)), base.xs, T
            )
            columns["psi_exact"] = psi_x  # identity transform for this model
        else:
            curve = _oracle_curve(model, spec, method, T, cfg)
            columns[f"psi_{method}"] = np.interp(base.ys, curve.ys, curve.psi)
    header = list(columns)
    rows = [list(vals) for vals in zip(*columns.values())]
    meta = {"T": T, "grid_points": len(base.ys)}
    return header, rows, meta, EXIT_OK


def _oracle_curve(model, spec: RunSpec, method: str, T: float, cfg: NumericsConfig):
    x0 = float(model.to_x(spec.y0))
    grid = oracles.default_pde_grid(model, spec.lam, x0, T, cfg)
    if method == "pde":
        return oracles.solve_fokker_planck(model, spec.lam, x0, T, grid, cfg)
    if method == "conv":
        conv_grid = oracles.default_pde_grid(model, spec.lam, x0, T, cfg, n_time=1)
        return oracles.short_time_convolution(model, spec.lam, x0, T, cfg.conv_n_steps, conv_grid, cfg)
    raise UsageError(f"no curve for oracle method {method!r}")


def run_bond(spec: RunSpec):
    model = build_model(spec.model_name, spec.params)
    cfg = spec.numerics
    header = ["T", "method", "value", "err_estimate"]
    rows = []
    for T in sorted(spec.maturities):
        for method in spec.methods:
            if method == "gtfk":
                q = pricing.zero_coupon_bond(model, spec.lam, spec.y0, T, cfg)
                rows.append([T, method, q.value, q.err_estimate])
            elif method == "pde":
                q = oracles.bond_from_pde(model, spec.lam, spec.y0, T, cfg=cfg)
                rows.append([T, method, q.value, q.err_estimate])
            elif method == "conv":
                q = oracles.bond_from_convolution(model, spec.lam, spec.y0, T, cfg=cfg)
                rows.append([T, method, q.value, q.err_estimate])
            elif method == "mc":
                est = oracles.monte_carlo_bond(
                    model, spec.lam, spec.y0, T, cfg.mc_paths, cfg.mc_dt,
                    cfg.seed, cfg.antithetic,
                )
                rows.append([T, method, est.value, est.stderr])
            elif method == "exact":
                p = model.params
                value = pricing.vasicek_exact_bond(
                    p["a"], p["b"], p["sigma"], spec.lam, spec.y0, T
                )
                rows.append([T, method, value, 0.0])
    return header, rows, {"maturities": sorted(spec.maturities)}, EXIT_OK


def run_selfconsistent(spec: RunSpec):
    model = build_model(spec.model_name, spec.params)
    cfg = spec.numerics
    T = spec.maturities[0]
    x0 = float(model.to_x(spec.y0))
    lo, hi = pricing.effective_support(model, x0, T, cfg.diag_span_stdevs)
    xbars = np.linspace(lo, hi, cfg.curve_points)
    header = ["xbar", "omega2", "alpha", "rho_diag", "status"]
    rows = []
    residual_max = 0.0
    breakdowns = 0
    for xbar in xbars:
        try:
            point = solve_self_consistent(model, spec.lam, T, float(xbar), cfg)
        except (BranchBreakdownError, ConvergenceError):
            rows.append([float(xbar), math.nan, math.nan, math.nan, "breakdown"])
            breakdowns += 1
            continue
        rho = float(reduced_density(point, x0, x0))
        residual_max = max(residual_max, point.residual)
        rows.append([float(xbar), point.omega2, point.alpha, rho, "ok"])
    meta = {"T": T, "max_residual": residual_max, "breakdown_rows": breakdowns}
    return header, rows, meta, EXIT_OK


def run_oracle(spec: RunSpec):
    model = build_model(spec.model_name, spec.params)
    cfg = spec.numerics
    method = spec.methods[0]
    if spec.quantity == "bond" or method == "mc":
        bond_spec = dataclasses.replace(spec, methods=(method,))
        return run_bond(bond_spec)
    T = spec.maturities[0]
    curve = _oracle_curve(model, spec, method, T, cfg)
    header = ["y", f"psi_{method}"]
    rows = [[y, p] for y, p in zip(curve.ys, curve.psi)]
    meta = {"T": T, "diagnostics": {k: v for k, v in curve.diagnostics.items()
                                    if np.isscalar(v)}}
    return header, rows, meta, EXIT_OK


# ---------------------------------------------------------------------------
# output plumbing
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".12g")
    return str(value)


def _emit(spec: RunSpec, header, rows, meta, elapsed: float) -> None:
    meta_doc = {
        "spec": spec.to_dict(),
        "meta": meta,
        "elapsed_seconds": round(elapsed, 3),
    }
    if spec.fmt == "json":
        doc = {"header": header, "rows": rows, **meta_doc}
        text = json.dumps(doc, indent=2, default=float) + "\n"
        _write(spec.out, text)
        return
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    _write(spec.out, "\n".join(lines) + "\n")
    if spec.out != "-":
        sidecar = spec.out + ".meta.json"
        with open(sidecar, "w") as fh:
            json.dump(meta_doc, fh, indent=2, default=float)
            fh.write("\n")


def _write(out: str, text: str) -> None:
    if out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


_RUNNERS = {
    "table": run_table,
    "density": run_density,
    "bond": run_bond,
    "selfconsistent": run_selfconsistent,
    "oracle": run_oracle,
}


def main(argv=None) -> int:
    started = time.perf_counter()
    try:
        spec = parse_args(argv)
    except UsageError as exc:
        print(f"gtfk: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        header, rows, meta, code = _RUNNERS[spec.command](spec)
    except (UsageError, DomainError) as exc:
        print(f"gtfk: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BranchBreakdownError as exc:
        print(f"gtfk: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ConvergenceError as exc:
        print(f"gtfk: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    _emit(spec, header, rows, meta, time.perf_counter() - started)
    return code


if __name__ == "__main__":
    sys.exit(main())
