"""Reproduce the built-in zero-coupon-bond benchmark tables.

Walks the three reference parameter sets, prices each maturity with the
effective-potential approximation and with the Fokker-Planck solver, and
prints the side-by-side comparison together with the stored reference
values.  Equivalent to `gtfk table <id>` but in library form.
"""

import time

from gtfk import models, oracles, pricing
from gtfk.reference import TABLES


def run_table(table):
    model = models.build_model(table.model_name, table.params)
    print(f"\n=== {table.table_id}: {table.model_name} {table.params}, y0={table.y0:.4g} ===")
    print(f"{'T':>6} {'gtfk':>8} {'ref':>8} {'pde':>8} {'ref':>8} {'gtfk-pde':>10}")
    started = time.perf_counter()
    for i, T in enumerate(table.maturities):
        z_g = pricing.zero_coupon_bond(model, table.lam, table.y0, T).value
        z_p = oracles.bond_from_pde(model, table.lam, table.y0, T).value
        print(f"{T:6.2f} {z_g:8.4f} {table.gtfk_ref[i]:8.4f} "
              f"{z_p:8.4f} {table.pde_ref[i]:8.4f} {abs(z_g - z_p) / z_p:10.2%}")
    print(f"({time.perf_counter() - started:.1f}s)")


if __name__ == "__main__":
    for table_id in ("bk_bonds", "garch_bonds_1", "garch_bonds_2"):
        run_table(TABLES[table_id])
