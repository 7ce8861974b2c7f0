"""Equilibrium of the binary_xi1 scenario: direct solve, Boltzmann structure and pressure.

Usage: python demos/steady_double_layer.py [n]
"""
import sys

import numpy as np

from nsnpp.cli import scenario_path
from nsnpp.config import parse_config
from nsnpp.energetics import State
from nsnpp.equilibrium import equilibrium_pressure, solve_steady
from nsnpp.flow import recover_pressure
from nsnpp.mesh import MacVelocity, integrate


def main(n=64):
    cfg = parse_config(scenario_path("binary_xi1").read_text(), [f"grid.nx={n}", f"grid.ny={n}"])
    masses = [integrate(ic.build(cfg.grid)) for ic in cfg.initial]
    st = solve_steady(masses, cfg.xi, cfg.species, cfg.params, tol=1e-12)
    phi = st.phi_inf.phi.values
    print(f"grid {n}x{n}: {st.iterations} fixed-point iterations, residual {st.residual:.2e}")
    print(f"zeta_inf = {', '.join(f'{z:.10f}' for z in st.zeta_inf)}; eta0 = {st.eta0:.6f}")
    print(f"phi_inf range [{phi.min():.6f}, {phi.max():.6f}]")
    mid = n // 2
    print("profile along y = 1/2 (x, phi, c+, c-):")
    for i in range(0, n, max(1, n // 8)):
        print(f"  {cfg.grid.xc[i]:.4f}  {phi[i, mid]: .6f}  {st.c_inf[0].values[i, mid]:.6f}  "
              f"{st.c_inf[1].values[i, mid]:.6f}")
    rec = recover_pressure(State(MacVelocity.zeros(cfg.grid), st.c_inf, st.phi_inf), cfg.species, cfg.params)
    print(f"stddev(recovered pressure - sum c_inf) = {np.std(rec.values - equilibrium_pressure(st).values):.2e}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 64)
