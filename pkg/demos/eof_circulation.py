"""Electro-osmotic circulation driven by asymmetric wall data (eof_sidewall).

Prints the transient velocity magnitude, the Lyapunov functional V and the
invariant audit; writes the run directory if a path is given.

Usage: python demos/eof_circulation.py [out_dir]
"""
import sys

from nsnpp.cli import check_series, scenario_path
from nsnpp.config import parse_config
from nsnpp.dynamics import run


def main(out=None):
    cfg = parse_config(scenario_path("eof_sidewall").read_text(), ["time.t_end=1.0", "time.record_every=50"])
    series, state, _ = run(cfg, out_dir=out)
    print("      t            V        ||u||_2     dissipation")
    for t, V, u, d in zip(series.column("t"), series.column("V"), series.column("l2_u"),
                          series.column("dissipation")):
        print(f"  {t:6.3f}  {V: .10f}  {u:.4e}  {d:.4e}")
    for r in check_series(series):
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<12} {r.detail}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else None)
