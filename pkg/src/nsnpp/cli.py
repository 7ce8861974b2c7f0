"""Command-line front end: ``nsnpp <run|steady|mms|check> <config> [--out DIR] [--set key=value ...]``.

Exit codes: 0 success, 1 invariant violation, 2 solver failure (also used
for unreadable or invalid input).
"""
from __future__ import annotations

import argparse
import datetime as _dt
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .config import parse_config
from .dynamics import TimeSeries, decay_report, run
from .equilibrium import solve_steady
from .mesh import integrate, write_snapshot
from .mms import robin_mms
from .potential import PhysParams
from .sparse import SolverError

EXIT_OK, EXIT_INVARIANT, EXIT_SOLVER = 0, 1, 2

MASS_RTOL = 1e-10
NEG_TOL = 1e-13
DIV_TOL = 1e-10


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def tol_v(v):
    return 1e-8 * (1.0 + np.abs(v))


def check_series(series: TimeSeries) -> list:
    """Audit mass, positivity, monotonicity of V, divergence and time ordering."""
    out = []
    t = series.column("t")
    out.append(CheckResult("time", bool(np.all(np.diff(t) > 0)), "t strictly increasing"))
    drift = 0.0
    for k in range(series.n_species):
        m = series.column(f"mass_{k + 1}")
        scale = abs(m[0]) if m[0] != 0 else 1.0
        drift = max(drift, float(np.abs(m - m[0]).max() / scale))
    out.append(CheckResult("mass", drift <= MASS_RTOL, f"max relative drift {drift:.3e} (limit {MASS_RTOL:g})"))
    minc = float(np.nanmin(series.column("min_c")))
    out.append(CheckResult("positivity", minc >= -NEG_TOL, f"min c {minc:.3e} (limit {-NEG_TOL:g})"))
    V = series.column("V")
    excess = np.diff(V) - tol_v(V[:-1])
    worst = float(np.diff(V).max()) if V.size > 1 else 0.0
    nviol = int((excess > 0).sum())
    out.append(CheckResult("monotone_V", nviol == 0,
                           f"{nviol} increases beyond 1e-8(1+|V|); largest dV {worst:.3e}"))
    div = float(np.nanmax(series.column("linf_div_u")))
    out.append(CheckResult("divergence", div <= DIV_TOL, f"max |div u| {div:.3e} (limit {DIV_TOL:g})"))
    return out


def check_invariants(out_dir) -> list:
    path = Path(out_dir) / "timeseries.csv"
    if not path.exists():
        raise FileNotFoundError(f"{path} not found")
    return check_series(TimeSeries.from_csv(path))


def _print_checks(results, stream=None):
    stream = sys.stdout if stream is None else stream
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<12} {r.detail}", file=stream)


def _load(args):
    threads = int(os.environ.get("NSNPP_THREADS", "1") or 1)
    text = scenario_path(args.config).read_text()
    return parse_config(text, args.set, threads=max(1, threads))


def scenario_path(name) -> Path:
    """A file path, or the name of a shipped scenario (``binary_xi1`` or ``binary_xi1.cfg``)."""
    p = Path(name)
    if p.exists():
        return p
    shipped = Path(__file__).parent / "scenarios" / (p.name if p.suffix == ".cfg" else p.name + ".cfg")
    if shipped.exists():
        return shipped
    raise FileNotFoundError(f"config {name} not found (neither a file nor a shipped scenario)")


def _summary_header(cmd, config_path):
    stamp = _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0).isoformat()
    return [f"# nsnpp {__version__} {cmd}", f"# config: {config_path}", f"# created: {stamp}"]


def _cmd_run(args) -> int:
    cfg = _load(args)
    out = Path(args.out or f"out_{cfg.name}")
    series, state, _ = run(cfg, out_dir=out)
    checks = check_series(series)
    lines = _summary_header("run", args.config)
    lines += [f"scenario = {cfg.name}", f"grid = {cfg.grid.nx}x{cfg.grid.ny}", f"dt = {cfg.dt!r}",
              f"steps = {series.meta['steps']}", f"t_final = {state.t!r}",
              f"stop_reason = {series.meta['stop']}", f"dt_halvings = {series.meta['halvings']}",
              f"V_final = {float(series.column('V')[-1])!r}"]
    steady = series.meta.get("steady")
    if steady is not None:
        lines += [f"steady_residual = {steady.residual:.3e}", f"steady_iterations = {steady.iterations}",
                  f"psi_final = {series.column('psi')[-1]:.6e}"]
        try:
            rep = decay_report(series, steady)
            lines += [f"omega_psi = {rep.psi.omega:.6g} (R2 {rep.psi.r_squared:.6f}, "
                      f"window {rep.psi.window[0]:.4g}..{rep.psi.window[1]:.4g})",
                      f"omega_norm = {rep.norm.omega:.6g} (R2 {rep.norm.r_squared:.6f}, "
                      f"window {rep.norm.window[0]:.4g}..{rep.norm.window[1]:.4g})",
                      f"rates_consistent = {rep.consistent}"]
        except ValueError as exc:
            lines.append(f"decay_fit = unavailable ({exc})")
    for r in checks:
        lines.append(f"check_{r.name} = {'pass' if r.passed else 'FAIL'}: {r.detail}")
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    _print_checks(checks)
    print(f"wrote {out}")
    return EXIT_OK if all(r.passed for r in checks) else EXIT_INVARIANT


def _cmd_steady(args) -> int:
    cfg = _load(args)
    out = Path(args.out or f"out_{cfg.name}_steady")
    out.mkdir(parents=True, exist_ok=True)
    masses = [integrate(ic.build(cfg.grid, lab)) for ic, lab in zip(cfg.initial, cfg.species.labels)]
    st = solve_steady(masses, cfg.xi, cfg.species, cfg.params, tol=cfg.tolerances.steady)
    for label, c in zip(cfg.species.labels, st.c_inf):
        write_snapshot(out / f"steady_{label}.csv", c)
    write_snapshot(out / "steady_phi.csv", st.phi_inf.phi)
    write_snapshot(out / "steady_pressure.csv", st.pi_inf)
    line = (f"masses = {', '.join(f'{m:.15g}' for m in st.masses)}; "
            f"zeta = {', '.join(f'{z:.15g}' for z in st.zeta_inf)}; "
            f"residual = {st.residual:.3e}; iterations = {st.iterations}; eta0 = {st.eta0:.6g}")
    lines = _summary_header("steady", args.config) + [f"scenario = {cfg.name}", line]
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    print(line)
    return EXIT_OK if st.residual <= 1e-8 else EXIT_INVARIANT


def _cmd_mms(args) -> int:
    params = PhysParams()
    lx = ly = 1.0
    if args.config:
        cfg = _load(args)
        params, lx, ly = cfg.params, cfg.grid.lx, cfg.grid.ly
    levels = [int(v) for v in args.levels.split(",")]
    res = robin_mms(levels, params, lx, ly)
    for n, e in zip(res.levels, res.errors):
        print(f"n = {n:5d}  L2 error = {e:.6e}")
    print("observed Poisson order: " + ", ".join(f"{o:.4f}" for o in res.orders))
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "mms.txt").write_text(
            "\n".join(f"{n} {e!r}" for n, e in zip(res.levels, res.errors)) + "\n")
    return EXIT_OK if res.min_order >= 1.9 else EXIT_INVARIANT


def _cmd_check(args) -> int:
    target = Path(args.config)
    out = target if target.is_dir() else Path(args.out or f"out_{_load(args).name}")
    results = check_invariants(out)
    _print_checks(results)
    return EXIT_OK if all(r.passed for r in results) else EXIT_INVARIANT


@dataclass(frozen=True)
class CliInvocation:
    command: str
    config: str | None
    out: str | None = None
    set: tuple = ()
    levels: str = "32,64,128"

    def __post_init__(self):
        if self.command not in ("run", "steady", "mms", "check"):
            raise ValueError(f"unknown subcommand {self.command!r}")
        object.__setattr__(self, "set", tuple(self.set))


def run_scenario(invocation: CliInvocation) -> int:
    """Execute one invocation and map failures to exit codes."""
    handler = {"run": _cmd_run, "steady": _cmd_steady, "mms": _cmd_mms, "check": _cmd_check}[invocation.command]
    try:
        return handler(invocation)
    except SolverError as exc:
        print(f"nsnpp: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (OSError, ValueError) as exc:
        print(f"nsnpp: error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nsnpp", description="Navier-Stokes-Nernst-Planck-Poisson simulator")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (("run", "time-march a scenario"), ("steady", "solve the equilibrium directly"),
                           ("mms", "Robin-Poisson manufactured-solution study"),
                           ("check", "audit invariants of a run directory")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("config", nargs="?" if name == "mms" else None,
                        help="scenario file (for check: a run directory or the scenario file)")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config entry, e.g. time.dt=5e-4")
        if name == "mms":
            sp.add_argument("--levels", default="32,64,128", help="comma-separated grid sizes")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return run_scenario(CliInvocation(args.command, args.config, args.out, args.set,
                                      getattr(args, "levels", "32,64,128")))


if __name__ == "__main__":
    sys.exit(main())
