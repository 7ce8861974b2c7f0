"""Coupled time stepping, run orchestration, time series and decay-rate fits.

One step is split as: implicit Nernst-Planck transport with frozen
``(phi, u)``, Robin re-solve for the new charge, then velocity prediction
with the Coulomb force of the new state followed by the projection.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .energetics import State, compute_energy, relative_energy
from .equilibrium import SteadyState, solve_steady
from .flow import (PressureField, coulomb_force, divergence, ns_predict, project,
                   recover_pressure, velocity_grad_l2_sq, velocity_l2)
from .mesh import BoundaryTrace, GridSpec, MacVelocity, ScalarField, integrate, write_snapshot
from .potential import PhysParams, Species, solve_potential
from .sparse import SolverError
from .transport import step_np_implicit

U_FLOOR = 1e-8
MAX_HALVINGS = 10


@dataclass(frozen=True)
class InitialCondition:
    """Initial concentration descriptor.

    ``constant``: ``value``. ``cosine``: ``value + amp cos(kx pi x/lx) cos(ky pi y/ly)``.
    ``gaussian``: ``value + amp exp(-|x - x0|^2 / (2 width^2))``; if ``mass`` is
    given the bump amplitude is rescaled so the discrete integral equals it.
    For the other kinds a given ``mass`` is checked against the integral.
    """

    kind: str = "constant"
    value: float = 1.0
    amp: float = 0.0
    kx: float = 1.0
    ky: float = 0.0
    x0: float = 0.5
    y0: float = 0.5
    width: float = 0.1
    mass: float | None = None

    def __post_init__(self):
        if self.kind not in ("constant", "cosine", "gaussian"):
            raise ValueError(f"unknown initial condition kind {self.kind!r}")
        if self.kind == "gaussian" and self.width <= 0:
            raise ValueError("gaussian width must be positive")

    def build(self, grid: GridSpec, label: str = "c") -> ScalarField:
        x, y = grid.cell_centers()
        if self.kind == "constant":
            vals = np.full(grid.shape, float(self.value))
        elif self.kind == "cosine":
            vals = self.value + self.amp * np.cos(self.kx * np.pi * x / grid.lx) * np.cos(self.ky * np.pi * y / grid.ly)
        else:
            bump = np.exp(-((x - self.x0) ** 2 + (y - self.y0) ** 2) / (2.0 * self.width ** 2))
            amp = self.amp
            if self.mass is not None:
                amp = (self.mass - self.value * grid.area) / (bump.sum() * grid.cell_area)
            vals = self.value + amp * bump
        if vals.min() < 0:
            raise ValueError(f"species {label}: initial concentration is negative (min {vals.min():.3e})")
        c = ScalarField(grid, vals)
        if self.mass is not None:
            m = integrate(c)
            if abs(m - self.mass) > 1e-10 * max(1.0, abs(self.mass)):
                raise ValueError(f"species {label}: declared mass {self.mass!r} does not match "
                                 f"the initial field integral {m:.15g}")
        return c


@dataclass(frozen=True)
class VelocityInit:
    """``zero``, ``uniform`` (constant ``u_x``; not solenoidal), ``shear`` (``amp sin(pi y)``)
    or ``vortex`` (stream function ``amp sin^2(pi x) sin^2(pi y)``)."""

    kind: str = "zero"
    amp: float = 0.0

    def __post_init__(self):
        if self.kind not in ("zero", "uniform", "shear", "vortex"):
            raise ValueError(f"unknown velocity kind {self.kind!r}")

    def build(self, grid: GridSpec) -> MacVelocity:
        a = self.amp
        X, Y = grid.lx, grid.ly
        if self.kind == "zero" or a == 0:
            return MacVelocity.zeros(grid)
        if self.kind == "uniform":
            return MacVelocity.from_functions(grid, lambda x, y: a + 0 * x, lambda x, y: 0 * x)
        if self.kind == "shear":
            return MacVelocity.from_functions(grid, lambda x, y: a * np.sin(np.pi * y / Y), lambda x, y: 0 * x)
        # u = d(psi)/dy, v = -d(psi)/dx
        return MacVelocity.from_functions(
            grid,
            lambda x, y: a * np.sin(np.pi * x / X) ** 2 * (np.pi / Y) * np.sin(2 * np.pi * y / Y),
            lambda x, y: -a * (np.pi / X) * np.sin(2 * np.pi * x / X) * np.sin(np.pi * y / Y) ** 2)


@dataclass(frozen=True)
class Tolerances:
    potential: float = 1e-12
    transport: float = 1e-12
    velocity: float = 1e-12
    projection: float = 1e-13
    steady: float = 1e-12


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    grid: GridSpec
    species: Species
    initial: tuple
    xi: BoundaryTrace
    params: PhysParams = PhysParams()
    velocity: VelocityInit = VelocityInit()
    dt: float = 1e-3
    t_end: float = 1.0
    max_steps: int | None = None
    record_every: int = 1
    snapshot_every: int = 0
    psi_stop: float = 0.0
    compute_steady: bool = True
    tolerances: Tolerances = Tolerances()
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "initial", tuple(self.initial))
        if len(self.initial) != self.species.n:
            raise ValueError(f"expected {self.species.n} initial conditions, got {len(self.initial)}")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError("dt must be positive")
        if not (self.t_end >= 0 and math.isfinite(self.t_end)):
            raise ValueError("t_end must be nonnegative")
        if self.xi.grid != self.grid:
            raise ValueError("wall data lives on a different grid")
        if self.record_every < 1 or self.snapshot_every < 0:
            raise ValueError("record_every must be >= 1 and snapshot_every >= 0")
        if self.max_steps is not None and self.max_steps < 0:
            raise ValueError("max_steps must be nonnegative")

    def with_overrides(self, **kwargs) -> "ScenarioConfig":
        return replace(self, **kwargs)


# ---------------------------------------------------------------- stepping

def init_state(config: ScenarioConfig) -> State:
    """Initial state: descriptor fields, projected velocity, Robin potential, recovered pressure."""
    g = config.grid
    tol = config.tolerances
    c = [ic.build(g, label) for ic, label in zip(config.initial, config.species.labels)]
    u = config.velocity.build(g)
    if u.max_abs() > 0:
        u, _ = project(u, config.params, 1.0, tol.projection)
    pot = solve_potential(c, config.xi, config.species, config.params, tol.potential)
    state = State(u, c, pot, 0.0)
    pressure = recover_pressure(state, config.species, config.params, tol.projection)
    return State(u, c, pot, 0.0, pressure)


def cfl_limit(u: MacVelocity) -> float:
    g = u.grid
    return 0.5 * min(g.dx, g.dy) / max(u.max_abs(), U_FLOOR)


def _advance(state: State, config: ScenarioConfig, dt: float) -> State:
    if dt > cfl_limit(state.u) * (1 + 1e-12):
        raise SolverError(f"dt = {dt:.3e} violates the advection CFL limit {cfl_limit(state.u):.3e}")
    tol = config.tolerances
    sp, params = config.species, config.params
    c = step_np_implicit(state.c, state.phi, state.u, sp, dt, tol.transport, threads=config.threads)
    pot = solve_potential(c, config.xi, sp, params, tol.potential, x0=state.phi.phi.values)
    force = coulomb_force(c, pot, sp)
    u_star = ns_predict(state.u, force, params, dt, state.pressure, tol.velocity)
    u, q = project(u_star, params, dt, tol.projection)
    pressure = q if state.pressure is None else PressureField(q.grid, state.pressure.values + q.values)
    return State(u, c, pot, state.t + dt, pressure)


def step(state: State, config: ScenarioConfig, dt: float | None = None, info: dict | None = None) -> State:
    """Advance by ``dt`` (default ``config.dt``).

    A failed solve or a CFL violation rejects the step; the interval is then
    covered by ``2^k`` equal substeps, ``k`` up to 10, before a hard error.
    """
    dt = config.dt if dt is None else dt
    last = None
    for k in range(MAX_HALVINGS + 1):
        sub = dt / 2 ** k
        try:
            s = state
            for _ in range(2 ** k):
                s = _advance(s, config, sub)
        except SolverError as exc:
            last = exc
            continue
        if info is not None:
            info["halvings"] = info.get("halvings", 0) + k
        return State(s.u, s.c, s.phi, state.t + dt, s.pressure)
    raise SolverError(f"step at t = {state.t:.6g} failed after {MAX_HALVINGS} dt halvings: {last}",
                      getattr(last, "report", None))


# ------------------------------------------------------------- time series

def series_columns(n_species: int) -> list:
    return (["t", "V", "dissipation", "psi"] + [f"mass_{k + 1}" for k in range(n_species)]
            + ["min_c", "l2_u", "grad_l2_u", "l1_c_err", "linf_div_u"])


@dataclass
class TimeSeries:
    """Recorded diagnostics, one row per record; ``nan`` marks a missing value."""

    columns: list
    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @classmethod
    def empty(cls, n_species: int) -> "TimeSeries":
        return cls(series_columns(n_species))

    @classmethod
    def from_columns(cls, **cols) -> "TimeSeries":
        names = list(cols)
        data = np.column_stack([np.asarray(cols[n], dtype=float) for n in names])
        return cls(names, [list(r) for r in data])

    @property
    def n_species(self) -> int:
        return sum(1 for c in self.columns if c.startswith("mass_"))

    def append(self, record: dict):
        if self.rows and record["t"] <= self.rows[-1][0]:
            raise ValueError("time series records must have strictly increasing t")
        self.rows.append([float(record.get(c, np.nan)) for c in self.columns])

    def column(self, name: str) -> np.ndarray:
        k = self.columns.index(name)
        return np.array([r[k] for r in self.rows], dtype=float)

    def __len__(self):
        return len(self.rows)

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns)
            for r in self.rows:
                w.writerow(["" if math.isnan(v) else "%.17g" % v for v in r])
        return path

    @classmethod
    def from_csv(cls, path) -> "TimeSeries":
        with Path(path).open(newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise ValueError(f"{path}: empty time series file") from None
            if not header or header[0] != "t":
                raise ValueError(f"{path}: malformed header")
            rows = []
            for lineno, r in enumerate(reader, start=2):
                if len(r) != len(header):
                    raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(r)}")
                try:
                    rows.append([float(v) if v.strip() else np.nan for v in r])
                except ValueError:
                    raise ValueError(f"{path}:{lineno}: non-numeric field") from None
        return cls(header, rows)


def record(state: State, config: ScenarioConfig, steady: SteadyState | None = None) -> dict:
    sp, params = config.species, config.params
    energy = compute_energy(state, sp, params)
    rec = {"t": state.t, "V": energy.total, "dissipation": energy.dissipation,
           "min_c": min(float(ci.values.min()) for ci in state.c),
           "l2_u": velocity_l2(state.u),
           "grad_l2_u": math.sqrt(velocity_grad_l2_sq(state.u)),
           "linf_div_u": float(np.abs(divergence(state.u).values).max())}
    for k, ci in enumerate(state.c):
        rec[f"mass_{k + 1}"] = integrate(ci)
    if steady is not None:
        rec["psi"] = relative_energy(state, steady, sp, params)
        rec["l1_c_err"] = sum(float(np.abs(ci.values - cinf.values).sum()) * state.grid.cell_area
                              for ci, cinf in zip(state.c, steady.c_inf))
    return rec


class RunResult(NamedTuple):
    series: TimeSeries
    state: State
    snapshots: list


def _snapshot(state: State, config: ScenarioConfig) -> dict:
    fields = {label: ci for label, ci in zip(config.species.labels, state.c)}
    fields["phi"] = state.phi.phi
    if state.pressure is not None:
        fields["pressure"] = state.pressure
    return fields


def run(config: ScenarioConfig, steady: SteadyState | None = None, out_dir=None,
        state: State | None = None, observer=None) -> RunResult:
    """March until ``t_end``, ``Psi < psi_stop`` or ``max_steps``.

    If no equilibrium is supplied and ``config.compute_steady`` is set, it is
    solved for the initial masses so that ``psi`` and ``l1_c_err`` are recorded.
    ``observer(state)``, if given, is called on every recorded state.
    """
    state = init_state(config) if state is None else state
    if steady is None and config.compute_steady:
        steady = solve_steady([integrate(ci) for ci in state.c], config.xi, config.species,
                              config.params, tol=config.tolerances.steady)
    series = TimeSeries.empty(config.species.n)
    series.meta.update(halvings=0, steps=0, steady=steady, stop="t_end")
    snapshots = []
    out = None if out_dir is None else Path(out_dir)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    def snap(n):
        fields = _snapshot(state, config)
        snapshots.append((state.t, fields))
        if out is not None:
            for name, f in fields.items():
                write_snapshot(out / f"snap_{n:06d}_{name}.csv", f, state.t)

    rec = record(state, config, steady)
    series.append(rec)
    if observer is not None:
        observer(state)
    n_total = max(0, int(round(config.t_end / config.dt)))
    if config.max_steps is not None:
        n_total = min(n_total, config.max_steps)
    if config.snapshot_every:
        snap(0)
    info = {}
    n = 0
    while n < n_total:
        if config.psi_stop > 0 and steady is not None and rec["psi"] < config.psi_stop:
            series.meta["stop"] = "psi"
            break
        state = step(state, config, info=info)
        # keep t on the grid n*dt so records stay exactly reproducible
        n += 1
        state = State(state.u, state.c, state.phi, n * config.dt, state.pressure)
        last = n == n_total
        if n % config.record_every == 0 or last:
            rec = record(state, config, steady)
            series.append(rec)
            if observer is not None:
                observer(state)
        if config.snapshot_every and n % config.snapshot_every == 0:
            snap(n)
    if n == n_total and config.max_steps is not None and n_total < round(config.t_end / config.dt):
        series.meta["stop"] = "max_steps"
    if series.rows[-1][0] != state.t:
        series.append(record(state, config, steady))
        if observer is not None:
            observer(state)
    if not config.snapshot_every or n % config.snapshot_every:
        snap(n)
    series.meta["halvings"] = info.get("halvings", 0)
    series.meta["steps"] = n
    if out is not None:
        series.to_csv(out / "timeseries.csv")
    return RunResult(series, state, snapshots)


# ------------------------------------------------------------ rate fitting

@dataclass(frozen=True)
class RateFit:
    C: float
    omega: float
    r_squared: float
    window: tuple

    def __post_init__(self):
        if not math.isfinite(self.omega):
            raise ValueError("fitted rate is not finite")
        if not 0.0 <= self.r_squared <= 1.0:
            raise ValueError("r_squared outside [0, 1]")


def fit_exponential(t, y, window=None) -> RateFit:
    """Least-squares fit of ``log y = log C - omega t`` over ``window = (t0, t1)``."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.shape != y.shape or t.ndim != 1:
        raise ValueError("t and y must be 1-D arrays of equal length")
    if window is not None:
        sel = (t >= window[0]) & (t <= window[1])
        t, y = t[sel], y[sel]
    if t.size < 10:
        raise ValueError(f"need at least 10 samples in the fit window, got {t.size}")
    if not np.all(y > 0) or not np.all(np.isfinite(y)):
        raise ValueError("fit window contains nonpositive or non-finite values; shrink it above the noise floor")
    ly = np.log(y)
    slope, intercept = np.polyfit(t, ly, 1)
    resid = ly - (slope * t + intercept)
    ss_tot = float(((ly - ly.mean()) ** 2).sum())
    ss_res = float((resid ** 2).sum())
    # zero spread in log y: the fit is exact by convention
    r2 = 1.0 if ss_tot <= 1e-30 * max(1.0, float((ly ** 2).sum())) else 1.0 - ss_res / ss_tot
    return RateFit(float(np.exp(intercept)), float(-slope), float(min(1.0, max(0.0, r2))),
                   (float(t[0]), float(t[-1])))


def auto_window(t, y, lo: float = 1e-10, hi: float = 1e-2) -> tuple:
    """Largest contiguous stretch where ``lo <= y / y[0] <= hi``."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.size == 0 or not y[0] > 0:
        raise ValueError("auto window needs a positive initial value")
    ratio = y / y[0]
    ok = (ratio >= lo) & (ratio <= hi) & np.isfinite(ratio)
    best, start, best_len = None, None, 0
    for k, flag in enumerate(np.append(ok, False)):
        if flag and start is None:
            start = k
        elif not flag and start is not None:
            if k - start > best_len:
                best, best_len = (start, k - 1), k - start
            start = None
    if best is None or best_len < 10:
        raise ValueError(f"no window with at least 10 samples where the ratio lies in [{lo:g}, {hi:g}]")
    return float(t[best[0]]), float(t[best[1]])


@dataclass(frozen=True)
class DecayReport:
    psi: RateFit
    norm: RateFit
    consistent: bool


def decay_report(series: TimeSeries, steady: SteadyState | None = None,
                 lo: float = 1e-10, hi: float = 1e-2) -> DecayReport:
    """Fits of ``Psi`` and ``||u||_2 + ||c - c_inf||_1`` on auto-selected windows.

    ``consistent`` when ``omega_norm >= 0.45 * omega_psi`` (the norm is
    controlled by ``Psi^(1/2)``, so its rate should be at least half).
    """
    t = series.column("t")
    psi = series.column("psi")
    norm = series.column("l2_u") + series.column("l1_c_err")
    if np.isnan(psi).all() or np.isnan(norm).all():
        raise ValueError("series has no psi / l1_c_err columns (no equilibrium was supplied)")
    fp = fit_exponential(t, psi, auto_window(t, psi, lo, hi))
    fn = fit_exponential(t, norm, auto_window(t, norm, lo, hi))
    return DecayReport(fp, fn, bool(fn.omega >= 0.45 * fp.omega))
