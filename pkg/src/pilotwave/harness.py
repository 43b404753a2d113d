"""Experiment orchestration: configs, epsilon sweeps, reports, emitters.

A sweep propagates the oscillating and averaged systems side by side from
the same initial state, records velocity fields on a fast-scale-resolving
mesh, integrates paired trajectory ensembles from a shared seed, and
reports every convergence metric per epsilon.  Rows are computed
concurrently; all randomness comes from per-purpose streams derived from
the master seed before fan-out, so thread count cannot affect results.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

from . import __version__
from .bohm import FieldHistory, densities, integrate_trajectories, sample_initial_positions
from .errors import BoundaryMassExceeded, ConfigError, MonitorAbort, UsageError, WaveBlowUp
from .fieldio import save_field
from .grid import ComplexField, Grid, boundary_mass_fraction, make_grid, norms
from .measure import bohmian_measure, flow_injectivity_monitor, monokinetic_deviation, trajectory_deviation_measure
from .potential import (
    SPATIAL_BUILTINS,
    TEMPORAL_BUILTINS,
    TimePeriodicPotential,
    constant_profile,
    cosine_lattice,
    effective_potential,
    gaussian_well,
)
from .solver import (
    EffectiveSystem,
    OscillatingSystem,
    SolverConfig,
    WaveFunction,
    StrangStepper,
    gaussian_packet,
    gronwall_integrand,
    h1_distance,
)

__all__ = [
    "ExperimentConfig",
    "SweepRow",
    "ConvergenceReport",
    "load_config",
    "config_from_mapping",
    "harmonic_benchmark_config",
    "run_single",
    "run_sweep",
    "emit_csv",
    "emit_json",
]

BLOWUP_FACTOR = 10.0


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class GridSpec:
    dim: int = 1
    n_per_axis: int = 512
    half_width: float = 16.0


@dataclass(frozen=True)
class PotentialSpec:
    temporal: str = "one_plus_cos"
    spatial: str = "harmonic"
    temporal_value: float = 1.0  # constant profile only
    well_depth: float = 1.0
    well_width: float = 1.0
    lattice_amplitude: float = 1.0
    lattice_periods: int = 4
    analytic_mean: float | None = None


@dataclass(frozen=True)
class InitialStateSpec:
    kind: str = "gaussian"
    center: tuple[float, ...] = (0.0,)
    width: float = 1.0
    momentum: tuple[float, ...] = (0.0,)
    eps_perturbation: bool = False


@dataclass(frozen=True)
class SolverSpec:
    steps_per_fast_period: int = 32
    frames_per_fast_period: int = 16
    dt_cap: float = 0.01
    quad_order: int = 16


@dataclass(frozen=True)
class SweepSpec:
    horizon: float = 1.0
    eps_list: tuple[float, ...] = (0.2, 0.1, 0.05, 0.025)
    delta_list: tuple[float, ...] = (0.05,)
    ensemble_size: int = 2000
    seed: int = 20240811


@dataclass(frozen=True)
class MeasureSpec:
    dictionary_size: int = 256


@dataclass(frozen=True)
class OutputSpec:
    save_fields: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    grid: GridSpec = field(default_factory=GridSpec)
    potential: PotentialSpec = field(default_factory=PotentialSpec)
    initial_state: InitialStateSpec = field(default_factory=InitialStateSpec)
    solver: SolverSpec = field(default_factory=SolverSpec)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    measure: MeasureSpec = field(default_factory=MeasureSpec)
    output: OutputSpec = field(default_factory=OutputSpec)

    def __post_init__(self) -> None:
        s = self.sweep
        eps = s.eps_list
        if not eps:
            raise ConfigError("eps_list must not be empty")
        if any(not (0.0 < e <= 1.0) for e in eps):
            raise ConfigError(f"eps values must lie in (0, 1], got {eps}")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ConfigError(f"eps_list must be strictly decreasing, got {eps}")
        if not (s.horizon > 0):
            raise ConfigError(f"horizon must be positive, got {s.horizon}")
        if s.ensemble_size < 100:
            raise ConfigError(
                f"ensemble_size must be >= 100 for measure statistics, got {s.ensemble_size}"
            )
        if any(d <= 0 for d in s.delta_list):
            raise ConfigError(f"delta values must be positive, got {s.delta_list}")
        if self.solver.frames_per_fast_period < 1:
            raise ConfigError("frames_per_fast_period must be >= 1")
        if self.solver.steps_per_fast_period % self.solver.frames_per_fast_period != 0:
            raise ConfigError(
                "steps_per_fast_period must be a multiple of frames_per_fast_period"
            )
        if not (self.solver.dt_cap > 0):
            raise ConfigError("dt_cap must be positive")

    def to_mapping(self) -> dict[str, Any]:
        """Resolved config as plain nested dicts (defaults included)."""
        return {
            "grid": {
                "dim": self.grid.dim,
                "n_per_axis": self.grid.n_per_axis,
                "half_width": self.grid.half_width,
            },
            "potential": {
                "temporal": self.potential.temporal,
                "spatial": self.potential.spatial,
                "temporal_value": self.potential.temporal_value,
                "well_depth": self.potential.well_depth,
                "well_width": self.potential.well_width,
                "lattice_amplitude": self.potential.lattice_amplitude,
                "lattice_periods": self.potential.lattice_periods,
                "analytic_mean": self.potential.analytic_mean,
            },
            "initial_state": {
                "kind": self.initial_state.kind,
                "center": list(self.initial_state.center),
                "width": self.initial_state.width,
                "momentum": list(self.initial_state.momentum),
                "eps_perturbation": self.initial_state.eps_perturbation,
            },
            "solver": {
                "steps_per_fast_period": self.solver.steps_per_fast_period,
                "frames_per_fast_period": self.solver.frames_per_fast_period,
                "dt_cap": self.solver.dt_cap,
                "quad_order": self.solver.quad_order,
            },
            "sweep": {
                "horizon": self.sweep.horizon,
                "eps_list": list(self.sweep.eps_list),
                "delta_list": list(self.sweep.delta_list),
                "ensemble_size": self.sweep.ensemble_size,
                "seed": self.sweep.seed,
            },
            "measure": {"dictionary_size": self.measure.dictionary_size},
            "output": {"save_fields": self.output.save_fields},
        }

    def config_hash(self) -> str:
        canon = json.dumps(self.to_mapping(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    def with_seed(self, seed: int) -> "ExperimentConfig":
        sweep = SweepSpec(
            horizon=self.sweep.horizon,
            eps_list=self.sweep.eps_list,
            delta_list=self.sweep.delta_list,
            ensemble_size=self.sweep.ensemble_size,
            seed=seed,
        )
        return ExperimentConfig(
            grid=self.grid,
            potential=self.potential,
            initial_state=self.initial_state,
            solver=self.solver,
            sweep=sweep,
            measure=self.measure,
            output=self.output,
        )


_SECTION_TYPES = {
    "grid": GridSpec,
    "potential": PotentialSpec,
    "initial_state": InitialStateSpec,
    "solver": SolverSpec,
    "sweep": SweepSpec,
    "measure": MeasureSpec,
    "output": OutputSpec,
}

_LIST_KEYS = {"center", "momentum", "eps_list", "delta_list"}


def config_from_mapping(data: Mapping[str, Any]) -> ExperimentConfig:
    """Build a config from nested mappings; unknown keys are errors."""
    if not isinstance(data, Mapping):
        raise ConfigError("config root must be a mapping of sections")
    unknown = set(data) - set(_SECTION_TYPES)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    kwargs: dict[str, Any] = {}
    for name, cls in _SECTION_TYPES.items():
        section = data.get(name, {})
        if section is None:
            section = {}
        if not isinstance(section, Mapping):
            raise ConfigError(f"config section '{name}' must be a mapping")
        allowed = set(cls.__dataclass_fields__)
        bad = set(section) - allowed
        if bad:
            raise ConfigError(
                f"unknown keys in section '{name}': {sorted(bad)} (allowed: {sorted(allowed)})"
            )
        coerced = {
            k: tuple(v) if k in _LIST_KEYS and isinstance(v, (list, tuple)) else v
            for k, v in section.items()
        }
        kwargs[name] = cls(**coerced)
    return ExperimentConfig(**kwargs)


def load_config(path: str | Path) -> ExperimentConfig:
    """Load a YAML experiment config with strict key checking."""
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if data is None:
        data = {}
    return config_from_mapping(data)


def harmonic_benchmark_config(seed: int = 20240811) -> ExperimentConfig:
    """The canonical regression experiment: 1D harmonic trap with a full-swing
    cosine modulation, unit-width packet, T = 1."""
    return ExperimentConfig(sweep=SweepSpec(seed=seed))


# ---------------------------------------------------------------------------
# report types


@dataclass(frozen=True)
class SweepRow:
    eps: float
    h1_wave: float
    l1_rho: float
    l1_current: float
    b_eps_avg: float
    monokinetic_dev: float
    traj_dev: tuple[tuple[float, float], ...]  # (delta, fraction) pairs
    boundary_mass: float
    injectivity_ratio: float
    valid: bool
    reason: str
    wall_time: float

    def to_mapping(self) -> dict[str, Any]:
        return {
            "eps": self.eps,
            "h1_wave": self.h1_wave,
            "l1_rho": self.l1_rho,
            "l1_current": self.l1_current,
            "b_eps_avg": self.b_eps_avg,
            "monokinetic_dev": self.monokinetic_dev,
            "traj_dev": {_format_delta(d): v for d, v in self.traj_dev},
            "boundary_mass": self.boundary_mass,
            "injectivity_ratio": self.injectivity_ratio,
            "valid": self.valid,
            "reason": self.reason,
            "wall_time": self.wall_time,
        }


_RATIO_METRICS = ("h1_wave", "l1_rho", "l1_current", "b_eps_avg", "monokinetic_dev")


@dataclass(frozen=True)
class ConvergenceReport:
    rows: tuple[SweepRow, ...]
    metadata: dict[str, Any]

    @property
    def partial(self) -> bool:
        return any(not r.valid for r in self.rows)

    def ratios(self) -> dict[str, list[float]]:
        """Consecutive decay ratios value[i+1]/value[i] per metric."""
        out: dict[str, list[float]] = {}
        for metric in _RATIO_METRICS:
            vals = [getattr(r, metric) for r in self.rows]
            ratios = []
            for a, b in zip(vals, vals[1:]):
                ratios.append(b / a if a != 0.0 and math.isfinite(a) else math.nan)
            out[metric] = ratios
        return out

    def to_mapping(self) -> dict[str, Any]:
        return {
            "metadata": self.metadata,
            "partial": self.partial,
            "rows": [r.to_mapping() for r in self.rows],
            "ratios": self.ratios(),
        }


def _format_delta(delta: float) -> str:
    return f"{delta:g}"


# ---------------------------------------------------------------------------
# experiment construction


def build_grid(spec: GridSpec) -> Grid:
    return make_grid(spec.dim, spec.n_per_axis, spec.half_width)


def build_potential(spec: PotentialSpec, grid: Grid) -> TimePeriodicPotential:
    if spec.temporal not in TEMPORAL_BUILTINS:
        raise ConfigError(
            f"unknown temporal profile '{spec.temporal}' "
            f"(choices: {sorted(TEMPORAL_BUILTINS)})"
        )
    if spec.spatial not in SPATIAL_BUILTINS:
        raise ConfigError(
            f"unknown spatial profile '{spec.spatial}' (choices: {sorted(SPATIAL_BUILTINS)})"
        )
    temporal = (
        constant_profile(spec.temporal_value)
        if spec.temporal == "constant"
        else TEMPORAL_BUILTINS[spec.temporal]()
    )
    if spec.spatial == "gaussian_well":
        spatial = gaussian_well(spec.well_depth, spec.well_width)
    elif spec.spatial == "cosine_lattice":
        spatial = cosine_lattice(spec.lattice_amplitude, spec.lattice_periods, grid.half_width)
    else:
        spatial = SPATIAL_BUILTINS[spec.spatial]()
    return TimePeriodicPotential(temporal, spatial, analytic_mean=spec.analytic_mean)


def build_initial_state(spec: InitialStateSpec, grid: Grid, eps: float | None = None) -> WaveFunction:
    if spec.kind != "gaussian":
        raise ConfigError(f"config-driven initial states support kind 'gaussian', got '{spec.kind}'")
    psi = gaussian_packet(grid, center=spec.center, width=spec.width, momentum=spec.momentum)
    if spec.eps_perturbation and eps is not None:
        # fixed smooth bump times a unit-wavenumber phase, scaled by eps
        mesh = grid.meshgrid()
        r2 = sum(m * m for m in mesh)
        phase = sum(mesh)
        chi = np.exp(-r2 / 4.0) * np.exp(1j * phase)
        values = psi.values + eps * chi
        mass = float(np.sum(np.abs(values) ** 2) * grid.cell_volume)
        psi = WaveFunction(ComplexField(grid, values / math.sqrt(mass)), time=0.0)
    return psi


def _derived_seeds(seed: int) -> tuple[np.random.SeedSequence, np.random.SeedSequence]:
    sampling, dictionary = np.random.SeedSequence(seed).spawn(2)
    return sampling, dictionary


def _step_plan(cfg: ExperimentConfig, eps: float) -> tuple[int, float, int]:
    """(n_steps, dt, frame_stride) with dt respecting the fast-period rule,
    dt dividing the horizon, and frame count divisible by four so the
    trajectory mesh nests into the frame mesh."""
    sol = cfg.solver
    dt_max = min(eps / sol.steps_per_fast_period, sol.dt_cap)
    stride = sol.steps_per_fast_period // sol.frames_per_fast_period
    block = 4 * stride
    T = cfg.sweep.horizon
    n_steps = block * max(1, math.ceil(T / dt_max / block))
    return n_steps, T / n_steps, stride


# ---------------------------------------------------------------------------
# run drivers


def run_single(config: ExperimentConfig, eps: float) -> SweepRow:
    """One epsilon row: paired propagation, metrics and trajectory statistics.

    Monitor aborts (boundary mass, H1 blow-up, trajectory escapes) mark the
    row invalid with a reason instead of raising.
    """
    t_start = time.perf_counter()
    try:
        metrics = _run_single_metrics(config, eps)
        metrics.pop("_final_states", None)
        return SweepRow(
            eps=eps,
            valid=True,
            reason="",
            wall_time=time.perf_counter() - t_start,
            **metrics,
        )
    except MonitorAbort as exc:
        nan = float("nan")
        return SweepRow(
            eps=eps,
            h1_wave=nan,
            l1_rho=nan,
            l1_current=nan,
            b_eps_avg=nan,
            monokinetic_dev=nan,
            traj_dev=tuple((d, nan) for d in config.sweep.delta_list),
            boundary_mass=nan,
            injectivity_ratio=nan,
            valid=False,
            reason=f"{type(exc).__name__}: {exc}",
            wall_time=time.perf_counter() - t_start,
        )


def _run_single_metrics(config: ExperimentConfig, eps: float) -> dict[str, Any]:
    grid = build_grid(config.grid)
    V = build_potential(config.potential, grid)
    Vstar = effective_potential(V, grid, config.solver.quad_order)
    psi0 = build_initial_state(config.initial_state, grid, eps=eps)
    T = config.sweep.horizon

    n_steps, dt, stride = _step_plan(config, eps)
    solver_cfg = SolverConfig(dt=dt, steps_per_fast_period=config.solver.steps_per_fast_period)
    solver_cfg.check_fast_period(eps)

    stepper_osc = StrangStepper(OscillatingSystem(V, eps), grid, dt)
    stepper_eff = StrangStepper(EffectiveSystem(Vstar), grid, dt)

    n_frames = n_steps // stride
    frame_times = np.empty(n_frames + 1)
    u_osc = np.empty((n_frames + 1, grid.dim) + grid.shape)
    u_eff = np.empty((n_frames + 1, grid.dim) + grid.shape)

    h1_limit = BLOWUP_FACTOR * norms(psi0.field).h1
    b_horizon = min(1.0, T) * (1.0 + 1e-12)
    boundary_max = 0.0
    b_vals: list[float] = []
    dens_osc = dens_eff = None

    vals_osc = psi0.values
    vals_eff = psi0.values

    def record(frame: int, t: float) -> None:
        nonlocal boundary_max, dens_osc, dens_eff
        wf_o = WaveFunction(ComplexField(grid, vals_osc), t)
        wf_e = WaveFunction(ComplexField(grid, vals_eff), t)
        for wf in (wf_o, wf_e):
            bmass = boundary_mass_fraction(wf.field)
            boundary_max = max(boundary_max, bmass)
            if bmass > 1e-8:
                raise BoundaryMassExceeded(f"boundary mass {bmass:.3e} above 1e-8 at t={t}")
            if norms(wf.field).h1 > h1_limit:
                raise WaveBlowUp(f"H1 norm above {BLOWUP_FACTOR}x initial at t={t}")
        d_o = densities(wf_o)
        d_e = densities(wf_e)
        frame_times[frame] = t
        u_osc[frame] = d_o.velocity
        u_eff[frame] = d_e.velocity
        if t <= b_horizon:
            b_vals.append(gronwall_integrand(wf_o, wf_e, V, Vstar, eps, t))
        if frame == n_frames:
            dens_osc, dens_eff = d_o, d_e

    record(0, 0.0)
    for step in range(n_steps):
        t = step * dt
        vals_osc = stepper_osc.advance(vals_osc, t)
        vals_eff = stepper_eff.advance(vals_eff, t)
        if (step + 1) % stride == 0:
            record((step + 1) // stride, (step + 1) * dt)

    wf_osc = WaveFunction(ComplexField(grid, vals_osc), T)
    wf_eff = WaveFunction(ComplexField(grid, vals_eff), T)
    h1_wave = h1_distance(wf_osc, wf_eff)
    dv = grid.cell_volume
    l1_rho = float(np.sum(np.abs(dens_osc.rho - dens_eff.rho)) * dv)
    j_diff = dens_osc.current - dens_eff.current
    l1_current = float(np.sum(np.sqrt(np.sum(j_diff * j_diff, axis=0))) * dv)

    sampling_seed, dictionary_seed = _derived_seeds(config.sweep.seed)
    beta_eps = bohmian_measure(dens_osc)
    mono_dev = monokinetic_deviation(
        beta_eps, dens_eff, dictionary_size=config.measure.dictionary_size, seed=dictionary_seed
    )

    x0 = sample_initial_positions(
        np.abs(psi0.values) ** 2, grid, config.sweep.ensemble_size, sampling_seed
    )
    hist_osc = FieldHistory(grid, frame_times, u_osc)
    hist_eff = FieldHistory(grid, frame_times, u_eff)
    out_times = frame_times[::4]
    ens_osc = integrate_trajectories(hist_osc, x0, out_times)
    ens_eff = integrate_trajectories(hist_eff, x0, out_times)

    traj_dev = tuple(
        (d, trajectory_deviation_measure(ens_osc, ens_eff, d))
        for d in config.sweep.delta_list
    )
    inj = min(
        flow_injectivity_monitor(ens_osc).min_pair_separation_ratio,
        flow_injectivity_monitor(ens_eff).min_pair_separation_ratio,
    )

    return {
        "h1_wave": h1_wave,
        "l1_rho": l1_rho,
        "l1_current": l1_current,
        "b_eps_avg": float(np.mean(b_vals)),
        "monokinetic_dev": mono_dev,
        "traj_dev": traj_dev,
        "boundary_mass": boundary_max,
        "injectivity_ratio": inj,
        "_final_states": (wf_osc, wf_eff),
    }


def run_sweep(
    config: ExperimentConfig,
    threads: int | None = None,
    out_dir: str | Path | None = None,
) -> ConvergenceReport:
    """Run every epsilon row (concurrently) and assemble the report.

    When ``out_dir`` is given, report.csv and report.json are written there,
    plus final-state field snapshots when the config asks for them.
    """
    eps_list = config.sweep.eps_list
    workers = threads if threads and threads > 0 else (os.cpu_count() or 1)
    workers = min(workers, len(eps_list))

    def worker(eps: float) -> SweepRow:
        return run_single(config, eps)

    if workers == 1:
        rows = [worker(e) for e in eps_list]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(worker, eps_list))

    metadata = {
        "config_hash": config.config_hash(),
        "code_version": __version__,
        "config": config.to_mapping(),
        "dt_per_eps": {
            _format_delta(e): _step_plan(config, e)[1] for e in eps_list
        },
    }
    report = ConvergenceReport(rows=tuple(rows), metadata=metadata)

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        emit_csv(report, out / "report.csv")
        emit_json(report, out / "report.json")
        if config.output.save_fields:
            _save_final_fields(config, out)
    return report


def _save_final_fields(config: ExperimentConfig, out: Path) -> None:
    # re-propagates per row; snapshots are an opt-in extra, runs are cheap
    for i, eps in enumerate(config.sweep.eps_list):
        metrics = _run_single_metrics(config, eps)
        wf_osc, wf_eff = metrics["_final_states"]
        save_field(out / f"psi_eps{i}_oscillating.field", wf_osc)
        save_field(out / f"psi_eps{i}_effective.field", wf_eff)


# ---------------------------------------------------------------------------
# emitters (17 significant digits everywhere)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def emit_csv(report: ConvergenceReport, path: str | Path) -> None:
    deltas = report.rows[0].traj_dev if report.rows else ()
    header = ["eps", "h1_wave", "l1_rho", "l1_current", "b_eps_avg", "monokinetic_dev"]
    header += [f"traj_dev_delta_{_format_delta(d)}" for d, _ in deltas]
    header += ["boundary_mass", "injectivity_ratio", "valid", "reason"]
    lines = [",".join(header)]
    for r in report.rows:
        cells = [
            _fmt(r.eps),
            _fmt(r.h1_wave),
            _fmt(r.l1_rho),
            _fmt(r.l1_current),
            _fmt(r.b_eps_avg),
            _fmt(r.monokinetic_dev),
        ]
        cells += [_fmt(v) for _, v in r.traj_dev]
        cells += [_fmt(r.boundary_mass), _fmt(r.injectivity_ratio)]
        cells += ["true" if r.valid else "false", r.reason.replace(",", ";")]
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def emit_json(report: ConvergenceReport, path: str | Path) -> None:
    Path(path).write_text(_json_text(report.to_mapping()) + "\n", encoding="utf-8")


def _json_text(obj: Any, indent: int = 0) -> str:
    """JSON writer with floats at 17 significant digits (round-trip exact)."""
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if isinstance(obj, Mapping):
        if not obj:
            return "{}"
        items = [
            f"{inner}{json.dumps(str(k))}: {_json_text(v, indent + 1)}" for k, v in obj.items()
        ]
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{inner}{_json_text(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + f"\n{pad}]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "NaN"
        if math.isinf(x):
            return "Infinity" if x > 0 else "-Infinity"
        return _fmt(x)
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    raise UsageError(f"cannot serialize {type(obj).__name__} to report JSON")
