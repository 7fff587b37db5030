"""Scenario configs, end-to-end runs and report serialization."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .catalog import FreePacket, Gaussian, HOCoherent, HOGround
from .core import (
    DensityField,
    Grid,
    GridError,
    PhysicalConstants,
    QpFisherError,
    ScalarField,
    WaveFunction,
    amplitude_from_density,
    boundary_ratio,
    integrate,
    make_grid,
    normalize_density,
    warn_if_boundary_heavy,
)
from .diffops import StencilScheme, log_density_score
from .evolution import Trajectory, evolve, free_potential, harmonic_potential
from .identities import (
    TIME_DEPENDENT,
    ConvergenceTable,
    IdentityReport,
    RelationId,
    convergence_study,
    run_relation,
)
from .quantities import (
    fisher_information,
    heat_from_density,
    mean_quantum_potential,
    momentum_fluctuation,
    osmotic_velocity,
    quantum_potential_paper,
    quantum_potential_standard,
    total_energy_density,
)

__all__ = [
    "ConfigError",
    "ReportIOError",
    "CONFIG_SCHEMA",
    "CSV_COLUMNS",
    "ScenarioConfig",
    "RunReport",
    "parse_config",
    "load_config",
    "run_scenario",
    "run_convergence",
    "emit_report",
    "emit_convergence",
    "dump_fields",
]

CSV_COLUMNS = (
    "scenario_id",
    "relation",
    "lhs",
    "rhs",
    "residual_sup",
    "residual_l2",
    "excluded_mass",
    "classification",
)
STATIC_FRAME_DT = 1e-3


class ConfigError(QpFisherError, ValueError):
    pass


class ReportIOError(QpFisherError, OSError):
    pass


_positive = {"type": "number", "exclusiveMinimum": 0}
_pair = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}


def _density_kind(kind: str, props: dict, required: list[str]) -> dict:
    return {
        "type": "object",
        "properties": {"kind": {"const": kind}, "t": {"type": "number"}, **props},
        "required": ["kind", *required],
        "additionalProperties": False,
    }


CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "qpfisher scenario",
    "type": "object",
    "properties": {
        "scenario_id": {"type": "string", "minLength": 1},
        "constants": {
            "type": "object",
            "properties": {k: _positive for k in ("hbar", "mass", "omega", "kT")},
            "additionalProperties": False,
        },
        "grid": {
            "type": "object",
            "properties": {
                "dim": {"enum": [1, 2, 3]},
                "bounds": {"oneOf": [_pair, {"type": "array", "items": _pair, "minItems": 1, "maxItems": 3}]},
                "n": {"oneOf": [
                    {"type": "integer", "minimum": 8},
                    {"type": "array", "items": {"type": "integer", "minimum": 8}, "minItems": 1, "maxItems": 3},
                ]},
            },
            "required": ["bounds", "n"],
            "additionalProperties": False,
        },
        "density": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["gaussian", "ho_ground", "ho_coherent", "free_packet", "from_file"]}
            },
            "oneOf": [
                _density_kind("gaussian", {"sigma": _positive, "x0": {"type": "number"}}, []),
                _density_kind("ho_ground", {}, []),
                _density_kind("ho_coherent", {"x0": {"type": "number"}}, []),
                _density_kind(
                    "free_packet",
                    {"sigma0": _positive, "x0": {"type": "number"}, "p0": {"type": "number"}},
                    [],
                ),
                _density_kind("from_file", {"path": {"type": "string"}}, ["path"]),
            ],
        },
        "evolution": {
            "type": "object",
            "properties": {
                "dt": _positive,
                "steps": {"type": "integer", "minimum": 2},
                "snap_stride": {"type": "integer", "minimum": 1},
                "potential": {"enum": ["auto", "free", "harmonic"]},
            },
            "required": ["dt", "steps", "snap_stride"],
            "additionalProperties": False,
        },
        "checks": {"type": "array", "items": {"enum": [r.value for r in RelationId]}, "uniqueItems": True},
        "numerics": {
            "type": "object",
            "properties": {
                "stencil_order": {"enum": [2, 4]},
                "floor_rel": {"type": "number", "exclusiveMinimum": 0, "maximum": 1e-3},
                "quadrature": {"enum": ["trapezoid", "simpson"]},
                "gauge": {"enum": ["zero_c", "min_zero"]},
            },
            "additionalProperties": False,
        },
    },
    "required": ["grid", "density"],
    "additionalProperties": False,
}


@dataclass(frozen=True)
class FromFile:
    """Density samples read from ``.npy`` or a text table (last column used)."""

    path: str
    kind = "from_file"
    stationary = False

    def density(self, grid: Grid, consts, t=0.0, quadrature="trapezoid") -> DensityField:
        p = Path(self.path)
        try:
            raw = np.load(p) if p.suffix == ".npy" else np.loadtxt(p, delimiter=_delimiter(p), ndmin=2)[:, -1]
        except OSError as e:
            raise ReportIOError(f"cannot read density file {p}: {e}") from e
        except ValueError as e:
            raise ConfigError(f"density file {p} is not numeric: {e}") from e
        if raw.size != int(np.prod(grid.shape)):
            raise ConfigError(f"density file {p} has {raw.size} values, grid needs {np.prod(grid.shape)}")
        return normalize_density(ScalarField(grid, np.reshape(raw, grid.shape)), quadrature)

    def wavefunction(self, grid, consts) -> WaveFunction:
        return WaveFunction.normalized(grid, np.sqrt(self.density(grid, consts).values))

    def potential(self, grid, consts):
        return free_potential(grid)


def _delimiter(p: Path):
    with open(p, encoding="utf-8") as fh:
        for line in fh:
            if line.strip() and not line.lstrip().startswith("#"):
                return "," if "," in line else None
    return None


@dataclass(frozen=True)
class EvolutionConfig:
    dt: float
    steps: int
    snap_stride: int
    potential: str = "auto"


@dataclass(frozen=True)
class Numerics:
    stencil_order: int = 2
    floor_rel: float = 1e-12
    quadrature: str = "trapezoid"
    gauge: str = "zero_c"

    @property
    def scheme(self) -> StencilScheme:
        return StencilScheme(self.stencil_order)


@dataclass(frozen=True)
class ScenarioConfig:
    scenario_id: str
    constants: PhysicalConstants
    grid: Grid
    density: object
    t: float
    evolution: EvolutionConfig | None
    checks: tuple[RelationId, ...]
    numerics: Numerics
    echo: dict = field(default_factory=dict, compare=False)


def parse_config(text: str, base_dir: str | os.PathLike | None = None) -> ScenarioConfig:
    """Validate a JSON scenario and fill in defaults.

    Relative ``from_file`` paths resolve against ``base_dir``.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from e
    _validate(raw)

    c = raw.get("constants", {})
    try:
        consts = PhysicalConstants(c.get("hbar", 1.0), c.get("mass", 1.0), c.get("omega", 1.0), c.get("kT"))
    except ValueError as e:
        raise ConfigError(str(e)) from e

    g = raw["grid"]
    bounds = g["bounds"]
    dim = g.get("dim", len(bounds) if bounds and isinstance(bounds[0], list) else 1)
    try:
        grid = make_grid(dim, bounds, g["n"])
    except GridError as e:
        raise ConfigError(f"grid: {e}") from e

    d = raw["density"]
    kind = d["kind"]
    if kind == "gaussian":
        spec = Gaussian(d.get("sigma", 1.0), d.get("x0", 0.0))
    elif kind == "ho_ground":
        spec = HOGround()
    elif kind == "ho_coherent":
        spec = HOCoherent(d.get("x0", 1.0))
    elif kind == "free_packet":
        spec = FreePacket(d.get("sigma0", 1.0), d.get("x0", 0.0), d.get("p0", 0.0))
    else:
        path = Path(d["path"])
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        spec = FromFile(str(path))

    ev = raw.get("evolution")
    evolution = EvolutionConfig(ev["dt"], ev["steps"], ev["snap_stride"], ev.get("potential", "auto")) if ev else None
    if evolution is not None:
        if grid.dim != 1:
            raise ConfigError("evolution is only available on 1D grids")
        if evolution.steps < 2 * evolution.snap_stride:
            raise ConfigError("evolution.steps must be at least 2 * evolution.snap_stride")

    checks = tuple(RelationId(r) for r in raw.get("checks", []))
    needs_time = [r.value for r in checks if r in TIME_DEPENDENT]
    if needs_time and evolution is None and not spec.stationary:
        raise ConfigError(
            f"checks {needs_time} need a time derivative; density kind {kind!r} is not "
            "stationary, so an 'evolution' block is required"
        )

    nm = raw.get("numerics", {})
    numerics = Numerics(
        nm.get("stencil_order", 2), nm.get("floor_rel", 1e-12), nm.get("quadrature", "trapezoid"),
        nm.get("gauge", "zero_c"),
    )
    if numerics.quadrature == "simpson" and any(n % 2 == 0 for n in grid.n):
        raise ConfigError("simpson quadrature needs an odd number of points per dimension")

    echo = {
        "scenario_id": raw.get("scenario_id", "scenario"),
        "constants": consts.as_dict(),
        "grid": grid.describe(),
        "density": dict(d),
        "evolution": None if evolution is None else vars(evolution).copy(),
        "checks": [r.value for r in checks],
        "numerics": vars(numerics).copy(),
    }
    return ScenarioConfig(
        echo["scenario_id"], consts, grid, spec, float(d.get("t", 0.0)), evolution, checks,
        numerics, echo,
    )


def _validate(raw) -> None:
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if not errors:
        return
    msgs = []
    for e in errors:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        if e.validator == "oneOf" and e.context:
            # report the branch matching the declared kind, not every branch
            ctx = [c for c in e.context if c.validator in ("additionalProperties", "required", "exclusiveMinimum", "type")]
            if ctx:
                msgs.extend(f"{where}: {c.message}" for c in ctx[:3])
            else:
                msgs.append(f"{where}: {e.message}")
        else:
            msgs.append(f"{where}: {e.message}")
    raise ConfigError("invalid config: " + "; ".join(dict.fromkeys(msgs)))


def load_config(path: str | os.PathLike) -> ScenarioConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as e:
        raise ReportIOError(f"cannot read config {p}: {e}") from e
    return parse_config(text, base_dir=p.parent)


@dataclass(frozen=True, eq=False)
class RunReport:
    scenario: dict
    checks: tuple[IdentityReport, ...]
    quantities: dict
    provenance: dict
    trajectory: dict | None = None
    fields: dict = field(default_factory=dict)

    @property
    def scenario_id(self) -> str:
        return self.scenario["scenario_id"]

    def as_dict(self) -> dict:
        out = {
            "scenario": self.scenario,
            "checks": [c.as_dict() for c in self.checks],
            "quantities": self.quantities,
            "provenance": self.provenance,
        }
        if self.trajectory is not None:
            out["trajectory"] = self.trajectory
        return out


def _potential(cfg: ScenarioConfig):
    choice = cfg.evolution.potential
    if choice == "free":
        return free_potential(cfg.grid)
    if choice == "harmonic":
        return harmonic_potential(cfg.grid, cfg.constants)
    return cfg.density.potential(cfg.grid, cfg.constants)


def _field_profiles(P: DensityField, cfg: ScenarioConfig) -> dict:
    nm, c = cfg.numerics, cfg.constants
    s = log_density_score(P, nm.floor_rel, nm.scheme)
    u = osmotic_velocity(P, c, nm.floor_rel, nm.scheme)
    dp = momentum_fluctuation(P, c, nm.floor_rel, nm.scheme)
    out = {"P": P.values, "mask": s.support_mask.astype(float)}
    for k in range(P.grid.dim):
        out[f"score_{k}"] = s.score.components[k]
        out[f"u_{k}"] = u.components[k]
        out[f"dp_{k}"] = dp.components[k]
    out["Q_paper"] = quantum_potential_paper(P, c, nm.floor_rel, nm.scheme).values
    out["Q_standard"] = quantum_potential_standard(amplitude_from_density(P), c, nm.floor_rel, nm.scheme).values
    out["E_tot"] = total_energy_density(P, c, nm.floor_rel, nm.scheme).values
    out["heat"] = heat_from_density(P, c, nm.gauge, nm.floor_rel).Q_heat.values
    return out


def _quantities(P: DensityField, cfg: ScenarioConfig) -> dict:
    nm, c = cfg.numerics, cfg.constants
    F = fisher_information(P, nm.floor_rel, nm.scheme)
    q = quantum_potential_paper(P, c, nm.floor_rel, nm.scheme)
    e = total_energy_density(P, c, nm.floor_rel, nm.scheme)
    return {
        "fisher": F.value,
        "excluded_mass": F.excluded_mass,
        "mean_qp_paper": mean_quantum_potential(P, q),
        "mean_total_energy": integrate(ScalarField(P.grid, P.values * e.values), P.quadrature),
        "norm": integrate(P, P.quadrature),
        "boundary_ratio": boundary_ratio(P),
    }


def run_scenario(cfg: ScenarioConfig, mode: str | None = None) -> RunReport:
    """Build the density (or trajectory), run every requested check and
    collect scalar quantities.

    ``mode`` is ``"static"`` or ``"evolve"``; by default a config with an
    evolution block is evolved.
    """
    mode = mode or ("evolve" if cfg.evolution is not None else "static")
    nm, c = cfg.numerics, cfg.constants
    try:
        trajectory = None
        if mode == "evolve":
            if cfg.evolution is None:
                raise ConfigError("the evolve command needs an 'evolution' block")
            ev = cfg.evolution
            psi0 = cfg.density.wavefunction(cfg.grid, c)
            traj = evolve(psi0, _potential(cfg), ev.dt, ev.steps, ev.snap_stride, c)
            k = len(traj) - 2
            frames = traj.triple(k, nm.quadrature)
            dt, t_eval = traj.dt_snap, float(traj.times[k])
            trajectory = _trajectory_block(traj, cfg)
        elif mode == "static":
            needs_time = [r.value for r in cfg.checks if r in TIME_DEPENDENT]
            if needs_time and not cfg.density.stationary:
                raise ConfigError(
                    f"checks {needs_time} need a time derivative and {cfg.density.kind!r} is "
                    "not stationary; use the evolve command"
                )
            P = cfg.density.density(cfg.grid, c, cfg.t, nm.quadrature)
            frames = (P, P, P)
            dt = cfg.evolution.dt * cfg.evolution.snap_stride if cfg.evolution else STATIC_FRAME_DT
            t_eval = cfg.t
        else:
            raise ValueError(f"unknown mode {mode!r}")
        P = frames[1]
        if isinstance(cfg.density, FromFile):
            warn_if_boundary_heavy(P)
        reports = tuple(
            run_relation(r, frames, dt, c, nm.gauge, nm.floor_rel, nm.scheme) for r in cfg.checks
        )
        quantities = _quantities(P, cfg)
        fields = _field_profiles(P, cfg)
    except QpFisherError as e:
        raise type(e)(f"scenario {cfg.scenario_id!r}: {e}") from e

    provenance = {
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "mode": mode,
        "t_eval": t_eval,
        "frame_dt": dt,
        "grid": cfg.grid.describe(),
        "tolerances": {"floor_rel": nm.floor_rel, "stencil_order": nm.stencil_order,
                       "quadrature": nm.quadrature, "norm_tol": 1e-9},
    }
    return RunReport(cfg.echo, reports, quantities, provenance, trajectory, fields)


def _trajectory_block(traj: Trajectory, cfg: ScenarioConfig) -> dict:
    nm = cfg.numerics
    fisher = [fisher_information(traj.density(k, nm.quadrature), nm.floor_rel, nm.scheme).value
              for k in range(len(traj))]
    return {
        "times": [float(t) for t in traj.times],
        "norm_error": [float(abs(n - 1.0)) for n in traj.norms()],
        "fisher": fisher,
    }


def _grid_ladder(grid: Grid, k: int) -> list[Grid]:
    """k nested grids, halving the spacing each time."""
    return [Grid(grid.bounds, tuple((n - 1) * 2**j + 1 for n in grid.n)) for j in range(k)]


def run_convergence(cfg: ScenarioConfig, refinements: int) -> list[ConvergenceTable]:
    """Grid-refinement study for every requested relation (analytic frames)."""
    if refinements < 3:
        raise ConfigError("--refinements must be at least 3")
    relations = cfg.checks or tuple(r for r in RelationId if r not in TIME_DEPENDENT)
    nm, c = cfg.numerics, cfg.constants
    dt = cfg.evolution.dt * cfg.evolution.snap_stride if cfg.evolution else STATIC_FRAME_DT
    grids = _grid_ladder(cfg.grid, refinements)
    time_ok = cfg.density.kind in ("ho_ground", "ho_coherent", "free_packet")
    tables = []
    try:
        for r in relations:
            if r in TIME_DEPENDENT and not time_ok:
                raise ConfigError(f"{r.value} convergence needs an analytic time-dependent density")
            tables.append(convergence_study(
                r, lambda g, t: cfg.density.density(g, c, t, nm.quadrature), grids,
                consts=c, t=cfg.t, dt=dt, gauge=nm.gauge, floor_rel=nm.floor_rel, scheme=nm.scheme,
            ))
    except QpFisherError as e:
        raise type(e)(f"scenario {cfg.scenario_id!r}: {e}") from e
    return tables


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def report_json(report: RunReport) -> str:
    return json.dumps(_json_safe(report.as_dict()), indent=2, ensure_ascii=False) + "\n"


def report_csv(report: RunReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for c in report.checks:
        d = c.as_dict()
        w.writerow([report.scenario_id] + [_fmt(d[k]) for k in CSV_COLUMNS[1:]])
    return buf.getvalue()


def _write(text: str, path) -> None:
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as e:
        raise ReportIOError(f"cannot write {path}: {e.strerror or e}") from e


def emit_report(report: RunReport, format: str = "json", path=None) -> None:
    """Write the report as nested JSON or as one CSV row per check."""
    if format == "json":
        _write(report_json(report), path)
    elif format == "csv":
        _write(report_csv(report), path)
    else:
        raise ValueError(f"format must be 'json' or 'csv', got {format!r}")


def emit_convergence(tables: list[ConvergenceTable], scenario_id: str, format: str = "json", path=None) -> None:
    if format == "json":
        body = {"scenario_id": scenario_id, "studies": [t.as_dict() for t in tables]}
        _write(json.dumps(_json_safe(body), indent=2) + "\n", path)
        return
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("scenario_id", "relation", "n", "h", "residual", "fitted_order"))
    for t in tables:
        for n, h, r in zip(t.points, t.steps, t.residuals):
            w.writerow((scenario_id, t.relation.value, n, _fmt(h), _fmt(r), _fmt(t.order)))
    _write(buf.getvalue(), path)


def dump_fields(report: RunReport, grid: Grid, path) -> None:
    """CSV of field profiles: one row per grid point, coordinates first."""
    coords = [X.ravel() for X in grid.mesh()]
    names = [f"x_{k}" for k in range(grid.dim)] + list(report.fields)
    cols = coords + [np.asarray(v).ravel() for v in report.fields.values()]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names)
    for row in zip(*cols):
        w.writerow([repr(float(v)) for v in row])
    _write(buf.getvalue(), path)
