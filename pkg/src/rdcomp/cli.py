"""Command-line front end: config files, experiment runs, output writers.

Config files are INI-style with one section per species; see the schema in
the README.  Subcommands:

    rdcomp simulate <config>   run, write the time-series CSV and snapshots
    rdcomp converge <config> --axis spatial|temporal   rate table
    rdcomp check-dt <config>   print the stability diagnostics only
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import model, schemes, verify
from .expr import ParseError, parse
from .mesh import Mesh
from .model import SpeciesParams, SystemSpec

DEFAULT_LEVELS = {"spatial": [4, 8, 16, 32, 64], "temporal": [4, 8, 16, 32, 64, 128]}


class ConfigError(Exception):
    """Bad configuration file; message names the offending section/field."""


@dataclass
class StudyConfig:
    """Fixed-axis values for one convergence study."""

    T: float
    levels: list
    steps: int = None  # spatial study: dt = T / steps
    nx: int = None  # temporal study: fixed mesh


@dataclass
class RunConfig:
    """Validated configuration: the system plus output controls."""

    spec: SystemSpec
    csv_name: str = "timeseries.csv"
    snapshot_times: list = field(default_factory=list)
    snapshot_prefix: str = "fields"
    verification: bool = False
    mms_exacts: list = None
    constant_C: float = model.DEFAULT_C
    spatial_study: StudyConfig = None
    temporal_study: StudyConfig = None


_SECTION_KEYS = {
    "domain": {"x0", "x1", "y0", "y1", "nx", "ny", "degree"},
    "time": {"T", "dt", "scheme"},
    "environment": {"K", "bc"},
    "species": {"d", "mu", "r", "f", "u0", "boundary"},
    "mms": None,  # exact.N keys, validated separately
    "output": {"csv", "snapshots", "snapshot_prefix", "verification"},
    "model": {"C"},
    "spatial_study": {"T", "steps", "levels"},
    "temporal_study": {"T", "nx", "levels"},
}


def _get(section, key, cast, default=None, required=False):
    name = f"[{section.name}] {key}"
    if key not in section:
        if required:
            raise ConfigError(f"missing required field {name}")
        return default
    raw = section[key].strip()
    try:
        if cast is bool:
            if raw.lower() in ("true", "yes", "1", "on"):
                return True
            if raw.lower() in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        return cast(raw)
    except ValueError as err:
        raise ConfigError(f"cannot parse {name} = {raw!r}: {err}") from err


def _get_expr(section, key, default=None, required=False):
    source = _get(section, key, str, default=None, required=required)
    if source is None:
        return default
    try:
        return parse(source)
    except ParseError as err:
        raise ConfigError(f"bad expression in [{section.name}] {key}: {err}") from err


def _int_list(raw):
    return [int(tok) for tok in raw.split(",") if tok.strip()]


def _float_list(raw):
    return [float(tok) for tok in raw.split(",") if tok.strip()]


def load_config(path) -> RunConfig:
    """Parse and validate a config file; unknown sections or keys reject."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    cp = configparser.ConfigParser(interpolation=None, strict=True)
    cp.optionxform = str
    try:
        with open(path) as handle:
            cp.read_file(handle, source=path)
    except configparser.Error as err:
        raise ConfigError(f"config parse error: {err}") from err

    species_ids = []
    for name in cp.sections():
        base = name.split(".")[0] if name.startswith("species.") else name
        if base not in _SECTION_KEYS:
            raise ConfigError(f"unknown section [{name}]")
        if name.startswith("species."):
            try:
                species_ids.append(int(name.split(".", 1)[1]))
            except ValueError:
                raise ConfigError(f"species sections are [species.1], [species.2], ...; got [{name}]")
        allowed = _SECTION_KEYS[base]
        if allowed is not None:
            for key in cp[name]:
                if key not in allowed:
                    raise ConfigError(f"unknown key {key!r} in section [{name}]")

    if not species_ids:
        raise ConfigError("at least one [species.N] section is required")
    if sorted(species_ids) != list(range(1, len(species_ids) + 1)):
        raise ConfigError(f"species sections must be numbered 1..N, got {sorted(species_ids)}")

    for required in ("domain", "time", "environment"):
        if required not in cp:
            raise ConfigError(f"missing required section [{required}]")

    dom = cp["domain"]
    x0 = _get(dom, "x0", float, 0.0)
    x1 = _get(dom, "x1", float, 1.0)
    y0 = _get(dom, "y0", float, 0.0)
    y1 = _get(dom, "y1", float, 1.0)
    nx = _get(dom, "nx", int, required=True)
    ny = _get(dom, "ny", int, nx)
    degree = _get(dom, "degree", int, 2)

    tim = cp["time"]
    T = _get(tim, "T", float, required=True)
    dt = _get(tim, "dt", float, required=True)
    scheme = _get(tim, "scheme", str, "dbdf2").lower()

    env = cp["environment"]
    K = _get_expr(env, "K", required=True)
    bc = _get(env, "bc", str, "no_flux").lower()

    mms_exacts = None
    if "mms" in cp:
        sec = cp["mms"]
        mms_exacts = []
        expected = {f"exact.{i}" for i in range(1, len(species_ids) + 1)}
        for key in sec:
            if key not in expected:
                raise ConfigError(f"unknown key {key!r} in section [mms]")
        for i in range(1, len(species_ids) + 1):
            key = f"exact.{i}"
            if key not in sec:
                raise ConfigError(f"missing [mms] {key} (one exact solution per species)")
            mms_exacts.append(_get_expr(sec, key, required=True))

    species = []
    for i in range(1, len(species_ids) + 1):
        sec = cp[f"species.{i}"]
        d = _get(sec, "d", float, required=True)
        mu = _get(sec, "mu", float, required=True)
        r = _get_expr(sec, "r", required=True)
        if mms_exacts is not None:
            for banned in ("f", "u0", "boundary"):
                if banned in sec:
                    raise ConfigError(
                        f"[species.{i}] {banned} conflicts with [mms]; it is derived from the exact solution"
                    )
            exact = mms_exacts[i - 1]
            # forcing is filled in below once every species is known
            species.append(SpeciesParams(d=d, mu=mu, r=r, f=None, u0=exact,
                                         boundary=exact if bc == "dirichlet" else None))
        else:
            species.append(SpeciesParams(
                d=d, mu=mu, r=r,
                f=_get_expr(sec, "f"),
                u0=_get_expr(sec, "u0", required=True),
                boundary=_get_expr(sec, "boundary"),
            ))
    if mms_exacts is not None:
        for i, sp in enumerate(species):
            sp.f = verify.mms_forcing(mms_exacts, sp, K, i)

    try:
        spec = SystemSpec(species=species, K=K, T=T, dt=dt, bc=bc, scheme=scheme,
                          domain=(x0, x1, y0, y1), nx=nx, ny=ny, degree=degree)
    except model.ModelError as err:
        raise ConfigError(str(err)) from err

    cfg = RunConfig(spec=spec, mms_exacts=mms_exacts)
    if "output" in cp:
        out = cp["output"]
        cfg.csv_name = _get(out, "csv", str, cfg.csv_name)
        raw = _get(out, "snapshots", str, "")
        cfg.snapshot_times = _float_list(raw) if raw else []
        cfg.snapshot_prefix = _get(out, "snapshot_prefix", str, cfg.snapshot_prefix)
        cfg.verification = _get(out, "verification", bool, False)
    if "model" in cp:
        cfg.constant_C = _get(cp["model"], "C", float, model.DEFAULT_C)
    if "spatial_study" in cp:
        sec = cp["spatial_study"]
        cfg.spatial_study = StudyConfig(
            T=_get(sec, "T", float, required=True),
            steps=_get(sec, "steps", int, required=True),
            levels=_int_list(_get(sec, "levels", str, required=True)),
        )
    if "temporal_study" in cp:
        sec = cp["temporal_study"]
        cfg.temporal_study = StudyConfig(
            T=_get(sec, "T", float, required=True),
            nx=_get(sec, "nx", int, required=True),
            levels=_int_list(_get(sec, "levels", str, required=True)),
        )
    return cfg


# ---------------------------------------------------------------------------
# Writers
# ---------------------------------------------------------------------------

def write_timeseries_csv(traj: schemes.Trajectory, path):
    """Header t,ubar_1..N; one row per step; values round-trip exactly."""
    if len(traj.times) == 0:
        raise ValueError("empty trajectory")
    with open(path, "w", newline="\n") as out:
        out.write(schemes.csv_header(traj.num_species) + "\n")
        for t, row in zip(traj.times, traj.averages):
            out.write(schemes.csv_row(t, row) + "\n")


def write_vtk_snapshot(fields, mesh: Mesh, path, title="species densities"):
    """Legacy ASCII VTK unstructured grid with one scalar block per species.

    P1 fields are written on mesh vertices; P2 fields on the full nodal
    point set with every triangle split into 4 subtriangles so each DOF is
    a grid point.
    """
    if not fields:
        raise ValueError("no fields to write")
    space = fields[0].space
    for f in fields:
        if f.space is not space:
            raise ValueError("all fields must share one function space")

    points = space.dof_coords
    if space.degree == 1:
        cells = space.cell_dofs
    else:
        cd = space.cell_dofs
        v0, v1, v2, m01, m12, m20 = (cd[:, k] for k in range(6))
        cells = np.vstack([
            np.column_stack([v0, m01, m20]),
            np.column_stack([v1, m12, m01]),
            np.column_stack([v2, m20, m12]),
            np.column_stack([m01, m12, m20]),
        ])

    with open(path, "w", newline="\n") as out:
        out.write("# vtk DataFile Version 3.0\n")
        out.write(f"{title}\n")
        out.write("ASCII\n")
        out.write("DATASET UNSTRUCTURED_GRID\n")
        out.write(f"POINTS {len(points)} double\n")
        for x, y in points:
            out.write(f"{x:.17g} {y:.17g} 0\n")
        out.write(f"CELLS {len(cells)} {4 * len(cells)}\n")
        for a, b, c in cells:
            out.write(f"3 {a} {b} {c}\n")
        out.write(f"CELL_TYPES {len(cells)}\n")
        out.write("5\n" * len(cells))
        out.write(f"POINT_DATA {len(points)}\n")
        for i, f in enumerate(fields, start=1):
            out.write(f"SCALARS u{i} double 1\n")
            out.write("LOOKUP_TABLE default\n")
            for v in f.coeffs:
                out.write(f"{v:.17g}\n")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _snapshot_path(out_dir, prefix, t):
    label = schemes.format_float(t).replace(".", "p").replace("-", "m")
    return os.path.join(out_dir, f"{prefix}_t{label}.vtk")


def cmd_simulate(args):
    cfg = load_config(args.config)
    if args.constant_C is not None:
        cfg.constant_C = args.constant_C
    if args.snapshots is not None:
        cfg.snapshot_times = _float_list(args.snapshots)
    out_dir = args.out
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, cfg.csv_name)
    traj = schemes.run(
        cfg.spec,
        constant_C=cfg.constant_C,
        snapshot_times=cfg.snapshot_times,
        csv_path=csv_path,
    )
    print(traj.report)
    print(f"time series: {csv_path}")
    for t, fields in sorted(traj.snapshots.items()):
        path = _snapshot_path(out_dir, cfg.snapshot_prefix, t)
        write_vtk_snapshot(fields, fields[0].space.mesh, path, title=f"t = {t}")
        print(f"snapshot t={schemes.format_float(t)}: {path}")
    final = traj.averages[-1]
    means = ", ".join(f"ubar_{i + 1} = {v:.6g}" for i, v in enumerate(final))
    print(f"final averages at t={schemes.format_float(traj.times[-1])}: {means}")
    return 0


def cmd_converge(args):
    cfg = load_config(args.config)
    if cfg.mms_exacts is None:
        raise ConfigError("converge requires an [mms] section with exact solutions")
    study = cfg.spatial_study if args.axis == "spatial" else cfg.temporal_study
    levels = _int_list(args.levels) if args.levels else None
    base = cfg.spec
    if study is not None:
        if args.axis == "spatial":
            base = base.replace(T=study.T, dt=study.T / study.steps)
        else:
            base = base.replace(T=study.T, dt=study.T / max(study.levels),
                                nx=study.nx, ny=study.nx)
        if levels is None:
            levels = study.levels
    if levels is None:
        levels = DEFAULT_LEVELS[args.axis]
    case = verify.MmsCase(spec=base, exacts=cfg.mms_exacts)
    table = verify.convergence_study(case, args.axis, levels)
    print(f"{base.scheme} {args.axis} study, T={schemes.format_float(base.T)}")
    print(table)
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, f"rates_{base.scheme}_{args.axis}.csv")
    table.to_csv(csv_path)
    print(f"rate table: {csv_path}")
    return 0


def cmd_check_dt(args):
    cfg = load_config(args.config)
    C = cfg.constant_C if args.constant_C is None else args.constant_C
    report = model.stability_report(cfg.spec, C)
    print(report)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rdcomp",
        description="Finite element solver for N-species reaction-diffusion "
                    "competition with harvesting or stocking",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a configuration and write CSV/VTK output")
    sim.add_argument("config")
    sim.add_argument("--out", default=".", help="output directory")
    sim.add_argument("--snapshots", help="comma-separated snapshot times")
    sim.add_argument("--constant-C", type=float, dest="constant_C")
    sim.set_defaults(func=cmd_simulate)

    conv = sub.add_parser("converge", help="manufactured-solution convergence study")
    conv.add_argument("config")
    conv.add_argument("--axis", choices=("spatial", "temporal"), required=True)
    conv.add_argument("--levels", help="comma-separated refinement levels")
    conv.add_argument("--out", default=".", help="output directory")
    conv.set_defaults(func=cmd_converge)

    chk = sub.add_parser("check-dt", help="print the stability report")
    chk.add_argument("config")
    chk.add_argument("--constant-C", type=float, dest="constant_C")
    chk.set_defaults(func=cmd_check_dt)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, model.ModelError, ValueError, RuntimeError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
