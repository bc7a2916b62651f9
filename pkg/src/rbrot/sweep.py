"""Run orchestration: limit run, primitive runs per eps, reports and manifests."""
from __future__ import annotations

import hashlib
import json
import platform
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__, diagnostics, limit, primitive
from .config import RunConfig, config_hash, serialize_config
from .diagnostics import RECORD_COLUMNS, DiagnosticsMonitor, RunSeries, sweep_report
from .errors import ConfigError, NumericalError, PositivityError
from .fields import GridSpec, ScalarField, write_snapshot
from .initial import compile_expression, initial_temperature, linear_profile, stream_velocity
from .thermo import coefficients

LIMIT_COLUMNS = ("t", "ke", "xi", "avg_T", "div_l2")


@dataclass
class Setup:
    cfg: RunConfig
    background: object
    theta_boundary: object
    T0: ScalarField
    u0h: tuple
    limit_params: limit.LimitParams

    def primitive_params(self, eps: float) -> primitive.PrimitiveParams:
        c = self.cfg
        return primitive.PrimitiveParams(eps, c.eos, self.background, c.grid, c.physics.g_vec,
                                         self.theta_boundary, c.numerics.cfl, c.numerics.t_final)


def build_setup(cfg: RunConfig) -> Setup:
    bg = coefficients(cfg.eos, cfg.background.rho_bar, cfg.background.theta_bar)
    ph = cfg.physics
    if ph.theta_boundary_expr:
        vb = compile_expression(ph.theta_boundary_expr)
    else:
        vb = linear_profile(ph.t_bot, ph.t_top)
    T0 = initial_temperature(cfg.grid, vb, ph.t0_perturbation)
    u0h = stream_velocity(cfg.grid, ph.u0_amplitude)
    lp = limit.LimitParams(bg, cfg.eos, cfg.grid, cfg.numerics.limit_dt, cfg.numerics.t_final,
                           ph.g_vec, ph.beta_slip, vb)
    return Setup(cfg, bg, vb, T0, u0h, lp)


# -- file helpers ----------------------------------------------------------------

def fmt(v: float) -> str:
    return "%.17g" % v


def write_csv(path: Path, columns, rows) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        for r in rows:
            fh.write(",".join(fmt(r[c]) for c in columns) + "\n")


def file_entry(path: Path, root: Path) -> dict:
    data = path.read_bytes()
    return {"path": str(path.relative_to(root)), "size": len(data),
            "sha256": hashlib.sha256(data).hexdigest()}


def versions() -> dict:
    return {"rbrot": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__}


def limit_snapshot(state: limit.LimitState, grid: GridSpec, path: Path) -> None:
    write_snapshot(path, grid.shape, {
        "T@c": state.T_dev.values, "R@c": state.R_dev.values,
        "u1@xh": state.u_h[0], "u2@yh": state.u_h[1], "Pi@ch": state.Pi,
    })


def primitive_snapshot(state: primitive.PrimitiveState, grid: GridSpec, path: Path) -> None:
    write_snapshot(path, grid.shape, {
        "rho@c": state.rho, "theta@c": state.theta, "E@c": state.E,
        "m1@x": state.mom[0], "m2@y": state.mom[1], "m3@z": state.mom[2],
    })


def _snapshot_due(cfg: RunConfig, t: float) -> bool:
    se = cfg.numerics.snapshot_every
    if t == 0.0 or abs(t - cfg.numerics.t_final) < 1e-12:
        return True
    if se <= 0:
        return False
    k = t / se
    return abs(k - round(k)) < 1e-9


def write_manifest(directory: Path, kind: str, cfg: RunConfig, status: str, extra: dict,
                   files: list[Path]) -> dict:
    manifest = {
        "kind": kind,
        "status": status,
        "config_sha256": config_hash(cfg),
        "versions": versions(),
        **extra,
        "files": [file_entry(p, directory) for p in sorted(files)],
    }
    with open(directory / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


# -- runs ------------------------------------------------------------------------

def limit_trajectory(setup: Setup, directory: Path | None = None):
    """Run the limit system, keeping states at every diagnostic time."""
    cfg = setup.cfg
    lp = setup.limit_params
    state = limit.init_limit(lp, setup.u0h, setup.T0)
    every = int(round(cfg.numerics.diag_every / lp.dt))
    nsteps = int(round(cfg.numerics.t_final / lp.dt))
    states = [state.copy()]
    rows = []
    snaps = []

    def note(s):
        ke = 0.5 * lp.background.rho_bar * sum(float(np.sum(u**2)) for u in s.u_h) * cfg.grid.cell_volume * cfg.grid.nz
        div = limit.horizontal_divergence(s.u_h, cfg.grid)
        rows.append({"t": s.t, "ke": ke, "xi": s.xi, "avg_T": float(np.mean(s.T_dev.values)),
                     "div_l2": float(np.sqrt(np.sum(div**2) * cfg.grid.dx * cfg.grid.dy))})
        if directory is not None and _snapshot_due(cfg, s.t):
            p = directory / f"snap_{len(snaps):05d}.rbr"
            limit_snapshot(s, cfg.grid, p)
            snaps.append((s.t, p))

    note(state)
    for n in range(1, nsteps + 1):
        state = limit.step(state, lp)
        if n % every == 0:
            state.t = round(n * lp.dt, 12)
            states.append(state.copy())
            note(state)
    return states, rows, snaps


def run_limit(cfg: RunConfig, directory) -> dict:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "config.toml").write_text(serialize_config(cfg), encoding="utf-8")
    setup = build_setup(cfg)
    _, rows, snaps = limit_trajectory(setup, directory)
    write_csv(directory / "limit_diagnostics.csv", LIMIT_COLUMNS, rows)
    files = [directory / "config.toml", directory / "limit_diagnostics.csv"] + [p for _, p in snaps]
    extra = {"snapshots": [{"t": t, "path": p.name} for t, p in snaps]}
    return write_manifest(directory, "limit", cfg, "ok", extra, files)


def primitive_trajectory(setup: Setup, eps: float, limit_states, directory: Path | None = None):
    cfg = setup.cfg
    pp = setup.primitive_params(eps)
    state = primitive.well_prepared_init(pp, setup.T0, setup.u0h)
    monitor = DiagnosticsMonitor(pp)
    snaps = []

    def cb(s):
        monitor.record(s, diagnostics.interpolate_limit(limit_states, s.t))
        if directory is not None and _snapshot_due(cfg, s.t):
            p = directory / f"snap_{len(snaps):05d}.rbr"
            primitive_snapshot(s, cfg.grid, p)
            snaps.append((s.t, p))

    try:
        primitive.run(pp, state, cfg.diag_times[1:], cb)
    except PositivityError as exc:
        if directory is not None and exc.state is not None:
            primitive_snapshot(exc.state, cfg.grid, directory / "failure.rbr")
        raise
    return monitor.records, snaps


def run_primitive(cfg: RunConfig, eps: float, directory, limit_states=None) -> dict:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "config.toml").write_text(serialize_config(cfg), encoding="utf-8")
    setup = build_setup(cfg)
    if limit_states is None:
        limit_states, _, _ = limit_trajectory(setup)
    records, snaps = primitive_trajectory(setup, eps, limit_states, directory)
    rows = [r.__dict__ for r in records]
    write_csv(directory / "diagnostics.csv", RECORD_COLUMNS, rows)
    files = [directory / "config.toml", directory / "diagnostics.csv"] + [p for _, p in snaps]
    extra = {"eps": eps, "snapshots": [{"t": t, "path": p.name} for t, p in snaps]}
    manifest = write_manifest(directory, "primitive", cfg, "ok", extra, files)
    manifest["records"] = records
    return manifest


def run_dir_name(eps: float) -> str:
    return "eps_" + ("%.6g" % eps).replace(".", "p")


def run_sweep(cfg: RunConfig, directory=None) -> dict:
    """Limit run once, primitive runs per eps on a thread pool, then the report."""
    root = Path(directory if directory is not None else cfg.output.directory)
    root.mkdir(parents=True, exist_ok=True)
    (root / "config.toml").write_text(serialize_config(cfg), encoding="utf-8")
    setup = build_setup(cfg)
    limit_dir = root / "limit"
    limit_dir.mkdir(exist_ok=True)
    states, rows, snaps = limit_trajectory(setup, limit_dir)
    write_csv(limit_dir / "limit_diagnostics.csv", LIMIT_COLUMNS, rows)
    write_manifest(limit_dir, "limit", cfg, "ok",
                   {"snapshots": [{"t": t, "path": p.name} for t, p in snaps]},
                   [limit_dir / "limit_diagnostics.csv"] + [p for _, p in snaps])

    def member(eps):
        d = root / run_dir_name(eps)
        try:
            m = run_primitive(cfg, eps, d, states)
            return eps, "ok", m.pop("records"), None
        except (NumericalError, ConfigError, ValueError) as exc:
            d.mkdir(parents=True, exist_ok=True)
            (d / "error.txt").write_text("".join(traceback.format_exception(exc)), encoding="utf-8")
            return eps, "failed", None, f"{type(exc).__name__}: {exc}"

    with ThreadPoolExecutor(max_workers=cfg.sweep.workers) as pool:
        results = list(pool.map(member, cfg.sweep.eps))

    runs = [{"eps": eps, "status": st, "directory": run_dir_name(eps), **({"error": err} if err else {})}
            for eps, st, _, err in results]
    ok = [RunSeries(eps, recs, cfg.grid.shape) for eps, st, recs, _ in results if st == "ok"]
    files = [root / "config.toml"]
    status = "ok" if all(r["status"] == "ok" for r in runs) else "failed"
    report = None
    if ok:
        report = sweep_report(ok)
        (root / "sweep_report.csv").write_text(report.to_csv(), encoding="ascii")
        (root / "sweep_report.txt").write_text(report.table(), encoding="ascii")
        files += [root / "sweep_report.csv", root / "sweep_report.txt"]
    for sub in ["limit"] + [r["directory"] for r in runs]:
        files += [p for p in sorted((root / sub).iterdir()) if p.is_file()]
    extra = {"runs": runs,
             "monotone": report.monotone if report else {},
             "orders": report.orders if report else {}}
    manifest = write_manifest(root, "sweep", cfg, status, extra, files)
    manifest["report"] = report
    return manifest


# -- compare ---------------------------------------------------------------------

def _load_manifest(path):
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        return path.parent, json.load(fh)


def compare(prim_manifest, limit_manifest, out_csv=None) -> list:
    """Diagnostics from stored primitive and limit snapshots at matching times."""
    from .config import load_config
    from .fields import read_snapshot

    pdir, pm = _load_manifest(prim_manifest)
    ldir, lm = _load_manifest(limit_manifest)
    if pm.get("kind") != "primitive" or lm.get("kind") != "limit":
        raise ConfigError("compare expects a primitive manifest and a limit manifest")
    if pm["config_sha256"] != lm["config_sha256"]:
        cfg_p = load_config(pdir / "config.toml")
        cfg_l = load_config(ldir / "config.toml")
        if cfg_p.grid != cfg_l.grid:
            raise ConfigError("primitive and limit runs use different grids")
    cfg = load_config(pdir / "config.toml")
    setup = build_setup(cfg)
    grid = cfg.grid
    vb_data = setup.limit_params.boundary
    lstates = []
    for s in lm["snapshots"]:
        _, f = read_snapshot(ldir / s["path"])
        T = ScalarField(grid, f["T@c"], "dirichlet", vb_data)
        lstates.append(limit.LimitState((f["u1@xh"], f["u2@yh"]), T, ScalarField(grid, f["R@c"]),
                                        f["Pi@ch"], s["t"]))
    pp = setup.primitive_params(pm["eps"])
    monitor = DiagnosticsMonitor(pp)
    for s in pm["snapshots"]:
        _, f = read_snapshot(pdir / s["path"])
        st = primitive.PrimitiveState(f["rho@c"], (f["m1@x"], f["m2@y"], f["m3@z"]), f["E@c"],
                                      f["theta@c"], s["t"])
        monitor.record(st, diagnostics.interpolate_limit(lstates, s["t"]))
    if out_csv is not None:
        write_csv(Path(out_csv), RECORD_COLUMNS, [r.__dict__ for r in monitor.records])
    return monitor.records
