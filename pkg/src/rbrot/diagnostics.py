"""Relative energy, Taylor-Proudman metrics, uniform-bound monitors and sweep reports."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .errors import ConfigError, ScalingError
from .fields import GridSpec, ScalarField, harmonic_extension
from .limit import LimitState
from .primitive import PrimitiveParams, PrimitiveState, face_density, lift_horizontal, total_mass, velocity
from .thermo import BackgroundState, EosSpec


@dataclass(frozen=True)
class EssResSpec:
    """The essential range K = [rho_bar/2, 2 rho_bar] x [theta_bar/2, 2 theta_bar]."""

    rho_bar: float
    theta_bar: float
    factor: float = 2.0

    def __post_init__(self):
        if not (self.rho_bar > 0 and self.theta_bar > 0 and self.factor > 1):
            raise ValueError("need positive background and factor > 1")

    @property
    def rho_range(self):
        return self.rho_bar / self.factor, self.rho_bar * self.factor

    @property
    def theta_range(self):
        return self.theta_bar / self.factor, self.theta_bar * self.factor

    def contains(self, rho, theta):
        r0, r1 = self.rho_range
        t0, t1 = self.theta_range
        return (rho >= r0) & (rho <= r1) & (theta >= t0) & (theta <= t1)


@dataclass
class DiagnosticsRecord:
    t: float
    rel_energy: float
    ke: float
    internal_e: float
    ballistic_e: float
    ballistic_defect: float
    u3_l2: float
    dz_uh_l2: float
    ub_h1_u: float
    ub_dev_rho: float
    ub_dev_theta: float
    mass: float
    mass_drift: float
    res_measure: float

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not math.isfinite(v):
                raise ValueError(f"non-finite diagnostic {f.name} = {v}")


RECORD_COLUMNS = tuple(f.name for f in fields(DiagnosticsRecord))


def lifted_comparison(limit: LimitState, eps: float, background: BackgroundState, grid: GridSpec):
    """(rho~, theta~, u~) = (rho_bar + eps R, theta_bar + eps T, (u_h, 0))."""
    rho_t = background.rho_bar + eps * limit.R_dev.values
    theta_t = background.theta_bar + eps * limit.T_dev.values
    if np.any(rho_t <= 0) or np.any(theta_t <= 0):
        raise ScalingError("lifted comparison state is not positive")
    return rho_t, theta_t, lift_horizontal(limit.u_h, grid)


def relative_energy_density(rho, theta, rho_t, theta_t, eps, eos: EosSpec):
    """Thermodynamic part of the relative energy, cell by cell.

    Uses the rearrangement rho[(e - e~) - theta~ (s - s~)] - p~ (rho - rho~)/rho~,
    which is algebraically identical to the usual form but avoids cancelling
    large terms.
    """
    e = eos.internal_energy(rho, theta)
    # the additive entropy constant cancels in s - s~, so leave it out
    s = eos.entropy(rho, theta, with_offset=False)
    e_t = eos.internal_energy(rho_t, theta_t)
    s_t = eos.entropy(rho_t, theta_t, with_offset=False)
    p_t = eos.pressure(rho_t, theta_t)
    return (rho * ((e - e_t) - theta_t * (s - s_t)) - p_t * (rho - rho_t) / rho_t) / eps**2


def relative_energy(prim: PrimitiveState, limit: LimitState, eps: float,
                    background: BackgroundState, eos: EosSpec, grid: GridSpec) -> float:
    rho_t, theta_t, u_t = lifted_comparison(limit, eps, background, grid)
    u = velocity(prim, grid)
    kin = 0.0
    for a in range(3):
        kin += float(np.sum(face_density(prim.rho, grid, a) * (u[a] - u_t[a]) ** 2))
    therm = float(np.sum(relative_energy_density(prim.rho, prim.theta, rho_t, theta_t, eps, eos)))
    return (0.5 * kin + therm) * grid.cell_volume


def ess_res_split(prim: PrimitiveState, spec: EssResSpec, grid: GridSpec | None = None):
    """Indicator masks of the essential and residual sets.

    Returns ``(res_measure, masks)`` with ``masks`` holding boolean ``ess``
    and ``res`` arrays and the masked deviations ``drho_ess``, ``dtheta_ess``.
    """
    ess = spec.contains(prim.rho, prim.theta)
    res = ~ess
    vol = grid.cell_volume if grid is not None else 1.0
    masks = {
        "ess": ess,
        "res": res,
        "drho_ess": np.where(ess, prim.rho - spec.rho_bar, 0.0),
        "dtheta_ess": np.where(ess, prim.theta - spec.theta_bar, 0.0),
    }
    return float(np.count_nonzero(res)) * vol, masks


def taylor_proudman_metrics(prim: PrimitiveState, grid: GridSpec):
    """L2 norms of u3 and of d(u1, u2)/dx3."""
    u = velocity(prim, grid)
    w3 = np.full(grid.face_shape(2), grid.cell_volume)
    w3[:, :, [0, -1]] *= 0.5
    u3 = math.sqrt(float(np.sum(u[2] ** 2 * w3)))
    dz = 0.0
    for a in (0, 1):
        dz += float(np.sum(np.diff(u[a], axis=2) ** 2)) / grid.dz**2 * grid.cell_volume
    return u3, math.sqrt(dz)


def velocity_gradient_sq(prim: PrimitiveState, grid: GridSpec) -> float:
    u = velocity(prim, grid)
    total = 0.0
    for c in range(3):
        for a in grid.active:
            total += float(np.sum(np.diff(u[c], axis=a) ** 2)) / grid.spacing[a] ** 2
    return total * grid.cell_volume


def boundary_extension(params: PrimitiveParams) -> np.ndarray:
    """theta_bar + eps * harmonic extension of the boundary temperature data."""
    h = harmonic_extension(params.grid, params.vartheta)
    return params.background.theta_bar + params.eps * h.values


def ballistic_energy(prim: PrimitiveState, params: PrimitiveParams, theta_B=None) -> float:
    """Integral of eps^2 rho|u|^2/2 + rho e - theta_B rho s."""
    g = params.grid
    eos = params.eos
    if theta_B is None:
        theta_B = boundary_extension(params)
    kin = 0.0
    for a in range(3):
        kin += float(np.sum(prim.mom[a] ** 2 / face_density(prim.rho, g, a)))
    rho, theta = prim.rho, prim.theta
    therm = float(np.sum(rho * eos.internal_energy(rho, theta) - theta_B * rho * eos.entropy(rho, theta)))
    return (0.5 * params.eps**2 * kin + therm) * g.cell_volume


class DiagnosticsMonitor:
    """Builds DiagnosticsRecord rows along a primitive trajectory."""

    def __init__(self, params: PrimitiveParams, spec: EssResSpec | None = None):
        self.params = params
        self.spec = spec or EssResSpec(params.background.rho_bar, params.background.theta_bar)
        self.theta_B = boundary_extension(params)
        self.records: list[DiagnosticsRecord] = []
        self._mass0 = None
        self._h1 = 0.0
        self._last = None

    def record(self, prim: PrimitiveState, limit: LimitState) -> DiagnosticsRecord:
        p = self.params
        g = p.grid
        eos = p.eos
        b = p.background
        mass = total_mass(prim, g)
        if self._mass0 is None:
            self._mass0 = mass
        grad_sq = velocity_gradient_sq(prim, g)
        if self._last is not None:
            t_prev, g_prev = self._last
            self._h1 += 0.5 * (prim.t - t_prev) * (grad_sq + g_prev)
        self._last = (prim.t, grad_sq)
        res_measure, masks = ess_res_split(prim, self.spec, g)
        dev_r = math.sqrt(float(np.sum(masks["drho_ess"] ** 2)) * g.cell_volume) / p.eps
        dev_t = math.sqrt(float(np.sum(masks["dtheta_ess"] ** 2)) * g.cell_volume) / p.eps
        ball = ballistic_energy(prim, p, self.theta_B)
        defect = 0.0 if not self.records else ball - self.records[-1].ballistic_e
        u = velocity(prim, g)
        ke = 0.5 * sum(float(np.sum(prim.mom[a] * u[a])) for a in range(3)) * g.cell_volume
        u3, dz = taylor_proudman_metrics(prim, g)
        rec = DiagnosticsRecord(
            t=prim.t,
            rel_energy=relative_energy(prim, limit, p.eps, b, eos, g),
            ke=ke,
            internal_e=float(np.sum(prim.E)) * g.cell_volume,
            ballistic_e=ball,
            ballistic_defect=defect,
            u3_l2=u3,
            dz_uh_l2=dz,
            ub_h1_u=self._h1,
            ub_dev_rho=dev_r,
            ub_dev_theta=dev_t,
            mass=mass,
            mass_drift=(mass - self._mass0) / self._mass0,
            res_measure=res_measure,
        )
        self.records.append(rec)
        return rec


def interpolate_limit(states: list[LimitState], t: float) -> LimitState:
    """Linear interpolation in time between stored limit states."""
    times = [s.t for s in states]
    if t <= times[0]:
        return states[0]
    if t >= times[-1]:
        return states[-1]
    k = int(np.searchsorted(times, t))
    a, b = states[k - 1], states[k]
    if abs(b.t - t) < 1e-12:
        return b
    w = (t - a.t) / (b.t - a.t)
    mix = lambda x, y: (1 - w) * x + w * y  # noqa: E731
    return LimitState(
        tuple(mix(x, y) for x, y in zip(a.u_h, b.u_h)),
        a.T_dev.with_values(mix(a.T_dev.values, b.T_dev.values)),
        a.R_dev.with_values(mix(a.R_dev.values, b.R_dev.values)),
        mix(a.Pi, b.Pi), t, mix(a.xi, b.xi))


# -- sweep report ----------------------------------------------------------------

@dataclass
class RunSeries:
    eps: float
    records: list
    grid: tuple | None = None


@dataclass
class SweepReport:
    rows: list
    monotone: dict
    orders: dict
    columns: tuple = ("eps", "sup_rel_energy", "final_u3_l2", "final_dz_uh_l2",
                      "sup_dev_rho", "sup_dev_theta")

    def to_csv(self) -> str:
        lines = [",".join(self.columns)]
        for r in self.rows:
            lines.append(",".join(f"{r[c]:.17g}" for c in self.columns))
        return "\n".join(lines) + "\n"

    def table(self) -> str:
        head = " ".join(f"{c:>16s}" for c in self.columns)
        body = [" ".join(f"{r[c]:16.6e}" for c in self.columns) for r in self.rows]
        out = [head, *body, ""]
        for key, ok in self.monotone.items():
            out.append(f"{key:>16s} strictly decreasing: {'yes' if ok else 'no'}")
        for key, vals in self.orders.items():
            txt = ", ".join("nan" if not math.isfinite(v) else f"{v:.3f}" for v in vals)
            out.append(f"{key:>16s} empirical orders: {txt}")
        return "\n".join(out) + "\n"


def _records_of(series):
    return [r if isinstance(r, dict) else asdict(r) for r in series]


def sweep_report(runs) -> SweepReport:
    """Per-eps summary, strict monotonicity flags and log-ratio orders.

    Runs are sorted by decreasing eps, so the result does not depend on the
    order of the input list. Runs on different grids are rejected.
    """
    runs = [r if isinstance(r, RunSeries) else RunSeries(*r) for r in runs]
    grids = {tuple(r.grid) for r in runs if r.grid is not None}
    if len(grids) > 1:
        raise ConfigError(f"runs use different grids: {sorted(grids)}")
    runs = sorted(runs, key=lambda r: -r.eps)
    rows = []
    for r in runs:
        recs = _records_of(r.records)
        if not recs:
            raise ConfigError(f"run eps={r.eps} has no records")
        rows.append({
            "eps": float(r.eps),
            "sup_rel_energy": max(x["rel_energy"] for x in recs),
            "final_u3_l2": recs[-1]["u3_l2"],
            "final_dz_uh_l2": recs[-1]["dz_uh_l2"],
            "sup_dev_rho": max(x["ub_dev_rho"] for x in recs),
            "sup_dev_theta": max(x["ub_dev_theta"] for x in recs),
        })
    keys = ("sup_rel_energy", "final_u3_l2", "final_dz_uh_l2")
    monotone = {k: all(a[k] > b[k] for a, b in zip(rows, rows[1:])) for k in keys}
    orders = {}
    for k in keys:
        vals = []
        for a, b in zip(rows, rows[1:]):
            if a[k] > 0 and b[k] > 0 and a["eps"] != b["eps"]:
                vals.append(math.log(a[k] / b[k]) / math.log(a["eps"] / b["eps"]))
            else:
                vals.append(float("nan"))
        orders[k] = vals
    return SweepReport(rows, monotone, orders)
