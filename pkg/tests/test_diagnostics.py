import math
import random
from dataclasses import asdict

import numpy as np
import pytest

from rbrot import diagnostics as D
from rbrot import limit as L
from rbrot import primitive as P
from rbrot.errors import ConfigError, ScalingError
from rbrot.fields import GridSpec
from rbrot.initial import initial_temperature, linear_profile, stream_velocity
from rbrot.thermo import EosSpec, coefficients

EOS = EosSpec(a=1e-3)
BG = coefficients(EOS, 1.0, 1.0)
GRID = GridSpec(16, 1, 16, geometry="slab")
BOX = GridSpec(8, 8, 8)
VB = linear_profile(1.0, 0.0)
EPS = 0.2


def limit_state(grid=GRID):
    lp = L.LimitParams(BG, EOS, grid, dt=1e-3, theta_boundary=VB)
    return L.init_limit(lp, stream_velocity(grid, 0.5), initial_temperature(grid, VB, 0.3))


def lifted_prim(ls, eps=EPS, grid=GRID):
    rho, theta, u = D.lifted_comparison(ls, eps, BG, grid)
    return P.assemble(rho, u, theta, EOS, grid)


def test_relative_energy_vanishes_at_coincidence():
    ls = limit_state()
    pr = lifted_prim(ls)
    assert abs(D.relative_energy(pr, ls, EPS, BG, EOS, GRID)) <= 1e-12


def test_velocity_perturbation_gives_kinetic_term_only():
    ls = limit_state()
    pr = lifted_prim(ls)
    rng = np.random.default_rng(0)
    delta = [rng.standard_normal(GRID.face_shape(a)) for a in range(3)]
    u = P.velocity(pr, GRID)
    moved = P.assemble(pr.rho, [u[a] + delta[a] for a in range(3)], pr.theta, EOS, GRID)
    # assemble zeroes the wall-normal faces, so use the surviving perturbation
    du = [P.velocity(moved, GRID)[a] - u[a] for a in range(3)]
    expected = 0.5 * sum(float(np.sum(P.face_density(pr.rho, GRID, a) * du[a] ** 2)) for a in range(3))
    expected *= GRID.cell_volume
    assert D.relative_energy(moved, ls, EPS, BG, EOS, GRID) == pytest.approx(expected, rel=1e-12)


def _perturbed(ls, rng, amp=0.3, eps=EPS):
    base = lifted_prim(ls, eps)
    drho = eps * amp * rng.standard_normal(GRID.shape)
    dth = eps * amp * rng.standard_normal(GRID.shape)
    du = [amp * rng.standard_normal(GRID.face_shape(a)) for a in range(3)]
    u = P.velocity(base, GRID)
    return P.assemble(base.rho + drho, [u[a] + du[a] for a in range(3)], base.theta + dth, EOS, GRID), base


def test_entropy_offset_invariance():
    ls = limit_state()
    rng = np.random.default_rng(1)
    pr, _ = _perturbed(ls, rng)
    shifted = EosSpec(a=1e-3, entropy_offset=7.5)
    a = D.relative_energy(pr, ls, EPS, BG, EOS, GRID)
    b = D.relative_energy(pr, ls, EPS, BG, shifted, GRID)
    assert abs(a - b) <= 1e-12 * abs(a)


def test_rearranged_density_matches_literal_formula():
    rng = np.random.default_rng(2)
    rho = 1 + 0.1 * rng.standard_normal(200)
    theta = 1 + 0.1 * rng.standard_normal(200)
    rt = 1 + 0.1 * rng.standard_normal(200)
    tt = 1 + 0.1 * rng.standard_normal(200)
    e, s = EOS.internal_energy(rho, theta), EOS.entropy(rho, theta)
    et, st_, pt = EOS.internal_energy(rt, tt), EOS.entropy(rt, tt), EOS.pressure(rt, tt)
    literal = (rho * e - tt * (rho * s - rt * st_) - (et - tt * st_ + pt / rt) * (rho - rt) - rt * et)
    ours = D.relative_energy_density(rho, theta, rt, tt, 1.0, EOS)
    assert np.max(np.abs(ours - literal)) <= 1e-12 * np.max(np.abs(rho * e))


def test_coercivity_sampling():
    ls = limit_state()
    rng = np.random.default_rng(3)
    ratios = []
    for _ in range(200):
        amp = rng.uniform(0.01, 1.0)
        pr, base = _perturbed(ls, rng, amp)
        value = D.relative_energy(pr, ls, EPS, BG, EOS, GRID)
        norm = (np.sum(((pr.rho - base.rho) / EPS) ** 2) + np.sum(((pr.theta - base.theta) / EPS) ** 2)) * GRID.cell_volume
        u, ub = P.velocity(pr, GRID), P.velocity(base, GRID)
        norm += sum(float(np.sum((u[a] - ub[a]) ** 2)) for a in range(3)) * GRID.cell_volume
        ratios.append(value / norm)
    C = min(ratios)
    print(f"empirical coercivity constant C = {C:.4f}")
    assert C > 0


def test_invalid_comparison_state():
    ls = limit_state()
    ls.T_dev = ls.T_dev.with_values(np.full(GRID.shape, -2.0))
    with pytest.raises(ScalingError):
        D.lifted_comparison(ls, 1.0, BG, GRID)


def test_ess_res_examples():
    spec = D.EssResSpec(1.0, 1.0)
    u = [np.zeros(GRID.face_shape(a)) for a in range(3)]
    bg = P.assemble(np.ones(GRID.shape), u, np.ones(GRID.shape), EOS, GRID)
    m, masks = D.ess_res_split(bg, spec, GRID)
    assert m == 0.0
    rho = np.ones(GRID.shape)
    rho[3, 0, 5] = 3.0
    one = P.assemble(rho, u, np.ones(GRID.shape), EOS, GRID)
    m, masks = D.ess_res_split(one, spec, GRID)
    assert m == pytest.approx(GRID.cell_volume)
    assert np.all(masks["ess"].astype(int) + masks["res"].astype(int) == 1)
    assert masks["drho_ess"][3, 0, 5] == 0.0


def test_taylor_proudman_examples():
    ls = limit_state(BOX)
    uniform = P.assemble(np.ones(BOX.shape), P.lift_horizontal(ls.u_h, BOX), np.ones(BOX.shape), EOS, BOX)
    assert D.taylor_proudman_metrics(uniform, BOX) == (0.0, 0.0)
    # stratified density: only the rounding of m / rho survives
    pr = lifted_prim(ls, grid=BOX)
    assert max(D.taylor_proudman_metrics(pr, BOX)) <= 1e-14
    for n in (8, 16, 32):
        g = GridSpec(8, 8, n)
        z = g.face_coords(2)[2]
        u = [np.zeros(g.face_shape(0)), np.zeros(g.face_shape(1)),
             np.broadcast_to(np.sin(np.pi * z), g.face_shape(2)).copy()]
        s = P.assemble(np.ones(g.shape), u, np.ones(g.shape), EOS, g)
        u3, dz = D.taylor_proudman_metrics(s, g)
        assert u3 >= 0 and dz == 0.0
        # the trapezoidal rule integrates sin^2 exactly on these nodes
        assert u3 == pytest.approx(math.sqrt(g.volume / 2), rel=1e-12)


def test_ballistic_energy_closed_form_and_kinetic_increment():
    p = P.PrimitiveParams(0.3, EOS, BG, GRID, theta_boundary=0.0)
    u = [np.zeros(GRID.face_shape(a)) for a in range(3)]
    s = P.assemble(np.ones(GRID.shape), u, np.ones(GRID.shape), EOS, GRID)
    exact = (float(EOS.internal_energy(1.0, 1.0)) - float(EOS.entropy(1.0, 1.0))) * GRID.volume
    assert D.ballistic_energy(s, p) == pytest.approx(exact, rel=1e-10)
    rng = np.random.default_rng(4)
    v = [rng.standard_normal(GRID.face_shape(a)) for a in range(3)]
    moving = P.assemble(np.ones(GRID.shape), v, np.ones(GRID.shape), EOS, GRID)
    ke = 0.5 * sum(float(np.sum(moving.mom[a] ** 2)) for a in range(3)) * GRID.cell_volume
    assert D.ballistic_energy(moving, p) - D.ballistic_energy(s, p) == pytest.approx(0.09 * ke, rel=1e-10)


def test_ballistic_energy_offset_shift():
    shifted = EosSpec(a=1e-3, entropy_offset=0.5)
    u = [np.zeros(GRID.face_shape(a)) for a in range(3)]
    s = P.assemble(np.ones(GRID.shape), u, np.ones(GRID.shape), EOS, GRID)
    a = D.ballistic_energy(s, P.PrimitiveParams(0.3, EOS, BG, GRID, theta_boundary=0.0))
    b = D.ballistic_energy(s, P.PrimitiveParams(0.3, shifted, BG, GRID, theta_boundary=0.0))
    assert b - a == pytest.approx(-1.0 * 1.0 * GRID.volume * 0.5, rel=1e-10)


def test_record_rejects_non_finite():
    vals = {c: 0.0 for c in D.RECORD_COLUMNS}
    D.DiagnosticsRecord(**vals)
    vals["rel_energy"] = float("nan")
    with pytest.raises(ValueError):
        D.DiagnosticsRecord(**vals)


def test_monitor_records_along_a_run():
    p = P.PrimitiveParams(0.2, EOS, BG, GRID, theta_boundary=VB)
    ls = limit_state()
    s = P.well_prepared_init(p, ls.T_dev, ls.u_h)
    mon = D.DiagnosticsMonitor(p)
    r0 = mon.record(s, ls)
    for _ in range(5):
        s = P.time_step(s, p)
    r1 = mon.record(s, ls)
    assert r0.mass_drift == 0.0 and abs(r1.mass_drift) <= 1e-13
    assert r0.rel_energy >= -1e-10 and r1.rel_energy >= -1e-10
    assert r1.ub_h1_u > 0
    assert r0.ballistic_defect == 0.0


def test_interpolate_limit_midpoint():
    a = limit_state()
    b = a.copy()
    b.t = 0.1
    b.T_dev = a.T_dev.with_values(a.T_dev.values + 1.0)
    mid = D.interpolate_limit([a, b], 0.05)
    assert np.allclose(mid.T_dev.values, a.T_dev.values + 0.5)
    assert D.interpolate_limit([a, b], 1.0) is b


def _records(values, key="rel_energy"):
    out = []
    for t, v in enumerate(values):
        d = {c: 1.0 for c in D.RECORD_COLUMNS}
        d["t"] = float(t)
        d[key] = v
        out.append(D.DiagnosticsRecord(**d))
    return out


def test_sweep_report_flat_and_order_one():
    flat = D.sweep_report([(e, _records([1.0, 2.0])) for e in (0.4, 0.2, 0.1)])
    assert len({r["sup_rel_energy"] for r in flat.rows}) == 1
    assert not flat.monotone["sup_rel_energy"]
    lin = D.sweep_report([(e, _records([0.5 * e, e])) for e in (0.4, 0.2, 0.1)])
    assert lin.monotone["sup_rel_energy"]
    assert np.allclose(lin.orders["sup_rel_energy"], 1.0, atol=1e-12)
    assert "strictly decreasing: yes" in lin.table()
    assert lin.to_csv().splitlines()[0].startswith("eps,sup_rel_energy")


def test_sweep_report_single_run_and_permutation():
    one = D.sweep_report([(0.3, _records([1.0]))])
    assert one.orders["sup_rel_energy"] == []
    runs = [(e, _records([e**2, e])) for e in (0.4, 0.2, 0.1, 0.05)]
    ref = D.sweep_report(runs).to_csv()
    rnd = random.Random(0)
    for _ in range(5):
        shuffled = runs[:]
        rnd.shuffle(shuffled)
        assert D.sweep_report(shuffled).to_csv() == ref


def test_sweep_report_grid_mismatch():
    with pytest.raises(ConfigError):
        D.sweep_report([D.RunSeries(0.2, _records([1.0]), (8, 1, 8)),
                        D.RunSeries(0.1, _records([1.0]), (16, 1, 16))])
    recs = [asdict(r) for r in _records([1.0])]
    assert D.sweep_report([(0.2, recs)]).rows[0]["sup_rel_energy"] == 1.0
