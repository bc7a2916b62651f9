import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rbrot import limit as L
from rbrot.errors import CFLError, ConfigError
from rbrot.fields import GridSpec, ScalarField, domain_average, gradient, harmonic_extension
from rbrot.initial import stream_velocity
from rbrot.thermo import EosSpec, coefficients

EOS = EosSpec(a=1e-3, mu0=0.01, kappa0=0.01)
BG = coefficients(EOS, 1.0, 1.0)
IDEAL = EosSpec()
BG0 = coefficients(IDEAL, 1.0, 1.0)
BOX = GridSpec(16, 16, 16)
SLAB = GridSpec(16, 1, 16, geometry="slab")


def conduction(x, y, z):
    return 1.0 - z + 0 * x + 0 * y


def params(grid=BOX, **kw):
    kw.setdefault("dt", 1e-3)
    kw.setdefault("theta_boundary", conduction)
    return L.LimitParams(BG, EOS, grid, **kw)


def hdiv_l2(u_h, grid):
    d = L.horizontal_divergence(u_h, grid)
    return float(np.sqrt(np.mean(d**2)))


def test_potential_origin_value():
    phi = L.build_potential(BOX, (0.0, 0.0, -1.0))
    h = BOX.dx
    # f(0) - midpoint mean, with midpoint mean of x^2 equal to 1/3 - h^2/12
    value = L.potential_function(BOX, (0, 0, -1))(0.0, 0.0, 0.0) - (
        float(np.mean(L.potential_function(BOX, (0, 0, -1))(*BOX.cell_coords()) + np.zeros(BOX.shape))))
    assert value == pytest.approx(1.0 / 6.0 + h**2 / 12.0, abs=1e-12)
    assert value == pytest.approx(1.0 / 6.0, abs=2e-3)
    assert abs(domain_average(phi)) <= 1e-12


def test_potential_without_gravity():
    phi = L.build_potential(BOX, (0.0, 0.0, 0.0))
    x, y, z = BOX.cell_coords()
    expected = 0.5 * (x**2 + y**2) - (1.0 / 3.0 - BOX.dx**2 / 12.0) + 0 * z
    assert np.max(np.abs(phi.values - expected)) <= 1e-12


def test_potential_slab_drops_x2():
    phi = L.build_potential(SLAB, (0.0, 0.0, -1.0))
    assert abs(domain_average(phi)) <= 1e-12
    x, _, z = SLAB.cell_coords()
    diff = phi.values - (0.5 * x**2 - z)
    assert np.ptp(diff) <= 1e-12


def test_recover_R_constant_temperature_gives_potential():
    phi = L.build_potential(BOX, (0.0, 0.0, -1.0))
    T = ScalarField(BOX, np.full(BOX.shape, 0.7))
    R = L.recover_R(T, BG0, phi)
    assert np.max(np.abs(R.values - phi.values)) <= 1e-12


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_recover_R_zero_mean_and_boussinesq(seed):
    rng = np.random.default_rng(seed)
    phi = L.build_potential(BOX, (0.0, 0.0, -1.0))
    T = ScalarField(BOX, rng.standard_normal(BOX.shape) + 3.0)
    R = L.recover_R(T, BG, phi)
    assert abs(np.sum(R.values)) <= 1e-12 * np.sum(np.abs(R.values))
    res = BG.p_rho * R.values + BG.p_theta * T.values - BG.rho_bar * phi.values
    for a in range(3):
        grad = np.diff(res, axis=a) / BOX.spacing[a]
        assert np.max(np.abs(grad)) <= 1e-12 * np.max(np.abs(np.diff(T.values, axis=a) / BOX.spacing[a]))


def test_xi_bracket_identity():
    b = BG
    assert L.xi_bracket(b) == pytest.approx((1 - b.lam) / (b.rho_bar * b.c_p * b.lam), rel=1e-12)


def test_xi_examples():
    x, y, z = BOX.cell_coords()
    flat = ScalarField(BOX, np.broadcast_to(np.sin(x) + 0 * z, BOX.shape))
    assert L.compute_xi(flat, BG, EOS) == 0.0
    lin = ScalarField.dirichlet(BOX, np.broadcast_to(conduction(x, y, z), BOX.shape), conduction)
    assert abs(L.compute_xi(lin, BG, EOS)) <= 1e-12
    sq = lambda x, y, z: z**2 + 0 * x + 0 * y  # noqa: E731
    T = ScalarField.dirichlet(BOX, np.broadcast_to(sq(x, y, z), BOX.shape), sq)
    kappa = float(EOS.transport(1.0)[2])
    top_area = 4.0
    expected = (kappa / (BG.rho_bar * BG.c_p)) * 2.0 * top_area / BOX.volume / L.xi_bracket(BG)
    assert L.compute_xi(T, BG, EOS, scheme="quadratic") == pytest.approx(expected, rel=1e-12)


def test_theta_transform_examples():
    one = ScalarField(BOX, np.ones(BOX.shape))
    assert np.allclose(L.theta_from_T(one, BG).values, 1.0 - BG.lam, atol=1e-14)
    rng = np.random.default_rng(1)
    zm = rng.standard_normal(BOX.shape)
    zm -= zm.mean()
    f = ScalarField(BOX, zm)
    assert np.max(np.abs(L.theta_from_T(f, BG).values - zm)) <= 1e-14


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_theta_round_trip(seed):
    rng = np.random.default_rng(seed)
    f = ScalarField(BOX, rng.standard_normal(BOX.shape) * 5 + rng.normal())
    back = L.T_from_theta(L.theta_from_T(f, BG), BG)
    assert np.max(np.abs(back.values - f.values)) <= 1e-12


def test_theta_boundary_values():
    T0 = harmonic_extension(BOX, conduction)
    Theta = L.theta_from_T(T0, BG)
    shift = BG.lam / (1 - BG.lam) * domain_average(Theta)
    # on the boundary, T = vartheta_B, so Theta = vartheta_B - lam/(1-lam) avg(Theta)
    assert shift == pytest.approx(BG.lam * domain_average(T0), rel=1e-12)


def test_params_validation():
    with pytest.raises(ConfigError):
        params(dt=0.0)
    with pytest.raises(ConfigError):
        L.LimitParams(BG, EosSpec(kappa0=0.0), BOX, dt=1e-3)
    with pytest.raises(ConfigError):
        params(beta_slip=-1.0)
    with pytest.raises(CFLError):
        params(dt=1.0)


def test_init_zero_data_is_conduction():
    p = params()
    s = L.init_limit(p)
    assert all(np.max(np.abs(u)) == 0.0 for u in s.u_h)
    x, y, z = BOX.cell_coords()
    assert np.max(np.abs(s.T_dev.values - conduction(x, y, z))) <= 1e-10


def test_init_projects_velocity():
    p = params()
    rng = np.random.default_rng(2)
    u = (rng.standard_normal(p.hfaces(0)), rng.standard_normal(p.hfaces(1)))
    s = L.init_limit(p, u0h=u)
    assert hdiv_l2(s.u_h, BOX) <= 1e-9


def test_init_rejects_bad_trace():
    p = params()
    with pytest.raises(ConfigError):
        L.init_limit(p, T0=lambda x, y, z: 2.0 - z + 0 * x + 0 * y)
    with pytest.raises(ConfigError):
        L.init_limit(p, T0=ScalarField(BOX, np.zeros(BOX.shape)))
    with pytest.raises(ConfigError):
        L.init_limit(p, T0=np.zeros(BOX.shape))


def test_momentum_rest_is_fixed_point():
    p = params(g_vec=(0.0, 0.0, -1.0), theta_boundary=0.0)
    s = L.init_limit(p)
    s = L.LimitState(s.u_h, s.T_dev, s.R_dev.with_values(np.zeros(BOX.shape)), s.Pi)
    u, Pi = L.momentum_step(s, p)
    assert all(np.max(np.abs(c)) == 0.0 for c in u)
    assert np.ptp(Pi) == 0.0


def test_constant_mean_density_forcing_is_annihilated():
    p = params(theta_boundary=0.0)
    s = L.init_limit(p)
    s = L.LimitState(s.u_h, s.T_dev, s.R_dev.with_values(np.full(BOX.shape, 0.8)), s.Pi)
    u, Pi = L.momentum_step(s, p)
    assert max(np.max(np.abs(c)) for c in u) <= 1e-9
    assert np.max(np.abs(Pi)) > 0


def test_vertical_gravity_forcing_is_mean_density_times_x_h():
    p = params()
    g1 = p.potential_gradient[0]
    x = BOX.nodes(0)[:, None]
    assert np.max(np.abs(g1 - np.broadcast_to(x, g1.shape))) <= 1e-15


def ke(u_h):
    return sum(float(np.sum(u**2)) for u in u_h)


def slab_mode_run(beta_slip=0.0, steps=100):
    eos = EosSpec(mu0=0.01)
    bg = coefficients(eos, 1.0, 1.0)
    g = GridSpec(64, 1, 4, geometry="slab")
    lp = L.LimitParams(bg, eos, g, dt=2e-3, g_vec=(0.0, 0.0, 0.0), beta_slip=beta_slip)
    k = np.pi / 2
    u2 = 0.3 * np.cos(k * g.centers(0))[:, None]
    s = L.init_limit(lp, (np.zeros((65, 1)), u2), ScalarField(g, np.zeros(g.shape), "dirichlet", lp.boundary))
    hist = [ke(s.u_h)]
    for _ in range(steps):
        s = L.step(s, lp)
        hist.append(ke(s.u_h))
    return np.array(hist), lp, k


def test_shear_mode_decay_rate():
    hist, lp, k = slab_mode_run()
    assert np.all(np.diff(hist) < 0)
    rate = -np.log(hist[-1] / hist[0]) / (100 * lp.dt)
    exact = 2 * lp.mu * k**2 / lp.background.rho_bar
    assert abs(rate / exact - 1) <= 0.1


def test_box_vortex_decays_monotonically():
    eos = EosSpec(mu0=0.01)
    bg = coefficients(eos, 1.0, 1.0)
    g = GridSpec(32, 32, 4)
    lp = L.LimitParams(bg, eos, g, dt=2e-3, g_vec=(0.0, 0.0, 0.0))
    s = L.init_limit(lp, stream_velocity(g, 0.5), ScalarField(g, np.zeros(g.shape), "dirichlet", lp.boundary))
    hist = [ke(s.u_h)]
    for _ in range(30):
        s = L.step(s, lp)
        hist.append(ke(s.u_h))
    assert np.all(np.diff(hist) < 0)


def test_slip_damping_is_monotone():
    free, _, _ = slab_mode_run(0.0, 40)
    damped, _, _ = slab_mode_run(0.5, 40)
    assert np.all(damped[1:] <= free[1:])
    assert damped[-1] < free[-1]


def test_conduction_profile_is_steady():
    p = params()
    s = L.init_limit(p)
    T, xi = L.temperature_step(s, p)
    assert np.max(np.abs(T.values - s.T_dev.values)) <= 1e-8
    assert abs(xi) <= 1e-10


def test_explicit_xi_argument_adds_uniform_heating():
    p = params()
    s = L.init_limit(p)
    T0, _ = L.temperature_step(s, p, xi=0.0)
    T1, used = L.temperature_step(s, p, xi=1.0)
    assert used == 1.0
    d = T1.values - T0.values
    assert np.all(d > 0)


def test_step_invariants_over_100_steps():
    p = params()
    rng = np.random.default_rng(3)
    u = (0.1 * rng.standard_normal(p.hfaces(0)), 0.1 * rng.standard_normal(p.hfaces(1)))
    T0 = lambda x, y, z: conduction(x, y, z) + 0.3 * np.sin(np.pi * z) * np.cos(np.pi * x / 2) * np.cos(np.pi * y / 2)  # noqa: E731
    s = L.init_limit(p, u, T0)
    for n in range(100):
        t0 = s.t
        s = L.step(s, p)
        assert s.t == pytest.approx(t0 + p.dt, abs=1e-15)
        assert hdiv_l2(s.u_h, BOX) <= 1e-9
        assert abs(np.sum(s.R_dev.values)) <= 1e-12 * np.sum(np.abs(s.R_dev.values))
    res = BG.p_rho * s.R_dev.values + BG.p_theta * s.T_dev.values - BG.rho_bar * p.potential.values
    assert np.ptp(res) <= 1e-12 * np.max(np.abs(s.T_dev.values))


def test_half_steps_agree_to_first_order():
    base = dict(theta_boundary=conduction)
    T0 = lambda x, y, z: conduction(x, y, z) + 0.3 * np.sin(np.pi * z) * np.cos(np.pi * x / 2) * np.cos(np.pi * y / 2)  # noqa: E731
    errs = []
    for dt in (4e-3, 2e-3, 1e-3):
        p1 = params(dt=dt, **base)
        p2 = params(dt=dt / 2, **base)
        s = L.init_limit(p1, stream_velocity(BOX, 0.5), T0)
        a = L.step(s, p1)
        b = L.step(L.step(s, p2), p2)
        errs.append(np.sqrt(np.sum((a.T_dev.values - b.T_dev.values) ** 2)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    # local defect of a first-order scheme is O(dt^2)
    assert np.all(orders >= 1.9)


def test_run_hits_final_time_and_calls_back():
    p = params(t_final=0.01)
    seen = []
    s = L.run(p, L.init_limit(p), callback=lambda st: seen.append(st.t), every=5)
    assert s.t == pytest.approx(0.01)
    assert len(seen) == 3


def test_theta_integrator_matches_short():
    p = params()
    s = L.init_limit(p, stream_velocity(BOX, 0.5))
    th = L.ThetaState(s.u_h, L.theta_from_T(s.T_dev, BG).values)
    for _ in range(10):
        th = L.theta_step(L.ThetaState(s.u_h, th.Theta, th.t), p)
        s = L.step(s, p)
    assert np.max(np.abs(L.theta_from_T(s.T_dev, BG).values - th.Theta)) <= 1e-8
