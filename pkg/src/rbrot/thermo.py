"""Monatomic gas plus radiation equation of state.

The pressure, specific internal energy and specific entropy are built from a
structural law ``P(Z)`` of the variable ``Z = rho / theta**1.5``::

    p = theta**2.5 * P(Z) + a/3 * theta**4
    e = 1.5 * theta**2.5 / rho * P(Z) + a * theta**4 / rho
    s = S(Z) + 4a/3 * theta**3 / rho,   S'(Z) = -1.5 * (5/3 P - P' Z) / Z**2

Three structural laws are supported: the ideal law ``P = Z``, a capped law
``P = p_inf Z**(5/3) / (1 + Z**(2/3))`` and a tabulated law interpolated
monotonically in log-log coordinates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator

from .errors import DomainError, StabilityError

GAS_LAWS = ("builtin_ideal", "builtin_capped", "tabulated")

# Fixed sampling constants used by the hypothesis checks.
Z_SAMPLE = np.logspace(-6.0, 6.0, 241)
GIBBS_SAMPLES = 32
FD_REL_STEP = 1e-6
NEWTON_TOL = 1e-12
NEWTON_MAXIT = 60


class IdealLaw:
    """P(Z) = Z, S(Z) = -log Z + offset."""

    third_law = False

    def __init__(self, offset: float = 0.0):
        self.offset = offset

    def P(self, z):
        return np.asarray(z, dtype=float)

    def dP(self, z):
        return np.ones_like(np.asarray(z, dtype=float))

    def heat_ratio(self, z):
        # (5/3 P - P' Z) / Z
        return np.full_like(np.asarray(z, dtype=float), 2.0 / 3.0)

    def S(self, z):
        return self.S_reduced(z) + self.offset

    def S_reduced(self, z):
        return -np.log(z)

    def dS(self, z):
        return -1.0 / np.asarray(z, dtype=float)


class CappedLaw:
    """P(Z) = p_inf Z^(5/3) / (1 + Z^(2/3)).

    With w = Z^(2/3) the entropy has the closed form
    S = -1.5 p_inf [log(1+w) + 1/(1+w)] + offset, which grows like
    -p_inf log Z for large Z, so S cannot be normalised to vanish at infinity.
    """

    third_law = False

    def __init__(self, p_inf: float, offset: float = 0.0):
        self.p_inf = p_inf
        self.offset = offset

    def P(self, z):
        z = np.asarray(z, dtype=float)
        w = np.cbrt(z) ** 2
        return self.p_inf * z * w / (1.0 + w)

    def dP(self, z):
        w = np.cbrt(np.asarray(z, dtype=float)) ** 2
        return self.p_inf * w * (5.0 / 3.0 + w) / (1.0 + w) ** 2

    def heat_ratio(self, z):
        w = np.cbrt(np.asarray(z, dtype=float)) ** 2
        return (2.0 / 3.0) * self.p_inf * w**2 / (1.0 + w) ** 2

    def S(self, z):
        return self.S_reduced(z) + self.offset

    def S_reduced(self, z):
        w = np.cbrt(np.asarray(z, dtype=float)) ** 2
        return -1.5 * self.p_inf * (np.log1p(w) + 1.0 / (1.0 + w))

    def dS(self, z):
        z = np.asarray(z, dtype=float)
        w = np.cbrt(z) ** 2
        return -self.p_inf * w**2 / ((1.0 + w) ** 2 * z)


class TabulatedLaw:
    """Monotone cubic interpolation of log P against log Z.

    The entropy is the exact antiderivative of a fine cubic spline of
    dS/dlogZ, anchored so that S(1) = offset.
    """

    third_law = False

    def __init__(self, z, p, offset: float = 0.0, n_fine: int = 8001):
        z = np.asarray(z, dtype=float)
        p = np.asarray(p, dtype=float)
        if z.ndim != 1 or z.shape != p.shape or z.size < 4:
            raise ValueError("table_z and table_p must be 1D arrays of equal length >= 4")
        if np.any(z <= 0) or np.any(p <= 0) or np.any(np.diff(z) <= 0):
            raise ValueError("table must have positive, strictly increasing Z and positive P")
        self.offset = offset
        self.zmin, self.zmax = float(z[0]), float(z[-1])
        self._logp = PchipInterpolator(np.log(z), np.log(p), extrapolate=True)
        self._dlogp = self._logp.derivative()
        y = np.linspace(math.log(self.zmin), math.log(self.zmax), n_fine)
        g = self._dS_dy(y)
        anti = CubicSpline(y, g).antiderivative()
        self._S = anti
        self._S0 = float(anti(0.0)) if self.zmin <= 1.0 <= self.zmax else float(anti(y[0]))

    def _dS_dy(self, y):
        zp = np.exp(y)
        return -1.5 * self.heat_ratio(zp)

    def P(self, z):
        z = np.asarray(z, dtype=float)
        out = np.zeros_like(z)
        pos = z > 0
        out[pos] = np.exp(self._logp(np.log(z[pos])))
        return out

    def dP(self, z):
        z = np.asarray(z, dtype=float)
        y = np.log(z)
        return np.exp(self._logp(y)) * self._dlogp(y) / z

    def heat_ratio(self, z):
        z = np.asarray(z, dtype=float)
        y = np.log(z)
        p_over_z = np.exp(self._logp(y) - y)
        return p_over_z * (5.0 / 3.0 - self._dlogp(y))

    def S(self, z):
        return self.S_reduced(z) + self.offset

    def S_reduced(self, z):
        return self._S(np.log(z)) - self._S0

    def dS(self, z):
        z = np.asarray(z, dtype=float)
        return -1.5 * self.heat_ratio(z) / z


@dataclass(frozen=True)
class EosSpec:
    """Equation of state plus transport laws.

    Transport: mu = mu0 (1 + theta), eta = eta0 (1 + theta),
    kappa = kappa0 (1 + theta**beta_cond).
    """

    gas_law: str = "builtin_ideal"
    a: float = 0.0
    p_inf: float = 1.0
    entropy_offset: float = 0.0
    mu0: float = 0.01
    eta0: float = 0.01
    kappa0: float = 0.01
    beta_cond: float = 7.0
    table_z: tuple = field(default=())
    table_p: tuple = field(default=())

    def __post_init__(self):
        if self.gas_law not in GAS_LAWS:
            raise ValueError(f"unknown gas_law {self.gas_law!r}; expected one of {GAS_LAWS}")
        if not (self.a >= 0 and math.isfinite(self.a)):
            raise ValueError("radiation constant a must be finite and >= 0")
        if self.gas_law == "builtin_capped" and not self.p_inf > 0:
            raise ValueError("p_inf must be > 0")
        if not self.beta_cond > 6:
            raise ValueError("beta_cond must exceed 6")
        for name in ("mu0", "eta0", "kappa0"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.gas_law == "tabulated" and len(self.table_z) == 0:
            raise ValueError("tabulated gas_law requires table_z and table_p")
        object.__setattr__(self, "table_z", tuple(float(v) for v in self.table_z))
        object.__setattr__(self, "table_p", tuple(float(v) for v in self.table_p))

    @cached_property
    def law(self):
        if self.gas_law == "builtin_ideal":
            return IdealLaw(self.entropy_offset)
        if self.gas_law == "builtin_capped":
            return CappedLaw(self.p_inf, self.entropy_offset)
        return TabulatedLaw(self.table_z, self.table_p, self.entropy_offset)

    @property
    def analytic(self) -> bool:
        return self.gas_law != "tabulated"

    # -- state functions ---------------------------------------------------
    def pressure(self, rho, theta):
        rho, theta = _check_state(rho, theta, allow_vacuum=True)
        z = rho / theta**1.5
        return theta**2.5 * self.law.P(z) + self.a / 3.0 * theta**4

    def internal_energy(self, rho, theta):
        rho, theta = _check_state(rho, theta)
        z = rho / theta**1.5
        return 1.5 * theta**2.5 / rho * self.law.P(z) + self.a * theta**4 / rho

    def entropy(self, rho, theta, with_offset: bool = True):
        """Specific entropy; ``with_offset=False`` drops the additive constant exactly."""
        rho, theta = _check_state(rho, theta)
        z = rho / theta**1.5
        S = self.law.S(z) if with_offset else self.law.S_reduced(z)
        return S + 4.0 * self.a / 3.0 * theta**3 / rho

    # -- derivatives -------------------------------------------------------
    def pressure_derivatives(self, rho, theta):
        rho, theta = _check_state(rho, theta)
        if self.analytic:
            z = rho / theta**1.5
            dp = self.law.dP(z)
            p_rho = theta * dp
            p_theta = theta**1.5 * (2.5 * self.law.P(z) - 1.5 * z * dp) + 4.0 * self.a / 3.0 * theta**3
        else:
            p_rho = _central(lambda r: self.pressure(r, theta), rho)
            p_theta = _central(lambda t: self.pressure(rho, t), theta)
        if np.any(p_rho <= 0):
            raise StabilityError("p_rho <= 0: thermodynamic stability violated")
        return p_rho, p_theta

    def energy_theta(self, rho, theta):
        """Specific heat at constant volume, de/dtheta."""
        rho, theta = _check_state(rho, theta)
        if self.analytic:
            z = rho / theta**1.5
            e_theta = 2.25 * self.law.heat_ratio(z) + 4.0 * self.a * theta**3 / rho
        else:
            e_theta = _central(lambda t: self.internal_energy(rho, t), theta)
        if np.any(e_theta <= 0):
            raise StabilityError("e_theta <= 0: thermodynamic stability violated")
        return e_theta

    def entropy_derivatives(self, rho, theta):
        rho, theta = _check_state(rho, theta)
        z = rho / theta**1.5
        ds = self.law.dS(z)
        s_rho = ds * z / rho - 4.0 * self.a / 3.0 * theta**3 / rho**2
        s_theta = -1.5 * ds * z / theta + 4.0 * self.a * theta**2 / rho
        return s_rho, s_theta

    def sound_speed_sq(self, rho, theta):
        p_rho, p_theta = self.pressure_derivatives(rho, theta)
        e_theta = self.energy_theta(rho, theta)
        return p_rho + theta * p_theta**2 / (rho**2 * e_theta)

    def transport(self, theta):
        theta = np.asarray(theta, dtype=float)
        if np.any(~np.isfinite(theta)) or np.any(theta <= 0):
            raise DomainError("temperature must be finite and positive")
        mu = self.mu0 * (1.0 + theta)
        eta = self.eta0 * (1.0 + theta)
        kappa = self.kappa0 * (1.0 + theta**self.beta_cond)
        return mu, eta, kappa

    def temperature_from_energy(self, rho, e, guess):
        """Invert e(rho, theta) = e for theta by safeguarded Newton iteration.

        e is increasing in theta (e_theta > 0), so Newton with positivity
        safeguarding converges from any positive guess.
        """
        rho = np.asarray(rho, dtype=float)
        e = np.asarray(e, dtype=float)
        theta = np.array(np.broadcast_to(guess, rho.shape), dtype=float)
        if np.any(~np.isfinite(e)) or np.any(e <= 0):
            raise DomainError("internal energy must be finite and positive")
        for _ in range(NEWTON_MAXIT):
            f = self.internal_energy(rho, theta) - e
            step = f / self.energy_theta(rho, theta)
            new = theta - step
            new = np.where(new <= 0, 0.5 * theta, new)
            done = np.abs(new - theta) <= NEWTON_TOL * np.abs(new)
            theta = new
            if np.all(done):
                return theta
        raise DomainError("temperature inversion did not converge")


def _check_state(rho, theta, allow_vacuum=False):
    rho = np.asarray(rho, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if not (np.all(np.isfinite(rho)) and np.all(np.isfinite(theta))):
        raise DomainError("non-finite density or temperature")
    if np.any(theta <= 0):
        raise DomainError("temperature must be positive")
    if allow_vacuum:
        if np.any(rho < 0):
            raise DomainError("density must be non-negative")
    elif np.any(rho <= 0):
        raise DomainError("density must be positive")
    return rho, theta


def _central(f, x):
    h = FD_REL_STEP * np.abs(x)
    return (f(x + h) - f(x - h)) / (2.0 * h)


# -- functional interface -----------------------------------------------------

def pressure(eos: EosSpec, rho, theta):
    return eos.pressure(rho, theta)


def internal_energy(eos: EosSpec, rho, theta):
    return eos.internal_energy(rho, theta)


def entropy(eos: EosSpec, rho, theta):
    return eos.entropy(rho, theta)


def pressure_derivatives(eos: EosSpec, rho, theta):
    return eos.pressure_derivatives(rho, theta)


def transport(eos: EosSpec, theta):
    return eos.transport(theta)


def sound_speed(eos: EosSpec, rho, theta):
    return np.sqrt(eos.sound_speed_sq(rho, theta))


@dataclass(frozen=True)
class BackgroundState:
    rho_bar: float
    theta_bar: float
    p_rho: float
    p_theta: float
    e_theta: float
    alpha: float
    c_p: float
    c_v: float
    lam: float

    def __post_init__(self):
        if not (self.p_rho > 0 and self.e_theta > 0):
            raise StabilityError("background violates thermodynamic stability")
        if not (0.0 < self.lam < 1.0):
            raise StabilityError(f"lambda = {self.lam} outside (0, 1)")


def coefficients(eos: EosSpec, rho_bar: float, theta_bar: float) -> BackgroundState:
    """Thermal expansion, specific heats and lambda at the background state."""
    if not (rho_bar > 0 and theta_bar > 0):
        raise DomainError("background density and temperature must be positive")
    p_rho, p_theta = (float(v) for v in eos.pressure_derivatives(rho_bar, theta_bar))
    e_theta = float(eos.energy_theta(rho_bar, theta_bar))
    alpha = p_theta / (rho_bar * p_rho)
    c_v = e_theta
    c_p = e_theta + theta_bar / rho_bar * alpha * p_theta
    lam = theta_bar * alpha * p_theta / (rho_bar * c_p)
    return BackgroundState(float(rho_bar), float(theta_bar), p_rho, p_theta, e_theta,
                           alpha, c_p, c_v, lam)


def verify_gibbs(eos, region=((0.5, 2.0), (0.5, 2.0)), n: int = GIBBS_SAMPLES) -> float:
    """Max Gibbs-relation residual over an n x n sample of a (rho, theta) rectangle.

    Any object with ``pressure``, ``internal_energy`` and ``entropy`` methods
    is accepted. Derivatives are central differences with relative step 1e-6.
    """
    (r0, r1), (t0, t1) = region
    rho, theta = np.meshgrid(np.linspace(r0, r1, n), np.linspace(t0, t1, n), indexing="ij")
    hr = FD_REL_STEP * rho
    ht = FD_REL_STEP * theta
    e_t = (eos.internal_energy(rho, theta + ht) - eos.internal_energy(rho, theta - ht)) / (2 * ht)
    s_t = (eos.entropy(rho, theta + ht) - eos.entropy(rho, theta - ht)) / (2 * ht)
    e_r = (eos.internal_energy(rho + hr, theta) - eos.internal_energy(rho - hr, theta)) / (2 * hr)
    s_r = (eos.entropy(rho + hr, theta) - eos.entropy(rho - hr, theta)) / (2 * hr)
    p = eos.pressure(rho, theta)
    res_t = np.abs(theta * s_t - e_t)
    res_r = np.abs(theta * s_r - (e_r - p / rho**2))
    return float(max(res_t.max(), res_r.max()))


IDENTITY_NAMES = ("maxwell", "lambda_definition", "lambda_ratio",
                  "vanishing_combination", "kappa_combination")


def identity_suite(background: BackgroundState, eos: EosSpec) -> dict:
    """Absolute residuals of the five background thermodynamic identities."""
    b = background
    s_rho, s_theta = (float(v) for v in eos.entropy_derivatives(b.rho_bar, b.theta_bar))
    kappa = float(eos.transport(b.theta_bar)[2])
    ap = b.theta_bar * b.alpha * b.p_theta
    res = {
        "maxwell": s_rho + b.p_theta / b.rho_bar**2,
        "lambda_definition": ap - b.rho_bar * b.c_p * b.lam,
        "lambda_ratio": b.lam / (1.0 - b.lam) - (b.c_p / b.c_v - 1.0),
        "vanishing_combination": -s_theta * b.p_rho / b.p_theta
        - s_rho * (b.c_p * b.rho_bar / ap - 1.0),
        "kappa_combination": (s_rho * b.p_theta / b.p_rho - s_theta) * kappa / b.c_p
        + kappa / b.theta_bar,
    }
    return {k: abs(float(v)) for k, v in res.items()}


def check_hypotheses(eos: EosSpec, z=Z_SAMPLE) -> dict:
    """Sampled structural checks on P(Z).

    Reports positivity of P', the sampled range of (5/3 P - P'Z)/Z, whether
    P/Z^(5/3) is non-increasing, the minimum of P/Z for Z >= 1, and whether
    the third law normalisation is available.
    """
    law = eos.law
    if eos.gas_law == "tabulated":
        z = z[(z >= law.zmin) & (z <= law.zmax)]
    P = law.P(z)
    dP = law.dP(z)
    ratio = law.heat_ratio(z)
    scaled = P / z ** (5.0 / 3.0)
    big = z >= 1.0
    return {
        "p_zero": float(law.P(np.array([0.0]))[0]),
        "dp_positive": bool(np.all(dP > 0)),
        "heat_ratio_min": float(ratio.min()),
        "heat_ratio_max": float(ratio.max()),
        "heat_ratio_positive": bool(np.all(ratio > 0)),
        "scaled_nonincreasing": bool(np.all(np.diff(scaled) <= 1e-12 * scaled[:-1])),
        "p_over_z_min_large": float((P[big] / z[big]).min()) if big.any() else float("nan"),
        "beta_ok": eos.beta_cond > 6,
        "third_law": bool(law.third_law),
    }
