"""Polytropic equilibrium profiles with a vacuum free boundary.

The dimensionless structure equation (xi^2 theta')' = -xi^2 theta^n is solved
once per profile; the star with prescribed adiabatic exponent gamma and total
mass is recovered through the scaling rho = rho_c theta^n, x = alpha xi with
alpha^2 = (n+1) rho_c^{1/n-1} / (4 pi) and n = 1/(gamma-1).  Unit pressure
constant and unit gravitational constant throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import (
    ConfigError,
    DomainError,
    InsufficientResolutionError,
    SolverFailureError,
    UnsupportedIndexError,
)

__all__ = [
    "DimensionlessSolution",
    "PolytropeProfile",
    "HolderReport",
    "solve_dimensionless",
    "solve_lane_emden",
    "profile_eval",
    "verify_physical_vacuum",
]

# below this xi the quartic series is more accurate than the ODE solution
_XI_SERIES = 1.0e-4
# hard ceiling on the integration span; the first zero of theta grows without
# bound only as n -> 5, which is rejected up front
_XI_MAX = 1.0e3


def _series_theta(xi: np.ndarray, n: float) -> np.ndarray:
    return 1.0 - xi * xi / 6.0 + n * xi**4 / 120.0


def _series_dtheta(xi: np.ndarray, n: float) -> np.ndarray:
    return -xi / 3.0 + n * xi**3 / 30.0


@dataclass(frozen=True)
class DimensionlessSolution:
    """Solution of the dimensionless structure equation up to its first zero."""

    index_n: float
    xi1: float
    mass_integral: float  # -xi1^2 theta'(xi1)
    theta_table: np.ndarray  # columns (xi, theta, theta')
    _dense: Callable = field(repr=False, compare=False)

    def theta_dtheta(self, xi):
        """Evaluate (theta, theta') on [0, xi1]; series near the center."""
        xi = np.asarray(xi, dtype=float)
        theta = np.empty_like(xi)
        dtheta = np.empty_like(xi)
        near = xi < _XI_SERIES
        if near.any():
            theta[near] = _series_theta(xi[near], self.index_n)
            dtheta[near] = _series_dtheta(xi[near], self.index_n)
        if (~near).any():
            vals = self._dense(xi[~near])
            theta[~near] = np.maximum(vals[0], 0.0)
            dtheta[~near] = vals[1] / np.maximum(xi[~near], _XI_SERIES) ** 2
        return theta, dtheta


def solve_dimensionless(index_n: float, tol: float = 1.0e-10) -> DimensionlessSolution:
    """Integrate the structure equation out to the first zero of theta.

    index_n must lie in [1, 5); the support radius diverges as n -> 5
    (gamma -> 6/5), so indices at or above 5 are rejected.
    """
    if not np.isfinite(index_n) or not (1.0 <= index_n < 5.0):
        raise UnsupportedIndexError(
            f"polytropic index n = {index_n} outside [1, 5); the support "
            "radius is infinite at n = 5 (gamma = 6/5) and beyond"
        )
    if not (0.0 < tol <= 1.0e-4):
        raise ConfigError(f"tol = {tol} outside (0, 1e-4]")

    n = float(index_n)

    def rhs(xi, y):
        theta, z = y
        tn = max(theta, 0.0) ** n
        return (z / (xi * xi), -xi * xi * tn)

    def surface(xi, y):
        return y[0]

    surface.terminal = True
    surface.direction = -1.0

    xi0 = _XI_SERIES
    y0 = (
        float(_series_theta(np.array(xi0), n)),
        xi0 * xi0 * float(_series_dtheta(np.array(xi0), n)),
    )
    rtol = max(1.0e-13, 0.01 * tol)
    sol = solve_ivp(
        rhs,
        (xi0, _XI_MAX),
        y0,
        method="DOP853",
        rtol=rtol,
        atol=rtol * 1.0e-2,
        dense_output=True,
        events=surface,
    )
    if not sol.success or sol.t_events[0].size == 0:
        raise SolverFailureError(
            f"structure equation integration failed for n = {n}: {sol.message}"
        )
    xi1 = float(sol.t_events[0][0])
    # polish the root of the dense interpolant
    lo = max(xi0, xi1 * (1.0 - 1.0e-6))
    hi = min(sol.t[-1], xi1 * (1.0 + 1.0e-6))
    if sol.sol(lo)[0] > 0.0 > sol.sol(hi)[0]:
        xi1 = float(brentq(lambda s: sol.sol(s)[0], lo, hi, xtol=tol * 1.0e-2))
    m1 = -float(sol.sol(xi1)[1])
    if m1 <= 0.0:
        raise SolverFailureError(f"nonpositive mass integral at n = {n}")

    xi_tab = np.linspace(0.0, xi1, 1025)
    theta_tab = np.empty_like(xi_tab)
    dtheta_tab = np.empty_like(xi_tab)
    theta_tab[0], dtheta_tab[0] = 1.0, 0.0
    vals = sol.sol(xi_tab[1:])
    theta_tab[1:] = np.maximum(vals[0], 0.0)
    dtheta_tab[1:] = vals[1] / xi_tab[1:] ** 2
    theta_tab[-1] = 0.0

    return DimensionlessSolution(
        index_n=n,
        xi1=xi1,
        mass_integral=m1,
        theta_table=np.column_stack([xi_tab, theta_tab, dtheta_tab]),
        _dense=sol.sol,
    )


@dataclass(frozen=True)
class PolytropeProfile:
    """Scaled equilibrium star for given gamma and total mass."""

    gamma: float
    total_mass: float
    radius_bar_R: float
    rho_center: float
    eval_table: np.ndarray  # columns (x, rho, q = (rho^gamma)_x, phi)
    polytropic_index: float
    _dimensionless: DimensionlessSolution = field(repr=False, compare=False)
    _alpha: float = field(repr=False, compare=False)


@dataclass(frozen=True)
class HolderReport:
    """Log-log fit of the enthalpy rho^{gamma-1} against distance to the boundary."""

    slope: float
    window: tuple
    passed: bool


def solve_lane_emden(
    gamma: float,
    total_mass: float,
    tol: float = 1.0e-10,
    allow_unstable: bool = False,
) -> PolytropeProfile:
    """Build the equilibrium profile for mass total_mass and exponent gamma.

    gamma must lie in (4/3, 2]; the gamma = 2 edge is admitted for testing.
    allow_unstable=True admits gamma outside that range (still requiring a
    compact-support index) so the linearly unstable regime can be probed.
    """
    if not np.isfinite(gamma):
        raise ConfigError(f"gamma = {gamma} is not finite")
    if not allow_unstable and not (4.0 / 3.0 < gamma <= 2.0):
        raise ConfigError(
            f"gamma = {gamma} outside (4/3, 2]; pass allow_unstable=True only "
            "for deliberately unstable backgrounds"
        )
    if gamma <= 1.0:
        raise ConfigError(f"gamma = {gamma} must exceed 1")
    if not np.isfinite(total_mass) or total_mass <= 0.0:
        raise ConfigError(f"total_mass = {total_mass} must be positive")

    n = 1.0 / (gamma - 1.0)
    if abs(n - 3.0) < 1.0e-12:
        raise UnsupportedIndexError(
            "n = 3 (gamma = 4/3): total mass is independent of central density "
            "and cannot be matched"
        )
    sol = solve_dimensionless(n, tol)
    m1 = sol.mass_integral
    rho_c = (total_mass * math.sqrt(4.0 * math.pi) / (m1 * (n + 1.0) ** 1.5)) ** (
        2.0 * n / (3.0 - n)
    )
    alpha = math.sqrt((n + 1.0) * rho_c ** (1.0 / n - 1.0) / (4.0 * math.pi))
    radius = alpha * sol.xi1

    # xi sampling: uniform over the first 90%, geometric clustering in the
    # last 10% so the vacuum boundary fit has well-spread abscissas
    xi_bulk = np.linspace(0.0, 0.9 * sol.xi1, 1793, endpoint=False)
    shrink = np.geomspace(1.0, 1.0e-6, 256)
    xi_tail = sol.xi1 - 0.1 * sol.xi1 * shrink
    xi_grid = np.concatenate([xi_bulk, xi_tail, [sol.xi1]])

    x = alpha * xi_grid
    x[-1] = radius
    rho, q, phi = _eval_scaled(sol, rho_c, alpha, xi_grid)
    table = np.column_stack([x, rho, q, phi])

    return PolytropeProfile(
        gamma=gamma,
        total_mass=total_mass,
        radius_bar_R=radius,
        rho_center=rho_c,
        eval_table=table,
        polytropic_index=n,
        _dimensionless=sol,
        _alpha=alpha,
    )


def _eval_scaled(sol: DimensionlessSolution, rho_c: float, alpha: float, xi):
    """(rho, q, phi) at dimensionless abscissas xi.

    Closed forms in theta: rho = rho_c theta^n, phi = -4 pi rho_c theta'/xi,
    q = (rho^gamma)_x = -x phi rho = 4 pi rho_c^2 alpha theta' theta^n.
    """
    xi = np.asarray(xi, dtype=float)
    n = sol.index_n
    theta, dtheta = sol.theta_dtheta(xi)
    theta = np.clip(theta, 0.0, None)
    rho = rho_c * theta**n
    q = 4.0 * math.pi * rho_c * rho_c * alpha * dtheta * theta**n
    q = np.minimum(q, 0.0)
    phi = np.empty_like(xi)
    near = xi < _XI_SERIES
    # -theta'/xi = 1/3 - n xi^2/30 + O(xi^4)
    phi[near] = 4.0 * math.pi * rho_c * (1.0 / 3.0 - n * xi[near] ** 2 / 30.0)
    phi[~near] = -4.0 * math.pi * rho_c * dtheta[~near] / xi[~near]
    # exact zeros on the boundary
    at_surface = xi >= sol.xi1
    rho[at_surface] = 0.0
    q[at_surface] = 0.0
    return rho, q, phi


def profile_eval(profile: PolytropeProfile, x):
    """Evaluate (rho, q, phi) at radii x in [0, R]; raises outside the support."""
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    slack = 1.0e-12 * profile.radius_bar_R
    if (x_arr < -slack).any() or (x_arr > profile.radius_bar_R + slack).any():
        raise DomainError(
            f"evaluation points outside [0, {profile.radius_bar_R!r}]"
        )
    xi = np.clip(x_arr / profile._alpha, 0.0, profile._dimensionless.xi1)
    rho, q, phi = _eval_scaled(
        profile._dimensionless, profile.rho_center, profile._alpha, xi
    )
    if np.isscalar(x) or np.asarray(x).ndim == 0:
        return float(rho[0]), float(q[0]), float(phi[0])
    return rho, q, phi


def verify_physical_vacuum(profile: PolytropeProfile, window_fraction: float = 0.05) -> HolderReport:
    """Fit the enthalpy exponent near the boundary.

    A physical vacuum boundary has rho^{gamma-1} vanishing linearly in
    R - x; the fit runs over the outer window_fraction of the support,
    excluding the boundary point itself, and passes iff the log-log slope
    lies in [0.95, 1.05].
    """
    table = profile.eval_table
    radius = profile.radius_bar_R
    x, rho = table[:, 0], table[:, 1]
    mask = (x >= (1.0 - window_fraction) * radius) & (x < radius) & (rho > 0.0)
    if int(mask.sum()) < 8:
        raise InsufficientResolutionError(
            f"only {int(mask.sum())} table points in the outer "
            f"{window_fraction:.0%} window; need at least 8"
        )
    logs = np.log(radius - x[mask])
    logw = (profile.gamma - 1.0) * np.log(rho[mask])
    slope = float(np.polyfit(logs, logw, 1)[0])
    window = (float(x[mask].min()), float(x[mask].max()))
    return HolderReport(slope=slope, window=window, passed=0.95 <= slope <= 1.05)
