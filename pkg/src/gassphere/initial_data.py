"""Admissible initial data on the equilibrium grid.

Perturbation families are polynomial deformations of the equilibrium flow
map; amplitudes within |epsilon| <= 0.05 stay inside the regime where the
stability theory applies, but larger values are accepted and left to the
dynamics (they fail with mesh tangling or energy blow-up, which is the
documented failure path).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson, fixed_quad

from .errors import (
    ConfigError,
    InvalidDensityError,
    InvalidPerturbationError,
    MassMismatchError,
)
from .polytrope import PolytropeProfile
from .scheme import BackgroundGrid, LagrangianState, apply_closure, boundary_stress

__all__ = [
    "PerturbationSpec",
    "CompatibilityReport",
    "FAMILIES",
    "build_perturbation",
    "mass_match_map",
    "check_compatibility",
]

FAMILIES = ("radial_dilation", "polynomial_bump", "velocity_kick", "composite")


@dataclass(frozen=True)
class PerturbationSpec:
    """family, amplitude and family-specific shape parameters.

    radial_dilation: shape (a,), default (1,):  r0 = x (1 + eps (1 - a s^2))
    polynomial_bump: shape (p, q), default (2, 1): r0 = x (1 + eps s^p (1-s^2)^q)
    velocity_kick:   r0 = x,  v0 = eps x (1 - s^2)
    composite:       shape (a,): dilation profile plus the velocity kick
    with s = x / R.
    """

    family: str
    epsilon: float
    shape_params: tuple = ()

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"family {self.family!r} not one of {FAMILIES}")
        if not np.isfinite(self.epsilon):
            raise ConfigError(f"epsilon = {self.epsilon} is not finite")
        object.__setattr__(self, "shape_params", tuple(self.shape_params))


@dataclass(frozen=True)
class CompatibilityReport:
    v_center: float
    boundary_stress_residual: float
    boundary_stress_scale: float
    mass_residual: float
    min_rx: float
    max_rx: float
    passed: bool


def _family_fields(spec: PerturbationSpec, x: np.ndarray, radius: float):
    """Raw (r0, v0) before the boundary closure overwrites the last node."""
    s = x / radius
    eps = spec.epsilon
    if spec.family == "radial_dilation":
        (a,) = spec.shape_params or (1.0,)
        return x * (1.0 + eps * (1.0 - a * s * s)), np.zeros_like(x)
    if spec.family == "polynomial_bump":
        p, q = spec.shape_params or (2.0, 1.0)
        if p < 1 or q < 1:
            raise ConfigError("polynomial_bump needs shape exponents p, q >= 1")
        return x * (1.0 + eps * s**p * (1.0 - s * s) ** q), np.zeros_like(x)
    if spec.family == "velocity_kick":
        return x.copy(), eps * x * (1.0 - s * s)
    # composite
    (a,) = spec.shape_params or (1.0,)
    r0 = x * (1.0 + eps * (1.0 - a * s * s))
    return r0, eps * x * (1.0 - s * s)


def build_perturbation(
    profile: PolytropeProfile, grid: BackgroundGrid, spec: PerturbationSpec
) -> LagrangianState:
    """Initial state for the scheme; nodes 0 and N satisfy the constraints.

    The raw family values at the last two nodes become the closure constants
    for the whole trajectory, which reproduces the raw r0_N at t = 0 and
    makes the initial boundary stress vanish identically.
    """
    r0, v0 = _family_fields(spec, grid.x, profile.radius_bar_R)
    dr = np.diff(r0)
    if not (dr > 0.0).all():
        bad = int(np.argmin(dr / grid.dx))
        raise InvalidPerturbationError(
            f"perturbation tangles the initial mesh: min dr/dx = "
            f"{float((dr / grid.dx).min()):.3e} at cell {bad}"
        )
    state = LagrangianState(
        t=0.0, r=r0, v=v0, r0_tail=(float(r0[-2]), float(r0[-1]))
    )
    apply_closure(grid, state)
    return state


def mass_match_map(
    rho0,
    R0: float,
    profile: PolytropeProfile,
    grid: BackgroundGrid,
    mass_tol: float = 1.0e-8,
) -> np.ndarray:
    """Radii r0_n enclosing the same mass as label x_n does at equilibrium.

    rho0 is a callable density on [0, R0].  The cumulative mass of rho0 is
    tabulated densely and each node solved by bisection inside its bracket;
    the total must agree with the background mass within mass_tol.
    """
    if not (np.isfinite(R0) and R0 > 0.0):
        raise ConfigError(f"R0 = {R0} must be positive")
    npts = max(8192, 32 * grid.n_cells) + 1
    s = np.linspace(0.0, R0, npts)
    vals = np.asarray(rho0(s), dtype=float)
    if vals.shape != s.shape or not np.isfinite(vals).all() or (vals < 0.0).any():
        raise InvalidDensityError("rho0 must be finite and nonnegative on [0, R0]")
    integrand = vals * s * s
    cum = np.concatenate([[0.0], cumulative_simpson(integrand, x=s)])

    total = 4.0 * np.pi * cum[-1]
    M = grid.total_mass
    if abs(total - M) > mass_tol * max(1.0, M):
        raise MassMismatchError(
            f"initial density carries mass {total:.12g}, background has "
            f"{M:.12g}; difference exceeds {mass_tol:g}"
        )

    # equilibrium enclosed mass is exactly phi(x) x^3 / (4 pi)
    targets = grid.phi * grid.x**3 / (4.0 * np.pi)
    r_map = np.empty_like(grid.x)
    r_map[0] = 0.0
    r_map[-1] = R0
    for n in range(1, grid.n_cells):
        m_n = targets[n]
        i = int(np.searchsorted(cum, m_n, side="right") - 1)
        i = min(max(i, 0), npts - 2)

        def local_mass(rr, _i=i):
            if rr <= s[_i]:
                return cum[_i]
            val, _ = fixed_quad(lambda tt: rho0(tt) * tt * tt, s[_i], rr, n=5)
            return cum[_i] + val

        lo, hi = s[i], s[i + 1]
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if local_mass(mid) < m_n:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1.0e-15 * max(1.0, hi):
                break
        r_map[n] = 0.5 * (lo + hi)
    if not (np.diff(r_map) > 0.0).all():
        raise InvalidDensityError(
            "mass-matched radii are not strictly increasing; rho0 likely has "
            "a vacuum interval"
        )
    return r_map


def check_compatibility(
    state0: LagrangianState, background: BackgroundGrid
) -> CompatibilityReport:
    """Residuals of the constraints the scheme assumes at t = 0."""
    v_center = abs(float(state0.v[0]))
    b_res = abs(boundary_stress(background, state0))
    b_scale = 1.0e-12 * (abs(float(state0.v[-2])) / background.h + 1.0)

    # mass of the Eulerian reconstruction against the background mass;
    # O(h^2) quadrature residual, reported for information
    from .diagnostics import to_eulerian

    snap = to_eulerian(background, state0)
    total = 4.0 * np.pi * np.trapezoid(snap.rho * snap.r**2, snap.r)
    mass_residual = abs(total - background.total_mass) / background.total_mass

    rx = np.diff(state0.r) / background.dx
    passed = (
        v_center == 0.0 and b_res <= b_scale and float(rx.min()) > 0.0
    )
    return CompatibilityReport(
        v_center=v_center,
        boundary_stress_residual=b_res,
        boundary_stress_scale=b_scale,
        mass_residual=float(mass_residual),
        min_rx=float(rx.min()),
        max_rx=float(rx.max()),
        passed=passed,
    )
