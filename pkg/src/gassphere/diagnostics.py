"""Norms, energies, Eulerian reconstruction and decay-rate fitting.

Derivative quantities are backward first differences against the stored
abscissa spacings; integrals are uniform-h Riemann sums, with node sums
running over every node and cell sums attributed to the right endpoint.
Conventions match the scheme module's energy functional so the two stay
comparable within fixed constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .errors import ConfigError, InsufficientResolutionError, SolverFailureError
from .scheme import BackgroundGrid, LagrangianState, discrete_energy_functional

__all__ = [
    "DiagnosticRecord",
    "DecayExponentTable",
    "DecayFitResult",
    "EulerianSnapshot",
    "weighted_norms",
    "physical_energy",
    "to_eulerian",
    "density_deviation",
    "theoretical_exponents",
    "fit_decay",
    "record_fields",
]


@dataclass(frozen=True)
class DiagnosticRecord:
    """One sampled row of the time series."""

    t: float
    E_N: float  # high-order functional of the scheme (sup + accel + curvature)
    E_script: float  # the L2-flavored functional with the outer-region sup
    F_alpha: float  # E_N plus the alpha-weighted curvature norm
    sup_r_minus_x: float
    sup_v: float
    sup_rx_minus_1: float
    sup_vx: float
    L2_v: float  # sqrt(h sum v^2)
    L2_xvx: float  # sqrt(h sum (x v_x)^2)
    L2_weighted_v: float  # the sum h sum x^2 rho v^2 itself
    L2_weighted_r: float  # h sum x^2 rho^gamma [(r/x-1)^2 + (r_x-1)^2]
    R_t: float  # boundary radius r_N
    R_residual: float  # |r_N - R|
    boundary_accel: float  # backward difference of sampled v_N
    phys_energy: float
    dissipation_rate: float


def record_fields():
    return [f.name for f in fields(DiagnosticRecord)]


@dataclass(frozen=True)
class EulerianSnapshot:
    r: np.ndarray
    rho: np.ndarray
    u: np.ndarray


@dataclass(frozen=True)
class DecayExponentTable:
    """Theoretical decay exponents of the norms, as functions of (gamma, theta).

    Rates are for the quantities themselves (norms, not their squares); the
    refined entries need the data-regularity index alpha in [gamma-1, gamma).
    """

    gamma: float
    theta: float
    theta_cap: float
    p_r_Linf: float  # sup |r - x|
    p_u_Linf: float  # sup |u|
    p_ur_Linf: float  # sup |(u_r, u/r)|
    p_rho_weighted: float  # weighted density deviation
    p_v_L2: float  # ||v||_L2
    p_rminusx_L2: float  # ||r - x||_L2
    alpha: float | None = None
    kappa: float | None = None
    b1: float | None = None
    b2: float | None = None
    p_u_Linf_refined: float | None = None
    p_ur_Linf_refined: float | None = None
    p_rho_weighted_refined: float | None = None


@dataclass(frozen=True)
class DecayFitResult:
    quantity: str
    window: tuple
    fitted_exponent: float
    fit_residual: float
    theoretical_floor: float
    passed: bool
    note: str = ""


def weighted_norms(
    bg: BackgroundGrid,
    state: LagrangianState,
    accel: np.ndarray,
    alpha: float | None = None,
    delta: float = 0.5,
    prev_t: float | None = None,
    prev_v_end: float | None = None,
) -> DiagnosticRecord:
    """Every diagnostic field at one state; accel must come from rhs.

    alpha (default gamma - 1, admissible [0, 2 gamma - 1]) selects the
    curvature weight of F_alpha.  delta in (0, 1) splits the domain for the
    interval-restricted sup of r_x - 1, taken over cells with x >= delta R.
    boundary_accel differences the sampled boundary velocity, so the caller
    supplies the previous sample time and v_N; the first record carries 0.0.
    """
    g = bg.gamma
    if alpha is None:
        alpha = g - 1.0
    if not (0.0 <= alpha <= 2.0 * g - 1.0):
        raise ConfigError(f"alpha = {alpha} outside [0, 2*gamma - 1 = {2.0 * g - 1.0}]")
    if not (0.0 < delta < 1.0):
        raise ConfigError(f"delta = {delta} outside (0, 1)")
    N = bg.n_cells
    x, r, v = bg.x, state.r, state.v
    h = bg.h

    rx = np.diff(r) / bg.dx
    vx = np.diff(v) / bg.dx
    sup_rx = float(np.max(np.abs(rx - 1.0)))
    sup_vx = float(np.max(np.abs(vx)))

    ratio = np.ones_like(r)
    ratio[1:] = r[1:] / x[1:]
    ratio[0] = ratio[1]

    rho_i = bg.rho[1:N]
    rxx = (rx[1:] - rx[:-1]) / h
    dratio = (ratio[1:N] - ratio[: N - 1]) / h
    dratio[0] = 0.0
    curv = float(np.sum(h * rho_i ** (2.0 * g - 1.0) * (rxx**2 + dratio**2)))
    accel_term = float(np.sum(h * rho_i * accel[1:N] ** 2))

    e_n = discrete_energy_functional(bg, state, accel)
    f_alpha = e_n + float(np.sum(h * rho_i ** (2.0 * g - 1.0 - alpha) * rxx**2))

    sup_r_minus_x = float(np.max(np.abs(r - x)))
    sup_v = float(np.max(np.abs(v)))
    L2_v = math.sqrt(float(np.sum(h * v**2)))
    xvx = x[1:] * vx
    L2_xvx = math.sqrt(float(np.sum(h * xvx**2)))

    low_r = float(np.sum(h * (r - x) ** 2) + np.sum(h * (x[1:] * (rx - 1.0)) ** 2))
    low_v = L2_v**2 + L2_xvx**2
    outer = x[1:] >= delta * bg.radius
    sup_rx_outer = float(np.max(np.abs(rx[outer] - 1.0)))
    e_script = low_r + low_v + sup_rx_outer**2 + curv + accel_term

    L2_weighted_v = float(np.sum(h * x**2 * bg.rho * v**2))
    L2_weighted_r = float(
        np.sum(h * x[1:] ** 2 * bg.rho_gamma[1:] * ((ratio[1:] - 1.0) ** 2 + (rx - 1.0) ** 2))
    )

    energy, diss = physical_energy(bg, state)
    r_t = float(r[-1])
    if prev_t is None or prev_v_end is None or state.t <= prev_t:
        bnd_accel = 0.0
    else:
        bnd_accel = (float(v[-1]) - prev_v_end) / (state.t - prev_t)

    return DiagnosticRecord(
        t=state.t,
        E_N=e_n,
        E_script=e_script,
        F_alpha=f_alpha,
        sup_r_minus_x=sup_r_minus_x,
        sup_v=sup_v,
        sup_rx_minus_1=sup_rx,
        sup_vx=sup_vx,
        L2_v=L2_v,
        L2_xvx=L2_xvx,
        L2_weighted_v=L2_weighted_v,
        L2_weighted_r=L2_weighted_r,
        R_t=r_t,
        R_residual=abs(r_t - bg.radius),
        boundary_accel=bnd_accel,
        phys_energy=energy,
        dissipation_rate=diss,
    )


def physical_energy(bg: BackgroundGrid, state: LagrangianState):
    """Relative physical energy and instantaneous dissipation rate.

    The energy density is the kinetic term plus the potential bracket

        (x/r)^{2 gamma - 2} r_x^{1 - gamma}/(gamma - 1) + (x/r)^2 r_x - 4 x/r

    shifted by its equilibrium value, so the equilibrium has energy zero and
    small admissible states have nonnegative energy.
    """
    g = bg.gamma
    x, r, v = bg.x, state.r, state.v
    h = bg.h

    y = x[1:] / r[1:]  # x/r at nodes 1..N
    rxc = np.diff(r) / bg.dx  # r_x on cells, attributed to the right node
    bracket = (
        y ** (2.0 * g - 2.0) * rxc ** (1.0 - g) / (g - 1.0)
        + y * y * rxc
        - 4.0 * y
        - (4.0 - 3.0 * g) / (g - 1.0)
    )
    kin = 0.5 * x[1:] ** 2 * bg.rho[1:] * v[1:] ** 2
    energy = float(np.sum(h * (kin + x[1:] ** 2 * bg.rho_gamma[1:] * bracket)))

    # dissipation: (4 lam1/3)(r^4/r_x)((v/r)_x)^2 + lam2 ((r^2 v)_x)^2/(r_x r^2)
    vr = np.zeros_like(r)
    vr[1:] = v[1:] / r[1:]
    vr[0] = vr[1]  # v/r extends evenly to the center
    dvr = np.diff(vr) / bg.dx
    r2v = r * r * v
    dr2v = np.diff(r2v) / bg.dx
    diss = (4.0 * bg.lambda1 / 3.0) * (r[1:] ** 4 / rxc) * dvr**2 + bg.lambda2 * dr2v**2 / (
        rxc * r[1:] ** 2
    )
    return energy, float(np.sum(h * diss))


def to_eulerian(bg: BackgroundGrid, state: LagrangianState) -> EulerianSnapshot:
    """Density and velocity on the moved radii r_n.

    rho(r_n) = rho_n (x_n/r_n)^2 / (dr_n/dx_n); the center uses the limit
    (x_1/r_1)^3 and the vacuum node is exactly zero.
    """
    N = bg.n_cells
    r, v = state.r, state.v
    rho = np.empty_like(r)
    rx = np.diff(r) / bg.dx
    rho[1:] = bg.rho[1:] * (bg.x[1:] / r[1:]) ** 2 / rx
    rho[0] = bg.rho[0] * (bg.x[1] / r[1]) ** 3
    rho[N] = 0.0
    return EulerianSnapshot(r=r.copy(), rho=rho, u=v.copy())


def density_deviation(
    bg: BackgroundGrid, state: LagrangianState, weight_exponent: float | None = None
) -> float:
    """max over n < N of rho_bar^w |rho(r_n) - rho_bar(x_n)|.

    The default weight exponent is (3 gamma - 6)/4, under which the deviation
    of admissible states stays bounded up to the vacuum boundary.
    """
    if weight_exponent is None:
        weight_exponent = (3.0 * bg.gamma - 6.0) / 4.0
    snap = to_eulerian(bg, state)
    N = bg.n_cells
    dev = np.abs(snap.rho[:N] - bg.rho[:N])
    return float(np.max(bg.rho[:N] ** weight_exponent * dev))


def theoretical_exponents(
    gamma: float, theta: float, alpha: float | None = None
) -> DecayExponentTable:
    """Decay exponents from the stability theory.

    Base rates need 0 < theta < 2(gamma-1)/(3 gamma); the refined family
    additionally needs alpha in [gamma-1, gamma) and theta < 2(gamma-alpha)/gamma.
    """
    if not (1.0 < gamma):
        raise ConfigError(f"gamma = {gamma} must exceed 1")
    cap = 2.0 * (gamma - 1.0) / (3.0 * gamma)
    if not (0.0 < theta < cap):
        raise ConfigError(f"theta = {theta} outside (0, {cap:.6g})")

    base = dict(
        gamma=gamma,
        theta=theta,
        theta_cap=cap,
        p_r_Linf=(gamma - 1.0) / gamma - theta / 2.0,
        p_u_Linf=(3.0 * gamma - 2.0) / (4.0 * gamma) - theta / 2.0,
        p_ur_Linf=(gamma - 1.0) / (2.0 * gamma) - theta / 2.0,
        p_rho_weighted=(gamma - 1.0) / (2.0 * gamma) - theta / 2.0,
        p_v_L2=(2.0 * gamma - 1.0) / (2.0 * gamma) - theta / 2.0,
        p_rminusx_L2=3.0 * (gamma - 1.0) / (2.0 * gamma) - theta / 2.0,
    )
    if alpha is None:
        return DecayExponentTable(**base)

    if not (gamma - 1.0 <= alpha < gamma):
        raise ConfigError(f"alpha = {alpha} outside [gamma-1, gamma) = [{gamma-1.0}, {gamma})")
    cap_a = 2.0 * (gamma - alpha) / gamma
    if not (theta < cap_a):
        raise ConfigError(
            f"theta = {theta} must be below 2(gamma-alpha)/gamma = {cap_a:.6g}"
        )
    if alpha == gamma - 1.0:
        kappa = 0.0
    else:
        kappa = min(alpha - (gamma - 1.0), gamma - 1.0) / gamma - theta
    A = kappa / 2.0 + (4.0 * gamma - 3.0) / (2.0 * gamma) - 1.5 * theta
    b1 = (
        min(
            max(A * (alpha + 1.0) / (2.0 * gamma - 1.0 + alpha),
                1.5 * kappa + (2.0 * gamma - 1.0) / (2.0 * gamma) - theta / 2.0),
            A,
        )
        + (2.0 * gamma - 1.0) / gamma
        - theta
    )
    b2 = min(A, kappa / 4.0 + (10.0 * gamma - 9.0) / (4.0 * gamma) - 2.25 * theta) + A
    return DecayExponentTable(
        **base,
        alpha=alpha,
        kappa=kappa,
        b1=b1,
        b2=b2,
        p_u_Linf_refined=(8.0 * gamma - 5.0) / (4.0 * gamma) + kappa / 4.0 - 1.25 * theta,
        p_ur_Linf_refined=0.5 * min(b1, b2),
        p_rho_weighted_refined=kappa / 2.0 + (2.0 * gamma - 1.0) / (2.0 * gamma) - theta / 2.0,
    )


def fit_decay(
    t: np.ndarray,
    y: np.ndarray,
    window: tuple,
    floor: float,
    slack: float = 0.05,
    quantity: str = "",
) -> DecayFitResult:
    """Least-squares decay exponent of y against (1 + t) on a log-log window.

    The window must start at t >= 5 and contain at least 16 samples.  A
    window in which every sample sits below the floating-noise threshold
    (1e-13 of the series peak) passes with an infinite fitted exponent.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.shape != y.shape or t.ndim != 1:
        raise ConfigError("t and y must be one-dimensional arrays of equal length")
    t_a, t_b = float(window[0]), float(window[1])
    if not (t_b > t_a >= 5.0):
        raise ConfigError(f"window {window} must satisfy 5 <= t_a < t_b")
    mask = (t >= t_a) & (t <= t_b)
    if int(mask.sum()) < 16:
        raise InsufficientResolutionError(
            f"only {int(mask.sum())} samples in window [{t_a}, {t_b}]; need 16"
        )
    yw = y[mask]
    tw = t[mask]
    noise = 1.0e-13 * float(np.max(np.abs(y))) if np.any(y != 0.0) else 0.0
    if float(np.max(np.abs(yw))) <= noise:
        return DecayFitResult(
            quantity=quantity,
            window=(t_a, t_b),
            fitted_exponent=float("inf"),
            fit_residual=0.0,
            theoretical_floor=floor,
            passed=True,
            note="decayed below floating noise",
        )
    if (yw <= 0.0).any():
        raise SolverFailureError(
            f"series {quantity!r} has nonpositive samples above the noise "
            "threshold inside the fit window; cannot fit a power law"
        )
    lx = np.log1p(tw)
    ly = np.log(yw)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = float(np.sqrt(np.mean((ly - (slope * lx + intercept)) ** 2)))
    fitted = -float(slope)
    return DecayFitResult(
        quantity=quantity,
        window=(t_a, t_b),
        fitted_exponent=fitted,
        fit_residual=resid,
        theoretical_floor=floor,
        passed=fitted >= floor - slack,
    )
