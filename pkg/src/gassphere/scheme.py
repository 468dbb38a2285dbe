"""Semi-discrete Lagrangian finite-difference scheme on the equilibrium grid.

State is the particle radius field r_n(t) and velocity v_n(t) on the uniform
reference grid x_n = n h, h = R / N.  Interior nodes obey

    rho_n (x_n/r_n)^2 dv_n/dt = q_n (x_n^4/r_n^4 - 1)
                                + (P_{n+1} - P_n)/h + (S_{n+1} - S_n)/h

with pressure flux P_m = rho_m^gamma [1 - (h/(r_m - r_{m-1}))^gamma
(x_{m-1}/r_{m-1})^{2 gamma}] and viscous flux S_m = B_m + 4 lambda1
v_{m-1}/r_{m-1}, B_m = mu (v_m - v_{m-1})/(r_m - r_{m-1}) +
(2 lambda2 - 4 lambda1/3) v_{m-1}/r_{m-1}.  The last node is slaved to the
interior by the zero-stress closure, which makes B_N vanish identically.

All divisions of r-differences by the mesh width are computed against the
stored abscissa differences x_m - x_{m-1} rather than the scalar h, so the
equilibrium r = x is an exact fixed point in floating point.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, MeshTanglingError
from .polytrope import PolytropeProfile, profile_eval

__all__ = [
    "BackgroundGrid",
    "LagrangianState",
    "sample_background",
    "equilibrium_state",
    "rhs",
    "explicit_accel",
    "viscous_tridiagonal",
    "close_boundary",
    "close_arrays",
    "apply_closure",
    "boundary_stress",
    "discrete_energy_functional",
    "discrete_G",
]


@dataclass(frozen=True)
class BackgroundGrid:
    """Equilibrium quantities sampled on the uniform reference grid."""

    gamma: float
    total_mass: float
    radius: float
    h: float
    x: np.ndarray  # (N+1,), x_0 = 0, x_N = R
    dx: np.ndarray  # (N,), dx[m-1] = x_m - x_{m-1}
    rho: np.ndarray  # (N+1,), rho[N] = 0 exactly
    rho_gamma: np.ndarray  # rho**gamma
    q: np.ndarray  # (rho^gamma)_x = -x phi rho, q[0] = q[N] = 0
    phi: np.ndarray  # mean interior density x^{-3} integral
    lambda1: float
    lambda2: float
    mu: float  # 4 lambda1/3 + lambda2

    @property
    def n_cells(self) -> int:
        return self.x.size - 1


@dataclass
class LagrangianState:
    """Radii and velocities; nodes 0 and N are constrained, not evolved.

    r0_tail stores the initial radii (r0_{N-1}, r0_N) that parameterize the
    boundary closure for the whole trajectory.
    """

    t: float
    r: np.ndarray
    v: np.ndarray
    r0_tail: tuple = field(default=None)

    def copy(self) -> "LagrangianState":
        return LagrangianState(self.t, self.r.copy(), self.v.copy(), self.r0_tail)


def sample_background(
    profile: PolytropeProfile, N: int, lambda1: float, lambda2: float
) -> BackgroundGrid:
    """Sample the profile at x_n = n R/N and freeze viscosity parameters."""
    if not isinstance(N, (int, np.integer)) or N < 16:
        raise ConfigError(f"N = {N} must be an integer >= 16")
    if not (lambda1 > 0.0 and lambda2 > 0.0):
        raise ConfigError("viscosity coefficients lambda1, lambda2 must be positive")
    radius = profile.radius_bar_R
    x = np.linspace(0.0, radius, N + 1)
    rho, q, phi = profile_eval(profile, x)
    rho = rho.copy()
    q = q.copy()
    rho[N] = 0.0
    q[0] = 0.0
    q[N] = 0.0
    return BackgroundGrid(
        gamma=profile.gamma,
        total_mass=profile.total_mass,
        radius=radius,
        h=radius / N,
        x=x,
        dx=np.diff(x),
        rho=rho,
        rho_gamma=rho**profile.gamma,
        q=q,
        phi=phi,
        lambda1=lambda1,
        lambda2=lambda2,
        mu=4.0 * lambda1 / 3.0 + lambda2,
    )


def equilibrium_state(bg: BackgroundGrid) -> LagrangianState:
    """The exact fixed point r = x, v = 0."""
    return LagrangianState(
        t=0.0,
        r=bg.x.copy(),
        v=np.zeros_like(bg.x),
        r0_tail=(float(bg.x[-2]), float(bg.x[-1])),
    )


def _check_mesh(r: np.ndarray) -> np.ndarray:
    dr = np.diff(r)
    if not (dr > 0.0).all():
        bad = int(np.argmin(dr))
        raise MeshTanglingError(
            f"mesh tangled: r_{bad + 1} - r_{bad} = {dr[bad]:.3e} <= 0"
        )
    return dr


def explicit_accel(bg: BackgroundGrid, r: np.ndarray) -> np.ndarray:
    """Pressure plus gravity acceleration at interior nodes, indices 1..N-1.

    Independent of v and of the slaved radius r_N: the outermost pressure
    flux P_N vanishes with the vacuum density.
    """
    N = bg.n_cells
    g = bg.gamma
    dr = _check_mesh(r)
    d = bg.dx / dr  # d[m-1] = (x_m - x_{m-1})/(r_m - r_{m-1})

    P = np.zeros(N + 1)
    # interior faces m = 2..N-1 use the label ratio at m-1; the innermost
    # face uses the cell ratio, the continuum limit of x/r at the center
    P[2:N] = bg.rho_gamma[2:N] * (
        1.0 - d[1 : N - 1] ** g * (bg.x[1 : N - 1] / r[1 : N - 1]) ** (2.0 * g)
    )
    P[1] = bg.rho_gamma[1] * (1.0 - d[0] ** (3.0 * g))

    y = bg.x[1:N] / r[1:N]
    grav = bg.q[1:N] * (y**4 - 1.0)
    W = bg.rho[1:N] * y * y
    return (grav + (P[2 : N + 1] - P[1:N]) / bg.h) / W


def viscous_tridiagonal(bg: BackgroundGrid, r: np.ndarray):
    """Tridiagonal interior operator L with (L v)_n the viscous acceleration.

    Returns (sub, diag, sup) for unknowns v_1..v_{N-1}; the slaved boundary
    flux S_N = 4 lambda1 v_{N-1}/r_{N-1} and the center convention
    v_0/r_0 = 0 are already folded in, so L never references v_0 or v_N.
    """
    N = bg.n_cells
    mu = bg.mu
    lam = 2.0 * bg.lambda2 + 8.0 * bg.lambda1 / 3.0
    dr = _check_mesh(r)

    c = mu / dr  # c[m-1] = mu / (r_m - r_{m-1}), m = 1..N
    ginner = lam / r[1 : N - 1]  # lam / r_{m-1} for faces m = 2..N-1

    diag = np.empty(N - 1)
    # flux difference (S_{n+1} - S_n) / h, assembled per neighbor
    diag[: N - 2] = -c[: N - 2] - c[1 : N - 1] + ginner
    diag[N - 2] = -c[N - 2] + 4.0 * bg.lambda1 / r[N - 1]
    sub = c[1 : N - 1] - ginner  # row n coefficient on v_{n-1}, n = 2..N-1
    sup = c[1 : N - 1].copy()  # row n coefficient on v_{n+1}, n = 1..N-2

    y = bg.x[1:N] / r[1:N]
    scale = 1.0 / (bg.h * bg.rho[1:N] * y * y)
    return sub * scale[1:], diag * scale, sup * scale[: N - 2]


def _tri_matvec(sub, diag, sup, v_int):
    out = diag * v_int
    out[1:] += sub * v_int[:-1]
    out[:-1] += sup * v_int[1:]
    return out


def rhs(bg: BackgroundGrid, state: LagrangianState) -> np.ndarray:
    """Accelerations dv_n/dt; entries 0 and N are zero (constrained nodes)."""
    a = np.zeros_like(state.r)
    sub, diag, sup = viscous_tridiagonal(bg, state.r)
    a[1:-1] = explicit_accel(bg, state.r) + _tri_matvec(sub, diag, sup, state.v[1:-1])
    return a


def close_boundary(bg: BackgroundGrid, state: LagrangianState, r0_N: float, r0_Nm1: float):
    """Slaved values (r_N, v_N) that keep the boundary stress B_N at zero.

    r_N = r_{N-1} + D (r0_{N-1}/r_{N-1})^beta with D = r0_N - r0_{N-1} and
    beta = (2 lambda2 - 4 lambda1/3)/mu; v_N is the exact time derivative of
    that relation.
    """
    r_prev = float(state.r[-2])
    v_prev = float(state.v[-2])
    if r_prev <= 0.0:
        raise MeshTanglingError(f"mesh tangled: r_(N-1) = {r_prev:.3e} <= 0")
    beta = (2.0 * bg.lambda2 - 4.0 * bg.lambda1 / 3.0) / bg.mu
    D = r0_N - r0_Nm1
    fac = (r0_Nm1 / r_prev) ** beta
    r_end = r_prev + D * fac
    v_end = v_prev * (1.0 - beta * D * fac / r_prev)
    return float(r_end), float(v_end)


def close_arrays(bg: BackgroundGrid, r: np.ndarray, v: np.ndarray, r0_Nm1: float, r0_N: float) -> None:
    """In-place slaving of nodes 0 and N on raw arrays."""
    r_prev = r[-2]
    if r_prev <= 0.0:
        raise MeshTanglingError(f"mesh tangled: r_(N-1) = {r_prev:.3e} <= 0")
    beta = (2.0 * bg.lambda2 - 4.0 * bg.lambda1 / 3.0) / bg.mu
    D = r0_N - r0_Nm1
    fac = (r0_Nm1 / r_prev) ** beta
    r[0] = 0.0
    v[0] = 0.0
    r[-1] = r_prev + D * fac
    v[-1] = v[-2] * (1.0 - beta * D * fac / r_prev)


def apply_closure(bg: BackgroundGrid, state: LagrangianState) -> None:
    """Overwrite the slaved nodes in place from the stored closure constants."""
    r0_Nm1, r0_N = state.r0_tail
    close_arrays(bg, state.r, state.v, r0_Nm1, r0_N)


def boundary_stress(bg: BackgroundGrid, state: LagrangianState) -> float:
    """B_N evaluated from the state; at most roundoff after the closure."""
    r, v = state.r, state.v
    dr = r[-1] - r[-2]
    if dr == 0.0 or r[-2] <= 0.0:
        raise MeshTanglingError("degenerate last cell in boundary_stress")
    return float(
        bg.mu * (v[-1] - v[-2]) / dr
        + (2.0 * bg.lambda2 - 4.0 * bg.lambda1 / 3.0) * v[-2] / r[-2]
    )


def discrete_energy_functional(
    bg: BackgroundGrid, state: LagrangianState, accel: np.ndarray
) -> float:
    """Discrete analogue of the high-order energy functional.

    max_n [(dr_n/dx_n - 1)^2 + (dv_n/dx_n)^2]
      + h sum rho_n a_n^2
      + h sum rho_n^{2 gamma - 1} [r_xx^2 + ((r/x)_x)^2]

    with the center convention r_0/x_0 = r_1/x_1 in the ratio difference.
    """
    N = bg.n_cells
    r, v = state.r, state.v
    dr = np.diff(r)
    dv = np.diff(v)
    rx = dr / bg.dx
    state_part = float(np.max((rx - 1.0) ** 2 + (dv / bg.dx) ** 2))

    w = bg.h * bg.rho[1:N]
    accel_part = float(np.sum(w * accel[1:N] ** 2))

    # second derivative as the difference of one-sided slopes; identical to
    # (r_{n+1} - 2 r_n + r_{n-1})/h^2 on the uniform grid and exactly zero
    # at equilibrium
    rxx = (rx[1:] - rx[:-1]) / bg.h
    ratio = r[1:] / bg.x[1:]
    dratio = np.empty(N - 1)
    dratio[0] = 0.0  # r_0/x_0 := r_1/x_1
    dratio[1:] = (ratio[1 : N - 1] - ratio[: N - 2]) / bg.h
    wcurv = bg.h * bg.rho[1:N] ** (2.0 * bg.gamma - 1.0)
    curv_part = float(np.sum(wcurv * (rxx**2 + dratio**2)))

    return state_part + accel_part + curv_part


def discrete_G(bg: BackgroundGrid, state: LagrangianState) -> np.ndarray:
    """Log of the discrete Jacobian, ln(dr_n/dx_n) + 2 ln(r_{n-1}/x_{n-1}).

    Entries n = 1..N with the center convention r_0/x_0 = r_1/x_1; a uniform
    dilation r = lam x gives 3 ln(lam) at every node.
    """
    r = state.r
    dr = np.diff(r)
    if not (dr > 0.0).all():
        raise MeshTanglingError("mesh tangled in discrete_G")
    ratio_prev = np.empty(r.size - 1)
    ratio_prev[0] = r[1] / bg.x[1]
    ratio_prev[1:] = r[1:-1] / bg.x[1:-1]
    return np.log(dr / bg.dx) + 2.0 * np.log(ratio_prev)
