"""Time integration: explicit RK4 and IMEX schemes sharing one stepping core.

The IMEX splitting treats exactly the velocity-linear viscous terms
implicitly (one tridiagonal solve per stage, coefficients frozen at the
stage's start) and pressure plus gravity explicitly.  The same machinery
drives the nonlinear scheme and the tangent system of the linearized module
through a small system adapter, so the linear flow is the exact derivative
of the nonlinear stepped map at the equilibrium.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg.lapack import dgtsv

from . import scheme
from .errors import BlowUpError, ConfigError, SolverFailureError

__all__ = ["StepPolicy", "RunResult", "step", "run"]

_MODES = ("explicit_rk4", "imex_be", "imex_cn")

# default ceiling on the adaptive step
_DT_CEIL = 1.0e-3
# discrete energy runaway factor for the blow-up monitor
_BLOWUP_FACTOR = 1.0e4


@dataclass
class StepPolicy:
    """How to advance in time.

    dt = None selects the adaptive step min(1e-3, h/(4 max|v| + 1)) for the
    imex modes and the diffusive stability limit for explicit_rk4.  A fixed
    explicit dt must respect dt <= cfl_safety h^2 min(rho)/(2 mu); the imex
    modes are unconditionally stable in the viscous terms and only need
    dt small against h/max|v|, which the adaptive step guarantees.
    """

    mode: str = "imex_cn"
    dt: float | None = None
    cfl_safety: float = 0.9
    t_end: float = 1.0
    max_steps: int = 10_000_000

    def __post_init__(self):
        if self.mode not in _MODES:
            raise ConfigError(f"mode {self.mode!r} not one of {_MODES}")
        if self.dt is not None and not (self.dt > 0.0 and np.isfinite(self.dt)):
            raise ConfigError(f"dt = {self.dt} must be positive or None")
        if not (0.0 < self.cfl_safety <= 1.0):
            raise ConfigError(f"cfl_safety = {self.cfl_safety} outside (0, 1]")
        if not (self.t_end > 0.0 and np.isfinite(self.t_end)):
            raise ConfigError(f"t_end = {self.t_end} must be positive")
        if self.max_steps < 1:
            raise ConfigError(f"max_steps = {self.max_steps} must be >= 1")


@dataclass
class RunResult:
    state: scheme.LagrangianState
    termination: str  # "t_end", "max_steps"
    steps: int
    samples: int


class _SingularSolve(Exception):
    pass


class _SchemeSystem:
    """Adapter exposing the nonlinear scheme to the generic stepper."""

    def __init__(self, bg: scheme.BackgroundGrid, r0_tail):
        self.bg = bg
        self.r0_tail = r0_tail

    def explicit_accel(self, p):
        return scheme.explicit_accel(self.bg, p)

    def tridiag(self, p):
        return scheme.viscous_tridiagonal(self.bg, p)

    def close(self, p, q):
        scheme.close_arrays(self.bg, p, q, self.r0_tail[0], self.r0_tail[1])

    def adaptive_dt(self, policy: "StepPolicy", q) -> float:
        return _effective_dt(policy, self.bg, q)


def _tri_matvec(sub, diag, sup, v):
    out = diag * v
    out[1:] += sub * v[:-1]
    out[:-1] += sup * v[1:]
    return out


def _tri_solve(sub, diag, sup, b):
    # (I - coef L) assembled by the caller; dgtsv pivots, deterministic
    _, _, _, x, info = dgtsv(sub, diag, sup, b)
    if info != 0:
        raise _SingularSolve(f"dgtsv info = {info}")
    return x


def _implicit_solve(sub, diag, sup, coef, b):
    """Solve (I - coef L) x = b for the interior tridiagonal operator L."""
    return _tri_solve(-coef * sub, 1.0 - coef * diag, -coef * sup, b)


def _stage_accel(system, p, q):
    sub, diag, sup = system.tridiag(p)
    return system.explicit_accel(p) + _tri_matvec(sub, diag, sup, q[1:-1])


def _attempt_step(system, p, q, dt, mode):
    """One step from (p, q); returns closed (p_new, q_new)."""
    if mode == "explicit_rk4":
        k1p, k1q = q, _stage_accel(system, p, q)
        ps, qs = p + (0.5 * dt) * k1p, q.copy()
        qs[1:-1] += (0.5 * dt) * k1q
        system.close(ps, qs)
        k2p, k2q = qs.copy(), _stage_accel(system, ps, qs)
        ps, qs = p + (0.5 * dt) * k2p, q.copy()
        qs[1:-1] += (0.5 * dt) * k2q
        system.close(ps, qs)
        k3p, k3q = qs.copy(), _stage_accel(system, ps, qs)
        ps, qs = p + dt * k3p, q.copy()
        qs[1:-1] += dt * k3q
        system.close(ps, qs)
        k4p, k4q = qs.copy(), _stage_accel(system, ps, qs)
        p_new = p + (dt / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        q_new = q.copy()
        q_new[1:-1] += (dt / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
        system.close(p_new, q_new)
        return p_new, q_new

    if mode == "imex_be":
        a = system.explicit_accel(p)
        sub, diag, sup = system.tridiag(p)
        q_new = q.copy()
        q_new[1:-1] = _implicit_solve(sub, diag, sup, dt, q[1:-1] + dt * a)
        p_new = p + dt * q_new
        system.close(p_new, q_new)
        return p_new, q_new

    # imex_cn: backward-Euler half-step predictor, trapezoidal corrector
    half = 0.5 * dt
    a0 = system.explicit_accel(p)
    sub0, diag0, sup0 = system.tridiag(p)
    q_star = q.copy()
    q_star[1:-1] = _implicit_solve(sub0, diag0, sup0, half, q[1:-1] + half * a0)
    p_star = p + half * q_star
    system.close(p_star, q_star)

    a1 = system.explicit_accel(p_star)
    sub1, diag1, sup1 = system.tridiag(p_star)
    rhs_vec = q[1:-1] + dt * a1 + half * _tri_matvec(sub1, diag1, sup1, q[1:-1])
    q_new = q.copy()
    q_new[1:-1] = _implicit_solve(sub1, diag1, sup1, half, rhs_vec)
    p_new = p + half * (q + q_new)
    system.close(p_new, q_new)
    return p_new, q_new


def _step_with_retries(system, p, q, dt, mode):
    """Halve dt on a singular implicit solve, up to 10 times."""
    for _ in range(11):
        try:
            p_new, q_new = _attempt_step(system, p, q, dt, mode)
            return p_new, q_new, dt
        except _SingularSolve:
            dt *= 0.5
    raise SolverFailureError(
        f"implicit solve stayed singular after 10 dt halvings (dt = {dt:g})"
    )


def _explicit_dt_limit(bg: scheme.BackgroundGrid) -> float:
    rho_min = float(bg.rho[1:-1].min())
    return bg.h * bg.h * rho_min / (2.0 * bg.mu)


def _effective_dt(policy: StepPolicy, bg, q) -> float:
    if policy.dt is not None:
        return policy.dt
    vmax = float(np.max(np.abs(q)))
    dt = min(_DT_CEIL, bg.h / (4.0 * vmax + 1.0))
    if policy.mode == "explicit_rk4":
        dt = min(dt, policy.cfl_safety * _explicit_dt_limit(bg))
    return dt


def step(
    bg: scheme.BackgroundGrid, state: scheme.LagrangianState, policy: StepPolicy
) -> scheme.LagrangianState:
    """Advance one step; the returned state satisfies the boundary closure."""
    if state.r0_tail is None:
        raise ConfigError("state has no closure constants (r0_tail)")
    system = _SchemeSystem(bg, state.r0_tail)
    dt = _effective_dt(policy, bg, state.v)
    if policy.mode == "explicit_rk4" and policy.dt is not None:
        limit = policy.cfl_safety * _explicit_dt_limit(bg)
        if policy.dt > limit:
            raise ConfigError(
                f"explicit dt = {policy.dt:g} exceeds the diffusive stability "
                f"limit {limit:g}"
            )
    p, q, taken = _step_with_retries(system, state.r, state.v, dt, policy.mode)
    return scheme.LagrangianState(state.t + taken, p, q, state.r0_tail)


def _run_loop(system, p, q, t0, policy, sample_interval, sample_cb):
    """Generic sampled run; sample_cb(t, p, q) fires at t0 and every interval.

    Steps are clipped so every sample time is hit exactly; sample_cb may
    raise to abort (blow-up monitoring plugs in there).
    """
    if not (sample_interval > 0.0):
        raise ConfigError(f"sample_interval = {sample_interval} must be positive")
    t = t0
    t_end = policy.t_end
    tiny = 1.0e-12 * max(1.0, sample_interval)
    steps = 0
    samples = 0

    system.close(p, q)
    sample_cb(t, p, q)
    samples += 1

    k = 1
    while t < t_end - tiny:
        target = min(t0 + k * sample_interval, t_end)
        while t < target - tiny:
            if steps >= policy.max_steps:
                sample_cb(t, p, q)
                return p, q, t, "max_steps", steps, samples + 1
            dt = min(system.adaptive_dt(policy, q), target - t)
            p, q, taken = _step_with_retries(system, p, q, dt, policy.mode)
            t += taken
            steps += 1
        t = target
        sample_cb(t, p, q)
        samples += 1
        k += 1
    return p, q, t, "t_end", steps, samples


def run(
    bg: scheme.BackgroundGrid,
    state0: scheme.LagrangianState,
    policy: StepPolicy,
    sink=None,
    sample_interval: float = 0.5,
) -> RunResult:
    """Integrate to t_end, sampling every sample_interval.

    sink(state, accel) is called at t = 0 and at every sample time with the
    closed state and its interior accelerations.  The discrete energy
    functional is monitored at sample times; exceeding 1e4 E_N(0) + 1 raises
    BlowUpError, mesh degeneration raises MeshTanglingError, and partial sink
    output up to the failure is preserved.
    """
    if state0.r0_tail is None:
        raise ConfigError("state has no closure constants (r0_tail)")
    if policy.mode == "explicit_rk4" and policy.dt is not None:
        limit = policy.cfl_safety * _explicit_dt_limit(bg)
        if policy.dt > limit:
            raise ConfigError(
                f"explicit dt = {policy.dt:g} exceeds the diffusive stability "
                f"limit {limit:g}"
            )
    system = _SchemeSystem(bg, state0.r0_tail)
    e_ref = [None]

    def sample_cb(t, p, q):
        st = scheme.LagrangianState(t, p.copy(), q.copy(), state0.r0_tail)
        accel = scheme.rhs(bg, st)
        e_n = scheme.discrete_energy_functional(bg, st, accel)
        if e_ref[0] is None:
            e_ref[0] = e_n
        elif e_n > _BLOWUP_FACTOR * e_ref[0] + 1.0:
            if sink is not None:
                sink(st, accel)
            raise BlowUpError(
                f"discrete energy {e_n:.3e} exceeded "
                f"{_BLOWUP_FACTOR:g} E_N(0) + 1 = {_BLOWUP_FACTOR * e_ref[0] + 1.0:.3e} "
                f"at t = {t:g}"
            )
        if sink is not None:
            sink(st, accel)

    p, q, t, termination, steps, samples = _run_loop(
        system,
        state0.r.copy(),
        state0.v.copy(),
        state0.t,
        policy,
        sample_interval,
        sample_cb,
    )
    final = scheme.LagrangianState(t, p, q, state0.r0_tail)
    return RunResult(state=final, termination=termination, steps=steps, samples=samples)
