#!/usr/bin/env python3
"""Standalone fixed-step RK4 oracle for the dimensionless stellar structure
equation (xi^2 theta')' = -xi^2 theta^n.

Independent of the package: plain Python floats, fixed step, quartic series
start, bisection refinement of the first zero of theta.  Run once offline;
the printed values are frozen into the test suite as golden numbers.

Usage:  python tests/oracles/lane_emden_rk4.py
"""

import math

STEP = 1.0e-5
XI_START = 1.0e-4


def _deriv(xi, theta, z, n):
    # z = xi^2 theta'; clamp theta at zero so fractional powers stay real
    # in the half-step evaluations that overshoot the surface.
    tn = max(theta, 0.0) ** n
    return z / (xi * xi), -xi * xi * tn


def _rk4_step(xi, theta, z, h, n):
    k1t, k1z = _deriv(xi, theta, z, n)
    k2t, k2z = _deriv(xi + 0.5 * h, theta + 0.5 * h * k1t, z + 0.5 * h * k1z, n)
    k3t, k3z = _deriv(xi + 0.5 * h, theta + 0.5 * h * k2t, z + 0.5 * h * k2z, n)
    k4t, k4z = _deriv(xi + h, theta + h * k3t, z + h * k3z, n)
    theta += h * (k1t + 2.0 * k2t + 2.0 * k3t + k4t) / 6.0
    z += h * (k1z + 2.0 * k2z + 2.0 * k3z + k4z) / 6.0
    return theta, z


def integrate(n, step=STEP):
    """March until theta crosses zero; return (xi1, m1 = -z(xi1))."""
    xi = XI_START
    theta = 1.0 - xi * xi / 6.0 + n * xi ** 4 / 120.0
    z = xi * xi * (-xi / 3.0 + n * xi ** 3 / 30.0)
    while True:
        th_new, z_new = _rk4_step(xi, theta, z, step, n)
        if th_new <= 0.0:
            break
        xi, theta, z = xi + step, th_new, z_new
    # bisect on the step size within [xi, xi + step]
    lo, hi = 0.0, step
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        th_mid, _ = _rk4_step(xi, theta, z, mid, n)
        if th_mid > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1.0e-18 * (1.0 + xi):
            break
    root = 0.5 * (lo + hi)
    _, z_root = _rk4_step(xi, theta, z, root, n)
    return xi + root, -z_root


def scaled_star(n, xi1, m1, total_mass):
    """Central density, length scale and radius for unit K and G."""
    rho_c = (total_mass * math.sqrt(4.0 * math.pi) / (m1 * (n + 1.0) ** 1.5)) ** (
        2.0 * n / (3.0 - n)
    )
    alpha = math.sqrt((n + 1.0) * rho_c ** (1.0 / n - 1.0) / (4.0 * math.pi))
    return rho_c, alpha, alpha * xi1


def main():
    print(f"step = {STEP:g}, start = {XI_START:g}")
    for n in (1.0, 1.25, 2.0, 2.5, 3.0):
        xi1, m1 = integrate(n)
        xi1c, m1c = integrate(n, step=2.0 * STEP)
        print(f"n = {n}")
        print(f"  xi1 = {xi1:.17g}   (step-doubling diff {abs(xi1 - xi1c):.3g})")
        print(f"  m1  = {m1:.17g}   (step-doubling diff {abs(m1 - m1c):.3g})")
        if n == 1.0:
            print(f"  closed-form xi1 - pi = {xi1 - math.pi:.3g}")
            print(f"  closed-form m1  - pi = {m1 - math.pi:.3g}")
        if n >= 3.0:
            # mass-central-density relation degenerates at n = 3
            continue
        gamma = 1.0 + 1.0 / n
        rho_c, alpha, radius = scaled_star(n, xi1, m1, 1.0)
        print(f"  gamma = {gamma:.17g}, M = 1:")
        print(f"    rho_c  = {rho_c:.17g}")
        print(f"    alpha  = {alpha:.17g}")
        print(f"    radius = {radius:.17g}")
        if n == 1.0:
            print(f"    radius - sqrt(pi/2)    = {radius - math.sqrt(math.pi / 2):.3g}")
            print(f"    rho_c - 1/sqrt(2 pi)   = {rho_c - 1.0 / math.sqrt(2 * math.pi):.3g}")


if __name__ == "__main__":
    main()
