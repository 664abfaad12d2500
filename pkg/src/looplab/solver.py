"""Picard solver for the perturbed Cauchy-Riemann equation and gradient flow.

The cylinder equation d/dt u + J d/dtheta u + grad H(u) = g is solved on
short cylinders with mixed APS data through the fixed point of

    v  |->  g - grad H(Q(beta) + P(v)),

starting at v = 0; the solution is u = Q(beta) + P(v*).  The iteration is
monitored: successive-ratio growth raises ContractionFailure, leaving the
ball of radius 1/(8C) (C the recorded Sobolev-Lipschitz constant of the
nonlinearity) raises BallExit.

The upward gradient flow d/dt c_n = n c_n - (grad H)_n is integrated with
the first-order exponential scheme c <- e^{n dt} c + dt phi1(n dt) b, exact
on the stiff diagonal part.  Growing plus-modes are the point of the
polarization, so trajectories that overflow raise Blowup with the time of
failure instead of being damped.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coverage import tracked
from .cylinder import (
    BoundaryData,
    CylinderMap,
    decompose,
    energy as cylinder_energy,
    p_op,
    phi1,
    q_op,
    time_trapezoid,
)
from .hamiltonian import (
    HamiltonianModel,
    action,
    eval_gradH,
    lipschitz_constant,
)
from .loops import Loop, sample_coeffs, synthesize_values


class SolverError(Exception):
    """Base class for solver failures."""


class ContractionFailure(SolverError):
    """Successive Picard increments grew for several consecutive steps."""


class BallExit(SolverError):
    """An iterate left the contraction ball of radius 1/(8C)."""


class MaxIterExceeded(SolverError):
    """The Picard tolerance was not met within the iteration budget."""


class Blowup(SolverError):
    """The upward flow exceeded the overflow guard (expected for generic data)."""

    def __init__(self, time: float, trace: "FlowTrace | None" = None):
        super().__init__(f"flow trajectory blew up at t = {time:.6g}")
        self.time = time
        self.trace = trace


# -- nonlinearity -----------------------------------------------------------------


def _grad_h_modes(m: HamiltonianModel, values: np.ndarray, N: int) -> np.ndarray:
    """Mode block of grad H applied pointwise (sample, evaluate, resynthesize)."""
    M = 4 * N
    grid = sample_coeffs(values, N, M)
    return synthesize_values(eval_gradH(m, grid), N)


def _l2_values(values: np.ndarray, h: float) -> float:
    density = np.sum(np.abs(values) ** 2, axis=tuple(range(1, values.ndim)))
    return float(np.sqrt(time_trapezoid(density, h)))


# -- results ----------------------------------------------------------------------


@dataclass(frozen=True)
class SolveResult:
    """Outcome of a contraction solve; u = q_op(beta) + p_op(v) by construction."""

    u: CylinderMap
    v: CylinderMap
    iterations: int
    contraction_ratio: float
    residual: float
    energy: float
    action_in: float
    action_out: float
    ball_radius: float
    v_norm: float

    def rest_0(self) -> Loop:
        return self.u.rest_0()

    def rest_end(self) -> Loop:
        return self.u.rest_end()

    def to_json_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "contraction_ratio": self.contraction_ratio,
            "residual": self.residual,
            "energy": self.energy,
            "action_in": self.action_in,
            "action_out": self.action_out,
            "ball_radius": self.ball_radius,
            "v_norm": self.v_norm,
            "u": self.u.to_json_dict(),
        }


@dataclass(frozen=True)
class FlowTrace:
    """Per-node record of an upward-flow trajectory."""

    times: np.ndarray
    actions: np.ndarray
    cumulative_energy: np.ndarray
    norms: np.ndarray
    final: Loop

    def to_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f)
            w.writerow(["t", "action", "cumulative_energy", "norm"])
            for t, a, e, n in zip(self.times, self.actions, self.cumulative_energy, self.norms):
                w.writerow([f"{t:.12g}", f"{a:.17g}", f"{e:.17g}", f"{n:.17g}"])


@dataclass(frozen=True)
class PushforwardResult:
    """Per-point outcome of a batched flow; blowups are recorded, not fatal."""

    point: Loop
    ok: bool
    final: Loop | None
    trace: FlowTrace | None
    blowup_time: float | None = None


# -- contraction solver -------------------------------------------------------------


@tracked("solver.picard_solve")
def picard_solve(
    m: HamiltonianModel,
    beta: BoundaryData,
    g: CylinderMap | None,
    eps: float,
    tol: float = 1e-11,
    max_iter: int = 200,
    M_t: int = 64,
) -> SolveResult:
    """Solve d/dt u + J d/dtheta u + grad H(u) = g with mixed APS data beta.

    Iterates v <- g - grad H(q_op(beta) + p_op(v)) from v = 0 until the L^2
    increment drops below tol.  Raises ContractionFailure after three
    consecutive non-contracting steps, BallExit outside radius 1/(8C),
    MaxIterExceeded past the budget.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    d, N = beta.d, beta.N
    q = q_op(beta, eps, M_t=M_t)
    h = q.dt
    if g is not None:
        if (g.d, g.N, g.M_t) != (d, N, M_t) or not np.isclose(g.T, eps):
            raise ValueError("forcing term g does not match the solve grid")
        g_vals = g.values
    else:
        g_vals = np.zeros_like(q.values)

    C = lipschitz_constant(m)
    ball = 1.0 / (8.0 * C)

    v_vals = np.zeros_like(q.values)
    prev_inc = None
    worst_ratio = 0.0
    bad_streak = 0
    iterations = 0

    for iterations in range(1, max_iter + 1):
        u = q + p_op(CylinderMap(d, N, eps, M_t, v_vals))
        v_next = g_vals - _grad_h_modes(m, u.values, N)
        inc = _l2_values(v_next - v_vals, h)
        v_norm = _l2_values(v_next, h)
        if not np.isfinite(inc) or v_norm > ball:
            raise BallExit(
                f"iterate norm {v_norm:.3g} left the contraction ball 1/(8C) = {ball:.3g}"
            )
        if prev_inc is not None and prev_inc > 0:
            ratio = inc / prev_inc
            worst_ratio = max(worst_ratio, ratio)
            bad_streak = bad_streak + 1 if ratio >= 1.0 else 0
            if bad_streak >= 3:
                raise ContractionFailure(
                    f"increment ratios stayed >= 1 for 3 steps (last {ratio:.3g})"
                )
        v_vals = v_next
        if inc <= tol:
            break
        prev_inc = inc
    else:
        raise MaxIterExceeded(f"no convergence to {tol:.3g} in {max_iter} iterations")

    v = CylinderMap(d, N, eps, M_t, v_vals)
    u = q + p_op(v)
    # the linear part D u equals v at the nodes by construction, so the PDE
    # residual at the nodes is the fixed-point defect
    residual_vals = v_vals + _grad_h_modes(m, u.values, N) - g_vals
    residual = _l2_values(residual_vals, h)
    return SolveResult(
        u=u,
        v=v,
        iterations=iterations,
        contraction_ratio=worst_ratio,
        residual=residual,
        energy=cylinder_energy(m, u),
        action_in=action(m, u.rest_0()),
        action_out=action(m, u.rest_end()),
        ball_radius=ball,
        v_norm=_l2_values(v_vals, h),
    )


@tracked("solver.collar_solve")
def collar_solve(
    m: HamiltonianModel,
    b: Loop,
    eps: float,
    tol: float = 1e-11,
    M_t: int = 64,
    max_iter: int = 200,
) -> SolveResult:
    """Unique small-energy solution whose mixed boundary value is carried by b."""
    return picard_solve(m, decompose(b), None, eps, tol=tol, max_iter=max_iter, M_t=M_t)


@tracked("solver.h_eps_sensitivity")
def h_eps_sensitivity(
    m: HamiltonianModel,
    beta: BoundaryData,
    eps: float,
    delta_beta: BoundaryData,
    tol: float = 1e-11,
    M_t: int = 64,
) -> float:
    """Finite-difference sensitivity of the fixed point to the boundary data.

    Returns ||v*(beta + delta) - v*(beta)||_{L^2} / ||delta||_{L^2_{1/2}}.
    """
    denom = delta_beta.norm()
    if denom == 0:
        raise ValueError("delta_beta must be nonzero")
    base = picard_solve(m, beta, None, eps, tol=tol, M_t=M_t)
    bumped = picard_solve(m, beta + delta_beta, None, eps, tol=tol, M_t=M_t)
    h = base.v.dt
    return _l2_values(bumped.v.values - base.v.values, h) / denom


# -- upward gradient flow -------------------------------------------------------------


def _check_flow_dt(dt: float, N: int) -> None:
    if dt <= 0:
        raise ValueError("dt must be positive")
    if dt > 0.1 / N + 1e-15:
        raise ValueError(f"dt = {dt:.3g} exceeds the stability budget 0.1/N = {0.1 / N:.3g}")


def _etd_coefficients(N: int, dt: float) -> tuple[np.ndarray, np.ndarray]:
    n = np.arange(-N, N + 1).astype(float)
    return np.exp(n * dt), dt * phi1(n * dt)


@tracked("solver.flow_step")
def flow_step(m: HamiltonianModel, gamma: Loop, dt: float) -> Loop:
    """One ETD step of the upward flow d/dt c_n = n c_n - (grad H)_n."""
    _check_flow_dt(dt, gamma.N)
    grow, weight = _etd_coefficients(gamma.N, dt)
    b = -_grad_h_modes(m, gamma.coeffs, gamma.N)
    c = grow[:, None] * gamma.coeffs + weight[:, None] * b
    return Loop(gamma.d, gamma.N, c)


def _cumulative_simpson(g: np.ndarray, h: float) -> np.ndarray:
    """Cumulative integral of node values, quadratic-interpolation accurate."""
    n = len(g)
    out = np.zeros(n)
    if n == 1:
        return out
    if n == 2:
        out[1] = 0.5 * h * (g[0] + g[1])
        return out
    for k in range(1, n):
        if k == 1:
            out[1] = h * (5.0 * g[0] + 8.0 * g[1] - g[2]) / 12.0
        elif k % 2 == 0:
            out[k] = out[k - 2] + h * (g[k - 2] + 4.0 * g[k - 1] + g[k]) / 3.0
        else:
            out[k] = out[k - 1] + h * (-g[k - 2] + 8.0 * g[k - 1] + 5.0 * g[k]) / 12.0
    return out


@tracked("solver.flow_trajectory")
def flow_trajectory(
    m: HamiltonianModel,
    gamma: Loop,
    T: float,
    dt: float,
    blowup_norm: float = 1e8,
) -> FlowTrace:
    """Integrate the upward flow for time T, recording action and energy.

    cumulative_energy is the quadrature of ||grad CSD||_{L^2}^2 along the
    trajectory, which on solutions equals the action increment.  Raises
    Blowup (with the partial trace attached) once the L^2 norm passes the
    overflow guard.
    """
    if T < 0:
        raise ValueError("flow time must be nonnegative")
    d, N = gamma.d, gamma.N
    M = 4 * N
    n = np.arange(-N, N + 1).astype(float)

    steps = max(int(round(T / dt)), 0) if T > 0 else 0
    if T > 0 and steps == 0:
        steps = 1
    dt_eff = T / steps if steps else dt
    if steps:
        _check_flow_dt(dt_eff, N)
    grow, weight = _etd_coefficients(N, dt_eff)

    times = np.zeros(steps + 1)
    actions = np.zeros(steps + 1)
    grad_sq = np.zeros(steps + 1)
    norms = np.zeros(steps + 1)

    c = gamma.coeffs.copy()
    for k in range(steps + 1):
        t_k = k * dt_eff
        norm_k = float(np.sqrt(np.sum(np.abs(c) ** 2)))
        times[k] = t_k
        norms[k] = norm_k
        if not np.isfinite(norm_k) or norm_k > blowup_norm:
            partial = FlowTrace(
                times=times[:k],
                actions=actions[:k],
                cumulative_energy=_cumulative_simpson(grad_sq[:k], dt_eff),
                norms=norms[:k],
                final=gamma,
            )
            raise Blowup(t_k, partial)
        grid = sample_coeffs(c, N, M)
        quad = 0.5 * float(np.sum(n[:, None] * np.abs(c) ** 2))
        actions[k] = quad - float(np.mean(m.h(np.sum(np.abs(grid) ** 2, axis=-1))))
        grad_modes = n[:, None] * c - synthesize_values(eval_gradH(m, grid), N)
        grad_sq[k] = float(np.sum(np.abs(grad_modes) ** 2))
        if k < steps:
            # nonlinear block of the vector field: -grad H = grad_modes - n c
            c = grow[:, None] * c + weight[:, None] * (grad_modes - n[:, None] * c)

    return FlowTrace(
        times=times,
        actions=actions,
        cumulative_energy=_cumulative_simpson(grad_sq, dt_eff),
        norms=norms,
        final=Loop(d, N, c),
    )


@tracked("solver.gf_pushforward")
def gf_pushforward(
    m: HamiltonianModel,
    points: list[Loop],
    t: float,
    dt: float,
    blowup_norm: float = 1e8,
) -> list[PushforwardResult]:
    """Flow every point for time t; individual blowups are embedded in the result."""
    results = []
    for p in points:
        try:
            trace = flow_trajectory(m, p, t, dt, blowup_norm=blowup_norm)
            results.append(PushforwardResult(point=p, ok=True, final=trace.final, trace=trace))
        except Blowup as exc:
            results.append(
                PushforwardResult(
                    point=p, ok=False, final=None, trace=exc.trace, blowup_time=exc.time
                )
            )
    return results
