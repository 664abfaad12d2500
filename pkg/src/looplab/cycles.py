"""Concrete cycle families, the perturbation map, and the periodic-orbit finders.

Two families of subsets of the loop space drive the existence argument:

* the sphere family: plus-polarized loops of fixed half-norm alpha, on which
  the action is bounded below by some beta > 0 for suitable alpha;
* the box family: minus-polarized loops of half-norm <= tau shifted by
  s * e_plus, 0 <= s <= tau, whose boundary has nonpositive action once tau
  is large.

They intersect exactly in the single point alpha * e_plus, transversely on
the finite truncation.  Critical points are produced by a short upward flow
followed by Newton iteration on the mode-space residual n c_n - (grad H)_n,
and checked against an independent scalar oracle: for radial Hamiltonians a
circle of squared radius s with winding k is critical iff 2 h'(s) = k.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coverage import tracked
from .hamiltonian import HamiltonianModel, action, grad_action
from .loops import (
    Loop,
    gaussian_loop,
    inner,
    mode_numbers,
    project,
    sample_coeffs,
    sobolev_norm,
    synthesize_values,
)
from .solver import Blowup, flow_trajectory


class NoRoot(Exception):
    """The winding number is outside the range of 2 h'."""


class NegativeBeta(Exception):
    """The sphere minimum came out nonpositive (alpha outside the window)."""

    def __init__(self, value: float):
        super().__init__(f"sphere action minimum is nonpositive: {value:.6g}")
        self.value = value


class NewtonDivergence(Exception):
    """Newton iteration failed to converge."""


class FlowBlowup(Exception):
    """The preparatory flow blew up even after shortening the flow time."""


# -- distinguished plus direction -------------------------------------------------


def e_plus(d: int = 1, N: int = 32) -> Loop:
    """Unit plus vector: coefficient 1 on mode n = 1, coordinate 0."""
    return Loop.from_modes(d, N, {1: 1.0})


# -- cycle samplers ----------------------------------------------------------------


@tracked("cycles.sample_gamma")
def sample_gamma(
    alpha: float, count: int, seed: int, d: int = 1, N: int = 32
) -> list[Loop]:
    """Plus-polarized Gaussian loops rescaled to half-norm exactly alpha."""
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        g = project(gaussian_loop(d, N, rng), "plus")
        nrm = sobolev_norm(g, 0.5)
        if nrm == 0 or alpha == 0:
            out.append(Loop.zero(d, N) if alpha == 0 else g)
            continue
        out.append((alpha / nrm) * g)
    return out


@tracked("cycles.sample_sigma")
def sample_sigma(
    tau: float,
    e_plus_loop: Loop,
    count: int,
    seed: int,
    boundary_only: bool = False,
) -> list[Loop]:
    """Points gamma^- + s e_plus with ||gamma^-||_{1/2} <= tau and 0 <= s <= tau.

    With boundary_only the samples sit on the three boundary faces
    ||gamma^-|| = tau, s = 0 and s = tau (cycled deterministically).
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    d, N = e_plus_loop.d, e_plus_loop.N
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        direction = project(gaussian_loop(d, N, rng), "minus")
        nrm = sobolev_norm(direction, 0.5)
        direction = (1.0 / nrm) * direction if nrm > 0 else direction
        if boundary_only:
            face = i % 3
            if face == 0:
                radius, s = tau, tau * rng.uniform()
            elif face == 1:
                radius, s = tau * np.sqrt(rng.uniform()), 0.0
            else:
                radius, s = tau * np.sqrt(rng.uniform()), tau
        else:
            radius = tau * np.sqrt(rng.uniform())
            s = tau * rng.uniform()
        out.append(radius * direction + s * e_plus_loop)
    return out


# -- sphere minimum and box boundary ------------------------------------------------


def _half_normalize(gamma: Loop, alpha: float) -> Loop:
    nrm = sobolev_norm(gamma, 0.5)
    return (alpha / nrm) * gamma if nrm > 0 else gamma


@tracked("cycles.estimate_beta")
def estimate_beta(
    m: HamiltonianModel,
    alpha: float,
    samples: int = 48,
    descent_steps: int = 120,
    seed: int = 0,
    d: int = 1,
    N: int = 32,
) -> float:
    """Minimum of the action over the alpha-sphere in the plus sector.

    Projected gradient descent constrained to the sphere, from `samples`
    random starts plus the distinguished point alpha * e_plus.  Raises
    NegativeBeta when the estimate is nonpositive.
    """
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    if alpha == 0:
        return 0.0
    starts = sample_gamma(alpha, samples, seed, d=d, N=N)
    starts.append(alpha * e_plus(d, N))
    best = np.inf
    for gamma in starts:
        value = action(m, gamma)
        best = min(best, value)
        step = 0.1 * alpha
        for _ in range(descent_steps):
            g = project(grad_action(m, gamma), "plus")
            # remove the radial component in the half-norm metric
            radial = inner(g, gamma, 0.5) / alpha**2
            direction = g - radial * gamma
            dir_norm = sobolev_norm(direction, 0.5)
            if dir_norm <= 1e-14 * (1.0 + alpha):
                break
            moved = False
            for _ in range(25):
                candidate = _half_normalize(gamma - (step / dir_norm) * direction, alpha)
                cand_value = action(m, candidate)
                if cand_value < value - 1e-15:
                    gamma, value = candidate, cand_value
                    best = min(best, value)
                    step *= 1.3
                    moved = True
                    break
                step *= 0.5
            if not moved:
                break
    if best <= 0:
        raise NegativeBeta(best)
    return float(best)


@tracked("cycles.scan_alpha")
def scan_alpha(
    m: HamiltonianModel,
    alphas: np.ndarray | None = None,
    samples: int = 48,
    descent_steps: int = 120,
    seed: int = 0,
    d: int = 1,
    N: int = 32,
) -> tuple[float, float, list[dict]]:
    """Scan alpha over a log grid and return the beta-maximizing alpha."""
    if alphas is None:
        alphas = np.geomspace(0.05, 2.0, 12)
    table = []
    best_alpha, best_beta = None, -np.inf
    for a in alphas:
        try:
            beta = estimate_beta(
                m, float(a), samples=samples, descent_steps=descent_steps, seed=seed, d=d, N=N
            )
        except NegativeBeta as exc:
            table.append({"alpha": float(a), "beta": float(exc.value), "positive": False})
            continue
        table.append({"alpha": float(a), "beta": beta, "positive": True})
        if beta > best_beta:
            best_alpha, best_beta = float(a), beta
    if best_alpha is None:
        raise NegativeBeta(best_beta)
    return best_alpha, best_beta, table


@tracked("cycles.check_sigma_boundary")
def check_sigma_boundary(
    m: HamiltonianModel,
    tau: float,
    samples: int = 180,
    seed: int = 1,
    d: int = 1,
    N: int = 32,
) -> float:
    """Maximum of the action over sampled boundary faces of the box family."""
    pts = sample_sigma(tau, e_plus(d, N), samples, seed, boundary_only=True)
    return float(max(action(m, p) for p in pts))


def derive_tau(
    m: HamiltonianModel,
    start: float = 1.0,
    samples: int = 180,
    seed: int = 1,
    d: int = 1,
    N: int = 32,
    max_doublings: int = 12,
) -> float:
    """Double tau until the box boundary action maximum is nonpositive."""
    tau = start
    for _ in range(max_doublings):
        if check_sigma_boundary(m, tau, samples=samples, seed=seed, d=d, N=N) <= 0:
            return tau
        tau *= 2.0
    raise RuntimeError(f"no admissible tau found up to {tau}")


# -- perturbation map ----------------------------------------------------------------


@tracked("cycles.rho")
def rho(x):
    """C^1 bump: 1 on [-1, 1], 1/x^2 outside [-2, 2], monotone Hermite between."""
    x = np.abs(np.asarray(x, dtype=float))
    t = np.clip(x - 1.0, 0.0, 1.0)
    # cubic Hermite on [1, 2]: values 1 -> 1/4, slopes 0 -> -1/4
    blend = (2 * t**3 - 3 * t**2 + 1) + 0.25 * (-2 * t**3 + 3 * t**2) - 0.25 * (t**3 - t**2)
    with np.errstate(divide="ignore"):
        tail = np.where(x >= 2.0, 1.0 / np.maximum(x, 2.0) ** 2, 0.0)
    out = np.where(x <= 1.0, 1.0, np.where(x >= 2.0, tail, blend))
    return float(out) if out.ndim == 0 else out


@tracked("cycles.perturb")
def perturb(sigma_point: Loop, v: Loop) -> Loop:
    """sigma_point + rho(||sigma_point||^2_{1/2}) v, with v in the unit L^2_2 ball."""
    sigma_point._check(v)
    n = mode_numbers(v.N).astype(float)
    w2 = (1.0 + n**2) ** 2
    ball = float(np.sum(w2[:, None] * np.abs(v.coeffs) ** 2))
    if ball > 1.0 + 1e-12:
        raise ValueError(f"perturbation lies outside the unit L^2_2 ball ({ball:.4g} > 1)")
    scale = rho(sobolev_norm(sigma_point, 0.5) ** 2)
    return sigma_point + scale * v


# -- orbit results --------------------------------------------------------------------


@dataclass(frozen=True)
class OrbitResult:
    """A (candidate) periodic orbit: radial circle of given winding number."""

    loop: Loop
    winding: int
    radius: float
    action: float
    gradient_norm: float
    newton_iterations: int
    action_below_beta: bool = False

    def to_json_dict(self) -> dict:
        return {
            "winding": self.winding,
            "radius": self.radius,
            "action": self.action,
            "gradient_norm": self.gradient_norm,
            "newton_iterations": self.newton_iterations,
            "action_below_beta": self.action_below_beta,
            "loop": self.loop.to_json_dict(),
        }


@tracked("cycles.radial_orbit_oracle")
def radial_orbit_oracle(m: HamiltonianModel, k: int) -> OrbitResult:
    """Ground-truth orbit from scalar root finding: solve 2 h'(s) = k by bisection.

    Independent of the PDE machinery: monotone h' makes the root unique, and
    the circle sqrt(s) e^{i k theta} satisfies gamma' = X_H(gamma) exactly.
    """
    if m.variant != "bump":
        raise ValueError("the orbit oracle needs the bump variant")
    if not isinstance(k, (int, np.integer)) or k == 0:
        raise ValueError("winding k must be a nonzero integer")
    if not (0 < k < 2.0 * m.slope):
        raise NoRoot(f"2 h' ranges over (0, {2 * m.slope:.6g}]; no root for k = {k}")
    lo, hi = m.s0, m.s1
    f = lambda s: 2.0 * m.h_prime(s) - k
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * m.s1:
            break
    s = 0.5 * (lo + hi)
    radius = float(np.sqrt(s))
    N = max(32, abs(k) + 1)
    loop = Loop.from_modes(1, N, {k: radius})
    orbit_action = 0.5 * k * s - float(m.h(s))
    grad = grad_action(m, loop)
    return OrbitResult(
        loop=loop,
        winding=int(k),
        radius=radius,
        action=float(orbit_action),
        gradient_norm=sobolev_norm(grad, 0),
        newton_iterations=0,
    )


# -- Newton refinement ------------------------------------------------------------------


def _flatten_real(block: np.ndarray) -> np.ndarray:
    return np.concatenate([block.real.ravel(), block.imag.ravel()])


def _newton_matrix(m: HamiltonianModel, gamma: Loop) -> tuple[np.ndarray, np.ndarray]:
    """Residual and dense real Jacobian of R(c) = {n c_n - (grad H o gamma)_n}."""
    N, d = gamma.N, gamma.d
    M = 4 * N
    n = mode_numbers(N).astype(float)
    vals = sample_coeffs(gamma.coeffs, N, M)
    s = np.sum(np.abs(vals) ** 2, axis=-1)
    hp = m.h_prime(s)
    hpp = m.h_second(s)
    residual_block = n[:, None] * gamma.coeffs - synthesize_values(
        (2.0 * hp)[:, None] * vals, N
    )

    n_entries = (2 * N + 1) * d
    basis = np.zeros((2 * n_entries, 2 * N + 1, d), complex)
    eye = np.eye(n_entries).reshape(n_entries, 2 * N + 1, d)
    basis[:n_entries] = eye
    basis[n_entries:] = 1j * eye

    w_vals = sample_coeffs(basis, N, M)  # (B, M, d)
    cross = np.sum((vals.conj()[None] * w_vals).real, axis=-1)  # Re<x, w>
    hess_vals = (2.0 * hp)[None, :, None] * w_vals + (4.0 * hpp)[None, :, None] * cross[
        :, :, None
    ] * vals[None]
    hess_modes = synthesize_values(hess_vals, N)
    columns = n[None, :, None] * basis - hess_modes  # (B, 2N+1, d)

    B = 2 * n_entries
    jac = np.empty((B, B))
    for b in range(B):
        jac[:, b] = _flatten_real(columns[b])
    return _flatten_real(residual_block), jac


@tracked("cycles.find_critical_point")
def find_critical_point(
    m: HamiltonianModel,
    seed_loop: Loop,
    flow_time: float = 1.0,
    newton_tol: float = 1e-10,
    beta: float | None = None,
    max_newton: int = 60,
    flow_retries: int = 3,
) -> OrbitResult:
    """Short upward flow, then Newton on the mode-space critical equation.

    The flow escapes the flat core (where every loop is critical only in the
    trivial sense); Newton converges quadratically near nondegenerate radial
    orbits.  A blown-up flow is retried with half the time, then FlowBlowup.
    An orbit with action below the supplied beta is flagged, not rejected.
    """
    d, N = seed_loop.d, seed_loop.N
    dt = 0.09 / N
    gamma = seed_loop
    if flow_time > 0 and sobolev_norm(seed_loop, 0) > 0:
        t = flow_time
        for attempt in range(flow_retries + 1):
            try:
                gamma = flow_trajectory(m, seed_loop, t, dt).final
                break
            except Blowup:
                t *= 0.5
        else:
            raise FlowBlowup(f"flow blew up down to flow_time = {t * 2:.3g}")

    c = gamma.coeffs.copy()
    iterations = 0
    initial_norm = None
    for iterations in range(0, max_newton + 1):
        current = Loop(d, N, c)
        res, jac = _newton_matrix(m, current)
        res_norm = float(np.linalg.norm(res))
        if initial_norm is None:
            initial_norm = res_norm
        if not np.isfinite(res_norm) or res_norm > 1e6 * (1.0 + initial_norm):
            raise NewtonDivergence(f"residual grew to {res_norm:.3g}")
        if res_norm <= newton_tol:
            break
        if iterations == max_newton:
            raise NewtonDivergence(
                f"no convergence to {newton_tol:.3g} in {max_newton} Newton steps"
            )
        step, *_ = np.linalg.lstsq(jac, -res, rcond=None)
        n_entries = (2 * N + 1) * d
        c = c + (step[:n_entries] + 1j * step[n_entries:]).reshape(2 * N + 1, d)

    final = Loop(d, N, c)
    radius = sobolev_norm(final, 0)
    if radius <= 1e-6:
        winding = 0
        radius = 0.0
    else:
        amplitudes = np.sum(np.abs(final.coeffs) ** 2, axis=1)
        winding = int(final.modes[int(np.argmax(amplitudes))])
    value = action(m, final)
    grad_norm = sobolev_norm(grad_action(m, final), 0)
    flagged = beta is not None and value < beta - 1e-12
    return OrbitResult(
        loop=final,
        winding=winding,
        radius=float(radius),
        action=float(value),
        gradient_norm=float(grad_norm),
        newton_iterations=iterations,
        action_below_beta=bool(flagged),
    )


# -- transversality at the intersection point --------------------------------------------


def transversality_check(alpha: float, tau: float, d: int = 1, N: int = 32) -> dict:
    """Finite-truncation transversality of the sphere/box intersection.

    Assembles the tangent spaces at alpha * e_plus (sphere tangent inside the
    plus sector, box tangent = minus sector plus the e_plus segment) as real
    coefficient vectors and reports the smallest singular value of the
    combined square matrix, plus the uniqueness datum: the plus sector meets
    the box parameterization span only along e_plus, forcing s = alpha.
    """
    if not (0 < alpha <= tau):
        raise ValueError("need 0 < alpha <= tau for the intersection point to exist")
    dim = 2 * d * (2 * N + 1)
    n_entries = (2 * N + 1) * d

    def unit(mode: int, coord: int, imag: bool) -> np.ndarray:
        block = np.zeros((2 * N + 1, d), complex)
        block[N + mode, coord] = 1j if imag else 1.0
        return _flatten_real(block)

    columns = []
    # sphere tangent: plus sector minus the e_plus direction itself
    for mode in range(1, N + 1):
        for coord in range(d):
            for imag in (False, True):
                if mode == 1 and coord == 0 and not imag:
                    continue
                columns.append(unit(mode, coord, imag))
    # box tangent: full minus sector plus the segment direction e_plus
    for mode in range(-N, 1):
        for coord in range(d):
            for imag in (False, True):
                columns.append(unit(mode, coord, imag))
    columns.append(unit(1, 0, False))

    matrix = np.stack(columns, axis=1)
    assert matrix.shape == (dim, dim)
    svals = np.linalg.svd(matrix, compute_uv=False)
    # intersection of the plus sector with span(minus sector, e_plus):
    # count common directions via principal angles
    plus_basis = [unit(mode, coord, imag) for mode in range(1, N + 1) for coord in range(d) for imag in (False, True)]
    box_basis = columns[2 * d * N - 1 :]
    q_plus, _ = np.linalg.qr(np.stack(plus_basis, axis=1))
    q_box, _ = np.linalg.qr(np.stack(box_basis, axis=1))
    cosines = np.linalg.svd(q_plus.T @ q_box, compute_uv=False)
    intersection_dim = int(np.sum(cosines >= 1.0 - 1e-10))

    point = alpha * e_plus(d, N)
    return {
        "sigma_min": float(svals[-1]),
        "sigma_max": float(svals[0]),
        "intersection_dim": intersection_dim,
        "point": point,
        "s_at_intersection": float(alpha),
    }
