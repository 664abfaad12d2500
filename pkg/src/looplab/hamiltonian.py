"""Radial Hamiltonians on C^d and the action functional on loops.

The working Hamiltonian is H(x) = h(|x|^2) with a profile h that vanishes
for |x|^2 <= s0, grows with the quintic-smoothstep ramp of h' on [s0, s1],
and continues with constant slope h' = 1 + eps beyond s1.  The ramp makes
h' nondecreasing and C^1 with h'' = 0 at both junctions, so h is C^2 and
every level 2 h'(s) = k with 0 < k < 2(1+eps) is hit exactly once: the
radial-orbit root is unique per winding number.

A flat core, a nondecreasing slope capped at 1+eps, and an exact quadratic
tail h(s) = (1+eps) s are jointly impossible (the mean of h' over [s0, s1]
would have to equal its maximum), so the tail is quadratic up to a constant:
h(s) = (1+eps) s + c_inf with c_inf = -(1+eps)(s0+s1)/2 < 0.  Everything
downstream depends only on h' (vector fields, splitting, orbit radii) or on
h itself as implemented (action values), never on the absent constant.

The 'pure_quadratic' variant is h(s) = (1+eps) s globally, used for the
linear theory where X_H = c x with c = 2(1+eps) i.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coverage import tracked
from .loops import Loop, sample, synthesize_values

_PROFILE_GRID = 20001  # sampling density for recorded constants


def _smoothstep(t: np.ndarray) -> np.ndarray:
    """Quintic smoothstep 6t^5 - 15t^4 + 10t^3, clipped to [0, 1]."""
    t = np.clip(t, 0.0, 1.0)
    return t**3 * (10.0 + t * (-15.0 + 6.0 * t))


def _smoothstep_d(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    inside = (t > 0) & (t < 1)
    return np.where(inside, 30.0 * t**2 * (1.0 - t) ** 2, 0.0)


def _smoothstep_int(t: np.ndarray) -> np.ndarray:
    """Antiderivative of the quintic smoothstep with value 0 at t = 0."""
    t = np.clip(t, 0.0, 1.0)
    return t**4 * (2.5 + t * (-3.0 + t))


@dataclass(frozen=True)
class HamiltonianModel:
    """Radial Hamiltonian H(x) = h(|x|^2); see module docstring for h."""

    eps_H: float = 0.1
    s0: float = 0.25
    s1: float = 4.0
    variant: str = "bump"

    def __post_init__(self):
        if self.variant not in ("bump", "pure_quadratic"):
            raise ValueError("variant must be 'bump' or 'pure_quadratic'")
        # eps_H = 0 is admitted only for the linear-theory variant, where the
        # resonant case c = 2i is itself the object of study
        if self.eps_H < 0 or (self.eps_H == 0 and self.variant == "bump"):
            raise ValueError("eps_H must be positive (nonnegative for pure_quadratic)")
        if not (0 < self.s0 < self.s1):
            raise ValueError("need 0 < s0 < s1")

    @property
    def slope(self) -> float:
        return 1.0 + self.eps_H

    @property
    def tail_offset(self) -> float:
        """c_inf with h(s) = (1+eps) s + c_inf for s >= s1 (bump variant)."""
        if self.variant == "pure_quadratic":
            return 0.0
        return -self.slope * (self.s0 + self.s1) / 2.0

    # -- profile -------------------------------------------------------------

    def h(self, s):
        s = np.asarray(s, dtype=float)
        if self.variant == "pure_quadratic":
            return self.slope * s
        width = self.s1 - self.s0
        t = (s - self.s0) / width
        return self.slope * width * _smoothstep_int(t) + np.where(
            s > self.s1, self.slope * (s - self.s1), 0.0
        )

    def h_prime(self, s):
        s = np.asarray(s, dtype=float)
        if self.variant == "pure_quadratic":
            return np.full_like(s, self.slope)
        t = (s - self.s0) / (self.s1 - self.s0)
        return self.slope * _smoothstep(t)

    def h_second(self, s):
        s = np.asarray(s, dtype=float)
        if self.variant == "pure_quadratic":
            return np.zeros_like(s)
        width = self.s1 - self.s0
        t = (s - self.s0) / width
        return self.slope * _smoothstep_d(t) / width

    def to_json_dict(self) -> dict:
        return {
            "eps_H": self.eps_H,
            "s0": self.s0,
            "s1": self.s1,
            "variant": self.variant,
        }

    @staticmethod
    def from_json_dict(obj: dict) -> "HamiltonianModel":
        return HamiltonianModel(
            eps_H=float(obj.get("eps_H", 0.1)),
            s0=float(obj.get("s0", 0.25)),
            s1=float(obj.get("s1", 4.0)),
            variant=str(obj.get("variant", "bump")),
        )


# -- pointwise evaluations ------------------------------------------------------


def _sq_radius(x: np.ndarray) -> np.ndarray:
    return np.sum(np.abs(x) ** 2, axis=-1)


@tracked("hamiltonian.eval_H")
def eval_H(m: HamiltonianModel, x: np.ndarray):
    """H(x) = h(|x|^2) for x of shape (..., d)."""
    x = np.asarray(x, dtype=complex)
    return m.h(_sq_radius(x))


@tracked("hamiltonian.eval_gradH")
def eval_gradH(m: HamiltonianModel, x: np.ndarray) -> np.ndarray:
    """Gradient for the real inner product: grad H = 2 h'(|x|^2) x."""
    x = np.asarray(x, dtype=complex)
    return (2.0 * m.h_prime(_sq_radius(x)))[..., None] * x


@tracked("hamiltonian.eval_XH")
def eval_XH(m: HamiltonianModel, x: np.ndarray) -> np.ndarray:
    """Hamiltonian vector field X_H = J grad H = 2 h'(|x|^2) i x."""
    return 1j * eval_gradH(m, x)


@tracked("hamiltonian.k_factor")
def k_factor(m: HamiltonianModel, x: np.ndarray):
    """Scalar multiplier kappa(x) = 2 h'(|x|^2) with X_H(x) = kappa(x) i x.

    As a linear map this is K(x) = kappa(x) J; pointwise |K(x)| = kappa(x).
    Only the bump variant factors through K(0) = 0.
    """
    if m.variant != "bump":
        raise ValueError("k_factor requires the bump variant (K(0) = 0 fails otherwise)")
    x = np.asarray(x, dtype=complex)
    return 2.0 * m.h_prime(_sq_radius(x))


def k_factor_constant(m: HamiltonianModel) -> float:
    """Recorded constant C with |K(x)| <= C |x| and |K(x) - K(y)| <= C |x - y|.

    Both suprema live on the ramp band; they are evaluated on a dense grid.
    """
    if m.variant != "bump":
        raise ValueError("k_factor_constant requires the bump variant")
    s = np.linspace(m.s0, m.s1, _PROFILE_GRID)
    bound = np.max(2.0 * m.h_prime(s) / np.sqrt(s))
    lip = np.max(4.0 * np.sqrt(s) * m.h_second(s))
    return float(max(bound, lip))


# -- action functional ----------------------------------------------------------


@tracked("hamiltonian.action")
def action(m: HamiltonianModel, gamma: Loop, M: int | None = None) -> float:
    """CSD_H(gamma) = 1/2 sum_n n |c_n|^2 - mean_j H(gamma(theta_j)).

    The quadratic term is exact in modes; the H term is the M-point rectangle
    rule (the trapezoid rule on a periodic grid) under dtheta/2pi.
    """
    if M is None:
        M = 4 * gamma.N
    n = gamma.modes.astype(float)
    quad = 0.5 * float(np.sum(n[:, None] * np.abs(gamma.coeffs) ** 2))
    vals = sample(gamma, M)
    return quad - float(np.mean(eval_H(m, vals)))


@tracked("hamiltonian.grad_action")
def grad_action(m: HamiltonianModel, gamma: Loop, M: int | None = None) -> Loop:
    """Formal L^2 gradient: mode n of -J gamma' - grad H(gamma) is n c_n - (grad H o gamma)_n."""
    if M is None:
        M = 4 * gamma.N
    vals = sample(gamma, M)
    grad_modes = synthesize_values(eval_gradH(m, vals), gamma.N)
    n = gamma.modes.astype(float)
    return Loop(gamma.d, gamma.N, n[:, None] * gamma.coeffs - grad_modes)


# -- linear/compact splitting ---------------------------------------------------


@dataclass(frozen=True)
class Splitting:
    """X_H = c u + X_{H_c}(u) with c = 2(1+eps) i and compactly supported rest."""

    model: HamiltonianModel
    c: complex
    nonresonant: bool

    def lipschitz_bound(self) -> float:
        """Dense-grid bound on the pointwise Lipschitz constant of X_{H_c}."""
        m = self.model
        hi = max(m.s1 * 4.0, 16.0)
        s = np.linspace(0.0, hi, _PROFILE_GRID)
        # |D X_{H_c}| <= |2h'(s) - 2(1+eps)| + 4 s h''(s)
        return float(
            np.max(np.abs(2.0 * m.h_prime(s) - 2.0 * m.slope) + 4.0 * s * m.h_second(s))
        )


@tracked("hamiltonian.split")
def split(m: HamiltonianModel) -> Splitting:
    two_slope = 2.0 * m.slope
    nonres = abs(two_slope - round(two_slope)) > 1e-9
    return Splitting(model=m, c=two_slope * 1j, nonresonant=nonres)


@tracked("hamiltonian.eval_compact_part")
def eval_compact_part(spl: Splitting, x: np.ndarray) -> np.ndarray:
    """X_{H_c}(x) = (2h'(|x|^2) - 2(1+eps)) i x; vanishes for |x|^2 >= s1."""
    x = np.asarray(x, dtype=complex)
    m = spl.model
    factor = 2.0 * m.h_prime(_sq_radius(x)) - 2.0 * m.slope
    return factor[..., None] * 1j * x


# -- recorded solver constant ---------------------------------------------------


def lipschitz_constant(m: HamiltonianModel) -> float:
    """The Sobolev-Lipschitz constant C used in the 1/(8C) contraction ball.

    ||X_H(a) - X_H(b)||_{L^2} <= 2C (||a||_{L^4} + ||b||_{L^4}) ||a - b||_{L^4}
    follows from the pointwise K bounds, so C = k_factor_constant.
    """
    return k_factor_constant(m)
