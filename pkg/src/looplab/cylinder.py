"""Fields on the cylinder [0, eps] x S^1 and the APS boundary value problem.

A cylinder field is modal in theta and nodal in t: values[j] holds the full
mode vector {u_n(t_j)} at t_j = j * T / M_t.  The operator under study is
D = d/dt + L with L = J d/dtheta, which acts per mode as u_n' + lambda_n u_n
with lambda_n = -n.

Mixed APS boundary data prescribes the nonnegative spectral part of L at
t = 0 and the negative part at t = eps, through the boundary operator
beta = -Pi^+_L r_0(u) + Pi^-_L r_eps(u).  With that sign convention D has
the explicit right inverse Q (boundary data, per-mode exponentials) + P
(interior forcing, per-mode Duhamel integrals):

* Q on a lambda >= 0 mode produces -e^{-lambda t} beta (the minus sign
  cancels the one in the boundary operator; the lambda = 0 mode takes this
  branch so that the right-inverse identity holds there too);
* Q on a lambda < 0 mode produces e^{-(t-eps) lambda} beta;
* P integrates forward from 0 on lambda >= 0 modes and backward from eps on
  lambda < 0 modes, each time against the decaying exponential kernel.

Duhamel integrals use exponentially weighted quadrature that is exact for
piecewise-linear forcing, so accuracy is uniform in lambda * eps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coverage import tracked
from .hamiltonian import HamiltonianModel, eval_XH
from .loops import (
    Loop,
    aps_project,
    lambda_of_modes,
    sample_coeffs,
    sobolev_norm,
    synthesize_values,
)

# -- stable phi functions -------------------------------------------------------


def phi1(w: np.ndarray) -> np.ndarray:
    """(e^w - 1)/w with the w -> 0 limit."""
    w = np.asarray(w, dtype=float)
    out = np.ones_like(w)
    nz = w != 0
    out[nz] = np.expm1(w[nz]) / w[nz]
    return out


def phi2(w: np.ndarray) -> np.ndarray:
    """(e^w - 1 - w)/w^2 with a series branch against cancellation."""
    w = np.asarray(w, dtype=float)
    out = np.full_like(w, 0.5)
    small = np.abs(w) < 1e-4
    ws = w[small]
    out[small] = 0.5 + ws / 6.0 + ws**2 / 24.0 + ws**3 / 120.0
    big = ~small
    wb = w[big]
    out[big] = (np.expm1(wb) - wb) / wb**2
    return out


# -- domain types ----------------------------------------------------------------


@dataclass(frozen=True)
class CylinderMap:
    """Mode-in-theta, node-in-t field on [0, T] x S^1.

    values has shape (M_t + 1, 2N + 1, d); row j is the mode vector at
    t_j = j T / M_t, so restriction to a node is a well-formed Loop.
    """

    d: int
    N: int
    T: float
    M_t: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.T <= 0:
            raise ValueError("cylinder length T must be positive")
        if self.M_t < 8:
            raise ValueError("need at least M_t >= 8 time intervals")
        v = np.array(self.values, dtype=complex)
        expected = (self.M_t + 1, 2 * self.N + 1, self.d)
        if v.shape != expected:
            raise ValueError(f"values must have shape {expected}, got {v.shape}")
        if not np.all(np.isfinite(v.view(float))):
            raise ValueError("cylinder values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @staticmethod
    def zero(d: int, N: int, T: float, M_t: int) -> "CylinderMap":
        return CylinderMap(d, N, T, M_t, np.zeros((M_t + 1, 2 * N + 1, d), complex))

    @staticmethod
    def constant(loop: Loop, T: float, M_t: int) -> "CylinderMap":
        vals = np.broadcast_to(loop.coeffs, (M_t + 1,) + loop.coeffs.shape)
        return CylinderMap(loop.d, loop.N, T, M_t, vals.copy())

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.M_t + 1)

    @property
    def dt(self) -> float:
        return self.T / self.M_t

    def restrict(self, j: int) -> Loop:
        return Loop(self.d, self.N, self.values[j])

    def rest_0(self) -> Loop:
        return self.restrict(0)

    def rest_end(self) -> Loop:
        return self.restrict(self.M_t)

    def __add__(self, other: "CylinderMap") -> "CylinderMap":
        if (self.d, self.N, self.M_t) != (other.d, other.N, other.M_t) or not np.isclose(
            self.T, other.T
        ):
            raise ValueError("cylinder shape mismatch")
        return CylinderMap(self.d, self.N, self.T, self.M_t, self.values + other.values)

    def __sub__(self, other: "CylinderMap") -> "CylinderMap":
        return self + (-1.0) * other

    def __mul__(self, a: complex) -> "CylinderMap":
        return CylinderMap(self.d, self.N, self.T, self.M_t, self.values * a)

    __rmul__ = __mul__

    def to_json_dict(self) -> dict:
        return {
            "d": self.d,
            "N": self.N,
            "T": self.T,
            "M_t": self.M_t,
            "values": [
                [[[float(z.real), float(z.imag)] for z in row] for row in slab]
                for slab in self.values
            ],
        }

    @staticmethod
    def from_json_dict(obj: dict) -> "CylinderMap":
        vals = np.array(
            [
                [[complex(re, im) for re, im in row] for row in slab]
                for slab in obj["values"]
            ],
            complex,
        )
        return CylinderMap(int(obj["d"]), int(obj["N"]), float(obj["T"]), int(obj["M_t"]), vals)

    def to_csv(self, path) -> None:
        """Per-mode time series; columns mode,t,re,im (plus coord when d > 1)."""
        import csv

        times = self.times
        with open(path, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f)
            header = ["mode", "t", "re", "im"] if self.d == 1 else ["mode", "coord", "t", "re", "im"]
            w.writerow(header)
            for idx, n in enumerate(range(-self.N, self.N + 1)):
                for c in range(self.d):
                    for j, t in enumerate(times):
                        z = self.values[j, idx, c]
                        row = [n, f"{t:.12g}", f"{z.real:.17g}", f"{z.imag:.17g}"]
                        if self.d > 1:
                            row.insert(1, c)
                        w.writerow(row)


@dataclass(frozen=True)
class BoundaryData:
    """Mixed APS data beta = beta^+_0 + beta^-_eps, split by the spectrum of L.

    plus0 lives on the lambda >= 0 sector (modes n <= 0) and is prescribed at
    t = 0; minus_end lives on lambda < 0 (modes n > 0), prescribed at t = eps.
    """

    plus0: Loop
    minus_end: Loop

    def __post_init__(self):
        self.plus0._check(self.minus_end)
        if np.any(aps_project(self.plus0, "minus").coeffs != 0):
            raise ValueError("plus0 must be supported on modes n <= 0")
        if np.any(aps_project(self.minus_end, "plus").coeffs != 0):
            raise ValueError("minus_end must be supported on modes n > 0")

    @property
    def d(self) -> int:
        return self.plus0.d

    @property
    def N(self) -> int:
        return self.plus0.N

    @staticmethod
    def zero(d: int, N: int) -> "BoundaryData":
        return BoundaryData(Loop.zero(d, N), Loop.zero(d, N))

    def norm(self) -> float:
        """Combined L^2_{1/2} norm of the two spectral pieces."""
        return float(
            np.sqrt(
                sobolev_norm(self.plus0, 0.5) ** 2 + sobolev_norm(self.minus_end, 0.5) ** 2
            )
        )

    def __add__(self, other: "BoundaryData") -> "BoundaryData":
        return BoundaryData(self.plus0 + other.plus0, self.minus_end + other.minus_end)

    def __sub__(self, other: "BoundaryData") -> "BoundaryData":
        return BoundaryData(self.plus0 - other.plus0, self.minus_end - other.minus_end)

    def __mul__(self, a: complex) -> "BoundaryData":
        return BoundaryData(a * self.plus0, a * self.minus_end)

    __rmul__ = __mul__

    def total_coeffs(self) -> np.ndarray:
        return self.plus0.coeffs + self.minus_end.coeffs


def decompose(b: Loop) -> BoundaryData:
    """Split a loop into mixed boundary data whose collar solution traces b.

    The plus slot carries -Pi^+_L b: the boundary operator negates the t = 0
    trace, so this choice makes the solution restrict to Pi^+_L b at t = 0
    (and to Pi^-_L b at t = eps), i.e. short collars limit onto b itself.
    """
    return BoundaryData(
        plus0=-1.0 * aps_project(b, "plus"), minus_end=aps_project(b, "minus")
    )


def combine(bd: BoundaryData) -> Loop:
    """Inverse of decompose: b = -plus0 + minus_end."""
    return -1.0 * bd.plus0 + bd.minus_end


# -- shared finite-difference / quadrature helpers -------------------------------


def dt_derivative(values: np.ndarray, h: float) -> np.ndarray:
    """Second-order time derivative at nodes: centered inside, one-sided at ends."""
    out = np.empty_like(values)
    out[1:-1] = (values[2:] - values[:-2]) / (2.0 * h)
    out[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h)
    out[-1] = (3.0 * values[-1] - 4.0 * values[-2] + values[-3]) / (2.0 * h)
    return out


def time_trapezoid(node_values: np.ndarray, h: float) -> np.ndarray:
    """Trapezoid rule along axis 0."""
    return h * (np.sum(node_values, axis=0) - 0.5 * (node_values[0] + node_values[-1]))


# -- low-level kernels (arrays in, arrays out; trailing axes broadcast) ----------


def kernel_q_values(
    plus_coeffs: np.ndarray,
    minus_coeffs: np.ndarray,
    lam: np.ndarray,
    times: np.ndarray,
    eps: float,
) -> np.ndarray:
    """Node values of Q applied to spectral data blocks of shape (modes, ...)."""
    tt = times[:, None]
    lam_row = lam[None, :]
    # exponents are clipped at 0: they are <= 0 on each branch's own sector,
    # and the clip only silences the discarded opposite branch
    plus_factor = np.where(lam_row >= 0, -np.exp(np.minimum(-lam_row * tt, 0.0)), 0.0)
    minus_factor = np.where(lam_row < 0, np.exp(np.minimum((eps - tt) * lam_row, 0.0)), 0.0)
    extra = plus_coeffs.ndim - 1
    shape = (len(times), len(lam)) + (1,) * extra
    return plus_factor.reshape(shape) * plus_coeffs[None] + minus_factor.reshape(
        shape
    ) * minus_coeffs[None]


def kernel_p_values(g_values: np.ndarray, lam: np.ndarray, h: float) -> np.ndarray:
    """Duhamel integrals of g (shape (M_t+1, modes, ...)) against e^{-lambda (t-tau)}.

    lambda >= 0 modes integrate forward from t = 0, lambda < 0 modes backward
    from the far end; the quadrature is exact for piecewise-linear g, which
    keeps the accuracy uniform in lambda * h.
    """
    n_nodes = g_values.shape[0]
    fwd = lam >= 0
    bwd = ~fwd

    out = np.zeros_like(g_values)
    extra = g_values.ndim - 2
    reshape = (len(lam),) + (1,) * extra

    w_f = (-lam * h).reshape(reshape)
    decay_f = np.exp(w_f)
    a_f = h * (phi1(w_f) - phi2(w_f))
    b_f = h * phi2(w_f)
    mask_f = fwd.reshape(reshape)

    v_b = (lam * h).reshape(reshape)
    decay_b = np.exp(v_b)
    a_b = h * phi2(v_b)
    b_b = h * (phi1(v_b) - phi2(v_b))
    mask_b = bwd.reshape(reshape)

    for j in range(n_nodes - 1):
        out[j + 1] = np.where(
            mask_f,
            decay_f * out[j] + a_f * g_values[j] + b_f * g_values[j + 1],
            out[j + 1],
        )
    for j in range(n_nodes - 2, -1, -1):
        out[j] = np.where(
            mask_b,
            decay_b * out[j + 1] - (a_b * g_values[j] + b_b * g_values[j + 1]),
            out[j],
        )
    return out


# -- public operations ------------------------------------------------------------


@tracked("cylinder.apply_D")
def apply_D(u: CylinderMap) -> CylinderMap:
    """D u = du/dt + L u, per mode u_n' + lambda_n u_n with lambda_n = -n."""
    lam = lambda_of_modes(u.N).astype(float)
    du = dt_derivative(u.values, u.dt)
    vals = du + lam[None, :, None] * u.values
    return CylinderMap(u.d, u.N, u.T, u.M_t, vals)


@tracked("cylinder.q_op")
def q_op(beta: BoundaryData, eps: float, M_t: int = 64) -> CylinderMap:
    """Kernel element of D with the prescribed mixed boundary data."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    lam = lambda_of_modes(beta.N).astype(float)
    times = np.linspace(0.0, eps, M_t + 1)
    vals = kernel_q_values(beta.plus0.coeffs, beta.minus_end.coeffs, lam, times, eps)
    return CylinderMap(beta.d, beta.N, eps, M_t, vals)


@tracked("cylinder.p_op")
def p_op(g: CylinderMap, eps: float | None = None) -> CylinderMap:
    """Right inverse of D with vanishing mixed boundary data, applied to g."""
    if eps is not None and not np.isclose(eps, g.T):
        raise ValueError(f"eps={eps} disagrees with the field's length T={g.T}")
    lam = lambda_of_modes(g.N).astype(float)
    vals = kernel_p_values(g.values, lam, g.dt)
    return CylinderMap(g.d, g.N, g.T, g.M_t, vals)


@tracked("cylinder.aps_boundary")
def aps_boundary(u: CylinderMap) -> BoundaryData:
    """beta^+_0 = -Pi^+_L r_0(u), beta^-_eps = Pi^-_L r_eps(u)."""
    return BoundaryData(
        plus0=-1.0 * aps_project(u.rest_0(), "plus"),
        minus_end=aps_project(u.rest_end(), "minus"),
    )


@tracked("cylinder.cyl_norm")
def cyl_norm(u: CylinderMap, which: str) -> float:
    """Cylinder norms: L2, L2_1 (|u|^2 + |u_t|^2 + |u_theta|^2) or L4."""
    h = u.dt
    if which == "L2":
        density = np.sum(np.abs(u.values) ** 2, axis=(1, 2))
        return float(np.sqrt(time_trapezoid(density, h)))
    if which == "L2_1":
        n_sq = (np.arange(-u.N, u.N + 1).astype(float) ** 2)[None, :, None]
        du = dt_derivative(u.values, h)
        density = np.sum(
            (1.0 + n_sq) * np.abs(u.values) ** 2 + np.abs(du) ** 2, axis=(1, 2)
        )
        return float(np.sqrt(time_trapezoid(density, h)))
    if which == "L4":
        M = 4 * u.N
        grid = sample_coeffs(u.values, u.N, M)
        quartic = np.mean(np.sum(np.abs(grid) ** 2, axis=-1) ** 2, axis=1)
        return float(time_trapezoid(quartic, h) ** 0.25)
    raise ValueError("which must be one of 'L2', 'L2_1', 'L4'")


@tracked("cylinder.energy")
def energy(m: HamiltonianModel, u: CylinderMap) -> float:
    """E(u) = 1/2 int (|u_t|^2 + |u_theta - X_H(u)|^2) dtheta/2pi dt."""
    h = u.dt
    du = dt_derivative(u.values, h)
    n = np.arange(-u.N, u.N + 1).astype(float)
    u_theta = (1j * n)[None, :, None] * u.values
    M = 4 * u.N
    grid = sample_coeffs(u.values, u.N, M)
    xh_modes = synthesize_values(eval_XH(m, grid), u.N)
    defect = u_theta - xh_modes
    density = np.sum(np.abs(du) ** 2 + np.abs(defect) ** 2, axis=(1, 2))
    return float(0.5 * time_trapezoid(density, h))


# -- diagnostics for single-mode boundary data ------------------------------------


def trace_defect_sq(u: CylinderMap) -> float:
    """Squared L^2_{1/2} distance between the two end traces of u."""
    diff = u.rest_end() - u.rest_0()
    return sobolev_norm(diff, 0.5) ** 2


def kernel_dt_mass(u: CylinderMap) -> float:
    """int |d_t u|^2 for kernel fields of D, exactly from node values.

    On a field with d_t u_n = -lambda_n u_n (every Q output), |u_n(t)|^2 is a
    pure exponential on each interval, so the integral has a closed form in
    the node values; no finite differences enter.
    """
    lam = lambda_of_modes(u.N).astype(float)
    h = u.dt
    nz = lam != 0
    lam_nz = lam[nz]
    left_sq = np.sum(np.abs(u.values[:-1, nz, :]) ** 2, axis=2)
    weight = (1.0 - np.exp(-2.0 * lam_nz * h)) / (2.0 * lam_nz)
    per_mode = np.sum(left_sq * weight[None, :], axis=0)
    return float(np.sum(lam_nz**2 * per_mode))


def boundary_trace_half_norm_sq(u: CylinderMap) -> float:
    """Squared L^2_{1/2} norm of the full boundary trace (both end circles)."""
    return sobolev_norm(u.rest_0(), 0.5) ** 2 + sobolev_norm(u.rest_end(), 0.5) ** 2
