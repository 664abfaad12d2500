"""Truncated Fourier loops in C^d with Sobolev norms and spectral projections.

A loop gamma(theta) = sum_n c_n e^{i n theta}, |n| <= N, is stored as the
dense coefficient block c_{-N}..c_N.  All integrals over the circle use the
normalized measure dtheta/2pi, so Parseval reads ||gamma||_{L^2}^2 =
sum |c_n|^2 and the half-norm squared is sum |c_n|^2 |n| + |c_0|^2.

Two splittings of the mode range are used throughout:

* polarization:   plus  = modes n > 0,  minus = modes n <= 0
  (eigenspaces of -J d/dtheta with positive / nonpositive eigenvalue n);
* spectral (APS): plus  = modes n <= 0, minus = modes n > 0
  (L = J d/dtheta has eigenvalue -n on mode n, so nonnegative spectrum
  means n <= 0).

Values on a theta-grid are reached through an FFT bridge (`sample` /
`synthesize`) used for pointwise nonlinearities.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coverage import tracked


@dataclass(frozen=True)
class SpectralConvention:
    """Fixed spectral conventions, recorded in every report."""

    angular_measure: str = "dtheta/2pi"
    complex_structure: str = "J = multiplication by i"
    eigenvalue_minus_J_dtheta: str = "mode n -> n"
    eigenvalue_L_J_dtheta: str = "mode n -> -n"
    polarization_plus: str = "modes n > 0"
    polarization_minus: str = "modes n <= 0"
    aps_plus: str = "lambda >= 0, i.e. modes n <= 0"
    aps_minus: str = "lambda < 0, i.e. modes n > 0"
    zero_mode_half_weight: str = "+|c_0|^2"

    def as_dict(self) -> dict:
        return {
            "angular_measure": self.angular_measure,
            "complex_structure": self.complex_structure,
            "eigenvalue_minus_J_dtheta": self.eigenvalue_minus_J_dtheta,
            "eigenvalue_L_J_dtheta": self.eigenvalue_L_J_dtheta,
            "polarization_plus": self.polarization_plus,
            "polarization_minus": self.polarization_minus,
            "aps_plus": self.aps_plus,
            "aps_minus": self.aps_minus,
            "zero_mode_half_weight": self.zero_mode_half_weight,
        }


CONVENTION = SpectralConvention()

#: coefficient-wise tolerance for loop equality where no exact check is stated
LOOP_ATOL = 1e-12


def mode_numbers(N: int) -> np.ndarray:
    """Mode indices n = -N..N in storage order."""
    return np.arange(-N, N + 1)


def lambda_of_modes(N: int) -> np.ndarray:
    """Eigenvalues of L = J d/dtheta in storage order (lambda_n = -n)."""
    return -mode_numbers(N)


def sobolev_weights(order: float, N: int) -> np.ndarray:
    """Mode weights for the L^2 (0), L^2_{1/2} (0.5) and L^2_1 (1) norms."""
    n = mode_numbers(N)
    if order == 0:
        return np.ones_like(n, dtype=float)
    if order == 0.5:
        w = np.abs(n).astype(float)
        w[N] = 1.0  # zero mode carries weight +1
        return w
    if order == 1:
        return 1.0 + n.astype(float) ** 2
    raise ValueError(f"unsupported Sobolev order {order!r}; use 0, 0.5 or 1")


@dataclass(frozen=True)
class Loop:
    """A truncated Fourier loop: coeffs[N + n] is c_n in C^d."""

    d: int
    N: int
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.d < 1 or self.N < 1:
            raise ValueError("Loop needs d >= 1 and N >= 1")
        c = np.array(self.coeffs, dtype=complex)
        if c.shape != (2 * self.N + 1, self.d):
            raise ValueError(
                f"coefficient block must have shape {(2 * self.N + 1, self.d)}, "
                f"got {c.shape}"
            )
        if not np.all(np.isfinite(c.view(float))):
            raise ValueError("loop coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    # -- constructors -------------------------------------------------------

    @staticmethod
    def zero(d: int, N: int) -> "Loop":
        return Loop(d, N, np.zeros((2 * N + 1, d), complex))

    @staticmethod
    def from_modes(d: int, N: int, modes: dict[int, np.ndarray | complex]) -> "Loop":
        """Build a loop from a {n: c_n} dict; scalar entries go to coordinate 0."""
        c = np.zeros((2 * N + 1, d), complex)
        for n, v in modes.items():
            if abs(n) > N:
                raise ValueError(f"mode {n} outside [-{N}, {N}]")
            v = np.asarray(v, dtype=complex)
            if v.ndim == 0:
                c[N + n, 0] = v
            else:
                c[N + n, :] = v
        return Loop(d, N, c)

    # -- accessors ----------------------------------------------------------

    def mode(self, n: int) -> np.ndarray:
        if abs(n) > self.N:
            raise ValueError(f"mode {n} outside [-{self.N}, {self.N}]")
        return self.coeffs[self.N + n]

    @property
    def modes(self) -> np.ndarray:
        return mode_numbers(self.N)

    # -- arithmetic (shape-checked) ------------------------------------------

    def _check(self, other: "Loop") -> None:
        if self.d != other.d or self.N != other.N:
            raise ValueError(
                f"loop shape mismatch: (d={self.d}, N={self.N}) vs "
                f"(d={other.d}, N={other.N})"
            )

    def __add__(self, other: "Loop") -> "Loop":
        self._check(other)
        return Loop(self.d, self.N, self.coeffs + other.coeffs)

    def __sub__(self, other: "Loop") -> "Loop":
        self._check(other)
        return Loop(self.d, self.N, self.coeffs - other.coeffs)

    def __mul__(self, a: complex) -> "Loop":
        return Loop(self.d, self.N, self.coeffs * a)

    __rmul__ = __mul__

    def __neg__(self) -> "Loop":
        return Loop(self.d, self.N, -self.coeffs)

    def allclose(self, other: "Loop", atol: float = LOOP_ATOL) -> bool:
        self._check(other)
        return bool(np.max(np.abs(self.coeffs - other.coeffs)) <= atol)

    # -- serialization -------------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "d": self.d,
            "N": self.N,
            "coeffs": [
                [[float(z.real), float(z.imag)] for z in row] for row in self.coeffs
            ],
        }

    @staticmethod
    def from_json_dict(obj: dict) -> "Loop":
        d, N = int(obj["d"]), int(obj["N"])
        c = np.array(
            [[complex(re, im) for re, im in row] for row in obj["coeffs"]], complex
        )
        return Loop(d, N, c)


# -- norms and inner products -------------------------------------------------


@tracked("loopspace.sobolev_norm")
def sobolev_norm(gamma: Loop, order: float) -> float:
    """Sobolev norm of the loop: order 0, 1/2 (|n| weight, +1 on c_0) or 1."""
    w = sobolev_weights(order, gamma.N)
    return float(np.sqrt(np.sum(w[:, None] * np.abs(gamma.coeffs) ** 2)))


@tracked("loopspace.inner")
def inner(gamma: Loop, delta: Loop, order: float = 0) -> float:
    """Real inner product inducing sobolev_norm: inner(g, g, k) = norm(g, k)^2."""
    gamma._check(delta)
    if order not in (0, 0.5):
        raise ValueError("inner supports orders 0 and 0.5")
    w = sobolev_weights(order, gamma.N)
    return float(np.sum(w[:, None] * (gamma.coeffs * delta.coeffs.conj()).real))


# -- polarization and APS projections -----------------------------------------


def _sector_mask(N: int, positive: bool) -> np.ndarray:
    n = mode_numbers(N)
    return (n > 0) if positive else (n <= 0)


@tracked("loopspace.project")
def project(gamma: Loop, sector: str) -> Loop:
    """Polarization projection: 'plus' keeps modes n > 0, 'minus' keeps n <= 0."""
    if sector not in ("plus", "minus"):
        raise ValueError("sector must be 'plus' or 'minus'")
    mask = _sector_mask(gamma.N, positive=(sector == "plus"))
    c = np.where(mask[:, None], gamma.coeffs, 0.0)
    return Loop(gamma.d, gamma.N, c)


@tracked("loopspace.aps_project")
def aps_project(gamma: Loop, sector: str) -> Loop:
    """Spectral projection of L: 'plus' keeps lambda >= 0 (n <= 0), 'minus' lambda < 0."""
    if sector not in ("plus", "minus"):
        raise ValueError("sector must be 'plus' or 'minus'")
    mask = _sector_mask(gamma.N, positive=(sector == "minus"))
    c = np.where(mask[:, None], gamma.coeffs, 0.0)
    return Loop(gamma.d, gamma.N, c)


# -- FFT bridge ---------------------------------------------------------------


def _check_grid(M: int, N: int) -> None:
    if M < 2 * N + 2:
        raise ValueError(f"grid size M={M} must be >= 2N+2 = {2 * N + 2}")


def sample_coeffs(coeffs: np.ndarray, N: int, M: int) -> np.ndarray:
    """Evaluate a coefficient block (..., 2N+1, d) on the M-point theta grid."""
    _check_grid(M, N)
    shape = coeffs.shape[:-2] + (M,) + coeffs.shape[-1:]
    spec = np.zeros(shape, complex)
    n = mode_numbers(N)
    spec[..., n % M, :] = coeffs
    return np.fft.ifft(spec, axis=-2) * M


def synthesize_values(values: np.ndarray, N: int) -> np.ndarray:
    """Fourier coefficients |n| <= N of grid values (..., M, d)."""
    M = values.shape[-2]
    _check_grid(M, N)
    spec = np.fft.fft(values, axis=-2) / M
    n = mode_numbers(N)
    return spec[..., n % M, :]


@tracked("loopspace.sample")
def sample(gamma: Loop, M: int) -> np.ndarray:
    """Values gamma(theta_j) at theta_j = 2 pi j / M, shape (M, d)."""
    return sample_coeffs(gamma.coeffs, gamma.N, M)


@tracked("loopspace.synthesize")
def synthesize(values: np.ndarray, N: int) -> Loop:
    """Loop with the Fourier coefficients |n| <= N of the given grid values."""
    values = np.asarray(values, dtype=complex)
    if values.ndim == 1:
        values = values[:, None]
    return Loop(values.shape[1], N, synthesize_values(values, N))


# -- random loops (deterministic given rng) -----------------------------------


def gaussian_loop(
    d: int, N: int, rng: np.random.Generator, scale: float = 1.0, max_mode: int | None = None
) -> Loop:
    """Loop with iid complex Gaussian coefficients (optionally band-limited)."""
    c = scale * (
        rng.standard_normal((2 * N + 1, d)) + 1j * rng.standard_normal((2 * N + 1, d))
    )
    if max_mode is not None:
        mask = np.abs(mode_numbers(N)) <= max_mode
        c = np.where(mask[:, None], c, 0.0)
    return Loop(d, N, c)
