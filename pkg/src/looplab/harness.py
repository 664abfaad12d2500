"""Verification harness: configurations, check suites, reports, sweep CSVs.

Every quantitative claim the package implements is re-run here as a named
check with an explicit bound; a report row records the computed value, the
bound, the margin (bound - computed, nonnegative iff the check passes) and
an anchor string stating the identity or inequality under test.  Runs are
deterministic: all randomness derives from the config seed, reports carry
no timestamps, and rerunning a config reproduces the report byte for byte.
"""

from __future__ import annotations

import csv
import json
import os
import sys
import zlib
from dataclasses import dataclass, field

import numpy as np

from . import coverage
from .coverage import tracked
from .cylinder import (
    BoundaryData,
    CylinderMap,
    aps_boundary,
    apply_D,
    cyl_norm,
    decompose,
    dt_derivative,
    energy,
    kernel_dt_mass,
    kernel_p_values,
    kernel_q_values,
    p_op,
    q_op,
    time_trapezoid,
    trace_defect_sq,
)
from .hamiltonian import (
    HamiltonianModel,
    action,
    eval_H,
    eval_XH,
    eval_compact_part,
    eval_gradH,
    grad_action,
    k_factor,
    k_factor_constant,
    lipschitz_constant,
    split,
)
from .loops import (
    CONVENTION,
    Loop,
    aps_project,
    gaussian_loop,
    inner,
    lambda_of_modes,
    mode_numbers,
    project,
    sample,
    sample_coeffs,
    sobolev_norm,
    sobolev_weights,
    synthesize,
)
from .solver import (
    BallExit,
    ContractionFailure,
    collar_solve,
    flow_step,
    flow_trajectory,
    gf_pushforward,
    h_eps_sensitivity,
    picard_solve,
)
from . import cycles as cyc

SUITES = ("norms", "aps", "contraction", "flow", "orbits")

DEFAULT_TOLERANCES = {
    "solver": 1e-11,
    "identity": 1e-5,
    "identity_refined": 1e-8,
    "gradient": 1e-5,
    "exact": 1e-12,
    "aps_defect": 1e-10,
    "aps_mass": 1e-6,
    "right_inverse": 1e-6,
    "uniformity_factor": 4.0,
}


@dataclass
class Config:
    """Run configuration; identical configs produce byte-identical reports."""

    model: HamiltonianModel = field(default_factory=HamiltonianModel)
    N: int = 32
    M_t: int = 64
    M_theta: int | None = None
    eps_list: tuple = (1.0, 0.5, 0.1, 0.01, 0.001)
    tolerances: dict = field(default_factory=dict)
    seed: int = 2026
    output_dir: str = "lab_out"

    def __post_init__(self):
        merged = dict(DEFAULT_TOLERANCES)
        merged.update(self.tolerances)
        if any(v <= 0 for v in merged.values()):
            raise ValueError("every tolerance must be strictly positive")
        self.tolerances = merged
        if self.M_theta is None:
            self.M_theta = 4 * self.N
        if self.N < 4 or self.M_t < 8:
            raise ValueError("need N >= 4 and M_t >= 8")

    def tol(self, key: str) -> float:
        return self.tolerances[key]

    def rng(self, label: str) -> np.random.Generator:
        return np.random.default_rng(
            (self.seed * 1000003 + zlib.crc32(label.encode())) % 2**63
        )

    def to_json_dict(self) -> dict:
        return {
            "model": self.model.to_json_dict(),
            "N": self.N,
            "M_t": self.M_t,
            "M_theta": self.M_theta,
            "eps_list": list(self.eps_list),
            "tolerances": dict(sorted(self.tolerances.items())),
            "seed": self.seed,
            "output_dir": self.output_dir,
        }

    @staticmethod
    def from_json_dict(obj: dict) -> "Config":
        return Config(
            model=HamiltonianModel.from_json_dict(obj.get("model", {})),
            N=int(obj.get("N", 32)),
            M_t=int(obj.get("M_t", 64)),
            M_theta=obj.get("M_theta"),
            eps_list=tuple(obj.get("eps_list", (1.0, 0.5, 0.1, 0.01, 0.001))),
            tolerances=dict(obj.get("tolerances", {})),
            seed=int(obj.get("seed", 2026)),
            output_dir=str(obj.get("output_dir", "lab_out")),
        )

    @staticmethod
    def from_json_file(path) -> "Config":
        with open(path, "r", encoding="utf-8") as f:
            return Config.from_json_dict(json.load(f))


@dataclass
class CheckRecord:
    name: str
    anchor: str
    computed: float
    bound: float
    details: dict = field(default_factory=dict)

    @property
    def margin(self) -> float:
        return self.bound - self.computed

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.computed)) and self.margin >= 0

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "anchor": self.anchor,
            "computed": float(self.computed),
            "bound": float(self.bound),
            "margin": float(self.margin),
            "passed": self.passed,
            "details": self.details,
        }


@dataclass
class Report:
    suite: str
    config: Config
    records: list
    coverage_counts: dict
    coverage_complete: bool
    constants: dict

    @property
    def passed(self) -> bool:
        suite_ok = all(r.passed for r in self.records)
        if self.suite == "all":
            return suite_ok and self.coverage_complete
        return suite_ok

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def to_json_dict(self) -> dict:
        records = sorted(self.records, key=lambda r: r.name)
        return {
            "suite": self.suite,
            "passed": self.passed,
            "num_checks": len(records),
            "num_failed": sum(not r.passed for r in records),
            "environment": {
                "convention": CONVENTION.as_dict(),
                "constants": self.constants,
                "grid": {
                    "N": self.config.N,
                    "M_t": self.config.M_t,
                    "M_theta": self.config.M_theta,
                },
                "platform_note": f"{sys.platform}; numpy {np.__version__}",
            },
            "config": self.config.to_json_dict(),
            "checks": [r.to_json_dict() for r in records],
            "coverage": dict(sorted(self.coverage_counts.items())),
            "coverage_complete": self.coverage_complete,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True)

    def summary_lines(self) -> list[str]:
        lines = []
        for r in sorted(self.records, key=lambda x: x.name):
            status = "PASS" if r.passed else "FAIL"
            lines.append(
                f"[{status}] {r.name}: computed={r.computed:.6g} "
                f"bound={r.bound:.6g} margin={r.margin:.6g}"
            )
        lines.append(
            f"suite {self.suite}: {len(self.records)} checks, "
            f"{sum(not r.passed for r in self.records)} failed"
        )
        return lines


class _Runner:
    """Accumulates check records; exceptions become failing records."""

    def __init__(self, config: Config):
        self.config = config
        self.records: list[CheckRecord] = []

    def check(self, name, anchor, computed, bound, details=None):
        self.records.append(
            CheckRecord(
                name=name,
                anchor=anchor,
                computed=float(computed),
                bound=float(bound),
                details=details or {},
            )
        )

    def guard(self, name: str, anchor: str, fn) -> None:
        try:
            fn()
        except Exception as exc:  # failure isolation: record, keep going
            self.check(
                name + ".error",
                anchor,
                computed=np.inf,
                bound=0.0,
                details={"exception": f"{type(exc).__name__}: {exc}"},
            )


# -- batch helpers for the sweep checks ------------------------------------------


def _random_loop_batch(rng, N: int, batch: int, max_mode: int | None = None) -> np.ndarray:
    """Coefficient block (2N+1, batch) of iid complex Gaussians."""
    c = rng.standard_normal((2 * N + 1, batch)) + 1j * rng.standard_normal(
        (2 * N + 1, batch)
    )
    if max_mode is not None:
        mask = np.abs(mode_numbers(N)) <= max_mode
        c = np.where(mask[:, None], c, 0.0)
    return c


def _random_smooth_fields(rng, N: int, M_t: int, batch: int) -> np.ndarray:
    """Fields (M_t+1, 2N+1, batch): random quadratic t-profiles per mode."""
    tau = np.linspace(0.0, 1.0, M_t + 1)[:, None, None]
    cs = [
        rng.standard_normal((2 * N + 1, batch)) + 1j * rng.standard_normal((2 * N + 1, batch))
        for _ in range(3)
    ]
    return cs[0][None] + cs[1][None] * tau + cs[2][None] * tau**2


def _half_norm_batch(coeffs: np.ndarray, N: int) -> np.ndarray:
    w = sobolev_weights(0.5, N)
    return np.sqrt(np.sum(w[:, None] * np.abs(coeffs) ** 2, axis=0))


def _l2_batch(values: np.ndarray, h: float) -> np.ndarray:
    density = np.sum(np.abs(values) ** 2, axis=1)
    return np.sqrt(time_trapezoid(density, h))


def _l21_batch(values: np.ndarray, h: float, N: int) -> np.ndarray:
    n_sq = mode_numbers(N).astype(float) ** 2
    du = dt_derivative(values, h)
    density = np.sum(
        (1.0 + n_sq)[None, :, None] * np.abs(values) ** 2 + np.abs(du) ** 2, axis=1
    )
    return np.sqrt(time_trapezoid(density, h))


def _l4_batch(values: np.ndarray, h: float, N: int, M: int) -> np.ndarray:
    # reorder to (T+1, batch, modes, 1) so the theta axis lands second-to-last
    sampled = sample_coeffs(np.swapaxes(values, 1, 2)[..., None], N, M)[..., 0]
    quartic = np.mean(np.abs(sampled) ** 4, axis=-1)  # (T+1, batch)
    return time_trapezoid(quartic, h) ** 0.25


def _boundary_half_norm_batch(values: np.ndarray, N: int) -> np.ndarray:
    """Half-norm of the full boundary trace (both ends) per batch column."""
    w = sobolev_weights(0.5, N)[:, None]
    return np.sqrt(
        np.sum(w * np.abs(values[0]) ** 2, axis=0)
        + np.sum(w * np.abs(values[-1]) ** 2, axis=0)
    )


def _trend_slope(eps_values: np.ndarray, estimates: np.ndarray) -> float:
    """Least-squares slope of log(estimate) against log(eps)."""
    x = np.log(np.asarray(eps_values, float))
    y = np.log(np.asarray(estimates, float))
    x = x - x.mean()
    return float(np.sum(x * (y - y.mean())) / np.sum(x * x))


# -- norms suite -------------------------------------------------------------------


def _suite_norms(config: Config, run: _Runner) -> None:
    m = config.model
    N, d = config.N, 1
    rng = config.rng("norms")
    tol_exact = config.tol("exact")

    def parseval():
        worst = 0.0
        for _ in range(50):
            g = gaussian_loop(d, N, rng)
            M = 4 * N
            thetas = 2 * np.pi * np.arange(M) / M
            phases = np.exp(1j * np.outer(thetas, g.modes))
            vals = phases @ g.coeffs
            quad = float(np.mean(np.sum(np.abs(vals) ** 2, axis=1)))
            nrm = sobolev_norm(g, 0) ** 2
            worst = max(worst, abs(nrm - quad) / nrm)
        run.check(
            "norms.parseval",
            "sum_n |c_n|^2 = int |gamma|^2 dtheta/2pi",
            worst,
            1e-10,
        )

    def half_norm_example():
        g = Loop.from_modes(1, N, {2: 3.0})
        run.check(
            "norms.half_norm_single_mode",
            "||gamma||^2_{1/2} = sum |c_n|^2 |n| + |c_0|^2",
            abs(sobolev_norm(g, 0.5) ** 2 - 18.0),
            1e-13,
        )

    def projections():
        worst_partition = worst_annihilate = worst_monotone = worst_aps = 0.0
        for _ in range(40):
            g = gaussian_loop(d, N, rng)
            recon = project(g, "plus") + project(g, "minus")
            worst_partition = max(
                worst_partition, float(np.max(np.abs(recon.coeffs - g.coeffs)))
            )
            pm = project(project(g, "plus"), "minus")
            worst_annihilate = max(worst_annihilate, float(np.max(np.abs(pm.coeffs))))
            worst_monotone = max(
                worst_monotone,
                sobolev_norm(project(g, "plus"), 0.5) - sobolev_norm(g, 0.5),
            )
            diff = aps_project(g, "plus") - project(g, "minus")
            worst_aps = max(worst_aps, float(np.max(np.abs(diff.coeffs))))
        run.check("norms.projection_partition", "Pi+ + Pi- = id", worst_partition, 0.0)
        run.check("norms.projection_annihilate", "Pi- Pi+ = 0", worst_annihilate, 0.0)
        run.check(
            "norms.projection_monotone",
            "||Pi gamma||_{1/2} <= ||gamma||_{1/2}",
            worst_monotone,
            0.0,
        )
        run.check(
            "norms.aps_plus_is_polarization_minus",
            "spectral projection lambda >= 0 keeps modes n <= 0",
            worst_aps,
            0.0,
        )

    def roundtrip():
        worst = 0.0
        for _ in range(20):
            g = gaussian_loop(d, N, rng)
            back = synthesize(sample(g, 4 * N), N)
            worst = max(worst, float(np.max(np.abs(back.coeffs - g.coeffs))))
        run.check(
            "norms.sampling_roundtrip",
            "synthesize(sample(gamma, M >= 2N+2)) = gamma",
            worst,
            tol_exact,
        )

    def inner_consistency():
        worst = 0.0
        for _ in range(20):
            g = gaussian_loop(d, N, rng)
            h = gaussian_loop(d, N, rng)
            for order in (0, 0.5):
                nrm = sobolev_norm(g, order) ** 2
                worst = max(worst, abs(inner(g, g, order) - nrm) / (1 + nrm))
                worst = max(worst, abs(inner(g, h, order) - inner(h, g, order)))
        run.check(
            "norms.inner_consistency",
            "inner(g, g, k) = ||g||_k^2 and symmetry",
            worst,
            1e-13,
        )

    def gradient_fd():
        # central finite differences of the action along 100 random directions
        worst = 0.0
        h = 1e-4
        for _ in range(100):
            g = gaussian_loop(d, N, rng, scale=0.12)
            delta = gaussian_loop(d, N, rng, scale=0.12)
            pairing = inner(grad_action(m, g), delta, 0)
            fd = (action(m, g + h * delta) - action(m, g - h * delta)) / (2 * h)
            worst = max(worst, abs(pairing - fd) / (1 + abs(pairing)))
        run.check(
            "norms.gradient_finite_difference",
            "grad CSD = -J gamma' - grad H(gamma), paired against central differences",
            worst,
            config.tol("gradient"),
        )

    def action_closed_forms():
        worst = 0.0
        for k, r in ((1, 0.9), (2, 1.7), (1, 0.1)):
            g = Loop.from_modes(1, N, {k: r})
            expected = 0.5 * k * r**2 - float(m.h(r**2))
            worst = max(worst, abs(action(m, g) - expected))
        run.check(
            "norms.action_radial_closed_form",
            "CSD(r e^{ik theta}) = k r^2 / 2 - h(r^2)",
            worst,
            tol_exact,
        )

    def splitting_checks():
        spl = split(m)
        x = 2.5 * (rng.standard_normal((500, 1)) + 1j * rng.standard_normal((500, 1)))
        recon = spl.c * x + eval_compact_part(spl, x)
        worst = float(np.max(np.abs(recon - eval_XH(m, x))))
        run.check(
            "norms.splitting_exact",
            "X_H = c u + X_{H_c} with c = 2(1+eps) i",
            worst,
            1e-13,
        )
        run.check(
            "norms.splitting_nonresonant_flag",
            "c not in i Z when 2(1+eps) is not an integer",
            0.0 if spl.nonresonant else 1.0,
            0.5,
            details={"c_imag": 2.0 * m.slope},
        )
        far = np.array([[3.0 + 0.5j]])
        run.check(
            "norms.compact_part_support",
            "X_{H_c} = 0 for |x|^2 >= s1",
            float(np.max(np.abs(eval_compact_part(spl, far)))),
            0.0,
        )
        # L^2 continuity of the compact part on loop samples
        C = spl.lipschitz_bound()
        worst_ratio = 0.0
        for _ in range(50):
            a = gaussian_loop(d, N, rng)
            b = gaussian_loop(d, N, rng)
            xa, xb = sample(a, 4 * N), sample(b, 4 * N)
            lhs = np.sqrt(
                np.mean(np.sum(np.abs(eval_compact_part(spl, xa) - eval_compact_part(spl, xb)) ** 2, axis=1))
            )
            rhs = C * np.sqrt(np.mean(np.sum(np.abs(xa - xb) ** 2, axis=1)))
            worst_ratio = max(worst_ratio, lhs - rhs)
        run.check(
            "norms.compact_part_l2_continuity",
            "||X_{H_c}(u1) - X_{H_c}(u2)||_{L^2} <= C ||u1 - u2||_{L^2}",
            worst_ratio,
            0.0,
            details={"lipschitz_bound": C},
        )

    def k_factor_checks():
        C = k_factor_constant(m)
        x = 3.0 * (rng.standard_normal((10_000, 1)) + 1j * rng.standard_normal((10_000, 1)))
        y = 3.0 * (rng.standard_normal((10_000, 1)) + 1j * rng.standard_normal((10_000, 1)))
        kap = k_factor(m, x)
        exact = float(np.max(np.abs(kap[:, None] * 1j * x - eval_XH(m, x))))
        run.check("norms.k_factor_exact", "X_H(x) = K(x) x with K = 2h'(|x|^2) J", exact, 0.0)
        r = np.sqrt(np.sum(np.abs(x) ** 2, axis=1))
        bound_defect = float(np.max(kap - C * r))
        run.check(
            "norms.k_factor_linear_bound",
            "|K(x)| <= C |x| with K(0) = 0",
            bound_defect,
            0.0,
            details={"C": C},
        )
        lhs = np.sqrt(np.sum(np.abs(eval_XH(m, x) - eval_XH(m, y)) ** 2, axis=1))
        ry = np.sqrt(np.sum(np.abs(y) ** 2, axis=1))
        dxy = np.sqrt(np.sum(np.abs(x - y) ** 2, axis=1))
        prod_defect = float(np.max(lhs - 2 * C * (r + ry) * dxy))
        run.check(
            "norms.k_factor_product_lipschitz",
            "|K(x) x - K(y) y| <= 2C (|x| + |y|) |x - y|",
            prod_defect,
            0.0,
        )

    def nonlinear_l4_lipschitz():
        C = lipschitz_constant(m)
        worst = 0.0
        for _ in range(1000):
            a = rng.standard_normal((9, 48, 1)) + 1j * rng.standard_normal((9, 48, 1))
            b = rng.standard_normal((9, 48, 1)) + 1j * rng.standard_normal((9, 48, 1))
            lhs = np.sqrt(np.mean(np.sum(np.abs(eval_XH(m, a) - eval_XH(m, b)) ** 2, axis=-1)))
            na = np.mean(np.sum(np.abs(a) ** 2, axis=-1) ** 2) ** 0.25
            nb = np.mean(np.sum(np.abs(b) ** 2, axis=-1) ** 2) ** 0.25
            nd = np.mean(np.sum(np.abs(a - b) ** 2, axis=-1) ** 2) ** 0.25
            worst = max(worst, lhs - 2 * C * (na + nb) * nd)
        run.check(
            "norms.nonlinear_lipschitz_l4",
            "||X_H(a) - X_H(b)||_{L^2} <= 2C (||a||_{L^4} + ||b||_{L^4}) ||a - b||_{L^4}",
            worst,
            0.0,
            details={"C": C},
        )

    def gradient_fd_pointwise():
        # central differences of H against grad H in the transition band
        worst = 0.0
        h = 1e-6
        for _ in range(25):
            s = rng.uniform(m.s0 + 0.05, m.s1 - 0.1)
            phase = rng.uniform(0, 2 * np.pi)
            x = np.array([np.sqrt(s) * np.exp(1j * phase)], complex)
            g = eval_gradH(m, x)[0]
            for direction in (1.0, 1j):
                fd = (
                    eval_H(m, x + h * np.array([direction]))
                    - eval_H(m, x - h * np.array([direction]))
                ) / (2 * h)
                exact = (g * np.conj(direction)).real
                worst = max(worst, abs(fd - exact) / (1 + abs(exact)))
        run.check(
            "norms.hamiltonian_gradient_fd",
            "grad H = 2 h'(|x|^2) x against central differences",
            worst,
            1e-6,
        )

    for name, anchor, fn in [
        ("norms.parseval", "parseval", parseval),
        ("norms.half_norm_single_mode", "half norm", half_norm_example),
        ("norms.projections", "projections", projections),
        ("norms.sampling_roundtrip", "fft bridge", roundtrip),
        ("norms.inner_consistency", "inner products", inner_consistency),
        ("norms.gradient_finite_difference", "gradient fd", gradient_fd),
        ("norms.action_closed_forms", "radial action", action_closed_forms),
        ("norms.splitting", "linear/compact splitting", splitting_checks),
        ("norms.k_factor", "K factorization", k_factor_checks),
        ("norms.nonlinear_l4", "L4 Lipschitz", nonlinear_l4_lipschitz),
        ("norms.hamiltonian_gradient_fd", "pointwise gradient fd", gradient_fd_pointwise),
    ]:
        run.guard(name, anchor, fn)


# -- aps suite ----------------------------------------------------------------------


def _suite_aps(config: Config, run: _Runner) -> None:
    N = config.N
    M_t = config.M_t
    lam_all = lambda_of_modes(N).astype(float)

    def mode_identities():
        worst_defect = worst_mass = 0.0
        min_margin = np.inf
        for eps in (0.5, 0.1, 0.01):
            for lam in range(1, N + 1):
                beta = BoundaryData(
                    plus0=Loop.from_modes(1, N, {-lam: 1.0}), minus_end=Loop.zero(1, N)
                )
                u = q_op(beta, eps, M_t=M_t)
                defect = trace_defect_sq(u)
                expected_defect = lam * (1 - np.exp(-eps * lam)) ** 2
                mass = 2.0 * kernel_dt_mass(u)
                expected_mass = lam * (1 - np.exp(-2 * eps * lam))
                worst_defect = max(worst_defect, abs(defect - expected_defect))
                worst_mass = max(worst_mass, abs(mass - expected_mass))
                min_margin = min(min_margin, expected_mass - defect)
        run.check(
            "aps.q_boundary_defect_closed_form",
            "||phi - Q(phi)|_{eps}||^2_{1/2} = lambda (1 - e^{-eps lambda})^2",
            worst_defect,
            config.tol("aps_defect"),
        )
        run.check(
            "aps.q_dt_mass_closed_form",
            "2 int |d_t Q(phi)|^2 = lambda (1 - e^{-2 eps lambda})",
            worst_mass,
            config.tol("aps_mass"),
        )
        run.check(
            "aps.q_defect_inequality",
            "lambda (1 - e^{-eps lambda})^2 <= lambda (1 - e^{-2 eps lambda})",
            -min_margin,
            0.0,
            details={"min_margin": float(min_margin)},
        )

    def q_right_inverse_identity():
        rng = config.rng("aps.q_identity")
        worst_id = 0.0
        worst_kernel = 0.0
        for eps in (0.5, 0.1, 0.01):
            for _ in range(10):
                beta = decompose(Loop(1, N, _random_loop_batch(rng, N, 1)))
                u = q_op(beta, eps, M_t=M_t)
                back = aps_boundary(u)
                worst_id = max(
                    worst_id,
                    float(np.max(np.abs(back.plus0.coeffs - beta.plus0.coeffs))),
                    float(np.max(np.abs(back.minus_end.coeffs - beta.minus_end.coeffs))),
                )
            # Q lands in the kernel of D: the finite-difference defect is O(h^2)
            m_fine = max(M_t, int(np.ceil(40 * N * eps)))
            beta = decompose(Loop(1, N, _random_loop_batch(rng, N, 1)))
            u = q_op(beta, eps, M_t=m_fine)
            rel = float(np.max(np.abs(apply_D(u).values))) / float(np.max(np.abs(u.values)))
            worst_kernel = max(worst_kernel, rel)
        run.check(
            "aps.q_boundary_right_inverse",
            "aps_boundary(Q(beta)) = beta exactly per mode",
            worst_id,
            config.tol("exact"),
        )
        run.check(
            "aps.q_kernel_of_d",
            "D Q(beta) = 0 (finite-difference defect on a resolving grid)",
            worst_kernel,
            1e-3,
        )

    def right_inverse():
        rng = config.rng("aps.right_inverse")
        tol = config.tol("right_inverse")
        worst_rel = 0.0
        worst_trace = 0.0
        w = sobolev_weights(0.5, N)[:, None]
        plus_mask = (mode_numbers(N) <= 0)[:, None]
        for eps in config.eps_list:
            M_ref = max(2048, int(np.ceil(12000 * eps)))
            h = eps / M_ref
            for chunk in range(10):
                g_vals = _random_smooth_fields(rng, N, M_ref, 10)
                u_vals = kernel_p_values(g_vals, lam_all, h)
                du = dt_derivative(u_vals, h) + lam_all[None, :, None] * u_vals
                rel = _l2_batch(du - g_vals, h) / _l2_batch(g_vals, h)
                worst_rel = max(worst_rel, float(np.max(rel)))
                # prescribed boundary components of P g vanish
                trace0 = np.sqrt(np.sum(w * plus_mask * np.abs(u_vals[0]) ** 2, axis=0))
                trace1 = np.sqrt(np.sum(w * ~plus_mask * np.abs(u_vals[-1]) ** 2, axis=0))
                worst_trace = max(worst_trace, float(np.max(trace0)), float(np.max(trace1)))
        run.check(
            "aps.right_inverse_residual",
            "D P g = g (relative L^2 residual on refined grids)",
            worst_rel,
            tol,
        )
        run.check(
            "aps.right_inverse_boundary",
            "-Pi+ r_0(P g) = 0 and Pi- r_eps(P g) = 0",
            worst_trace,
            config.tol("aps_defect"),
        )

    def uniformity():
        rng = config.rng("aps.uniformity")
        eps_values = np.asarray(config.eps_list, float)
        factor = config.tol("uniformity_factor")
        est_p, est_q, est_r, est_mix = [], [], [], []
        for eps in eps_values:
            # resolve the stiffest transient (lambda * h <= 0.1) so the
            # estimates measure the operators, not the grid
            m_eff = max(M_t, int(np.ceil(10 * N * eps)))
            h = eps / m_eff
            times = np.linspace(0.0, eps, m_eff + 1)
            # Q: per-mode unit probes (the exact extremizers) plus random mixes
            mixes = _random_loop_batch(rng, N, 1000)
            probes = np.eye(2 * N + 1)
            c = np.concatenate([probes, mixes], axis=1)
            plus = np.where((mode_numbers(N) <= 0)[:, None], c, 0.0)
            minus = np.where((mode_numbers(N) > 0)[:, None], c, 0.0)
            qv = kernel_q_values(plus, minus, lam_all, times, eps)
            est_q.append(float(np.max(_l21_batch(qv, h, N) / _half_norm_batch(c, N))))
            # P and the restriction bound: per-mode constant probes + smooth mixes
            g_probe = np.broadcast_to(probes, (m_eff + 1,) + probes.shape).astype(complex)
            g_mix = _random_smooth_fields(rng, N, m_eff, 1000)
            g_vals = np.concatenate([g_probe, g_mix], axis=2)
            pv = kernel_p_values(g_vals, lam_all, h)
            g_l2 = _l2_batch(g_vals, h)
            est_p.append(float(np.max(_l21_batch(pv, h, N) / g_l2)))
            est_r.append(float(np.max(_boundary_half_norm_batch(pv, N) / g_l2)))
            # mixed L4 bound
            c2 = _random_loop_batch(rng, N, 100)
            plus2 = np.where((mode_numbers(N) <= 0)[:, None], c2, 0.0)
            minus2 = np.where((mode_numbers(N) > 0)[:, None], c2, 0.0)
            g2 = _random_smooth_fields(rng, N, m_eff, 100)
            u2 = kernel_q_values(plus2, minus2, lam_all, times, eps) + (
                kernel_p_values(g2, lam_all, h)
            )
            denom = _half_norm_batch(c2, N) + _l2_batch(g2, h)
            est_mix.append(float(np.max(_l4_batch(u2, h, N, 4 * N) / denom)))

        # a truncated spectrum cannot hold the norm up once eps < 1/N: the
        # smallest variation any input can achieve is this floor
        floor = float(
            1.0 / np.sqrt(1.0 - np.exp(-2.0 * float(np.min(eps_values)) * N))
        )
        details = {
            "eps": list(map(float, eps_values)),
            "p": est_p,
            "q": est_q,
            "restriction": est_r,
            "mixed_l4": est_mix,
            "truncation_variation_floor": floor,
        }
        for label, est in (("p", est_p), ("q", est_q), ("restriction", est_r), ("mixed_l4", est_mix)):
            variation = max(est) / min(est)
            run.check(
                f"aps.uniformity_{label}_variation",
                "operator norm estimates vary by < 4x across the eps sweep",
                variation,
                factor,
                details=details if label == "p" else {
                    "estimates": est,
                    "truncation_variation_floor": floor,
                },
            )
            run.check(
                f"aps.uniformity_{label}_no_growth",
                "no growth trend as eps -> 0 (log-log slope >= -0.2)",
                -_trend_slope(eps_values, np.asarray(est)),
                0.2,
                details={"slope": _trend_slope(eps_values, np.asarray(est))},
            )

    def q_l4_smallness():
        # fixed 10-element test set, modes |n| <= 8; the L4 norm decreases
        # monotonically as eps = 2^-k shrinks and the quartic mass ends < 5%
        rng = config.rng("aps.q_smallness")
        betas = []
        for n in (0, 1, -1, 2, -2, 4, -4, 8, -8):
            betas.append(Loop.from_modes(1, N, {n: 1.0}))
        # the mixed element stays in one spectral sector: its Q profile is then
        # a fixed integrand on a shrinking domain, which is what decreases
        # monotonically (two-sector data is anchored at both moving ends and
        # only the limit, not each step, is controlled)
        mixed = _random_loop_batch(rng, N, 1, max_mode=8).reshape(2 * N + 1, 1)
        mixed = np.where((mode_numbers(N) <= 0)[:, None], mixed, 0.0)
        betas.append(Loop(1, N, mixed))
        worst_monotone = -np.inf
        worst_final_mass = 0.0
        curves = []
        for b in betas:
            beta = decompose(b)
            norms = []
            for k in range(0, 11):
                eps = 2.0**-k
                # resolve the fastest decay scale 1/(4 * 8) of |u|^4 in time
                m_eff = max(M_t, int(np.ceil(160 * eps)))
                u = q_op(beta, eps, M_t=m_eff)
                norms.append(cyl_norm(u, "L4"))
            worst_monotone = max(worst_monotone, float(np.max(np.diff(norms))))
            worst_final_mass = max(worst_final_mass, (norms[-1] / norms[0]) ** 4)
            curves.append([float(v) for v in norms])
        run.check(
            "aps.q_l4_smallness_monotone",
            "||Q_eps(beta)||_{L^4} decreases along eps = 2^-k",
            worst_monotone,
            0.0,
        )
        run.check(
            "aps.q_l4_smallness_final",
            "Q_eps(beta) -> 0 as eps -> 0: final quartic mass below 5% of initial",
            worst_final_mass,
            0.05,
            details={"curves": curves},
        )

    def end_vanishing_l4():
        rng = config.rng("aps.end_vanishing")
        worst = 0.0
        for eps in (0.5, 0.1, 0.01):
            h = eps / M_t
            tau = np.linspace(0.0, 1.0, M_t + 1)
            for chunk in range(4):
                f = _random_smooth_fields(rng, N, M_t, 250)
                # alternate which end the window kills
                window = tau if chunk % 2 == 0 else 1.0 - tau
                f = f * window[:, None, None]
                lhs = _l4_batch(f, h, N, 4 * N) ** 4
                df = dt_derivative(f, h)
                n_sq = mode_numbers(N).astype(float) ** 2
                grad_sq = time_trapezoid(
                    np.sum(np.abs(df) ** 2 + n_sq[None, :, None] * np.abs(f) ** 2, axis=1),
                    h,
                )
                rhs = eps * grad_sq**2
                worst = max(worst, float(np.max(lhs / rhs)))
        run.check(
            "aps.end_vanishing_l4",
            "int |f|^4 <= eps (int |grad f|^2)^2 for fields vanishing at one end",
            worst,
            1.0,
        )

    run.guard("aps.mode_identities", "Q closed forms", mode_identities)
    run.guard("aps.q_right_inverse", "boundary of Q", q_right_inverse_identity)
    run.guard("aps.right_inverse", "D P = id", right_inverse)
    run.guard("aps.uniformity", "norms independent of eps", uniformity)
    run.guard("aps.q_l4_smallness", "Q -> 0 in L4", q_l4_smallness)
    run.guard("aps.end_vanishing", "anisotropic Sobolev L4 bound", end_vanishing_l4)


# -- contraction suite ----------------------------------------------------------------


def _suite_contraction(config: Config, run: _Runner) -> None:
    m = config.model
    N = config.N
    tol = config.tol("solver")
    identity_tol = config.tol("identity")

    solved = []

    def small_data():
        rng = config.rng("contraction.small")
        worst_ratio = worst_residual = 0.0
        for eps in (0.05, 0.02):
            for _ in range(10):
                b = Loop(1, N, _random_loop_batch(rng, N, 1).reshape(2 * N + 1, 1))
                b = (0.1 / sobolev_norm(b, 0.5)) * b
                res = picard_solve(m, decompose(b), None, eps, tol=tol, M_t=128)
                solved.append(res)
                worst_ratio = max(worst_ratio, res.contraction_ratio)
                worst_residual = max(worst_residual, res.residual)
        run.check(
            "contraction.small_data_ratio",
            "Picard contracts with ratio <= 1/2 for ||beta||_{1/2} <= 0.1, eps <= 0.05",
            worst_ratio,
            0.5,
        )
        run.check(
            "contraction.small_data_residual",
            "PDE residual of the fixed point below 1e-8",
            worst_residual,
            1e-8,
        )

    def engaged_sweep():
        beta = BoundaryData(
            plus0=Loop.from_modes(1, N, {-1: 0.9}), minus_end=Loop.zero(1, N)
        )
        norms = []
        for k in range(2, 11):
            res = picard_solve(m, beta, None, 2.0**-k, tol=tol, M_t=128)
            solved.append(res)
            norms.append(res.v_norm)
        run.check(
            "contraction.vstar_monotone",
            "||v*|| decreases monotonically along eps = 2^-k (fixed data)",
            float(np.max(np.diff(norms))),
            0.0,
            details={"eps": [2.0**-k for k in range(2, 11)], "v_norm": norms},
        )

    def energy_identity():
        worst = 0.0
        for res in solved:
            delta = res.action_out - res.action_in
            defect = abs(delta - res.energy) / (1 + abs(res.energy))
            worst = max(worst, defect)
        run.check(
            "contraction.energy_identity",
            "CSD(u(eps)) - CSD(u(0)) = E(u) on every solved cylinder",
            worst,
            identity_tol,
        )

    def grid_convergence():
        beta = BoundaryData(
            plus0=Loop.from_modes(1, N, {-1: 0.8}), minus_end=Loop.zero(1, N)
        )
        sols = {
            mt: picard_solve(m, beta, None, 0.1, tol=1e-13, M_t=mt) for mt in (32, 64, 128)
        }
        d1 = float(np.max(np.abs(sols[32].u.values - sols[64].u.values[::2])))
        d2 = float(np.max(np.abs(sols[64].u.values - sols[128].u.values[::2])))
        ratio = d1 / d2
        run.check(
            "contraction.grid_convergence",
            "doubling M_t shrinks the solution change by ~4 (second order)",
            abs(ratio - 4.0),
            1.0,
            details={"ratio": ratio},
        )

    def uniqueness():
        beta = BoundaryData(
            plus0=Loop.from_modes(1, N, {-1: 0.7}), minus_end=Loop.zero(1, N)
        )
        eps, mt = 0.1, 64
        base = picard_solve(m, beta, None, eps, tol=tol, M_t=mt)
        rng = config.rng("contraction.uniqueness")
        from .solver import _grad_h_modes

        v = 1e-3 * (
            rng.standard_normal(base.v.values.shape)
            + 1j * rng.standard_normal(base.v.values.shape)
        )
        q = q_op(beta, eps, M_t=mt)
        for _ in range(80):
            u = q + p_op(CylinderMap(1, N, eps, mt, v))
            v = -_grad_h_modes(m, u.values, N)
        dist = float(np.max(np.abs(v - base.v.values)))
        run.check(
            "contraction.uniqueness",
            "distinct Picard starts reach the same small-energy fixed point",
            dist,
            10 * tol,
        )

    def collar_orbit():
        orbit = cyc.radial_orbit_oracle(m, 1).loop
        res = collar_solve(m, orbit, 4e-4, tol=1e-13)
        solved.append(res)
        worst_rest = max(
            float(np.max(np.abs(res.rest_0().coeffs - orbit.coeffs))),
            float(np.max(np.abs(res.rest_end().coeffs - orbit.coeffs))),
        )
        run.check(
            "contraction.collar_orbit_restrictions",
            "the collar solution through orbit data restricts to the orbit",
            worst_rest,
            1e-6,
        )
        run.check(
            "contraction.collar_orbit_energy",
            "t-independent orbit cylinders carry no energy",
            res.energy,
            1e-10,
        )

    def sensitivity():
        beta = BoundaryData(
            plus0=Loop.from_modes(1, N, {-1: 0.9}), minus_end=Loop.zero(1, N)
        )
        db = BoundaryData(
            plus0=Loop.from_modes(1, N, {-2: 0.05}), minus_end=Loop.zero(1, N)
        )
        vals = [h_eps_sensitivity(m, beta, 2.0**-k, db, tol=tol) for k in range(2, 9)]
        run.check(
            "contraction.sensitivity_decreasing",
            "|D_beta fixed-point| -> 0 as eps -> 0 (finite-difference sweep)",
            float(np.max(np.diff(vals))),
            0.0,
            details={"eps": [2.0**-k for k in range(2, 9)], "sensitivity": vals},
        )
        s_small = h_eps_sensitivity(m, beta, 0.1, BoundaryData(
            plus0=Loop.from_modes(1, N, {-2: 0.01}), minus_end=Loop.zero(1, N)
        ), tol=tol)
        s_double = h_eps_sensitivity(m, beta, 0.1, BoundaryData(
            plus0=Loop.from_modes(1, N, {-2: 0.02}), minus_end=Loop.zero(1, N)
        ), tol=tol)
        run.check(
            "contraction.sensitivity_first_order",
            "doubling the probe leaves the sensitivity ratio invariant to 1%",
            abs(s_double / s_small - 1.0),
            0.01,
        )

    def failure_modes():
        beta = BoundaryData(
            plus0=Loop.from_modes(1, N, {-1: 1e3}), minus_end=Loop.zero(1, N)
        )
        try:
            picard_solve(m, beta, None, 0.5, tol=tol)
            failed_loudly = 0.0 + 1.0
        except (BallExit, ContractionFailure):
            failed_loudly = 0.0
        run.check(
            "contraction.large_data_detected",
            "huge boundary data exits the 1/(8C) ball or stops contracting",
            failed_loudly,
            0.5,
        )

    run.guard("contraction.small_data", "small-data contraction", small_data)
    run.guard("contraction.engaged_sweep", "fixed-point norm sweep", engaged_sweep)
    run.guard("contraction.energy_identity", "energy identity", energy_identity)
    run.guard("contraction.grid_convergence", "O(h^2) convergence", grid_convergence)
    run.guard("contraction.uniqueness", "unique small-energy solution", uniqueness)
    run.guard("contraction.collar_orbit", "orbit collar", collar_orbit)
    run.guard("contraction.sensitivity", "boundary-data sensitivity", sensitivity)
    run.guard("contraction.failure_modes", "loud failure", failure_modes)


# -- flow suite -------------------------------------------------------------------------


@tracked("harness.verify_energy_norm_equivalence")
def verify_energy_norm_equivalence(config: Config) -> list[CheckRecord]:
    """Energy vs L^2_1 norm equivalence for the linear (pure quadratic) model.

    With X_H = c u, the energy density per mode n is |u_n'|^2 + (n - im c)^2
    |u_n|^2, so E(u) / ||u||^2_{L^2_1} is bounded between computed per-mode
    extremes; away from resonance (c not in i Z) the lower bound is positive,
    at resonance it degenerates on the resonant mode.
    """
    run = _Runner(config)
    N, M_t = config.N, config.M_t

    def bounds_for(c_im: float) -> tuple[float, float]:
        n = mode_numbers(N).astype(float)
        kappa = (n - c_im) ** 2
        per_mode = kappa / (2.0 * (1.0 + n**2))
        lower = np.minimum(0.5, per_mode)
        upper = np.maximum(0.5, per_mode)
        return float(np.min(lower)), float(np.max(upper))

    def nonresonant():
        m_quad = HamiltonianModel(eps_H=0.1, variant="pure_quadratic")
        c_im = 2.0 * m_quad.slope
        lo, hi = bounds_for(c_im)
        rng = config.rng("flow.equivalence")
        worst = -np.inf
        lo_seen, hi_seen = np.inf, -np.inf
        for _ in range(1000):
            vals = _random_smooth_fields(rng, N, M_t, 1)[:, :, :1]
            u = CylinderMap(1, N, 0.4, M_t, vals)
            ratio = energy(m_quad, u) / cyl_norm(u, "L2_1") ** 2
            lo_seen, hi_seen = min(lo_seen, ratio), max(hi_seen, ratio)
            worst = max(worst, lo - ratio, ratio - hi)
        run.check(
            "flow.equivalence_bounds",
            "E(u)/||u||^2_{L^2_1} within per-mode bounds from |i n - c|^2",
            worst,
            1e-12,
            details={"m": lo, "M": hi, "seen": [lo_seen, hi_seen]},
        )
        run.check(
            "flow.equivalence_positive_lower_bound",
            "c = 2.2i: min_n (n - 2.2)^2 = 0.04 at n = 2 gives m >= 0.04/10",
            0.04 * 0.1 - lo,
            1e-15,
            details={"m": lo},
        )

    def resonant():
        m_res = HamiltonianModel(eps_H=0.0, variant="pure_quadratic")  # c = 2i
        lo, hi = bounds_for(2.0)
        vals = np.zeros((M_t + 1, 2 * N + 1, 1), complex)
        vals[:, N + 2, 0] = 1.0  # resonant mode n = 2, constant in t
        u = CylinderMap(1, N, 0.4, M_t, vals)
        ratio = energy(m_res, u) / cyl_norm(u, "L2_1") ** 2
        run.check(
            "flow.equivalence_resonant_degenerates",
            "c = 2i: the resonant mode carries energy 0, the lower bound collapses",
            max(ratio, lo),
            1e-12,
            details={"resonant_ratio": float(ratio), "resonant_lower_bound": lo},
        )

    run.guard("flow.equivalence_nonresonant", "energy/norm equivalence", nonresonant)
    run.guard("flow.equivalence_resonant", "resonant counterexample", resonant)
    return run.records


def _suite_flow(config: Config, run: _Runner) -> None:
    m = config.model
    identity_tol = config.tol("identity")
    refined_tol = config.tol("identity_refined")

    def linear_closed_form():
        n, alpha, T = 1, 0.1, 0.5
        g = Loop.from_modes(1, 8, {n: alpha})
        trace = flow_trajectory(m, g, T, 1e-3)
        expected = 0.5 * n * alpha**2 * (np.exp(2 * n * trace.times) - 1)
        run.check(
            "flow.linear_energy_closed_form",
            "single growing mode: E = (n/2) alpha^2 (e^{2nT} - 1)",
            float(np.max(np.abs(trace.cumulative_energy - expected))),
            refined_tol,
        )
        defect = np.abs((trace.actions - trace.actions[0]) - trace.cumulative_energy)
        run.check(
            "flow.linear_energy_identity",
            "CSD(u(t)) - CSD(u(0)) = E(u) at every node of the linear trajectory",
            float(np.max(defect)),
            refined_tol,
        )

    def orbit_stationary():
        # truncation small enough that e^{N t} round-off stays below 1e-8
        radius = cyc.radial_orbit_oracle(m, 1).radius
        loop = Loop.from_modes(1, 12, {1: radius})
        trace = flow_trajectory(m, loop, 1.0, 0.09 / 12)
        run.check(
            "flow.orbit_stationary",
            "critical orbits are fixed points of the upward flow",
            float(np.max(np.abs(trace.final.coeffs - loop.coeffs))),
            1e-8,
        )

    def nonlinear_identity():
        seed = Loop.from_modes(1, 8, {1: 0.55, 2: 0.3j, 3: 0.1})
        trace = flow_trajectory(m, seed, 0.5, 1e-5)
        E = trace.cumulative_energy[-1]
        per_node = np.abs(
            (trace.actions - trace.actions[0]) - trace.cumulative_energy
        ) / (1 + trace.cumulative_energy)
        defect = float(np.max(per_node))
        run.check(
            "flow.nonlinear_energy_identity",
            "CSD(u(t)) - CSD(u(0)) = E(u) at every node through the bump region",
            defect,
            identity_tol,
            details={
                "E": float(E),
                "curve_t": [float(t) for t in trace.times[::2500]],
                "curve_action": [float(a) for a in trace.actions[::2500]],
                "curve_energy": [float(e) for e in trace.cumulative_energy[::2500]],
                "curve_norm": [float(v) for v in trace.norms[::2500]],
            },
        )
        run.check(
            "flow.actions_nondecreasing",
            "the action is nondecreasing along the upward flow",
            float(np.max(-np.diff(trace.actions))),
            1e-12,
        )

    def semigroup():
        g = Loop.from_modes(1, 8, {1: 0.1, 3: 0.02j, -2: 0.05})
        two = flow_step(m, flow_step(m, g, 0.005), 0.005)
        one = flow_step(m, g, 0.01)
        run.check(
            "flow.semigroup_flat_region",
            "flow_step composes exactly where the flow is linear",
            float(np.max(np.abs(two.coeffs - one.coeffs))),
            config.tol("exact"),
        )

    def pushforward():
        pts = cyc.sample_gamma(0.3, 4, seed=config.seed + 7, N=8)
        out_id = gf_pushforward(m, pts, 0.0, 1e-3)
        worst_id = max(
            float(np.max(np.abs(r.final.coeffs - p.coeffs))) for r, p in zip(out_id, pts)
        )
        run.check(
            "flow.pushforward_identity_at_zero_time",
            "GF_0 is the identity on cycle points",
            worst_id,
            0.0,
        )
        out = gf_pushforward(m, pts, 0.05, 1e-4)
        min_gain = min(
            action(m, r.final) - action(m, p) for r, p in zip(out, pts) if r.ok
        )
        run.check(
            "flow.pushforward_actions_increase",
            "actions strictly increase along the flow off critical points",
            -min_gain,
            0.0,
        )
        rng = config.rng("flow.blowup")
        wild = project(gaussian_loop(1, config.N, rng), "plus")
        wild = (0.45 / sobolev_norm(wild, 0.5)) * wild
        tame = Loop.from_modes(1, config.N, {1: 0.01})
        # above the overflow guard the top mode grows at least like n - 2.2;
        # scale the window so small truncations get time to diverge
        t_wild = max(2.5, 60.0 / config.N)
        res = gf_pushforward(m, [wild, tame], t_wild, 0.09 / config.N)
        ok = (not res[0].ok and res[0].blowup_time is not None) and res[1].ok
        run.check(
            "flow.pushforward_blowup_recorded",
            "per-point blowups are recorded without failing the batch",
            0.0 if ok else 1.0,
            0.5,
            details={"blowup_time": res[0].blowup_time},
        )

    run.guard("flow.linear", "linear flow closed form", linear_closed_form)
    run.guard("flow.orbit_stationary", "orbit stationarity", orbit_stationary)
    run.guard("flow.nonlinear_identity", "nonlinear energy identity", nonlinear_identity)
    run.guard("flow.semigroup", "linear semigroup", semigroup)
    run.guard("flow.pushforward", "cycle pushforward", pushforward)
    run.records.extend(verify_energy_norm_equivalence(config))


# -- orbits suite ---------------------------------------------------------------------


def _suite_orbits(config: Config, run: _Runner) -> None:
    m = config.model
    N = config.N
    state: dict = {}

    def alpha_scan():
        alpha_star, beta_star, table = cyc.scan_alpha(
            m, samples=48, descent_steps=120, seed=config.seed, N=N
        )
        state["alpha_star"], state["beta_star"] = alpha_star, beta_star
        run.check(
            "orbits.beta_positive",
            "there exist alpha, beta > 0 with CSD >= beta on the alpha-sphere",
            -beta_star,
            0.0,
            details={"alpha_star": alpha_star, "beta_star": beta_star, "table": table},
        )

    def sigma_boundary():
        tau_star = cyc.derive_tau(m, samples=240, seed=config.seed + 1, N=N)
        state["tau_star"] = tau_star
        worst = cyc.check_sigma_boundary(m, tau_star, samples=240, seed=config.seed + 1, N=N)
        run.check(
            "orbits.sigma_boundary_nonpositive",
            "CSD <= 0 on the boundary of the tau-box for tau large",
            worst,
            0.0,
            details={"tau_star": tau_star},
        )

    def transversality():
        alpha_star = state.get("alpha_star", 1.0)
        tau_star = max(state.get("tau_star", 2.0), alpha_star)
        out = cyc.transversality_check(alpha_star, tau_star, N=N)
        run.check(
            "orbits.transversality_full_rank",
            "the sphere and box tangents span the truncation at alpha e+",
            -out["sigma_min"],
            -1e-12,
            details={"sigma_min": out["sigma_min"], "sigma_max": out["sigma_max"]},
        )
        run.check(
            "orbits.intersection_unique",
            "the families meet exactly in the single point alpha e+",
            abs(out["intersection_dim"] - 1),
            0.0,
            details={"s_at_intersection": out["s_at_intersection"]},
        )

    def winding_matches():
        alpha_star = state.get("alpha_star", 1.0)
        beta_star = state.get("beta_star", 0.0)
        for k in (1, 2):
            oracle = cyc.radial_orbit_oracle(m, k)
            if k == 1:
                seed_loop = alpha_star * cyc.e_plus(1, N)
            else:
                seed_loop = Loop.from_modes(1, N, {2: alpha_star / np.sqrt(2)})
            found = cyc.find_critical_point(
                m, seed_loop, flow_time=1.0, newton_tol=1e-11, beta=beta_star
            )
            run.check(
                f"orbits.winding{k}_radius",
                "found orbit radius matches the scalar bisection oracle",
                abs(found.radius - oracle.radius),
                1e-6,
                details={"found": found.radius, "oracle": oracle.radius},
            )
            run.check(
                f"orbits.winding{k}_action",
                "found orbit action matches k r^2 / 2 - h(r^2)",
                abs(found.action - oracle.action),
                1e-6,
                details={"found": found.action, "oracle": oracle.action},
            )
            run.check(
                f"orbits.winding{k}_gradient",
                "the found loop is critical: ||grad CSD|| <= 1e-8",
                found.gradient_norm,
                1e-8,
            )
            run.check(
                f"orbits.winding{k}_above_beta",
                "critical point with CSD >= beta",
                beta_star - found.action,
                1e-6,
                details={"flagged_below_beta": found.action_below_beta},
            )

    def oracle_internal():
        worst_root = worst_action = 0.0
        for k in (1, 2):
            orb = cyc.radial_orbit_oracle(m, k)
            worst_root = max(worst_root, abs(2 * float(m.h_prime(orb.radius**2)) - k))
            worst_action = max(
                worst_action,
                abs(orb.action - (0.5 * k * orb.radius**2 - float(m.h(orb.radius**2)))),
            )
        run.check(
            "orbits.oracle_criticality",
            "2 h'(r^2) = k at the oracle radius",
            worst_root,
            1e-8,
        )
        run.check(
            "orbits.oracle_action_form",
            "oracle action equals the radial closed form",
            worst_action,
            1e-6,
        )
        try:
            cyc.radial_orbit_oracle(m, 3)
            no_root_raised = 1.0
        except cyc.NoRoot:
            no_root_raised = 0.0
        run.check(
            "orbits.oracle_no_root_detected",
            "windings outside (0, 2(1+eps)) have no radial orbit",
            no_root_raised,
            0.5,
        )

    def perturbation():
        rng = config.rng("orbits.perturbation")
        n = mode_numbers(8).astype(float)
        w2 = (1.0 + n**2) ** 2
        worst = 0.0
        for scale in (0.05, 0.5, 5.0, 50.0):
            for _ in range(250):
                g = gaussian_loop(1, 8, rng, scale=scale)
                v = gaussian_loop(1, 8, rng)
                ball = np.sqrt(np.sum(w2[:, None] * np.abs(v.coeffs) ** 2))
                v = (0.999 / ball) * v
                worst = max(worst, abs(action(m, cyc.perturb(g, v)) - action(m, g)))
        run.check(
            "orbits.perturbation_action_bounded",
            "|CSD(F(x, v)) - CSD(x)| bounded independent of x",
            worst,
            10.0,
        )
        run.check(
            "orbits.rho_values",
            "rho = 1 on [-1, 1] and 1/x^2 outside [-2, 2]",
            abs(cyc.rho(0.5) - 1.0) + abs(cyc.rho(3.0) - 1.0 / 9.0),
            1e-14,
        )

    def sigma_sampler_faces():
        pts = cyc.sample_sigma(1.5, cyc.e_plus(1, N), 30, seed=config.seed + 2, boundary_only=True)
        worst = 0.0
        for p in pts:
            minus_norm = sobolev_norm(project(p, "minus"), 0.5)
            s = float(project(p, "plus").mode(1)[0].real)
            on_face = min(abs(minus_norm - 1.5), abs(s), abs(s - 1.5))
            worst = max(worst, on_face)
        run.check(
            "orbits.sigma_boundary_faces",
            "boundary samples sit on ||gamma^-|| = tau or s in {0, tau}",
            worst,
            1e-12,
        )

    run.guard("orbits.alpha_scan", "sphere minimum scan", alpha_scan)
    run.guard("orbits.sigma_boundary", "box boundary", sigma_boundary)
    run.guard("orbits.transversality", "transverse intersection", transversality)
    run.guard("orbits.windings", "orbit existence and oracle match", winding_matches)
    run.guard("orbits.oracle", "oracle internals", oracle_internal)
    run.guard("orbits.perturbation", "perturbation map", perturbation)
    run.guard("orbits.sigma_faces", "box boundary sampler", sigma_sampler_faces)


# -- suite orchestration -----------------------------------------------------------------


_SUITE_FUNCTIONS = {
    "norms": _suite_norms,
    "aps": _suite_aps,
    "contraction": _suite_contraction,
    "flow": _suite_flow,
    "orbits": _suite_orbits,
}


@tracked("harness.run_suite")
def run_suite(config: Config, suite: str = "all", write: bool = True) -> Report:
    """Execute a named verification suite (or all of them) and build the report."""
    if suite != "all" and suite not in _SUITE_FUNCTIONS:
        raise ValueError(f"unknown suite {suite!r}; choose from {SUITES + ('all',)}")
    coverage.reset()
    coverage._COUNTS["harness.run_suite"] += 1  # count this invocation post-reset
    run = _Runner(config)
    names = SUITES if suite == "all" else (suite,)
    for name in names:
        _SUITE_FUNCTIONS[name](config, run)

    constants = {
        "lipschitz_C": lipschitz_constant(config.model)
        if config.model.variant == "bump"
        else None,
        "contraction_ball_radius": (1.0 / (8.0 * lipschitz_constant(config.model)))
        if config.model.variant == "bump"
        else None,
        "splitting_c_imag": 2.0 * config.model.slope,
        "profile_tail_offset": config.model.tail_offset,
    }
    if write:
        # emit the sweep CSVs before freezing the coverage counters, so the
        # plumbing operation itself shows up as exercised in the report
        preliminary = Report(
            suite=suite,
            config=config,
            records=run.records,
            coverage_counts={},
            coverage_complete=False,
            constants=constants,
        )
        os.makedirs(config.output_dir, exist_ok=True)
        emit_plots_data(preliminary, config.output_dir)

    counts = coverage.counts()
    complete = all(v > 0 for v in counts.values()) if suite == "all" else False
    report = Report(
        suite=suite,
        config=config,
        records=run.records,
        coverage_counts=counts,
        coverage_complete=complete,
        constants=constants,
    )
    if write:
        path = os.path.join(config.output_dir, f"report_{suite}.json")
        with open(path, "w", encoding="utf-8") as f:
            f.write(report.to_json())
    return report


@tracked("harness.emit_plots_data")
def emit_plots_data(report: Report, out_dir) -> list[str]:
    """Write the sweep curves of a report as CSV files for external plotting."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    by_name = {r.name: r for r in report.records}

    aps_path = os.path.join(out_dir, "aps_sweep.csv")
    with open(aps_path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["operator", "eps", "estimate"])
        rec = by_name.get("aps.uniformity_p_variation")
        if rec and "eps" in rec.details:
            eps = rec.details["eps"]
            for op in ("p", "q", "restriction", "mixed_l4"):
                values = rec.details.get(op)
                if values is None:
                    other = by_name.get(f"aps.uniformity_{op}_variation")
                    values = other.details.get("estimates") if other else None
                if values:
                    for e, v in zip(eps, values):
                        w.writerow([op, f"{e:.12g}", f"{v:.17g}"])
    written.append(aps_path)

    contraction_path = os.path.join(out_dir, "contraction_sweep.csv")
    with open(contraction_path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["eps", "v_norm", "sensitivity"])
        vrec = by_name.get("contraction.vstar_monotone")
        srec = by_name.get("contraction.sensitivity_decreasing")
        if vrec and "eps" in vrec.details:
            sens = dict(
                zip(srec.details.get("eps", []), srec.details.get("sensitivity", []))
            ) if srec else {}
            for e, v in zip(vrec.details["eps"], vrec.details["v_norm"]):
                w.writerow([f"{e:.12g}", f"{v:.17g}", f"{sens.get(e, float('nan')):.17g}"])
    written.append(contraction_path)

    flow_path = os.path.join(out_dir, "flow_curve.csv")
    with open(flow_path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["t", "action", "cumulative_energy", "norm"])
        rec = by_name.get("flow.nonlinear_energy_identity")
        if rec and "curve_t" in rec.details:
            for t, a, e, v in zip(
                rec.details["curve_t"],
                rec.details["curve_action"],
                rec.details["curve_energy"],
                rec.details["curve_norm"],
            ):
                w.writerow([f"{t:.12g}", f"{a:.17g}", f"{e:.17g}", f"{v:.17g}"])
    written.append(flow_path)
    return written
