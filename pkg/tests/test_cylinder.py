import numpy as np
import pytest

from looplab.cylinder import (
    BoundaryData,
    CylinderMap,
    aps_boundary,
    apply_D,
    boundary_trace_half_norm_sq,
    combine,
    cyl_norm,
    decompose,
    energy,
    kernel_dt_mass,
    p_op,
    q_op,
    trace_defect_sq,
)
from looplab.hamiltonian import HamiltonianModel
from looplab.loops import Loop, gaussian_loop, project, sobolev_norm


def single_mode_data(n: int, coeff: complex, N: int = 8, d: int = 1) -> BoundaryData:
    """Boundary data carried by a single mode (n <= 0 goes to the t=0 slot)."""
    loop = Loop.from_modes(d, N, {n: coeff})
    if n <= 0:
        return BoundaryData(plus0=loop, minus_end=Loop.zero(d, N))
    return BoundaryData(plus0=Loop.zero(d, N), minus_end=loop)


class TestApplyD:
    def test_kernel_element_small_residual(self):
        # u_n(t) = e^{-lambda t} with lambda = -n solves u' + lambda u = 0
        N, M_t, T = 4, 64, 0.5
        times = np.linspace(0, T, M_t + 1)
        vals = np.zeros((M_t + 1, 2 * N + 1, 1), complex)
        for n in range(-N, N + 1):
            lam = -n
            vals[:, N + n, 0] = np.exp(-lam * times)
        u = CylinderMap(1, N, T, M_t, vals)
        res = apply_D(u)
        coarse = np.max(np.abs(res.values))
        # refined grid shrinks the defect by the square of the refinement
        M_t2 = 4 * M_t
        times2 = np.linspace(0, T, M_t2 + 1)
        vals2 = np.zeros((M_t2 + 1, 2 * N + 1, 1), complex)
        for n in range(-N, N + 1):
            vals2[:, N + n, 0] = np.exp(n * times2)
        fine = np.max(np.abs(apply_D(CylinderMap(1, N, T, M_t2, vals2)).values))
        assert coarse < 2e-2
        assert coarse / fine == pytest.approx(16, rel=0.35)

    def test_constant_zero_mode_exact(self):
        u = CylinderMap.constant(Loop.from_modes(1, 4, {0: 2.0 + 1j}), 0.3, 16)
        res = apply_D(u)
        assert np.max(np.abs(res.values)) == 0


class TestQOp:
    def test_positive_lambda_closed_form(self):
        # data on mode n = -3 (lambda = 3): values -e^{-3t}, at t = eps -e^{-0.3}
        eps = 0.1
        u = q_op(single_mode_data(-3, 1.0), eps, M_t=50)
        times = u.times
        got = u.values[:, u.N - 3, 0]
        assert np.allclose(got, -np.exp(-3 * times), atol=1e-14)
        assert got[-1] == pytest.approx(-np.exp(-0.3), abs=1e-15)

    def test_negative_lambda_closed_form(self):
        # mode n = 2 (lambda = -2): values e^{2(t-eps)}, at t=0 e^{-2 eps}
        eps = 0.25
        u = q_op(single_mode_data(2, 1.0), eps, M_t=40)
        times = u.times
        got = u.values[:, u.N + 2, 0]
        assert np.allclose(got, np.exp(2 * (times - eps)), atol=1e-14)
        assert got[0] == pytest.approx(np.exp(-0.5), abs=1e-15)

    def test_zero_mode_branch(self):
        # lambda = 0 takes the t=0 branch: constant -beta_0
        u = q_op(single_mode_data(0, 1.5 - 0.5j), 0.2, M_t=16)
        assert np.allclose(u.values[:, u.N, 0], -(1.5 - 0.5j), atol=0)

    def test_right_inverse_identity(self):
        rng = np.random.default_rng(31)
        g = gaussian_loop(2, 6, rng)
        beta = decompose(g)
        u = q_op(beta, 0.07, M_t=32)
        back = aps_boundary(u)
        assert back.plus0.allclose(beta.plus0, atol=1e-14)
        assert back.minus_end.allclose(beta.minus_end, atol=1e-14)

    def test_kernel_of_d_on_refined_grid(self):
        rng = np.random.default_rng(32)
        beta = decompose(gaussian_loop(1, 6, rng))
        u = q_op(beta, 0.3, M_t=512)
        res = apply_D(u)
        assert np.max(np.abs(res.values)) < 2e-4


class TestPOp:
    def test_zero_forcing(self):
        g = CylinderMap.zero(1, 4, 0.2, 16)
        assert np.all(p_op(g).values == 0)

    def test_constant_forcing_closed_form(self):
        # lambda = 2 (mode n = -2), g = 1: u(t) = (1 - e^{-2t})/2
        N, M_t, eps = 4, 64, 0.8
        vals = np.zeros((M_t + 1, 2 * N + 1, 1), complex)
        vals[:, N - 2, 0] = 1.0
        u = p_op(CylinderMap(1, N, eps, M_t, vals))
        times = u.times
        expected = (1 - np.exp(-2 * times)) / 2
        assert np.allclose(u.values[:, N - 2, 0], expected, atol=1e-12)

    def test_boundary_data_vanishes(self):
        rng = np.random.default_rng(33)
        N, M_t, eps = 6, 32, 0.15
        vals = rng.standard_normal((M_t + 1, 2 * N + 1, 1)) + 1j * rng.standard_normal(
            (M_t + 1, 2 * N + 1, 1)
        )
        u = p_op(CylinderMap(1, N, eps, M_t, vals))
        bd = aps_boundary(u)
        assert bd.norm() <= 1e-10

    @pytest.mark.parametrize("eps", [0.5, 0.1, 0.01])
    def test_right_inverse_refined(self, eps):
        # D(P g) = g to 1e-6 relative; the grid must resolve both the stiff
        # transients (h * lambda small) and the data's own t/eps scale
        rng = np.random.default_rng(34)
        N = 6
        M_t = max(2048, int(np.ceil(eps * 2500)))
        times = np.linspace(0, eps, M_t + 1)
        # random smooth forcing: low-order polynomial in t per mode
        c0 = rng.standard_normal((2 * N + 1, 1)) + 1j * rng.standard_normal((2 * N + 1, 1))
        c1 = rng.standard_normal((2 * N + 1, 1)) + 1j * rng.standard_normal((2 * N + 1, 1))
        c2 = rng.standard_normal((2 * N + 1, 1)) + 1j * rng.standard_normal((2 * N + 1, 1))
        tau = (times / eps)[:, None, None]
        vals = c0[None] + c1[None] * tau + c2[None] * tau**2
        g = CylinderMap(1, N, eps, M_t, vals)
        residual = apply_D(p_op(g)) - g
        rel = cyl_norm(residual, "L2") / cyl_norm(g, "L2")
        assert rel <= 1e-6


class TestBoundaryData:
    def test_decompose_combine_roundtrip(self):
        rng = np.random.default_rng(35)
        b = gaussian_loop(2, 5, rng)
        assert combine(decompose(b)).allclose(b, atol=0)
        bd = decompose(b)
        bd2 = decompose(combine(bd))
        assert bd2.plus0.allclose(bd.plus0, atol=0)
        assert bd2.minus_end.allclose(bd.minus_end, atol=0)

    def test_collar_trace_matches_loop_at_zero(self):
        # the t=0 trace of Q(decompose(b)) recovers the plus-spectral part of b
        rng = np.random.default_rng(36)
        b = gaussian_loop(1, 5, rng)
        u = q_op(decompose(b), 0.05, M_t=16)
        from looplab.loops import aps_project

        assert aps_project(u.rest_0(), "plus").allclose(aps_project(b, "plus"), atol=1e-14)
        assert aps_project(u.rest_end(), "minus").allclose(
            aps_project(b, "minus"), atol=1e-14
        )

    def test_support_validation(self):
        good = Loop.from_modes(1, 4, {-1: 1.0})
        bad = Loop.from_modes(1, 4, {1: 1.0})
        with pytest.raises(ValueError):
            BoundaryData(plus0=bad, minus_end=bad)
        with pytest.raises(ValueError):
            BoundaryData(plus0=good, minus_end=good)

    def test_minus_field_constant_has_zero_plus_trace(self):
        u = CylinderMap.constant(Loop.from_modes(1, 4, {2: 1.0}), 0.1, 16)
        bd = aps_boundary(u)
        assert sobolev_norm(bd.plus0, 0.5) == 0


class TestNorms:
    def test_zero_field(self):
        u = CylinderMap.zero(2, 4, 0.3, 16)
        for which in ("L2", "L2_1", "L4"):
            assert cyl_norm(u, which) == 0

    def test_constant_field_l2(self):
        v = 1.5 - 2.0j
        T = 0.7
        u = CylinderMap.constant(Loop.from_modes(1, 4, {0: v}), T, 32)
        assert cyl_norm(u, "L2") == pytest.approx(abs(v) * np.sqrt(T), rel=1e-12)

    def test_single_mode_closed_forms(self):
        # u_2(t) = a + b t on [0, T]; all three norms have closed forms and
        # the second-order discretization converges to them
        a, b, T, n = 0.7, -0.4, 0.9, 2
        M_t = 8192
        N = 4
        times = np.linspace(0, T, M_t + 1)
        vals = np.zeros((M_t + 1, 2 * N + 1, 1), complex)
        vals[:, N + n, 0] = a + b * times
        u = CylinderMap(1, N, T, M_t, vals)

        def poly_int(p):  # integral over [0, T] of (a + b t)^p
            ts = np.linspace(0, T, 40001)
            return np.trapezoid((a + b * ts) ** p, ts)

        l2 = np.sqrt(poly_int(2))
        l2_1 = np.sqrt((1 + n**2) * poly_int(2) + b**2 * T)
        l4 = poly_int(4) ** 0.25
        assert cyl_norm(u, "L2") == pytest.approx(l2, rel=1e-8)
        assert cyl_norm(u, "L2_1") == pytest.approx(l2_1, rel=1e-8)
        assert cyl_norm(u, "L4") == pytest.approx(l4, rel=1e-8)


class TestEnergy:
    def test_constant_flat_map(self):
        m = HamiltonianModel()
        u = CylinderMap.constant(Loop.from_modes(1, 4, {0: 0.2}), 0.4, 16)
        assert energy(m, u) == pytest.approx(0, abs=1e-16)

    def test_linear_flow_closed_form(self):
        # u_n(t) = alpha e^{n t} in the flat region: E = (n/2) alpha^2 (e^{2nT} - 1)
        m = HamiltonianModel()
        n, alpha, T = 1, 0.1, 0.5
        M_t = 8192
        N = 4
        times = np.linspace(0, T, M_t + 1)
        vals = np.zeros((M_t + 1, 2 * N + 1, 1), complex)
        vals[:, N + n, 0] = alpha * np.exp(n * times)
        u = CylinderMap(1, N, T, M_t, vals)
        expected = 0.5 * n * alpha**2 * (np.exp(2 * n * T) - 1)
        assert energy(m, u) == pytest.approx(expected, rel=1e-8, abs=1e-8)

    def test_critical_orbit_cylinder_has_no_energy(self):
        from looplab.cycles import radial_orbit_oracle

        m = HamiltonianModel()
        orbit = radial_orbit_oracle(m, 1)
        u = CylinderMap.constant(orbit.loop, 0.2, 16)
        assert energy(m, u) <= 1e-10


class TestModeIdentities:
    @pytest.mark.parametrize("eps", [0.5, 0.1, 0.01])
    def test_boundary_defect_and_dt_mass(self, eps):
        # defect lambda (1 - e^{-eps lambda})^2, time-derivative mass
        # lambda (1 - e^{-2 eps lambda}), and the inequality between them
        N = 32
        for lam in range(1, N + 1):
            beta = single_mode_data(-lam, 1.0, N=N)
            u = q_op(beta, eps, M_t=64)
            defect = trace_defect_sq(u)
            expected_defect = lam * (1 - np.exp(-eps * lam)) ** 2
            dt_mass = 2.0 * kernel_dt_mass(u)
            expected_mass = lam * (1 - np.exp(-2 * eps * lam))
            assert abs(defect - expected_defect) <= 1e-10
            assert abs(dt_mass - expected_mass) <= 1e-6
            assert expected_mass - defect >= -1e-12

    def test_trace_norm_helper(self):
        u = q_op(single_mode_data(-2, 1.0, N=4), 0.3, M_t=16)
        traced = boundary_trace_half_norm_sq(u)
        assert traced == pytest.approx(2 * (1 + np.exp(-2 * 0.3 * 2) ** 1), rel=1e-12)


class TestSerialization:
    def test_json_roundtrip(self):
        rng = np.random.default_rng(37)
        vals = rng.standard_normal((17, 9, 2)) + 1j * rng.standard_normal((17, 9, 2))
        u = CylinderMap(2, 4, 0.25, 16, vals)
        back = CylinderMap.from_json_dict(u.to_json_dict())
        assert np.allclose(back.values, u.values, atol=0)

    def test_csv_export(self, tmp_path):
        u = CylinderMap.constant(Loop.from_modes(1, 2, {1: 1.0 + 2.0j}), 0.1, 8)
        path = tmp_path / "field.csv"
        u.to_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "mode,t,re,im"
        assert len(lines) == 1 + 5 * 9  # (2N+1) modes x (M_t+1) nodes
