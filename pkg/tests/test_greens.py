"""Kernel battery: derivative formulas, tensor identities, series oracles."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from elastoprobe import ElasticMedium
from elastoprobe.greens import (
    SingularEvaluationError,
    green_derivs,
    green_scalar,
    phi_full,
    phi_grad_series,
    phi_part,
    phi_part_grad,
    phi_series,
    phi_series_info,
    traction,
    traction_from_jacobian,
)
from elastoprobe.medium import ContractViolation, WavePart

from conftest import fd_gradient, fd_hessian, fd_jacobian, random_pairs

MED = ElasticMedium(1.0, 1.0, 1.0)


def exp_series_scalar(k, r, n_terms=60):
    """Independent power-series oracle for exp(i*k*r)/(4*pi*r)."""
    acc = 0.0 + 0.0j
    term = 1.0 + 0.0j
    for n in range(n_terms):
        acc += term
        term *= 1j * k * r / (n + 1)
    return acc / (4 * np.pi * r)


class TestGreenScalar:
    def test_static_limit(self):
        med = ElasticMedium(1.0, 1.0, 1e-12)
        val = green_scalar(np.array([1.0, 0, 0]), np.zeros(3), WavePart.P, med)
        assert val == pytest.approx(1 / (4 * np.pi), rel=1e-10)

    def test_unit_separation_p(self):
        med = ElasticMedium(1.0, 1.0, math.sqrt(3.0))  # kappa_p = 1
        val = green_scalar(np.array([1.0, 0, 0]), np.zeros(3), WavePart.P, med)
        assert val == pytest.approx(np.exp(1j) / (4 * np.pi), rel=1e-14)

    def test_against_series_oracle(self, rng):
        x, y = random_pairs(rng, 50, 0.5, 2.0)
        for part in WavePart:
            k = MED.wavenumber(part)
            vals = green_scalar(x, y, part, MED)
            for i in range(len(x)):
                r = np.linalg.norm(x[i] - y[i])
                assert vals[i] == pytest.approx(exp_series_scalar(k, r), rel=1e-12)

    def test_coincident_points_raise(self):
        with pytest.raises(SingularEvaluationError):
            green_scalar(np.zeros(3), np.zeros(3) + 1e-12, WavePart.P, MED)


class TestGreenDerivs:
    def test_gradient_vs_fd(self, rng):
        x, y = random_pairs(rng, 40, 0.1, 10.0)
        for part in WavePart:
            grad, _, _ = green_derivs(x, y, part, MED)
            for i in range(len(x)):
                r = np.linalg.norm(x[i] - y[i])
                fd = fd_gradient(lambda p: green_scalar(p, y[i], part, MED), x[i], 1e-6 * r)
                assert np.abs(grad[i] - fd).max() / np.abs(grad[i]).max() < 1e-6

    def test_hessian_vs_fd(self, rng):
        x, y = random_pairs(rng, 25, 0.1, 10.0)
        for part in WavePart:
            _, hess, _ = green_derivs(x, y, part, MED)
            for i in range(len(x)):
                r = np.linalg.norm(x[i] - y[i])
                fd = fd_hessian(lambda p: green_scalar(p, y[i], part, MED), x[i], 1e-4 * r)
                assert np.abs(hess[i] - fd).max() / np.abs(hess[i]).max() < 1e-6

    def test_third_vs_fd_of_hessian(self, rng):
        x, y = random_pairs(rng, 20, 0.1, 10.0)
        _, _, third = green_derivs(x, y, WavePart.P, MED)
        for i in range(len(x)):
            r = np.linalg.norm(x[i] - y[i])
            fd = fd_jacobian(lambda p: green_derivs(p, y[i], WavePart.P, MED)[1], x[i], 1e-5 * r)
            assert np.abs(third[i] - fd).max() / np.abs(third[i]).max() < 1e-6

    def test_third_vs_pure_fd_of_scalar(self, rng):
        # fully independent: third-difference the scalar kernel itself
        x, y = random_pairs(rng, 8, 0.5, 3.0)
        _, _, third = green_derivs(x, y, WavePart.S, MED)
        for i in range(len(x)):
            r = np.linalg.norm(x[i] - y[i])
            h = 1e-3 * r
            fd = fd_jacobian(
                lambda p: fd_hessian(lambda q: green_scalar(q, y[i], WavePart.S, MED), p, h),
                x[i],
                h,
            )
            assert np.abs(third[i] - fd).max() / np.abs(third[i]).max() < 1e-5

    def test_offdiag_vanishes_on_axis(self):
        x = np.array([1.0, 0.0, 0.0])
        _, hess, _ = green_derivs(x, np.zeros(3), WavePart.P, MED)
        assert hess[1, 2] == 0

    def test_helmholtz_equation(self, rng):
        x, y = random_pairs(rng, 1000, 0.1, 10.0)
        for part in WavePart:
            k = MED.wavenumber(part)
            g = green_scalar(x, y, part, MED)
            _, hess, _ = green_derivs(x, y, part, MED)
            resid = np.abs(np.trace(hess, axis1=-2, axis2=-1) + k * k * g) / np.abs(g)
            assert resid.max() < 1e-10

    def test_symmetry(self, rng):
        x, y = random_pairs(rng, 100, 0.1, 10.0)
        _, hess, third = green_derivs(x, y, WavePart.P, MED)
        assert np.abs(hess - hess.swapaxes(-1, -2)).max() / np.abs(hess).max() < 1e-12
        for perm in [(0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]:
            permuted = np.transpose(third, (0,) + tuple(1 + p for p in perm))
            assert np.abs(third - permuted).max() / np.abs(third).max() < 1e-12


class TestPhi:
    def test_decomposition(self, rng):
        x, y = random_pairs(rng, 200, 0.1, 10.0)
        full = phi_full(x, y, MED)
        both = phi_part(x, y, WavePart.P, MED) + phi_part(x, y, WavePart.S, MED)
        assert np.abs(full - both).max() / np.abs(full).max() < 1e-12

    def test_symmetric_and_argument_swap(self, rng):
        x, y = random_pairs(rng, 50, 0.2, 5.0)
        full = phi_full(x, y, MED)
        assert np.abs(full - full.swapaxes(-1, -2)).max() < 1e-15 * np.abs(full).max()
        assert np.abs(full - phi_full(y, x, MED)).max() < 1e-15 * np.abs(full).max()

    def test_matches_series(self, rng):
        x, y = random_pairs(rng, 30, 0.25, 4.0)
        full = phi_full(x, y, MED)
        for i in range(len(x)):
            ser = phi_series(x[i], y[i], MED, 1e-14)
            assert np.abs(ser - full[i]).max() / np.abs(full[i]).max() < 1e-10

    def test_navier_residual_all_columns(self, rng):
        # mu*Lap(u) + (lam+mu)*grad(div u) + kappa^2 u = 0 columnwise, via
        # 4th-order finite differences of the tensor evaluations.
        x, y = random_pairs(rng, 5, 0.5, 3.0)
        lam, mu, k2 = MED.lambda0, MED.mu0, MED.kappa**2
        from conftest import _fd4

        eye = np.eye(3)
        for maker in (
            lambda p, q: phi_full(p, q, MED),
            lambda p, q: phi_part(p, q, WavePart.P, MED),
            lambda p, q: phi_part(p, q, WavePart.S, MED),
        ):
            for i in range(len(x)):
                r = np.linalg.norm(x[i] - y[i])
                h = 3e-3 * r
                for j in range(3):
                    col = lambda p: maker(p, y[i])[:, j]
                    lap = np.zeros(3, complex)
                    for m in range(3):
                        e = h * eye[m]
                        lap += (
                            -col(x[i] + 2 * e) + 16 * col(x[i] + e) - 30 * col(x[i])
                            + 16 * col(x[i] - e) - col(x[i] - 2 * e)
                        ) / (12 * h * h)
                    div = lambda p: sum(_fd4(lambda q: col(q)[m], p, eye[m], h) for m in range(3))
                    grad_div = np.array([_fd4(div, x[i], eye[l], h) for l in range(3)])
                    resid = mu * lap + (lam + mu) * grad_div + k2 * col(x[i])
                    scale = k2 * np.abs(col(x[i])).max()
                    assert np.abs(resid).max() / scale < 1e-5

    def test_series_truncation_bound(self):
        x = np.array([1.0, 0, 0])
        med = ElasticMedium(1.0, 1.0, 4.0)  # kappa_s * r = 4
        _, n_used = phi_series_info(x, np.zeros(3), med, 1e-14)
        assert n_used <= 60

    def test_series_static_limit_is_kelvin(self):
        med = ElasticMedium(1.0, 1.0, 1e-9)
        x, y = np.array([0.3, -0.2, 0.9]), np.array([-0.5, 0.6, 0.1])
        z = x - y
        r = np.linalg.norm(z)
        lam, mu = med.lambda0, med.mu0
        kelvin = (1 / (8 * np.pi)) * (
            (1 / mu + 1 / (lam + 2 * mu)) * np.eye(3) / r
            + (1 / mu - 1 / (lam + 2 * mu)) * np.outer(z, z) / r**3
        )
        assert np.abs(phi_series(x, y, med, 1e-30) - kelvin).max() < 1e-9


class TestPhiPartGrad:
    def test_vs_fd_of_columns(self, rng):
        x, y = random_pairs(rng, 10, 0.2, 4.0)
        for part in WavePart:
            for j in range(3):
                grads = phi_part_grad(x, y, part, j, MED)
                for i in range(len(x)):
                    r = np.linalg.norm(x[i] - y[i])
                    fd = fd_jacobian(lambda p: phi_part(p, y[i], part, MED)[:, j], x[i], 1e-5 * r)
                    assert np.abs(grads[i] - fd).max() / np.abs(grads[i]).max() < 1e-6

    def test_distinct_index_zero_on_axis(self):
        x = np.array([1.3, 0.0, 0.0])
        g = phi_part_grad(x, np.zeros(3), WavePart.P, 1, MED)
        # entry (row 2, deriv 0) involves only the triple product z_0 z_1 z_2
        assert g[2, 0] == 0

    def test_curl_of_p_columns_vanishes(self, rng):
        x, y = random_pairs(rng, 10, 0.2, 4.0)
        for j in range(3):
            g = phi_part_grad(x, y, WavePart.P, j, MED)
            curl = np.stack(
                [g[:, 2, 1] - g[:, 1, 2], g[:, 0, 2] - g[:, 2, 0], g[:, 1, 0] - g[:, 0, 1]], axis=-1
            )
            assert np.abs(curl).max() / np.abs(g).max() < 1e-12

    def test_curl_of_p_columns_vanishes_fd(self, rng):
        x, y = random_pairs(rng, 5, 0.3, 2.0)
        for i in range(len(x)):
            r = np.linalg.norm(x[i] - y[i])
            J = fd_jacobian(lambda p: phi_part(p, y[i], WavePart.P, MED)[:, 0], x[i], 1e-5 * r)
            curl = np.array([J[2, 1] - J[1, 2], J[0, 2] - J[2, 0], J[1, 0] - J[0, 1]])
            assert np.abs(curl).max() / np.abs(J).max() < 1e-6

    def test_divergence_identities(self, rng):
        # div Phi_s^j = 0; div Phi_p^j = (kp^2/k^2) dG_p/dx_j
        x, y = random_pairs(rng, 10, 0.2, 4.0)
        grad_p = green_derivs(x, y, WavePart.P, MED)[0]
        for j in range(3):
            gs = phi_part_grad(x, y, WavePart.S, j, MED)
            assert np.abs(np.trace(gs, axis1=-2, axis2=-1)).max() / np.abs(gs).max() < 1e-12
            gp = phi_part_grad(x, y, WavePart.P, j, MED)
            expected = (MED.kappa_p**2 / MED.kappa**2) * grad_p[:, j]
            assert np.abs(np.trace(gp, axis1=-2, axis2=-1) - expected).max() / np.abs(expected).max() < 1e-12

    def test_divergence_of_s_columns_fd(self, rng):
        x, y = random_pairs(rng, 5, 0.3, 2.0)
        for i in range(len(x)):
            r = np.linalg.norm(x[i] - y[i])
            J = fd_jacobian(lambda p: phi_part(p, y[i], WavePart.S, MED)[:, 1], x[i], 1e-5 * r)
            assert abs(np.trace(J)) / np.abs(J).max() < 1e-6

    def test_short_range_growth_rate(self):
        # Frobenius norm^2 summed over columns grows like r^-8 near the pole.
        y = np.zeros(3)
        u = np.array([0.36, 0.48, 0.8])
        rs = np.geomspace(1e-2, 1e-1, 9)
        norms = []
        for r in rs:
            total = 0.0
            for j in range(3):
                g = phi_part_grad(r * u, y, WavePart.P, j, MED)
                total += float(np.sum(np.abs(g) ** 2))
            norms.append(total)
        slope = np.polyfit(np.log(rs), np.log(norms), 1)[0]
        assert slope == pytest.approx(-8.0, abs=0.1)


class TestPhiGradSeries:
    def test_vs_fd_of_series_and_closed_form(self, rng):
        x, y = random_pairs(rng, 4, 0.3, 2.0)
        for i in range(len(x)):
            r = np.linalg.norm(x[i] - y[i])
            h = 1e-5 * r
            for a in range(3):
                for b in range(3):
                    for l in range(3):
                        val = phi_grad_series(x[i], y[i], a, b, l, MED, 1e-14)
                        e = np.zeros(3)
                        e[l] = h
                        fd_ser = (
                            phi_series(x[i] + e, y[i], MED, 1e-14)[a, b]
                            - phi_series(x[i] - e, y[i], MED, 1e-14)[a, b]
                        ) / (2 * h)
                        fd_full = (
                            phi_full(x[i] + e, y[i], MED)[a, b] - phi_full(x[i] - e, y[i], MED)[a, b]
                        ) / (2 * h)
                        assert abs(val - fd_ser) / abs(fd_ser) < 1e-6
                        assert abs(val - fd_full) / abs(fd_full) < 1e-6

    def test_short_range_bound_exponent(self):
        # |dPhi_ij/dx_l|^2 <= c / r^4: fitted growth exponent >= -4.1
        y = np.zeros(3)
        u = np.array([0.6, -0.64, 0.48])
        u /= np.linalg.norm(u)
        rs = np.geomspace(0.05, 1.0, 8)
        worst = -np.inf
        for a in range(3):
            for l in range(3):
                mags = [abs(phi_grad_series(r * u, y, a, a, l, MED, 1e-14)) ** 2 for r in rs]
                if min(mags) > 0:
                    slope = np.polyfit(np.log(rs), np.log(mags), 1)[0]
                    worst = max(worst, -slope)
        assert worst <= 4.1


class TestTraction:
    def test_isotropic_dilation(self):
        nu = np.array([0.0, 0.6, 0.8])
        t = traction(np.eye(3), 3.0, np.zeros(3), nu, 1.5, 0.7)
        assert np.allclose(t, (3 * 1.5 + 2 * 0.7) * nu, atol=1e-14)

    def test_rigid_motion_is_stress_free(self, rng):
        b = rng.standard_normal(3)
        # v = a + b x x has jacobian equal to the cross-product matrix of b
        jac = np.array([[0, -b[2], b[1]], [b[2], 0, -b[0]], [-b[1], b[0], 0]])
        nu = np.array([1.0, 0.0, 0.0])
        t_sigma = traction_from_jacobian(jac, nu, 1.2, 0.9)
        t_parts = traction(jac, 0.0, 2 * b, nu, 1.2, 0.9)
        assert np.abs(t_sigma).max() < 1e-14
        assert np.abs(t_parts).max() < 1e-14

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_both_forms_agree(self, seed):
        rng = np.random.default_rng(seed)
        jac = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        nu = rng.standard_normal(3)
        nu /= np.linalg.norm(nu)
        div = np.trace(jac)
        curl = np.array([jac[2, 1] - jac[1, 2], jac[0, 2] - jac[2, 0], jac[1, 0] - jac[0, 1]])
        t1 = traction(jac, div, curl, nu, 1.3, 0.8)
        t2 = traction_from_jacobian(jac, nu, 1.3, 0.8)
        assert np.abs(t1 - t2).max() < 1e-12 * max(np.abs(t1).max(), 1.0)

    def test_non_unit_normal_rejected(self):
        with pytest.raises(ContractViolation):
            traction(np.eye(3), 3.0, np.zeros(3), np.array([1.0, 1.0, 0.0]), 1.0, 1.0)


@settings(max_examples=25, deadline=None)
@given(
    st.floats(0.2, 5.0),
    st.floats(0.05, 4.0),
    st.floats(-0.4, 3.0),
    st.integers(0, 2**32 - 1),
)
def test_phi_properties_random_media(mu0, kappa, lam_ratio, seed):
    med = ElasticMedium(lambda0=lam_ratio * mu0, mu0=mu0, kappa=kappa)
    rng = np.random.default_rng(seed)
    x, y = random_pairs(rng, 4, 0.2, 3.0)
    full = phi_full(x, y, med)
    both = phi_part(x, y, WavePart.P, med) + phi_part(x, y, WavePart.S, med)
    assert np.abs(full - both).max() / np.abs(full).max() < 1e-12
    assert np.abs(full - full.swapaxes(-1, -2)).max() < 1e-13 * np.abs(full).max()
    if med.kappa * 3.0 < 15:
        ser = phi_series(x[0], y[0], med, 1e-14)
        assert np.abs(ser - full[0]).max() / np.abs(full[0]).max() < 1e-8
