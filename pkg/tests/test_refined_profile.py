import math

import numpy as np
import pytest

from nlslab.errors import BadZ
from nlslab.grid import Field, Grid, l2_norm, quadrature
from nlslab.refined_profile import (covariant_profile, d2_f, d_f,
                                    delta1_default, hat_R,
                                    hat_R_bound_constant,
                                    leading_block_reference, nonlinearity,
                                    phi_tilde, solve_theta_tilde,
                                    weighted_residual_norm)
from nlslab.soliton import q_of_omega


def test_df_matches_finite_difference(mode_p2):
    # Df(u)X is the real-linear derivative of f at u in direction X
    g = mode_p2.xi1.grid
    rng = np.random.default_rng(0)
    u = (1.2 + 0.3j) * np.exp(-(g.x / 4.0) ** 2) + 0.5
    X = (rng.standard_normal(g.N) + 1j * rng.standard_normal(g.N)) \
        * np.exp(-(g.x / 5.0) ** 2)
    h = 1e-6
    p = 2.0
    fd = (nonlinearity(u + h * X, p) - nonlinearity(u - h * X, p)) / (2 * h)
    assert np.max(np.abs(d_f(u, X, p) - fd)) < 1e-7


def test_d2f_matches_finite_difference(mode_p2):
    g = mode_p2.xi1.grid
    rng = np.random.default_rng(1)
    u = (1.0 + 0.2j) * np.exp(-(g.x / 4.0) ** 2) + 0.4
    X = (rng.standard_normal(g.N) + 1j * rng.standard_normal(g.N)) \
        * np.exp(-(g.x / 5.0) ** 2)
    h = 1e-4
    p = 2.0
    fd = (nonlinearity(u + h * X, p) - 2.0 * nonlinearity(u, p)
          + nonlinearity(u - h * X, p)) / h ** 2
    assert np.max(np.abs(d2_f(u, X, p) - fd)) < 1e-5


def test_hat_r_is_quadratic_in_z(mode_p2):
    # dyadic ladder: halving z quarters the remainder
    norms = [l2_norm(hat_R(z, mode_p2)) for z in (4e-3, 2e-3, 1e-3)]
    for a, b in zip(norms, norms[1:]):
        assert a / b == pytest.approx(4.0, rel=0.05)


def test_hat_r_bound_constant_stable(mode_p2):
    c1 = hat_R_bound_constant(1e-3, mode_p2)
    c2 = hat_R_bound_constant(5e-4, mode_p2)
    assert c2 == pytest.approx(c1, rel=0.1)


def test_orthogonality_residuals(mode_p2):
    rp = solve_theta_tilde(1e-3 + 5e-4j, mode_p2)
    assert np.max(np.abs(rp.orth_residuals)) < 1e-8
    assert rp.cond < 1e10


def test_theta_tilde_quadratic_scaling(mode_p2):
    # theta~ and z~ components scale like |z|^2
    zs = [2e-3, 1e-3, 5e-4]
    t0 = [abs(solve_theta_tilde(z, mode_p2).theta_tilde[0]) for z in zs]
    t5 = [abs(solve_theta_tilde(z, mode_p2).theta_tilde[5]) for z in zs]
    for seq in (t0, t5):
        slope = np.polyfit(np.log([abs(z) for z in zs]), np.log(seq), 1)[0]
        assert slope == pytest.approx(2.0, abs=0.1)


def test_translation_boost_components_vanish(mode_p2):
    rp = solve_theta_tilde(1e-3, mode_p2)
    # D~ and v~ vanish identically by parity
    assert abs(rp.theta_tilde[2]) < 1e-12
    assert abs(rp.theta_tilde[3]) < 1e-12
    assert abs(rp.rhs_parity[0]) < 1e-12
    assert abs(rp.rhs_parity[1]) < 1e-12


def test_leading_block_matches_quadrature(mode_p2):
    # the (theta~, omega~) block entry equals (5-p)/(p-1) q(1); read it off
    # the assembled system matrix at tiny z
    rp = solve_theta_tilde(1e-6, mode_p2)
    A = rp.diagnostics["A_matrix"]
    ref = leading_block_reference(2.0, mode_p2.xi1.grid)
    assert ref == pytest.approx(9.0 * q_of_omega(2.0, 1.0, mode_p2.xi1.grid)
                                / 3.0, rel=1e-12)
    block = {abs(A[0, 1]), abs(A[1, 0])}
    assert min(abs(b - ref) for b in block) < 1e-6 * ref


def test_bad_z_raises(mode_p2):
    d1 = delta1_default(mode_p2)
    with pytest.raises(BadZ):
        solve_theta_tilde(2.0 * d1, mode_p2)


def test_weighted_residual_finite(mode_p2):
    rp = solve_theta_tilde(1e-3, mode_p2)
    kappa = 0.5 * min(math.sqrt(1.0 - mode_p2.lam),
                      (mode_p2.p - 1.0) * 0.5)
    n = weighted_residual_norm(rp, kappa)
    assert np.isfinite(n)
    assert n < 1.0


def test_covariance_omega_scaling(mode_p2):
    z = 1e-3
    base = solve_theta_tilde(z, mode_p2)
    cov = covariant_profile(4.0, 0.0, z, mode_p2)
    assert cov.theta_tilde[0] == pytest.approx(4.0 * base.theta_tilde[0],
                                               rel=1e-12)
    assert cov.theta_tilde[1] == pytest.approx(4.0 * base.theta_tilde[1],
                                               rel=1e-12)
    # profile peak scales by omega^{1/(p-1)} = 4
    assert np.max(np.abs(cov.phi_z.values)) == pytest.approx(
        4.0 * np.max(np.abs(base.phi_z.values)), rel=1e-6)


def test_covariance_boost_phase(mode_p2):
    z = 1e-3
    cov = covariant_profile(1.0, 0.8, z, mode_p2)
    base = solve_theta_tilde(z, mode_p2)
    g = mode_p2.xi1.grid
    expect = np.exp(0.5j * 0.8 * g.x) * base.phi_z.values
    assert np.max(np.abs(cov.phi_z.values - expect)) < 1e-12
    assert cov.diagnostics["theta_full"] == pytest.approx(
        1.0 - 0.8 ** 2 / 4.0 + base.theta_tilde[0], rel=1e-12)


def test_phi_tilde_real_linear_in_z(mode_p2):
    a = phi_tilde(1e-3, mode_p2).values
    b = phi_tilde(1e-3j, mode_p2).values
    c = phi_tilde(1e-3 + 1e-3j, mode_p2).values
    assert np.max(np.abs(a + b - c)) < 1e-16
    # real part couples xi1, imaginary part couples y
    assert np.max(np.abs(a.imag)) == 0.0
    assert np.max(np.abs(b.real)) == 0.0
