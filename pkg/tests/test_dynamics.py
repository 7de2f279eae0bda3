import math

import numpy as np
import pytest

from nlslab.dynamics import (MonitorRecord, SimConfig, _limit_tv_ratio,
                             apply_S_A, decompose, evolve_linearized,
                             evolve_nls, family_profile, fgr_balance_check,
                             fit_gamma_decay, generalized_kernel_basis,
                             initial_data, positivity_checks,
                             project_continuous, projection_residuals,
                             reconstruct, reflection_time)
from nlslab.grid import Field, Grid, inner, l2_norm, zeta_phi
from nlslab.linearization import assemble
from nlslab.soliton import invariants, lambda_p_operator, profile_values


def band_limited_field(grid, seed, decay=5.0):
    rng = np.random.default_rng(seed)
    env = np.exp(-(grid.x / decay) ** 2)
    base = np.pi / grid.L
    vals = sum((rng.standard_normal() + 1j * rng.standard_normal())
               * np.exp(1j * m * base * grid.x) for m in range(-10, 11))
    return Field(grid, env * vals)


# ---------------------------------------------------------------------------
# nonlinear solver


def test_soliton_evolves_by_pure_phase():
    cfg = SimConfig(p=2.0, L=40.0, N=2048, dt=0.001, T=1.0,
                    perturbation="none", sponge=False)
    grid = cfg.grid
    phi = profile_values(2.0, 1.0, grid.x).astype(complex)
    u = evolve_nls(Field(grid, phi), cfg)
    expect = np.exp(1j * cfg.T) * phi
    assert np.max(np.abs(u.values - expect)) < 1e-6


def test_mass_conserved_to_roundoff():
    cfg = SimConfig(p=2.0, L=40.0, N=2048, dt=0.01, T=2.0,
                    perturbation="bump", eps_eta=0.05, sponge=False)
    from nlslab.linearization import solve_mode
    u0 = initial_data(cfg, None if cfg.perturbation == "bump" else None)
    u0 = Field(cfg.grid, profile_values(2.0, 1.0, cfg.grid.x)
               + 0.05 * np.exp(-cfg.grid.x ** 2))
    _, Q0, _ = invariants(u0, 2.0)
    u = evolve_nls(u0, cfg)
    _, Q1, _ = invariants(u, 2.0)
    assert abs(Q1 - Q0) < 1e-12 * Q0


def test_energy_drift_second_order_in_dt():
    grid = Grid(40.0, 2048)
    u0 = Field(grid, profile_values(2.0, 1.0, grid.x)
               + 0.05 * np.exp(-grid.x ** 2))
    E0, _, _ = invariants(u0, 2.0)
    drifts = []
    for dt in (0.02, 0.01):
        cfg = SimConfig(p=2.0, L=40.0, N=2048, dt=dt, T=1.0, sponge=False)
        E1, _, _ = invariants(evolve_nls(u0, cfg), 2.0)
        drifts.append(abs(E1 - E0))
    order = math.log2(drifts[0] / drifts[1])
    assert order == pytest.approx(2.0, abs=0.4)


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(dt=-0.01)
    with pytest.raises(ValueError):
        SimConfig(dt=0.5)
    with pytest.raises(ValueError):
        SimConfig(A=1.0, B=10.0)


# ---------------------------------------------------------------------------
# linearized solver and projections


def test_jordan_chain_action_is_exact():
    # (Lambda_p phi, 0) flows to (Lambda_p phi, t phi): linear in t, so the
    # trapezoidal rule reproduces it to round-off
    grid = Grid(40.0, 1024)
    phi = Field(grid, profile_values(2.0, 1.0, grid.x))
    lam_phi = lambda_p_operator(2.0, phi)
    r0 = (Field(grid, lam_phi.values), Field(grid, np.zeros(grid.N)))
    T = 2.0
    r1, r2 = evolve_linearized(r0, 2.0, 1.0, dt=0.01, T=T)
    scale = np.max(np.abs(phi.values))
    # the chain identity L+ Lambda_p phi = -phi holds to fd4 truncation
    assert np.max(np.abs(r1.values - lam_phi.values)) < 1e-5 * scale
    assert np.max(np.abs(r2.values - T * phi.values)) < 1e-5 * scale


def test_projection_idempotent_and_annihilating():
    grid = Grid(40.0, 1024)
    ops = assemble(2.0, 1.0, grid)
    from nlslab.linearization import internal_mode
    mode = internal_mode(2.0, 1.0, grid)
    f = band_limited_field(grid, 3)
    r0 = (Field(grid, f.values.real), Field(grid, f.values.imag))
    r1 = project_continuous(r0, ops, mode)
    res = projection_residuals(r1, ops, mode)
    scale = l2_norm(r1[0]) + l2_norm(r1[1])
    assert np.max(np.abs(res)) < 1e-10 * scale
    r2 = project_continuous(r1, ops, mode)
    assert np.max(np.abs(r2[0].values - r1[0].values)) < 1e-10 * scale
    assert np.max(np.abs(r2[1].values - r1[1].values)) < 1e-10 * scale


def test_kernel_basis_members_annihilated_by_projection():
    grid = Grid(40.0, 1024)
    ops = assemble(2.0, 1.0, grid)
    from nlslab.linearization import internal_mode
    mode = internal_mode(2.0, 1.0, grid)
    for b in generalized_kernel_basis(ops):
        n = grid.N
        r = (Field(grid, b[:n]), Field(grid, b[n:]))
        pr = project_continuous(r, ops, mode)
        assert l2_norm(pr[0]) + l2_norm(pr[1]) < 1e-8 * (
            l2_norm(r[0]) + l2_norm(r[1]) + 1e-30)


def test_reflection_time_scales_with_box():
    grid1, grid2 = Grid(40.0, 1024), Grid(80.0, 2048)
    r1 = Field(grid1, np.exp(-grid1.x ** 2))
    r2 = Field(grid2, np.exp(-grid2.x ** 2))
    assert reflection_time(r2) == pytest.approx(2.0 * reflection_time(r1),
                                                rel=0.05)


# ---------------------------------------------------------------------------
# modulation decomposition


def test_decompose_reconstruct_roundtrip(mode_p2):
    grid = Grid(40.0, 2048)
    u = Field(grid, family_profile(mode_p2, 1.1, 0.05, 5e-3 + 2e-3j, grid))
    st = decompose(u, None, mode_p2)
    back = reconstruct(st, mode_p2, grid)
    assert np.max(np.abs(back.values - u.values)) < 1e-10
    assert st.omega == pytest.approx(1.1, abs=1e-8)
    assert st.v == pytest.approx(0.05, abs=1e-8)
    assert st.z == pytest.approx(5e-3 + 2e-3j, abs=1e-8)
    assert l2_norm(st.eta) < 1e-9


def test_decompose_equivariance(mode_p2):
    grid = Grid(40.0, 2048)
    u0 = Field(grid, family_profile(mode_p2, 1.0, 0.0, 8e-3, grid)
               + 0.002 * np.exp(-grid.x ** 2))
    s0 = decompose(u0, None, mode_p2)
    theta0, D0 = 0.3, 0.5
    shifted = np.fft.ifft(np.fft.fft(u0.values) * np.exp(-1j * grid.k * D0))
    u1 = Field(grid, np.exp(1j * theta0) * shifted)
    s1 = decompose(u1, s0, mode_p2)
    assert (s1.theta - s0.theta) % (2 * np.pi) == pytest.approx(theta0,
                                                               abs=1e-8)
    assert s1.D - s0.D == pytest.approx(D0, abs=1e-8)
    assert s1.omega == pytest.approx(s0.omega, abs=1e-10)
    assert s1.z == pytest.approx(s0.z, abs=1e-10)


def test_newton_residual_small(mode_p2):
    grid = Grid(40.0, 2048)
    u = Field(grid, family_profile(mode_p2, 1.0, 0.0, 1e-2, grid)
              + 0.001 * np.exp(-grid.x ** 2) * (1 + 0.5j))
    st = decompose(u, None, mode_p2)
    assert st.newton_residual < 1e-10


# ---------------------------------------------------------------------------
# virial structures


def test_apply_s_a_antisymmetric():
    grid = Grid(30.0, 1024)
    _, phi_A = zeta_phi(grid, A=50.0)
    u = band_limited_field(grid, 1)
    v = band_limited_field(grid, 2)
    lhs = inner(u, apply_S_A(v, phi_A))
    rhs = -inner(apply_S_A(u, phi_A), v)
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-12)


@pytest.mark.parametrize("seed", range(100))
def test_commutator_positivity_random_fields(seed):
    grid = Grid(30.0, 512)
    cfg = SimConfig(L=30.0, N=512)
    eta = band_limited_field(grid, seed, decay=4.0)
    aux = positivity_checks(eta, cfg)
    assert aux["poscomm_slack"] > -1e-10 * max(1.0, aux["grad_term"])


def test_purepower_commutator_ratio_bounded():
    grid = Grid(30.0, 512)
    cfg = SimConfig(L=30.0, N=512)
    for seed in range(5):
        eta = band_limited_field(grid, seed)
        aux = positivity_checks(eta, cfg)
        assert 0.0 <= aux["purepower_ratio"] < 1.0


# ---------------------------------------------------------------------------
# monitors and summaries


def test_limit_tv_ratio_decaying_oscillation():
    ts = np.linspace(0.0, 200.0, 2000)
    series = 1.0 + 0.5 * np.exp(-ts / 30.0) \
        + 1e-3 * np.sin(1.78 * ts) * np.exp(-ts / 50.0)
    assert _limit_tv_ratio(ts, series) < 0.1


def test_limit_tv_ratio_flags_secular_drift():
    ts = np.linspace(0.0, 200.0, 2000)
    series = 1e-3 * ts + 1e-4 * np.sin(1.78 * ts)
    assert _limit_tv_ratio(ts, series) > 0.2


def test_limit_tv_ratio_noise_floor():
    # round-off-level wiggle on a constant must not be flagged
    rng = np.random.default_rng(0)
    ts = np.linspace(0.0, 200.0, 2000)
    series = 1.0 + 1e-12 * rng.standard_normal(len(ts))
    assert _limit_tv_ratio(ts, series) < 0.1


def _synthetic_records(gamma=0.2, z0=1e-2, n=400, T=200.0):
    ts = np.linspace(0.0, T, n)
    z = z0 / np.sqrt(1.0 + 2.0 * gamma * z0 ** 2 * ts)
    J = np.cumsum(np.gradient(ts) * gamma * z ** 4)
    recs = []
    for t, za, j in zip(ts, z, J):
        recs.append(MonitorRecord(
            t=float(t), E_drift=0.0, Q_drift=0.0, P_drift=0.0,
            z_abs=float(za), z=complex(za), omega=1.0, v=0.0,
            eta_sigma_A=0.0, eta_sigma_tilde=0.0, eta_weighted_h1=0.0,
            virial_I=0.0, J_FGR=float(j), newton_residual=0.0))
    return recs


def test_fit_gamma_decay_recovers_slope():
    recs = _synthetic_records(gamma=0.2, z0=1e-2)
    fit = fit_gamma_decay(recs)
    assert fit["positive"]
    assert fit["inv_z2_slope"] == pytest.approx(0.4, rel=1e-6)


def test_fgr_balance_on_synthetic_records():
    recs = _synthetic_records(gamma=0.2, z0=1e-2)
    rep = fgr_balance_check(recs, 0.2, 2.0)
    assert rep["sign_agreement"] == 1.0
    assert rep["median_ratio"] == pytest.approx(1.0, rel=0.05)
