import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from nlslab.grid import Field, Grid, l2_norm
from nlslab.soliton import (SolitonParams, apply_symmetry, derived_scalars,
                            invariants, lambda_p_operator, profile,
                            profile_values, q_of_omega, static_residual,
                            translate)


@pytest.fixture(scope="module")
def grid():
    return Grid(30.0, 2048)


def test_params_validation():
    with pytest.raises(ValueError):
        SolitonParams(p=5.0)
    with pytest.raises(ValueError):
        SolitonParams(p=2.0, omega=-1.0)


def test_cubic_soliton_closed_form(grid):
    # p = 3, omega = 1: phi = sqrt(2) sech(x), Q = 2, E = -2/3
    sol = profile(3.0, 1.0, grid)
    assert sol.profile.values[grid.center_index] == pytest.approx(
        math.sqrt(2.0), abs=1e-12)
    assert np.allclose(sol.profile.values,
                       math.sqrt(2.0) / np.cosh(grid.x), atol=1e-12)
    E, Q, P = invariants(sol.profile, 3.0)
    assert Q == pytest.approx(2.0, abs=1e-10)
    assert E == pytest.approx(-2.0 / 3.0, abs=1e-10)
    assert P == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0, 4.5])
def test_invariants_match_quad_oracle(p, grid):
    sol = profile(p, 1.0, grid)
    E, Q, P = invariants(sol.profile, p)
    Q_ref = quad(lambda x: 0.5 * profile_values(p, 1.0, np.array([x]))[0] ** 2,
                 -np.inf, np.inf)[0]
    amp = ((p + 1.0) / 2.0) ** (1.0 / (p - 1.0))
    r = 0.5 * (p - 1.0)

    def phi_sq_deriv(x):
        # d/dx [amp sech^{2/(p-1)}(r x)] = -amp (2r/(p-1)) sech^{2/(p-1)} tanh
        a = abs(r * x)
        s = 2.0 * np.exp(-a) / (1.0 + np.exp(-2.0 * a))
        return (amp * (2.0 * r / (p - 1.0)) * s ** (2.0 / (p - 1.0))
                * np.tanh(r * x)) ** 2

    grad = quad(phi_sq_deriv, -np.inf, np.inf)[0]
    pot = quad(lambda x: profile_values(p, 1.0, np.array([x]))[0] ** (p + 1.0),
               -np.inf, np.inf)[0]
    E_ref = 0.5 * grad - pot / (p + 1.0)
    assert Q == pytest.approx(Q_ref, abs=1e-8)
    assert E == pytest.approx(E_ref, abs=1e-8)


def test_static_residual_orders(grid):
    errs = []
    for N in (4096, 8192):
        g = Grid(30.0, N)
        errs.append(static_residual(profile(3.0, 1.0, g), "fd4"))
    assert errs[0] / errs[1] > 12.0          # 4th order
    g = Grid(30.0, 4096)
    assert static_residual(profile(3.0, 1.0, g), "spectral") < 1e-9


@settings(max_examples=20, deadline=None)
@given(p=st.floats(1.3, 4.7), omega=st.floats(0.3, 4.0))
def test_mass_scaling_law(p, omega):
    grid = Grid(60.0, 2048)
    q1 = q_of_omega(p, 1.0, grid)
    qw = q_of_omega(p, omega, grid)
    assert qw == pytest.approx(omega ** (2.0 / (p - 1.0) - 0.5) * q1,
                               rel=1e-8)


def random_field(grid, seed):
    rng = np.random.default_rng(seed)
    env = np.exp(-(grid.x / 5.0) ** 2)
    base = np.pi / grid.L
    vals = sum((rng.standard_normal() + 1j * rng.standard_normal())
               * np.exp(1j * m * base * grid.x) for m in range(-8, 9))
    return Field(grid, env * vals)


@pytest.mark.parametrize("seed,v", [(0, 0.7), (1, -1.3), (2, 2.0)])
def test_boost_identities(grid, seed, v):
    # E(e^{ivx/2}u) = E + vP + (v^2/4)Q and P(e^{ivx/2}u) = P + (v/2)Q
    u = random_field(grid, seed)
    p = 2.0
    E, Q, P = invariants(u, p)
    Eb, Qb, Pb = invariants(apply_symmetry(u, v0=v), p)
    assert Qb == pytest.approx(Q, abs=1e-10)
    assert Pb == pytest.approx(P + 0.5 * v * Q, abs=1e-8)
    assert Eb == pytest.approx(E + v * P + 0.25 * v ** 2 * Q, abs=1e-8)


def test_translation_preserves_invariants(grid):
    u = random_field(grid, 5)
    E, Q, P = invariants(u, 2.0)
    Et, Qt, Pt = invariants(translate(u, 1.37), 2.0)
    assert Qt == pytest.approx(Q, abs=1e-10)
    assert Et == pytest.approx(E, abs=1e-9)
    assert Pt == pytest.approx(P, abs=1e-10)


def test_phase_rotation_preserves_invariants(grid):
    u = random_field(grid, 6)
    before = invariants(u, 2.0)
    after = invariants(apply_symmetry(u, theta0=0.9), 2.0)
    assert np.allclose(before, after, atol=1e-10)


def test_lambda_p_is_omega_derivative(grid):
    # Lambda_p phi = d/domega phi_omega at omega = 1
    p, h = 2.0, 1e-6
    num = (profile_values(p, 1.0 + h, grid.x)
           - profile_values(p, 1.0 - h, grid.x)) / (2.0 * h)
    lam = lambda_p_operator(p, profile(p, 1.0, grid).profile).values
    assert np.max(np.abs(num - lam)) < 1e-7


def test_derived_scalars_convexity(grid):
    for p in (2.0, 3.0):
        d = derived_scalars(p, 1.0, grid)
        assert d["d_convex"]
        assert d["d"] == pytest.approx(d["e"] + q_of_omega(p, 1.0, grid),
                                       rel=1e-10)
