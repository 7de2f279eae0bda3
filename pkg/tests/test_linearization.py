import math

import numpy as np
import pytest
import scipy.linalg as sla

from nlslab.grid import Field, Grid, inner, l2_norm, odd_content, quadrature
from nlslab.linearization import (assemble, default_L, gap_eigenvalues,
                                  generalized_kernel_check, internal_mode,
                                  multiplicity_check, scan_modes, solve_mode,
                                  tilde_p0_condition, tilde_p0_report)

# internal-mode eigenvalues, cross-checked against the shooting path
LAMBDA_TABLE = {
    1.9: 0.8467769764,
    2.2: 0.9517201789,
    4.0: 0.9482737428,
    4.8: 0.5383849502,
}


@pytest.mark.parametrize("p,lam_ref", sorted(LAMBDA_TABLE.items()))
def test_internal_mode_eigenvalues(p, lam_ref):
    mode = solve_mode(p)
    assert mode.lam == pytest.approx(lam_ref, abs=3e-7)
    assert 0.0 < mode.lam < 1.0
    assert mode.sign_ok


def test_mode_residual_normalization_parity(mode_p2):
    # || calL xi - i lambda xi || < 1e-7; int xi1 Im xi2 = 1/2; xi even
    assert mode_p2.residual < 1e-7
    grid = mode_p2.xi1.grid
    pairing = float(np.real(quadrature(
        mode_p2.xi1.values * mode_p2.xi2_im.values, grid)))
    assert pairing == pytest.approx(0.5, abs=1e-8)
    assert odd_content(mode_p2.xi1) < 1e-9
    assert odd_content(mode_p2.xi2_im) < 1e-9


def test_decay_rate_matches_gap_distance(mode_p2):
    expected = math.sqrt(1.0 - mode_p2.lam)
    assert mode_p2.decay_rate == pytest.approx(expected, rel=0.05)


def test_scaling_covariance_omega4():
    # with L and x scaled together the discrete problems coincide exactly
    m1 = internal_mode(2.0, 1.0, Grid(40.0, 2048))
    m4 = internal_mode(2.0, 4.0, Grid(20.0, 2048))
    assert m4.lam == pytest.approx(4.0 * m1.lam, abs=1e-7)


def test_grid_refinement_cauchy():
    m1 = internal_mode(2.0, 1.0, Grid(40.0, 2048))
    m2 = internal_mode(2.0, 1.0, Grid(40.0, 4096))
    assert abs(m2.lam - m1.lam) < 1e-7


def test_spectrum_symmetric_under_negation():
    # the full linearization matrix has spectrum symmetric in lambda -> -lambda
    grid = Grid(30.0, 512)
    ops = assemble(2.0, 1.0, grid)
    n = grid.N - 1
    calL = np.zeros((2 * n, 2 * n))
    calL[:n, n:] = ops.Lminus.toarray()
    calL[n:, :n] = -ops.Lplus.toarray()
    ev = sla.eigvals(calL)
    ev = ev[np.abs(ev) > 1e-8]
    # match each eigenvalue with its negation
    for z in ev[:200]:
        assert np.min(np.abs(ev + z)) < 1e-6 * max(1.0, abs(z))


def test_generalized_kernel_relations():
    grid = Grid(default_L(2.0, 1.0, 0.89), 2048)
    ops = assemble(2.0, 1.0, grid)
    rep = generalized_kernel_check(ops)
    assert rep["dim"] == 4
    assert rep["max_residual"] < 1e-6


def test_multiplicity_simple_eigenvalue():
    rep = multiplicity_check(2.0)
    assert rep["cluster_count"] == 1
    assert rep["jordan_residual"] > 1e-3        # xi not in range: no Jordan block
    assert rep["conjugate_eigen_residual"] < 1e-5


def test_scan_modes_guard_band():
    reports = scan_modes([2.99, 3.0, 3.01])
    assert all("guard band" in r.error for r in reports)


def test_scan_modes_one_mode_at_p2():
    (rep,) = scan_modes([2.0], N=1024)
    assert rep.error is None
    assert len(rep.gap_eigenvalues) == 1
    assert rep.second_mode is None
    assert rep.tilde_p0_value < 0.0


def test_tilde_p0_condition_values(mode_p2):
    assert tilde_p0_condition(2.0, mode_p2.lam) < 0.0
    with pytest.raises(ValueError):
        tilde_p0_condition(2.0, 1.5)


def test_tilde_p0_report_sign():
    rep = tilde_p0_report(p_lo=1.7, p_hi=2.0, steps=4)
    assert rep["all_negative"] or rep["bracket"] is not None


def test_zero_mode_filtered_from_gap():
    # Lambda_p phi is an exact zero direction of L- L+; it must not be
    # reported as a gap eigenvalue
    grid = Grid(default_L(2.0, 1.0, 0.89), 1024)
    ops = assemble(2.0, 1.0, grid)
    lams = gap_eigenvalues(ops)
    assert len(lams) == 1
    assert lams[0] > 0.5
