import numpy as np
import pytest

from nlslab.errors import NoModeFound
from nlslab.evans import (evans_gap, odd_second_mode, shoot_lambda,
                          shoot_lambda_near_edge, threshold_evans)
from nlslab.linearization import internal_mode, default_L
from nlslab.grid import Grid

# frozen shooting eigenvalues for regression
SHOOT_TABLE = {
    1.9: 0.8467769764,
    2.0: 0.8903960910,
    2.2: 0.9517201789,
    2.5: 0.9923804819,
    4.0: 0.9482737428,
}


@pytest.mark.parametrize("p,lam_ref", sorted(SHOOT_TABLE.items()))
def test_shooting_matches_frozen_table(p, lam_ref):
    lam = shoot_lambda(p)
    assert lam == pytest.approx(lam_ref, abs=1e-8)


@pytest.mark.parametrize("p", [1.9, 2.0, 4.0])
def test_shooting_matches_matrix_path(p):
    # two independent discretizations of the same eigenvalue problem
    lam_shoot = shoot_lambda(p)
    lam_matrix = internal_mode(
        p, 1.0, Grid(default_L(p, 1.0, lam_shoot), 2048)).lam
    assert lam_shoot == pytest.approx(lam_matrix, abs=1e-6)


def test_evans_value_changes_sign_across_eigenvalue():
    lam = SHOOT_TABLE[2.0]
    assert evans_gap(2.0, lam - 1e-3) * evans_gap(2.0, lam + 1e-3) < 0.0


def test_evans_value_stable_under_solver_settings():
    lam = 0.5
    v0 = evans_gap(2.0, lam)
    v1 = evans_gap(2.0, lam, X=55.0)
    v2 = evans_gap(2.0, lam, rtol=1e-12)
    assert v1 == pytest.approx(v0, rel=1e-6)
    assert v2 == pytest.approx(v0, rel=1e-6)


def test_threshold_resonance_at_p3_only():
    # p = 3 has an even threshold resonance; p = 2 does not
    even3, _ = threshold_evans(3.0)
    even2, _ = threshold_evans(2.0)
    assert abs(even3) < 1e-4
    assert abs(even2) > 1e-2
    assert abs(even2) > 100.0 * abs(even3)


def test_threshold_value_stable_under_box_size():
    even2, _ = threshold_evans(2.0)
    even2b, _ = threshold_evans(2.0, X=50.0)
    assert even2b == pytest.approx(even2, rel=1e-2)


def test_odd_second_mode_exists_below_threshold():
    mu = odd_second_mode(1.7)
    assert mu is not None
    lam = shoot_lambda(1.7)
    assert lam < mu < 1.0


def test_odd_second_mode_absent_above_threshold():
    assert odd_second_mode(1.9) is None


def test_near_edge_shooting_agrees_with_bulk_scan():
    # for p = 2.5 the mode is still resolvable both ways
    lam_bulk = shoot_lambda(2.5)
    lam_edge = shoot_lambda_near_edge(2.5)
    assert lam_edge == pytest.approx(lam_bulk, abs=1e-6)


def test_no_mode_found_raises():
    with pytest.raises(NoModeFound):
        shoot_lambda(2.0, lam_lo=0.02, lam_hi=0.5)
