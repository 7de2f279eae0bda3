import math

import numpy as np
import pytest

from nlslab.errors import EmbeddedTooCloseToEdge, NonIntegrable
from nlslab.fgr import (gamma, gamma_integrand, gamma_scan,
                        hessian_form_integrand, integrability_margin,
                        resonance_function, solve_gamma)
from nlslab.grid import quadrature
from nlslab.linearization import solve_mode

GAMMA_P2 = 0.1873957962729786
GAMMA_P19 = 0.2632225005513206


def test_gamma_frozen_value_p2(res_p2):
    assert res_p2.gamma == pytest.approx(GAMMA_P2, rel=1e-8)


def test_gamma_frozen_value_p19():
    mode = solve_mode(1.9)
    res = solve_gamma(mode)
    assert res.gamma == pytest.approx(GAMMA_P19, rel=1e-7)


def test_resonance_residual_and_conditioning(res_p2):
    assert res_p2.residual < 1e-6
    assert res_p2.cond < 1e12


def test_resonance_normalization(res_p2):
    # w1 has unit asymptotic amplitude: sample the oscillatory region
    grid = res_p2.g1.grid
    mask = np.abs(grid.x) >= 0.8 * grid.L
    w1 = 0.5 * (res_p2.g1.values + res_p2.g2_im.values)
    amp = np.max(np.abs(w1[mask]))
    assert amp == pytest.approx(1.0, abs=0.05)


@pytest.mark.parametrize("frac", [0.6, 0.9])
def test_gamma_robust_to_matching_point(mode_p2, res_p2, frac):
    res = solve_gamma(mode_p2, x_m_frac=frac)
    assert res.gamma == pytest.approx(res_p2.gamma, abs=1e-8)


def test_hessian_form_identity(mode_p2, res_p2):
    # the averaged quadratic form equals (p-1) * gamma integrand pointwise
    direct = gamma_integrand(mode_p2, res_p2)
    averaged = hessian_form_integrand(mode_p2, res_p2)
    scale = np.max(np.abs(direct))
    assert np.max(np.abs(averaged - (mode_p2.p - 1.0) * direct)) < 1e-10 * scale


def test_w2_tail_decay_rate(res_p2):
    # w2 decays at the slower of kappa and the soliton-forcing rate
    grid = res_p2.g1.grid
    w2 = 0.5 * (res_p2.g1.values - res_p2.g2_im.values)
    half = grid.N // 2
    x = grid.x[half:]
    w2h = np.abs(w2[half:])
    mask = (x >= 0.3 * grid.L) & (x <= 0.55 * grid.L) & (w2h > 1e-13)
    slope = -np.polyfit(x[mask], np.log(w2h[mask]), 1)[0]
    kappa = math.sqrt(2.0 * res_p2.lam + res_p2.omega)
    forcing = (res_p2.p - 1.0) * math.sqrt(res_p2.omega)
    assert slope == pytest.approx(min(kappa, forcing), rel=0.1)


def test_integrability_margin_signs():
    assert integrability_margin(2.0, 0.8903960910) < 0.0
    assert integrability_margin(1.9, 0.8467769764) < 0.0
    # small p with lambda near the edge makes the integrand non-integrable
    assert integrability_margin(1.5, 0.99) > 0.0


def test_nonintegrable_raises(mode_p2, res_p2):
    fake = solve_mode(2.0)
    object.__setattr__(fake, "lam", 0.99999)
    with pytest.raises(NonIntegrable):
        gamma(fake, res_p2)


def test_embedded_too_close_to_edge_raises(mode_p2):
    fake = solve_mode(2.0)
    object.__setattr__(fake, "lam", 0.5001)
    with pytest.raises(EmbeddedTooCloseToEdge):
        resonance_function(fake, fake.xi1.grid)


def test_gamma_scan_records_failures_and_values():
    rows = gamma_scan([1.95, 2.0])
    assert all(r["error"] == "" for r in rows)
    assert rows[1]["gamma"] == pytest.approx(GAMMA_P2, rel=1e-6)
    assert rows[0]["gamma"] == pytest.approx(0.2234355002170393, rel=1e-6)
    assert not any(r["sign_change_next"] for r in rows)
