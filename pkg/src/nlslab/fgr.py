"""Radiation at the doubled internal-mode frequency and its damping constant.

When 2*lambda lies inside the essential spectrum (omega, infinity) the
linearization has a bounded generalized eigenfunction g at 2i*lambda.  In
the symmetrized variables w1 = (g1 + h)/2, w2 = (g1 - h)/2 (with g2 = i*h)
the coupled system

    L+ g1 = 2 lambda h,   L- h = 2 lambda g1

decouples at infinity: w1 oscillates with wavenumber k = sqrt(2 lambda -
omega) while w2 decays at rate kappa = sqrt(2 lambda + omega).  We solve
the even boundary-value problem on [0, x_m] with fd4 rows, far-field
closure rows that kill the growing part of w2 and let w1 oscillate freely,
and the normalization w1 ~ cos(kx + delta) with amplitude one.

gamma couples the mode's quadratic form to g:

    gamma = int phi^{p-2} [ (p xi1^2 - y^2) g1 + 2 xi1 y h ] dx

whose integrand decays like e^{(2 - p - 2 sqrt(1-lambda)) |x|}; the sign of
that exponent is the integrability margin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import EmbeddedTooCloseToEdge, MatchingFailure, NonIntegrable
from .grid import Field, Grid, derivative, fd4_stencils, quadrature
from .linearization import InternalMode
from .soliton import profile_values

EDGE_TOL = 1e-3          # minimal distance of 2*lambda above the edge
MARGIN_TOL = 0.02        # integrability margin must be below -MARGIN_TOL
COND_LIMIT = 1e12


@dataclass
class ResonanceData:
    p: float
    omega: float
    lam: float
    k: float             # asymptotic wavenumber sqrt(2 lambda - omega)
    g1: Field            # real even first component
    g2_im: Field         # h = Im g2 (g2 = i h), real even
    normalization: dict  # asymptotic amplitude/phase record
    cond: float
    residual: float
    gamma: float | None = None

    @property
    def w1(self) -> np.ndarray:
        return 0.5 * (self.g1.values + self.g2_im.values)

    @property
    def w2(self) -> np.ndarray:
        return 0.5 * (self.g1.values - self.g2_im.values)


def _halfline_bvp(p: float, omega: float, lam: float, dx: float,
                  J: int) -> tuple[np.ndarray, np.ndarray, float]:
    """Solve the even (w1, w2) system on nodes x_j = j*dx, j = 0..J.

    Returns (w1, w2, condition estimate).  Rows: fd4 interior equations at
    j = 0..J-2 (even ghost reflection across x = 0), one oscillatory
    recurrence closing w1, two decaying recurrences closing w2, and the
    normalization row w1(0) = 1.
    """
    k = math.sqrt(2.0 * lam - omega)
    kappa = math.sqrt(2.0 * lam + omega)
    x = dx * np.arange(J + 1)
    pot = profile_values(p, omega, x) ** (p - 1.0)
    c_diag = 0.5 * (p + 1.0) * pot
    c_off = 0.5 * (p - 1.0) * pot

    center, _, _ = fd4_stencils(2)  # 5-point second-derivative stencil
    n = J + 1
    A = sp.lil_matrix((2 * n, 2 * n))
    rhs = np.zeros(2 * n)

    def lap_row(row: int, base: int, j: int) -> None:
        # -w'' with even reflection w(-j) = w(j)
        for off, c in zip(range(-2, 3), center):
            A[row, base + abs(j + off)] += -c / dx ** 2

    for j in range(J - 1):
        r1, r2 = 2 * j, 2 * j + 1
        lap_row(r1, 0, j)
        A[r1, j] += omega - 2.0 * lam - c_diag[j]
        A[r1, n + j] += -c_off[j]
        lap_row(r2, n, j)
        A[r2, n + j] += omega + 2.0 * lam - c_diag[j]
        A[r2, j] += -c_off[j]

    r = 2 * (J - 1)
    A[r, 0] = 1.0                       # normalization w1(0) = 1
    rhs[r] = 1.0
    A[r + 1, J] = 1.0                   # free oscillation of w1 at the end
    A[r + 1, J - 1] = -2.0 * math.cos(k * dx)
    A[r + 1, J - 2] = 1.0
    A[r + 2, n + J - 1] = 1.0           # pure decay of w2 at the end
    A[r + 2, n + J - 2] = -math.exp(-kappa * dx)
    A[r + 3, n + J] = 1.0
    A[r + 3, n + J - 1] = -math.exp(-kappa * dx)

    A = A.tocsc()
    try:
        lu = spla.splu(A)
    except RuntimeError as exc:
        raise MatchingFailure(f"singular resonance system at p={p}: {exc}")
    sol = lu.solve(rhs)
    inv_norm = spla.onenormest(
        spla.LinearOperator(A.shape, matvec=lu.solve,
                            rmatvec=lambda b: lu.solve(b, trans="T")))
    cond = float(spla.onenormest(A) * inv_norm)
    if not np.all(np.isfinite(sol)) or cond > COND_LIMIT:
        raise MatchingFailure(
            f"ill-conditioned growing-mode extraction at p={p}, cond={cond:.2e}")
    return sol[:n], sol[n:], cond


def _fit_oscillation(x: np.ndarray, w: np.ndarray, k: float,
                     lo: float, hi: float) -> tuple[float, float]:
    """Least-squares amplitude and phase of w ~ a cos(kx + delta) on [lo, hi]."""
    mask = (x >= lo) & (x <= hi)
    B = np.column_stack([np.cos(k * x[mask]), np.sin(k * x[mask])])
    (ac, bs), *_ = np.linalg.lstsq(B, w[mask], rcond=None)
    a = math.hypot(ac, bs)
    if a < 1e-8:
        raise MatchingFailure("vanishing oscillatory amplitude in the fit window")
    return a, math.atan2(-bs, ac)


def resonance_function(mode: InternalMode, grid: Grid,
                       x_m_frac: float = 0.75) -> ResonanceData:
    p, omega, lam = mode.p, mode.omega, mode.lam
    if 2.0 * lam - omega < EDGE_TOL * omega:
        raise EmbeddedTooCloseToEdge(
            f"2*lambda = {2 * lam} too close to the edge omega = {omega}")
    k = math.sqrt(2.0 * lam - omega)
    kappa = math.sqrt(2.0 * lam + omega)
    dx = grid.dx
    half = grid.N // 2                    # half-grid nodes 0..half
    J = min(int(round(x_m_frac * grid.L / dx)), half)
    if J < 12:
        raise ValueError("matching point too close to the origin")
    w1, w2, cond = _halfline_bvp(p, omega, lam, dx, J)
    xh = dx * np.arange(half + 1)

    a, delta = _fit_oscillation(xh[:J + 1], w1, k, 0.5 * grid.L,
                                min(x_m_frac, 0.9) * grid.L)
    w1 = w1 / a
    w2 = w2 / a
    # analytic continuation past the matching point
    w1_full = np.empty(half + 1)
    w2_full = np.empty(half + 1)
    w1_full[:J + 1] = w1
    w2_full[:J + 1] = w2
    w1_full[J + 1:] = np.cos(k * xh[J + 1:] + delta)
    w2_full[J + 1:] = w2[J] * np.exp(-kappa * (xh[J + 1:] - xh[J]))

    # even reflection onto the full grid (node j sits at |j - N/2|*dx)
    idx = np.abs(np.arange(grid.N) - half)
    g1 = Field(grid, (w1_full + w2_full)[idx])
    h = Field(grid, (w1_full - w2_full)[idx])

    # residual of L- h = 2 lambda g1, L+ g1 = 2 lambda h on |x| <= L/2,
    # fd4 applied (local, so the |x| = L corner of the reflected field and
    # the closure rows do not contaminate the restricted window)
    pot = profile_values(p, omega, grid.x) ** (p - 1.0)
    r1 = (-derivative(h, 2, "fd4").values + (omega - pot) * h.values
          - 2.0 * lam * g1.values)
    r2 = (-derivative(g1, 2, "fd4").values + (omega - p * pot) * g1.values
          - 2.0 * lam * h.values)
    mask = np.abs(grid.x) <= 0.5 * grid.L
    num = math.sqrt(float(np.sum(r1[mask] ** 2 + r2[mask] ** 2)))
    den = math.sqrt(float(np.sum(g1.values[mask] ** 2 + h.values[mask] ** 2)))
    res = num / den

    norm_record = {"amplitude": 1.0, "phase": delta, "raw_amplitude": a,
                   "x_m": J * dx, "x_m_frac": x_m_frac}
    return ResonanceData(p=p, omega=omega, lam=lam, k=k, g1=g1, g2_im=h,
                         normalization=norm_record, cond=cond, residual=res)


def integrability_margin(p: float, lam: float) -> float:
    """Decay exponent 2 - p - 2 sqrt(1 - lambda) of the gamma integrand;
    must be negative for the integral to converge."""
    return 2.0 - p - 2.0 * math.sqrt(max(1.0 - lam, 0.0))


def gamma_integrand(mode: InternalMode, res: ResonanceData) -> np.ndarray:
    phi = profile_values(mode.p, mode.omega, mode.xi1.grid.x)
    xi1 = mode.xi1.values
    y = mode.xi2_im.values
    return phi ** (mode.p - 2.0) * (
        (mode.p * xi1 ** 2 - y ** 2) * res.g1.values
        + 2.0 * xi1 * y * res.g2_im.values)


def hessian_form_integrand(mode: InternalMode, res: ResonanceData,
                           n_theta: int = 8) -> np.ndarray:
    """Average over arg z of the quadratic-form pairing

        (1/2) < D^2 f(phi) (2 Re(z) xi1 - 2 Im(z) y)^2_C , z^2 g + conj >

    on |z| = 1, which isolates the |z|^4 coefficient; equals (p-1) times
    gamma_integrand pointwise.
    """
    p = mode.p
    phi = profile_values(p, mode.omega, mode.xi1.grid.x)
    xi1, y = mode.xi1.values, mode.xi2_im.values
    g1, h = res.g1.values, res.g2_im.values
    acc = np.zeros_like(xi1)
    for t in np.arange(n_theta) * (2.0 * np.pi / n_theta):
        a = 2.0 * math.cos(t) * xi1          # real part of phi-tilde[z]
        b = -2.0 * math.sin(t) * y           # imaginary part
        pair1 = 2.0 * math.cos(2.0 * t) * g1  # z^2 g1 + conj (g1 real)
        pair2 = -2.0 * math.sin(2.0 * t) * h  # z^2 g2 + conj (g2 = i h)
        acc += 0.5 * (p - 1.0) * phi ** (p - 2.0) * (
            (p * a ** 2 + b ** 2) * pair1 + 2.0 * a * b * pair2)
    return acc / n_theta


def gamma(mode: InternalMode, res: ResonanceData,
          tail_frac: float = 0.9) -> float:
    """Quadrature of the damping-constant integrand, truncated at
    |x| = tail_frac * L with analytic extrapolation of the oscillatory
    exponential tail."""
    margin = integrability_margin(mode.p, mode.lam)
    if margin >= -MARGIN_TOL:
        raise NonIntegrable(
            f"gamma integrand margin {margin:.4f} >= -{MARGIN_TOL} at p={mode.p}")
    grid = mode.xi1.grid
    integ = gamma_integrand(mode, res)
    X = tail_frac * grid.L
    mask = np.abs(grid.x) <= X
    core = float(np.real(quadrature(np.where(mask, integ, 0.0), grid)))

    # tail ~ Re[G e^{(margin + i k) x}]: fit on [0.7 L, X] and integrate
    c = -margin
    k = res.k
    x = grid.x
    fit_mask = (x >= 0.7 * grid.L) & (x <= X)
    xf = x[fit_mask]
    B = np.column_stack([np.exp(-c * (xf - X)) * np.cos(k * xf),
                         np.exp(-c * (xf - X)) * np.sin(k * xf)])
    (ca, cb), *_ = np.linalg.lstsq(B, integ[fit_mask], rcond=None)
    # int_X^inf e^{-c(x-X)} {cos,sin}(kx) dx, closed form
    denom = c ** 2 + k ** 2
    int_cos = (c * math.cos(k * X) - k * math.sin(k * X)) / denom
    int_sin = (c * math.sin(k * X) + k * math.cos(k * X)) / denom
    tail = ca * int_cos + cb * int_sin
    return core + 2.0 * tail              # even integrand: both tails


def solve_gamma(mode: InternalMode, x_m_frac: float = 0.75) -> ResonanceData:
    """Resonance function plus gamma in one call."""
    res = resonance_function(mode, mode.xi1.grid, x_m_frac=x_m_frac)
    res.gamma = gamma(mode, res)
    return res


def gamma_scan(p_values, solve_mode_fn=None) -> list[dict]:
    """Per-p rows (p, lambda, k, gamma, margin, cond); failures recorded."""
    from .linearization import solve_mode
    solve_mode_fn = solve_mode_fn or solve_mode
    rows = []
    for p in p_values:
        row = {"p": float(p), "lambda": math.nan, "k": math.nan,
               "gamma": math.nan, "margin": math.nan, "cond": math.nan,
               "error": ""}
        try:
            mode = solve_mode_fn(float(p))
            res = solve_gamma(mode)
            row["lambda"] = mode.lam
            row["k"] = res.k
            row["gamma"] = res.gamma
            row["margin"] = integrability_margin(mode.p, mode.lam)
            row["cond"] = res.cond
        except Exception as exc:   # per-p failures must not stop the scan
            row["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    # flag sign changes (candidate zeros of gamma)
    gs = [r["gamma"] for r in rows]
    for i in range(len(rows) - 1):
        flip = (math.isfinite(gs[i]) and math.isfinite(gs[i + 1])
                and gs[i] * gs[i + 1] < 0.0)
        rows[i]["sign_change_next"] = bool(flip)
    if rows:
        rows[-1]["sign_change_next"] = False
    return rows
