"""Ground-state family of the 1-D focusing pure-power NLS.

The equation is i u_t + u_xx = -|u|^{p-1} u with p in (1, 5).  The ground
state at frequency omega solves -phi'' + omega*phi - phi^p = 0 and is given
in closed form by a sech power; the whole family comes from phase, shift,
Galilei boost and the scaling phi_omega(x) = omega^{1/(p-1)} phi(sqrt(omega) x).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .grid import Field, Grid, derivative, inner, l2_norm, quadrature


@dataclass(frozen=True)
class SolitonParams:
    p: float
    omega: float = 1.0
    v: float = 0.0
    theta: float = 0.0
    D: float = 0.0

    def __post_init__(self) -> None:
        if not 1.0 < self.p < 5.0:
            raise ValueError("p must lie in (1, 5)")
        if self.omega <= 0:
            raise ValueError("omega must be positive")


@dataclass
class Soliton:
    params: SolitonParams
    profile: Field


def profile_values(p: float, omega: float, x: np.ndarray) -> np.ndarray:
    amp = omega ** (1.0 / (p - 1.0)) * ((p + 1.0) / 2.0) ** (1.0 / (p - 1.0))
    arg = np.abs(0.5 * (p - 1.0) * np.sqrt(omega) * np.asarray(x, dtype=float))
    sech = 2.0 * np.exp(-arg) / (1.0 + np.exp(-2.0 * arg))  # overflow-safe
    return amp * sech ** (2.0 / (p - 1.0))


def profile(p: float, omega: float, grid: Grid) -> Soliton:
    params = SolitonParams(p=p, omega=omega)
    return Soliton(params, Field(grid, profile_values(p, omega, grid.x)))


def static_residual(sol: Soliton, method: str = "fd4") -> float:
    """Sup-norm residual of -phi'' + omega*phi - phi^p on interior nodes."""
    p, omega = sol.params.p, sol.params.omega
    phi = sol.profile
    phixx = derivative(phi, 2, method).values
    res = -phixx + omega * phi.values - phi.values ** p
    return float(np.abs(res[4:-4]).max())


def invariants(u: Field, p: float) -> tuple[float, float, float]:
    """Energy, mass, momentum (E, Q, P) of a field."""
    ux = derivative(u, 1, "spectral").values
    E = 0.5 * float(np.real(quadrature(np.abs(ux) ** 2, u.grid))) \
        - float(np.real(quadrature(np.abs(u.values) ** (p + 1.0), u.grid))) / (p + 1.0)
    Q = 0.5 * l2_norm(u) ** 2
    P = -0.5 * inner(Field(u.grid, 1j * ux), u)
    return E, Q, P


def q_of_omega(p: float, omega: float, grid: Grid) -> float:
    """Mass of the ground state at frequency omega."""
    sol = profile(p, omega, grid)
    return 0.5 * l2_norm(sol.profile) ** 2


def lambda_p_operator(p: float, u: Field, method: str = "spectral") -> Field:
    """Scaling generator (1/2) x d/dx + 1/(p-1), the derivative in omega of
    omega^{1/(p-1)} u(sqrt(omega) x) at omega = 1."""
    ux = derivative(u, 1, method).values
    return Field(u.grid, 0.5 * u.grid.x * ux + u.values / (p - 1.0))


def translate(u: Field, D0: float) -> Field:
    """Continuous translation u(. - D0) by Fourier phase shift."""
    if abs(D0) > u.grid.L / 4.0:
        warnings.warn("translation exceeds L/4: wrap-around contamination")
    out = np.fft.ifft(np.fft.fft(u.values) * np.exp(-1j * u.grid.k * D0))
    if np.isrealobj(u.values) and abs(D0) < 1e-300:
        out = out.real
    return Field(u.grid, out)


def apply_symmetry(u: Field, theta0: float = 0.0, D0: float = 0.0,
                   v0: float = 0.0) -> Field:
    """e^{i theta0} e^{(i/2) v0 x} u(. - D0)."""
    shifted = translate(u, D0)
    phase = np.exp(1j * (theta0 + 0.5 * v0 * u.grid.x))
    return Field(u.grid, phase * shifted.values)


def derived_scalars(p: float, omega: float, grid: Grid,
                    h: float = 1e-4) -> dict:
    """e(omega), d(omega) = e + omega*q and the convexity d''(omega) > 0
    diagnostic, by centered finite differences in omega."""
    def ed(w: float) -> tuple[float, float]:
        sol = profile(p, w, grid)
        E, Q, _ = invariants(sol.profile, p)
        return E, E + w * Q

    e0, d0 = ed(omega)
    _, dp = ed(omega + h)
    _, dm = ed(omega - h)
    d2 = (dp - 2.0 * d0 + dm) / h ** 2
    return {"e": e0, "d": d0, "d_second": d2, "d_convex": bool(d2 > 0)}
