"""Evans-function machinery for the even-sector eigenvalue problem.

The fourth-order system for (xi1, w = L+ xi1) at omega = 1 reads

    xi1'' = (1 - p phi^{p-1}) xi1 - w
    w''   = (1 - phi^{p-1}) w - lambda^2 xi1

In first-order form u = (xi1, xi1', w, w') the subspace of solutions
decaying at +infinity is two-dimensional; its wedge (2-form) is propagated
backwards from x = X with the induced 6x6 compound system, which avoids the
classical stiffness of tracking two solutions with different growth rates.
The Evans-type value at x = 0 is the pairing of that wedge with the even
(resp. odd) symmetry subspace.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import IntegrationFailure, NoModeFound
from .soliton import profile_values

_PAIRS = list(itertools.combinations(range(4), 2))
_PAIR_INDEX = {pr: i for i, pr in enumerate(_PAIRS)}

# wedge components read off at x = 0:
# even solutions live in span{e0, e2}  -> det involves Y_(1,3)
# odd solutions live in span{e1, e3}   -> det involves Y_(0,2)
EVEN_COMPONENT = _PAIR_INDEX[(1, 3)]
ODD_COMPONENT = _PAIR_INDEX[(0, 2)]


def _system_matrix(x: float, p: float, lam: float) -> np.ndarray:
    phi_pm1 = float(profile_values(p, 1.0, np.array([x]))[0]) ** (p - 1.0)
    q1 = 1.0 - p * phi_pm1
    q2 = 1.0 - phi_pm1
    return np.array([
        [0.0, 1.0, 0.0, 0.0],
        [q1, 0.0, -1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [-lam ** 2, 0.0, q2, 0.0],
    ])


def _compound(A: np.ndarray) -> np.ndarray:
    """Induced action of A on 2-forms: (u ^ v)' = Au ^ v + u ^ Av."""
    C = np.zeros((6, 6))
    for a, (i, j) in enumerate(_PAIRS):
        # first slot: u_i -> sum_k A_ki e_k
        for k in range(4):
            if k == j:
                continue
            pr = (k, j) if k < j else (j, k)
            sgn = 1.0 if k < j else -1.0
            C[_PAIR_INDEX[pr], a] += sgn * A[k, i]
        # second slot: v_j -> sum_k A_kj e_k
        for k in range(4):
            if k == i:
                continue
            pr = (i, k) if i < k else (k, i)
            sgn = 1.0 if i < k else -1.0
            C[_PAIR_INDEX[pr], a] += sgn * A[k, j]
    return C


def _wedge(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.array([u[i] * v[j] - u[j] * v[i] for i, j in _PAIRS])


def _propagate_wedge(p: float, lam: float, X: float, y0: np.ndarray,
                     comp_rate: float, rtol: float = 1e-10) -> np.ndarray:
    def rhs(x, y):
        C = _compound(_system_matrix(x, p, lam))
        return (C + comp_rate * np.eye(6)) @ y

    sol = solve_ivp(rhs, (X, 0.0), y0, method="DOP853",
                    rtol=rtol, atol=1e-13 * np.abs(y0).max())
    if not sol.success:
        raise IntegrationFailure(f"wedge propagation failed at p={p}, lam={lam}")
    return sol.y[:, -1]


def evans_gap(p: float, lam: float, X: float | None = None,
              rtol: float = 1e-10, parity: str = "even") -> float:
    """Evans value for a gap eigenvalue candidate lambda in (0,1)."""
    mu1 = math.sqrt(1.0 - lam)
    mu2 = math.sqrt(1.0 + lam)
    if X is None:
        # the initial wedge is the exact free-flow invariant subspace, so X
        # only needs the potential tail to be negligible
        X = max(40.0, 36.0 / (p - 1.0))
    # decaying asymptotic modes: (xi1, w) ~ (1, +-lam) e^{-mu x}
    s1 = np.array([1.0, -mu1, lam, -mu1 * lam])
    s2 = np.array([1.0, -mu2, -lam, mu2 * lam])
    y0 = _wedge(s1, s2)
    y0 /= np.linalg.norm(y0)
    y = _propagate_wedge(p, lam, X, y0, comp_rate=mu1 + mu2, rtol=rtol)
    comp = EVEN_COMPONENT if parity == "even" else ODD_COMPONENT
    return float(y[comp] / np.linalg.norm(y))


def shoot_lambda(p: float, lam_lo: float = 0.02, lam_hi: float = 0.998,
                 n_scan: int = 48, rtol: float = 1e-10,
                 parity: str = "even") -> float:
    """Smallest gap eigenvalue by sign change of the Evans value."""
    lams = np.linspace(lam_lo, lam_hi, n_scan)
    vals = [evans_gap(p, float(l), rtol=rtol, parity=parity) for l in lams]
    for i in range(n_scan - 1):
        if vals[i] == 0.0:
            return float(lams[i])
        if vals[i] * vals[i + 1] < 0.0:
            return float(brentq(
                lambda l: evans_gap(p, l, rtol=rtol, parity=parity),
                lams[i], lams[i + 1], xtol=1e-11, rtol=1e-13))
    raise NoModeFound(f"no Evans sign change for p={p} in ({lam_lo}, {lam_hi})")


def shoot_lambda_near_edge(p: float, rtol: float = 1e-10,
                           parity: str = "even",
                           u_lo: float = -1.5) -> float:
    """Gap eigenvalue exponentially close to the edge.

    Finite boxes cannot separate these modes from the continuum, so the
    sign change of the Evans value is tracked in u = log10(1 - lambda).
    """
    us = np.linspace(u_lo, -9.0, 16)
    vals = [evans_gap(p, 1.0 - 10.0 ** u, rtol=rtol, parity=parity)
            for u in us]
    for i in range(len(us) - 1):
        if vals[i] * vals[i + 1] < 0.0:
            u = brentq(lambda t: evans_gap(p, 1.0 - 10.0 ** t, rtol=rtol,
                                           parity=parity),
                       us[i], us[i + 1], xtol=1e-4)
            return float(1.0 - 10.0 ** u)
    raise NoModeFound(f"no near-edge Evans sign change for p={p}")


def odd_second_mode(p: float, rtol: float = 1e-10) -> float | None:
    """The odd-sector gap eigenvalue mu(p), or None if absent.

    A second discrete eigenvalue above lambda(p) exists for p below the
    threshold near 1.82; it is odd and approaches the edge as p increases,
    so the search covers both the bulk of the gap and a log-spaced
    near-edge window.
    """
    try:
        return shoot_lambda(p, 0.05, 0.9, n_scan=24, rtol=rtol, parity="odd")
    except NoModeFound:
        pass
    try:
        return shoot_lambda_near_edge(p, rtol=rtol, parity="odd", u_lo=-1.0)
    except NoModeFound:
        return None


def threshold_evans(p: float, X: float | None = None,
                    rtol: float = 1e-10) -> tuple[float, float]:
    """(even, odd) Evans-type matching values at the edge energy lambda = 1.

    At lambda = 1 the asymptotic rates are 0 (constant branch) and sqrt(2);
    the bounded-at-+infinity subspace is spanned by the constant mode and
    the decaying exponential.  A (near-)zero value signals a threshold
    resonance of that parity.
    """
    lam = 1.0
    mu2 = math.sqrt(2.0)
    if X is None:
        X = max(40.0, 60.0 / (p - 1.0) * 0.6)
    s1 = np.array([1.0, 0.0, 1.0, 0.0])          # constant branch
    s2 = np.array([1.0, -mu2, -1.0, mu2])        # e^{-sqrt(2) x} branch
    y0 = _wedge(s1, s2)
    y0 /= np.linalg.norm(y0)
    y = _propagate_wedge(p, lam, X, y0, comp_rate=mu2, rtol=rtol)
    nrm = np.linalg.norm(y)
    return float(y[EVEN_COMPONENT] / nrm), float(y[ODD_COMPONENT] / nrm)
