"""Uniform grid on [-L, L), sampled fields, differentiation and quadrature.

Conventions:
- nodes x_j = -L + j*dx, j = 0..N-1, dx = 2L/N; the set is symmetric under
  x -> -x except for the single endpoint x = -L (periodic convention).
- "rectangle" quadrature dx*sum is the default inner product; it is exact
  for constants and spectrally accurate for decaying/periodic integrands.
- fd4 differentiation uses 4th-order centered stencils with one-sided
  closure at the two nodes nearest each boundary.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
from scipy.integrate import cumulative_trapezoid, simpson


@dataclass(frozen=True)
class Grid:
    L: float
    N: int

    def __post_init__(self) -> None:
        if self.L <= 0:
            raise ValueError("grid half-width must be positive")
        if self.N < 16 or self.N % 2 != 0:
            raise ValueError("N must be even and at least 16")

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.N

    @cached_property
    def x(self) -> np.ndarray:
        return -self.L + self.dx * np.arange(self.N)

    @cached_property
    def k(self) -> np.ndarray:
        """Spectral wavenumbers matching numpy's FFT layout."""
        return 2.0 * np.pi * np.fft.fftfreq(self.N, d=self.dx)

    @property
    def center_index(self) -> int:
        return self.N // 2  # node at x = 0

    def __hash__(self) -> int:
        return hash((self.L, self.N))


@dataclass
class Field:
    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values)
        if self.values.shape != (self.grid.N,):
            raise ValueError("values length must equal grid N")

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy())

    def __add__(self, other: "Field") -> "Field":
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        return Field(self.grid, self.values - other.values)

    def __mul__(self, c) -> "Field":
        return Field(self.grid, self.values * c)

    __rmul__ = __mul__


def quadrature(values: np.ndarray, grid: Grid, rule: str = "rectangle") -> complex:
    """Integrate samples over [-L, L)."""
    if rule == "rectangle":
        return grid.dx * values.sum()
    if rule == "simpson":
        return simpson(values, dx=grid.dx)
    raise ValueError(f"unknown quadrature rule {rule!r}")


def inner(f: Field | np.ndarray, g: Field | np.ndarray, grid: Grid | None = None) -> float:
    """Real pairing <f, g> = Re int f conj(g) dx."""
    fv = f.values if isinstance(f, Field) else f
    gv = g.values if isinstance(g, Field) else g
    gr = grid or (f.grid if isinstance(f, Field) else g.grid)
    return float(np.real(quadrature(fv * np.conj(gv), gr)))


def l2_norm(f: Field | np.ndarray, grid: Grid | None = None) -> float:
    fv = f.values if isinstance(f, Field) else f
    gr = grid or f.grid
    return math.sqrt(float(np.real(quadrature(np.abs(fv) ** 2, gr))))


# ---------------------------------------------------------------------------
# differentiation


def _fornberg_weights(z: float, x: np.ndarray, m: int) -> np.ndarray:
    """Finite-difference weights for the m-th derivative at z on nodes x."""
    n = len(x)
    c = np.zeros((n, m + 1))
    c1 = 1.0
    c4 = x[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m]


@lru_cache(maxsize=None)
def fd4_stencils(order: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(centered, left-edge rows, right-edge rows) stencils on unit spacing.

    Centered stencil spans offsets -2..2; each edge needs `order` extra
    nodes to keep 4th-order accuracy one-sided.
    """
    nodes = np.arange(-2.0, 3.0)
    center = _fornberg_weights(0.0, nodes, order)
    width = 5 + order  # one-sided stencil width for 4th-order accuracy
    left = np.array([_fornberg_weights(float(i), np.arange(float(width)), order)
                     for i in range(2)])
    right = -left[:, ::-1] if order % 2 == 1 else left[:, ::-1]
    return center, left, right


def _fd4_apply(values: np.ndarray, grid: Grid, order: int) -> np.ndarray:
    center, left, right = fd4_stencils(order)
    out = np.convolve(values, center[::-1], mode="same")
    width = left.shape[1]
    for i in range(2):
        out[i] = left[i] @ values[:width]
        out[-1 - i] = right[i] @ values[-width:]
    return out / grid.dx ** order


def derivative(f: Field, order: int = 1, method: str = "spectral") -> Field:
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    if method == "spectral":
        fk = np.fft.fft(f.values)
        mult = (1j * f.grid.k) if order == 1 else -(f.grid.k ** 2)
        out = np.fft.ifft(mult * fk)
        if np.isrealobj(f.values):
            out = out.real
        return Field(f.grid, out)
    if method == "fd4":
        return Field(f.grid, _fd4_apply(f.values, f.grid, order))
    raise ValueError(f"unknown differentiation method {method!r}")


# ---------------------------------------------------------------------------
# parity


def reflect(values: np.ndarray) -> np.ndarray:
    """Samples of x -> f(-x) under the periodic node convention."""
    idx = (-np.arange(len(values))) % len(values)
    return values[idx]


def parity_even(f: Field) -> Field:
    return Field(f.grid, 0.5 * (f.values + reflect(f.values)))


def parity_odd(f: Field) -> Field:
    return Field(f.grid, 0.5 * (f.values - reflect(f.values)))


def odd_content(f: Field) -> float:
    """Relative L2 size of the odd-parity part."""
    n = l2_norm(f)
    if n == 0.0:
        return 0.0
    return l2_norm(parity_odd(f)) / n


# ---------------------------------------------------------------------------
# weighted norms


@dataclass(frozen=True)
class WeightedNormConfig:
    A: float = 1000.0
    kappa: float = 0.2
    omega0: float = 1.0
    a: float = 1.0
    s: float = 2.0

    def __post_init__(self) -> None:
        if not (self.A > 0 and 0 < self.kappa < 1 and self.omega0 > 0 and self.a > 0):
            raise ValueError("invalid weighted-norm configuration")


def weighted_norm(f: Field, kind: str, cfg: WeightedNormConfig) -> float:
    x = f.grid.x
    if kind == "SigmaA":
        w = 1.0 / np.cosh(2.0 * x / cfg.A)
        fp = derivative(f, 1, "spectral").values
        return (l2_norm(w * fp, f.grid)
                + l2_norm(w * f.values, f.grid) / cfg.A)
    if kind == "SigmaTilde":
        w = 1.0 / np.cosh(cfg.kappa * cfg.omega0 * x)
        return l2_norm(w * f.values, f.grid)
    if kind == "L2s":
        w = (1.0 + x ** 2) ** (cfg.s / 2.0)
        return l2_norm(w * f.values, f.grid)
    if kind == "ExpA":
        w = np.exp(-cfg.a * np.sqrt(1.0 + x ** 2))
        return l2_norm(w * f.values, f.grid)
    raise ValueError(f"unknown norm kind {kind!r}")


# ---------------------------------------------------------------------------
# cutoffs


def _smoothstep(s: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for s <= 0, 1 for s >= 1, monotone between."""
    def h(t):
        out = np.zeros_like(t)
        pos = t > 0
        out[pos] = np.exp(-1.0 / t[pos])
        return out

    s = np.asarray(s, dtype=float)
    num = h(s)
    return num / (num + h(1.0 - s))


def chi_values(x: np.ndarray) -> np.ndarray:
    """Even cutoff with 1_[-1,1] <= chi <= 1_[-2,2] and x*chi'(x) <= 0."""
    return _smoothstep(2.0 - np.abs(x))


def cutoff_chi(grid: Grid, C: float = 1.0) -> Field:
    if C <= 0:
        raise ValueError("cutoff scale must be positive")
    return Field(grid, chi_values(grid.x / C))


def zeta_phi(grid: Grid, A: float) -> tuple[Field, Field]:
    """Localized virial weight zeta_A and its odd antiderivative phi_A.

    zeta_A = exp(-(|x|/A)(1 - chi(x))); phi_A(x) = int_0^x zeta_A^2.
    """
    if A <= 0:
        raise ValueError("A must be positive")
    x = grid.x
    zeta = np.exp(-(np.abs(x) / A) * (1.0 - chi_values(x)))
    cum = cumulative_trapezoid(zeta ** 2, x, initial=0.0)
    phi = cum - cum[grid.center_index]
    return Field(grid, zeta), Field(grid, phi)


# ---------------------------------------------------------------------------
# serialization


FIELD_CSV_SCHEMA = "field/1"


def field_to_csv(f: Field, path: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema={FIELD_CSV_SCHEMA}\n")
        writer = csv.writer(fh)
        writer.writerow(["x", "re", "im"])
        for xj, vj in zip(f.grid.x, f.values):
            writer.writerow([repr(float(xj)), repr(float(np.real(vj))),
                             repr(float(np.imag(vj)))])


def field_from_csv(path: str) -> Field:
    xs, vs = [], []
    with open(path) as fh:
        first = fh.readline()
        if not first.startswith(f"# schema={FIELD_CSV_SCHEMA}"):
            from .errors import SchemaError
            raise SchemaError(f"{path}: missing schema header {FIELD_CSV_SCHEMA}")
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["x", "re", "im"]:
            from .errors import SchemaError
            raise SchemaError(f"{path}: bad header {header}")
        for row in reader:
            xs.append(float(row[0]))
            vs.append(float(row[1]) + 1j * float(row[2]))
    x = np.array(xs)
    n = len(x)
    grid = Grid(L=float(-x[0]), N=n)
    if not np.allclose(grid.x, x, atol=1e-10):
        from .errors import SchemaError
        raise SchemaError(f"{path}: nodes are not a uniform [-L, L) grid")
    return Field(grid, np.array(vs))


def field_to_json(f: Field) -> dict:
    return {
        "grid": {"L": f.grid.L, "N": f.grid.N},
        "values": [[float(np.real(v)), float(np.imag(v))] for v in f.values],
    }


def field_from_json(obj: dict) -> Field:
    grid = Grid(L=float(obj["grid"]["L"]), N=int(obj["grid"]["N"]))
    vals = np.array([re + 1j * im for re, im in obj["values"]])
    return Field(grid, vals)


def field_json_dump(f: Field, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(field_to_json(f), fh)
