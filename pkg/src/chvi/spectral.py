"""Operator calculus for the Dirichlet Laplacian on the unit interval/square.

Fields are stored by their coefficients in the Dirichlet sine eigenbasis,
normalized to unit L^2 norm: sqrt(2) sin(k pi x) on (0,1) and the tensor
products on (0,1)^2.  In that basis the Laplacian A, all its fractional
powers A^s, and the H / V / V' / D(A) norms are diagonal:

    ||u||_H^2  = sum c_k^2            ||u||_V^2   = sum mu_k   c_k^2
    ||u||_V'^2 = sum c_k^2 / mu_k     ||u||_DA^2  = sum mu_k^2 c_k^2

with mu_k = (k pi)^2 in 1-D and (k^2 + l^2) pi^2 in 2-D.  Transforms between
eigen-coefficients and values on the uniform interior collocation grid are
DST-I pairs, exact up to roundoff; the discrete trapezoid L^2 norm on the
collocation grid coincides with the H norm (discrete Parseval identity).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft


@dataclass(frozen=True)
class Grid:
    """Interior collocation/eigenmode layout on the unit box."""

    dim: int
    n: int  # interior modes (and collocation points) per axis

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if not (isinstance(self.n, int) and self.n >= 4):
            raise ValueError(f"n must be an integer >= 4, got {self.n!r}")

    @property
    def h(self) -> float:
        return 1.0 / (self.n + 1)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def size(self) -> int:
        return self.n**self.dim

    def points(self) -> np.ndarray:
        """Interior collocation coordinates along one axis."""
        return np.arange(1, self.n + 1) * self.h


_EIG_CACHE: dict[tuple[int, int], np.ndarray] = {}


def eigenvalues(grid: Grid) -> np.ndarray:
    """Dirichlet spectrum of -Laplace on the unit box, shaped like coeffs."""
    key = (grid.dim, grid.n)
    mu = _EIG_CACHE.get(key)
    if mu is None:
        k = np.arange(1, grid.n + 1, dtype=float)
        if grid.dim == 1:
            mu = (k * math.pi) ** 2
        else:
            mu = (k[:, None] ** 2 + k[None, :] ** 2) * math.pi**2
        mu.setflags(write=False)
        _EIG_CACHE[key] = mu
    return mu


@dataclass
class SpectralField:
    """A field on the unit box given by sine-eigenbasis coefficients."""

    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != self.grid.shape:
            raise ValueError(
                f"coefficient shape {self.coeffs.shape} does not match "
                f"grid shape {self.grid.shape}"
            )

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs.copy())


def zero_field(grid: Grid) -> SpectralField:
    return SpectralField(grid, np.zeros(grid.shape))


def to_spectral(values: np.ndarray, grid: Grid) -> SpectralField:
    """Analyse interior collocation values into eigenbasis coefficients."""
    v = np.asarray(values, dtype=float)
    if v.shape != grid.shape:
        raise ValueError(
            f"value shape {v.shape} does not match grid shape {grid.shape}"
        )
    scale = (math.sqrt(2.0) * (grid.n + 1)) ** grid.dim
    return SpectralField(grid, scipy.fft.dstn(v, type=1) / scale)


def to_values(u: SpectralField) -> np.ndarray:
    """Synthesize interior collocation values from coefficients."""
    return scipy.fft.dstn(u.coeffs, type=1) / math.sqrt(2.0) ** u.grid.dim


def apply_power(u: SpectralField, s: float) -> SpectralField:
    """Apply the fractional power A^s (diagonal in the eigenbasis)."""
    if s == 0.0:
        return u.copy()
    return SpectralField(u.grid, eigenvalues(u.grid) ** s * u.coeffs)


@dataclass(frozen=True)
class FieldNorms:
    H: float
    V: float
    Vprime: float
    DA: float


def norms(u: SpectralField) -> FieldNorms:
    """All four weighted-l2 norms of the operator scale."""
    c2 = u.coeffs**2
    mu = eigenvalues(u.grid)
    return FieldNorms(
        H=math.sqrt(float(np.sum(c2))),
        V=math.sqrt(float(np.sum(mu * c2))),
        Vprime=math.sqrt(float(np.sum(c2 / mu))),
        DA=math.sqrt(float(np.sum(mu**2 * c2))),
    )


def _check_same_grid(u: SpectralField, v: SpectralField):
    if u.grid != v.grid:
        raise ValueError(f"grid mismatch: {u.grid} vs {v.grid}")


def inner_H(u: SpectralField, v: SpectralField) -> float:
    _check_same_grid(u, v)
    return float(np.sum(u.coeffs * v.coeffs))


def inner_Vprime(u: SpectralField, v: SpectralField) -> float:
    """The A^{-1}-weighted scalar product that makes V' a Hilbert space."""
    _check_same_grid(u, v)
    return float(np.sum(u.coeffs * v.coeffs / eigenvalues(u.grid)))


def norm_H(u: SpectralField) -> float:
    return math.sqrt(float(np.sum(u.coeffs**2)))


def norm_V(u: SpectralField) -> float:
    return math.sqrt(float(np.sum(eigenvalues(u.grid) * u.coeffs**2)))


def norm_Vprime(u: SpectralField) -> float:
    return math.sqrt(float(np.sum(u.coeffs**2 / eigenvalues(u.grid))))


def norm_DA(u: SpectralField) -> float:
    return math.sqrt(float(np.sum(eigenvalues(u.grid) ** 2 * u.coeffs**2)))


def boundary_weight(grid: Grid) -> float:
    """Total trapezoid weight carried by the (homogeneous) boundary nodes."""
    if grid.dim == 1:
        return 1.0  # two endpoints at weight 1/2
    return 2.0 * grid.n + 1.0  # 4 corners at 1/4 plus 4n edge nodes at 1/2


def trapezoid_integral(interior_values: np.ndarray, grid: Grid, boundary: float = 0.0) -> float:
    """Trapezoid quadrature over the unit box from interior samples.

    boundary is the integrand value on the whole boundary (fields are zero
    there, so integrands of the form g(u) contribute g(0)).
    """
    v = np.asarray(interior_values, dtype=float)
    if v.shape != grid.shape:
        raise ValueError(
            f"value shape {v.shape} does not match grid shape {grid.shape}"
        )
    return grid.h**grid.dim * (float(np.sum(v)) + boundary * boundary_weight(grid))


def dealias_grid(grid: Grid) -> Grid:
    """Refined grid for 3/2-rule evaluation of non-polynomial nonlinearities."""
    m = math.ceil(3 * (grid.n + 1) / 2) - 1
    return Grid(grid.dim, m)


def pad_coeffs(u: SpectralField, fine: Grid) -> SpectralField:
    """Embed coefficients into a finer mode set (zero padding)."""
    if fine.n < u.grid.n or fine.dim != u.grid.dim:
        raise ValueError("target grid must refine the source grid")
    c = np.zeros(fine.shape)
    if u.grid.dim == 1:
        c[: u.grid.n] = u.coeffs
    else:
        c[: u.grid.n, : u.grid.n] = u.coeffs
    return SpectralField(fine, c)


def truncate_coeffs(u: SpectralField, coarse: Grid) -> SpectralField:
    """Project onto a coarser mode set (drop the high modes)."""
    if coarse.n > u.grid.n or coarse.dim != u.grid.dim:
        raise ValueError("target grid must coarsen the source grid")
    if u.grid.dim == 1:
        return SpectralField(coarse, u.coeffs[: coarse.n].copy())
    return SpectralField(coarse, u.coeffs[: coarse.n, : coarse.n].copy())


_SINE_MATRIX_CACHE: dict[tuple[int, int], np.ndarray] = {}


def sine_matrix(grid: Grid) -> np.ndarray:
    """Dense synthesis matrix S with values = S @ coeffs (flattened, C order).

    S columns are the unit-H-norm eigenfunctions sampled on the collocation
    grid; S^T S = (n+1)^dim I, which is what makes the transforms above an
    exact inverse pair.
    """
    key = (grid.dim, grid.n)
    S = _SINE_MATRIX_CACHE.get(key)
    if S is None:
        i = np.arange(1, grid.n + 1)
        S1 = math.sqrt(2.0) * np.sin(math.pi * np.outer(i, i) / (grid.n + 1))
        S = S1 if grid.dim == 1 else np.kron(S1, S1)
        S.setflags(write=False)
        _SINE_MATRIX_CACHE[key] = S
    return S
