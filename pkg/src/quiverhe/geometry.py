"""Base-manifold fixtures.

The PDE-capable fixture is the round sphere with total volume V
(default 1), i.e. the Fubini-Study metric on the projective line scaled
so that integral dVol = V.  In the affine chart z = tan(theta/2) e^{i phi}
the background objects are:

* volume form: V/(2 pi) * (1+|z|^2)^{-2} * i dz wedge dzbar, so the
  Laplacian (nonnegative-spectrum convention) has eigenvalues
  l(l+1) * 4 pi / V;
* constant-curvature metric on O(m): sqrt(-1) Lambda F = 2 pi m / V,
  so degree-by-quadrature is exact;
* section density |p|^2 (1+|z|^2)^{-deg}, evaluated in homogeneous form
  so the chart's pole needs no special casing.

The Hopf fixture carries no grid: only the analytic degree table for the
line bundles L+(m), L-(m); stability and chamber analysis work there but
the PDE solver refuses it.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

from .errors import DegreeMismatchError, TooCoarseError
from .sht import SphericalHarmonicTransform

GridField = np.ndarray

MIN_RESOLUTION = 8


@dataclass(frozen=True)
class SphereGrid:
    """Gauss-Legendre colatitudes x equispaced longitudes, volume V."""

    n_theta: int
    n_phi: int
    total_volume: float

    @cached_property
    def sht(self) -> SphericalHarmonicTransform:
        return SphericalHarmonicTransform(self.n_theta, self.n_phi)

    @cached_property
    def theta(self) -> np.ndarray:
        return self.sht.theta

    @cached_property
    def phi(self) -> np.ndarray:
        return self.sht.phi

    @cached_property
    def node_weights(self) -> np.ndarray:
        """Per-node area weights, shape (n_theta, 1); they broadcast over
        longitude and sum to total_volume."""
        w = self.total_volume * self.sht.gl_weights / (2.0 * self.n_phi)
        return w[:, None]

    @cached_property
    def sin_half(self) -> np.ndarray:
        return np.sin(self.theta / 2.0)[:, None]

    @cached_property
    def cos_half(self) -> np.ndarray:
        return np.cos(self.theta / 2.0)[:, None]

    @cached_property
    def phase(self) -> np.ndarray:
        """exp(i phi), shape (1, n_phi)."""
        return np.exp(1j * self.phi)[None, :]

    def constant_field(self, value: float) -> GridField:
        return np.full((self.n_theta, self.n_phi), float(value))


def make_sphere_grid(n_theta: int, n_phi: int, total_volume=1.0) -> SphereGrid:
    if n_theta < MIN_RESOLUTION or n_phi < MIN_RESOLUTION:
        raise TooCoarseError(
            f"grid {n_theta}x{n_phi} below minimum {MIN_RESOLUTION}x{MIN_RESOLUTION}"
        )
    volume = float(Fraction(total_volume)) if not isinstance(total_volume, float) \
        else total_volume
    if volume <= 0:
        raise TooCoarseError("total_volume must be positive")
    return SphereGrid(n_theta=int(n_theta), n_phi=int(n_phi), total_volume=volume)


def quadrature(grid: SphereGrid, f: GridField) -> float:
    """integral f dVol as the weighted node sum."""
    return float(np.sum(grid.node_weights * f))


def laplacian_apply(grid: SphereGrid, u: GridField) -> GridField:
    """Spectral Laplacian with nonnegative spectrum: constants map to zero
    and the output integrates to zero."""
    scale = 4.0 * np.pi / grid.total_volume
    return grid.sht.apply_l_multiplier(u, lambda ell: ell * (ell + 1.0) * scale)


def homogeneous_section(grid: SphereGrid, coeffs, d: int) -> np.ndarray:
    """p(z) * (1+|z|^2)^{-d/2} as a complex field: the homogeneous form
    sum_k c_k sin(theta/2)^k cos(theta/2)^{d-k} e^{i k phi}, bounded on the
    whole sphere."""
    coeffs = tuple(complex(c) for c in coeffs)
    while coeffs and coeffs[-1] == 0:
        coeffs = coeffs[:-1]
    if len(coeffs) - 1 > d:
        raise DegreeMismatchError(
            f"polynomial degree {len(coeffs) - 1} exceeds bundle degree {d}"
        )
    s, c = grid.sin_half, grid.cos_half
    out = np.zeros((grid.n_theta, grid.n_phi), dtype=complex)
    for k, ck in enumerate(coeffs):
        if ck != 0:
            out += ck * s**k * c ** (d - k) * grid.phase**k
    return out


def section_density(grid: SphereGrid, arrow_poly, d: int) -> GridField:
    """|p(z)|^2 / (1+|z|^2)^d on the grid."""
    coeffs = arrow_poly.coeffs if hasattr(arrow_poly, "coeffs") else arrow_poly
    return np.abs(homogeneous_section(grid, coeffs, d)) ** 2


def background_curvature(grid: SphereGrid, m: int) -> GridField:
    """sqrt(-1) Lambda F of the constant-curvature metric on O(m):
    the constant 2 pi m / V, so quadrature / (2 pi) recovers m."""
    return grid.constant_field(2.0 * np.pi * m / grid.total_volume)


LPLUS = "Lplus"
LMINUS = "Lminus"
PLUS = "plus"
MINUS = "minus"

_HOPF_SIGNS = {
    (LPLUS, PLUS): 1,
    (LPLUS, MINUS): -1,
    (LMINUS, PLUS): -1,
    (LMINUS, MINUS): 1,
}


def hopf_degree(line_type: str, m: int, side: str) -> int:
    """Analytic degree table for the Hopf-surface line bundles."""
    try:
        return _HOPF_SIGNS[(line_type, side)] * int(m)
    except KeyError:
        raise ValueError(f"unknown Hopf line type/side ({line_type!r}, {side!r})") from None


def dump_field_csv(path, grid: SphereGrid, field: GridField) -> None:
    """Write a field as rows (theta, phi, value) for external plotting."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["theta", "phi", "value"])
        for i in range(grid.n_theta):
            for j in range(grid.n_phi):
                writer.writerow([repr(grid.theta[i]), repr(grid.phi[j]),
                                 repr(float(field[i, j]))])
