"""Uniform box grids, nodal fields, and finite-difference operators.

The whole package works on axis-aligned boxes in one or two dimensions,
discretized by uniform node grids that include the boundary.  A field is a
nodal array on such a grid; "Dirichlet-zero" means exact zeros on every
boundary node.

Two operators matter:

* ``gradient`` -- second-order nodal gradient: central differences at interior
  nodes, one-sided three-point stencils on the boundary (exact for
  quadratics).
* ``p_laplacian_apply`` -- the conservative discrete p-Laplacian.  Fluxes

      F = (|Du|^2 + delta^2)^((p-2)/2) * Du

  are formed at cell-face midpoints and differenced back onto interior nodes;
  in 2d the transverse derivative at a face midpoint is averaged from the four
  adjacent nodal differences.  Output is zero on boundary nodes.

The regularization is ``delta = 1e-8 * s`` where ``s`` is the largest midpoint
gradient magnitude of the field itself.  Tying delta to the field's own scale
keeps the regularized operator exactly (p-1)-homogeneous: scaling the field by
``t`` scales the output by ``t^(p-1)`` with no delta artifact, which the
solver's scaling law relies on.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, GridMismatchError

# Relative size of the gradient regularization in the p-Laplacian flux.
DELTA_RELATIVE = 1.0e-8


@dataclass(frozen=True)
class Grid:
    """Uniform node grid on an axis-aligned box (1d or 2d).

    Attributes:
        extents: per-axis (lo, hi) bounds.
        shape: per-axis node counts, boundary nodes included.
    """

    extents: tuple[tuple[float, float], ...]
    shape: tuple[int, ...]

    def __post_init__(self):
        if not 1 <= len(self.extents) <= 2:
            raise ConfigurationError(
                f"only 1d and 2d boxes are supported, got {len(self.extents)} axes")
        if len(self.shape) != len(self.extents):
            raise ConfigurationError("extents and shape must have the same length")
        for (lo, hi), n in zip(self.extents, self.shape):
            if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
                raise ConfigurationError(f"degenerate axis extent ({lo}, {hi})")
            if n < 3:
                raise ConfigurationError(
                    f"need at least 3 nodes per axis (one interior), got {n}")

    @property
    def dimension(self) -> int:
        return len(self.extents)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((hi - lo) / (n - 1)
                     for (lo, hi), n in zip(self.extents, self.shape))

    def axis(self, k: int) -> np.ndarray:
        """Node coordinates along axis ``k``."""
        lo, hi = self.extents[k]
        return np.linspace(lo, hi, self.shape[k])

    def meshes(self) -> tuple[np.ndarray, ...]:
        """Coordinate arrays of full grid shape, one per axis ('ij' indexing)."""
        return tuple(np.meshgrid(*(self.axis(k) for k in range(self.dimension)),
                                 indexing="ij"))

    @property
    def interior(self) -> tuple[slice, ...]:
        """Slice tuple selecting the interior nodes."""
        return (slice(1, -1),) * self.dimension

    def boundary_mask(self) -> np.ndarray:
        """Boolean array, True exactly on boundary nodes."""
        mask = np.ones(self.shape, dtype=bool)
        mask[self.interior] = False
        return mask

    def node_count(self) -> int:
        return int(np.prod(self.shape))


def build_grid(extents, resolution) -> Grid:
    """Construct a :class:`Grid`, normalizing the argument types.

    ``extents`` is a (lo, hi) pair or a sequence of them; ``resolution`` is a
    node count or a matching sequence of counts.
    """
    ext = tuple(extents)
    if ext and np.isscalar(ext[0]):
        ext = (tuple(ext),)
    ext = tuple((float(lo), float(hi)) for lo, hi in ext)
    if np.isscalar(resolution):
        res = (int(resolution),) * len(ext)
    else:
        res = tuple(int(n) for n in resolution)
    return Grid(ext, res)


@dataclass(frozen=True)
class ScalarField:
    """Nodal scalar values on a grid.  The value array is read-only."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            raise ConfigurationError(
                f"field shape {vals.shape} does not match grid shape {self.grid.shape}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def with_values(self, values) -> "ScalarField":
        """Same grid, new values."""
        return ScalarField(self.grid, values)


@dataclass(frozen=True)
class VectorField:
    """Nodal vector values on a grid: components stacked on a leading axis."""

    grid: Grid
    components: np.ndarray

    def __post_init__(self):
        comps = np.array(self.components, dtype=float)
        expected = (self.grid.dimension,) + self.grid.shape
        if comps.shape != expected:
            raise ConfigurationError(
                f"component shape {comps.shape} does not match {expected}")
        comps.setflags(write=False)
        object.__setattr__(self, "components", comps)

    def magnitude(self) -> ScalarField:
        """Pointwise euclidean length as a scalar field."""
        return ScalarField(self.grid, np.sqrt(np.sum(self.components ** 2, axis=0)))


def zero_field(grid: Grid) -> ScalarField:
    return ScalarField(grid, np.zeros(grid.shape))


def field_from_function(grid: Grid, fn) -> ScalarField:
    """Sample ``fn(*coordinate_arrays)`` onto the grid nodes."""
    return ScalarField(grid, np.asarray(fn(*grid.meshes()), dtype=float))


def require_same_grid(*fields):
    """Raise :class:`GridMismatchError` unless all fields share one grid."""
    first = fields[0].grid
    for f in fields[1:]:
        if f.grid != first:
            raise GridMismatchError(
                f"fields on different grids: {first.shape} vs {f.grid.shape}")
    return first


def is_dirichlet_zero(u: ScalarField, tol: float = 0.0) -> bool:
    """True if the field is (within ``tol``) zero on every boundary node."""
    return bool(np.all(np.abs(u.values[u.grid.boundary_mask()]) <= tol))


def sup_norm(field) -> float:
    """Sup norm of a field: max |value|, euclidean length for vector fields."""
    if isinstance(field, VectorField):
        return float(np.max(np.sqrt(np.sum(field.components ** 2, axis=0))))
    return float(np.max(np.abs(field.values)))


def gradient(u: ScalarField) -> VectorField:
    """Second-order nodal gradient (central interior, one-sided boundary)."""
    g = u.grid
    grads = np.gradient(u.values, *g.spacing, edge_order=2)
    if g.dimension == 1:
        comps = np.asarray(grads)[np.newaxis, :]
    else:
        comps = np.stack(grads)
    return VectorField(g, comps)


def integrate(u: ScalarField) -> float:
    """Trapezoidal integral of a nodal field over its box."""
    g = u.grid
    total = u.values
    for k in range(g.dimension - 1, -1, -1):
        h = g.spacing[k]
        w = np.full(g.shape[k], h)
        w[0] = w[-1] = h / 2.0
        total = np.tensordot(total, w, axes=([k], [0]))
    return float(total)


def _powered_flux(m2: np.ndarray, s: np.ndarray, p: float) -> np.ndarray:
    """Flux (m2)^((p-2)/2) * s with the m2 == 0 cells mapped to zero."""
    out = np.zeros_like(s)
    nz = m2 > 0.0
    out[nz] = m2[nz] ** ((p - 2.0) / 2.0) * s[nz]
    return out


def _midpoint_data_1d(values: np.ndarray, h: float):
    s = np.diff(values) / h
    return s


def _midpoint_data_2d(values: np.ndarray, hx: float, hy: float):
    """Face-midpoint differences for both flux families.

    x-faces live between node rows on interior columns, shape (nx-1, ny-2);
    y-faces between node columns on interior rows, shape (nx-2, ny-1).  The
    transverse derivative at each face averages the four adjacent nodal
    differences.
    """
    v = values
    sx = (v[1:, 1:-1] - v[:-1, 1:-1]) / hx
    tx = (v[:-1, 2:] + v[1:, 2:] - v[:-1, :-2] - v[1:, :-2]) / (4.0 * hy)
    sy = (v[1:-1, 1:] - v[1:-1, :-1]) / hy
    ty = (v[2:, :-1] + v[2:, 1:] - v[:-2, :-1] - v[:-2, 1:]) / (4.0 * hx)
    return sx, tx, sy, ty


def gradient_scale(u: ScalarField) -> float:
    """Largest midpoint gradient magnitude; the natural flux scale of ``u``."""
    g = u.grid
    if g.dimension == 1:
        s = _midpoint_data_1d(u.values, g.spacing[0])
        return float(np.max(np.abs(s))) if s.size else 0.0
    sx, tx, sy, ty = _midpoint_data_2d(u.values, *g.spacing)
    mx = np.max(sx ** 2 + tx ** 2) if sx.size else 0.0
    my = np.max(sy ** 2 + ty ** 2) if sy.size else 0.0
    return float(np.sqrt(max(mx, my)))


def flux_delta(u: ScalarField) -> float:
    """Regularization delta used for this field: 1e-8 of its gradient scale."""
    return DELTA_RELATIVE * gradient_scale(u)


def _plap_raw(values: np.ndarray, spacing, p: float, delta: float) -> np.ndarray:
    """Negative discrete p-Laplacian of a nodal array; zero on the boundary."""
    out = np.zeros_like(values)
    d2 = delta * delta
    if len(spacing) == 1:
        h = spacing[0]
        s = _midpoint_data_1d(values, h)
        flux = _powered_flux(s * s + d2, s, p)
        out[1:-1] = -np.diff(flux) / h
    else:
        hx, hy = spacing
        sx, tx, sy, ty = _midpoint_data_2d(values, hx, hy)
        fx = _powered_flux(sx * sx + tx * tx + d2, sx, p)
        fy = _powered_flux(sy * sy + ty * ty + d2, sy, p)
        out[1:-1, 1:-1] = -(np.diff(fx, axis=0) / hx + np.diff(fy, axis=1) / hy)
    return out


def p_laplacian_apply(u: ScalarField, p: float, delta: float | None = None) -> ScalarField:
    """Apply the regularized discrete negative p-Laplacian to ``u``.

    Args:
        u: Dirichlet-zero nodal field.
        p: exponent, must be > 1.
        delta: override for the flux regularization; defaults to
            ``flux_delta(u)``.

    Returns:
        Nodal field holding -div(|Du|^(p-2) Du) at interior nodes, zero on the
        boundary.
    """
    if p <= 1.0:
        raise ConfigurationError(f"p must exceed 1, got {p}")
    if delta is None:
        delta = flux_delta(u)
    return ScalarField(u.grid, _plap_raw(u.values, u.grid.spacing, p, delta))
