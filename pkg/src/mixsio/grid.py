"""Polar and Cartesian discretizations of R^n (n = 2, 3).

Polar grids carry the quadrature used by every norm in the package:
log-spaced radii times a rule on the unit sphere.  Cartesian grids are
periodic boxes that host the FFT operator path.  Both are immutable.

Fields are plain callables taking an array of points with shape
``(..., n)`` and returning values with shape ``(...)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import (
    DimensionMismatchError,
    InvalidRangeError,
    NonFiniteValueError,
    UnsupportedDimensionError,
)

SUPPORTED_DIMS = (2, 3)


def sphere_area(n):
    """Surface measure of the unit sphere S^{n-1}."""
    from math import gamma, pi

    return 2.0 * pi ** (n / 2) / gamma(n / 2)


def _check_dim(n):
    if n not in SUPPORTED_DIMS:
        raise UnsupportedDimensionError(f"dimension must be 2 or 3, got {n}")


@dataclass(frozen=True, eq=False)
class PolarGrid:
    """Log-spaced shells times a quadrature rule on S^{n-1}.

    ``values`` living on this grid have shape ``(n_radial, n_angular_nodes)``.
    """

    dim: int
    radii: np.ndarray
    radial_weights: np.ndarray
    angular_nodes: np.ndarray
    angular_weights: np.ndarray
    params: dict = field(default_factory=dict)

    kind = "polar"

    @property
    def shape(self):
        return (self.radii.size, self.angular_weights.size)

    @property
    def size(self):
        return self.radii.size * self.angular_weights.size

    @property
    def rho_min(self):
        return float(self.radii[0])

    @property
    def rho_max(self):
        return float(self.radii[-1])

    @property
    def log_step(self):
        return float(np.log(self.radii[-1] / self.radii[0]) / (self.radii.size - 1))

    @property
    def points(self):
        return self.radii[:, None, None] * self.angular_nodes[None, :, :]

    @property
    def weights(self):
        """Full product weights, shape ``self.shape``."""
        return np.outer(self.radial_weights, self.angular_weights)

    def integrate(self, values):
        values = np.asarray(values)
        return self.radial_weights @ (values @ self.angular_weights)


@dataclass(frozen=True, eq=False)
class CartesianGrid:
    """Periodic box ``[-L, L)^n`` with ``M`` points per axis.

    The node set is symmetric about the origin modulo the period: node
    index ``k`` reflects to ``(M - k) % M``.
    """

    dim: int
    half_extent: float
    points_per_axis: int

    kind = "cartesian"

    @property
    def spacing(self):
        return 2.0 * self.half_extent / self.points_per_axis

    @property
    def axis(self):
        return -self.half_extent + self.spacing * np.arange(self.points_per_axis)

    @property
    def shape(self):
        return (self.points_per_axis,) * self.dim

    @property
    def size(self):
        return self.points_per_axis**self.dim

    @property
    def points(self):
        axes = np.meshgrid(*([self.axis] * self.dim), indexing="ij")
        return np.stack(axes, axis=-1)

    @property
    def params(self):
        return {"half_extent": self.half_extent, "points_per_axis": self.points_per_axis}

    def integrate(self, values):
        return np.sum(values) * self.spacing**self.dim

    def reflect(self, values):
        """Values at ``-x`` for every node ``x``."""
        out = np.asarray(values)
        for ax in range(self.dim):
            out = np.roll(np.flip(out, axis=ax), 1, axis=ax)
        return out


@dataclass(frozen=True, eq=False)
class GridFunction:
    grid: PolarGrid | CartesianGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, copy=True)
        if values.shape != self.grid.shape:
            raise DimensionMismatchError(
                f"values shape {values.shape} does not match grid shape {self.grid.shape}"
            )
        if not np.all(np.isfinite(values)):
            idx = np.unravel_index(np.argmax(~np.isfinite(values)), values.shape)
            raise NonFiniteValueError(f"non-finite value at node {idx}")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def points(self):
        return self.grid.points

    def __mul__(self, other):
        return GridFunction(self.grid, self.values * other)

    __rmul__ = __mul__


_GL16 = np.polynomial.legendre.leggauss(16)


def _radial_product_weights(radii, n, degree=5):
    """Weights for ``int f rho^{n-1} drho`` on log-uniform radii.

    On each interval of ``u = log rho`` the integrand ``f`` is replaced by
    its interpolating polynomial of ``degree`` through the nearest nodes
    and integrated exactly against ``e^{n u} du``.  Polynomials in
    ``log rho`` up to ``degree`` (constants in particular) are therefore
    integrated to rounding error; smooth ``f`` converge as ``h^{degree+1}``.
    """
    N = radii.size
    d = min(degree, N - 1)
    h = (np.log(radii[-1]) - np.log(radii[0])) / (N - 1)
    # Gauss-Legendre on s in [0, 1]; e^{n h s} is smooth there for any h used in practice
    x, gw = _GL16
    s = 0.5 * (x + 1.0)
    gw = 0.5 * gw * np.exp(n * h * s)
    i = np.arange(N - 1)
    start = np.clip(i - (d - 1) // 2, 0, N - 1 - d)
    scale = h * radii[:-1] ** n
    w = np.zeros(N)
    # only a handful of distinct stencils occur (interior plus the ends)
    for first in np.unique(start - i):
        offs = first + np.arange(d + 1)
        rows = np.nonzero(start - i == first)[0]
        for j, oj in enumerate(offs):
            others = np.delete(offs, j)
            basis = np.prod((s[:, None] - others) / (oj - others), axis=1)
            np.add.at(w, rows + oj, scale[rows] * (basis @ gw))
    return w


def _angular_rule(n, resolution):
    if n == 2:
        phi = 2.0 * np.pi * np.arange(resolution) / resolution
        nodes = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
        weights = np.full(resolution, 2.0 * np.pi / resolution)
        return nodes, weights
    cos_t, w_t = np.polynomial.legendre.leggauss(resolution)
    n_az = 2 * resolution
    az = 2.0 * np.pi * np.arange(n_az) / n_az
    sin_t = np.sqrt(1.0 - cos_t**2)
    nodes = np.stack(
        [
            np.outer(sin_t, np.cos(az)).ravel(),
            np.outer(sin_t, np.sin(az)).ravel(),
            np.repeat(cos_t, n_az),
        ],
        axis=-1,
    )
    nodes /= np.linalg.norm(nodes, axis=-1, keepdims=True)
    weights = np.repeat(w_t, n_az) * (2.0 * np.pi / n_az)
    return nodes, weights


def build_polar_grid(n, rho_min, rho_max, n_radial, angular_resolution):
    """Build a polar grid on the annulus ``rho_min <= |x| <= rho_max``.

    For n=2 the angular rule has ``angular_resolution`` equispaced nodes
    starting at angle 0.  For n=3 it is Gauss-Legendre in the polar
    cosine (``angular_resolution`` nodes) times ``2 * angular_resolution``
    equispaced azimuths.

    Radial weights integrate ``rho^{n-1} drho`` exactly for integrands
    that are piecewise linear in ``log rho``, so constants are integrated
    to rounding error.
    """
    _check_dim(n)
    if not (rho_min > 0 and rho_min < rho_max):
        raise InvalidRangeError(f"need 0 < rho_min < rho_max, got [{rho_min}, {rho_max}]")
    if n_radial < 2:
        raise InvalidRangeError("n_radial must be at least 2")
    if angular_resolution < 4:
        raise InvalidRangeError("angular_resolution must be at least 4")

    radii = np.exp(np.linspace(np.log(rho_min), np.log(rho_max), n_radial))
    radii[0], radii[-1] = rho_min, rho_max
    nodes, weights = _angular_rule(n, angular_resolution)
    params = {
        "rho_min": float(rho_min),
        "rho_max": float(rho_max),
        "n_radial": int(n_radial),
        "angular_resolution": int(angular_resolution),
    }
    return PolarGrid(
        dim=n,
        radii=radii,
        radial_weights=_radial_product_weights(radii, n),
        angular_nodes=nodes,
        angular_weights=weights,
        params=params,
    )


def build_cartesian_grid(n, half_extent, points_per_axis):
    _check_dim(n)
    if half_extent <= 0:
        raise InvalidRangeError("half_extent must be positive")
    if points_per_axis < 2 or points_per_axis % 2:
        raise InvalidRangeError("points_per_axis must be a positive even integer")
    return CartesianGrid(dim=n, half_extent=float(half_extent), points_per_axis=int(points_per_axis))


def sample(f, grid):
    """Evaluate the field ``f`` at every node of ``grid``."""
    pts = grid.points
    values = np.asarray(f(pts))
    if values.shape != grid.shape:
        values = np.broadcast_to(values, grid.shape)
    bad = ~np.isfinite(values)
    if np.any(bad):
        idx = np.unravel_index(np.argmax(bad), grid.shape)
        raise NonFiniteValueError(f"field is not finite at node {idx}, x = {pts[idx]}")
    return GridFunction(grid, values)


def _interp_cartesian(src, pts, order=1):
    grid = src.grid
    h = grid.spacing
    flat = pts.reshape(-1, grid.dim)
    idx = (flat + grid.half_extent) / h
    tol = 1e-9
    inside = np.all((idx >= -tol) & (idx <= grid.points_per_axis - 1 + tol), axis=-1)
    idx = np.clip(idx, 0, grid.points_per_axis - 1)
    coords = idx.T

    mode = "nearest" if order == 1 else "grid-wrap"

    def interp(v):
        return ndimage.map_coordinates(v, coords, order=order, mode=mode)

    if np.iscomplexobj(src.values):
        out = interp(src.values.real) + 1j * interp(src.values.imag)
    else:
        out = interp(src.values)
    out = np.where(inside, out, 0)
    return out.reshape(pts.shape[:-1]), int(np.count_nonzero(~inside))


def _nearest_angular(nodes, dirs, chunk=4096):
    out = np.empty(dirs.shape[0], dtype=np.intp)
    for start in range(0, dirs.shape[0], chunk):
        out[start : start + chunk] = np.argmax(dirs[start : start + chunk] @ nodes.T, axis=1)
    return out


def _interp_polar(src, pts):
    grid = src.grid
    flat = pts.reshape(-1, grid.dim)
    r = np.linalg.norm(flat, axis=-1)
    tol = 1e-12
    inside = (r >= grid.rho_min * (1 - tol)) & (r <= grid.rho_max * (1 + tol))
    r_safe = np.clip(r, grid.rho_min, grid.rho_max)

    n_r = grid.radii.size
    s = np.log(r_safe / grid.rho_min) / grid.log_step
    i0 = np.clip(np.floor(s).astype(np.intp), 0, n_r - 2)
    fr = np.clip(s - i0, 0.0, 1.0)

    vals = src.values
    if grid.dim == 2:
        n_a = grid.angular_weights.size
        phi = np.mod(np.arctan2(flat[:, 1], flat[:, 0]), 2.0 * np.pi)
        t = phi / (2.0 * np.pi / n_a)
        j0 = np.floor(t).astype(np.intp) % n_a
        fa = t - np.floor(t)
        j1 = (j0 + 1) % n_a

        def at_shell(i):
            return (1 - fa) * vals[i, j0] + fa * vals[i, j1]

    else:
        dirs = flat / np.where(r > 0, r, 1.0)[:, None]
        j = _nearest_angular(grid.angular_nodes, dirs)

        def at_shell(i):
            return vals[i, j]

    out = (1 - fr) * at_shell(i0) + fr * at_shell(i0 + 1)
    out = np.where(inside, out, 0)
    return out.reshape(pts.shape[:-1]), int(np.count_nonzero(~inside))


def resample(f, target, order=1):
    """Interpolate ``f`` onto ``target``.

    Cartesian sources use multilinear interpolation (``order=3`` switches
    to a periodic cubic spline).  Polar sources are
    linear in ``log rho`` and, across angles, linear (n=2) or
    nearest-node (n=3).  Target nodes outside the source's covered region
    get the value 0.

    Returns
    -------
    (GridFunction, int)
        The interpolant and the number of zero-filled nodes.
    """
    if f.grid.dim != target.dim:
        raise DimensionMismatchError(
            f"source dimension {f.grid.dim} != target dimension {target.dim}"
        )
    pts = target.points
    if f.grid.kind == "cartesian":
        values, outside = _interp_cartesian(f, pts, order)
    else:
        values, outside = _interp_polar(f, pts)
    return GridFunction(target, values), outside


# ---------------------------------------------------------------------------
# grid specs


@dataclass(frozen=True)
class GridSpec:
    """Resolutions and windows for both grid kinds, as one value."""

    n: int = 2
    rho_min: float = 1e-3
    rho_max: float = 10.0
    n_radial: int = 512
    n_angular: int = 256
    half_extent: float = 12.0
    n_cartesian: int = 512

    def polar(self):
        return build_polar_grid(self.n, self.rho_min, self.rho_max, self.n_radial, self.n_angular)

    def cartesian(self):
        return build_cartesian_grid(self.n, self.half_extent, self.n_cartesian)

    def refined(self, factor=2):
        return replace(
            self,
            n_radial=self.n_radial * factor,
            n_angular=self.n_angular * factor,
            n_cartesian=self.n_cartesian * factor,
        )

    def scaled(self, length):
        """Same grids with every length multiplied by ``length``."""
        return replace(
            self,
            rho_min=self.rho_min * length,
            rho_max=self.rho_max * length,
            half_extent=self.half_extent * length,
        )

    def with_window(self, rho_min=None, rho_max=None, points_per_decade=None):
        """Change the radial window, optionally keeping a fixed log density."""
        lo = self.rho_min if rho_min is None else rho_min
        hi = self.rho_max if rho_max is None else rho_max
        n_radial = self.n_radial
        if points_per_decade is not None:
            n_radial = max(2, int(np.ceil(points_per_decade * np.log10(hi / lo))) + 1)
        return replace(self, rho_min=lo, rho_max=hi, n_radial=n_radial)

    def to_dict(self):
        return dict(self.__dict__)


GRID_PRESETS = {
    ("default", 2): GridSpec(2, 1e-3, 10.0, 512, 256, 12.0, 512),
    ("fine", 2): GridSpec(2, 1e-3, 10.0, 1024, 512, 12.0, 1024),
    ("default", 3): GridSpec(3, 1e-2, 6.0, 256, 12, 8.0, 96),
    ("fine", 3): GridSpec(3, 1e-2, 6.0, 512, 24, 8.0, 192),
}


def grid_preset(name="default", n=2):
    try:
        return GRID_PRESETS[(name, n)]
    except KeyError:
        raise InvalidRangeError(f"no grid preset {name!r} for n={n}") from None


# ---------------------------------------------------------------------------
# serialization


def _grid_header(grid):
    return {"dim": grid.dim, "kind": grid.kind, "params": dict(grid.params)}


def _grid_from_header(header):
    p = header["params"]
    if header["kind"] == "polar":
        return build_polar_grid(
            header["dim"], p["rho_min"], p["rho_max"], p["n_radial"], p["angular_resolution"]
        )
    return build_cartesian_grid(header["dim"], p["half_extent"], p["points_per_axis"])


def save_grid_function(path, f):
    """Write ``f`` as a text table with a one-line JSON header.

    The first line is ``# {json}``; each following row holds the node
    coordinates then the value (real and imaginary parts for complex data).
    """
    header = _grid_header(f.grid)
    is_complex = np.iscomplexobj(f.values)
    header["complex"] = bool(is_complex)
    pts = f.points.reshape(-1, f.grid.dim)
    vals = f.values.reshape(-1)
    cols = [pts, vals.real[:, None]]
    if is_complex:
        cols.append(vals.imag[:, None])
    table = np.hstack(cols)
    path = Path(path)
    with path.open("w") as fh:
        fh.write("# " + json.dumps(header, sort_keys=True) + "\n")
        np.savetxt(fh, table, fmt="%.17g")
    return path


def load_grid_function(path):
    path = Path(path)
    with path.open() as fh:
        header = json.loads(fh.readline()[2:])
        table = np.loadtxt(fh, ndmin=2)
    grid = _grid_from_header(header)
    n = header["dim"]
    values = table[:, n]
    if header.get("complex"):
        values = values + 1j * table[:, n + 1]
    return GridFunction(grid, values.reshape(grid.shape))
