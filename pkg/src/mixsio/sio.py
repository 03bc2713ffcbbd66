"""Singular integral operators ``T f = P.V. int f(x - y) K(y) dy``.

Two independent routes are provided:

* :func:`apply_spectral` multiplies the FFT of a field on a periodic
  Cartesian box by the operator's Fourier symbol;
* :func:`apply_pv_direct` evaluates the truncated principal value by
  polar quadrature in ``y`` at arbitrary points.

The Riesz normalization follows the symbol ``-i (xi . theta) / |xi|``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    DimensionMismatchError,
    InvalidRangeError,
    MissingMultiplierError,
    NonCancellingKernelWarning,
    SupportLeakageError,
    SupportLeakageWarning,
)
from .grid import GridFunction, _angular_rule, sphere_area


@dataclass(frozen=True, eq=False)
class KernelSpec:
    """A kernel ``K`` on R^n minus the origin, with optional Fourier symbol.

    ``kernel`` and ``multiplier`` act on arrays of shape ``(..., n)``.
    ``mean_zero`` states whether ``K`` has vanishing spherical mean; when
    left as ``None`` it is detected numerically.
    """

    dim: int
    kernel: Callable[[np.ndarray], np.ndarray]
    multiplier: Optional[Callable[[np.ndarray], np.ndarray]] = None
    direction: Optional[np.ndarray] = None
    label: str = "kernel"
    mean_zero: Optional[bool] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.direction is not None:
            d = np.asarray(self.direction, dtype=float)
            if d.shape != (self.dim,):
                raise DimensionMismatchError("direction must have length dim")
            if abs(np.linalg.norm(d) - 1.0) > 1e-12:
                raise InvalidRangeError("direction must be a unit vector")
            object.__setattr__(self, "direction", d)


def riesz_constant(n):
    """``Gamma((n+1)/2) / pi^{(n+1)/2}``."""
    return math.gamma((n + 1) / 2) / math.pi ** ((n + 1) / 2)


def riesz(theta):
    """Directional Riesz transform in direction ``theta``."""
    theta = np.asarray(theta, dtype=float)
    n = theta.size
    c = riesz_constant(n)

    def kernel(y):
        r = np.linalg.norm(y, axis=-1)
        return c * (y @ theta) / r ** (n + 1)

    def multiplier(xi):
        k = np.linalg.norm(xi, axis=-1)
        out = np.zeros(k.shape, dtype=complex)
        nz = k > 0
        out[nz] = -1j * (xi[nz] @ theta) / k[nz]
        return out

    label = "riesz(" + ",".join(f"{t:g}" for t in theta) + ")"
    return KernelSpec(
        dim=n,
        kernel=kernel,
        multiplier=multiplier,
        direction=theta,
        label=label,
        mean_zero=True,
        meta={"family": "riesz", "theta": theta.tolist()},
    )


def power_kernel(n, exponent):
    """Radial kernel ``|y|^{-exponent}``; a CZ kernel only when ``exponent == n``."""

    def kernel(y):
        return np.linalg.norm(y, axis=-1) ** (-exponent)

    return KernelSpec(dim=n, kernel=kernel, label=f"|y|^-{exponent:g}", mean_zero=False)


def kernel_by_label(label, n):
    """Build a kernel from a CLI/config label such as ``riesz`` or ``riesz:0,1``."""
    name, _, arg = label.partition(":")
    if name == "riesz":
        theta = np.zeros(n)
        if arg:
            theta = np.array([float(t) for t in arg.split(",")])
            theta = theta / np.linalg.norm(theta)
        else:
            theta[0] = 1.0
        return riesz(theta)
    if name == "power":
        return power_kernel(n, float(arg) if arg else n - 1)
    raise InvalidRangeError(f"unknown kernel label {label!r}")


# ---------------------------------------------------------------------------
# kernel conditions


@dataclass
class KernelReport:
    label: str
    size_sup: float
    gradient_sup: float
    fourier_sup: float
    fourier_source: str
    cap: float

    @property
    def size_ok(self):
        return self.size_sup <= self.cap

    @property
    def gradient_ok(self):
        return self.gradient_sup <= self.cap

    @property
    def fourier_ok(self):
        return self.fourier_sup <= self.cap

    @property
    def is_cz(self):
        return self.size_ok and self.gradient_ok and self.fourier_ok

    def to_dict(self):
        return {
            "label": self.label,
            "size_sup": self.size_sup,
            "gradient_sup": self.gradient_sup,
            "fourier_sup": self.fourier_sup,
            "fourier_source": self.fourier_source,
            "cap": self.cap,
            "size_ok": self.size_ok,
            "gradient_ok": self.gradient_ok,
            "fourier_ok": self.fourier_ok,
        }


def _sample_directions(n, count, extra=None):
    if n == 2:
        phi = 2.0 * np.pi * np.arange(count) / count
        dirs = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
    else:
        res = max(4, int(round(math.sqrt(count / 2))))
        dirs, _ = _angular_rule(3, res)
    if extra is not None:
        dirs = np.vstack([dirs, extra, -extra])
    return dirs


def _truncated_fourier(K, xi, eps, R, angular=64):
    """``int_{eps<|y|<R} K(y) exp(-i xi.y) dy`` by polar quadrature."""
    n = K.dim
    dirs, wa = _angular_rule(n, angular if n == 2 else max(4, angular // 4))
    x, w = np.polynomial.legendre.leggauss(16)
    # log panels up to radius 1, then uniform panels on [1, R]
    nodes, weights = [], []
    if eps < 1:
        edges = np.linspace(np.log(eps), 0.0, max(2, int(np.ceil(2 * np.log10(1 / eps)))) + 1)
        for a, b in zip(edges[:-1], edges[1:]):
            u = 0.5 * (b - a) * x + 0.5 * (a + b)
            r = np.exp(u)
            nodes.append(r)
            weights.append(0.5 * (b - a) * w * r**n)
    top = max(R, 1.0)
    k = max(np.linalg.norm(xi, axis=-1).max(), 1.0)
    edges = np.linspace(max(eps, 1.0), top, max(2, int(np.ceil((top - 1) * k / 2))) + 1)
    for a, b in zip(edges[:-1], edges[1:]):
        r = 0.5 * (b - a) * x + 0.5 * (a + b)
        nodes.append(r)
        weights.append(0.5 * (b - a) * w * r ** (n - 1))
    r = np.concatenate(nodes)
    wr = np.concatenate(weights)
    y = r[:, None, None] * dirs[None, :, :]
    ky = K.kernel(y) * wr[:, None] * wa[None, :]
    out = np.empty(len(xi), dtype=complex)
    for i, q in enumerate(xi):
        out[i] = np.sum(ky * np.exp(-1j * (y @ q)))
    return out


def check_kernel_conditions(K, sample_radii, samples_per_shell=64, cap=1.0):
    """Empirical suprema of the three Calderon-Zygmund quantities.

    ``sup |y|^n |K|`` and ``sup |y|^{n+1} |grad K|`` are taken over
    ``sample_radii`` times ``samples_per_shell`` directions (the kernel's
    own direction, if any, is always included).  The gradient uses
    central differences with step ``1e-5 |y|``.  The Fourier bound uses the
    multiplier when present, otherwise a quadrature of the truncated
    kernel against plane waves.
    """
    radii = np.sort(np.asarray(sample_radii, dtype=float))
    if radii[0] <= 0:
        raise InvalidRangeError("sample radii must be positive")
    if radii[-1] / radii[0] < 1e4 * (1 - 1e-12):
        raise InvalidRangeError("sample radii must span at least 4 decades")
    n = K.dim
    dirs = _sample_directions(n, samples_per_shell, K.direction)
    y = radii[:, None, None] * dirs[None, :, :]
    r = radii[:, None]

    with np.errstate(all="raise"):
        try:
            k = K.kernel(y)
        except FloatingPointError as exc:
            raise InvalidRangeError(f"kernel evaluation failed: {exc}") from exc
    size_sup = float(np.max(r**n * np.abs(k)))

    grad = np.zeros(y.shape)
    for j in range(n):
        step = 1e-5 * r
        e = np.zeros(n)
        e[j] = 1.0
        grad[..., j] = (K.kernel(y + step[..., None] * e) - K.kernel(y - step[..., None] * e)) / (2 * step)
    gradient_sup = float(np.max(r ** (n + 1) * np.linalg.norm(grad, axis=-1)))

    xi_dirs = _sample_directions(n, samples_per_shell, K.direction)
    if K.multiplier is not None:
        mags = np.array([1e-3, 1.0, 1e3])
        xi = (mags[:, None, None] * xi_dirs[None, :, :]).reshape(-1, n)
        fourier_sup = float(np.max(np.abs(K.multiplier(xi))))
        source = "multiplier"
    else:
        xi = np.concatenate([m * _sample_directions(n, 16, K.direction) for m in (0.1, 1.0)])
        fourier_sup = float(np.max(np.abs(_truncated_fourier(K, xi, radii[0], radii[-1]))))
        source = "quadrature"
    return KernelReport(K.label, size_sup, gradient_sup, fourier_sup, source, float(cap))


# ---------------------------------------------------------------------------
# spectral path


def _frequencies(grid):
    k = 2.0 * np.pi * np.fft.fftfreq(grid.points_per_axis, d=grid.spacing)
    axes = np.meshgrid(*([k] * grid.dim), indexing="ij")
    return np.stack(axes, axis=-1)


def _symbol(K, grid):
    xi = _frequencies(grid)
    m = np.asarray(K.multiplier(xi), dtype=complex)
    m[(0,) * grid.dim] = 0.0
    # Nyquist modes have no Hermitian partner; drop them
    nyq = grid.points_per_axis // 2
    for ax in range(grid.dim):
        idx = [slice(None)] * grid.dim
        idx[ax] = nyq
        m[tuple(idx)] = 0.0
    return m


def _edge_ratio(values):
    a = np.abs(values)
    peak = a.max()
    if peak == 0:
        return 0.0
    edge = 0.0
    for ax in range(values.ndim):
        edge = max(edge, np.take(a, 0, axis=ax).max(), np.take(a, -1, axis=ax).max())
    return float(edge / peak)


def apply_spectral(K, f, leakage_tol=1e-8, leakage_error=1e-3, return_info=False):
    """Apply ``T`` to ``f`` on a periodic Cartesian grid via its Fourier symbol.

    The symbol is zeroed at the origin and on the Nyquist planes.  For real
    input the (tiny) imaginary residue is dropped and reported in the
    diagnostics.  A field that is not negligible on the box boundary
    triggers :class:`SupportLeakageWarning` above ``leakage_tol`` and
    :class:`SupportLeakageError` above ``leakage_error``.
    """
    if K.multiplier is None:
        raise MissingMultiplierError(f"kernel {K.label!r} has no Fourier multiplier")
    grid = f.grid
    if grid.kind != "cartesian":
        raise DimensionMismatchError("apply_spectral needs a Cartesian grid")
    if grid.dim != K.dim:
        raise DimensionMismatchError(f"kernel dim {K.dim} != grid dim {grid.dim}")

    leak = _edge_ratio(f.values)
    if leakage_error is not None and leak > leakage_error:
        raise SupportLeakageError(f"field is {leak:.3g} of its peak on the box boundary")
    if leak > leakage_tol:
        warnings.warn(
            f"field is {leak:.3g} of its peak on the box boundary", SupportLeakageWarning, stacklevel=2
        )

    out = np.fft.ifftn(np.fft.fftn(f.values) * _symbol(K, grid))
    residue = 0.0
    if not np.iscomplexobj(f.values):
        sup = np.abs(out.real).max()
        residue = float(np.abs(out.imag).max() / sup) if sup > 0 else 0.0
        out = out.real
    result = GridFunction(grid, out)
    if return_info:
        return result, {"imag_residue": residue, "leakage": leak}
    return result


def spectral_eval(K, f, points):
    """Evaluate the trigonometric interpolant of ``T f`` at arbitrary points."""
    grid = f.grid
    points = np.atleast_2d(np.asarray(points, dtype=float))
    coef = np.fft.fftn(f.values) * _symbol(K, grid) / grid.size
    k = 2.0 * np.pi * np.fft.fftfreq(grid.points_per_axis, d=grid.spacing)
    out = np.empty(len(points), dtype=complex)
    for i, x in enumerate(points):
        c = coef
        for ax in range(grid.dim):
            phase = np.exp(1j * k * (x[ax] + grid.half_extent))
            c = np.tensordot(phase, c, axes=(0, 0))
        out[i] = c
    if not np.iscomplexobj(f.values):
        return out.real
    return out


# ---------------------------------------------------------------------------
# direct principal value


def _is_mean_zero(K):
    if K.mean_zero is not None:
        return K.mean_zero
    dirs, w = _angular_rule(K.dim, 64 if K.dim == 2 else 16)
    k = K.kernel(dirs)
    return abs(np.sum(k * w)) <= 1e-10 * np.sum(np.abs(k) * w)


def _pv_nodes(n, eps, R, quad_resolution):
    gl_x, gl_w = np.polynomial.legendre.leggauss(16)
    inner_r, inner_w = [], []
    if eps < 1:
        per_decade = max(2, quad_resolution // 32)
        panels = max(1, int(np.ceil(per_decade * np.log10(1.0 / eps))))
        edges = np.linspace(np.log(eps), 0.0, panels + 1)
        for a, b in zip(edges[:-1], edges[1:]):
            r = np.exp(0.5 * (b - a) * gl_x + 0.5 * (a + b))
            inner_r.append(r)
            inner_w.append(0.5 * (b - a) * gl_w * r**n)
    outer_r, outer_w = [], []
    lo = max(eps, 1.0)
    if R > lo:
        panel_len = 16.0 / max(quad_resolution, 16)
        edges = np.linspace(lo, R, max(1, int(np.ceil((R - lo) / panel_len))) + 1)
        for a, b in zip(edges[:-1], edges[1:]):
            r = 0.5 * (b - a) * gl_x + 0.5 * (a + b)
            outer_r.append(r)
            outer_w.append(0.5 * (b - a) * gl_w * r ** (n - 1))
    cat = lambda xs: np.concatenate(xs) if xs else np.zeros(0)
    return cat(inner_r), cat(inner_w), cat(outer_r), cat(outer_w)


def apply_pv_direct(K, f, eval_points, eps, R, quad_resolution=256):
    """Truncated principal value ``T_{eps,R} f`` at each of ``eval_points``.

    For kernels with vanishing spherical mean::

        int_{eps<|y|<1} (f(x-y) - f(x)) K(y) dy + int_{1<|y|<R} f(x-y) K(y) dy

    Otherwise the raw truncated integral is returned and a
    :class:`NonCancellingKernelWarning` is issued.  ``quad_resolution`` is
    the number of angular nodes (n=2) and sets the radial panel density.
    """
    if not (0 < eps < R):
        raise InvalidRangeError("need 0 < eps < R")
    n = K.dim
    pts = np.atleast_2d(np.asarray(eval_points, dtype=float))
    if pts.shape[-1] != n:
        raise DimensionMismatchError("eval points do not match the kernel dimension")
    dirs, wa = _angular_rule(n, quad_resolution if n == 2 else max(4, quad_resolution // 8))
    r_in, w_in, r_out, w_out = _pv_nodes(n, eps, R, quad_resolution)
    cancel = _is_mean_zero(K)
    if not cancel:
        warnings.warn(
            f"kernel {K.label!r} has nonzero spherical mean; returning the raw truncation",
            NonCancellingKernelWarning,
            stacklevel=2,
        )

    y_in = r_in[:, None, None] * dirs[None]
    y_out = r_out[:, None, None] * dirs[None]
    kw_in = K.kernel(y_in) * w_in[:, None] * wa[None, :]
    kw_out = K.kernel(y_out) * w_out[:, None] * wa[None, :]

    out = np.empty(len(pts))
    for i, x in enumerate(pts):
        inner = f(x - y_in)
        if cancel:
            inner = inner - f(x[None, :])[0]
        out[i] = np.sum(inner * kw_in) + np.sum(f(x - y_out) * kw_out)
    return out


__all__ = [
    "KernelSpec",
    "KernelReport",
    "riesz",
    "riesz_constant",
    "power_kernel",
    "kernel_by_label",
    "check_kernel_conditions",
    "apply_spectral",
    "spectral_eval",
    "apply_pv_direct",
    "sphere_area",
]
