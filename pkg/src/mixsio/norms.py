"""Mixed radial-angular Lebesgue norms with power weights.

    ||f||_{L^p_{|x|} L^q_theta} = ( int_0^inf ||f(rho .)||_{L^q(S^{n-1})}^p rho^{n-1} drho )^{1/p}

evaluated with the quadrature of a :class:`~mixsio.grid.PolarGrid`.  All
norms are truncated to the grid's radial window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, InvalidRangeError
from .grid import build_polar_grid, sample


@dataclass(frozen=True)
class NormParams:
    """Exponents ``(p, p_tilde)``, weight exponent ``alpha`` and dimension ``n``.

    ``p_tilde`` may be ``math.inf`` (sup over the sphere).
    """

    p: float
    p_tilde: float
    alpha: float = 0.0
    n: int = 2

    def __post_init__(self):
        if not (1 < self.p < math.inf):
            raise InvalidRangeError(f"p must lie in (1, inf), got {self.p}")
        if not (self.p_tilde > 1):
            raise InvalidRangeError(f"p_tilde must exceed 1, got {self.p_tilde}")
        if not math.isfinite(self.alpha):
            raise InvalidRangeError("alpha must be finite")

    @property
    def lower_bound(self):
        return -self.n / self.p

    @property
    def upper_bound(self):
        return self.n - self.n / self.p

    def admissible(self):
        return self.lower_bound < self.alpha < self.upper_bound

    def dual(self):
        """Exponents of the dual inequality: ``(p', p_tilde', -alpha)``."""
        return NormParams(
            p=conjugate(self.p), p_tilde=conjugate(self.p_tilde), alpha=-self.alpha, n=self.n
        )


def conjugate(p):
    if p == math.inf:
        return 1.0
    return p / (p - 1.0)


def _shell_integrals(values, weights, p_tilde):
    a = np.abs(values)
    if p_tilde == math.inf:
        return a.max(axis=-1)
    return (a**p_tilde) @ weights


def angular_norm(f, shell_index, p_tilde):
    """``L^{p_tilde}`` norm of ``f`` over one shell of its polar grid."""
    grid = f.grid
    n_r = grid.radii.size
    if not (-n_r <= shell_index < n_r):
        raise IndexError(f"shell index {shell_index} out of range for {n_r} shells")
    row = f.values[shell_index]
    if p_tilde == math.inf:
        return float(np.abs(row).max())
    return float((np.abs(row) ** p_tilde @ grid.angular_weights) ** (1.0 / p_tilde))


def _radial_integrand(f, params, weighted):
    grid = f.grid
    if grid.kind != "polar":
        raise DimensionMismatchError("mixed norms need a polar grid")
    if grid.dim != params.n:
        raise DimensionMismatchError(f"grid dimension {grid.dim} != params.n = {params.n}")
    p, q = params.p, params.p_tilde
    s = _shell_integrals(f.values, grid.angular_weights, q)
    # s_i^{p/q} is the p-th power of the angular norm; exponent 1 when p == q
    power = p if q == math.inf else p / q
    integrand = s if power == 1 else s**power
    if weighted and params.alpha != 0:
        integrand = integrand * grid.radii ** (params.alpha * p)
    return integrand


def _finish(f, integrand, p, return_boundary):
    total = float(f.grid.radial_weights @ integrand)
    value = total ** (1.0 / p)
    if return_boundary:
        return value, (float(integrand[0]), float(integrand[-1]))
    return value


def mixed_norm(f, params, return_boundary=False):
    """Truncated ``L^p_{|x|} L^{p_tilde}_theta`` norm of ``f``; ``alpha`` is ignored.

    With ``return_boundary=True`` also returns the radial integrand
    (the p-th power of the angular norm) on the innermost and outermost
    shells, for judging truncation.
    """
    return _finish(f, _radial_integrand(f, params, False), params.p, return_boundary)


def weighted_mixed_norm(f, params, return_boundary=False):
    """Mixed norm of ``|x|^alpha f``, the weight applied exactly per shell."""
    return _finish(f, _radial_integrand(f, params, True), params.p, return_boundary)


def lp_norm(f, p):
    """Plain ``L^p`` quadrature norm on the full polar grid."""
    grid = f.grid
    a = np.abs(f.values)
    return float(grid.radial_weights @ ((a**p) @ grid.angular_weights)) ** (1.0 / p)


def norm_scaling_check(f, lam, params, grid_spec, weighted=False):
    """Compare ``||f(lam .)||`` with ``lam^{-n/p} ||f||`` (``lam^{-alpha-n/p}`` if weighted).

    Both fields are sampled directly: ``f`` on the window of ``grid_spec``
    and ``f(lam .)`` on the same window divided by ``lam``.

    Returns
    -------
    (float, float)
        ``(norm of f(lam .), predicted value from the norm of f)``.
    """
    if lam <= 0:
        raise InvalidRangeError("lam must be positive")
    norm = weighted_mixed_norm if weighted else mixed_norm
    n = params.n
    base = build_polar_grid(n, grid_spec.rho_min, grid_spec.rho_max, grid_spec.n_radial, grid_spec.n_angular)
    scaled = build_polar_grid(
        n, grid_spec.rho_min / lam, grid_spec.rho_max / lam, grid_spec.n_radial, grid_spec.n_angular
    )
    direct = norm(sample(lambda x: f(lam * x), scaled), params)
    exponent = -n / params.p - (params.alpha if weighted else 0.0)
    predicted = lam**exponent * norm(sample(f, base), params)
    return direct, predicted
