"""Quantitative pieces of the weighted kernel lemma.

The weighted inequality for ``T`` reduces to the boundedness, on mixed
radial-angular spaces, of the positive operator with kernel

    F(x, y) = |1 - (|x|/|y|)^alpha| / |x - y|^n .

Its bound constant is the ``L^1(drho/rho)`` norm of the profile

    g(rho) = rho^{n/p} |1 - rho^alpha| int_{S^{n-1}} |rho e - theta|^{-n} dS_theta ,

split over ``(0, 1/2)``, ``(1/2, 2)`` and ``(2, inf)``.  The first piece
is finite iff ``alpha > -n/p`` and the last iff ``alpha < n - n/p``.

The exponent written ``beta`` in some derivations is the same ``alpha``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DimensionMismatchError, InvalidRangeError, SingularInputError
from .grid import GridFunction, sphere_area
from .norms import conjugate

_GL_CACHE = {}


def _gauss(q):
    if q not in _GL_CACHE:
        _GL_CACHE[q] = np.polynomial.legendre.leggauss(q)
    return _GL_CACHE[q]


@dataclass(frozen=True)
class LemmaParams:
    n: int
    p: float
    alpha: float
    e: tuple = None

    def __post_init__(self):
        if not (1 < self.p < math.inf):
            raise InvalidRangeError(f"p must lie in (1, inf), got {self.p}")
        e = self.e
        if e is None:
            e = (1.0,) + (0.0,) * (self.n - 1)
        e = tuple(float(v) for v in e)
        if len(e) != self.n or abs(math.hypot(*e) - 1.0) > 1e-12:
            raise InvalidRangeError("e must be a unit vector of length n")
        object.__setattr__(self, "e", e)

    @property
    def lower_bound(self):
        return -self.n / self.p

    @property
    def upper_bound(self):
        return self.n - self.n / self.p

    def admissible(self):
        return self.lower_bound < self.alpha < self.upper_bound

    def dual(self):
        return LemmaParams(self.n, conjugate(self.p), -self.alpha, self.e)


# ---------------------------------------------------------------------------
# the kernel and the commutator identity


def _one_minus_power(t, alpha):
    """``|1 - t^alpha|`` without cancellation for ``t`` near 1."""
    t = np.asarray(t, dtype=float)
    if alpha == 0:
        return np.zeros_like(t)
    with np.errstate(divide="ignore"):
        return np.abs(np.expm1(alpha * np.log(t)))


def _one_minus_ratio_power(a, b, alpha):
    """``|1 - (a/b)^alpha|``; ``a - b`` is exact when ``a ~ b``, so no digits are lost."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if alpha == 0:
        return np.zeros(np.broadcast(a, b).shape)
    with np.errstate(divide="ignore"):
        return np.abs(np.expm1(alpha * np.log1p((a - b) / b)))


def stein_weiss_kernel(x, y, alpha):
    """``|1 - (|x|/|y|)^alpha| / |x - y|^n``, vectorized over leading axes."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.shape[-1]
    rx = np.linalg.norm(x, axis=-1)
    ry = np.linalg.norm(y, axis=-1)
    d = np.linalg.norm(x - y, axis=-1)
    if np.any(d == 0):
        raise SingularInputError("F(x, y) is singular at x = y")
    if np.any(ry == 0):
        raise SingularInputError("F(x, y) is singular at y = 0")
    if alpha < 0 and np.any(rx == 0):
        raise SingularInputError("F(x, y) is singular at x = 0 for alpha < 0")
    return _one_minus_ratio_power(rx, ry, alpha) / d**n


def verify_commutator_identity(x, y, alpha):
    """Both sides of ``||y|^a - |x|^a| = F(x, y) |x - y|^n |y|^a``.

    Returns
    -------
    (lhs, rhs)
        The left side is computed by direct subtraction in extended
        precision (``np.longdouble``) and rounded back; the right side goes
        through :func:`stein_weiss_kernel` in double precision.  Where
        ``longdouble`` is plain double the left side loses about
        ``eps / | |x|/|y| - 1 |`` relative digits.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.shape[-1]
    rx = np.linalg.norm(x, axis=-1)
    ry = np.linalg.norm(y, axis=-1)
    ext = np.longdouble
    a = np.asarray(alpha, dtype=ext)
    lhs = np.abs(np.asarray(ry, dtype=ext) ** a - np.asarray(rx, dtype=ext) ** a).astype(float)
    rhs = stein_weiss_kernel(x, y, alpha) * np.linalg.norm(x - y, axis=-1) ** n * ry**alpha
    return lhs, rhs


# ---------------------------------------------------------------------------
# sphere integral


def _sphere_integrand(t, rho, n):
    # |rho e - theta|^2 = (1 - rho)^2 + 4 rho sin^2(t/2), t the angle to e
    dist2 = (1.0 - rho) ** 2 + 4.0 * rho * np.sin(0.5 * t) ** 2
    if n == 2:
        return 2.0 / dist2
    return sphere_area(n - 1) * np.sin(t) ** (n - 2) * dist2 ** (-n / 2)


def _panel_gl(a, b, q, rho, n):
    x, w = _gauss(q)
    half = 0.5 * (b - a)
    t = half[:, None] * x[None, :] + (0.5 * (a + b))[:, None]
    return half * (_sphere_integrand(t, rho, n) @ w)


def _initial_panels(rho):
    width = max(abs(1.0 - rho), 1e-300)
    edges = [0.0]
    s = width / 4
    while s < math.pi:
        edges.append(s)
        s *= 2.0
    edges.append(math.pi)
    return np.array(edges)


def sphere_kernel_integral(rho, n, quad_resolution=20, rtol=1e-13, max_levels=40):
    """``int_{S^{n-1}} |rho e - theta|^{-n} dS_theta`` by adaptive quadrature.

    The integral is reduced to the angle ``t`` between ``theta`` and ``e``.
    Panels start geometrically graded towards ``t = 0`` on the scale
    ``|1 - rho|`` and are bisected until each Gauss-Legendre panel agrees
    with the sum over its halves.
    """
    if n not in (2, 3):
        raise InvalidRangeError(f"dimension must be 2 or 3, got {n}")
    rho = float(rho)
    if rho < 0:
        raise InvalidRangeError("rho must be nonnegative")
    if abs(rho - 1.0) <= 1e-6:
        raise SingularInputError("rho is within 1e-6 of 1; the sphere integral diverges")
    if rho == 0.0:
        return sphere_area(n)
    return _sphere_cached(rho, n, int(quad_resolution), rtol, max_levels)


@lru_cache(maxsize=200_000)
def _sphere_cached(rho, n, q, rtol, max_levels):
    edges = _initial_panels(rho)
    a, b = edges[:-1], edges[1:]
    total = 0.0
    for _ in range(max_levels):
        whole = _panel_gl(a, b, q, rho, n)
        mid = 0.5 * (a + b)
        halves_l = _panel_gl(a, mid, q, rho, n)
        halves_r = _panel_gl(mid, b, q, rho, n)
        split = halves_l + halves_r
        scale = abs(total) + np.abs(split).sum()
        ok = np.abs(whole - split) <= rtol * scale
        total += split[ok].sum()
        if ok.all():
            return float(total)
        a, b = np.concatenate([a[~ok], mid[~ok]]), np.concatenate([mid[~ok], b[~ok]])
    return float(total + _panel_gl(a, b, q, rho, n).sum())


def sphere_kernel_closed_form(rho, n):
    """Exact sphere integral for n = 2, 3 (used for the removable band at rho = 1)."""
    rho = np.asarray(rho, dtype=float)
    if n == 2:
        return 2 * math.pi / np.abs(1 - rho**2)
    if n == 3:
        with np.errstate(divide="ignore"):
            inner = 4 * math.pi / (1 - rho**2)
            outer = 4 * math.pi / (rho * (rho**2 - 1))
        return np.where(rho < 1, inner, outer)
    raise InvalidRangeError("closed form only for n = 2, 3")


# ---------------------------------------------------------------------------
# profile


REMOVABLE_BAND = 1e-6


def _removable_value(rho, params):
    """``g`` inside the band around 1 via the product of vanishing and blowing-up factors."""
    n, alpha = params.n, params.alpha
    L = math.log(rho)
    if L == 0.0:
        ratio = abs(alpha) / 2.0
    else:
        ratio = abs(math.expm1(alpha * L)) / abs(math.expm1(2.0 * L))
    area = 2 * math.pi if n == 2 else 4 * math.pi
    if n == 3 and rho > 1:
        area /= rho
    return rho ** (n / params.p) * ratio * area


def g_profile(rho, params, quad_resolution=20):
    """The profile ``rho^{n/p} |1 - rho^alpha| * sphere integral``; accepts arrays."""
    rho_arr = np.atleast_1d(np.asarray(rho, dtype=float))
    out = np.empty_like(rho_arr)
    for i, r in enumerate(rho_arr):
        if r <= 0:
            raise InvalidRangeError("g is defined for rho > 0")
        if params.alpha == 0:
            out[i] = 0.0
        elif abs(r - 1.0) <= REMOVABLE_BAND:
            out[i] = _removable_value(r, params)
        else:
            s = sphere_kernel_integral(r, params.n, quad_resolution)
            out[i] = r ** (params.n / params.p) * float(_one_minus_power(r, params.alpha)) * s
    return out if np.ndim(rho) else float(out[0])


def integrate_profile(a, b, params, quad_resolution=20, panel_width=0.5, nodes=16):
    """``int_a^b g(rho) drho / rho`` with Gauss-Legendre panels in ``log rho``."""
    if a >= b:
        return 0.0
    ua, ub = math.log(a), math.log(b)
    panels = max(1, int(math.ceil((ub - ua) / panel_width)))
    x, w = _gauss(nodes)
    edges = np.linspace(ua, ub, panels + 1)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        u = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
        total += 0.5 * (hi - lo) * float(w @ g_profile(np.exp(u), params, quad_resolution))
    return total


# ---------------------------------------------------------------------------
# bound constant and the convergence dichotomy

LOG_RATE_FLOOR = 0.02


@dataclass
class TailFit:
    """Growth of a truncated piece as its cut-off is pushed out.

    ``slope`` is the fitted exponent of the increments against the
    cut-off scale (``1/delta`` or ``M``).  Negative: convergent.  Near
    zero: logarithmic growth, ``rate`` is then the coefficient of the log.
    Positive: power growth, ``rate == slope``.
    """

    model: str
    slope: float
    rate: float
    r2: float
    tail_estimate: float


def _fit_increments(scales, increments):
    inc = np.asarray(increments, dtype=float)
    if np.all(inc <= 0):
        return TailFit("converged", -math.inf, 0.0, 1.0, 0.0)
    x = np.log(np.asarray(scales[:-1], dtype=float))
    y = np.log(inc)
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, icpt), res, *_ = np.linalg.lstsq(A, y, rcond=None)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(res[0]) if res.size else 0.0
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    step = math.log(scales[1] / scales[0])
    if abs(slope) < LOG_RATE_FLOOR:
        return TailFit("log", float(slope), float(np.mean(inc) / step), r2, math.inf)
    if slope > 0:
        return TailFit("power", float(slope), float(slope), r2, math.inf)
    ratio = math.exp(slope * step)
    tail = float(inc.sum() + inc[-1] * ratio / (1 - ratio))
    return TailFit("converged", float(slope), float(slope), r2, tail)


@dataclass
class SplitReport:
    I: float
    II: float
    III: float
    B: float
    delta: float
    M: float
    verdict: str
    divergent_piece: str | None
    fitted_rate: float | None
    model: str | None = None
    lower_tail: dict = field(default_factory=dict)
    upper_tail: dict = field(default_factory=dict)
    B_extrapolated: float | None = None
    params: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))


def _tail_study(params, start, factor, steps, quad_resolution, lower):
    """Increments of I (lower) or III (upper) as the cut-off moves by ``factor``."""
    scales, incs = [], []
    c = start
    for _ in range(steps):
        nxt = c / factor if lower else c * factor
        a, b = (nxt, c) if lower else (c, nxt)
        incs.append(integrate_profile(a, b, params, quad_resolution))
        scales.append(1.0 / c if lower else c)
        c = nxt
    scales.append(1.0 / c if lower else c)
    return _fit_increments(scales, incs)


def young_bound_constant(params, delta=1e-3, M=1e3, quad_resolution=20, tail_steps=8, tail_factor=math.sqrt(10)):
    """Split ``int g drho/rho`` into I, II, III on ``[delta, M]`` and classify the tails.

    Each tail is probed on ``tail_steps`` further cut-offs spaced by
    ``tail_factor`` beyond ``delta`` (resp. ``M``).  A divergent piece is
    reported with its growth model: ``power`` (rate is the exponent of
    ``1/delta`` or ``M``) or ``log`` (rate is the coefficient of the log).
    """
    if not (0 < delta < 0.5 and M > 2):
        raise InvalidRangeError(f"need 0 < delta < 1/2 and M > 2, got delta={delta}, M={M}")
    I = integrate_profile(delta, 0.5, params, quad_resolution)
    II = integrate_profile(0.5, 1.0, params, quad_resolution) + integrate_profile(1.0, 2.0, params, quad_resolution)
    III = integrate_profile(2.0, M, params, quad_resolution)
    B = I + II + III

    low = _tail_study(params, delta, tail_factor, tail_steps, quad_resolution, lower=True)
    up = _tail_study(params, M, tail_factor, tail_steps, quad_resolution, lower=False)
    divergent = [name for name, fit in (("I", low), ("III", up)) if fit.model != "converged"]
    if divergent:
        verdict = "diverged"
        piece = "+".join(divergent)
        fit = low if divergent[0] == "I" else up
        rate, model, extrap = fit.rate, fit.model, None
    else:
        verdict, piece, rate, model = "converged", None, None, None
        extrap = B + low.tail_estimate + up.tail_estimate
    return SplitReport(
        I=I,
        II=II,
        III=III,
        B=B,
        delta=delta,
        M=M,
        verdict=verdict,
        divergent_piece=piece,
        fitted_rate=rate,
        model=model,
        lower_tail=asdict(low),
        upper_tail=asdict(up),
        B_extrapolated=extrap,
        params={"n": params.n, "p": params.p, "alpha": params.alpha},
    )


# ---------------------------------------------------------------------------
# the operator with kernel F on a polar grid


def _local_spacing(grid):
    r = grid.radii
    dr = np.gradient(r)
    if grid.dim == 2:
        ang = 2 * math.pi / grid.angular_weights.size
    else:
        ang = math.sqrt(4 * math.pi / grid.angular_weights.size)
    return np.minimum(dr, r * ang)


def apply_F(phi, alpha, return_info=False):
    """``x -> int F(x, y) phi(y) dy`` by quadrature on ``phi``'s polar grid.

    Pairs with ``|x - y|`` below half the local node spacing at ``x`` are
    skipped; ``info["skipped_bound"]`` bounds their total contribution,
    relative to the output's sup, through the Lipschitz modulus of
    ``rho -> rho^alpha`` on the skipped ball.
    """
    grid = phi.grid
    if grid.kind != "polar":
        raise DimensionMismatchError("apply_F needs a polar grid")
    n = grid.dim
    vals = np.asarray(phi.values, dtype=float)
    r = grid.radii
    W = grid.radial_weights
    wa = grid.angular_weights
    half = 0.5 * _local_spacing(grid)

    if alpha == 0:
        out = np.zeros(grid.shape)
    elif n == 2:
        out = _apply_F_circle(vals, r, W, wa, alpha, half)
    else:
        out = _apply_F_direct(vals, grid, alpha, half)

    result = GridFunction(grid, out)
    if not return_info:
        return result
    sup_out = np.abs(out).max()
    sup_phi = np.abs(vals).max(axis=1)
    near = np.maximum(sup_phi, np.maximum(np.roll(sup_phi, 1), np.roll(sup_phi, -1)))
    lip = abs(alpha) * (1 + half / r) ** abs(alpha) / np.maximum(r - half, 1e-300)
    bound = lip * near * sphere_area(n) * half
    rel = float(bound.max() / sup_out) if sup_out > 0 else 0.0
    return result, {"skipped_bound": rel}


def _apply_F_circle(vals, r, W, wa, alpha, half):
    # F depends on the angle difference only: circular convolution per shell pair
    N = wa.size
    phi_ang = 2 * math.pi * np.arange(N) / N
    c, s = np.cos(phi_ang), np.sin(phi_ang)
    vhat = np.fft.fft(vals * wa[None, :], axis=1) * W[:, None]
    out = np.empty_like(vals)
    for a in range(r.size):
        ra = r[a]
        dist = np.sqrt((ra - r[:, None] * c[None, :]) ** 2 + (r[:, None] * s[None, :]) ** 2)
        num = _one_minus_ratio_power(ra, r, alpha)[:, None]
        skip = dist < half[a]
        with np.errstate(divide="ignore", invalid="ignore"):
            k = np.where(skip, 0.0, num / dist**2)
        out[a] = np.fft.ifft(np.sum(np.fft.fft(k, axis=1) * vhat, axis=0)).real
    return out


def _apply_F_direct(vals, grid, alpha, half, chunk=256):
    pts = grid.points.reshape(-1, grid.dim)
    rad = np.repeat(grid.radii, grid.angular_weights.size)
    h = np.repeat(half, grid.angular_weights.size)
    wv = (grid.weights * vals).reshape(-1)
    out = np.empty(pts.shape[0])
    for s in range(0, pts.shape[0], chunk):
        x = pts[s : s + chunk]
        d = np.linalg.norm(x[:, None, :] - pts[None, :, :], axis=-1)
        num = _one_minus_ratio_power(rad[s : s + chunk, None], rad[None, :], alpha)
        skip = d < h[s : s + chunk, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            k = np.where(skip, 0.0, num / d**grid.dim)
        out[s : s + chunk] = k @ wv
    return out.reshape(grid.shape)
