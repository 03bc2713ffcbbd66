"""Ratio sweeps, boundary blow-up probes and report emission.

For a test function ``phi`` the empirical ratio

    || |x|^alpha T phi || / || |x|^alpha phi ||      (mixed radial-angular norms)

is a lower bracket for the operator constant.  Sweeps take its max over
finite families; probes truncate the norm window at ``delta`` and fit how
the ratio grows as ``delta -> 0`` outside the admissible range.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import ConfigError, InvalidRangeError, MixsioError
from .grid import GridSpec, grid_preset, resample, sample
from .lemma import LemmaParams, apply_F, young_bound_constant
from .norms import NormParams, mixed_norm, weighted_mixed_norm
from .sio import apply_spectral, kernel_by_label

log = logging.getLogger(__name__)

FAMILIES = ("gaussian_dilations", "annulus_bumps", "necessity_bump")
CSV_HEADER = ["n", "p", "p_tilde", "alpha", "family", "param", "numerator", "denominator", "ratio", "flags"]


# ---------------------------------------------------------------------------
# test functions


def _bump(u):
    """Smooth bump on (-1, 1) with value 1 at 0."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - u[inside] ** 2))
    return out


@dataclass(frozen=True)
class TestFunction:
    """A member of one of the named families, callable on ``(..., n)`` arrays.

    * ``gaussian_dilations``: ``exp(-|lam x|^2)``, ``parameter = lam``.
    * ``annulus_bumps``: radial bump on ``1 < |x| < 2`` times
      ``exp(s (x/|x| . e_1 - 1))``; ``parameter = s`` sets the angular
      concentration around ``e_1``.
    * ``necessity_bump``: a fixed bump on ``|x - 2 e_1| < 1/2``.  Its
      parameter is the inner truncation radius of the norm window, not a
      shape parameter.
    """

    __test__ = False

    family: str
    parameter: float
    n: int = 2

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}")
        if not self.parameter > 0:
            raise ConfigError("family parameter must be positive")

    @property
    def length_scale(self):
        if self.family == "gaussian_dilations":
            return 1.0 / self.parameter
        return 1.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.family == "gaussian_dilations":
            return np.exp(-np.sum((self.parameter * x) ** 2, axis=-1))
        if self.family == "annulus_bumps":
            r = np.linalg.norm(x, axis=-1)
            radial = _bump(2.0 * (r - 1.5))
            with np.errstate(invalid="ignore", divide="ignore"):
                cos = np.where(r > 0, x[..., 0] / np.where(r > 0, r, 1.0), 1.0)
            return radial * np.exp(self.parameter * (cos - 1.0))
        shift = np.zeros(self.n)
        shift[0] = 2.0
        return _bump(2.0 * np.linalg.norm(x - shift, axis=-1))


def make_test_function(family, parameter, n=2):
    return TestFunction(family, float(parameter), n)


# ---------------------------------------------------------------------------
# ratio rows


@dataclass
class RatioRow:
    n: int
    p: float
    p_tilde: float
    alpha: float
    family: str
    param: float
    numerator: float
    denominator: float
    ratio: float
    flags: list = field(default_factory=list)

    def csv_fields(self):
        return [
            str(self.n),
            repr(float(self.p)),
            repr(float(self.p_tilde)),
            repr(float(self.alpha)),
            self.family,
            repr(float(self.param)),
            repr(float(self.numerator)),
            repr(float(self.denominator)),
            repr(float(self.ratio)),
            ";".join(self.flags),
        ]


class TransformCache:
    """Memoizes ``(phi, T phi)`` on polar grids keyed by function, kernel and grid."""

    def __init__(self):
        self._store = {}

    def get(self, phi, K, spec, order=1):
        key = (phi.family, phi.parameter, phi.n, K.label, spec, order)
        if key not in self._store:
            self._store[key] = _transform_on_polar(phi, K, spec, order)
        return self._store[key]

    def prefetch(self, jobs, workers=1):
        todo = [j for j in jobs if (j[0].family, j[0].parameter, j[0].n, j[1].label, j[2], 1) not in self._store]
        if workers > 1 and len(todo) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(lambda j: _transform_on_polar(j[0], j[1], j[2], 1), todo))
        else:
            results = [_transform_on_polar(*j, 1) for j in todo]
        for (phi, K, spec), res in zip(todo, results):
            self._store[(phi.family, phi.parameter, phi.n, K.label, spec, 1)] = res


def _transform_on_polar(phi, K, spec, order=1):
    cart = spec.cartesian()
    polar = spec.polar()
    tphi_cart, info = apply_spectral(K, sample(phi, cart), return_info=True)
    tphi, outside = resample(tphi_cart, polar, order=order)
    flags = []
    if outside:
        flags.append(f"zero_fill={outside}")
    if info["leakage"] > 1e-8:
        flags.append("leakage")
    return sample(phi, polar), tphi, flags


def ratio_point(phi, params, K, grid_spec, cache=None):
    """One ratio row for ``phi`` at ``params``.

    ``T phi`` is computed on the Cartesian grid of ``grid_spec`` by the
    spectral path and interpolated to the polar grid; ``phi`` is sampled
    directly there.  Grids follow the member's length scale so that
    dilated members see identically resolved problems.
    """
    spec = grid_spec.scaled(getattr(phi, "length_scale", 1.0))
    if getattr(phi, "family", None) == "necessity_bump":
        spec = _truncated_window(spec, phi.parameter)
    cache = cache or TransformCache()
    phi_polar, tphi, flags = cache.get(phi, K, spec)
    den = weighted_mixed_norm(phi_polar, params)
    if not den > 1e-12:
        raise MixsioError(f"denominator {den:.3g} is not positive")
    num = weighted_mixed_norm(tphi, params)
    flags = list(flags)
    if not params.admissible():
        flags.append("inadmissible")
    return RatioRow(params.n, params.p, params.p_tilde, params.alpha, phi.family, phi.parameter, num, den, num / den, flags)


# ---------------------------------------------------------------------------
# blow-up probe


@dataclass
class BlowupFit:
    side: str
    probed: dict
    deltas: list
    ratios: list
    verdict: str
    model: str | None
    exponent: float | None
    log_coefficient: float | None
    r2: float | None
    expected_exponent: float
    monotone: bool
    flags: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


def _fit_models(L, y, kappa_min=0.02, kappa_max=10.0):
    """Fit ``y = A + c L`` and ``y = A + c exp(kappa L)``; return both with AIC."""
    m = len(y)
    scale = float(np.sum((y - y.mean()) ** 2)) or 1.0

    def lin_fit(z):
        Z = np.vstack([np.ones_like(z), z]).T
        coef, *_ = np.linalg.lstsq(Z, y, rcond=None)
        rss = float(np.sum((Z @ coef - y) ** 2))
        return coef, rss

    log_coef, log_rss = lin_fit(L)

    def power_rss(kappa):
        return lin_fit(np.exp(kappa * (L - L[0])))[1]

    best = minimize_scalar(power_rss, bounds=(kappa_min, kappa_max), method="bounded", options={"xatol": 1e-10})
    kappa = float(best.x)
    pow_coef, pow_rss = lin_fit(np.exp(kappa * (L - L[0])))

    def aic(rss, k):
        return m * math.log(max(rss / scale, 1e-300)) + 2 * k

    return {
        "log": {"coef": log_coef, "rss": log_rss, "aic": aic(log_rss, 2), "r2": 1 - log_rss / scale},
        "power": {"kappa": kappa, "coef": pow_coef, "rss": pow_rss, "aic": aic(pow_rss, 3), "r2": 1 - pow_rss / scale},
    }


def _truncated_window(spec, delta):
    """``spec`` with inner radius ``delta`` at unchanged points per decade."""
    density = spec.n_radial / math.log10(spec.rho_max / spec.rho_min)
    return spec.with_window(rho_min=float(delta), points_per_decade=density)


def blowup_probe(params, K, delta_values, grid_spec, convergence_tol=0.01, cache=None):
    """Truncated ratios for the necessity bump as the inner radius ``delta -> 0``.

    Points with ``alpha >= n - n/p`` are probed through the dual exponents
    ``(p', p_tilde', -alpha)``.  The ratio is reported converged when it
    moves less than ``convergence_tol`` over the last decade of deltas;
    otherwise ``ratio^p`` is fitted against ``L = log(1/delta)`` by
    ``A + c L`` (log model) and ``A + c exp(kappa L)`` (power model), the
    smaller AIC winning.  The growth exponent of the ratio is ``kappa / p``.
    """
    deltas = np.sort(np.asarray(delta_values, dtype=float))[::-1]
    if deltas[-1] <= 0 or deltas[0] / deltas[-1] < 100 * (1 - 1e-12):
        raise InvalidRangeError("delta values must be positive and span at least 2 decades")
    side = "lower"
    probed = params
    if params.alpha >= params.upper_bound and params.alpha > params.lower_bound:
        side = "upper"
        probed = params.dual()
    phi = make_test_function("necessity_bump", 1.0, params.n)
    cart = grid_spec.cartesian()
    tphi_cart = apply_spectral(K, sample(phi, cart))
    ratios = []
    for d in deltas:
        polar = _truncated_window(grid_spec, d).polar()
        tphi, _ = resample(tphi_cart, polar)
        num = weighted_mixed_norm(tphi, probed)
        den = weighted_mixed_norm(sample(phi, polar), probed)
        ratios.append(num / den)
    ratios = np.array(ratios)
    monotone = bool(np.all(np.diff(ratios) >= 0))
    flags = [] if monotone else ["non_monotone"]

    expected = -(probed.alpha + probed.n / probed.p) + 0.0
    last = deltas[-1]
    ref = np.argmin(np.abs(np.log10(deltas) - np.log10(10 * last)))
    change = abs(ratios[-1] - ratios[ref]) / ratios[-1]
    common = dict(
        side=side,
        probed={"n": probed.n, "p": probed.p, "p_tilde": probed.p_tilde, "alpha": probed.alpha},
        deltas=deltas.tolist(),
        ratios=ratios.tolist(),
        expected_exponent=expected,
        monotone=monotone,
        flags=flags,
    )
    if change < convergence_tol:
        return BlowupFit(verdict="converged", model=None, exponent=None, log_coefficient=None, r2=None, **common)

    L = np.log(1.0 / deltas)
    fits = _fit_models(L, ratios**probed.p)
    if fits["log"]["aic"] <= fits["power"]["aic"]:
        return BlowupFit(
            verdict="diverged",
            model="log",
            exponent=0.0,
            log_coefficient=float(fits["log"]["coef"][1]),
            r2=fits["log"]["r2"],
            **common,
        )
    return BlowupFit(
        verdict="diverged",
        model="power",
        exponent=fits["power"]["kappa"] / probed.p,
        log_coefficient=None,
        r2=fits["power"]["r2"],
        **common,
    )


# ---------------------------------------------------------------------------
# sweeps


@dataclass
class SweepConfig:
    n: int = 2
    p_values: list = field(default_factory=list)
    p_tilde_values: list = field(default_factory=list)
    alpha_values: list = field(default_factory=list)
    families: list = field(default_factory=lambda: ["gaussian_dilations", "annulus_bumps"])
    family_parameters: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    grid_preset: str = "default"
    operator: str = "riesz"
    output_dir: str = "sweep_out"
    delta_values: list = field(default_factory=lambda: list(np.logspace(-2, -4, 9)))
    lemma_delta: float = 1e-3
    lemma_M: float = 1e3
    refine_check: bool = False
    f_operator_rows: bool = False
    f_operator_grid: dict = field(default_factory=lambda: {"n_radial": 128, "n_angular": 64})
    stability_tol: float = 0.05
    convergence_tol: float = 0.01
    workers: int = 1

    DEFAULT_PARAMETERS = {
        "gaussian_dilations": [0.25, 1.0, 4.0],
        "annulus_bumps": [0.5, 2.0, 8.0],
        "necessity_bump": [1.0],
    }

    def __post_init__(self):
        if isinstance(self.families, str):
            self.families = [self.families]
        for fam in self.families:
            if fam not in FAMILIES:
                raise ConfigError(f"unknown family {fam!r}")
        if isinstance(self.family_parameters, (list, tuple)):
            self.family_parameters = {f: list(self.family_parameters) for f in self.families}
        for fam in self.families:
            self.family_parameters.setdefault(fam, list(self.DEFAULT_PARAMETERS[fam]))
            if any(not v > 0 for v in self.family_parameters[fam]):
                raise ConfigError("family parameters must be positive")
        for name in ("p_values", "p_tilde_values"):
            for v in getattr(self, name):
                if not (1 < v < math.inf):
                    raise ConfigError(f"{name} entries must lie in (1, inf), got {v}")
        if self.n not in (2, 3):
            raise ConfigError("n must be 2 or 3")

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        if "family" in data and "families" not in data:
            data["families"] = data.pop("family")
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path):
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc

    def grid_spec(self):
        base = grid_preset(self.grid_preset, self.n)
        if self.grid:
            base = GridSpec(**{**base.to_dict(), **self.grid, "n": self.n})
        return base


@dataclass
class RatioReport:
    """Rows and summaries for one ``(p, p_tilde, alpha)`` point."""

    n: int
    p: float
    p_tilde: float
    alpha: float
    admissible: bool
    rows: list = field(default_factory=list)
    ratio_max_lower: float | None = None
    ratio_max_refined: float | None = None
    grid_change: float | None = None
    blowup: dict | None = None
    lemma: dict | None = None
    f_operator: dict | None = None
    failures: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def to_dict(self):
        d = asdict(self)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["rows"] = [RatioRow(**r) for r in d.get("rows", [])]
        return cls(**d)


def _max_ratio(rows):
    vals = [r.ratio for r in rows if r.family != "necessity_bump"]
    return max(vals) if vals else None


def run_sweep(config):
    """Evaluate every parameter point of ``config``; deterministic, no randomness."""
    spec = config.grid_spec()
    K = kernel_by_label(config.operator, config.n)
    members = [make_test_function(f, v, config.n) for f in config.families for v in config.family_parameters[f]]
    cache = TransformCache()
    specs = [spec] + ([spec.refined()] if config.refine_check else [])
    cache.prefetch([(m, K, s.scaled(m.length_scale)) for s in specs for m in members], config.workers)
    provenance = {"grid": spec.to_dict(), "operator": K.label, "families": config.family_parameters}

    reports = []
    for p in config.p_values:
        for pt in config.p_tilde_values:
            for a in config.alpha_values:
                params = NormParams(p, pt, a, config.n)
                rep = RatioReport(config.n, p, pt, a, bool(params.admissible()), provenance=provenance)
                refined_rows = []
                for m in members:
                    try:
                        rep.rows.append(ratio_point(m, params, K, spec, cache))
                        if config.refine_check:
                            refined_rows.append(ratio_point(m, params, K, spec.refined(), cache))
                    except MixsioError as exc:
                        log.warning("row failed: %s %s: %s", m.family, m.parameter, exc)
                        rep.failures.append(f"{m.family}:{m.parameter}: {exc}")
                rep.ratio_max_lower = _max_ratio(rep.rows)
                if refined_rows:
                    rep.ratio_max_refined = _max_ratio(refined_rows)
                    if rep.ratio_max_lower:
                        rep.grid_change = abs(rep.ratio_max_refined - rep.ratio_max_lower) / rep.ratio_max_lower
                if not params.admissible():
                    try:
                        fit = blowup_probe(params, K, config.delta_values, spec, config.convergence_tol)
                        rep.blowup = fit.to_dict()
                    except MixsioError as exc:
                        rep.failures.append(f"blowup: {exc}")
                lemma = young_bound_constant(LemmaParams(config.n, p, a), config.lemma_delta, config.lemma_M)
                rep.lemma = lemma.to_dict()
                if config.f_operator_rows and params.admissible() and config.n == 2:
                    rep.f_operator = _f_operator_rows(members, params, spec, config, lemma)
                reports.append(rep)
    return reports


def _f_operator_rows(members, params, spec, config, lemma):
    fspec = GridSpec(**{**spec.to_dict(), **config.f_operator_grid})
    polar = fspec.polar()
    unweighted = NormParams(params.p, params.p_tilde, 0.0, params.n)
    envelope = lemma.B_extrapolated if lemma.B_extrapolated is not None else lemma.B
    rows = []
    for m in members:
        if m.family != "annulus_bumps":
            continue
        phi = sample(m, polar)
        out = apply_F(phi, params.alpha)
        ratio = mixed_norm(out, unweighted) / mixed_norm(phi, unweighted)
        rows.append({"param": m.parameter, "ratio": float(ratio)})
    worst = max((r["ratio"] for r in rows), default=0.0)
    return {"rows": rows, "ratio_max": worst, "young_B": envelope, "grid_constant": 1.0, "within_envelope": bool(worst <= envelope)}


# ---------------------------------------------------------------------------
# output


def rows_to_csv(reports):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for rep in reports:
        for row in rep.rows:
            writer.writerow(row.csv_fields())
    return buf.getvalue()


def reports_to_json(reports):
    return json.dumps([r.to_dict() for r in reports], indent=1, sort_keys=True, allow_nan=True)


def load_reports(path):
    return [RatioReport.from_dict(d) for d in json.loads(Path(path).read_text())]


def _tag(v):
    return f"{v:g}".replace("-", "m").replace(".", "p")


def emit_reports(reports, out_dir, fmt="csv", plot_data=False):
    """Write reports to ``out_dir``; returns the list of written paths.

    ``csv`` writes ``ratios.csv`` (one line per row) and ``summary.json``;
    ``json`` writes the full ``report.json``.  With ``plot_data`` two-column
    files go to ``out_dir/plot``: family parameter vs ratio, and
    ``1/delta`` vs truncated ratio for each blow-up probe.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if fmt == "csv":
        (out / "ratios.csv").write_text(rows_to_csv(reports))
        summary = [{k: v for k, v in r.to_dict().items() if k != "rows"} for r in reports]
        (out / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True))
        written += [out / "ratios.csv", out / "summary.json"]
    elif fmt == "json":
        (out / "report.json").write_text(reports_to_json(reports))
        written.append(out / "report.json")
    else:
        raise ConfigError(f"unknown format {fmt!r}")

    if plot_data:
        pdir = out / "plot"
        pdir.mkdir(exist_ok=True)
        for rep in reports:
            base = f"p{_tag(rep.p)}_pt{_tag(rep.p_tilde)}_a{_tag(rep.alpha)}"
            by_family = {}
            for row in rep.rows:
                by_family.setdefault(row.family, []).append((row.param, row.ratio))
            for fam, pts in by_family.items():
                path = pdir / f"ratio_{fam}_{base}.dat"
                np.savetxt(path, np.array(sorted(pts)), fmt="%.17g", header="param ratio")
                written.append(path)
            if rep.blowup:
                inv = 1.0 / np.asarray(rep.blowup["deltas"])
                order = np.argsort(inv)
                table = np.column_stack([inv[order], np.asarray(rep.blowup["ratios"])[order]])
                path = pdir / f"blowup_{base}.dat"
                np.savetxt(path, table, fmt="%.17g", header="inv_delta truncated_ratio (log-log)")
                written.append(path)
    return written
