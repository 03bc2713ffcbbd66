import json
import math

import numpy as np
import pytest

from mixsio import NormParams, apply_pv_direct, grid_preset, riesz, spectral_eval, sample
from mixsio.errors import ConfigError, InvalidRangeError, MixsioError
from mixsio.sweep import (
    CSV_HEADER,
    RatioRow,
    SweepConfig,
    TransformCache,
    blowup_probe,
    emit_reports,
    load_reports,
    make_test_function,
    ratio_point,
    rows_to_csv,
    run_sweep,
)

from oracles import NECESSITY_T_AT_ORIGIN

E1 = riesz(np.array([1.0, 0.0]))
SPEC = grid_preset("default", 2)
DELTAS = np.logspace(-2, -4, 9)


@pytest.fixture(scope="module")
def cache():
    return TransformCache()


def test_family_values():
    bump = make_test_function("necessity_bump", 1.0)
    assert bump(np.zeros(2)) == 0.0
    assert bump(np.array([2.0, 0.0])) == 1.0
    g = make_test_function("gaussian_dilations", 1.0)
    assert g(np.array([0.6, 0.8])) == pytest.approx(math.exp(-1), rel=1e-15)
    ann = make_test_function("annulus_bumps", 3.0, 3)
    x = np.array([[0.5, 0, 0], [1.5, 0, 0], [0, 1.5, 0], [2.5, 0, 0]])
    v = ann(x)
    assert v[0] == v[3] == 0 and v[1] == 1.0 and 0 < v[2] < v[1]


@pytest.mark.parametrize("family,param", [("sinc", 1.0), ("gaussian_dilations", 0.0), ("annulus_bumps", -1.0)])
def test_family_errors(family, param):
    with pytest.raises(ConfigError):
        make_test_function(family, param)


def test_necessity_transform_nonzero_at_origin():
    bump = make_test_function("necessity_bump", 1.0)
    vals = [apply_pv_direct(E1, bump, [[0.0, 0.0]], 1e-3, 4.0, quad_resolution=q)[0] for q in (256, 512)]
    assert abs(vals[1] - vals[0]) < 1e-3 * abs(vals[1])
    assert vals[1] == pytest.approx(NECESSITY_T_AT_ORIGIN, rel=1e-3)
    spec_val = spectral_eval(E1, sample(bump, SPEC.cartesian()), [[0.0, 0.0]])[0]
    assert spec_val == pytest.approx(NECESSITY_T_AT_ORIGIN, rel=1e-2)


def test_plancherel_ratio(cache):
    row = ratio_point(make_test_function("gaussian_dilations", 1.0), NormParams(2, 2, 0.0), E1, SPEC, cache)
    # radial data keep exactly half their energy; the window [rho_min, rho_max]
    # then loses the |x|^-2 tail of T phi, so the ratio sits a little below 2^-1/2
    assert 0.69 < row.ratio <= 2**-0.5
    assert row.ratio == row.numerator / row.denominator and row.flags == []


@pytest.mark.parametrize("p,pt,alpha", [(2, 2, 0.0), (3, 1.5, 0.5), (1.5, 4, -0.5)])
def test_dilation_invariance(cache, p, pt, alpha):
    prm = NormParams(p, pt, alpha)
    ratios = [ratio_point(make_test_function("gaussian_dilations", lam), prm, E1, SPEC, cache).ratio for lam in (0.25, 1, 4)]
    assert max(ratios) - min(ratios) < 1e-3 * max(ratios)


def test_admissible_point_grid_stable(cache):
    prm = NormParams(2, 4, 0.5)
    members = [make_test_function(f, v) for f in ("gaussian_dilations", "annulus_bumps") for v in (0.25, 1, 4)]
    base = max(ratio_point(m, prm, E1, SPEC, cache).ratio for m in members)
    fine = max(ratio_point(m, prm, E1, SPEC.refined(), cache).ratio for m in members)
    assert math.isfinite(base) and abs(fine - base) / base < 0.05


def test_zero_denominator():
    # the window [delta, rho_max] of a necessity row never reaches the support when rho_max < 1.5
    spec = SPEC.with_window(rho_max=1.0)
    with pytest.raises(MixsioError):
        ratio_point(make_test_function("necessity_bump", 1e-2), NormParams(2, 2), E1, spec)


@pytest.fixture(scope="module")
def probes():
    out = {}
    for alpha in (-1.25, -1.0, -0.5, 1.0, 1.25):
        out[alpha] = blowup_probe(NormParams(2, 2, alpha), E1, DELTAS, SPEC)
    return out


def test_blowup_power(probes):
    fit = probes[-1.25]
    assert fit.verdict == "diverged" and fit.model == "power"
    assert fit.expected_exponent == pytest.approx(0.25)
    assert fit.exponent == pytest.approx(0.25, rel=0.05)
    assert fit.monotone


def test_blowup_log(probes):
    fit = probes[-1.0]
    assert fit.verdict == "diverged" and fit.model == "log"
    assert fit.log_coefficient > 0


def test_blowup_control_converges(probes):
    fit = probes[-0.5]
    assert fit.verdict == "converged" and fit.side == "lower"
    assert abs(fit.ratios[-1] - fit.ratios[-5]) < 0.01 * fit.ratios[-1]


@pytest.mark.parametrize("upper,lower", [(1.25, -1.25), (1.0, -1.0)])
def test_blowup_upper_reflection(probes, upper, lower):
    up, lo = probes[upper], probes[lower]
    assert up.side == "upper" and up.probed["alpha"] == lower
    assert (up.model, up.exponent) == (lo.model, lo.exponent)


def test_blowup_insufficient_decades():
    with pytest.raises(InvalidRangeError):
        blowup_probe(NormParams(2, 2, -1.25), E1, [1e-2, 5e-3, 2e-4], SPEC)


def test_empty_sweep():
    assert run_sweep(SweepConfig()) == []
    assert rows_to_csv([]) == ",".join(CSV_HEADER) + "\n"


def test_single_point_sweep_matches_direct():
    cfg = SweepConfig(p_values=[2.0], p_tilde_values=[4.0], alpha_values=[0.5], families=["annulus_bumps"],
                      family_parameters=[2.0])
    (rep,) = run_sweep(cfg)
    direct = ratio_point(make_test_function("annulus_bumps", 2.0), NormParams(2, 4, 0.5), E1, SPEC)
    assert rep.rows == [direct]
    assert rep.admissible and rep.ratio_max_lower == direct.ratio
    assert rep.lemma["verdict"] == "converged" and rep.blowup is None


def test_config_validation(tmp_path):
    with pytest.raises(ConfigError):
        SweepConfig.from_dict({"p_values": [2], "colour": "red"})
    with pytest.raises(ConfigError):
        SweepConfig(p_values=[1.0])
    with pytest.raises(ConfigError):
        SweepConfig(families=["sinc"])
    with pytest.raises(ConfigError):
        SweepConfig(family_parameters=[0.0, 1.0])
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        SweepConfig.from_json(bad)


@pytest.fixture(scope="module")
def small_reports():
    cfg = SweepConfig(p_values=[2.0], p_tilde_values=[2.0], alpha_values=[0.5, -1.25],
                      family_parameters={"gaussian_dilations": [1.0, 1 / 3], "annulus_bumps": [2.0]},
                      f_operator_rows=True)
    return run_sweep(cfg)


def test_sweep_contents(small_reports):
    ok, outside = small_reports
    assert ok.admissible and not outside.admissible
    assert len(ok.rows) == 3 and not ok.failures
    assert outside.blowup["model"] == "power" and all("inadmissible" in r.flags for r in outside.rows)
    assert outside.lemma["verdict"] == "diverged" and outside.lemma["divergent_piece"] == "I"
    env = ok.f_operator
    assert env["within_envelope"] and 0 < env["ratio_max"] <= env["grid_constant"] * env["young_B"]


def test_json_round_trip(tmp_path, small_reports):
    (path,) = emit_reports(small_reports, tmp_path, "json")
    back = load_reports(path)
    assert [r.to_dict() for r in back] == [r.to_dict() for r in small_reports]
    row = back[0].rows[1]
    assert isinstance(row, RatioRow) and row.param == 1 / 3 and row.ratio == row.numerator / row.denominator


def test_csv_and_plot_files(tmp_path, small_reports):
    paths = emit_reports(small_reports, tmp_path, "csv", plot_data=True)
    lines = (tmp_path / "ratios.csv").read_text().splitlines()
    assert lines[0] == "n,p,p_tilde,alpha,family,param,numerator,denominator,ratio,flags"
    assert len(lines) == 1 + 6
    fields = lines[1].split(",")
    assert float(fields[8]) == float(fields[6]) / float(fields[7])
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert [s["alpha"] for s in summary] == [0.5, -1.25]
    blow = [p for p in paths if p.name.startswith("blowup_")]
    assert len(blow) == 1
    table = np.loadtxt(blow[0])
    assert np.all(np.diff(table[:, 0]) > 0) and np.all(np.diff(table[:, 1]) > 0)
    with pytest.raises(ConfigError):
        emit_reports(small_reports, tmp_path, "xml")


def test_sweep_deterministic(small_reports):
    cfg = SweepConfig(p_values=[2.0], p_tilde_values=[2.0], alpha_values=[0.5, -1.25],
                      family_parameters={"gaussian_dilations": [1.0, 1 / 3], "annulus_bumps": [2.0]},
                      f_operator_rows=True, workers=2)
    assert rows_to_csv(run_sweep(cfg)) == rows_to_csv(small_reports)


def test_three_dimensional_smoke():
    cfg = SweepConfig(n=3, p_values=[2.0], p_tilde_values=[2.0], alpha_values=[0.0],
                      family_parameters={"gaussian_dilations": [1.0], "annulus_bumps": [2.0]},
                      grid={"n_cartesian": 64, "half_extent": 6.0, "n_radial": 128, "n_angular": 8})
    (rep,) = run_sweep(cfg)
    assert not rep.failures
    assert all(0 < r.ratio <= 1 + 1e-2 for r in rep.rows)
