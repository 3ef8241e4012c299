import math

import numpy as np
import pytest

import spectracontrol as sc


def line(points=128, period=16.0, value_dim=1):
    return sc.GridSpec(dim=1, points=points, period=period, value_dim=value_dim)


def test_grid_and_validation():
    g = line()
    assert g.cells == 128
    assert g.nyquist == pytest.approx(math.pi * 8)
    with pytest.raises(sc.ValidationError):
        sc.GridSpec(dim=1, points=100, period=1.0)
    assert sc.GridSpec.parse("1:128:16:1") == g


def test_field_roundtrip_and_parseval():
    g = line()
    x = np.arange(128) * g.cell_width
    samples = np.exp(1j * 2 * math.pi * 3 * x / 16.0)[:, None]
    f = sc.SpectralField.from_values(g, samples)
    assert f.values.shape == (128, 1)
    np.testing.assert_allclose(f.values, samples, atol=1e-13)
    assert sc.lp_norm(f, 2.0) == pytest.approx(4.0)  # sqrt(Q)
    c = f.coefficients[:, 0]
    assert abs(c[3]) == pytest.approx(16.0)
    assert np.count_nonzero(np.abs(c) > 1e-9) == 1


def test_heat_symbol_and_sector():
    rep = sc.check_normal_ellipticity(sc.OperatorSymbol.heat(1))
    assert rep["pass"]
    assert 1.404 <= rep["kappa"] <= 1.43
    k = math.sqrt(2)
    assert sc.derived_sector(k) == (2 * k + 1, math.pi - math.atan(2 * k), -1 / (2 * k))
    transport = sc.OperatorSymbol(1, 1, 1, [([1], np.array([[1j]]))])
    assert not sc.check_normal_ellipticity(transport)["pass"]


def test_heat_mode_decay_and_duality():
    g = line()
    heat = sc.OperatorSymbol.heat(1)
    x = np.arange(128) * g.cell_width
    xi = 2 * math.pi * 2 / 16.0
    f = sc.SpectralField.from_values(g, np.cos(xi * x)[:, None])
    out = sc.apply_propagator(heat, f, 0.5)
    np.testing.assert_allclose(out.values, f.values * math.exp(-0.5 * xi * xi), atol=1e-13)
    a, b = sc.white_noise(g, 1), sc.white_noise(g, 2)
    lhs = sc.bilinear_pairing(sc.adjoint_propagator(heat, a, 0.3), b)
    rhs = sc.bilinear_pairing(a, sc.apply_propagator(heat, b, 0.3))
    assert abs(lhs - rhs) <= 1e-10 * abs(rhs)


def test_stripes_and_ls_ratio():
    g = line()
    E = sc.make_stripes(g, 1.0, 2.0)
    assert E.rho == pytest.approx(0.5)
    assert E.indicator.sum() == 64
    const = sc.SpectralField.from_values(g, np.full((128, 1), 1 + 0j)).with_band([4.0])
    assert sc.ls_ratio(const, E) == pytest.approx(math.sqrt(0.5), abs=1e-12)


def test_bernstein_sharp():
    f = sc.random_band_limited(line(), [4.0], 3)
    b = sc.bernstein_check(f, [1])
    assert b["holds"]
    assert b["lhs"] <= b["sharp_rhs"] * (1 + 1e-10)
    assert sc.compute_C2() == pytest.approx(0.766726525843, rel=1e-9)


def test_dissipation_closed_form():
    d = sc.dissipation_probe(sc.OperatorSymbol.heat(1), line(256), [4.0, 8.0], [0.0, 0.5, 1.0], ensemble=8)
    for t, lam, est, exact in d["rows"]:
        assert max(est, exact) <= math.exp(-t * lam * lam / 4) * (1 + 1e-8)


def test_null_control():
    g = line(256)
    E = sc.make_stripes(g, 1.0, 2.0)
    out = sc.synthesize_control(sc.OperatorSymbol.heat(1), sc.white_noise(g, 7), E)
    assert out["success"]
    assert out["relative"] <= 1e-6
    assert math.isfinite(out["cost"])
    mask = E.indicator.astype(bool)
    for u in out["controls"]:
        assert np.all(u.values[~mask] == 0)


def test_observability_and_empty_set():
    g = line(256)
    E = sc.make_stripes(g, 1.0, 2.0)
    c_obs, bounded = sc.observability_probe(sc.OperatorSymbol.heat(1), E, 0.5)
    assert bounded and c_obs >= 1.0
    empty = sc.ThickSet(g, np.zeros(256, dtype=np.uint8))
    assert empty.rho is None
    with pytest.raises(sc.StageFailure):
        sc.synthesize_control(sc.OperatorSymbol.heat(1), sc.white_noise(g, 7), empty)
    with pytest.raises(sc.ValidationError):
        empty.certified([2.0])
