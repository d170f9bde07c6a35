import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from toricnqs import BoundaryPeakError, InvalidArgument
from toricnqs.analysis import (
    X_GRID,
    SweepTable,
    _linear_fit,
    derivative_matrix,
    peak_from_sweep,
    power_law_extrapolate,
    read_sweep_csv,
    write_sweep_csv,
)

GRID = np.round(np.arange(0.1, 1.0 + 1e-9, 0.05), 10)


def table(x, y, err=None, L=3, obs="o"):
    err = np.full(len(x), 1e-3) if err is None else err
    return SweepTable(x, y, err, L, obs)


def test_cubic_observable_gives_exact_vertex():
    # y' = -(x - 0.53)^2 is quadratic, so central differences are exact on it
    x = GRID
    y = -((x - 0.53) ** 3) / 3
    peak, _ = peak_from_sweep(table(x, y))
    assert peak == pytest.approx(0.53, abs=1e-12)


def test_nonuniform_derivative_exact_on_quadratics():
    x = np.array([0.1, 0.15, 0.22, 0.3, 0.35, 0.41, 0.5, 0.62])
    y = 3 * x**2 - x + 2
    d = derivative_matrix(x) @ y
    np.testing.assert_allclose(d[1:-1], (6 * x - 1)[1:-1], atol=1e-12)
    peak, _ = peak_from_sweep(table(x, 2 * x - (x - 0.37) ** 3))
    assert peak == pytest.approx(0.37, abs=1e-2)


def test_tent_derivative_symmetric():
    x = GRID
    d = 1 - np.abs(x - 0.55)
    y = np.concatenate([[0], np.cumsum(0.5 * (d[1:] + d[:-1]) * np.diff(x))])
    assert peak_from_sweep(table(x, y))[0] == pytest.approx(0.55, abs=1e-9)


def test_modes():
    x = GRID
    y = -np.tanh((x - 0.5) / 0.1)
    with pytest.raises(BoundaryPeakError):
        peak_from_sweep(table(x, y), "max")
    assert peak_from_sweep(table(x, y), "min")[0] == pytest.approx(0.5, abs=2e-3)
    assert peak_from_sweep(table(x, y), "abs")[0] == pytest.approx(0.5, abs=2e-3)
    with pytest.raises(InvalidArgument):
        peak_from_sweep(table(x, y), "median")


def test_logistic_peak_coverage():
    rng = np.random.default_rng(0)
    hits = 0
    for _ in range(100):
        h0 = rng.uniform(0.4, 0.7)
        y = 1 / (1 + np.exp(-(GRID - h0) / 0.1)) + 1e-3 * rng.standard_normal(GRID.size)
        peak, err = peak_from_sweep(table(GRID, y))
        assert err > 0
        hits += abs(peak - h0) <= 2 * err
    assert hits >= 90


@settings(max_examples=30, deadline=None)
@given(st.floats(-10, 10))
def test_peak_shift_equivariant(c):
    y = np.tanh((GRID - 0.45) / 0.12)
    a = peak_from_sweep(table(GRID, y))
    b = peak_from_sweep(table(GRID, y + c))
    assert b[0] == pytest.approx(a[0], abs=1e-9)
    assert b[1] == pytest.approx(a[1], rel=1e-6)


def test_boundary_peak():
    with pytest.raises(BoundaryPeakError, match="widen"):
        peak_from_sweep(table(GRID, GRID**3))


def test_table_validation():
    with pytest.raises(InvalidArgument):
        SweepTable([0.1, 0.2], [1, 2], [0, 0], 2, "o")
    with pytest.raises(InvalidArgument):
        SweepTable([0.1, 0.3, 0.2], [1, 2, 3], [0, 0, 0], 2, "o")
    with pytest.raises(InvalidArgument):
        SweepTable([0.1, 0.2, 0.3], [1, 2], [0, 0, 0], 2, "o")
    with pytest.raises(InvalidArgument):
        peak_from_sweep(table([0.1, 0.2, 0.3, 0.4], [0, 1, 3, 4]))


def test_power_law_recovery():
    Ls = [4, 6, 8, 10]
    pts = [(L, 0.34 + 0.5 * L**-1.2, 1e-3) for L in Ls]
    fit = power_law_extrapolate(pts)
    assert fit.converged
    assert fit.h_crit == pytest.approx(0.34, abs=1e-6)
    assert fit.b == pytest.approx(0.5, abs=1e-6)
    assert fit.x == pytest.approx(1.2, abs=1e-6)
    assert fit.chi2 < 1e-12
    assert fit.h_crit_err >= 0


def test_power_law_order_invariant():
    rng = np.random.default_rng(3)
    pts = [(L, 0.3 + 0.4 * L**-1.5 + 1e-3 * rng.standard_normal(), 1e-3) for L in (3, 4, 6, 8, 12)]
    a = power_law_extrapolate(pts)
    b = power_law_extrapolate(pts[::-1])
    assert (a.h_crit, a.b, a.x) == pytest.approx((b.h_crit, b.b, b.x), rel=1e-12)


def test_polished_fit_beats_every_scan_point():
    rng = np.random.default_rng(5)
    pts = [(L, 0.3 + 0.4 * L**-0.9 + 2e-3 * rng.standard_normal(), 2e-3) for L in (3, 4, 5, 6)]
    fit = power_law_extrapolate(pts)
    Ls, h, e = (np.array(c, dtype=float) for c in zip(*pts))
    scan = min(_linear_fit(Ls, h, 1 / e, x)[1] for x in X_GRID)
    assert fit.chi2 <= scan + 1e-12


def test_flat_data():
    rng = np.random.default_rng(2)
    h = 0.4 + 1e-3 * rng.standard_normal(4)
    fit = power_law_extrapolate([(L, v, 1e-3) for L, v in zip((4, 6, 8, 10), h)], fixed_exponent=1.0)
    assert fit.h_crit == pytest.approx(h.mean(), abs=3e-3)
    assert np.isfinite(fit.h_crit_err)
    fit = power_law_extrapolate([(L, 0.4, 1e-3) for L in (4, 6, 8)])
    assert fit.h_crit == pytest.approx(0.4, abs=1e-9)
    assert fit.b == pytest.approx(0.0, abs=1e-9)


def test_fixed_exponent_two_sizes():
    fit = power_law_extrapolate([(2, 0.5, 1.0), (3, 0.44, 1.0)], fixed_exponent=1.0)
    # h = hc + b/L through both points
    assert fit.b == pytest.approx(0.36)
    assert fit.h_crit == pytest.approx(0.32)
    assert fit.fixed_exponent == 1.0


def test_extrapolation_errors():
    with pytest.raises(InvalidArgument):
        power_law_extrapolate([(2, 0.5, 1e-3), (3, 0.4, 1e-3)])
    with pytest.raises(InvalidArgument):
        power_law_extrapolate([(2, 0.5, 1e-3), (3, 0.4, 0.0), (4, 0.3, 1e-3)])
    with pytest.raises(InvalidArgument):
        power_law_extrapolate([(2, 0.5, 1e-3)], fixed_exponent=1.0)


def test_csv_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    tabs = [SweepTable(GRID, rng.standard_normal(GRID.size), rng.random(GRID.size), L, obs, rng.random(GRID.size))
            for L in (2, 3) for obs in ("bffm_primal_4", "renyi2_central")]
    path = tmp_path / "s.csv"
    write_sweep_csv(path, tabs)
    back = read_sweep_csv(path)
    assert [(t.L, t.observable) for t in back] == [(t.L, t.observable) for t in tabs]
    for a, b in zip(tabs, back):
        for f in ("fields", "means", "stderrs", "taus"):
            np.testing.assert_array_equal(getattr(a, f), getattr(b, f))
    assert path.read_text().splitlines()[0] == "field,mean,stderr,tau,L,observable"


def test_csv_missing_columns(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("field,mean\n0.1,1\n")
    with pytest.raises(InvalidArgument, match="missing columns"):
        read_sweep_csv(p)
