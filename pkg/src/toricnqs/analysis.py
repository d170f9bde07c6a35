"""Field sweeps, derivative peaks and finite-size extrapolation."""

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .errors import BoundaryPeakError, InvalidArgument

CSV_COLUMNS = ("field", "mean", "stderr", "tau", "L", "observable")
X_GRID = np.round(np.arange(0.25, 3.0 + 1e-9, 0.05), 10)


@dataclass
class SweepTable:
    fields: np.ndarray
    means: np.ndarray
    stderrs: np.ndarray
    L: int
    observable: str
    taus: np.ndarray = None
    fixed: dict = field(default_factory=dict)

    def __post_init__(self):
        self.fields = np.asarray(self.fields, dtype=np.float64)
        self.means = np.asarray(self.means, dtype=np.float64)
        self.stderrs = np.asarray(self.stderrs, dtype=np.float64)
        if self.taus is None:
            self.taus = np.zeros_like(self.fields)
        n = self.fields.size
        if not (self.means.size == self.stderrs.size == self.taus.size == n):
            raise InvalidArgument("sweep columns have different lengths")
        if n < 3:
            raise InvalidArgument("a sweep needs at least 3 points")
        if np.any(np.diff(self.fields) <= 0):
            raise InvalidArgument("sweep fields must be strictly increasing")


def write_sweep_csv(path, tables):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for t in tables:
            for x, m, e, tau in zip(t.fields, t.means, t.stderrs, t.taus):
                writer.writerow([repr(float(x)), repr(float(m)), repr(float(e)), repr(float(tau)), t.L, t.observable])


def read_sweep_csv(path):
    """Return one ``SweepTable`` per ``(L, observable)`` pair, in file order."""
    groups = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(CSV_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise InvalidArgument(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            key = (int(row["L"]), row["observable"])
            groups.setdefault(key, []).append(
                (float(row["field"]), float(row["mean"]), float(row["stderr"]), float(row["tau"]))
            )
    tables = []
    for (L, obs), rows in groups.items():
        rows.sort()
        x, m, e, tau = map(np.array, zip(*rows))
        tables.append(SweepTable(x, m, e, L, obs, tau))
    return tables


def derivative_matrix(x):
    """Linear map ``D`` with ``D @ y == np.gradient(y, x)``."""
    n = len(x)
    return np.array([np.gradient(np.eye(n)[:, j], x) for j in range(n)]).T


def _vertex(x3, y3):
    a, b, _ = np.polyfit(x3, y3, 2)
    if a == 0:
        return x3[1]
    return -b / (2.0 * a)


def peak_from_sweep(table, mode="max"):
    """Location of the extremum of ``d(observable)/d(field)`` with its error.

    ``mode`` picks the maximum (``'max'``), minimum (``'min'``) or largest
    magnitude (``'abs'``) of the derivative. The extremum is refined by a
    parabola through the extreme grid point and its two neighbours; errors on
    the observable are propagated linearly.
    """
    if table.fields.size < 5:
        raise InvalidArgument("peak finding needs at least 5 sweep points")
    x, y = table.fields, table.means
    D = derivative_matrix(x)
    d = D @ y
    score = {"max": d, "min": -d, "abs": np.abs(d)}.get(mode)
    if score is None:
        raise InvalidArgument(f"mode must be 'max', 'min' or 'abs', got {mode!r}")
    k = int(np.argmax(score))
    if k == 0 or k == len(x) - 1:
        raise BoundaryPeakError(
            f"derivative extremum at the sweep boundary (field={x[k]:g}); widen the sweep range"
        )
    idx = [k - 1, k, k + 1]
    x3 = x[idx]
    peak = _vertex(x3, d[idx])
    # d peak / d y_j via the chain rule through the three derivative values
    J3 = np.empty(3)
    scale = max(np.max(np.abs(d[idx])), 1e-300)
    for i in range(3):
        step = 1e-6 * scale
        dp = d[idx].copy()
        dm = d[idx].copy()
        dp[i] += step
        dm[i] -= step
        J3[i] = (_vertex(x3, dp) - _vertex(x3, dm)) / (2 * step)
    J = J3 @ D[idx]
    err = float(np.sqrt(np.sum((J * table.stderrs) ** 2)))
    return float(peak), err


@dataclass
class ExtrapolationFit:
    h_crit: float
    b: float
    x: float
    covariance: np.ndarray
    points: list
    chi2: float
    converged: bool = True
    fixed_exponent: float = None

    @property
    def h_crit_err(self):
        return float(np.sqrt(max(self.covariance[0, 0], 0.0)))


def _linear_fit(Ls, h, w, x):
    A = np.stack([np.ones_like(Ls), Ls ** (-x)], axis=1)
    Aw = A * w[:, None]
    coef, *_ = np.linalg.lstsq(Aw, h * w, rcond=None)
    r = Aw @ coef - h * w
    return coef, float(r @ r), Aw


def power_law_extrapolate(points, fixed_exponent=None):
    """Weighted fit of ``h_peak(L) = h_crit + b L^(-x)``.

    ``points`` is a sequence of ``(L, h_peak, error)``. With a free exponent
    at least three sizes are required: ``x`` is scanned over ``[0.25, 3]`` and
    the best candidate polished by nonlinear least squares. With
    ``fixed_exponent`` the fit is linear and two sizes suffice.
    """
    pts = sorted((float(L), float(h), float(e)) for L, h, e in points)
    Ls, h, err = (np.array(c) for c in zip(*pts)) if pts else (np.array([]),) * 3
    n_sizes = len(set(Ls.tolist()))
    if np.any(err <= 0):
        raise InvalidArgument("point errors must be positive")
    w = 1.0 / err
    if fixed_exponent is not None:
        if n_sizes < 2:
            raise InvalidArgument("a fixed-exponent fit needs at least 2 sizes")
        coef, chi2, Aw = _linear_fit(Ls, h, w, fixed_exponent)
        cov2 = np.linalg.pinv(Aw.T @ Aw)
        cov = np.zeros((3, 3))
        cov[:2, :2] = cov2
        return ExtrapolationFit(coef[0], coef[1], float(fixed_exponent), cov, pts, chi2, True, fixed_exponent)
    if n_sizes < 3:
        raise InvalidArgument(f"power-law extrapolation needs >= 3 distinct sizes, got {n_sizes}")

    scan = [(_linear_fit(Ls, h, w, x)[1], x) for x in X_GRID]
    chi2_0, x0 = min(scan)
    coef0, _, _ = _linear_fit(Ls, h, w, x0)
    p0 = np.array([coef0[0], coef0[1], x0])

    def resid(p):
        return (p[0] + p[1] * Ls ** (-p[2]) - h) * w

    converged = True
    try:
        sol = scipy.optimize.least_squares(resid, p0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=20000)
        p, chi2 = sol.x, float(np.sum(sol.fun**2))
        if not np.all(np.isfinite(p)) or chi2 > chi2_0 or not sol.success:
            raise RuntimeError
        J = sol.jac
    except (RuntimeError, ValueError, np.linalg.LinAlgError):
        converged = False
        p, chi2 = p0, chi2_0
        J = scipy.optimize.approx_fprime(p0, resid, 1e-8)
    cov = np.linalg.pinv(J.T @ J)
    return ExtrapolationFit(float(p[0]), float(p[1]), float(p[2]), cov, pts, chi2, converged)
