"""Chain statistics: integrated autocorrelation time, split-R-hat, error bars.

``tau`` is normalized as ``sum_{t>=1} rho(t)``, so an i.i.d. series has
``tau = 0`` and an AR(1) series with coefficient ``rho`` has
``tau = rho / (1 - rho)``. The variance of a chain mean is
``var / n * (1 + 2 tau)``.
"""

import numpy as np


def autocorrelation(x):
    """Normalized autocorrelation ``rho(t)`` of a 1-D series via FFT."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    x = x - x.mean()
    size = 1 << int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(x, size)
    acf = np.fft.irfft(f * np.conj(f), size)[:n]
    if acf[0] <= 0:
        return np.zeros(n)
    return acf / acf[0]


def integrated_time(series, c=5.0):
    """``(tau, degenerate)`` for one series or a ``(chains, T)`` array.

    Autocorrelations are averaged over chains and summed up to the first window
    ``M`` with ``M >= c (1 + 2 tau(M))``. A zero-variance input returns
    ``(0.0, True)``.
    """
    x = np.atleast_2d(np.asarray(series, dtype=np.float64))
    if x.shape[1] < 2 or np.all(np.var(x, axis=1) == 0):
        return 0.0, True
    rho = np.mean([autocorrelation(row) for row in x if np.var(row) > 0], axis=0)
    cumulative = np.cumsum(rho[1:])
    tau = cumulative[-1] if cumulative.size else 0.0
    for M in range(1, rho.size):
        if M >= c * (1.0 + 2.0 * cumulative[M - 1]):
            tau = cumulative[M - 1]
            break
    return max(float(tau), 0.0), False


def split_rhat(chains):
    """Classic split-R-hat for a ``(chains, T)`` array (``T >= 4``)."""
    x = np.asarray(chains, dtype=np.float64)
    half = x.shape[1] // 2
    if half < 2:
        return np.nan
    parts = np.concatenate([x[:, :half], x[:, -half:]], axis=0)
    n = half
    means = parts.mean(axis=1)
    W = parts.var(axis=1, ddof=1).mean()
    B = n * means.var(ddof=1)
    if W == 0:
        return 1.0 if B == 0 else np.inf
    var_plus = (n - 1) / n * W + B / n
    return float(np.sqrt(var_plus / W))


def weighted_mean(values, weights=None):
    if weights is None:
        return np.mean(values, axis=0)
    return np.tensordot(weights, values, axes=(0, 0))


def mean_and_error(values, n_chains=1, weights=None):
    """Mean, tau-corrected standard error and ``tau`` of per-sample values.

    Samples are ordered chain-major (``n_chains`` blocks of equal length).
    With ``weights`` (exhaustive enumeration) the mean is exact and the error 0.
    """
    values = np.asarray(values)
    if values.size == 0:
        raise ValueError("no samples")
    if weights is not None:
        return weighted_mean(values, weights), 0.0, 0.0
    mean = values.mean()
    n = values.size
    if n < 2:
        return mean, 0.0, 0.0
    series = values.reshape(n_chains, -1) if n % n_chains == 0 else values[None, :]
    taus = []
    for part in (np.real(series), np.imag(series)):
        if np.any(part != part[:, :1]):
            taus.append(integrated_time(part)[0])
    tau = max(taus) if taus else 0.0
    var = np.var(np.real(values)) + np.var(np.imag(values))
    return mean, float(np.sqrt(var / n * (1.0 + 2.0 * tau))), tau
