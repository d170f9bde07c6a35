"""Stochastic reconfiguration in real parameter coordinates.

With ``O`` the per-sample log-gradient (columns = real coordinates, complex
entries), ``S = <O^H O> - <O>^H <O>`` and ``F = <O^* E_loc> - <O^*><E_loc>``.
``dE/dx = 2 Re F``, and the update solves ``(Re S + d) dx = -gamma Re F`` with
an SVD pseudoinverse.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InvalidArgument, SRSolveError
from .stats import weighted_mean


@dataclass(frozen=True)
class SRConfig:
    learning_rate: float = 7e-3
    diag_shift: float = 5e-5
    svd_cutoff: float = 1e-10
    max_iterations: int = 2000

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise InvalidArgument("learning_rate must be positive")
        if self.diag_shift < 0:
            raise InvalidArgument("diag_shift must be non-negative")
        if not 0 <= self.svd_cutoff < 1:
            raise InvalidArgument("svd_cutoff must lie in [0, 1)")


@dataclass
class SRQuantities:
    S: np.ndarray
    F: np.ndarray
    energy: complex
    free: np.ndarray
    n_coordinates: int


@dataclass
class SRStep:
    delta: np.ndarray
    sv_min: float
    sv_max: float
    n_retained: int
    force_norm: float


def estimate_sr_quantities(log_gradients, local_energies, freeze_mask=None, weights=None):
    """Centered covariance ``S`` and force ``F`` over the unfrozen coordinates.

    ``freeze_mask`` is True for coordinates held fixed. ``weights`` (summing
    to one) replace the uniform batch average for exhaustive enumeration.
    """
    O = np.asarray(log_gradients)
    E = np.asarray(local_energies)
    if O.ndim != 2 or O.shape[0] == 0:
        raise InvalidArgument("empty batch")
    if E.shape[0] != O.shape[0]:
        raise InvalidArgument("gradients and local energies are not aligned")
    P = O.shape[1]
    if freeze_mask is None:
        free = np.arange(P)
    else:
        freeze_mask = np.asarray(freeze_mask, dtype=bool)
        if freeze_mask.size != P:
            raise InvalidArgument(f"freeze mask has length {freeze_mask.size}, expected {P}")
        free = np.flatnonzero(~freeze_mask)
    O = O[:, free]
    Obar = weighted_mean(O, weights)
    Ebar = weighted_mean(E, weights)
    Oc = O - Obar
    Ec = E - Ebar
    w = np.full(O.shape[0], 1.0 / O.shape[0]) if weights is None else np.asarray(weights)
    F = (Oc.conj() * w[:, None]).T @ Ec
    if np.iscomplexobj(Oc):
        # Hermitian S from real products: symmetric real part, antisymmetric imaginary part
        a, b = np.ascontiguousarray(Oc.real), np.ascontiguousarray(Oc.imag)
        aw, bw = a * w[:, None], b * w[:, None]
        S = (aw.T @ a + bw.T @ b) + 1j * (aw.T @ b - bw.T @ a)
    else:
        S = (Oc * w[:, None]).T @ Oc
    S = 0.5 * (S + S.conj().T)
    return SRQuantities(S, F, complex(Ebar), free, P)


def sr_update(q, config):
    """Parameter increment over all coordinates (zero on frozen ones)."""
    A = np.real(q.S) + config.diag_shift * np.eye(q.S.shape[0])
    f = np.real(q.F)
    delta = np.zeros(q.n_coordinates)
    if A.size == 0:
        return SRStep(delta, 0.0, 0.0, 0, 0.0)
    if not np.all(np.isfinite(A)) or not np.all(np.isfinite(f)):
        raise SRSolveError("S or F contains non-finite entries", (np.nan, np.nan))
    try:
        U, sv, Vt = scipy.linalg.svd(A, lapack_driver="gesdd")
    except (np.linalg.LinAlgError, ValueError):
        try:
            U, sv, Vt = scipy.linalg.svd(A, lapack_driver="gesvd")
        except (np.linalg.LinAlgError, ValueError) as exc:
            d = np.abs(np.diag(A))
            raise SRSolveError(
                f"SVD of S failed ({exc}); diagonal spans {d.min():.3g}..{d.max():.3g}",
                (float(d.min()), float(d.max())),
            ) from exc
    keep = sv > config.svd_cutoff * sv[0] if sv[0] > 0 else np.zeros_like(sv, dtype=bool)
    inv = np.zeros_like(sv)
    inv[keep] = 1.0 / sv[keep]
    step = -config.learning_rate * (Vt.T @ (inv * (U.T @ f)))
    delta[q.free] = step
    retained = sv[keep]
    return SRStep(
        delta,
        float(retained.min()) if retained.size else 0.0,
        float(sv[0]),
        int(keep.sum()),
        float(np.linalg.norm(q.F)),
    )
