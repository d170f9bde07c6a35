"""Mixed-field toric code in the Z eigenbasis.

    H = -sum_v A_v - sum_p B_p - sum_i (hx X_i + hy Y_i + hz Z_i)

Conventions: ``Z|s> = s|s>`` and ``<-s_i|Y_i|s_i> = i s_i`` (standard Pauli Y
with ``s = +1`` the first basis state). All ``L**2`` vertex operators are
included, so boundary vertices act on two or three edges.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, NumericalDomainError


@dataclass(frozen=True)
class FieldParameters:
    hx: float = 0.0
    hy: float = 0.0
    hz: float = 0.0

    def __post_init__(self):
        for name in ("hx", "hy", "hz"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise InvalidArgument(f"field {name} must be finite, got {value!r}")
            object.__setattr__(self, name, float(value))

    @classmethod
    def coerce(cls, h):
        if isinstance(h, FieldParameters):
            return h
        return cls(*h)

    @property
    def sign_free(self):
        return self.hy == 0.0

    def as_tuple(self):
        return (self.hx, self.hy, self.hz)


@dataclass(frozen=True)
class ConnectedElement:
    """``amplitude = <s'|H|s>`` where ``s'`` is ``s`` with ``flips`` negated."""

    flips: tuple
    amplitude: complex


def as_configuration(geom, s):
    s = np.asarray(s)
    if s.shape[-1] != geom.n_edges:
        raise InvalidArgument(
            f"configuration has {s.shape[-1]} entries, lattice L={geom.L} has {geom.n_edges} edges"
        )
    if not np.all(np.abs(s) == 1):
        raise InvalidArgument("configuration entries must be +1 or -1")
    return s.astype(np.int8, copy=False)


def diagonal_energy(geom, h, S):
    """Diagonal matrix element ``<s|H|s>`` for a batch ``(..., N)``."""
    S = np.asarray(S)
    plaq = np.prod(S[..., geom.plaquette_edges], axis=-1, dtype=np.int64).sum(axis=-1)
    return -plaq - h.hz * S.sum(axis=-1, dtype=np.int64)


def connected_configurations(geom, h, s):
    h = FieldParameters.coerce(h)
    s = as_configuration(geom, s)
    elements = [ConnectedElement((), complex(diagonal_energy(geom, h, s)))]
    for edges in geom.vertex_edges:
        elements.append(ConnectedElement(tuple(int(e) for e in edges), complex(-1.0)))
    if h.hx != 0.0 or h.hy != 0.0:
        for i in range(geom.n_edges):
            elements.append(ConnectedElement((i,), complex(-h.hx, -h.hy * s[i])))
    return elements


class ConnectedBatch:
    """Vectorised connected-configuration structure for batched local energies.

    Row 0 of ``flip_signs`` is the identity, then one row per vertex, then one
    per edge when a transverse field is present.
    """

    def __init__(self, geom, h):
        self.geom = geom
        self.h = FieldParameters.coerce(h)
        rows = [np.ones((1, geom.n_edges), dtype=np.int8), np.asarray(geom.vertex_flip_signs)]
        self.has_single = self.h.hx != 0.0 or self.h.hy != 0.0
        if self.has_single:
            rows.append((1 - 2 * np.eye(geom.n_edges)).astype(np.int8))
        self.flip_signs = np.concatenate(rows, axis=0)
        self.n_connected = self.flip_signs.shape[0]

    def configurations(self, S):
        """``(B, M, N)`` connected configurations of each row of ``S``."""
        return S[:, None, :] * self.flip_signs[None, :, :]

    def bra_amplitudes(self, S):
        """``<s|H|s'>`` for every connected ``s'``, shape ``(B, M)``."""
        B = S.shape[0]
        dtype = np.complex128 if self.h.hy != 0.0 else np.float64
        amps = np.empty((B, self.n_connected), dtype=dtype)
        amps[:, 0] = diagonal_energy(self.geom, self.h, S)
        nv = self.geom.n_vertices
        amps[:, 1 : 1 + nv] = -1.0
        if self.has_single:
            # <s|H|s'> = conj(<s'|H|s>) = -hx + i hy s_i
            amps[:, 1 + nv :] = -self.h.hx + (1j * self.h.hy * S if self.h.hy != 0.0 else 0.0)
        return amps


def local_energies(geom, h, log_psi, S, log_psi_S=None, connected=None):
    """Batched ``E_loc(s) = sum_s' <s|H|s'> psi(s') / psi(s)``.

    ``log_psi`` maps an ``(B, N)`` int8 array to ``B`` log-amplitudes.
    """
    conn = connected if connected is not None else ConnectedBatch(geom, h)
    S = np.asarray(S, dtype=np.int8)
    B = S.shape[0]
    if log_psi_S is None:
        log_psi_S = log_psi(S)
    log_psi_S = np.asarray(log_psi_S)
    bad = ~np.isfinite(log_psi_S)
    if bad.any():
        raise NumericalDomainError(f"log-amplitude not finite at configuration {S[np.argmax(bad)].tolist()}")
    Sc = conn.configurations(S)
    lp = np.asarray(log_psi(Sc.reshape(-1, geom.n_edges))).reshape(B, conn.n_connected)
    _check_targets(lp, Sc)
    ratio = np.exp(lp - log_psi_S[:, None])
    return np.einsum("bm,bm->b", conn.bra_amplitudes(S), ratio)


def _check_targets(lp, configs):
    # exp(-inf) = 0 is a legitimate zero amplitude; NaN or +inf is not
    bad = np.isnan(lp) | (np.real(lp) == np.inf)
    if bad.any():
        idx = np.unravel_index(np.argmax(bad), bad.shape)
        raise NumericalDomainError(
            f"log-amplitude not finite at connected configuration {configs[idx].tolist()}"
        )


def local_energy(geom, h, log_psi, s):
    """Local energy of one configuration; ``log_psi`` takes a single configuration."""
    h = FieldParameters.coerce(h)
    s = as_configuration(geom, s)
    lp0 = complex(log_psi(s))
    if not np.isfinite(lp0):
        raise NumericalDomainError(f"log-amplitude not finite at configuration {s.tolist()}")
    total = 0j
    for el in connected_configurations(geom, h, s):
        sp = s.copy()
        sp[list(el.flips)] *= -1
        lp = complex(log_psi(sp))
        _check_targets(np.array([lp]), sp[None, :])
        total += np.conj(el.amplitude) * np.exp(lp - lp0)
    return total
