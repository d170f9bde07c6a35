"""Log-amplitude networks: Combo, RPP and an RBM baseline.

All networks map a batch of configurations ``S`` (shape ``(B, N)``, entries
``+-1``) to ``log psi``. Gradients are exact reverse-mode derivatives taken
with respect to *real coordinates*: for real parameters these are the
parameters themselves; for complex parameters each entry ``theta_k`` is split
into ``(Re theta_k, Im theta_k)``, interleaved. The log-gradient matrix ``O``
therefore has ``n_coordinates`` columns and is complex whenever ``log psi`` is.

Combo pipeline (``psi = Omega(sigma(chi(s)))``):

* ``chi``: edge-lattice convolutions. Edges live on an ``L x L`` cell grid with
  two orientation channels (horizontal, vertical); invalid cells are zero and
  stay masked. Each layer is followed by ``phi(x) = tanh(x/2) / tanh(1/2)``,
  applied separately to real and imaginary parts.
* ``sigma``: per channel, the product of the four edges around each plaquette.
* ``Omega``: plaquette-grid convolutions with complex ELU between layers; the
  final feature maps are summed into ``log psi``.
"""

import json
import math
import os
import struct
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from . import kernels
from .errors import InvalidArgument, NumericalDomainError
from .lattice import HORIZONTAL, VERTICAL

NIB = 0
IB = 1
ALL = 2
BLOCK_NAMES = {"NIB": NIB, "IB": IB, "all": ALL}
KINDS = ("combo", "rpp", "rbm")
_TANH_HALF = math.tanh(0.5)


@dataclass(frozen=True)
class AnsatzConfig:
    kind: str = "combo"
    complex_params: bool = False
    nib_channels: tuple = (1, 2, 4)
    nib_radius: int = 1
    ib_channels: tuple = (4, 4, 4)
    ib_kernel: int = 15
    rbm_alpha: float = 1.0
    rpp_skip_init: str = "gaussian"
    ib_std: float = 0.02
    rbm_std: float = 0.01
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "nib_channels", tuple(int(c) for c in self.nib_channels))
        object.__setattr__(self, "ib_channels", tuple(int(c) for c in self.ib_channels))
        if self.kind not in KINDS:
            raise InvalidArgument(f"ansatz kind must be one of {KINDS}, got {self.kind!r}")
        if self.kind != "rbm":
            if not self.ib_channels or min(self.ib_channels) < 1:
                raise InvalidArgument("ib_channels must be a non-empty list of positive integers")
            if self.ib_kernel < 1 or self.ib_kernel % 2 == 0:
                raise InvalidArgument(f"ib_kernel must be odd and positive, got {self.ib_kernel}")
            if self.nib_radius < 0:
                raise InvalidArgument("nib_radius must be non-negative")
        if self.kind == "combo" and (not self.nib_channels or min(self.nib_channels) < 1):
            raise InvalidArgument("nib_channels must be a non-empty list of positive integers")
        if self.kind == "rbm" and self.rbm_alpha <= 0:
            raise InvalidArgument("rbm_alpha must be positive")
        if self.rpp_skip_init not in ("gaussian", "zero"):
            raise InvalidArgument("rpp_skip_init must be 'gaussian' or 'zero'")

    def to_dict(self):
        d = asdict(self)
        d["nib_channels"] = list(self.nib_channels)
        d["ib_channels"] = list(self.ib_channels)
        return d

    @classmethod
    def from_dict(cls, d):
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**known)

    def ib_kernel_for(self, L):
        return max(1, min(self.ib_kernel, 2 * (L - 1) - 1))


@dataclass(frozen=True)
class LayerSpec:
    name: str
    shape: tuple
    offset: int
    block: int

    @property
    def size(self):
        return int(np.prod(self.shape))


@dataclass
class AnsatzParameters:
    """Flat parameter vector plus its layer layout and block labels."""

    config: AnsatzConfig
    L: int
    values: np.ndarray
    layers: tuple
    blocks: np.ndarray = field(repr=False)

    @property
    def n_params(self):
        return self.values.size

    @property
    def is_complex(self):
        return self.config.complex_params

    @property
    def n_coordinates(self):
        return 2 * self.n_params if self.is_complex else self.n_params

    def copy(self):
        return AnsatzParameters(self.config, self.L, self.values.copy(), self.layers, self.blocks)

    def layer(self, name):
        for spec in self.layers:
            if spec.name == name:
                return self.values[spec.offset : spec.offset + spec.size].reshape(spec.shape)
        raise KeyError(name)

    def real_coordinates(self):
        if not self.is_complex:
            return self.values.astype(np.float64, copy=True)
        out = np.empty(2 * self.n_params)
        out[0::2] = self.values.real
        out[1::2] = self.values.imag
        return out

    def with_real_coordinates(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.size != self.n_coordinates:
            raise InvalidArgument(f"expected {self.n_coordinates} coordinates, got {x.size}")
        values = x[0::2] + 1j * x[1::2] if self.is_complex else x.copy()
        return AnsatzParameters(self.config, self.L, values, self.layers, self.blocks)

    def coordinate_mask(self, mask):
        """Expand a per-parameter mask to the real-coordinate layout."""
        mask = np.asarray(mask, dtype=bool)
        return np.repeat(mask, 2) if self.is_complex else mask.copy()


# ------------------------------------------------------------------ activations


def phi(x):
    return np.tanh(0.5 * x) / _TANH_HALF


def _dphi(x):
    t = np.tanh(0.5 * x)
    return 0.5 * (1.0 - t * t) / _TANH_HALF


def _elu(x):
    return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))


def _delu(x):
    return np.where(x > 0, 1.0, np.exp(np.minimum(x, 0.0)))


def _split(fn, z):
    if np.iscomplexobj(z):
        return fn(z.real) + 1j * fn(z.imag)
    return fn(z)


def _split_back(dfn, z, g):
    if np.iscomplexobj(z):
        return dfn(z.real) * g.real + 1j * (dfn(z.imag) * g.imag)
    return dfn(z) * g


def _check(a, where):
    if not np.all(np.isfinite(a)):
        raise NumericalDomainError(f"non-finite values after {where}")


def _pad(x, p):
    if p == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))


def _unpad(x, p):
    if p == 0:
        return x
    return x[:, :, p:-p, p:-p]


# ------------------------------------------------------------------- networks


class _Network:
    def __init__(self, L, config, layout):
        self.L = L
        self.config = config
        specs, offset = [], 0
        for name, shape, block in layout:
            spec = LayerSpec(name, tuple(int(d) for d in shape), offset, block)
            specs.append(spec)
            offset += spec.size
        self.layers = tuple(specs)
        self.n_params = offset
        blocks = np.empty(offset, dtype=np.int8)
        for spec in specs:
            blocks[spec.offset : spec.offset + spec.size] = spec.block
        blocks.setflags(write=False)
        self.blocks = blocks
        self.dtype = np.complex128 if config.complex_params else np.float64

    def views(self, values):
        return {s.name: values[s.offset : s.offset + s.size].reshape(s.shape) for s in self.layers}

    def _gaussian(self, rng, shape, std):
        x = rng.normal(0.0, std, size=shape)
        if self.config.complex_params:
            x = x + 1j * rng.normal(0.0, std, size=shape)
        return x

    def log_psi(self, values, S):
        return self.forward(values, S)[0]

    def log_psi_and_grad(self, values, S):
        """Return ``log psi`` (B,) and the real-coordinate log-gradient (B, n_coordinates)."""
        out, cache = self.forward(values, S, keep=True)
        if not self.config.complex_params:
            return out, self.backward(values, cache, 1.0).real
        gr = self.backward(values, cache, 1.0)
        gi = self.backward(values, cache, 1j)
        O = np.empty((gr.shape[0], 2 * gr.shape[1]), dtype=np.complex128)
        O[:, 0::2] = gr.real + 1j * gi.real
        O[:, 1::2] = gr.imag + 1j * gi.imag
        return out, O


class _EdgeMap:
    """Scatter edge values onto the ``(2, L, L)`` orientation/cell grid."""

    def __init__(self, geom_L):
        from .lattice import build_lattice

        geom = build_lattice(geom_L)
        L = geom.L
        o, r, c = geom.edge_cells.T
        self.flat = o * L * L + r * L + c
        mask = np.zeros((2, L, L), dtype=bool)
        mask[o, r, c] = True
        self.mask = mask
        self.L = L

    def __call__(self, S):
        B = S.shape[0]
        X = np.zeros((B, 2 * self.L * self.L))
        X[:, self.flat] = S
        return X.reshape(B, 2, self.L, self.L)


def _plaquette_product(x, C):
    """``x`` has shape ``(B, 2C, L, L)``; returns factors and ``(B, C, L-1, L-1)`` products."""
    B, _, L, _ = x.shape
    x = x.reshape(B, C, 2, L, L)
    xh, xv = x[:, :, HORIZONTAL], x[:, :, VERTICAL]
    f = (xh[:, :, :-1, :-1], xh[:, :, 1:, :-1], xv[:, :, :-1, :-1], xv[:, :, :-1, 1:])
    return f, f[0] * f[1] * f[2] * f[3]


def _plaquette_product_back(f, gP, C, L):
    a, b, c, d = f
    B = gP.shape[0]
    g = np.zeros((B, C, 2, L, L), dtype=np.result_type(gP, a))
    conj = np.conj if np.iscomplexobj(a) else (lambda t: t)
    g[:, :, HORIZONTAL, :-1, :-1] += conj(b * c * d) * gP
    g[:, :, HORIZONTAL, 1:, :-1] += conj(a * c * d) * gP
    g[:, :, VERTICAL, :-1, :-1] += conj(a * b * d) * gP
    g[:, :, VERTICAL, :-1, 1:] += conj(a * b * c) * gP
    return g.reshape(B, 2 * C, L, L)


def _conv_layer(x, w, b, pad):
    xp = _pad(x, pad)
    z = kernels.conv2d_valid(xp, w)
    z += b.reshape(1, -1, 1, 1)
    return xp, z


def _conv_layer_back(xp, w, gz, pad, need_input=True):
    B = gz.shape[0]
    gw = kernels.conv2d_grad_weight(xp, gz, w.shape[2:]).reshape(B, -1)
    gb = gz.sum(axis=(2, 3))
    gx = None
    if need_input:
        gx = _unpad(kernels.conv2d_grad_input(gz, w, xp.shape[2:]), pad)
    return gw, gb, gx


class ComboNetwork(_Network):
    def __init__(self, L, config):
        self.K_nib = 2 * config.nib_radius + 1
        self.K_ib = config.ib_kernel_for(L)
        layout = []
        cin = 1
        for l, cout in enumerate(config.nib_channels):
            layout.append((f"nib{l}.w", (cout, 2, cin, 2, self.K_nib, self.K_nib), NIB))
            layout.append((f"nib{l}.b", (cout, 2), NIB))
            cin = cout
        self.C_sigma = cin
        for l, cout in enumerate(config.ib_channels):
            layout.append((f"ib{l}.w", (cout, cin, self.K_ib, self.K_ib), IB))
            layout.append((f"ib{l}.b", (cout,), IB))
            cin = cout
        super().__init__(L, config, layout)
        self.edge_map = _EdgeMap(L)
        self.mask2 = {}

    def _mask(self, cout):
        if cout not in self.mask2:
            self.mask2[cout] = np.tile(self.edge_map.mask, (cout, 1, 1))
        return self.mask2[cout]

    def init(self, rng):
        values = np.zeros(self.n_params, dtype=self.dtype)
        v = self.views(values)
        cin = 1
        r = self.config.nib_radius
        for l, cout in enumerate(self.config.nib_channels):
            w = v[f"nib{l}.w"]
            for co in range(cout):
                for o in range(2):
                    w[co, o, co % cin, o, r, r] = 1.0
            cin = cout
        for l in range(len(self.config.ib_channels)):
            for suffix in (".w", ".b"):
                arr = v[f"ib{l}{suffix}"]
                arr[...] = self._gaussian(rng, arr.shape, self.config.ib_std)
        return values

    def forward(self, values, S, keep=False):
        v = self.views(values)
        S = np.asarray(S)
        x = self.edge_map(S)
        B = S.shape[0]
        cache = {"nib": [], "ib": []}
        cin = 1
        r = self.config.nib_radius
        x = x.reshape(B, 2, self.L, self.L)
        for l, cout in enumerate(self.config.nib_channels):
            w = v[f"nib{l}.w"].reshape(2 * cout, 2 * cin, self.K_nib, self.K_nib)
            xp, z = _conv_layer(x, w, v[f"nib{l}.b"], r)
            z *= self._mask(cout)
            x = _split(phi, z)
            _check(x, f"non-invariant layer {l}")
            if keep:
                cache["nib"].append((xp, z, w))
            cin = cout
        factors, P = _plaquette_product(x, self.C_sigma)
        if keep:
            cache["sigma"] = factors
        x = P
        n_ib = len(self.config.ib_channels)
        pad = (self.K_ib - 1) // 2
        for l in range(n_ib):
            w = v[f"ib{l}.w"]
            xp, z = _conv_layer(x, w, v[f"ib{l}.b"], pad)
            if keep:
                cache["ib"].append((xp, z, w))
            x = _split(_elu, z) if l < n_ib - 1 else z
            _check(x, f"invariant layer {l}")
        out = x.sum(axis=(1, 2, 3))
        return out, cache

    def backward(self, values, cache, seed):
        """Per-sample gradients ``dl/dRe + i dl/dIm`` for ``l = Re(conj(seed) * log psi)``."""
        grads = {}
        n_ib = len(self.config.ib_channels)
        pad = (self.K_ib - 1) // 2
        z_last = cache["ib"][-1][1]
        g = np.full(z_last.shape, seed, dtype=np.result_type(z_last, type(seed)))
        for l in reversed(range(n_ib)):
            xp, z, w = cache["ib"][l]
            if l < n_ib - 1:
                g = _split_back(_delu, z, g)
            gw, gb, g = _conv_layer_back(xp, w, g, pad)
            grads[f"ib{l}.w"], grads[f"ib{l}.b"] = gw, gb
        g = _plaquette_product_back(cache["sigma"], g, self.C_sigma, self.L)
        r = self.config.nib_radius
        for l in reversed(range(len(self.config.nib_channels))):
            xp, z, w = cache["nib"][l]
            g = _split_back(_dphi, z, g) * self._mask(w.shape[0] // 2)
            gw, gb, g = _conv_layer_back(xp, w, g, r, need_input=l > 0)
            B = gb.shape[0]
            grads[f"nib{l}.w"], grads[f"nib{l}.b"] = gw, gb.reshape(B, -1)
        B = z_last.shape[0]
        return np.concatenate([grads[s.name].reshape(B, -1) for s in self.layers], axis=1)


class RPPNetwork(_Network):
    """Invariant path ``conv(sigma(s))`` plus a non-invariant edge-to-plaquette skip path."""

    def __init__(self, L, config):
        self.K_ib = config.ib_kernel_for(L)
        self.K_skip = 2 * config.nib_radius + 2
        c0 = config.ib_channels[0]
        layout = [
            ("skip.w", (c0, 2, self.K_skip, self.K_skip), NIB),
            ("skip.b", (c0,), NIB),
            ("ib0.w", (c0, 1, self.K_ib, self.K_ib), IB),
            ("ib0.b", (c0,), IB),
        ]
        cin = c0
        for l, cout in enumerate(config.ib_channels[1:], start=1):
            layout.append((f"ib{l}.w", (cout, cin, self.K_ib, self.K_ib), IB))
            layout.append((f"ib{l}.b", (cout,), IB))
            cin = cout
        super().__init__(L, config, layout)
        self.edge_map = _EdgeMap(L)

    def init(self, rng):
        values = np.zeros(self.n_params, dtype=self.dtype)
        v = self.views(values)
        for spec in self.layers:
            if spec.block == NIB and self.config.rpp_skip_init == "zero":
                continue
            v[spec.name][...] = self._gaussian(rng, spec.shape, self.config.ib_std)
        return values

    def forward(self, values, S, keep=False):
        v = self.views(values)
        S = np.asarray(S)
        B = S.shape[0]
        edges = self.edge_map(S)
        factors, P = _plaquette_product(edges, 1)
        pad = (self.K_ib - 1) // 2
        r = self.config.nib_radius
        xp_inv, z_inv = _conv_layer(P, v["ib0.w"], v["ib0.b"], pad)
        xp_skip, z_skip = _conv_layer(edges, v["skip.w"], v["skip.b"], r)
        z = z_inv + z_skip
        cache = {"inv": xp_inv, "skip": xp_skip, "ib": [(None, z, None)]}
        n_ib = len(self.config.ib_channels)
        x = _split(_elu, z) if n_ib > 1 else z
        _check(x, "merged layer")
        for l in range(1, n_ib):
            w = v[f"ib{l}.w"]
            xp, z = _conv_layer(x, w, v[f"ib{l}.b"], pad)
            cache["ib"].append((xp, z, w))
            x = _split(_elu, z) if l < n_ib - 1 else z
            _check(x, f"invariant layer {l}")
        return x.reshape(B, -1).sum(axis=1), cache

    def backward(self, values, cache, seed):
        v = self.views(values)
        grads = {}
        n_ib = len(self.config.ib_channels)
        pad = (self.K_ib - 1) // 2
        z_last = cache["ib"][-1][1]
        g = np.full(z_last.shape, seed, dtype=np.result_type(z_last, type(seed)))
        for l in reversed(range(1, n_ib)):
            xp, z, w = cache["ib"][l]
            if l < n_ib - 1:
                g = _split_back(_delu, z, g)
            gw, gb, g = _conv_layer_back(xp, w, g, pad)
            grads[f"ib{l}.w"], grads[f"ib{l}.b"] = gw, gb
        if n_ib > 1:
            g = _split_back(_delu, cache["ib"][0][1], g)
        grads["ib0.w"], grads["ib0.b"], _ = _conv_layer_back(cache["inv"], v["ib0.w"], g, pad, False)
        grads["skip.w"], grads["skip.b"], _ = _conv_layer_back(
            cache["skip"], v["skip.w"], g, self.config.nib_radius, False
        )
        B = g.shape[0]
        return np.concatenate([grads[s.name].reshape(B, -1) for s in self.layers], axis=1)


def _logcosh(z):
    flip = np.real(z) < 0
    z = np.where(flip, -z, z)
    return z + np.log1p(np.exp(-2.0 * z)) - math.log(2.0)


class RBMNetwork(_Network):
    """``log psi = a.s + sum_i log cosh(b_i + W_i.s)``; no symmetrization."""

    def __init__(self, L, config):
        n = 2 * L * L - 2 * L
        self.n_visible = n
        self.n_hidden = max(1, int(round(config.rbm_alpha * n)))
        layout = [("a", (n,), ALL), ("b", (self.n_hidden,), ALL), ("W", (self.n_hidden, n), ALL)]
        super().__init__(L, config, layout)

    def init(self, rng):
        return self._gaussian(rng, (self.n_params,), self.config.rbm_std).astype(self.dtype)

    def forward(self, values, S, keep=False):
        v = self.views(values)
        S = np.asarray(S, dtype=np.float64)
        theta = S @ v["W"].T + v["b"]
        out = S @ v["a"] + _logcosh(theta).sum(axis=1)
        _check(out, "RBM output")
        return out, {"S": S, "theta": theta}

    def log_psi_and_grad(self, values, S):
        out, cache = self.forward(values, S, keep=True)
        S, t = cache["S"], np.tanh(cache["theta"])
        B = S.shape[0]
        d = np.concatenate([S, t, (t[:, :, None] * S[:, None, :]).reshape(B, -1)], axis=1)
        if not self.config.complex_params:
            return out, d
        O = np.empty((B, 2 * d.shape[1]), dtype=np.complex128)
        O[:, 0::2] = d
        O[:, 1::2] = 1j * d
        return out, O


_NETWORKS = {"combo": ComboNetwork, "rpp": RPPNetwork, "rbm": RBMNetwork}


@lru_cache(maxsize=64)
def get_network(config, L):
    if config.kind != "rbm" and config.nib_radius > L - 1:
        raise InvalidArgument(
            f"non-invariant kernel radius {config.nib_radius} exceeds the lattice (L={L})"
        )
    return _NETWORKS[config.kind](L, config)


# --------------------------------------------------------------- public API


def init_params(geom, config):
    net = get_network(config, geom.L)
    values = net.init(np.random.default_rng(config.seed))
    return AnsatzParameters(config, geom.L, values, net.layers, net.blocks)


def _net(params, geom):
    if geom is not None and geom.L != params.L:
        raise InvalidArgument(f"parameters are for L={params.L}, geometry has L={geom.L}")
    return get_network(params.config, params.L)


def log_amplitude(params, geom, s):
    """``log psi_s`` for one configuration (scalar) or a batch ``(B, N)``."""
    s = np.asarray(s)
    single = s.ndim == 1
    out = _net(params, geom).log_psi(params.values, np.atleast_2d(s))
    return out[0] if single else out


def log_gradient(params, geom, s):
    """Real-coordinate derivative of ``log psi`` (length ``params.n_coordinates``)."""
    s = np.asarray(s)
    single = s.ndim == 1
    _, O = _net(params, geom).log_psi_and_grad(params.values, np.atleast_2d(s))
    return O[0] if single else O


def log_amplitude_and_gradient(params, geom, S):
    return _net(params, geom).log_psi_and_grad(params.values, np.atleast_2d(S))


def log_psi_function(params, geom=None):
    """Batched ``S -> log psi`` closure over fixed parameters."""
    net = _net(params, geom)
    values = params.values

    def log_psi(S):
        return net.log_psi(values, np.atleast_2d(S))

    return log_psi


def apply_vertex_flip(geom, s, v):
    if not 0 <= v < geom.n_vertices:
        raise IndexError(f"vertex {v} out of range for L={geom.L}")
    return np.asarray(s) * geom.vertex_flip_signs[v]


def partition_mask(params, block):
    """Boolean mask over parameters selecting ``block`` ('NIB', 'IB' or 'all')."""
    if block not in BLOCK_NAMES:
        raise InvalidArgument(f"unknown block {block!r}")
    if block == "all":
        return np.ones(params.n_params, dtype=bool)
    if params.config.kind == "rbm":
        raise InvalidArgument("the RBM ansatz has a single parameter block; use 'all'")
    return params.blocks == BLOCK_NAMES[block]


def parameter_count(config, L):
    return get_network(config, L).n_params


def nib_features(params, geom, S):
    """Output of the non-invariant block, shape ``(B, C, 2, L, L)`` (Combo only)."""
    if params.config.kind != "combo":
        raise InvalidArgument("non-invariant features are defined for the Combo ansatz")
    net = _net(params, geom)
    S = np.atleast_2d(S)
    v = net.views(params.values)
    x = net.edge_map(S)
    cin = 1
    for l, cout in enumerate(params.config.nib_channels):
        w = v[f"nib{l}.w"].reshape(2 * cout, 2 * cin, net.K_nib, net.K_nib)
        _, z = _conv_layer(x, w, v[f"nib{l}.b"], params.config.nib_radius)
        x = _split(phi, z * net._mask(cout))
        cin = cout
    return x.reshape(S.shape[0], cin, 2, geom.L, geom.L)


# ---------------------------------------------------------------- checkpoints

CHECKPOINT_MAGIC = b"TNQSCKPT"
CHECKPOINT_VERSION = 1


def save_checkpoint(path, params, h=None, seed=None, extra=None):
    """Write a versioned header followed by little-endian float64 ``(re, im)`` pairs."""
    header = {
        "version": CHECKPOINT_VERSION,
        "kind": params.config.kind,
        "config": params.config.to_dict(),
        "L": params.L,
        "h": list(h.as_tuple()) if hasattr(h, "as_tuple") else (list(h) if h is not None else None),
        "seed": seed,
        "n_params": params.n_params,
        "ib_bias": True,
    }
    if extra:
        header.update(extra)
    blob = json.dumps(header, sort_keys=True).encode()
    pairs = np.empty((params.n_params, 2), dtype="<f8")
    pairs[:, 0] = np.real(params.values)
    pairs[:, 1] = np.imag(params.values) if params.is_complex else 0.0
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(blob)))
        fh.write(blob)
        fh.write(pairs.tobytes())
    os.replace(tmp, path)


def load_checkpoint(path):
    """Return ``(params, header)``."""
    with open(path, "rb") as fh:
        if fh.read(len(CHECKPOINT_MAGIC)) != CHECKPOINT_MAGIC:
            raise InvalidArgument(f"{path} is not a checkpoint file")
        version, n = struct.unpack("<II", fh.read(8))
        if version != CHECKPOINT_VERSION:
            raise InvalidArgument(f"unsupported checkpoint version {version}")
        header = json.loads(fh.read(n))
        pairs = np.frombuffer(fh.read(), dtype="<f8").reshape(-1, 2)
    config = AnsatzConfig.from_dict(header["config"])
    if pairs.shape[0] != header["n_params"]:
        raise InvalidArgument("checkpoint is truncated")
    values = pairs[:, 0] + 1j * pairs[:, 1] if config.complex_params else pairs[:, 0].copy()
    net = get_network(config, header["L"])
    return AnsatzParameters(config, header["L"], values, net.layers, net.blocks), header
