"""Open-boundary square lattice with qubits on edges.

Vertices sit at integer points ``(r, c)`` with ``0 <= r, c < L``. Edge
indices are row-major with all horizontal edges first::

    horizontal (r, c) -> r * (L - 1) + c            0 <= r < L, 0 <= c < L - 1
    vertical   (r, c) -> L * (L - 1) + r * L + c    0 <= r < L - 1, 0 <= c < L

A horizontal edge joins vertices ``(r, c)`` and ``(r, c + 1)``; a vertical edge
joins ``(r, c)`` and ``(r + 1, c)``. Plaquette ``(r, c)`` is bounded by
horizontal edges ``(r, c)``, ``(r + 1, c)`` and vertical edges ``(r, c)``,
``(r, c + 1)``.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidArgument

HORIZONTAL = 0
VERTICAL = 1


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


class LatticeGeometry:
    """Index maps for an ``L x L`` open-boundary lattice. Immutable."""

    def __init__(self, L):
        self.L = L
        n_h = L * (L - 1)
        self.n_edges = 2 * L * L - 2 * L
        self.n_vertices = L * L
        self.n_plaquettes = (L - 1) ** 2

        cell_index = -np.ones((2, L, L), dtype=np.int64)
        edge_cells = np.empty((self.n_edges, 3), dtype=np.int64)
        edge_vertices = np.empty((self.n_edges, 2), dtype=np.int64)
        for r in range(L):
            for c in range(L - 1):
                e = r * (L - 1) + c
                cell_index[HORIZONTAL, r, c] = e
                edge_cells[e] = (HORIZONTAL, r, c)
                edge_vertices[e] = (r * L + c, r * L + c + 1)
        for r in range(L - 1):
            for c in range(L):
                e = n_h + r * L + c
                cell_index[VERTICAL, r, c] = e
                edge_cells[e] = (VERTICAL, r, c)
                edge_vertices[e] = (r * L + c, (r + 1) * L + c)

        vertex_edges = [[] for _ in range(self.n_vertices)]
        for e, (a, b) in enumerate(edge_vertices):
            vertex_edges[a].append(e)
            vertex_edges[b].append(e)
        table = -np.ones((self.n_vertices, 4), dtype=np.int64)
        degree = np.zeros(self.n_vertices, dtype=np.int64)
        for v, edges in enumerate(vertex_edges):
            edges.sort()
            table[v, : len(edges)] = edges
            degree[v] = len(edges)

        plaq = np.empty((self.n_plaquettes, 4), dtype=np.int64)
        for r in range(L - 1):
            for c in range(L - 1):
                plaq[r * (L - 1) + c] = (
                    cell_index[HORIZONTAL, r, c],
                    cell_index[HORIZONTAL, r + 1, c],
                    cell_index[VERTICAL, r, c],
                    cell_index[VERTICAL, r, c + 1],
                )

        flips = np.ones((self.n_vertices, self.n_edges), dtype=np.int8)
        for v, edges in enumerate(vertex_edges):
            flips[v, edges] = -1

        self.cell_index = _frozen(cell_index)
        self.edge_cells = _frozen(edge_cells)
        self.edge_vertices = _frozen(edge_vertices)
        self.vertex_edge_table = _frozen(table)
        self.vertex_degree = _frozen(degree)
        self.vertex_edges = tuple(_frozen(np.array(e, dtype=np.int64)) for e in vertex_edges)
        self.plaquette_edges = _frozen(plaq)
        self.interior_vertices = _frozen(np.flatnonzero(degree == 4))
        self.vertex_flip_signs = _frozen(flips)

    def h_edge(self, r, c):
        return int(self.cell_index[HORIZONTAL, r, c])

    def v_edge(self, r, c):
        return int(self.cell_index[VERTICAL, r, c])

    def vertex(self, r, c):
        return r * self.L + c

    @property
    def n_stabilizers(self):
        return self.n_vertices + self.n_plaquettes

    def edge_plaquettes(self, e):
        return np.flatnonzero((self.plaquette_edges == e).any(axis=1))

    def describe(self):
        """Human-readable dump of the index maps."""
        lines = [
            f"L={self.L} edges={self.n_edges} vertices={self.n_vertices} "
            f"plaquettes={self.n_plaquettes} interior_vertices={len(self.interior_vertices)}"
        ]
        for e, (o, r, c) in enumerate(self.edge_cells):
            kind = "h" if o == HORIZONTAL else "v"
            a, b = self.edge_vertices[e]
            lines.append(f"edge {e:4d} {kind}({r},{c}) vertices {a}-{b}")
        for v, edges in enumerate(self.vertex_edges):
            lines.append(f"vertex {v:4d} ({v // self.L},{v % self.L}) edges {list(edges)}")
        for p, edges in enumerate(self.plaquette_edges):
            lines.append(f"plaquette {p:4d} edges {list(edges)}")
        return "\n".join(lines)

    def __repr__(self):
        return f"LatticeGeometry(L={self.L})"

    def __eq__(self, other):
        return isinstance(other, LatticeGeometry) and other.L == self.L

    def __hash__(self):
        return hash(("LatticeGeometry", self.L))


@lru_cache(maxsize=None)
def build_lattice(L):
    if not isinstance(L, (int, np.integer)) or L < 2:
        raise InvalidArgument(f"lattice side length must be an integer >= 2, got {L!r}")
    return LatticeGeometry(int(L))


@dataclass(frozen=True)
class StringSupport:
    loop: tuple
    half: tuple
    kind: str
    perimeter: int


def string_support(geom, perimeter, kind="primal"):
    """Centered square loop ``C`` and its half-string ``C~``.

    ``perimeter`` counts edges of the loop. For ``kind="dual"`` the loop runs on
    the dual lattice (through plaquette centres) and the returned edges are the
    primal edges it crosses. The half-string is the top side followed by the
    right side of the square, a connected path with ``perimeter / 2`` edges.
    """
    if kind not in ("primal", "dual"):
        raise InvalidArgument(f"kind must be 'primal' or 'dual', got {kind!r}")
    L = geom.L
    max_side = L - 1 if kind == "primal" else L - 2
    if not isinstance(perimeter, (int, np.integer)) or perimeter < 4 or perimeter % 4:
        raise InvalidArgument(f"perimeter must be a positive multiple of 4, got {perimeter!r}")
    k = perimeter // 4
    if k > max_side:
        raise InvalidArgument(
            f"{kind} loop of perimeter {perimeter} does not fit in L={L}; "
            f"maximum feasible perimeter is {4 * max_side}"
        )
    H = lambda r, c: geom.h_edge(r, c)  # noqa: E731
    V = lambda r, c: geom.v_edge(r, c)  # noqa: E731
    if kind == "primal":
        r0 = c0 = (L - 1 - k) // 2
        top = [H(r0, c0 + i) for i in range(k)]
        right = [V(r0 + i, c0 + k) for i in range(k)]
        bottom = [H(r0 + k, c0 + k - 1 - i) for i in range(k)]
        left = [V(r0 + k - 1 - i, c0) for i in range(k)]
    else:
        # plaquette-centre corners (p0, p0) .. (p0 + k, p0 + k)
        p0 = (L - 2 - k) // 2
        top = [V(p0, p0 + 1 + i) for i in range(k)]
        right = [H(p0 + 1 + i, p0 + k) for i in range(k)]
        bottom = [V(p0 + k, p0 + k - i) for i in range(k)]
        left = [H(p0 + k - i, p0) for i in range(k)]
    loop = top + right + bottom + left
    half = top + right
    return StringSupport(tuple(loop), tuple(half), kind, int(perimeter))


def central_square_region(geom):
    """The four edges bounding the central-most plaquette."""
    return np.array(string_support(geom, 4, "primal").loop, dtype=np.int64)
