"""Simplicial meshes in one and two dimensions.

A :class:`Mesh` stores node coordinates, simplices, boundary facets and the
geometric data every discrete integral needs: element measures, facet
measures and the (elementwise constant) gradients of the P1 hat functions.
In 1D a boundary facet is a single endpoint and carries measure 1, so
boundary integrals reduce to point evaluations.
"""

from __future__ import annotations

import math
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgumentError

__all__ = [
    "Mesh",
    "generate_interval",
    "generate_unit_square",
    "p1_gradient",
    "read_mesh",
    "write_mesh",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


class Mesh:
    """Immutable P1 mesh of a 1D interval or a 2D polygon.

    Parameters
    ----------
    nodes : array_like, shape (N_v, dim) or (N_v,)
        Node coordinates. A flat array is read as 1D coordinates.
    elements : array_like of int, shape (N_e, dim + 1)
        Simplices, as 0-based node indices.
    boundary_facets : array_like of int, shape (N_f, dim)
        Facets of the domain boundary.
    """

    def __init__(self, nodes, elements, boundary_facets):
        nodes = np.asarray(nodes, dtype=float)
        if nodes.ndim == 1:
            nodes = nodes[:, None]
        if nodes.ndim != 2 or nodes.shape[1] not in (1, 2):
            raise InvalidArgumentError("nodes must have shape (N_v, 1) or (N_v, 2)")
        dim = nodes.shape[1]
        elements = np.asarray(elements, dtype=np.int64).reshape(-1, dim + 1)
        boundary_facets = np.asarray(boundary_facets, dtype=np.int64).reshape(-1, dim)
        n_v = nodes.shape[0]
        for name, idx in (("elements", elements), ("boundary_facets", boundary_facets)):
            if idx.size and (idx.min() < 0 or idx.max() >= n_v):
                raise InvalidArgumentError(f"{name} reference a node index outside [0, {n_v})")
        if elements.shape[0] == 0:
            raise InvalidArgumentError("mesh needs at least one element")

        self.dim = dim
        self.nodes = _frozen(nodes)
        self.elements = _frozen(elements)
        self.boundary_facets = _frozen(boundary_facets)

        # Jacobian columns x_i - x_0 for i = 1..dim
        x = nodes[elements]
        jac = np.transpose(x[:, 1:, :] - x[:, :1, :], (0, 2, 1))
        det = np.linalg.det(jac)
        measures = np.abs(det) / math.factorial(dim)
        if np.any(measures <= 0.0):
            raise InvalidArgumentError("mesh contains a degenerate element")
        # rows of inv(jac) are the gradients of barycentric coordinates 1..dim
        inv = np.linalg.inv(jac)
        grads = np.empty((elements.shape[0], dim + 1, dim))
        grads[:, 1:, :] = inv
        grads[:, 0, :] = -inv.sum(axis=1)
        self.element_measures = _frozen(measures)
        self.element_gradients = _frozen(grads)

        if dim == 1:
            fmeas = np.ones(boundary_facets.shape[0])
        else:
            seg = nodes[boundary_facets[:, 1]] - nodes[boundary_facets[:, 0]]
            fmeas = np.hypot(seg[:, 0], seg[:, 1])
        if np.any(fmeas <= 0.0):
            raise InvalidArgumentError("mesh contains a degenerate boundary facet")
        self.facet_measures = _frozen(fmeas)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    @property
    def n_facets(self) -> int:
        return self.boundary_facets.shape[0]

    @property
    def volume(self) -> float:
        return float(self.element_measures.sum())

    @property
    def boundary_measure(self) -> float:
        return float(self.facet_measures.sum())

    @cached_property
    def gradient_operator(self) -> sp.csr_matrix:
        """Sparse map from nodal values to stacked element gradients.

        ``(G @ u).reshape(n_elements, dim)`` is the P1 gradient on each element.
        """
        n_e, dim = self.n_elements, self.dim
        rows = (np.arange(n_e)[:, None, None] * dim + np.arange(dim)[None, None, :])
        rows = np.broadcast_to(rows, (n_e, dim + 1, dim))
        cols = np.broadcast_to(self.elements[:, :, None], (n_e, dim + 1, dim))
        g = sp.coo_matrix(
            (self.element_gradients.ravel(), (rows.ravel(), cols.ravel())),
            shape=(n_e * dim, self.n_nodes),
        ).tocsr()
        g.sum_duplicates()
        return g

    def gradients(self, u: np.ndarray) -> np.ndarray:
        """All element gradients of the P1 interpolant of ``u``, shape (N_e, dim)."""
        u = np.asarray(u, dtype=float)
        if u.shape != (self.n_nodes,):
            raise InvalidArgumentError(f"field has shape {u.shape}, expected ({self.n_nodes},)")
        return (self.gradient_operator @ u).reshape(self.n_elements, self.dim)

    def boundary_nodes(self) -> np.ndarray:
        return np.unique(self.boundary_facets)

    def renumbered(self, perm) -> "Mesh":
        """Same mesh with node ``i`` of the result being node ``perm[i]`` of this one."""
        perm = np.asarray(perm, dtype=np.int64)
        if sorted(perm.tolist()) != list(range(self.n_nodes)):
            raise InvalidArgumentError("perm must be a permutation of the node indices")
        inverse = np.empty_like(perm)
        inverse[perm] = np.arange(perm.size)
        return Mesh(self.nodes[perm], inverse[self.elements], inverse[self.boundary_facets])

    def __repr__(self) -> str:
        return (
            f"Mesh(dim={self.dim}, n_nodes={self.n_nodes}, "
            f"n_elements={self.n_elements}, n_facets={self.n_facets})"
        )


def generate_interval(n_elements: int, length: float = 1.0) -> Mesh:
    """Uniform mesh of ``(0, length)`` with the two endpoints as boundary facets."""
    if int(n_elements) != n_elements or n_elements < 2:
        raise InvalidArgumentError("n_elements must be an integer >= 2")
    if not length > 0:
        raise InvalidArgumentError("length must be positive")
    n = int(n_elements)
    nodes = np.linspace(0.0, float(length), n + 1)
    elements = np.column_stack([np.arange(n), np.arange(1, n + 1)])
    return Mesh(nodes, elements, [[0], [n]])


def generate_unit_square(n_per_side: int) -> Mesh:
    """Structured triangulation of (0, 1)^2, every grid cell cut along its diagonal.

    Boundary edges are listed counter-clockwise, so the outward normal of an
    edge ``(i, j)`` is the tangent ``x_j - x_i`` rotated by -90 degrees.
    """
    if int(n_per_side) != n_per_side or n_per_side < 2:
        raise InvalidArgumentError("n_per_side must be an integer >= 2")
    n = int(n_per_side)
    t = np.linspace(0.0, 1.0, n + 1)
    xx, yy = np.meshgrid(t, t, indexing="xy")
    nodes = np.column_stack([xx.ravel(), yy.ravel()])

    def idx(i, j):  # column i, row j
        return j * (n + 1) + i

    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    i, j = i.ravel(), j.ravel()
    lower = np.column_stack([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)])
    upper = np.column_stack([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)])
    elements = np.vstack([lower, upper])

    k = np.arange(n)
    bottom = np.column_stack([idx(k, 0), idx(k + 1, 0)])
    right = np.column_stack([idx(n, k), idx(n, k + 1)])
    top = np.column_stack([idx(n - k, n), idx(n - k - 1, n)])
    left = np.column_stack([idx(0, n - k), idx(0, n - k - 1)])
    facets = np.vstack([bottom, right, top, left])
    return Mesh(nodes, elements, facets)


def p1_gradient(mesh: Mesh, u, element_index: int) -> np.ndarray:
    """Constant gradient of the P1 interpolant of ``u`` on one element."""
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.n_nodes,):
        raise InvalidArgumentError(f"field has shape {u.shape}, expected ({mesh.n_nodes},)")
    if not 0 <= element_index < mesh.n_elements:
        raise InvalidArgumentError(f"element index {element_index} out of range")
    verts = mesh.elements[element_index]
    return u[verts] @ mesh.element_gradients[element_index]


def read_mesh(path) -> Mesh:
    """Read the plain-text mesh format.

    First line ``dim N_v N_e N_f``, then ``N_v`` coordinate lines, ``N_e``
    element lines and ``N_f`` facet lines, all whitespace separated with
    0-based node indices.
    """
    lines = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise InvalidArgumentError(f"{path}: empty mesh file")
    try:
        dim, n_v, n_e, n_f = (int(v) for v in lines[0])
    except ValueError as exc:
        raise InvalidArgumentError(f"{path}: bad header {lines[0]!r}") from exc
    if dim not in (1, 2):
        raise InvalidArgumentError(f"{path}: dim must be 1 or 2")
    body = lines[1:]
    if len(body) != n_v + n_e + n_f:
        raise InvalidArgumentError(
            f"{path}: expected {n_v + n_e + n_f} data lines, found {len(body)}"
        )
    try:
        nodes = np.array(body[:n_v], dtype=float).reshape(n_v, dim)
        elements = np.array(body[n_v:n_v + n_e], dtype=np.int64).reshape(n_e, dim + 1)
        facets = np.array(body[n_v + n_e:], dtype=np.int64).reshape(n_f, dim)
    except ValueError as exc:
        raise InvalidArgumentError(f"{path}: malformed data line") from exc
    return Mesh(nodes, elements, facets)


def write_mesh(mesh: Mesh, path) -> None:
    out = [f"{mesh.dim} {mesh.n_nodes} {mesh.n_elements} {mesh.n_facets}"]
    out += [" ".join(f"{c:.17g}" for c in row) for row in mesh.nodes]
    out += [" ".join(str(v) for v in row) for row in mesh.elements]
    out += [" ".join(str(v) for v in row) for row in mesh.boundary_facets]
    Path(path).write_text("\n".join(out) + "\n")
