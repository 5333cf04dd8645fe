"""Structured rectangular meshes.

Numbering conventions (fixed, relied on throughout the package):

- nodes are row-major: node(i, j) = j*(nx+1) + i with i along x, j along y
- cells are row-major: cell(i, j) = j*nx + i, vertices listed counterclockwise
  starting at the lower-left corner
- edges list all horizontal edges first, then all vertical ones:
  hedge(i, j) = j*nx + i            for i < nx, j <= ny
  vedge(i, j) = nx*(ny+1) + j*(nx+1) + i   for i <= nx, j < ny
- the edges of cell (i, j) are stored in the order (bottom, right, top, left)

Uniform refinement doubles nx and ny; fine cell (i, j) sits inside coarse
cell (i//2, j//2).
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RectDomain:
    """Axis-aligned rectangle (xmin, xmax) x (ymin, ymax)."""

    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def __post_init__(self):
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ValueError(
                f"degenerate domain: [{self.xmin}, {self.xmax}] x [{self.ymin}, {self.ymax}]"
            )

    @property
    def width(self):
        return self.xmax - self.xmin

    @property
    def height(self):
        return self.ymax - self.ymin


class StructuredMesh:
    """Tensor-product mesh of nx*ny rectangular cells.

    Attributes
    ----------
    domain : RectDomain
    nx, ny : int
        Cell counts per direction.
    hx, hy, h : float
        Cell sizes and their maximum.
    nodes : (n_nodes, 2) float array
    cells : (n_cells, 4) int array
        Vertex ids, counterclockwise from the lower-left corner.
    cell_edges : (n_cells, 4) int array
        Edge ids in the order (bottom, right, top, left).
    edge_nodes : (n_edges, 2) int array
        Endpoints; horizontal edges point +x, vertical edges point +y.
    edge_cells : (n_edges, 2) int array
        Adjacent cells (below/above for horizontal, left/right for
        vertical); -1 where the neighbour is missing.
    node_on_boundary, edge_on_boundary : bool arrays
    cell_centers : (n_cells, 2) float array
    """

    def __init__(self, domain, nx, ny):
        if nx < 1 or ny < 1:
            raise ValueError(f"need at least one cell per direction, got nx={nx}, ny={ny}")
        self.domain = domain
        self.nx = int(nx)
        self.ny = int(ny)
        self.hx = domain.width / nx
        self.hy = domain.height / ny
        self.h = max(self.hx, self.hy)

        xs = np.linspace(domain.xmin, domain.xmax, nx + 1)
        ys = np.linspace(domain.ymin, domain.ymax, ny + 1)
        X, Y = np.meshgrid(xs, ys)  # shape (ny+1, nx+1), row-major in j
        self.nodes = np.column_stack([X.ravel(), Y.ravel()])

        ii, jj = np.meshgrid(np.arange(nx), np.arange(ny))
        i = ii.ravel()
        j = jj.ravel()
        n00 = j * (nx + 1) + i
        self.cells = np.column_stack([n00, n00 + 1, n00 + nx + 2, n00 + nx + 1])

        n_hedges = nx * (ny + 1)
        n_vedges = ny * (nx + 1)
        self.n_edges = n_hedges + n_vedges

        def hedge(i, j):
            return j * nx + i

        def vedge(i, j):
            return n_hedges + j * (nx + 1) + i

        self.cell_edges = np.column_stack([
            hedge(i, j), vedge(i + 1, j), hedge(i, j + 1), vedge(i, j),
        ])

        edge_nodes = np.empty((self.n_edges, 2), dtype=np.int64)
        edge_cells = np.full((self.n_edges, 2), -1, dtype=np.int64)
        ih, jh = np.meshgrid(np.arange(nx), np.arange(ny + 1))
        ih = ih.ravel()
        jh = jh.ravel()
        eh = hedge(ih, jh)
        edge_nodes[eh, 0] = jh * (nx + 1) + ih
        edge_nodes[eh, 1] = jh * (nx + 1) + ih + 1
        below = jh > 0
        above = jh < ny
        edge_cells[eh[below], 0] = (jh[below] - 1) * nx + ih[below]
        edge_cells[eh[above], 1] = jh[above] * nx + ih[above]

        iv, jv = np.meshgrid(np.arange(nx + 1), np.arange(ny))
        iv = iv.ravel()
        jv = jv.ravel()
        ev = vedge(iv, jv)
        edge_nodes[ev, 0] = jv * (nx + 1) + iv
        edge_nodes[ev, 1] = (jv + 1) * (nx + 1) + iv
        left = iv > 0
        right = iv < nx
        edge_cells[ev[left], 0] = jv[left] * nx + iv[left] - 1
        edge_cells[ev[right], 1] = jv[right] * nx + iv[right]

        self.edge_nodes = edge_nodes
        self.edge_cells = edge_cells
        self.edge_on_boundary = (edge_cells == -1).any(axis=1)

        inode, jnode = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1))
        self.node_on_boundary = (
            (inode == 0) | (inode == nx) | (jnode == 0) | (jnode == ny)
        ).ravel()

        self.cell_centers = 0.25 * self.nodes[self.cells].sum(axis=1)

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_cells(self):
        return self.cells.shape[0]

    def __repr__(self):
        d = self.domain
        return (f"StructuredMesh({self.nx}x{self.ny} on "
                f"[{d.xmin},{d.xmax}]x[{d.ymin},{d.ymax}])")


def build_mesh(domain, nx, ny):
    """Build a uniform nx-by-ny mesh of the rectangle."""
    return StructuredMesh(domain, nx, ny)


def refine_uniform(mesh):
    """Halve every cell in both directions.

    The result is again a uniform tensor mesh, so it is rebuilt from
    scratch; fine cell (i, j) lies inside coarse cell (i//2, j//2).
    """
    return StructuredMesh(mesh.domain, 2 * mesh.nx, 2 * mesh.ny)
