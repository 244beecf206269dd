"""Structured triangulations of axis-aligned rectangles."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Mesh:
    """Uniform triangulation of [x0,x1] x [y0,y1] into 2*nx*ny triangles.

    Each grid cell is split along its lower-left to upper-right diagonal;
    triangle vertices are stored counter-clockwise.
    """

    vertices: np.ndarray  # (nv, 2)
    triangles: np.ndarray  # (nt, 3) int
    boundary_vertex: np.ndarray  # (nv,) bool
    bounds: tuple  # (x0, x1, y0, y1)
    nx: int
    ny: int
    _edge_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_triangles(self):
        return len(self.triangles)

    @property
    def h(self):
        """Maximum triangle diameter (the cell diagonal on this mesh)."""
        p = self.vertices[self.triangles]
        sides = p - np.roll(p, 1, axis=1)
        return float(np.sqrt((sides**2).sum(axis=2)).max())

    def signed_areas(self):
        p = self.vertices[self.triangles]
        a, b, c = p[:, 0], p[:, 1], p[:, 2]
        return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
                      - (c[:, 0] - a[:, 0]) * (b[:, 1] - a[:, 1]))

    def edges(self):
        """Unique undirected edges and related tables.

        Returns (edges, tri_edges, boundary_edge):
          edges          (ne, 2) vertex pairs, each sorted, lexicographic order
          tri_edges      (nt, 3) edge index of local edge k = (v_k, v_{k+1})
          boundary_edge  (ne,) True where the edge belongs to one triangle
        """
        if "edges" not in self._edge_cache:
            t = self.triangles
            raw = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
            raw.sort(axis=1)
            edges, inverse, counts = np.unique(
                raw, axis=0, return_inverse=True, return_counts=True
            )
            tri_edges = inverse.reshape(3, -1).T
            self._edge_cache["edges"] = (edges, tri_edges, counts == 1)
        return self._edge_cache["edges"]


def build_rect_mesh(x0, x1, y0, y1, nx, ny) -> Mesh:
    """Triangulate the rectangle with an nx-by-ny grid of cells."""
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"invalid rectangle bounds ({x0},{x1})x({y0},{y1})")
    if nx < 1 or ny < 1:
        raise ValueError(f"subdivision counts must be >= 1, got nx={nx}, ny={ny}")

    xs = x0 + (x1 - x0) * np.arange(nx + 1) / nx
    ys = y0 + (y1 - y0) * np.arange(ny + 1) / ny
    gx, gy = np.meshgrid(xs, ys)  # index [iy, ix]
    vertices = np.column_stack([gx.ravel(), gy.ravel()])

    idx = np.arange((nx + 1) * (ny + 1)).reshape(ny + 1, nx + 1)
    a = idx[:-1, :-1].ravel()  # lower-left of each cell
    b = idx[:-1, 1:].ravel()   # lower-right
    c = idx[1:, 1:].ravel()    # upper-right
    d = idx[1:, :-1].ravel()   # upper-left
    lower = np.column_stack([a, b, c])  # both CCW, split along a-c
    upper = np.column_stack([a, c, d])
    triangles = np.empty((2 * nx * ny, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    on_edge = np.zeros((ny + 1, nx + 1), dtype=bool)
    on_edge[0, :] = on_edge[-1, :] = True
    on_edge[:, 0] = on_edge[:, -1] = True

    return Mesh(
        vertices=vertices,
        triangles=triangles,
        boundary_vertex=on_edge.ravel(),
        bounds=(float(x0), float(x1), float(y0), float(y1)),
        nx=nx,
        ny=ny,
    )


def boundary_vertices(m: Mesh) -> np.ndarray:
    """Indices of vertices lying on the rectangle boundary, ascending."""
    return np.flatnonzero(m.boundary_vertex)
