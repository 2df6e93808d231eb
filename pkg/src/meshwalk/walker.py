"""Random walks over mesh vertices and their per-step delta features.

A walk visits each vertex at most once. From the current vertex it steps
uniformly at random to an un-visited neighbor; when none exists the walk
is tracked backwards along the discovery sequence until some earlier
vertex still has an un-visited neighbor (backtracked vertices are not
re-appended). If the whole sequence is exhausted (e.g. a connected
component is fully covered), the walk jumps to a uniform random
un-visited vertex and the step is flagged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mesh import Mesh


@dataclass(frozen=True)
class Walk:
    """Vertex discovery sequence with per-step restart flags.

    vertices[0] is the start vertex and jump_flags[0] is False; the
    adjacent-to-earlier-vertex property applies from step 1 on.
    """

    vertices: np.ndarray  # (L,) int64, all distinct
    jump_flags: np.ndarray  # (L,) bool

    def __len__(self) -> int:
        return self.vertices.shape[0]

    @property
    def start_vertex(self) -> int:
        return int(self.vertices[0])


def default_walk_length(vertex_count: int) -> int:
    """ceil(V / 2.5), the default number of walk steps."""
    if vertex_count < 1:
        raise ValueError("vertex_count must be >= 1")
    return math.ceil(vertex_count / 2.5)


def generate_walk(
    mesh: Mesh, start_vertex: int, length: int, rng: np.random.Generator
) -> Walk:
    """Generate one random walk of `min(length, V)` distinct vertices."""
    nv = mesh.vertex_count
    if not 0 <= start_vertex < nv:
        raise ValueError(f"start_vertex {start_vertex} out of range")
    if length < 1:
        raise ValueError("length must be >= 1")
    length = min(length, nv)

    adjacency = mesh.adjacency
    visited = np.zeros(nv, dtype=bool)
    # a sequence position is dead once its vertex has no un-visited
    # neighbors; that can never change, so backtracking skips dead entries
    dead = np.zeros(length, dtype=bool)
    seq = np.empty(length, dtype=np.int64)
    jumps = np.zeros(length, dtype=bool)

    seq[0] = start_vertex
    visited[start_vertex] = True
    n = 1
    while n < length:
        cursor = n - 1
        nxt = -1
        while cursor >= 0:
            if dead[cursor]:
                cursor -= 1
                continue
            nbrs = adjacency[seq[cursor]]
            unvisited = nbrs[~visited[nbrs]]
            if unvisited.size:
                nxt = int(unvisited[rng.integers(unvisited.size)])
                break
            dead[cursor] = True
            cursor -= 1
        if nxt < 0:
            remaining = np.flatnonzero(~visited)
            nxt = int(remaining[rng.integers(remaining.size)])
            jumps[n] = True
        seq[n] = nxt
        visited[nxt] = True
        n += 1
    return Walk(vertices=seq, jump_flags=jumps)


def walk_features(mesh: Mesh, walk: Walk) -> np.ndarray:
    """Per-step 3D translation from the previous walk vertex; step 0 is zero."""
    return features_from_positions(mesh.vertices, walk.vertices)


def features_from_positions(vertices: np.ndarray, sequence: np.ndarray) -> np.ndarray:
    """Delta features for a vertex index sequence against given positions."""
    pos = vertices[sequence]
    feats = np.zeros_like(pos)
    feats[1:] = pos[1:] - pos[:-1]
    return feats
