"""Quadric-error edge-collapse simplification to a target face count.

Each vertex accumulates the plane quadrics of its incident faces; an edge
collapse is priced by the summed quadric evaluated at the best placement
among the optimal solve, both endpoints, and the midpoint. Collapses that
would flip a face normal or pinch the surface into a non-manifold
configuration are rejected. A lazy priority queue with per-vertex version
counters keeps the process deterministic: ties break on the smaller
vertex-index pair.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .mesh import Mesh

_DET_EPS = 1e-12
_PSD_TOL = 1e-9
_AREA_EPS = 1e-30


@dataclass(frozen=True)
class CollapseCandidate:
    u: int
    v: int
    position: np.ndarray  # (3,) placement
    cost: float


@dataclass(frozen=True)
class SimplifyResult:
    mesh: Mesh
    reached_target: bool
    collapses: int
    # origin_vertices[j] = index of the input vertex that survived as j
    origin_vertices: np.ndarray


def face_plane_quadrics(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """(F, 4, 4) plane quadric p p^T per face, unit plane normals.

    Zero-area faces contribute a zero quadric.
    """
    a = vertices[faces[:, 0]]
    n = np.cross(vertices[faces[:, 1]] - a, vertices[faces[:, 2]] - a)
    norms = np.linalg.norm(n, axis=1)
    good = norms > _AREA_EPS
    unit = np.zeros_like(n)
    unit[good] = n[good] / norms[good, None]
    d = -np.einsum("ij,ij->i", unit, a)
    p = np.concatenate([unit, d[:, None]], axis=1)
    return p[:, :, None] * p[:, None, :]


def vertex_quadrics(mesh: Mesh) -> np.ndarray:
    """(V, 4, 4) summed incident-face quadrics, validated symmetric PSD."""
    quads = np.zeros((mesh.vertex_count, 4, 4))
    fq = face_plane_quadrics(mesh.vertices, mesh.faces)
    for corner in range(3):
        np.add.at(quads, mesh.faces[:, corner], fq)
    scale = 1.0 + np.abs(quads).max(initial=0.0)
    if quads.size:
        eigs = np.linalg.eigvalsh(quads)
        if eigs.min() < -_PSD_TOL * scale:
            raise ValueError("vertex quadric is not positive semi-definite")
    return quads


def _quadric_cost(q: np.ndarray, pos: np.ndarray) -> float:
    h = np.append(pos, 1.0)
    return float(h @ q @ h)


def collapse_cost(
    q1: np.ndarray,
    q2: np.ndarray,
    p1: np.ndarray,
    p2: np.ndarray,
    boundary: bool = False,
) -> CollapseCandidate:
    """Best placement and cost for collapsing an edge with endpoint quadrics.

    Boundary edges are restricted to endpoint placements so open borders
    do not drift.
    """
    q = q1 + q2
    if boundary:
        candidates = [p1, p2]
    else:
        candidates = []
        a = q[:3, :3]
        if abs(np.linalg.det(a)) >= _DET_EPS:
            candidates.append(np.linalg.solve(a, -q[:3, 3]))
        candidates.extend([p1, p2, 0.5 * (p1 + p2)])
    best_pos, best_cost = None, None
    for pos in candidates:
        c = _quadric_cost(q, pos)
        if best_cost is None or c < best_cost:
            best_pos, best_cost = pos, c
    return CollapseCandidate(u=-1, v=-1, position=np.asarray(best_pos, float), cost=best_cost)


class _CollapseState:
    """Mutable scratch state for one simplification run."""

    def __init__(self, mesh: Mesh):
        self.positions = mesh.vertices.copy()
        self.faces = mesh.faces.copy()
        self.quadrics = vertex_quadrics(mesh)
        self.face_alive = np.ones(mesh.face_count, dtype=bool)
        self.vertex_alive = np.ones(mesh.vertex_count, dtype=bool)
        self.version = np.zeros(mesh.vertex_count, dtype=np.int64)
        self.vertex_faces = [set() for _ in range(mesh.vertex_count)]
        for fi, f in enumerate(self.faces):
            for vi in f:
                self.vertex_faces[vi].add(fi)
        self.neighbors = [set(map(int, adj)) for adj in mesh.adjacency]
        self.n_alive_faces = mesh.face_count

    def shared_faces(self, u: int, v: int) -> set:
        return self.vertex_faces[u] & self.vertex_faces[v]

    def candidate(self, u: int, v: int):
        """Heap entry for edge (u, v); u < v enforced for tie-breaking."""
        if u > v:
            u, v = v, u
        boundary = len(self.shared_faces(u, v)) < 2
        cand = collapse_cost(
            self.quadrics[u], self.quadrics[v],
            self.positions[u], self.positions[v],
            boundary=boundary,
        )
        return (
            cand.cost,
            u,
            v,
            int(self.version[u]),
            int(self.version[v]),
            tuple(cand.position),
        )

    def legal(self, u: int, v: int, placement: np.ndarray) -> bool:
        shared = self.shared_faces(u, v)
        common = self.neighbors[u] & self.neighbors[v]
        if len(common) > max(len(shared), 1):
            return False  # collapsing would pinch the surface
        # no surviving face may flip its normal or collapse to zero area
        for fi in (self.vertex_faces[u] | self.vertex_faces[v]) - shared:
            tri = self.faces[fi]
            old = self.positions[tri]
            new = old.copy()
            for k in range(3):
                if tri[k] == u or tri[k] == v:
                    new[k] = placement
            n_old = np.cross(old[1] - old[0], old[2] - old[0])
            n_new = np.cross(new[1] - new[0], new[2] - new[0])
            if float(n_new @ n_new) <= _AREA_EPS:
                return False
            if float(n_old @ n_new) < 0.0:
                return False
        return True

    def collapse(self, u: int, v: int, placement: np.ndarray) -> None:
        """Merge v into u at the given placement."""
        shared = self.shared_faces(u, v)
        self.positions[u] = placement
        self.quadrics[u] = self.quadrics[u] + self.quadrics[v]
        for fi in shared:
            self.face_alive[fi] = False
            for vi in self.faces[fi]:
                self.vertex_faces[vi].discard(fi)
            self.n_alive_faces -= 1
        for fi in list(self.vertex_faces[v]):
            tri = self.faces[fi]
            tri[tri == v] = u
            self.vertex_faces[v].discard(fi)
            self.vertex_faces[u].add(fi)
        # neighborhoods around the collapse are rebuilt from faces to stay
        # exactly face-derived
        affected = {u} | self.neighbors[u] | self.neighbors[v]
        affected.discard(v)
        self.vertex_alive[v] = False
        self.neighbors[v] = set()
        for x in affected:
            nb = set()
            for fi in self.vertex_faces[x]:
                for vi in self.faces[fi]:
                    if vi != x:
                        nb.add(int(vi))
            self.neighbors[x] = nb
        self.version[u] += 1
        self.version[v] += 1


def simplify_to_face_count(mesh: Mesh, target_faces: int):
    """Collapse edges until at most `target_faces` faces remain.

    Returns a SimplifyResult; `reached_target` is False when no legal
    collapse remained before the target was met.
    """
    if mesh.face_count < 4:
        raise ValueError("mesh must have at least 4 faces")
    if target_faces < 4:
        raise ValueError("target_faces must be >= 4")
    if mesh.face_count <= target_faces:
        return SimplifyResult(
            mesh=mesh,
            reached_target=True,
            collapses=0,
            origin_vertices=np.arange(mesh.vertex_count, dtype=np.int64),
        )

    state = _CollapseState(mesh)
    heap = [state.candidate(int(u), int(v)) for u, v in mesh.edges]
    heapq.heapify(heap)
    collapses = 0
    while state.n_alive_faces > target_faces and heap:
        cost, u, v, ver_u, ver_v, pos = heapq.heappop(heap)
        if ver_u != state.version[u] or ver_v != state.version[v]:
            continue  # stale entry
        if v not in state.neighbors[u]:
            continue
        placement = np.array(pos)
        if not state.legal(u, v, placement):
            continue
        state.collapse(u, v, placement)
        collapses += 1
        for n in sorted(state.neighbors[u]):
            heapq.heappush(heap, state.candidate(u, n))

    keep = np.flatnonzero(state.vertex_alive)
    remap = np.full(mesh.vertex_count, -1, dtype=np.int64)
    remap[keep] = np.arange(keep.size)
    new_faces = remap[state.faces[state.face_alive]]
    out = Mesh.from_arrays(state.positions[keep], new_faces)
    return SimplifyResult(
        mesh=out,
        reached_target=state.n_alive_faces <= target_faces,
        collapses=collapses,
        origin_vertices=keep,
    )
