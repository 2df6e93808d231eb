"""Triangle mesh data model: file IO, adjacency, normalization, rotation.

Meshes are immutable after construction; all derived structure (sorted
neighbor lists, unique edge set) is built once so that seeded walk
generation is reproducible across platforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np


class MeshError(ValueError):
    """Invalid mesh data (bad indices, degenerate faces, parse failures)."""


@dataclass(frozen=True)
class Mesh:
    """Triangle mesh with derived adjacency and edge list.

    vertices     : (V, 3) float64 positions
    faces        : (F, 3) int64 vertex indices, three distinct per face
    adjacency    : per-vertex sorted array of neighbor indices
    edges        : (E, 2) int64, each row (u, v) with u < v, unique,
                   sorted lexicographically
    edge_lengths : (E,) float64 Euclidean lengths
    """

    vertices: np.ndarray
    faces: np.ndarray
    adjacency: tuple
    edges: np.ndarray
    edge_lengths: np.ndarray

    @property
    def vertex_count(self) -> int:
        return self.vertices.shape[0]

    @property
    def face_count(self) -> int:
        return self.faces.shape[0]

    @property
    def edge_count(self) -> int:
        return self.edges.shape[0]

    @staticmethod
    def from_arrays(vertices, faces) -> "Mesh":
        """Build a mesh from raw arrays, validating and deriving structure."""
        vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise MeshError(f"vertices must be (V, 3), got {vertices.shape}")
        faces = np.ascontiguousarray(faces, dtype=np.int64)
        if faces.size == 0:
            faces = faces.reshape(0, 3)
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise MeshError(f"faces must be (F, 3), got {faces.shape}")
        nv = vertices.shape[0]
        if faces.size:
            if faces.min() < 0 or faces.max() >= nv:
                bad = int(np.abs(faces).max())
                raise MeshError(f"face index {bad} out of range for {nv} vertices")
            degen = (
                (faces[:, 0] == faces[:, 1])
                | (faces[:, 1] == faces[:, 2])
                | (faces[:, 0] == faces[:, 2])
            )
            if degen.any():
                raise MeshError(f"degenerate face at row {int(np.flatnonzero(degen)[0])}")
        edges = _unique_edges(faces)
        adjacency = _adjacency_from_edges(nv, edges)
        lengths = _edge_lengths(vertices, edges)
        return Mesh(vertices, faces, adjacency, edges, lengths)

    def replace_vertices(self, vertices) -> "Mesh":
        """New mesh with the same connectivity and different positions."""
        vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        if vertices.shape != self.vertices.shape:
            raise MeshError("replacement vertices must match shape")
        return replace(
            self,
            vertices=vertices,
            edge_lengths=_edge_lengths(vertices, self.edges),
        )


def _unique_edges(faces: np.ndarray) -> np.ndarray:
    if faces.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    pairs = faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
    pairs.sort(axis=1)
    return np.unique(pairs, axis=0)


def _adjacency_from_edges(nv: int, edges: np.ndarray) -> tuple:
    if edges.size == 0:
        return tuple(np.zeros(0, dtype=np.int64) for _ in range(nv))
    both = np.concatenate([edges, edges[:, ::-1]])
    order = np.lexsort((both[:, 1], both[:, 0]))
    both = both[order]
    counts = np.bincount(both[:, 0], minlength=nv)
    return tuple(np.split(both[:, 1].copy(), np.cumsum(counts)[:-1]))


def _edge_lengths(vertices: np.ndarray, edges: np.ndarray) -> np.ndarray:
    if edges.size == 0:
        return np.zeros(0, dtype=np.float64)
    d = vertices[edges[:, 0]] - vertices[edges[:, 1]]
    return np.linalg.norm(d, axis=1)


# ---------------------------------------------------------------------------
# File IO (ASCII OFF and OBJ; geometry records only)


def load_mesh(path, fmt: str | None = None) -> Mesh:
    """Load an OFF or OBJ file. Polygons are fan-triangulated."""
    path = str(path)
    if fmt is None:
        lower = path.lower()
        if lower.endswith(".off"):
            fmt = "off"
        elif lower.endswith(".obj"):
            fmt = "obj"
        else:
            raise MeshError(f"cannot infer format of {path!r}; pass fmt=")
    fmt = fmt.lower()
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if fmt == "off":
        return parse_off(text)
    if fmt == "obj":
        return parse_obj(text)
    raise MeshError(f"unsupported format {fmt!r}")


def _fan_triangulate(poly, lineno):
    if len(poly) < 3:
        raise MeshError(f"line {lineno}: face with {len(poly)} vertices")
    return [(poly[0], poly[i], poly[i + 1]) for i in range(1, len(poly) - 1)]


def parse_off(text: str) -> Mesh:
    lines = text.splitlines()
    # significant lines with their original 1-based numbers
    sig = [
        (i + 1, ln.strip())
        for i, ln in enumerate(lines)
        if ln.strip() and not ln.lstrip().startswith("#")
    ]
    if not sig:
        raise MeshError("line 1: empty OFF file")
    lineno, header = sig[0]
    pos = 1
    if header == "OFF":
        if len(sig) < 2:
            raise MeshError(f"line {lineno}: missing OFF count line")
        lineno, counts_line = sig[1]
        pos = 2
    elif header.startswith("OFF"):
        counts_line = header[3:].strip()
    else:
        raise MeshError(f"line {lineno}: expected OFF header, got {header!r}")
    parts = counts_line.split()
    if len(parts) < 2:
        raise MeshError(f"line {lineno}: bad OFF count line {counts_line!r}")
    try:
        nv, nf = int(parts[0]), int(parts[1])
    except ValueError:
        raise MeshError(f"line {lineno}: bad OFF counts {counts_line!r}") from None
    if len(sig) - pos < nv + nf:
        raise MeshError(f"line {lineno}: OFF promises {nv} vertices and {nf} faces, file is short")
    verts = np.empty((nv, 3), dtype=np.float64)
    for k in range(nv):
        lineno, ln = sig[pos + k]
        fields = ln.split()
        if len(fields) < 3:
            raise MeshError(f"line {lineno}: expected 3 coordinates")
        try:
            verts[k] = [float(fields[0]), float(fields[1]), float(fields[2])]
        except ValueError:
            raise MeshError(f"line {lineno}: bad vertex {ln!r}") from None
    tris = []
    for k in range(nf):
        lineno, ln = sig[pos + nv + k]
        fields = ln.split()
        try:
            n = int(fields[0])
            poly = [int(f) for f in fields[1 : 1 + n]]
        except (ValueError, IndexError):
            raise MeshError(f"line {lineno}: bad face {ln!r}") from None
        if len(poly) != n:
            raise MeshError(f"line {lineno}: face promises {n} indices, has {len(poly)}")
        tris.extend(_fan_triangulate(poly, lineno))
    return Mesh.from_arrays(verts, np.array(tris, dtype=np.int64).reshape(-1, 3))


def parse_obj(text: str) -> Mesh:
    verts = []
    tris = []
    for i, ln in enumerate(text.splitlines()):
        lineno = i + 1
        fields = ln.split()
        if not fields or fields[0].startswith("#"):
            continue
        if fields[0] == "v":
            if len(fields) < 4:
                raise MeshError(f"line {lineno}: bad vertex {ln!r}")
            try:
                verts.append((float(fields[1]), float(fields[2]), float(fields[3])))
            except ValueError:
                raise MeshError(f"line {lineno}: bad vertex {ln!r}") from None
        elif fields[0] == "f":
            poly = []
            for tok in fields[1:]:
                head = tok.split("/")[0]
                try:
                    idx = int(head)
                except ValueError:
                    raise MeshError(f"line {lineno}: bad face token {tok!r}") from None
                # OBJ is 1-based; negatives are relative to the current count
                poly.append(idx - 1 if idx > 0 else len(verts) + idx)
            tris.extend(_fan_triangulate(poly, lineno))
        # all other records (vn, vt, usemtl, ...) are ignored
    return Mesh.from_arrays(
        np.array(verts, dtype=np.float64).reshape(-1, 3),
        np.array(tris, dtype=np.int64).reshape(-1, 3),
    )


def save_off(mesh: Mesh, path) -> None:
    """Write ASCII OFF with 9-significant-digit coordinates."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"OFF\n{mesh.vertex_count} {mesh.face_count} 0\n")
        for v in mesh.vertices:
            fh.write(f"{v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        for f in mesh.faces:
            fh.write(f"3 {f[0]} {f[1]} {f[2]}\n")


# ---------------------------------------------------------------------------
# Geometric transforms


def normalize_unit_sphere(mesh: Mesh) -> Mesh:
    """Center the vertex centroid at the origin and scale max radius to 1."""
    if mesh.vertex_count == 0:
        raise MeshError("cannot normalize an empty mesh")
    centered = mesh.vertices - mesh.vertices.mean(axis=0)
    radius = float(np.linalg.norm(centered, axis=1).max())
    if radius < 1e-300:
        return mesh.replace_vertices(np.zeros_like(centered))
    return mesh.replace_vertices(centered / radius)


def rotation_matrix(alpha: float, beta: float, gamma: float) -> np.ndarray:
    """Rz(gamma) @ Ry(beta) @ Rx(alpha)."""
    ca, sa = math.cos(alpha), math.sin(alpha)
    cb, sb = math.cos(beta), math.sin(beta)
    cg, sg = math.cos(gamma), math.sin(gamma)
    rx = np.array([[1, 0, 0], [0, ca, -sa], [0, sa, ca]])
    ry = np.array([[cb, 0, sb], [0, 1, 0], [-sb, 0, cb]])
    rz = np.array([[cg, -sg, 0], [sg, cg, 0], [0, 0, 1]])
    return rz @ ry @ rx


def random_rotation(mesh: Mesh, rng: np.random.Generator) -> Mesh:
    """Rotate by independent uniform per-axis Euler angles in [0, 2*pi)."""
    alpha, beta, gamma = rng.uniform(0.0, 2.0 * math.pi, size=3)
    r = rotation_matrix(alpha, beta, gamma)
    return mesh.replace_vertices(mesh.vertices @ r.T)


def connected_components(mesh: Mesh) -> np.ndarray:
    """Per-vertex component ids, 0-based, ordered by smallest member index."""
    nv = mesh.vertex_count
    comp = np.full(nv, -1, dtype=np.int64)
    next_id = 0
    for seed in range(nv):
        if comp[seed] >= 0:
            continue
        comp[seed] = next_id
        stack = [seed]
        while stack:
            v = stack.pop()
            for n in mesh.adjacency[v]:
                if comp[n] < 0:
                    comp[n] = next_id
                    stack.append(int(n))
        next_id += 1
    return comp


def edge_face_counts(mesh: Mesh) -> np.ndarray:
    """Number of faces incident to each edge (aligned with mesh.edges)."""
    if mesh.face_count == 0:
        return np.zeros(mesh.edge_count, dtype=np.int64)
    pairs = mesh.faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
    pairs.sort(axis=1)
    uniq, counts = np.unique(pairs, axis=0, return_counts=True)
    # mesh.edges is the sorted unique set of the same pairs
    return counts


def is_closed_manifold(mesh: Mesh) -> bool:
    """True when every edge is shared by exactly two faces."""
    counts = edge_face_counts(mesh)
    return bool(counts.size) and bool((counts == 2).all())
