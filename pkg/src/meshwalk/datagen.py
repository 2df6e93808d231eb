"""Procedural triangle-mesh families and deterministic dataset generation.

Five closed shape families are provided: subdivided icospheres, gridded
boxes, tori, capped cylinders, and dumbbells (a surface of revolution with
two bulbs joined by a neck).  The dumbbell also carries per-vertex part
labels (bottom bulb / neck / top bulb, split on the height coordinate),
which makes it the segmentation family.

``generate_dataset`` writes instances to disk with a manifest.  Every
instance is perturbed by a seeded anisotropic scale and a vertex jitter
proportional to the mean edge length, so files are reproducible bit-for-bit
from (seed, family, index).
"""

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .mesh import Mesh, save_off

FAMILIES = ("icosphere", "box", "torus", "cylinder", "dumbbell")

# Height thresholds separating the dumbbell's three labelled parts.
_DUMBBELL_NECK_HALF_HEIGHT = 0.3


def icosphere(subdivisions=2):
    """Icosahedron subdivided n times, vertices projected to the unit sphere."""
    phi = (1.0 + math.sqrt(5.0)) / 2.0
    verts = np.array([
        (-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
        (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
        (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1),
    ], dtype=np.float64)
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = list(verts / np.linalg.norm(verts, axis=1, keepdims=True))

    for _ in range(subdivisions):
        midpoint = {}

        def mid(a, b):
            key = (a, b) if a < b else (b, a)
            idx = midpoint.get(key)
            if idx is None:
                p = verts[a] + verts[b]
                verts.append(p / np.linalg.norm(p))
                idx = len(verts) - 1
                midpoint[key] = idx
            return idx

        next_faces = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            next_faces.extend([(a, ab, ca), (b, bc, ab),
                               (c, ca, bc), (ab, bc, ca)])
        faces = next_faces

    return Mesh.from_arrays(np.array(verts), np.array(faces, dtype=np.int64))


def box(segments=5):
    """Axis-aligned cube [-1, 1]^3, each side an n-by-n quad grid."""
    ticks = np.linspace(-1.0, 1.0, segments + 1)
    index = {}
    verts = []

    def vid(point):
        key = (point[0], point[1], point[2])
        idx = index.get(key)
        if idx is None:
            idx = len(verts)
            verts.append(key)
            index[key] = idx
        return idx

    faces = []
    for axis in range(3):
        b_axis, c_axis = [a for a in range(3) if a != axis]
        even = (axis, b_axis, c_axis) in ((0, 1, 2), (2, 0, 1))
        for sign in (1.0, -1.0):
            outward = even if sign > 0 else not even
            for i in range(segments):
                for j in range(segments):
                    corners = []
                    for di, dj in ((0, 0), (1, 0), (1, 1), (0, 1)):
                        p = [0.0, 0.0, 0.0]
                        p[axis] = sign
                        p[b_axis] = ticks[i + di]
                        p[c_axis] = ticks[j + dj]
                        corners.append(vid(p))
                    v00, v10, v11, v01 = corners
                    if outward:
                        faces.extend([(v00, v10, v11), (v00, v11, v01)])
                    else:
                        faces.extend([(v00, v11, v10), (v00, v01, v11)])
    return Mesh.from_arrays(np.array(verts), np.array(faces, dtype=np.int64))


def torus(major_segments=15, minor_segments=10,
          major_radius=1.0, minor_radius=0.4):
    nm, nn = major_segments, minor_segments
    theta = 2.0 * np.pi * np.arange(nm) / nm
    phi = 2.0 * np.pi * np.arange(nn) / nn
    verts = np.empty((nm, nn, 3))
    ring = major_radius + minor_radius * np.cos(phi)
    verts[:, :, 0] = np.cos(theta)[:, None] * ring
    verts[:, :, 1] = np.sin(theta)[:, None] * ring
    verts[:, :, 2] = minor_radius * np.sin(phi)
    faces = []
    for i in range(nm):
        i2 = (i + 1) % nm
        for j in range(nn):
            j2 = (j + 1) % nn
            v00 = i * nn + j
            v10 = i2 * nn + j
            v11 = i2 * nn + j2
            v01 = i * nn + j2
            faces.extend([(v00, v10, v11), (v00, v11, v01)])
    return Mesh.from_arrays(verts.reshape(-1, 3),
                            np.array(faces, dtype=np.int64))


def _revolve(radii, heights, radial_segments):
    """Closed surface of revolution around z with flat apex-fan end caps.

    radii/heights give one ring per profile sample (all radii > 0).
    Returns (mesh, ring_of_vertex) where ring_of_vertex maps each vertex to
    its profile row, with the two cap apexes mapped to the end rows.
    """
    n = radial_segments
    rows = len(radii)
    theta = 2.0 * np.pi * np.arange(n) / n
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    verts = np.empty((rows * n + 2, 3))
    for k in range(rows):
        verts[k * n:(k + 1) * n, 0] = radii[k] * cos_t
        verts[k * n:(k + 1) * n, 1] = radii[k] * sin_t
        verts[k * n:(k + 1) * n, 2] = heights[k]
    bottom = rows * n
    top = rows * n + 1
    verts[bottom] = (0.0, 0.0, heights[0])
    verts[top] = (0.0, 0.0, heights[-1])

    faces = []
    for k in range(rows - 1):
        for i in range(n):
            i2 = (i + 1) % n
            v00 = k * n + i
            v10 = k * n + i2
            v11 = (k + 1) * n + i2
            v01 = (k + 1) * n + i
            faces.extend([(v00, v10, v11), (v00, v11, v01)])
    first, last = 0, (rows - 1) * n
    for i in range(n):
        i2 = (i + 1) % n
        faces.append((bottom, first + i2, first + i))
        faces.append((top, last + i, last + i2))

    ring = np.repeat(np.arange(rows), n)
    ring = np.concatenate([ring, [0, rows - 1]])
    mesh = Mesh.from_arrays(verts, np.array(faces, dtype=np.int64))
    return mesh, ring


def cylinder(radial_segments=12, height_segments=11,
             radius=0.6, height=2.0):
    rows = height_segments + 1
    heights = np.linspace(-height / 2.0, height / 2.0, rows)
    radii = np.full(rows, radius)
    mesh, _ = _revolve(radii, heights, radial_segments)
    return mesh


def dumbbell(radial_segments=12, height_segments=12,
             neck_radius=0.25, bulb_radius=(0.62, 0.45),
             bulb_center=0.55, bulb_width=0.28):
    """Two bulbs joined by a thin neck, plus per-vertex part labels.

    Returns (mesh, labels) with labels 0 = bottom bulb, 1 = neck,
    2 = top bulb, split on the height coordinate of the base profile.
    bulb_radius is a (bottom, top) pair; a single float gives equal bulbs.
    The stock bulbs are deliberately unequal -- with equal bulbs the shape
    is symmetric under a flip that swaps the two end labels, which makes
    them unlearnable once orientations are randomized.
    """
    rows = height_segments + 1
    z = np.linspace(-1.0, 1.0, rows)
    r_bottom, r_top = np.broadcast_to(np.asarray(bulb_radius, float), (2,))
    radii = (neck_radius
             + r_top * np.exp(-((z - bulb_center) / bulb_width) ** 2)
             + r_bottom * np.exp(-((z + bulb_center) / bulb_width) ** 2))
    mesh, ring = _revolve(radii, z, radial_segments)
    ring_z = z[ring]
    labels = np.ones(mesh.vertex_count, dtype=np.int64)
    labels[ring_z < -_DUMBBELL_NECK_HALF_HEIGHT] = 0
    labels[ring_z > _DUMBBELL_NECK_HALF_HEIGHT] = 2
    return mesh, labels


def make_shape(family, **params):
    """Build one canonical instance; returns (mesh, vertex_labels or None)."""
    if family == "icosphere":
        return icosphere(**params), None
    if family == "box":
        return box(**params), None
    if family == "torus":
        return torus(**params), None
    if family == "cylinder":
        return cylinder(**params), None
    if family == "dumbbell":
        return dumbbell(**params)
    raise ConfigError(f"unknown shape family {family!r}; "
                      f"expected one of {FAMILIES}")


@dataclass(frozen=True)
class ShapeSpec:
    family: str
    count: int
    class_id: int = -1
    params: dict = field(default_factory=dict)


def classification_specs(count=20):
    """The stock three-class set, roughly 300 faces per mesh."""
    return [
        ShapeSpec("icosphere", count, 0, {"subdivisions": 2}),
        ShapeSpec("box", count, 1, {"segments": 5}),
        ShapeSpec("torus", count, 2,
                  {"major_segments": 15, "minor_segments": 10}),
    ]


def segmentation_specs(count=50):
    return [ShapeSpec("dumbbell", count, 0,
                      {"radial_segments": 12, "height_segments": 12})]


def _perturb(mesh, rng, jitter, scale_range):
    scale = rng.uniform(scale_range[0], scale_range[1], size=3)
    verts = mesh.vertices * scale
    if jitter > 0.0:
        step = float(mesh.edge_lengths.mean()) * jitter
        verts = verts + rng.normal(0.0, step, size=verts.shape)
    return mesh.replace_vertices(verts)


def generate_dataset(root, specs, seed, task, class_names=None,
                     jitter=0.08, scale_range=(0.85, 1.15),
                     test_fraction=0.2):
    """Write meshes, label sidecars and a manifest under *root*.

    The last floor(test_fraction * count) instances of each spec form the
    test split.  Instance i of a spec is perturbed with a generator seeded
    by SeedSequence([seed, class_id, i]), independent of every other
    instance.
    """
    from .dataset import (save_manifest, write_class_label,
                          write_vertex_labels)

    root = Path(root)
    entries = []
    num_classes = 0
    for spec in specs:
        base_mesh, base_labels = make_shape(spec.family, **spec.params)
        n_test = int(math.floor(test_fraction * spec.count))
        n_train = spec.count - n_test
        for i in range(spec.count):
            split = "train" if i < n_train else "test"
            sub = root / split
            sub.mkdir(parents=True, exist_ok=True)
            rng = np.random.default_rng(
                np.random.SeedSequence([seed, max(spec.class_id, 0), i]))
            mesh = _perturb(base_mesh, rng, jitter, scale_range)
            stem = f"{spec.family}_{i:03d}"
            mesh_rel = f"{split}/{stem}.off"
            label_rel = f"{split}/{stem}.labels"
            save_off(mesh, root / mesh_rel)
            entry = {"mesh": mesh_rel, "labels": label_rel,
                     "split": split, "family": spec.family}
            if task == "classification":
                write_class_label(root / label_rel, spec.class_id)
                entry["class_id"] = spec.class_id
                num_classes = max(num_classes, spec.class_id + 1)
            else:
                write_vertex_labels(root / label_rel, base_labels)
                num_classes = max(num_classes, int(base_labels.max()) + 1)
            entries.append(entry)

    if class_names is None:
        if task == "classification":
            class_names = [""] * num_classes
            for spec in specs:
                class_names[spec.class_id] = spec.family
        else:
            class_names = [f"part{i}" for i in range(num_classes)]
    return save_manifest(root, task, num_classes, class_names, entries)
